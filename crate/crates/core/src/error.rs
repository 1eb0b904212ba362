use crate::{config, corpus, evaluation, featurize, learners, serve, stacking};

/// Any failure surfaced by the end-to-end workflow.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Schema(#[from] featurize::SchemaError),
    #[error(transparent)]
    Learn(#[from] learners::LearnError),
    #[error(transparent)]
    Stack(#[from] stacking::StackError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
    #[error(transparent)]
    Serve(#[from] serve::ServeError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}
