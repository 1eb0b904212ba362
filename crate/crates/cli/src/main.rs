use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vandalstack::config::RunConfig;
use vandalstack::corpus::{join_labels, load_corpus, load_labels, truth_lines, LabelSpellings, LabeledExample, MalformedPolicy, Revision};
use vandalstack::evaluation::{self, classical_mds, evaluate, mds_subsample, ScoredExample, DEFAULT_MDS_CAP};
use vandalstack::featurize::{build_schema, encode, extract};
use vandalstack::learners::{ModelSpec, Preset};
use vandalstack::sampling::{sample_and_dedup, DedupOrder, Fraction, SamplingConfig};
use vandalstack::serve::{run_client, run_server, ServerConfig, DEFAULT_WINDOW};
use vandalstack::workflow::{encode_examples, parse_scores, prediction_lines, select_columns, train_pipeline, Selection};
use vandalstack::{StackedPipeline, MODEL_FORMAT, PIPELINE_FORMAT, SCHEMA_FORMAT, VERSION};

#[derive(Parser)]
#[command(
    name = "vandalstack",
    about = "Stacked-ensemble vandalism detection for knowledge-base revisions",
    disable_version_flag = true
)]
struct Cli {
    /// Print the artifact and file format versions
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus and truth file, report counts, optionally write the labeled subset
    Ingest(IngestArgs),
    /// Under-sample negatives and drop duplicate content
    Sample(SampleArgs),
    /// Run the full training flow from a config file
    TrainStack(TrainStackArgs),
    /// Train a single model on the encoded corpus
    Train(TrainArgs),
    /// Score every revision of a corpus with a pipeline
    Predict(PredictArgs),
    /// AUC, score-difference histogram, error counts and optional MDS map
    Evaluate(EvaluateArgs),
    /// Feature counts and importance-based selection on a corpus
    Analyze(AnalyzeArgs),
    /// Stream a corpus to one scoring client and evaluate its answers
    Serve(ServeArgs),
    /// Answer a scoring server with a pipeline
    Client(ClientArgs),
    /// Write a synthetic revision corpus and truth file
    Synth(SynthArgs),
}

#[derive(Args)]
struct LabeledInput {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Abort on the first malformed corpus line instead of skipping it
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: LabeledInput,
    /// Labeled revisions in canonical corpus form
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    truth_output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: LabeledInput,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    truth_output: PathBuf,
    #[arg(long, default_value = "1/50")]
    fraction: Fraction,
    /// Only the most recent N negatives are eligible
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "after")]
    dedup_order: DedupOrder,
    #[arg(long)]
    no_dedup: bool,
}

#[derive(Args)]
struct TrainStackArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set sampling.fraction=1/10`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: LabeledInput,
    #[arg(long)]
    model: vandalstack::Family,
    #[arg(long, default_value = "default")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "1/50")]
    fraction: Fraction,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Corpus of the scored revisions; errors are then deduplicated by encoded vector
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// `rev_id \t x \t y \t FP|FN` map of the misclassified revisions (needs --corpus)
    #[arg(long)]
    mds: Option<PathBuf>,
    #[arg(long, default_value_t = evaluation::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MDS_CAP)]
    mds_cap: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: LabeledInput,
    #[arg(long, default_value = "1/50")]
    fraction: Fraction,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = vandalstack::workflow::DEFAULT_SELECTION_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    input: LabeledInput,
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Seconds to wait for each answer
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Collected `rev_id \t score` lines
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ClientArgs {
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long)]
    connect: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.02)]
    positive_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    f.write_all(contents.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn policy(strict: bool) -> MalformedPolicy {
    if strict {
        MalformedPolicy::Abort
    } else {
        MalformedPolicy::Skip
    }
}

fn load_revisions(path: &Path, policy: MalformedPolicy) -> Result<(Vec<Revision>, usize)> {
    let loaded = load_corpus(open(path)?, policy).with_context(|| format!("in {}", path.display()))?;
    Ok((loaded.revisions, loaded.malformed_count))
}

struct Labeled {
    examples: Vec<LabeledExample>,
    malformed: usize,
    unlabeled: usize,
}

fn load_labeled(corpus: &Path, truth: &Path, policy: MalformedPolicy, spellings: &LabelSpellings) -> Result<Labeled> {
    let (revisions, malformed) = load_revisions(corpus, policy)?;
    let labels = load_labels(open(truth)?, spellings).with_context(|| format!("in {}", truth.display()))?;
    let joined = join_labels(revisions, &labels);
    Ok(Labeled {
        examples: joined.examples,
        malformed,
        unlabeled: joined.unlabeled_count,
    })
}

fn corpus_text(examples: &[LabeledExample]) -> String {
    examples.iter().map(|e| format!("{}\n", e.revision.to_line())).collect()
}

fn load_pipeline(path: &Path) -> Result<StackedPipeline> {
    StackedPipeline::from_text(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn ingest(args: IngestArgs) -> Result<()> {
    let i = &args.input;
    let data = load_labeled(&i.corpus, &i.truth, policy(i.strict), &LabelSpellings::default())?;
    let positives = data.examples.iter().filter(|e| e.label).count();
    println!("labeled={}", data.examples.len());
    println!("positives={positives}");
    println!("negatives={}", data.examples.len() - positives);
    println!("unlabeled={}", data.unlabeled);
    println!("malformed={}", data.malformed);
    if let Some(out) = &args.output {
        write(out, &corpus_text(&data.examples))?;
    }
    if let Some(out) = &args.truth_output {
        write(out, &truth_lines(&data.examples))?;
    }
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let i = &args.input;
    let data = load_labeled(&i.corpus, &i.truth, policy(i.strict), &LabelSpellings::default())?;
    let cfg = SamplingConfig {
        fraction: args.fraction,
        window: args.window,
        seed: args.seed,
        dedup: !args.no_dedup,
        dedup_order: args.dedup_order,
    };
    let before = data.examples.len();
    let sampled = sample_and_dedup(data.examples, &cfg);
    let positives = sampled.iter().filter(|e| e.label).count();
    write(&args.output, &corpus_text(&sampled))?;
    write(&args.truth_output, &truth_lines(&sampled))?;
    eprintln!("sampled {} of {before} labeled revisions ({positives} positive)", sampled.len());
    Ok(())
}

fn train_stack(args: TrainStackArgs) -> Result<()> {
    let base = args.config.parent().map(Path::to_path_buf);
    let mut cfg = RunConfig::from_text(&read(&args.config)?, base.as_deref()).with_context(|| format!("in {}", args.config.display()))?;
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    let corpus = cfg
        .paths
        .corpus
        .clone()
        .ok_or(vandalstack::config::ConfigError::Missing("paths.corpus"))?;
    let truth = cfg
        .paths
        .truth
        .clone()
        .ok_or(vandalstack::config::ConfigError::Missing("paths.truth"))?;
    let pipeline_path = cfg
        .paths
        .pipeline
        .clone()
        .ok_or(vandalstack::config::ConfigError::Missing("paths.pipeline"))?;

    let (revisions, malformed) = load_revisions(&corpus, cfg.malformed)?;
    let labels = load_labels(open(&truth)?, &cfg.labels).with_context(|| format!("in {}", truth.display()))?;
    let joined = join_labels(revisions.clone(), &labels);
    let out = train_pipeline(joined.examples, &cfg.train_settings())?;
    let pipeline = &out.pipeline;

    write(&pipeline_path, &pipeline.to_text())?;
    if let Some(p) = &cfg.paths.schema {
        write(p, &pipeline.schema.to_text())?;
    }
    if let Some(p) = &cfg.paths.output {
        write(p, &prediction_lines(pipeline, &revisions)?)?;
    }
    eprintln!(
        "trained on {} examples ({} positive); {} malformed and {} unlabeled lines skipped; {} of {} columns selected",
        out.training_size,
        out.training_positives,
        malformed,
        joined.unlabeled_count,
        pipeline.selected().len(),
        pipeline.schema.total_dim()
    );
    Ok(())
}

fn train_single(args: TrainArgs) -> Result<()> {
    let i = &args.input;
    let data = load_labeled(&i.corpus, &i.truth, policy(i.strict), &LabelSpellings::default())?;
    let sampling = SamplingConfig {
        fraction: args.fraction,
        seed: args.seed,
        ..SamplingConfig::default()
    };
    let sampled = sample_and_dedup(data.examples, &sampling);
    let enc = encode_examples(&sampled)?;
    let spec = ModelSpec::preset(args.model, args.preset).with_seed(args.seed);
    let model = vandalstack::learners::train(&spec, &enc.rows, &enc.labels)?;
    write(&args.output, &model.to_text())?;
    if let Some(p) = &args.schema {
        write(p, &enc.schema.to_text())?;
    }
    eprintln!(
        "trained {spec} on {} examples with {} columns",
        enc.rows.len(),
        enc.schema.total_dim()
    );
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let (revisions, malformed) = load_revisions(&args.input, MalformedPolicy::Skip)?;
    write(&args.output, &prediction_lines(&pipeline, &revisions)?)?;
    if malformed > 0 {
        eprintln!("skipped {malformed} malformed lines");
    }
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let scores = parse_scores(&read(&args.scores)?).with_context(|| format!("in {}", args.scores.display()))?;
    let labels = load_labels(open(&args.truth)?, &LabelSpellings::default()).with_context(|| format!("in {}", args.truth.display()))?;
    let scored: Vec<ScoredExample> = scores
        .iter()
        .map(|&(id, s)| {
            labels
                .get(&id)
                .map(|&l| ScoredExample::new(id, s, l))
                .ok_or_else(|| anyhow!("rev_id {id} has no truth label"))
        })
        .collect::<Result<_>>()?;

    let vectors = match &args.corpus {
        Some(path) => {
            let (revisions, _) = load_revisions(path, MalformedPolicy::Skip)?;
            let by_id: HashMap<u64, &Revision> = revisions.iter().map(|r| (r.rev_id, r)).collect();
            let raws = scored
                .iter()
                .map(|s| {
                    by_id
                        .get(&s.rev_id)
                        .map(|r| extract(r))
                        .ok_or_else(|| anyhow!("rev_id {} missing from corpus", s.rev_id))
                })
                .collect::<Result<Vec<_>>>()?;
            let schema = build_schema(&raws)?;
            Some(raws.iter().map(|r| encode(r, &schema)).collect::<Vec<_>>())
        }
        None => None,
    };
    let report = match &vectors {
        Some(v) => evaluate(&scored, &v.iter().map(|x| x.key()).collect::<Vec<_>>(), args.threshold)?,
        None => evaluate(&scored, &scored.iter().map(|s| s.rev_id).collect::<Vec<_>>(), args.threshold)?,
    };
    write(&args.report, &report.to_text())?;

    if let Some(mds_path) = &args.mds {
        let vectors = vectors.ok_or_else(|| anyhow!("--mds needs --corpus"))?;
        let keys: Vec<_> = vectors.iter().map(|x| x.key()).collect();
        let sets = evaluation::error_sets(&scored, &keys, args.threshold)?;
        let mut errors: Vec<(usize, &str)> = sets.distinct_false_positives.iter().map(|&i| (i, "FP")).collect();
        errors.extend(sets.distinct_false_negatives.iter().map(|&i| (i, "FN")));
        let ids: Vec<u64> = errors.iter().map(|&(i, _)| scored[i].rev_id).collect();
        let chosen: Vec<(usize, &str)> = mds_subsample(&ids, args.mds_cap).into_iter().map(|k| errors[k]).collect();
        let points: Vec<Vec<f64>> = chosen.iter().map(|&(i, _)| vectors[i].to_dense()).collect();
        let coords = classical_mds(&points, 2);
        let mut out = String::new();
        for ((i, kind), c) in chosen.iter().zip(coords) {
            out.push_str(&format!("{}\t{:?}\t{:?}\t{kind}\n", scored[*i].rev_id, c[0], c[1]));
        }
        write(mds_path, &out)?;
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let i = &args.input;
    let data = load_labeled(&i.corpus, &i.truth, policy(i.strict), &LabelSpellings::default())?;
    let sampling = SamplingConfig {
        fraction: args.fraction,
        seed: args.seed,
        ..SamplingConfig::default()
    };
    let sampled = sample_and_dedup(data.examples, &sampling);
    let enc = encode_examples(&sampled)?;
    let selection = Selection {
        threshold: args.threshold,
        ..Selection::default()
    };
    let (selected, report) = select_columns(&enc.rows, &enc.labels, &selection)?;
    let raw = enc.schema.numeric_names().len() + vandalstack::featurize::CATEGORICAL_FEATURES.len();
    let mut out = String::new();
    out.push_str(&format!("examples={}\n", enc.rows.len()));
    out.push_str(&format!("raw_features={raw}\n"));
    out.push_str(&format!("encoded_columns={}\n", enc.schema.total_dim()));
    out.push_str(&format!("selected_columns={}\n", selected.len()));
    out.push_str(&format!("threshold={:?}\n", args.threshold));
    let mut ranked: Vec<usize> = selected.clone();
    ranked.sort_by(|&a, &b| report.importances[b].total_cmp(&report.importances[a]).then(a.cmp(&b)));
    for c in ranked {
        out.push_str(&format!("{}\t{:.6e}\n", enc.schema.column_name(c), report.importances[c]));
    }
    match &args.output {
        Some(p) => write(p, &out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let i = &args.input;
    let data = load_labeled(&i.corpus, &i.truth, policy(i.strict), &LabelSpellings::default())?;
    let listener = TcpListener::bind(&args.listen).with_context(|| format!("cannot listen on {}", args.listen))?;
    eprintln!("listening on {}", listener.local_addr()?);
    let cfg = ServerConfig {
        window: args.window,
        timeout: Some(Duration::from_secs(args.timeout)),
    };
    let outcome = run_server(&data.examples, &listener, &cfg)?;
    if let Some(p) = &args.scores {
        write(p, &outcome.scores_text())?;
    }
    let text = outcome.report.to_text();
    match &args.report {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "session complete: {} answers, max in flight {}",
        outcome.scores.len(),
        outcome.max_in_flight
    );
    Ok(())
}

fn client(args: ClientArgs) -> Result<()> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let summary = run_client(&pipeline, args.connect.as_str())?;
    eprintln!("answered {} revisions", summary.answered);
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.positive_rate) {
        bail!("--positive-rate must lie in [0, 1]");
    }
    let corpus = vandalstack::synth::revision_corpus(args.n, args.positive_rate, args.seed);
    write(&args.corpus, &corpus_text(&corpus))?;
    write(&args.truth, &truth_lines(&corpus))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.version {
        println!("vandalstack {VERSION}");
        println!("schema format: {SCHEMA_FORMAT}");
        println!("model format: {MODEL_FORMAT}");
        println!("pipeline format: {PIPELINE_FORMAT}");
        return Ok(());
    }
    match cli.command {
        Some(Command::Ingest(a)) => ingest(a),
        Some(Command::Sample(a)) => sample(a),
        Some(Command::TrainStack(a)) => train_stack(a),
        Some(Command::Train(a)) => train_single(a),
        Some(Command::Predict(a)) => predict(a),
        Some(Command::Evaluate(a)) => evaluate_cmd(a),
        Some(Command::Analyze(a)) => analyze(a),
        Some(Command::Serve(a)) => serve(a),
        Some(Command::Client(a)) => client(a),
        Some(Command::Synth(a)) => synth(a),
        None => bail!("no subcommand given; see --help"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
