//! Fixtures shared by the benchmarks.

use vandalstack::corpus::LabeledExample;
use vandalstack::synth::{matrix_benchmark, revision_corpus};
use vandalstack::workflow::{encode_examples, Encoded};

/// Encoded matrix benchmark rows.
pub fn encoded_matrix(n: usize, seed: u64) -> Encoded {
    encode_examples(&matrix_benchmark(n, seed)).expect("non-empty benchmark")
}

/// Revision corpus with 10% vandalism.
pub fn corpus(n: usize, seed: u64) -> Vec<LabeledExample> {
    revision_corpus(n, 0.1, seed)
}
