//! Seeded synthetic data: a labeled feature matrix with a planted nonlinear
//! signal, and a corpus of revision lines shaped like knowledge-base edits.

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::corpus::{LabeledExample, Revision};
use crate::featurize::RawFeatures;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::Record;
use crate::workflow::Example;

/// Numeric columns `x0..x9` of the matrix benchmark.
pub const BENCH_NUMERIC: usize = 10;
/// Categorical columns of the matrix benchmark; all are pure noise.
pub const BENCH_NOISE_CATEGORICALS: [&str; 5] = ["c0", "c1", "c2", "c3", "c4"];
const BENCH_ALPHABETS: [usize; 5] = [3, 4, 5, 6, 8];
/// `x2 · x3` must exceed this for a positive; with the XOR half this gives
/// about 2% positives.
const INTERACTION_CUT: f64 = 0.6285;
const LABEL_NOISE: f64 = 0.001;

/// One row of the matrix benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExample {
    pub id: u64,
    pub label: bool,
    pub features: RawFeatures,
}

impl Record for SyntheticExample {
    type Key = u64;

    fn rev_id(&self) -> u64 {
        self.id
    }

    fn label(&self) -> bool {
        self.label
    }

    fn content_key(&self) -> u64 {
        self.id
    }
}

impl Example for SyntheticExample {
    fn raw_features(&self) -> RawFeatures {
        self.features.clone()
    }
}

/// `n` rows: positive when `x0` and `x1` differ in sign and `x2 · x3` is
/// large, with 0.1% of labels flipped. Ids are `1..=n`.
pub fn matrix_benchmark(n: usize, seed: u64) -> Vec<SyntheticExample> {
    let mut rng = rng_from_seed(derive_seed(seed, "matrix-benchmark", 0));
    (1..=n as u64)
        .map(|id| {
            let x: Vec<f64> = (0..BENCH_NUMERIC).map(|_| rng.random_range(-1.0..1.0)).collect();
            let signal = (x[0] > 0.0) != (x[1] > 0.0) && x[2] * x[3] > INTERACTION_CUT;
            let label = signal != (rng.random::<f64>() < LABEL_NOISE);
            let mut features = RawFeatures::default();
            for (j, v) in x.iter().enumerate() {
                features.set_numeric(&format!("x{j}"), *v);
            }
            for (name, &size) in BENCH_NOISE_CATEGORICALS.iter().zip(&BENCH_ALPHABETS) {
                let value = format!("v{}", rng.random_range(0..size));
                features.set_categorical(name, Some(&value));
            }
            SyntheticExample { id, label, features }
        })
        .collect()
}

/// Split off the records with the largest ids as a test set.
pub fn holdout_latest<T: Record>(mut examples: Vec<T>, test_fraction: f64) -> (Vec<T>, Vec<T>) {
    examples.sort_by_key(|e| e.rev_id());
    let test = ((examples.len() as f64) * test_fraction).round() as usize;
    let cut = examples.len() - test.min(examples.len());
    let test_set = examples.split_off(cut);
    (examples, test_set)
}

const LANGS: [&str; 8] = ["en", "de", "fr", "es", "it", "nl", "ru", "ja"];
const PLACES: [(&str, &str, &str, &str, &str); 6] = [
    ("US", "NA", "America/New_York", "NY", "NEW YORK"),
    ("GB", "EU", "GMT", "EN", "LEEDS"),
    ("DE", "EU", "Europe/Berlin", "BE", "BERLIN"),
    ("IN", "AS", "Asia/Kolkata", "MH", "MUMBAI"),
    ("BR", "SA", "America/Sao_Paulo", "SP", "SAO PAULO"),
    ("JP", "AS", "Asia/Tokyo", "13", "TOKYO"),
];
const REGULAR_WORDS: [&str; 10] = [
    "river",
    "village",
    "painter",
    "species",
    "album",
    "church",
    "municipality",
    "footballer",
    "novel",
    "mountain",
];
const VANDAL_WORDS: [&str; 8] = [
    "LOL",
    "hahaha",
    "STUPID",
    "poop",
    "is the best!!!",
    "FAKE",
    "xxx",
    "hello my friend",
];
const TAGS: [&str; 3] = ["#autolist", "#quickstatements", "#mix'n'match"];

fn regular_comment(rng: &mut crate::rng::Rng) -> String {
    let lang = LANGS.choose(rng).unwrap();
    match rng.random_range(0..6) {
        0 => format!(
            "/* wbsetclaim-create:2||1 */ [[Property:P{}]]: [[Q{}]]",
            rng.random_range(17..3000),
            rng.random_range(1..9_000_000)
        ),
        1 => format!("/* wbsetlabel-add:1|{lang} */ {}", REGULAR_WORDS.choose(rng).unwrap()),
        2 => format!(
            "/* wbsetdescription-set:1|{lang} */ {} in {}",
            REGULAR_WORDS.choose(rng).unwrap(),
            REGULAR_WORDS.choose(rng).unwrap()
        ),
        3 => format!("/* wbsetsitelink-add:1|{lang}wiki */ {}", REGULAR_WORDS.choose(rng).unwrap()),
        4 => format!(
            "/* wbcreateclaim-create:1| */ [[Property:P31]]: [[Q{}]], {}",
            rng.random_range(1..100_000),
            TAGS.choose(rng).unwrap()
        ),
        _ => format!(
            "/* wbeditentity-update:0| */ {}",
            if rng.random::<f64>() < 0.3 {
                "[[Special:Contributions/203.0.113.7|203.0.113.7]]"
            } else {
                ""
            }
        ),
    }
}

fn vandal_comment(rng: &mut crate::rng::Rng) -> String {
    let lang = LANGS.choose(rng).unwrap();
    let word = VANDAL_WORDS.choose(rng).unwrap();
    match rng.random_range(0..5) {
        0 => format!("/* wbsetlabel-set:1|{lang} */ {word}"),
        1 => format!(
            "/* wbsetdescription-set:1|{lang} */ {} {}",
            word.to_uppercase(),
            rng.random_range(0..10_000)
        ),
        2 => format!("/* wbsetdescription-add:1|{lang} */ visit http://example.com/{word}"),
        3 => format!("/* wbsetaliases-add:1|{lang} */ {word}, {word}"),
        _ => format!("/* wbsetlabel-set:1|{lang} */ {}", REGULAR_WORDS.choose(rng).unwrap()),
    }
}

/// A labeled revision corpus with roughly `positive_rate` vandalism.
/// About 3% of revisions repeat the content of an earlier one.
pub fn revision_corpus(n: usize, positive_rate: f64, seed: u64) -> Vec<LabeledExample> {
    let mut rng = rng_from_seed(derive_seed(seed, "revision-corpus", 0));
    let mut out: Vec<LabeledExample> = Vec::with_capacity(n);
    let mut rev_id = 300_000_000u64;
    for _ in 0..n {
        rev_id += rng.random_range(1..50);
        if !out.is_empty() && rng.random::<f64>() < 0.03 {
            let prev = out[rng.random_range(0..out.len())].clone();
            out.push(LabeledExample {
                revision: Revision { rev_id, ..prev.revision },
                label: prev.label,
            });
            continue;
        }
        let label = rng.random::<f64>() < positive_rate;
        // A few edits carry the other class's surface form.
        let looks_vandal = label != (rng.random::<f64>() < 0.08);
        let comment = if looks_vandal {
            vandal_comment(&mut rng)
        } else {
            regular_comment(&mut rng)
        };
        let registered = rng.random::<f64>() < if label { 0.15 } else { 0.85 };
        let mut revision = Revision {
            rev_id,
            comment,
            has_contributor: true,
            registered,
            ..Revision::default()
        };
        if !registered || rng.random::<f64>() < 0.2 {
            let (country, continent, tz, region, city) = PLACES.choose(&mut rng).unwrap();
            revision.country = Some(country.to_string());
            revision.continent = Some(continent.to_string());
            revision.timezone = Some(tz.to_string());
            revision.region = Some(region.to_string());
            revision.city = Some(city.to_string());
        }
        if rng.random::<f64>() < 0.05 {
            revision.user_tag = Some(if label { "mobile edit" } else { "OAuth CID: 1" }.to_string());
        }
        out.push(LabeledExample { revision, label });
    }
    out
}
