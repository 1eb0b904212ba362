//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use vandalstack::config::RunConfig;
use vandalstack::corpus::{parse_line, LabeledExample, Revision};
use vandalstack::evaluation::{auc_roc, classical_mds, classical_mds_from_distances, ScoredExample};
use vandalstack::featurize::{extract, extract_content, is_latin_language, parse_comment_header, FeatureVector};
use vandalstack::learners::{train, Classifier, GradientBoosting, LearnError, Mlp, ModelSpec};
use vandalstack::rng::{derive_seed, rng_from_seed};
use vandalstack::sampling::{dedup, undersample, Fraction, Record, SamplingConfig};
use vandalstack::serve::{max_in_flight, run_client, run_server, ServeError, ServerConfig};
use vandalstack::stacking::{kfold_assign, out_of_fold, StackConfig};
use vandalstack::synth::{holdout_latest, matrix_benchmark, revision_corpus, BENCH_NOISE_CATEGORICALS};
use vandalstack::workflow::{encode_examples, prediction_lines, train_pipeline};
use vandalstack::StackedPipeline;

/// Criteria expected to fail; see the project notes for the analysis.
const KNOWN_GAPS: &[u32] = &[6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_vandalstack")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_string())
    }
}

fn brute_auc(s: &[ScoredExample]) -> f64 {
    let (mut credit, mut pairs) = (0.0, 0.0);
    for p in s.iter().filter(|e| e.label) {
        for n in s.iter().filter(|e| !e.label) {
            pairs += 1.0;
            if p.score > n.score {
                credit += 1.0;
            } else if p.score == n.score {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(1);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..=n.max(2));
        let mut s: Vec<ScoredExample> = (0..n)
            .map(|i| {
                let score = if rng.random::<f64>() < 0.3 {
                    rng.random_range(0..levels) as f64 / levels as f64
                } else {
                    rng.random()
                };
                ScoredExample::new(i as u64, score, rng.random::<f64>() < 0.4)
            })
            .collect();
        // Plant explicit ties across classes.
        for _ in 0..n / 10 {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            s[b].score = s[a].score;
        }
        if !(s.iter().any(|e| e.label) && s.iter().any(|e| !e.label)) {
            continue;
        }
        worst = worst.max((auc_roc(&s).unwrap() - brute_auc(&s)).abs());
        done += 1;
    }
    outcome(worst <= 1e-12, format!("1000 datasets, max |rank-sum − pair count| = {worst:e}"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn criterion_2() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let c = extract_content("Hello WORLD 123");
    check("commentLength", c.comment_length == 15.0);
    check("lowerCaseRatio", close(c.lower_case_ratio, 4.0 / 15.0));
    check("upperCaseRatio", close(c.upper_case_ratio, 6.0 / 15.0));
    check("digitRatio", close(c.digit_ratio, 3.0 / 15.0));
    check("whitespaceRatio", close(c.whitespace_ratio, 2.0 / 15.0));
    check("longestWord", c.longest_word == 5.0);
    // "ll" in "Hello" is a run of two.
    check("longestCharSeq", c.longest_char_seq == 2.0);
    check("empty comment", extract_content("").named().iter().all(|(_, v)| *v == 0.0));
    let t = extract_content("see www.example.com #autolist2 [[Special:Contributions/abcd]]");
    check("containsURL", t.contains_url == 1.0);
    check("containsHashTag", t.contains_hash_tag == 1.0);
    check("isSpecContriUser", t.is_spec_contri_user == 1.0);
    check("#autolist", extract_content("#autolist").contains_hash_tag == 1.0);
    check(
        "Special:Contributions",
        extract_content("[[Special:Contributions/abcd]]").is_spec_contri_user == 1.0,
    );

    let h = parse_comment_header("/* wbsetclaim-create:2||1 */ [[Property:P800]]: [[Q5974487]]");
    check(
        "header wbsetclaim",
        h.action.as_deref() == Some("wbsetclaim") && h.subaction.as_deref() == Some("create") && h.language.is_none(),
    );
    let h = parse_comment_header("/* wbsetlabel-add:1|en */ x");
    check(
        "header wbsetlabel",
        h.action.as_deref() == Some("wbsetlabel") && h.subaction.as_deref() == Some("add") && h.language.as_deref() == Some("en"),
    );
    let h = parse_comment_header("free text comment");
    check(
        "header free text",
        h.action.is_none() && h.subaction.is_none() && h.language.is_none(),
    );

    let rev =
        parse_line("308612969\t/* wbsetclaim-create:2||1 */ [[Property:P800]]: [[Q5974487]]\t1\t0,GB,EU,GMT,EN,LEEDS,WEST YORKSHIRE,")
            .unwrap();
    check(
        "merged line",
        rev.rev_id == 308612969 && !rev.registered && rev.county.as_deref() == Some("WEST YORKSHIRE") && rev.user_tag.is_none(),
    );
    let raw = extract(&rev);
    let cat = |k: &str| raw.categorical.get(k).cloned().flatten();
    check("userCountry", cat("userCountry").as_deref() == Some("GB"));
    check("userContinent", cat("userContinent").as_deref() == Some("EU"));
    check("userTimeZone", cat("userTimeZone").as_deref() == Some("GMT"));
    check("userCity", cat("userCity").as_deref() == Some("LEEDS"));
    check("isRegisteredUser", raw.numeric["isRegisteredUser"] == 0.0);
    check("raw feature count", raw.numeric.len() + raw.categorical.len() == 30);
    let registered = extract(&Revision {
        registered: true,
        ..Revision::default()
    });
    check(
        "registered, empty geo",
        registered.numeric["isRegisteredUser"] == 1.0 && registered.categorical["userCountry"].is_none(),
    );
    check("latin en/ja", is_latin_language("en") && !is_latin_language("ja"));

    if failures.is_empty() {
        outcome(true, "all hand-computed examples match")
    } else {
        outcome(false, format!("mismatches: {}", failures.join(", ")))
    }
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn write_config(dir: &Path, corpus: &Path, truth: &Path) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let cfg = dir.join("run.conf");
    fs::write(
        &cfg,
        format!(
            "seed = 11\npaths.corpus = {}\npaths.truth = {}\npaths.schema = schema.txt\npaths.pipeline = pipeline.txt\npaths.output = scores.tsv\n",
            corpus.display(),
            truth.display()
        ),
    )
    .unwrap();
    cfg
}

fn criterion_3(ws: &Workspace) -> Outcome {
    let root = &ws.root;
    let corpus = root.join("corpus.tsv");
    let truth = root.join("truth.tsv");
    if let Err(e) = run_cli(&[
        "synth",
        "--n",
        "20000",
        "--seed",
        "1",
        "--corpus",
        corpus.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]) {
        return outcome(false, format!("synth failed: {e}"));
    }
    let lines: Vec<String> = fs::read_to_string(&corpus).unwrap().lines().map(String::from).collect();
    let mut shuffled = lines.clone();
    shuffled.shuffle(&mut rng_from_seed(5));
    let shuffled_corpus = root.join("corpus_shuffled.tsv");
    fs::write(&shuffled_corpus, shuffled.join("\n") + "\n").unwrap();

    for (dir, c) in [("a", &corpus), ("b", &corpus), ("shuffled", &shuffled_corpus)] {
        let cfg = write_config(&root.join(dir), c, &truth);
        if let Err(e) = run_cli(&["train-stack", "--config", cfg.to_str().unwrap()]) {
            return outcome(false, format!("train-stack ({dir}) failed: {e}"));
        }
    }
    let bytes = |dir: &str, f: &str| fs::read(root.join(dir).join(f)).unwrap();
    let same: Vec<bool> = ["schema.txt", "pipeline.txt", "scores.tsv"]
        .iter()
        .map(|f| bytes("a", f) == bytes("b", f))
        .collect();
    let shuffled_schema = bytes("a", "schema.txt") == bytes("shuffled", "schema.txt");
    let shuffled_pipeline = bytes("a", "pipeline.txt") == bytes("shuffled", "pipeline.txt");
    outcome(
        same.iter().all(|&s| s) && shuffled_schema,
        format!(
            "two processes: schema {} pipeline {} predictions {}; shuffled rows: schema {} (pipeline {})",
            same[0], same[1], same[2], shuffled_schema, shuffled_pipeline
        ),
    )
}

fn example(rev_id: u64, comment: String, label: bool) -> LabeledExample {
    LabeledExample {
        revision: Revision {
            rev_id,
            comment,
            ..Revision::default()
        },
        label,
    }
}

fn criterion_4() -> Outcome {
    let mut data: Vec<LabeledExample> = (0..10_000).map(|i| example(i, format!("edit {i}"), false)).collect();
    data.extend((10_000..10_200).map(|i| example(i, format!("attack {i}"), true)));
    data.shuffle(&mut rng_from_seed(2));
    let cfg = SamplingConfig {
        fraction: Fraction::new(1, 50).unwrap(),
        ..SamplingConfig::default()
    };
    let sampled = undersample(data.clone(), &cfg);
    let pos = sampled.iter().filter(|e| e.label).count();
    let neg = sampled.len() - pos;

    // Plant 300 copies of earlier content under later ids.
    let mut planted = data.clone();
    let mut rng = rng_from_seed(3);
    for k in 0..300u64 {
        let src = planted[rng.random_range(0..data.len())].clone();
        planted.push(LabeledExample {
            revision: Revision {
                rev_id: 20_000 + k,
                ..src.revision
            },
            label: src.label,
        });
    }
    let once = dedup(planted);
    let removed_all = once.len() == data.len() && once.iter().all(|e| e.rev_id() < 20_000);
    let idempotent = dedup(once.clone()) == once;
    outcome(
        pos == 200 && neg == 200 && removed_all && idempotent,
        format!("{pos} positives, {neg} negatives; planted duplicates removed: {removed_all}; idempotent: {idempotent}"),
    )
}

struct Memorizer(HashMap<Vec<u64>, bool>);

fn row_key(x: &FeatureVector) -> Vec<u64> {
    x.to_dense().iter().map(|v| v.to_bits()).collect()
}

impl Classifier for Memorizer {
    fn trained_dim(&self) -> usize {
        2
    }

    fn predict_proba(&self, x: &FeatureVector) -> Result<f64, LearnError> {
        Ok(self.0.get(&row_key(x)).map_or(0.5, |&l| f64::from(u8::from(l))))
    }
}

fn criterion_5() -> Outcome {
    let n = 999;
    let x: Vec<FeatureVector> = (0..n).map(|i| FeatureVector::from_dense(&[i as f64, (i % 17) as f64])).collect();
    let y: Vec<bool> = (0..n).map(|i| i % 4 == 0).collect();
    let cfg = StackConfig::default();
    let plan = kfold_assign(n, cfg.k, 7).unwrap();
    let oof = out_of_fold(&x, &y, &cfg, &plan, |_, xs, ys| {
        Ok(Memorizer(xs.iter().map(row_key).zip(ys.iter().copied()).collect()))
    })
    .unwrap();
    let cells = oof.meta.iter().flatten().count();
    let bad = oof.meta.iter().flatten().filter(|&&v| v != 0.5).count();
    outcome(
        bad == 0 && cells == n * 6,
        format!("{cells} meta-feature cells, {bad} differ from 0.5"),
    )
}

fn auc_of<F: Fn(&vandalstack::synth::SyntheticExample) -> f64>(test: &[vandalstack::synth::SyntheticExample], f: F) -> f64 {
    let scored: Vec<ScoredExample> = test.iter().map(|e| ScoredExample::new(e.id, f(e), e.label)).collect();
    auc_roc(&scored).unwrap()
}

struct BenchRun {
    stacked: f64,
    singles: Vec<(String, f64)>,
    noise_kept: usize,
    noise_columns: usize,
    selected: usize,
    total: usize,
}

fn bench_run(seed: u64) -> BenchRun {
    let (train_set, test) = holdout_latest(matrix_benchmark(20_000, seed), 0.25);
    let run = RunConfig {
        master_seed: seed,
        ..RunConfig::default()
    };
    let settings = run.train_settings();
    let out = train_pipeline(train_set.clone(), &settings).unwrap();
    let p = &out.pipeline;
    let stacked = auc_of(&test, |e| p.predict_raw(&e.features).unwrap());

    let sampled = vandalstack::sampling::sample_and_dedup(train_set, &settings.sampling);
    let rows: Vec<FeatureVector> = sampled.iter().map(|e| p.prepare(&e.features).unwrap()).collect();
    let labels: Vec<bool> = sampled.iter().map(|e| e.label).collect();
    let test_rows: Vec<FeatureVector> = test.iter().map(|e| p.prepare(&e.features).unwrap()).collect();
    let singles = settings
        .stack
        .first_stage
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let m = train(
                &spec.clone().with_seed(derive_seed(settings.stack.seed, "single", j as u64)),
                &rows,
                &labels,
            )
            .unwrap();
            let scored: Vec<ScoredExample> = test
                .iter()
                .zip(&test_rows)
                .map(|(e, x)| ScoredExample::new(e.id, m.predict_proba(x).unwrap(), e.label))
                .collect();
            (spec.to_string(), auc_roc(&scored).unwrap())
        })
        .collect();

    let noise: Vec<usize> = BENCH_NOISE_CATEGORICALS
        .iter()
        .flat_map(|f| p.schema.categorical_columns(f))
        .collect();
    let noise_kept = noise.iter().filter(|c| p.selected().contains(c)).count();
    BenchRun {
        stacked,
        singles,
        noise_kept,
        noise_columns: noise.len(),
        selected: p.selected().len(),
        total: p.schema.total_dim(),
    }
}

fn criterion_6() -> Outcome {
    let runs: Vec<BenchRun> = (0..5).map(bench_run).collect();
    let r0 = &runs[0];
    let best = |r: &BenchRun| r.singles.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    let gbt = r0.singles.iter().find(|s| s.0 == "gradient_boosting").map_or(f64::NAN, |s| s.1);
    let a = r0.stacked >= 0.90;
    let b = r0.stacked >= best(r0) - 0.01;
    let clean_seeds = runs.iter().filter(|r| r.noise_kept == 0).count();
    let c = clean_seeds >= 4;
    println!(
        "    6a: stacked test AUC {:.5} (single default GBT {:.5}) ≥ 0.90: {}",
        r0.stacked,
        gbt,
        verdict(a)
    );
    println!(
        "    6b: stacked {:.5} vs best single {:.5} − 0.01: {}",
        r0.stacked,
        best(r0),
        verdict(b)
    );
    for (seed, r) in runs.iter().enumerate() {
        let singles: Vec<String> = r.singles.iter().map(|(n, v)| format!("{n}={v:.4}")).collect();
        println!(
            "        seed {seed}: stacked {:.5}, best single {:.5} ({}), selected {}/{} columns, noise one-hot kept {}/{}",
            r.stacked,
            best(r),
            singles.join(" "),
            r.selected,
            r.total,
            r.noise_kept,
            r.noise_columns
        );
    }
    println!(
        "    6c: seeds with every noise one-hot column removed: {clean_seeds}/5 (need ≥ 4): {}",
        verdict(c)
    );
    outcome(a && b && c, format!("a {} b {} c {}", verdict(a), verdict(b), verdict(c)))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let (dim, hidden) = (6, 9);
    let x: Vec<FeatureVector> = (0..16)
        .map(|_| FeatureVector::from_dense(&(0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
        .collect();
    let y: Vec<bool> = (0..16).map(|_| rng.random()).collect();
    let params: Vec<f64> = (0..Mlp::param_count(dim, hidden)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let l2 = 1e-4;
    let (_, grad) = Mlp::from_params(dim, hidden, params.clone()).loss_and_gradient(&x, &y, l2);
    let h = 1e-5;
    let numeric: Vec<f64> = (0..params.len())
        .map(|i| {
            let mut p = params.clone();
            p[i] += h;
            let up = Mlp::from_params(dim, hidden, p.clone()).loss_and_gradient(&x, &y, l2).0;
            p[i] -= 2.0 * h;
            let down = Mlp::from_params(dim, hidden, p).loss_and_gradient(&x, &y, l2).0;
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff = grad.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm
}

fn criterion_7() -> Outcome {
    let worst = (0..10).map(mlp_gradient_error).fold(0.0, f64::max);
    let (train_set, _) = holdout_latest(matrix_benchmark(20_000, 0), 0.25);
    let enc = encode_examples(&train_set).unwrap();
    let spec = ModelSpec::new(vandalstack::Family::GradientBoosting);
    let (_, trace) = GradientBoosting::train_traced(&spec, &enc.rows, &enc.labels, enc.schema.total_dim()).unwrap();
    let increases = trace.windows(2).filter(|w| w[1] > w[0]).count();
    outcome(
        worst < 1e-4 && increases == 0,
        format!(
            "MLP max relative gradient error {worst:.2e} over 10 points; GBT log-loss {:.5} → {:.5} over {} rounds, {increases} increases",
            trace[0],
            trace[trace.len() - 1],
            trace.len() - 1
        ),
    )
}

fn pairwise_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            worst = worst.max((d(&a[i], &a[j]) - d(&b[i], &b[j])).abs());
        }
    }
    worst
}

fn criterion_8() -> Outcome {
    let mut rng = rng_from_seed(8);
    let mut worst: f64 = 0.0;
    for trial in 0..30 {
        let n = rng.random_range(2..60);
        let intrinsic = if trial % 3 == 0 { 1 } else { 2 };
        let ambient = rng.random_range(intrinsic..6);
        // Random orthonormal-ish embedding via Gram-Schmidt of random directions.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        while basis.len() < intrinsic {
            let mut v: Vec<f64> = (0..ambient.max(intrinsic)).map(|_| rng.random_range(-1.0..1.0)).collect();
            for u in &basis {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-3 {
                basis.push(v.iter().map(|a| a / norm).collect());
            }
        }
        let offset: Vec<f64> = (0..ambient.max(intrinsic)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let coef: Vec<f64> = (0..intrinsic).map(|_| rng.random_range(-10.0..10.0)).collect();
                offset
                    .iter()
                    .enumerate()
                    .map(|(k, o)| o + coef.iter().zip(&basis).map(|(c, b)| c * b[k]).sum::<f64>())
                    .collect()
            })
            .collect();
        worst = worst.max(pairwise_error(&classical_mds(&points, 2), &points));
    }
    let collinear = nalgebra::DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]);
    let line = classical_mds_from_distances(&collinear, 2);
    worst = worst.max(pairwise_error(&line, &[vec![0.0], vec![1.0], vec![2.0]]));
    let single = classical_mds(&[vec![4.0, -2.0, 7.0]], 2);
    let origin = single == vec![vec![0.0, 0.0]];
    outcome(
        worst < 1e-6 && origin,
        format!("30 random configurations + collinear (1,1,2): max distance error {worst:.2e}; n=1 at origin: {origin}"),
    )
}

type Reply = fn(u64) -> String;

/// Connect, answer with `reply` per received revision, return the last line seen.
fn raw_client(addr: std::net::SocketAddr, reply: Reply) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let stream = TcpStream::connect(addr).unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut writer = stream;
        let mut last = String::new();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return last;
            }
            last = line.trim_end().to_string();
            match last.strip_prefix("REV\t") {
                Some(body) => {
                    let id = parse_line(body).unwrap().rev_id;
                    let _ = writer.write_all(reply(id).as_bytes());
                }
                None => return last,
            }
        }
    })
}

fn criterion_9(ws: &Workspace) -> Outcome {
    let pipeline_path = ws.root.join("a").join("pipeline.txt");
    let Ok(text) = fs::read_to_string(&pipeline_path) else {
        return outcome(false, "benchmark pipeline from criterion 3 is missing");
    };
    let pipeline = StackedPipeline::from_text(&text).unwrap();
    let corpus: Vec<LabeledExample> = revision_corpus(20_000, 0.02, 1).into_iter().take(1000).collect();
    let corpus_path = ws.root.join("serve_corpus.tsv");
    fs::write(&corpus_path, corpus.iter().map(|e| e.revision.to_line() + "\n").collect::<String>()).unwrap();
    let offline_path = ws.root.join("serve_offline.tsv");
    if let Err(e) = run_cli(&[
        "predict",
        "--pipeline",
        pipeline_path.to_str().unwrap(),
        "--input",
        corpus_path.to_str().unwrap(),
        "--output",
        offline_path.to_str().unwrap(),
    ]) {
        return outcome(false, format!("predict failed: {e}"));
    }
    let offline = fs::read_to_string(&offline_path).unwrap();
    let revisions: Vec<Revision> = corpus.iter().map(|e| e.revision.clone()).collect();
    let in_process = prediction_lines(&pipeline, &revisions).unwrap();

    let window = 16;
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let served = corpus.clone();
    let server = thread::spawn(move || {
        run_server(
            &served,
            &listener,
            &ServerConfig {
                window,
                timeout: Some(Duration::from_secs(30)),
            },
        )
    });
    let client = run_client(&pipeline, addr);
    let result = server.join().unwrap();
    let (parity, window_ok, answered) = match (&result, &client) {
        (Ok(o), Ok(c)) => (
            o.scores_text() == offline && offline == in_process,
            max_in_flight(&o.trace) <= window && o.max_in_flight <= window,
            c.answered,
        ),
        _ => (false, false, 0),
    };

    let mut violations = Vec::new();
    let cases: [(&str, Reply); 4] = [
        ("unknown rev_id", |_| "SCORE\t1\t0.5\n".into()),
        ("malformed answer", |id| format!("SCORE\t{id}\n")),
        ("duplicate answer", |id| format!("SCORE\t{id}\t0.5\nSCORE\t{id}\t0.5\n")),
        ("score out of range", |id| format!("SCORE\t{id}\t1.5\n")),
    ];
    for (name, reply) in cases {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let client = raw_client(listener.local_addr().unwrap(), reply);
        let res = run_server(
            &corpus[..20],
            &listener,
            &ServerConfig {
                window: 4,
                timeout: Some(Duration::from_secs(10)),
            },
        );
        let last = client.join().unwrap();
        let ok = matches!(res, Err(ServeError::ProtocolViolation(_))) && last.starts_with("ERROR\t");
        violations.push((name, ok));
    }
    // Server vanishing mid-stream.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let lines: Vec<String> = corpus[..2].iter().map(|e| format!("REV\t{}\n", e.revision.to_line())).collect();
    let fake = thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        for l in &lines {
            s.write_all(l.as_bytes()).unwrap();
        }
        thread::sleep(Duration::from_millis(200));
    });
    let lost = matches!(run_client(&pipeline, addr), Err(ServeError::ConnectionLost { answered: 2 }));
    fake.join().unwrap();

    let violations_ok = violations.iter().all(|v| v.1);
    let detail = format!(
        "{answered} answers; served = offline predict bytes: {parity}; in-flight ≤ {window}: {window_ok}; violations closed with ERROR: {}; client reports lost server: {lost}",
        violations.iter().map(|(n, ok)| format!("{n}={ok}")).collect::<Vec<_>>().join(", ")
    );
    outcome(parity && window_ok && violations_ok && lost && answered == 1000, detail)
}

fn criterion_10() -> Outcome {
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let Ok(text) = fs::read_to_string(&readme) else {
        return outcome(false, "README.md not found");
    };
    let values = [
        "1/50", "0.94678", "0.95124", "0.770", "0.520", "1,279", "53", "3 h", "10 min", "0.93731", "0.95898", "0.95334", "0.95778",
        "0.95311", "0.95774", "0.95391", "0.95564", "0.95214", "0.95920", "0.95527", "0.95180", "0.95315", "0.94412", "0.90487", "314,835",
        "62,381", "1,582", "382", "30 min",
    ];
    let section: String = text
        .split("\n## ")
        .find(|s| s.starts_with("Reported results"))
        .map(|s| s.lines().take_while(|l| !l.starts_with("### ")).collect::<Vec<_>>().join("\n"))
        .unwrap_or_default();
    let missing: Vec<&str> = values.iter().copied().filter(|v| !section.contains(v)).collect();
    let flag = "not reproducible without the Wikidata corpus";
    let rows: Vec<&str> = section.lines().filter(|l| l.starts_with('|')).skip(2).collect();
    let unflagged = rows.iter().filter(|l| !l.contains(flag)).count();
    outcome(
        missing.is_empty() && unflagged == 0 && !rows.is_empty(),
        format!(
            "{} reported values, missing: {missing:?}, rows without the flag: {unflagged}",
            rows.len()
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace {
        root: dir.path().to_path_buf(),
        _dir: dir,
    };
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(u32, &str, f64, Check)> = vec![
        (1, "AUC oracle equivalence", 10.0, Box::new(criterion_1)),
        (2, "feature extraction ground truth", 1.0, Box::new(criterion_2)),
        (
            3,
            "determinism across processes and row order",
            120.0,
            Box::new(|| criterion_3(&ws)),
        ),
        (4, "sampling contract", 5.0, Box::new(criterion_4)),
        (5, "stacking out-of-fold purity", 30.0, Box::new(criterion_5)),
        (6, "synthetic end-to-end benchmark", 600.0, Box::new(criterion_6)),
        (7, "gradient checks", 30.0, Box::new(criterion_7)),
        (8, "MDS exactness", 5.0, Box::new(criterion_8)),
        (9, "serve parity", 30.0, Box::new(|| criterion_9(&ws))),
        (10, "reported-number documentation", f64::INFINITY, Box::new(criterion_10)),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, name, limit, check) in &criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs < *limit;
        let pass = result.pass && in_time;
        let budget = if limit.is_finite() {
            format!("{secs:.2} s < {limit} s: {in_time}")
        } else {
            format!("{secs:.2} s")
        };
        let tag = match (pass, KNOWN_GAPS.contains(id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known gap)",
            (false, false) => "FAIL",
        };
        println!("criterion {id} [{name}]: {tag} | {} | {budget}", result.detail);
        if pass {
            passed += 1;
        } else if !KNOWN_GAPS.contains(id) {
            unexpected.push(*id);
        }
    }
    println!(
        "summary: {passed}/{} criteria passed; unexpected failures: {unexpected:?}",
        criteria.len()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
