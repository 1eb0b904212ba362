//! Merged revision-line corpora and truth files.
//!
//! A corpus line holds four TAB-separated fields:
//!
//! ```text
//! rev_id \t comment \t has_contributor(0|1) \t meta_csv
//! ```
//!
//! `meta_csv` is `registered,country,continent,timezone,region,city,county[,user_tag]`.
//! Empty CSV fields are missing values. The comment is the only field that
//! may itself contain TAB characters: the id is split off the front and the
//! last two fields off the back, so comments survive byte for byte.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("rev_id {0} has conflicting labels")]
    DuplicateConflict(u64),
    #[error("rev_id {0} appears more than once in the corpus")]
    DuplicateRevision(u64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One parsed revision record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Revision {
    pub rev_id: u64,
    pub comment: String,
    pub has_contributor: bool,
    pub registered: bool,
    pub country: Option<String>,
    pub continent: Option<String>,
    pub timezone: Option<String>,
    pub region: Option<String>,
    pub city: Option<String>,
    pub county: Option<String>,
    pub user_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub revision: Revision,
    /// `true` = vandalism.
    pub label: bool,
}

/// What to do with a line that does not parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MalformedPolicy {
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub revisions: Vec<Revision>,
    pub malformed_count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Joined {
    pub examples: Vec<LabeledExample>,
    pub unlabeled_count: usize,
}

/// Extra label spellings accepted by [`load_labels`], on top of
/// `0`/`1`/`true`/`false`. Comparison is ASCII case-insensitive.
#[derive(Debug, Clone)]
pub struct LabelSpellings {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

impl Default for LabelSpellings {
    fn default() -> Self {
        Self {
            positive: vec!["T".into(), "ROLLBACK_REVERTED".into(), "VANDALISM".into()],
            negative: vec!["F".into(), "REGULAR".into()],
        }
    }
}

impl LabelSpellings {
    fn parse(&self, raw: &str) -> Option<bool> {
        let raw = raw.trim();
        match raw {
            "1" => return Some(true),
            "0" => return Some(false),
            _ => {}
        }
        if raw.eq_ignore_ascii_case("true") || self.positive.iter().any(|p| p.eq_ignore_ascii_case(raw)) {
            Some(true)
        } else if raw.eq_ignore_ascii_case("false") || self.negative.iter().any(|n| n.eq_ignore_ascii_case(raw)) {
            Some(false)
        } else {
            None
        }
    }
}

fn flag(raw: &str) -> Option<bool> {
    match raw.trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn meta_field(raw: &str) -> Option<String> {
    let t = raw.trim();
    if t.is_empty() {
        None
    } else {
        Some(t.to_string())
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

/// Parse one corpus line (without its trailing newline).
pub fn parse_line(line: &str) -> Result<Revision, CorpusError> {
    parse_numbered(line, 0)
}

fn parse_numbered(line: &str, lineno: usize) -> Result<Revision, CorpusError> {
    let (id_raw, rest) = line
        .split_once('\t')
        .ok_or_else(|| malformed(lineno, "expected 4 TAB-separated fields"))?;
    let rev_id: u64 = id_raw
        .trim()
        .parse()
        .map_err(|_| malformed(lineno, format!("non-integer rev_id {id_raw:?}")))?;
    let mut tail = rest.rsplitn(3, '\t');
    let meta = tail.next();
    let contributor = tail.next();
    let comment = tail.next();
    let (Some(meta), Some(contributor), Some(comment)) = (meta, contributor, comment) else {
        return Err(malformed(lineno, "expected 4 TAB-separated fields"));
    };
    let has_contributor = flag(contributor).ok_or_else(|| malformed(lineno, format!("bad contributor flag {contributor:?}")))?;

    let fields: Vec<&str> = meta.splitn(8, ',').collect();
    let registered = flag(fields[0]).ok_or_else(|| malformed(lineno, format!("bad registered flag {:?}", fields[0])))?;
    let get = |i: usize| fields.get(i).and_then(|f| meta_field(f));
    Ok(Revision {
        rev_id,
        comment: comment.to_string(),
        has_contributor,
        registered,
        country: get(1),
        continent: get(2),
        timezone: get(3),
        region: get(4),
        city: get(5),
        county: get(6),
        user_tag: get(7),
    })
}

impl Revision {
    /// Serialize to the canonical corpus line (no trailing newline).
    pub fn to_line(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Revision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = |v: &Option<String>| v.clone().unwrap_or_default();
        write!(
            f,
            "{}\t{}\t{}\t{},{},{},{},{},{},{},{}",
            self.rev_id,
            self.comment,
            u8::from(self.has_contributor),
            u8::from(self.registered),
            o(&self.country),
            o(&self.continent),
            o(&self.timezone),
            o(&self.region),
            o(&self.city),
            o(&self.county),
            o(&self.user_tag),
        )
    }
}

/// Iterate LF-terminated lines, stripping only the `\n`.
fn for_each_line<R: BufRead>(mut source: R, mut f: impl FnMut(usize, &str) -> Result<(), CorpusError>) -> Result<(), CorpusError> {
    let mut buf = String::new();
    let mut lineno = 0;
    loop {
        buf.clear();
        if source.read_line(&mut buf)? == 0 {
            return Ok(());
        }
        lineno += 1;
        let line = buf.strip_suffix('\n').unwrap_or(&buf);
        if line.is_empty() {
            continue;
        }
        f(lineno, line)?;
    }
}

/// Load every record of a corpus, in file order.
pub fn load_corpus<R: BufRead>(source: R, policy: MalformedPolicy) -> Result<LoadedCorpus, CorpusError> {
    let mut out = LoadedCorpus::default();
    let mut seen = std::collections::HashSet::new();
    for_each_line(source, |lineno, line| {
        match parse_numbered(line, lineno) {
            Ok(rev) => {
                if !seen.insert(rev.rev_id) {
                    return Err(CorpusError::DuplicateRevision(rev.rev_id));
                }
                out.revisions.push(rev);
            }
            Err(e) if policy == MalformedPolicy::Abort => return Err(e),
            Err(_) => out.malformed_count += 1,
        }
        Ok(())
    })?;
    Ok(out)
}

/// Load a truth file of `rev_id \t label` lines.
pub fn load_labels<R: BufRead>(source: R, spellings: &LabelSpellings) -> Result<HashMap<u64, bool>, CorpusError> {
    let mut labels = HashMap::new();
    for_each_line(source, |lineno, line| {
        let (id_raw, label_raw) = line
            .split_once('\t')
            .ok_or_else(|| malformed(lineno, "expected `rev_id<TAB>label`"))?;
        let id: u64 = id_raw
            .trim()
            .parse()
            .map_err(|_| malformed(lineno, format!("non-integer rev_id {id_raw:?}")))?;
        let label = spellings
            .parse(label_raw)
            .ok_or_else(|| malformed(lineno, format!("unknown label {label_raw:?}")))?;
        match labels.insert(id, label) {
            Some(prev) if prev != label => Err(CorpusError::DuplicateConflict(id)),
            _ => Ok(()),
        }
    })?;
    Ok(labels)
}

/// Keep the revisions that have a label, in their original order.
pub fn join_labels(revisions: Vec<Revision>, labels: &HashMap<u64, bool>) -> Joined {
    let mut joined = Joined::default();
    for revision in revisions {
        match labels.get(&revision.rev_id) {
            Some(&label) => joined.examples.push(LabeledExample { revision, label }),
            None => joined.unlabeled_count += 1,
        }
    }
    joined
}

/// Write a truth file for `examples`.
pub fn truth_lines(examples: &[LabeledExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&format!("{}\t{}\n", ex.revision.rev_id, u8::from(ex.label)));
    }
    out
}
