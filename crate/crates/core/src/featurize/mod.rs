//! Feature extraction and one-hot encoding.
//!
//! Every revision produces 20 numeric features (content ratios and counts,
//! comment length, and 0/1 flags) and 10 categorical features (user geo
//! fields plus the parsed comment header). Categorical values are mapped to
//! columns through an explicit, sorted vocabulary persisted with the model,
//! so encoding never depends on hash seeds or process state.

mod content;
mod header;
mod schema;

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

pub use content::{extract_content, first_hashtag, is_latin_letter, ContentFeatures};
pub use header::{parse_comment_header, CommentHeader};
pub use schema::{build_schema, encode, FeatureSchema, FeatureVector, SchemaError};

use crate::corpus::Revision;

static LATIN_SCRIPT_LANGUAGES: &str = include_str!("../../data/latin_script_languages.txt");

fn latin_languages() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| content::word_list(LATIN_SCRIPT_LANGUAGES))
}

pub fn is_latin_language(code: &str) -> bool {
    latin_languages().contains(&code.to_lowercase())
}

/// Categorical feature names, in no particular order (the schema sorts).
pub const CATEGORICAL_FEATURES: [&str; 10] = [
    "userCountry",
    "userTimeZone",
    "userCity",
    "userCounty",
    "userRegion",
    "userContinent",
    "revisionTag",
    "revisionLanguage",
    "revisionAction",
    "revisionSubaction",
];

/// Unencoded features of one example.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawFeatures {
    pub numeric: BTreeMap<String, f64>,
    pub categorical: BTreeMap<String, Option<String>>,
}

impl RawFeatures {
    pub fn set_numeric(&mut self, name: &str, value: f64) {
        debug_assert!(value.is_finite(), "{name} = {value}");
        self.numeric.insert(name.to_string(), value);
    }

    pub fn set_categorical(&mut self, name: &str, value: Option<&str>) {
        self.categorical.insert(name.to_string(), value.map(str::to_string));
    }

    fn merge(mut self, other: RawFeatures) -> Self {
        self.numeric.extend(other.numeric);
        self.categorical.extend(other.categorical);
        self
    }
}

/// Content features of a comment as a partial [`RawFeatures`].
pub fn content_features(comment: &str) -> RawFeatures {
    let mut raw = RawFeatures::default();
    for (name, value) in extract_content(comment).named() {
        raw.set_numeric(name, value);
    }
    raw
}

/// User and header context features of a revision.
pub fn extract_context(rev: &Revision) -> RawFeatures {
    let header = parse_comment_header(&rev.comment);
    let mut raw = RawFeatures::default();
    raw.set_numeric("isRegisteredUser", if rev.registered { 1.0 } else { 0.0 });
    let latin = header.language.as_deref().is_some_and(is_latin_language);
    raw.set_numeric("isLatinLanguage", if latin { 1.0 } else { 0.0 });
    raw.set_categorical("userCountry", rev.country.as_deref());
    raw.set_categorical("userTimeZone", rev.timezone.as_deref());
    raw.set_categorical("userCity", rev.city.as_deref());
    raw.set_categorical("userCounty", rev.county.as_deref());
    raw.set_categorical("userRegion", rev.region.as_deref());
    raw.set_categorical("userContinent", rev.continent.as_deref());
    raw.set_categorical("revisionTag", first_hashtag(&rev.comment));
    raw.set_categorical("revisionLanguage", header.language.as_deref());
    raw.set_categorical("revisionAction", header.action.as_deref());
    raw.set_categorical("revisionSubaction", header.subaction.as_deref());
    raw
}

/// All 30 raw features of a revision.
pub fn extract(rev: &Revision) -> RawFeatures {
    content_features(&rev.comment).merge(extract_context(rev))
}
