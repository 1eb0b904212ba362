//! Features computed from the comment text alone.

use std::collections::HashSet;
use std::sync::OnceLock;

static LANGUAGE_WORDS: &str = include_str!("../../data/language_words.txt");

fn language_words() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| word_list(LANGUAGE_WORDS))
}

pub(crate) fn word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Letters from the Latin Unicode blocks.
pub fn is_latin_letter(c: char) -> bool {
    if !c.is_alphabetic() {
        return false;
    }
    matches!(c as u32,
        0x0041..=0x005A | 0x0061..=0x007A
        | 0x00AA | 0x00BA
        | 0x00C0..=0x00D6 | 0x00D8..=0x00F6 | 0x00F8..=0x024F
        | 0x0250..=0x02AF
        | 0x1D00..=0x1D7F
        | 0x1E00..=0x1EFF
        | 0x2C60..=0x2C7F
        | 0xA720..=0xA7FF
        | 0xAB30..=0xAB6F
        | 0xFF21..=0xFF3A | 0xFF41..=0xFF5A)
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control()
}

/// Numeric content features of one comment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContentFeatures {
    pub comment_length: f64,
    pub lower_case_ratio: f64,
    pub upper_case_ratio: f64,
    pub non_latin_ratio: f64,
    pub latin_ratio: f64,
    pub alphanumeric_ratio: f64,
    pub digit_ratio: f64,
    pub punctuation_ratio: f64,
    pub whitespace_ratio: f64,
    pub longest_char_seq: f64,
    pub lang_word_ratio: f64,
    pub lower_case_word_ratio: f64,
    pub upper_case_word_ratio: f64,
    pub contains_url: f64,
    pub contains_lang_word: f64,
    pub longest_word: f64,
    pub contains_hash_tag: f64,
    pub is_spec_contri_user: f64,
}

impl ContentFeatures {
    /// `(name, value)` pairs under their canonical feature names.
    pub fn named(&self) -> [(&'static str, f64); 18] {
        [
            ("commentLength", self.comment_length),
            ("lowerCaseRatio", self.lower_case_ratio),
            ("upperCaseRatio", self.upper_case_ratio),
            ("nonLatinRatio", self.non_latin_ratio),
            ("latinRatio", self.latin_ratio),
            ("alphanumericRatio", self.alphanumeric_ratio),
            ("digitRatio", self.digit_ratio),
            ("punctuationRatio", self.punctuation_ratio),
            ("whitespaceRatio", self.whitespace_ratio),
            ("longestCharSeq", self.longest_char_seq),
            ("langWordRatio", self.lang_word_ratio),
            ("lowerCaseWordRatio", self.lower_case_word_ratio),
            ("upperCaseWordRatio", self.upper_case_word_ratio),
            ("containsURL", self.contains_url),
            ("containsLangWord", self.contains_lang_word),
            ("longestWord", self.longest_word),
            ("containsHashTag", self.contains_hash_tag),
            ("isSpecContriUser", self.is_spec_contri_user),
        ]
    }
}

fn ratio(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// First `#tag` in the comment: `#` followed by at least one alphanumeric.
pub fn first_hashtag(comment: &str) -> Option<&str> {
    let mut rest = comment;
    while let Some(pos) = rest.find('#') {
        let after = &rest[pos + 1..];
        let end = after.find(|c: char| !c.is_alphanumeric()).unwrap_or(after.len());
        if end > 0 {
            return Some(&after[..end]);
        }
        rest = after;
    }
    None
}

pub fn extract_content(comment: &str) -> ContentFeatures {
    let total = comment.chars().count();
    if total == 0 {
        return ContentFeatures::default();
    }
    let mut lower = 0;
    let mut upper = 0;
    let mut alpha = 0;
    let mut latin = 0;
    let mut alnum = 0;
    let mut digit = 0;
    let mut punct = 0;
    let mut space = 0;
    let mut longest_run = 0;
    let mut run = 0;
    let mut prev = None;
    for c in comment.chars() {
        lower += usize::from(c.is_lowercase());
        upper += usize::from(c.is_uppercase());
        alpha += usize::from(c.is_alphabetic());
        latin += usize::from(is_latin_letter(c));
        alnum += usize::from(c.is_alphanumeric());
        digit += usize::from(c.is_numeric());
        punct += usize::from(is_punctuation(c));
        space += usize::from(c.is_whitespace());
        run = if prev == Some(c) { run + 1 } else { 1 };
        longest_run = longest_run.max(run);
        prev = Some(c);
    }

    let lang_words = language_words();
    let mut words = 0;
    let mut cased_words = 0;
    let mut lower_words = 0;
    let mut upper_words = 0;
    let mut lang_hits = 0;
    let mut longest_word = 0;
    for word in comment.split_whitespace() {
        words += 1;
        longest_word = longest_word.max(word.chars().count());
        if word.chars().any(char::is_alphabetic) {
            cased_words += 1;
            let letters = || word.chars().filter(|c| c.is_alphabetic());
            lower_words += usize::from(letters().all(char::is_lowercase));
            upper_words += usize::from(letters().all(char::is_uppercase));
        }
        let bare = word.trim_matches(|c: char| !c.is_alphanumeric());
        if !bare.is_empty() && lang_words.contains(&bare.to_lowercase()) {
            lang_hits += 1;
        }
    }

    let latin_ratio = ratio(latin, alpha);
    let lang_word_ratio = ratio(lang_hits, words);
    ContentFeatures {
        comment_length: total as f64,
        lower_case_ratio: ratio(lower, total),
        upper_case_ratio: ratio(upper, total),
        latin_ratio,
        non_latin_ratio: if alpha > 0 { 1.0 - latin_ratio } else { 0.0 },
        alphanumeric_ratio: ratio(alnum, total),
        digit_ratio: ratio(digit, total),
        punctuation_ratio: ratio(punct, total),
        whitespace_ratio: ratio(space, total),
        longest_char_seq: longest_run as f64,
        lang_word_ratio,
        lower_case_word_ratio: ratio(lower_words, cased_words),
        upper_case_word_ratio: ratio(upper_words, cased_words),
        contains_url: flag(["http://", "https://", "www."].iter().any(|p| comment.contains(p))),
        contains_lang_word: flag(lang_hits > 0),
        longest_word: longest_word as f64,
        contains_hash_tag: flag(first_hashtag(comment).is_some()),
        is_spec_contri_user: flag(comment.contains("[[Special:Contributions/")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_counted_example() {
        // H e l l o _ W O R L D _ 1 2 3
        let f = extract_content("Hello WORLD 123");
        assert_eq!(f.comment_length, 15.0);
        assert_eq!(f.lower_case_ratio, 4.0 / 15.0);
        assert_eq!(f.upper_case_ratio, 6.0 / 15.0);
        assert_eq!(f.digit_ratio, 3.0 / 15.0);
        assert_eq!(f.whitespace_ratio, 2.0 / 15.0);
        assert_eq!(f.alphanumeric_ratio, 13.0 / 15.0);
        assert_eq!(f.punctuation_ratio, 0.0);
        assert_eq!(f.longest_word, 5.0);
        // "ll" in "Hello".
        assert_eq!(f.longest_char_seq, 2.0);
        assert_eq!(f.latin_ratio, 1.0);
        assert_eq!(f.non_latin_ratio, 0.0);
        assert_eq!(f.upper_case_word_ratio, 0.5);
        assert_eq!(f.lower_case_word_ratio, 0.0);
    }

    #[test]
    fn empty_comment_is_all_zero() {
        assert_eq!(extract_content(""), ContentFeatures::default());
        assert!(extract_content("").named().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn trigger_strings() {
        let f = extract_content("see www.example.com #autolist2 [[Special:Contributions/abcd]]");
        assert_eq!(f.contains_url, 1.0);
        assert_eq!(f.contains_hash_tag, 1.0);
        assert_eq!(f.is_spec_contri_user, 1.0);
        let g = extract_content("# not a tag, C# neither?");
        assert_eq!(g.contains_hash_tag, 0.0);
        assert_eq!(first_hashtag("x #autolist2, y"), Some("autolist2"));
    }

    #[test]
    fn scripts_and_language_words() {
        let f = extract_content("English 日本語");
        assert_eq!(f.latin_ratio, 7.0 / 10.0);
        assert!((f.non_latin_ratio - 3.0 / 10.0).abs() < 1e-15);
        assert_eq!(f.lang_word_ratio, 0.5);
        assert_eq!(f.contains_lang_word, 1.0);
        let g = extract_content("12 34");
        assert_eq!(g.latin_ratio, 0.0);
        assert_eq!(g.non_latin_ratio, 0.0);
    }

    proptest! {
        #[test]
        fn ratios_bounded(s in "\\PC{0,60}") {
            let f = extract_content(&s);
            for (name, v) in f.named() {
                prop_assert!(v.is_finite() && v >= 0.0, "{name} = {v}");
                if name.ends_with("Ratio") || name.starts_with("contains") || name.starts_with("is") {
                    prop_assert!(v <= 1.0, "{name} = {v}");
                }
            }
            prop_assert!(f.longest_char_seq <= f.comment_length);
            prop_assert!(f.longest_word <= f.comment_length);
        }
    }
}
