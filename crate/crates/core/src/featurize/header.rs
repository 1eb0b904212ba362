//! The `/* action-subaction:params */` block that opens machine-generated
//! edit comments.

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommentHeader {
    pub action: Option<String>,
    pub subaction: Option<String>,
    pub language: Option<String>,
}

fn is_language_code(s: &str) -> bool {
    (2..=3).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_lowercase())
}

/// Split the leading header of a comment.
///
/// `/* wbsetclaim-create:2||1 */` yields action `wbsetclaim`, subaction
/// `create`; a last `|`-parameter of 2-3 lowercase letters (`|en`) is the
/// language. Comments without a header yield all-missing.
pub fn parse_comment_header(comment: &str) -> CommentHeader {
    let Some(inner) = comment
        .strip_prefix("/*")
        .and_then(|rest| rest.find("*/").map(|end| rest[..end].trim()))
    else {
        return CommentHeader::default();
    };
    let (token, params) = match inner.split_once(':') {
        Some((t, p)) => (t.trim(), Some(p)),
        None => (inner, None),
    };
    let (action, subaction) = match token.split_once('-') {
        Some((a, s)) => (a, Some(s)),
        None => (token, None),
    };
    let non_empty = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let language = params
        .and_then(|p| p.rsplit_once('|'))
        .map(|(_, last)| last.trim())
        .filter(|last| is_language_code(last))
        .map(str::to_string);
    CommentHeader {
        action: non_empty(action),
        subaction: subaction.and_then(non_empty),
        language,
    }
}
