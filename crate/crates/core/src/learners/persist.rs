//! Line reader shared by the model and pipeline text formats.

use std::str::FromStr;

use super::LearnError;

pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Split<'a, char>>,
    offset: usize,
    last: usize,
}

impl<'a> Lines<'a> {
    /// `offset` is added to reported line numbers.
    pub(crate) fn new(text: &'a str, offset: usize) -> Self {
        Self {
            inner: text.split('\n').enumerate(),
            offset,
            last: offset,
        }
    }

    pub(crate) fn position(&self) -> usize {
        self.last
    }

    pub(crate) fn next_line(&mut self) -> Result<(usize, &'a str), LearnError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = self.offset + i + 1;
                Ok((self.last, l))
            }
            None => Err(LearnError::Parse {
                line: self.last + 1,
                reason: "unexpected end of model".into(),
            }),
        }
    }

    /// Read `keyword rest...` and return `rest`.
    pub(crate) fn keyword(&mut self, keyword: &str) -> Result<&'a str, LearnError> {
        let (n, line) = self.next_line()?;
        line.strip_prefix(keyword)
            .and_then(|r| if r.is_empty() { Some(r) } else { r.strip_prefix(' ') })
            .ok_or_else(|| LearnError::Parse {
                line: n,
                reason: format!("expected `{keyword}`"),
            })
    }

    pub(crate) fn keyword_value<T: FromStr>(&mut self, keyword: &str) -> Result<T, LearnError> {
        let rest = self.keyword(keyword)?;
        num(Some(rest), self.last)
    }

    /// Read `keyword v1 v2 ...` as exactly `len` floats.
    pub(crate) fn keyword_floats(&mut self, keyword: &str, len: usize) -> Result<Vec<f64>, LearnError> {
        let rest = self.keyword(keyword)?;
        let line = self.last;
        let values: Vec<f64> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(' ').map(|v| num(Some(v), line)).collect::<Result<_, _>>()?
        };
        if values.len() != len {
            return Err(LearnError::Parse {
                line,
                reason: format!("`{keyword}` expects {len} values, found {}", values.len()),
            });
        }
        Ok(values)
    }
}

pub(crate) fn num<T: FromStr>(raw: Option<&str>, line: usize) -> Result<T, LearnError> {
    raw.and_then(|r| r.trim().parse().ok()).ok_or_else(|| LearnError::Parse {
        line,
        reason: format!("bad number {:?}", raw.unwrap_or("")),
    })
}

pub(crate) fn floats_line(keyword: &str, values: &[f64]) -> String {
    let mut s = String::with_capacity(keyword.len() + values.len() * 20);
    s.push_str(keyword);
    for v in values {
        s.push(' ');
        s.push_str(&format!("{v:?}"));
    }
    s.push('\n');
    s
}
