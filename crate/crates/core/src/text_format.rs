//! Line-oriented, tab-separated records shared by the model file formats.
//!
//! Each line is a tag followed by fields. Tabs, newlines and backslashes in
//! free-text fields are backslash-escaped. Floats are written with `{:?}`,
//! which round-trips every finite `f64` exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(Error::format(line, format!("bad escape `\\{}`", other.unwrap_or(' ')))),
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub(crate) struct RecordWriter {
    buf: String,
}

impl RecordWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, tag: &str) -> FieldWriter<'_> {
        self.buf.push_str(tag);
        FieldWriter { buf: &mut self.buf }
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub(crate) struct FieldWriter<'a> {
    buf: &'a mut String,
}

impl FieldWriter<'_> {
    pub fn text(self, s: &str) -> Self {
        self.buf.push('\t');
        self.buf.push_str(&escape(s));
        self
    }

    pub fn num(self, x: impl std::fmt::Display) -> Self {
        let _ = write!(self.buf, "\t{x}");
        self
    }

    pub fn float(self, x: f64) -> Self {
        let _ = write!(self.buf, "\t{x:?}");
        self
    }

    pub fn floats(mut self, xs: &[f64]) -> Self {
        for &x in xs {
            self = self.float(x);
        }
        self
    }

    pub fn end(self) {
        self.buf.push('\n');
    }
}

#[derive(Debug)]
pub(crate) struct Record {
    pub line: usize,
    pub tag: String,
    fields: Vec<String>,
}

impl Record {
    pub fn text(&self, i: usize) -> Result<String> {
        let raw = self
            .fields
            .get(i)
            .ok_or_else(|| Error::format(self.line, format!("`{}` record lacks field {}", self.tag, i + 1)))?;
        unescape(raw, self.line)
    }

    pub fn parse<T: FromStr>(&self, i: usize) -> Result<T> {
        let raw = self
            .fields
            .get(i)
            .ok_or_else(|| Error::format(self.line, format!("`{}` record lacks field {}", self.tag, i + 1)))?;
        raw.parse::<T>()
            .map_err(|_| Error::format(self.line, format!("cannot parse `{raw}` in `{}` record", self.tag)))
    }

    pub fn parse_all<T: FromStr>(&self, from: usize) -> Result<Vec<T>> {
        (from..self.fields.len()).map(|i| self.parse(i)).collect()
    }

    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.fields.len() != n {
            return Err(Error::format(
                self.line,
                format!("`{}` record has {} fields, expected {n}", self.tag, self.fields.len()),
            ));
        }
        Ok(())
    }
}

pub(crate) struct RecordReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last_line: usize,
}

impl<'a> RecordReader<'a> {
    pub fn new(text: &'a str) -> Self {
        RecordReader {
            lines: text.lines().enumerate(),
            last_line: 0,
        }
    }

    pub fn line(&self) -> usize {
        self.last_line
    }

    pub fn next(&mut self) -> Result<Record> {
        for (idx, line) in self.lines.by_ref() {
            self.last_line = idx + 1;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let tag = parts.next().unwrap_or_default().to_string();
            return Ok(Record {
                line: idx + 1,
                tag,
                fields: parts.map(String::from).collect(),
            });
        }
        Err(Error::format(self.last_line + 1, "unexpected end of file"))
    }

    pub fn expect(&mut self, tag: &str) -> Result<Record> {
        let rec = self.next()?;
        if rec.tag != tag {
            return Err(Error::format(rec.line, format!("expected `{tag}` record, found `{}`", rec.tag)));
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_round_trip() {
        let nasty = "a\tb\\c\nd";
        let mut w = RecordWriter::new();
        w.record("name").text(nasty).float(0.1).float(1e-300).num(3).end();
        let text = w.finish();
        assert_eq!(text.lines().count(), 1);
        let mut r = RecordReader::new(&text);
        let rec = r.expect("name").unwrap();
        assert_eq!(rec.text(0).unwrap(), nasty);
        assert_eq!(rec.parse::<f64>(1).unwrap(), 0.1);
        assert_eq!(rec.parse::<f64>(2).unwrap(), 1e-300);
        assert_eq!(rec.parse::<usize>(3).unwrap(), 3);
        assert!(rec.parse::<usize>(4).is_err());
        assert!(r.next().is_err());
    }
}
