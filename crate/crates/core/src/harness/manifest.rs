//! Line-oriented parameter shape manifests: `name<TAB>class<TAB>ROWSxCOLS`.
//!
//! Blank lines and lines starting with `#` are ignored. A single dimension
//! (`512`) is read as a column vector `512x1`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::{ParamClass, ParamSpec};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShapeManifest {
    pub params: Vec<ParamSpec>,
}

fn parse_dim(s: &str, line: usize) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err(Error::Parse {
            line,
            message: "dimensions must be positive".into(),
        }),
        Ok(v) => Ok(v),
        Err(_) => Err(Error::Parse {
            line,
            message: format!("`{s}` is not a dimension"),
        }),
    }
}

impl ShapeManifest {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &params {
            if p.rows == 0 || p.cols == 0 {
                return Err(Error::invalid(format!(
                    "parameter `{}` has an empty shape",
                    p.name
                )));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate parameter name `{}`",
                    p.name
                )));
            }
        }
        Ok(ShapeManifest { params })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut params = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let name = fields[0].trim();
            if name.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty parameter name".into(),
                });
            }
            let class: ParamClass = fields[1].trim().parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            let (rows, cols) = match fields[2].trim().split_once(['x', 'X']) {
                Some((r, c)) => (parse_dim(r, line)?, parse_dim(c, line)?),
                None => (parse_dim(fields[2], line)?, 1),
            };
            if !seen.insert(name.to_string()) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate parameter name `{name}`"),
                });
            }
            params.push(ParamSpec::new(name, rows, cols, class));
        }
        Ok(ShapeManifest { params })
    }

    pub fn read(path: &Path) -> Result<Self> {
        ShapeManifest::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            let _ = writeln!(out, "{}\t{}\t{}x{}", p.name, p.class, p.rows, p.cols);
        }
        out
    }

    pub fn total_elements(&self) -> usize {
        self.params.iter().map(ParamSpec::numel).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let text = "# toy\nw\tlinear\t4x3\n\nemb\tembedding\t10x4\nnorm\tnorm\t4\n";
        let m = ShapeManifest::parse(text).unwrap();
        assert_eq!(m.params.len(), 3);
        assert_eq!(m.params[2].rows, 4);
        assert_eq!(m.params[2].cols, 1);
        assert_eq!(m.total_elements(), 12 + 40 + 4);
        assert_eq!(ShapeManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("w\tlinear 4x3\n", 1),
            ("a\tlinear\t2x2\nb\tconv\t2x2\n", 2),
            ("a\tlinear\t2x0\n", 1),
            ("a\tlinear\t2x2\na\tnorm\t2\n", 2),
            ("a\tlinear\ttwo\n", 1),
        ];
        for (text, expected) in cases {
            match ShapeManifest::parse(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
