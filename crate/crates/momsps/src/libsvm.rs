//! LIBSVM sparse text format: `<label> <idx>:<val> ...` with 1-based,
//! strictly increasing indices and `#` comments.

use std::io::{BufRead, Write};

use momsps_core::problems::{Component, FiniteSumProblem};

use crate::error::{Error, Result};
use crate::num::{fmt_f64, parse_f64};

/// One example: `(index, value)` pairs with 1-based indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            if i <= dim {
                out[i - 1] = v;
            }
        }
        out
    }
}

/// Parsed file. Labels are kept as written so that serializing reproduces
/// the input; [`binary_labels`](Self::binary_labels) gives the `±1` view.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LibsvmData {
    pub labels: Vec<f64>,
    pub rows: Vec<SparseRow>,
    /// Largest index seen.
    pub dim: usize,
}

impl LibsvmData {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Maps the smaller of exactly two distinct labels to −1 and the larger
    /// to +1. `None` for any other label count.
    pub fn binary_labels(&self) -> Option<Vec<f64>> {
        let mut distinct: Vec<f64> = Vec::new();
        for &l in &self.labels {
            if !distinct.contains(&l) {
                if distinct.len() == 2 {
                    return None;
                }
                distinct.push(l);
            }
        }
        if distinct.len() != 2 {
            return None;
        }
        let hi = distinct[0].max(distinct[1]);
        Some(self.labels.iter().map(|&l| if l == hi { 1.0 } else { -1.0 }).collect())
    }

    /// Binary logistic regression over the dense rows.
    pub fn to_logistic_problem(&self) -> Result<FiniteSumProblem> {
        let labels = self.binary_labels().ok_or_else(|| {
            Error::Core(momsps_core::Error::Precondition(
                "logistic regression needs exactly two distinct labels".into(),
            ))
        })?;
        let dim = self.dim.max(1);
        let components =
            self.rows.iter().zip(labels).map(|(row, y)| Component::logistic(row.to_dense(dim), y)).collect();
        Ok(FiniteSumProblem::new(components)?)
    }
}

pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LibsvmData> {
    let mut data = LibsvmData::default();
    for (k, line) in reader.split(b'\n').enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::parse("libsvm", lineno, e.to_string()))?;
        let line = std::str::from_utf8(&line).map_err(|_| Error::parse("libsvm", lineno, "invalid UTF-8"))?;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_ascii_whitespace();
        let Some(label) = tokens.next() else { continue };
        let label = parse_f64(label)
            .filter(|l| l.is_finite())
            .ok_or_else(|| Error::parse("libsvm", lineno, format!("malformed label `{label}`")))?;
        let mut row = SparseRow::default();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse("libsvm", lineno, format!("malformed token `{tok}`")))?;
            let idx: i64 =
                idx.parse().map_err(|_| Error::parse("libsvm", lineno, format!("malformed index `{idx}`")))?;
            if idx <= 0 {
                return Err(Error::parse("libsvm", lineno, format!("index {idx} is not positive")));
            }
            let idx = idx as usize;
            if idx <= last {
                return Err(Error::parse("libsvm", lineno, "non-increasing index"));
            }
            let val = parse_f64(val)
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse("libsvm", lineno, format!("malformed value `{val}`")))?;
            row.entries.push((idx, val));
            last = idx;
        }
        data.dim = data.dim.max(last);
        data.labels.push(label);
        data.rows.push(row);
    }
    Ok(data)
}

pub fn parse_libsvm_str(text: &str) -> Result<LibsvmData> {
    parse_libsvm(text.as_bytes())
}

/// Canonical form: shortest round-trip numbers, single spaces, LF endings,
/// no comments.
pub fn write_libsvm<W: Write>(data: &LibsvmData, mut w: W) -> std::io::Result<()> {
    for (label, row) in data.labels.iter().zip(&data.rows) {
        w.write_all(fmt_f64(*label).as_bytes())?;
        for &(i, v) in &row.entries {
            write!(w, " {i}:{}", fmt_f64(v))?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_libsvm_string(data: &LibsvmData) -> String {
    let mut buf = Vec::new();
    write_libsvm(data, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Sparse view of a problem's logistic components.
pub fn from_problem(problem: &FiniteSumProblem) -> Option<LibsvmData> {
    use momsps_core::problems::Loss;
    let mut data = LibsvmData { dim: problem.dim(), ..Default::default() };
    for c in problem.components() {
        let Loss::Logistic { row, label } = &c.loss else { return None };
        let entries = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i + 1, *v)).collect();
        data.labels.push(*label);
        data.rows.push(SparseRow { entries });
    }
    Some(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_forms() {
        let d = parse_libsvm_str("1 1:0.5 3:-2\n-1 \n# only a comment\n\n+1 2:1 # trailing\n").unwrap();
        assert_eq!(d.labels, vec![1.0, -1.0, 1.0]);
        assert_eq!(d.rows[0].entries, vec![(1, 0.5), (3, -2.0)]);
        assert!(d.rows[1].entries.is_empty());
        assert_eq!(d.dim, 3);
        assert_eq!(d.rows[1].to_dense(3), vec![0.0; 3]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_libsvm_str("1 1:1\n1 3:1 2:1\n").unwrap_err();
        assert_eq!(e.to_string(), "libsvm: non-increasing index at line 2");
        let e = parse_libsvm_str("1 0:1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = parse_libsvm_str("\n\n1 2:1 2:3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        assert!(parse_libsvm_str("1 a:1").is_err());
        assert!(parse_libsvm_str("1 1:x").is_err());
        assert!(parse_libsvm_str("1 1").is_err());
        assert!(parse_libsvm_str("x 1:1").is_err());
    }

    #[test]
    fn binary_label_mapping() {
        let d = parse_libsvm_str("0 1:1\n1 1:2\n0 2:1\n").unwrap();
        assert_eq!(d.binary_labels().unwrap(), vec![-1.0, 1.0, -1.0]);
        assert!(parse_libsvm_str("0\n1\n2\n").unwrap().binary_labels().is_none());
        let p = d.to_logistic_problem().unwrap();
        assert_eq!((p.n(), p.dim()), (3, 2));
        assert!((p.full_objective(&[0.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "1 1:0.5 3:-2\n-1\n1 2:1e-7 7:123456789\n";
        let d = parse_libsvm_str(text).unwrap();
        assert_eq!(to_libsvm_string(&d), text);
    }
}
