//! Embedding sequences, norm-derived token masses and the TSV file format.
//!
//! File layout: a header line `n <int> d <int>` followed by `n` lines of `d`
//! tab-separated decimal reals. Values are written in Rust's shortest
//! round-trip representation, so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Tolerance on the sum of a [`MassVector`].
pub const MASS_SUM_TOL: f64 = 1e-9;

/// `n` tokens, each a `d`-dimensional finite real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    rows: Matrix,
}

impl EmbeddingSequence {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidValue("sequence must have at least one token".into()));
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                    line: None,
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(n, d, data)
    }

    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidValue(format!(
                "sequence shape must be at least 1x1, got {n}x{d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} values cannot hold {n}x{d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite coordinate at token {}, dim {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(Self {
            rows: Matrix::from_vec(n, d, data),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    /// Always false: sequences hold at least one token.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.rows
    }

    /// L2 norm of every token.
    pub fn norms(&self) -> Vec<f64> {
        self.rows().map(l2_norm).collect()
    }

    /// Multiplies every coordinate by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let data = self.rows.as_slice().iter().map(|v| v * k).collect();
        Self::from_flat(self.len(), self.dim(), data)
    }

    /// Returns a sequence whose row `i` is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: order.len(),
                right: self.len(),
            });
        }
        let mut data = Vec::with_capacity(self.len() * self.dim());
        for &k in order {
            if k >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: k + 1,
                    bound: self.len(),
                });
            }
            data.extend_from_slice(self.row(k));
        }
        Self::from_flat(self.len(), self.dim(), data)
    }

    pub fn to_tsv(&self) -> String {
        write_table(self, None)
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        parse_table(text, false).map(|(seq, _)| seq)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tsv(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<EmbeddingSequence> {
    EmbeddingSequence::read(path)
}

pub fn write_sequence(seq: &EmbeddingSequence, path: impl AsRef<Path>) -> Result<()> {
    seq.write(path)
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Serializes `seq`, appending `tags[i]` as an extra column on row `i`.
pub(crate) fn write_table(seq: &EmbeddingSequence, tags: Option<&[&str]>) -> String {
    let mut out = format!("n {} d {}\n", seq.len(), seq.dim());
    for (i, row) in seq.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push('\t');
            }
            write!(out, "{v}").unwrap();
        }
        if let Some(tags) = tags {
            out.push('\t');
            out.push_str(tags[i]);
        }
        out.push('\n');
    }
    out
}

/// Parses the `n <int> d <int>` header. `n=2 d=3` is accepted as well.
fn parse_header(line: &str) -> Result<(usize, usize)> {
    let tokens: Vec<&str> = line
        .split(|c: char| c.is_whitespace() || c == '=')
        .filter(|t| !t.is_empty())
        .collect();
    match tokens.as_slice() {
        ["n", n, "d", d] => {
            let n: usize = n
                .parse()
                .map_err(|_| Error::format(1, format!("bad token count {n:?}")))?;
            let d: usize = d
                .parse()
                .map_err(|_| Error::format(1, format!("bad dimension {d:?}")))?;
            if n == 0 || d == 0 {
                return Err(Error::format(1, "n and d must be positive"));
            }
            Ok((n, d))
        }
        _ => Err(Error::format(1, "expected header `n <int> d <int>`")),
    }
}

/// Parses a sequence table. With `tagged`, every row carries one trailing
/// non-numeric column that is returned alongside the sequence.
pub(crate) fn parse_table(text: &str, tagged: bool) -> Result<(EmbeddingSequence, Vec<String>)> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) if !l.trim().is_empty() => l,
        _ => return Err(Error::format(1, "empty file")),
    };
    let (n, d) = parse_header(header)?;
    let width = if tagged { d + 1 } else { d };

    let mut data = Vec::with_capacity(n * d);
    let mut tags = Vec::new();
    let mut count = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        if count == n {
            return Err(Error::format(line_no, format!("more than {n} data rows")));
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: fields.len() - usize::from(tagged && fields.len() > d),
                line: Some(line_no),
            });
        }
        for field in &fields[..d] {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(line_no, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(line_no, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
        if tagged {
            tags.push(fields[d].trim().to_string());
        }
        count += 1;
    }
    if count != n {
        return Err(Error::format(
            text.lines().count().max(1),
            format!("header declares {n} rows, found {count}"),
        ));
    }
    Ok((EmbeddingSequence::from_flat(n, d, data)?, tags))
}

/// Nonnegative token masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector(Vec<f64>);

impl MassVector {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidValue("mass vector is empty".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidValue("masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::InvalidValue(format!("masses sum to {total}, not 1")));
        }
        Ok(Self(masses))
    }

    /// Normalizes nonnegative weights to unit sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidValue("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidValue("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for MassVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Token masses proportional to embedding norms: `m_i = ‖h_i‖ / Σ_k ‖h_k‖`.
/// Zero-norm tokens get mass zero.
pub fn masses_from_norms(seq: &EmbeddingSequence) -> Result<MassVector> {
    let norms = seq.norms();
    let total: f64 = norms.iter().sum();
    if total == 0.0 {
        return Err(Error::AllZeroSequence);
    }
    MassVector::new(norms.iter().map(|n| n / total).collect())
}
