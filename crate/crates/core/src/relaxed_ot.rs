//! Relaxed optimal transport with a diagonal window.
//!
//! Dropping the column-marginal constraint decouples the transport problem
//! by row: each source token sends its whole mass to its cheapest admissible
//! target, and the optimum lower-bounds the fully constrained transport cost.
//! With the window enabled, row `i` (1-based) of an `n x n̂` problem may only
//! use columns `j` with `max(1, λi − W) ≤ j ≤ min(n̂, λi + W)`, `λ = n̂ / n`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cost::{cost_matrix, CostMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sequences::{masses_from_norms, EmbeddingSequence, MassVector};

/// Default half-width of the diagonal window.
pub const DEFAULT_WINDOW: usize = 10;

/// Aligned pairs closer than this make the distance gradient undefined.
pub const MIN_ALIGNED_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub enabled: bool,
    pub width: usize,
}

impl WindowConfig {
    pub fn new(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidValue("window width must be at least 1".into()));
        }
        Ok(Self {
            enabled: true,
            width,
        })
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            width: DEFAULT_WINDOW,
        }
    }

    /// 0-based inclusive column range admissible for 0-based `row`.
    pub fn columns(&self, row: usize, n: usize, n_hat: usize) -> (usize, usize) {
        if self.enabled {
            let (lo, hi) = window_bounds(row + 1, n, n_hat, self.width);
            (lo - 1, hi - 1)
        } else {
            (0, n_hat - 1)
        }
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            width: DEFAULT_WINDOW,
        }
    }
}

/// 1-based inclusive column bounds `(lo, hi)` for 1-based row `i`:
/// `lo = max(1, ⌈λi − W⌉)`, `hi = min(n̂, ⌊λi + W⌋)` with `λ = n̂ / n`.
///
/// Evaluated in exact integer arithmetic (`λi = n̂·i / n`), so no rounding
/// of the window center ever occurs. Always `lo ≤ hi` for `W ≥ 1`.
pub fn window_bounds(i: usize, n: usize, n_hat: usize, w: usize) -> (usize, usize) {
    assert!(i >= 1 && i <= n && n_hat >= 1 && w >= 1, "invalid window query");
    let (i, n, n_hat, w) = (i as i128, n as i128, n_hat as i128, w as i128);
    let center = n_hat * i;
    let lo_num = center - w * n;
    let hi_num = center + w * n;
    let lo = -((-lo_num).div_euclid(n));
    let hi = hi_num.div_euclid(n);
    (lo.max(1) as usize, hi.min(n_hat) as usize)
}

/// Per-row transport plan. Relaxed plans additionally remember the column
/// chosen for each row, so rows carrying zero mass still have a target.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    values: Matrix,
    row_marginal: Vec<f64>,
    col_marginal: Option<Vec<f64>>,
    chosen: Option<Vec<usize>>,
}

impl TransportPlan {
    /// Wraps a dense nonnegative plan; marginals are read off its sums.
    pub fn dense(values: Matrix) -> Result<Self> {
        if values.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidValue("plan entries must be finite and nonnegative".into()));
        }
        Ok(Self {
            row_marginal: values.row_sums(),
            col_marginal: Some(values.col_sums()),
            values,
            chosen: None,
        })
    }

    pub(crate) fn from_parts(values: Matrix, row_marginal: Vec<f64>, col_marginal: Vec<f64>) -> Self {
        Self {
            values,
            row_marginal,
            col_marginal: Some(col_marginal),
            chosen: None,
        }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    /// `None` for relaxed plans, which carry no column constraint.
    pub fn col_marginal(&self) -> Option<&[f64]> {
        self.col_marginal.as_deref()
    }

    pub fn is_relaxed(&self) -> bool {
        self.chosen.is_some()
    }

    /// `Σ_ij T_ij c_ij`, summed row by row.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.rows() {
            for (t, c) in self.values.row(i).iter().zip(cost.row(i)) {
                total += t * c;
            }
        }
        total
    }

    /// Largest absolute deviation of a row sum (and column sum, if
    /// constrained) from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self
            .values
            .row_sums()
            .iter()
            .zip(&self.row_marginal)
            .map(|(s, m)| (s - m).abs())
            .fold(0.0, f64::max);
        let cols = match &self.col_marginal {
            Some(target) => self
                .values
                .col_sums()
                .iter()
                .zip(target)
                .map(|(s, m)| (s - m).abs())
                .fold(0.0, f64::max),
            None => 0.0,
        };
        rows.max(cols)
    }
}

/// Target index of every source token, 0-based in memory and 1-based on disk.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alignment {
    targets: Vec<usize>,
}

impl Alignment {
    pub fn new(targets: Vec<usize>) -> Self {
        Self { targets }
    }

    /// From 1-based target indices.
    pub fn from_one_based(targets: &[usize]) -> Result<Self> {
        targets
            .iter()
            .map(|&t| {
                t.checked_sub(1).ok_or(Error::IndexOutOfRange {
                    index: t,
                    bound: usize::MAX,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn get(&self, i: usize) -> usize {
        self.targets[i]
    }

    /// Fails with `IndexOutOfRange` if any target is not a valid index into
    /// a sequence of `n_hat` tokens.
    pub fn check_bounds(&self, n_hat: usize) -> Result<()> {
        match self.targets.iter().find(|&&t| t >= n_hat) {
            Some(&t) => Err(Error::IndexOutOfRange {
                index: t + 1,
                bound: n_hat,
            }),
            None => Ok(()),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.targets.windows(2).all(|w| w[0] <= w[1])
    }

    /// True when every target lies in its row's window of half-width `w`.
    pub fn within_window(&self, n_hat: usize, w: usize) -> bool {
        let n = self.len();
        self.targets.iter().enumerate().all(|(i, &t)| {
            let (lo, hi) = window_bounds(i + 1, n, n_hat, w);
            (lo..=hi).contains(&(t + 1))
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("n {}\n", self.len());
        for (i, t) in self.targets.iter().enumerate() {
            writeln!(out, "{}\t{}", i + 1, t + 1).unwrap();
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) if !l.trim().is_empty() => l,
            _ => return Err(Error::format(1, "empty file")),
        };
        let tokens: Vec<&str> = header
            .split(|c: char| c.is_whitespace() || c == '=')
            .filter(|t| !t.is_empty())
            .collect();
        let n: usize = match tokens.as_slice() {
            ["n", n] => n
                .parse()
                .map_err(|_| Error::format(1, format!("bad row count {n:?}")))?,
            _ => return Err(Error::format(1, "expected header `n <int>`")),
        };
        let mut targets = Vec::with_capacity(n);
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            if targets.len() == n {
                return Err(Error::format(line_no, format!("more than {n} rows")));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::format(line_no, "expected `i<TAB>a_i`"));
            }
            let parse = |s: &str| -> Result<usize> {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::format(line_no, format!("not an index: {s:?}")))
            };
            let i = parse(fields[0])?;
            let a = parse(fields[1])?;
            if i != targets.len() + 1 {
                return Err(Error::format(
                    line_no,
                    format!("expected row {}, found {i}", targets.len() + 1),
                ));
            }
            if a == 0 {
                return Err(Error::format(line_no, "target indices are 1-based"));
            }
            targets.push(a - 1);
        }
        if targets.len() != n {
            return Err(Error::format(
                text.lines().count().max(1),
                format!("header declares {n} rows, found {}", targets.len()),
            ));
        }
        if n == 0 {
            return Err(Error::format(1, "alignment must have at least one row"));
        }
        Ok(Self::new(targets))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tsv(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

/// Smallest-index argmin of `row[lo..=hi]`, returned as an absolute index.
fn argmin_in(row: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for j in lo + 1..=hi {
        if row[j] < row[best] {
            best = j;
        }
    }
    best
}

fn check_shapes(cost: &CostMatrix, row_masses: &MassVector) -> Result<()> {
    if cost.rows() != row_masses.len() {
        return Err(Error::ShapeMismatch(format!(
            "cost has {} rows but {} masses were given",
            cost.rows(),
            row_masses.len()
        )));
    }
    Ok(())
}

/// Solves the relaxed problem in closed form.
///
/// Row `i` moves its mass to the cheapest admissible column (smallest index
/// on ties). Returns the plan and `D* = Σ_i m_i · min_j c_ij`.
pub fn solve_relaxed(
    cost: &CostMatrix,
    row_masses: &MassVector,
    window: WindowConfig,
) -> Result<(TransportPlan, f64)> {
    check_shapes(cost, row_masses)?;
    if window.enabled && window.width == 0 {
        return Err(Error::InvalidValue("window width must be at least 1".into()));
    }
    let (n, m) = (cost.rows(), cost.cols());
    let mut values = Matrix::zeros(n, m);
    let mut chosen = Vec::with_capacity(n);
    let mut distance = 0.0;
    for i in 0..n {
        let (lo, hi) = window.columns(i, n, m);
        let row = cost.row(i);
        let j = argmin_in(row, lo, hi);
        let mass = row_masses[i];
        values.set(i, j, mass);
        distance += mass * row[j];
        chosen.push(j);
    }
    let plan = TransportPlan {
        values,
        row_marginal: row_masses.as_slice().to_vec(),
        col_marginal: None,
        chosen: Some(chosen),
    };
    Ok((plan, distance))
}

/// Smallest gap between the best and second-best admissible cost over all
/// rows; infinite if every row has a single admissible column. A large
/// margin means small perturbations of the inputs cannot change the argmin.
pub fn argmin_margin(cost: &CostMatrix, window: WindowConfig) -> f64 {
    let (n, m) = (cost.rows(), cost.cols());
    let mut margin = f64::INFINITY;
    for i in 0..n {
        let (lo, hi) = window.columns(i, n, m);
        let row = cost.row(i);
        let best = argmin_in(row, lo, hi);
        for j in lo..=hi {
            if j != best {
                margin = margin.min(row[j] - row[best]);
            }
        }
    }
    margin
}

/// Row-wise argmax of a plan, smallest index on ties. Rows of a relaxed plan
/// that carry no mass fall back to the column the solver chose for them.
pub fn extract_alignment(plan: &TransportPlan) -> Alignment {
    let values = plan.values();
    let targets = (0..plan.rows())
        .map(|i| {
            let row = values.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            match &plan.chosen {
                Some(chosen) if row[best] == 0.0 => chosen[i],
                _ => best,
            }
        })
        .collect();
    Alignment::new(targets)
}

/// Relaxed distance between two sequences with norm-derived masses, plus the
/// alignment it induces.
pub fn relaxed_distance(
    speech: &EmbeddingSequence,
    text: &EmbeddingSequence,
    window: WindowConfig,
) -> Result<(f64, Alignment)> {
    let cost = cost_matrix(speech, text)?;
    let masses = masses_from_norms(speech)?;
    let (plan, distance) = solve_relaxed(&cost, &masses, window)?;
    Ok((distance, extract_alignment(&plan)))
}

/// Gradient of the relaxed distance with respect to both sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedGradient {
    pub grad_a: Matrix,
    pub grad_b: Matrix,
    pub distance: f64,
    pub alignment: Alignment,
}

/// Gradient of `D* = Σ_i m_i(a) ‖a_i − b_{σ(i)}‖` with the alignment `σ`
/// held at its current value, where `m_i(a) = ‖a_i‖ / Σ_k ‖a_k‖`.
///
/// With `S = Σ_k ‖a_k‖`, `c_i = ‖a_i − b_{σ(i)}‖` and `u_k = a_k / ‖a_k‖`:
///
/// ```text
/// ∂D*/∂a_k = m_k (a_k − b_{σ(k)}) / c_k + (c_k − D*) u_k / S
/// ∂D*/∂b_j = −Σ_{i: σ(i) = j} m_i (a_i − b_j) / c_i
/// ```
///
/// The result is exact wherever the argmin is locally constant; callers that
/// need that guarantee can check [`argmin_margin`].
pub fn relaxed_grad(
    a: &EmbeddingSequence,
    b: &EmbeddingSequence,
    window: WindowConfig,
) -> Result<RelaxedGradient> {
    let cost = cost_matrix(a, b)?;
    let masses = masses_from_norms(a)?;
    let (plan, distance) = solve_relaxed(&cost, &masses, window)?;
    let alignment = extract_alignment(&plan);
    let norms = a.norms();
    let total_norm: f64 = norms.iter().sum();
    let d = a.dim();

    let mut grad_a = Matrix::zeros(a.len(), d);
    let mut grad_b = Matrix::zeros(b.len(), d);
    for (k, &j) in alignment.targets().iter().enumerate() {
        let c = cost.get(k, j);
        if c < MIN_ALIGNED_DISTANCE {
            return Err(Error::DegenerateGradient(format!(
                "token {} coincides with its aligned target {}",
                k + 1,
                j + 1
            )));
        }
        if norms[k] == 0.0 {
            return Err(Error::DegenerateGradient(format!(
                "token {} has zero norm, so its mass is not differentiable",
                k + 1
            )));
        }
        let (ak, bj) = (a.row(k), b.row(j));
        let transport = masses[k] / c;
        let renorm = (c - distance) / (total_norm * norms[k]);
        let ga = grad_a.row_mut(k);
        for t in 0..d {
            ga[t] = transport * (ak[t] - bj[t]) + renorm * ak[t];
        }
        let gb = grad_b.row_mut(j);
        for t in 0..d {
            gb[t] -= transport * (ak[t] - bj[t]);
        }
    }
    Ok(RelaxedGradient {
        grad_a,
        grad_b,
        distance,
        alignment,
    })
}
