//! Training-objective arithmetic on explicit token distributions:
//! label-smoothed cross-entropy, symmetric KL between prediction streams,
//! and the weighted combination of all terms.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Probabilities are clamped to at least this value before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Entries below this value are too close to the floor for
/// [`symmetric_kl_grad`] to be meaningful.
pub const GRAD_MIN_PROB: f64 = 1e-9;

const ROW_SUM_TOL: f64 = 1e-9;

/// Default weight of the KL regularizers.
pub const DEFAULT_LAMBDA_KL: f64 = 2.0;

/// `L x V` matrix whose rows are probability distributions over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistributionSequence {
    probs: Matrix,
}

impl TokenDistributionSequence {
    pub fn new(probs: Matrix) -> Result<Self> {
        if probs.rows() == 0 || probs.cols() == 0 {
            return Err(Error::InvalidValue("distribution sequence must be nonempty".into()));
        }
        for l in 0..probs.rows() {
            let row = probs.row(l);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidValue(format!(
                    "row {} has a negative or non-finite probability",
                    l + 1
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidValue(format!("row {} sums to {total}", l + 1)));
            }
        }
        Ok(Self { probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let v = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != v) {
            return Err(Error::ShapeMismatch("ragged distribution rows".into()));
        }
        Self::new(Matrix::from_vec(rows.len(), v, rows.concat()))
    }

    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vocab(&self) -> usize {
        self.probs.cols()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        self.probs.row(l)
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }
}

/// Mean over positions of the label-smoothed negative log-likelihood
/// `(1 − α)(−log p[t]) + (α / V) Σ_v (−log p[v])`. Targets are 0-based.
pub fn cross_entropy(
    pred: &TokenDistributionSequence,
    target_ids: &[usize],
    label_smoothing: f64,
) -> Result<f64> {
    if target_ids.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: target_ids.len(),
            right: pred.len(),
        });
    }
    if !(0.0..1.0).contains(&label_smoothing) {
        return Err(Error::InvalidValue(format!(
            "label smoothing {label_smoothing} not in [0, 1)"
        )));
    }
    let v = pred.vocab();
    let mut total = 0.0;
    for (l, &t) in target_ids.iter().enumerate() {
        if t >= v {
            return Err(Error::IndexOutOfRange {
                index: t + 1,
                bound: v,
            });
        }
        let row = pred.row(l);
        let nll = -row[t].max(PROB_FLOOR).ln();
        let uniform: f64 = row.iter().map(|p| -p.max(PROB_FLOOR).ln()).sum();
        total += (1.0 - label_smoothing) * nll + label_smoothing / v as f64 * uniform;
    }
    Ok(total / pred.len() as f64)
}

fn check_same_shape(p: &TokenDistributionSequence, q: &TokenDistributionSequence) -> Result<()> {
    if p.len() != q.len() || p.vocab() != q.vocab() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            p.len(),
            p.vocab(),
            q.len(),
            q.vocab()
        )));
    }
    Ok(())
}

/// Clamps to the floor and renormalizes.
fn floored(row: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = row.iter().map(|p| p.max(PROB_FLOOR)).collect();
    let total: f64 = clamped.iter().sum();
    clamped.into_iter().map(|p| p / total).collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Mean over positions of `½ (KL(p‖q) + KL(q‖p))` on floored inputs.
pub fn symmetric_kl(p: &TokenDistributionSequence, q: &TokenDistributionSequence) -> Result<f64> {
    check_same_shape(p, q)?;
    let total: f64 = (0..p.len())
        .map(|l| {
            let (pl, ql) = (floored(p.row(l)), floored(q.row(l)));
            0.5 * (kl(&pl, &ql) + kl(&ql, &pl))
        })
        .sum();
    Ok(total / p.len() as f64)
}

/// Gradient of [`symmetric_kl`] with respect to the raw entries of `p` and
/// `q`, including the renormalization step. Requires every entry to be at
/// least [`GRAD_MIN_PROB`], where the floor is inactive.
pub fn symmetric_kl_grad(
    p: &TokenDistributionSequence,
    q: &TokenDistributionSequence,
) -> Result<(Matrix, Matrix)> {
    check_same_shape(p, q)?;
    let near_floor = |d: &TokenDistributionSequence| {
        d.probs().as_slice().iter().any(|&x| x < GRAD_MIN_PROB)
    };
    if near_floor(p) || near_floor(q) {
        return Err(Error::DegenerateGradient(format!(
            "probabilities below {GRAD_MIN_PROB} are too close to the floor"
        )));
    }
    let (len, v) = (p.len(), p.vocab());
    let scale = 1.0 / len as f64;
    let mut grad_p = Matrix::zeros(len, v);
    let mut grad_q = Matrix::zeros(len, v);
    for l in 0..len {
        let (pr, qr) = (p.row(l), q.row(l));
        let (sp, sq) = (pr.iter().sum::<f64>(), qr.iter().sum::<f64>());
        let (pn, qn) = (floored(pr), floored(qr));
        // d/dp̃_v of ½ Σ (p̃ − q̃)(ln p̃ − ln q̃)
        let dp: Vec<f64> = (0..v)
            .map(|k| 0.5 * ((pn[k] / qn[k]).ln() + 1.0 - qn[k] / pn[k]))
            .collect();
        let dq: Vec<f64> = (0..v)
            .map(|k| 0.5 * ((qn[k] / pn[k]).ln() + 1.0 - pn[k] / qn[k]))
            .collect();
        let mean_p: f64 = pn.iter().zip(&dp).map(|(a, b)| a * b).sum();
        let mean_q: f64 = qn.iter().zip(&dq).map(|(a, b)| a * b).sum();
        for k in 0..v {
            grad_p.set(l, k, scale * (dp[k] - mean_p) / sp);
            grad_q.set(l, k, scale * (dq[k] - mean_q) / sq);
        }
    }
    Ok((grad_p, grad_q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub lambda_kl: f64,
    pub mu_ot: f64,
    pub use_mixup_ce: bool,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            lambda_kl: DEFAULT_LAMBDA_KL,
            mu_ot: 0.0,
            use_mixup_ce: false,
        }
    }
}

/// Individual loss terms feeding [`total_objective`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossComponents {
    pub st_ce: f64,
    pub mt_ce: f64,
    pub mixup_ce: f64,
    pub kl_ms: f64,
    pub kl_mt: f64,
    pub ot_dist: f64,
}

/// `st + mt + [mixup] + λ (kl_ms + kl_mt) + μ · ot`.
pub fn total_objective(c: &LossComponents, w: &ObjectiveWeights) -> f64 {
    let mixup = if w.use_mixup_ce { c.mixup_ce } else { 0.0 };
    c.st_ce + c.mt_ce + mixup + w.lambda_kl * (c.kl_ms + c.kl_mt) + w.mu_ot * c.ot_dist
}
