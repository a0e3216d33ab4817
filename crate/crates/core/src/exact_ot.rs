//! Reference solvers for the fully constrained transport problem.
//!
//! Both solvers work on log-scaled quantities so that small regularization
//! relative to the cost scale does not underflow the Gibbs kernel. Each
//! iteration ends with a row rescaling, so returned plans satisfy the row
//! marginals to rounding error and the column marginals to `tol` on
//! convergence.

use serde::Serialize;

use crate::cost::CostMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::relaxed_ot::TransportPlan;
use crate::sequences::MassVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OtMethod {
    Sinkhorn,
    Ipot,
}

impl OtMethod {
    pub fn name(self) -> &'static str {
        match self {
            OtMethod::Sinkhorn => "sinkhorn",
            OtMethod::Ipot => "ipot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: OtMethod,
    /// Entropic weight for Sinkhorn. `None` selects `0.01 · mean(cost)`.
    pub epsilon: Option<f64>,
    /// Proximal step weight for IPOT.
    pub beta: f64,
    pub max_iters: usize,
    /// Stop once the largest marginal violation falls below this value
    /// (IPOT additionally requires the plan to move less than `tol`).
    pub tol: f64,
}

impl SolverConfig {
    pub fn sinkhorn() -> Self {
        Self {
            method: OtMethod::Sinkhorn,
            epsilon: None,
            beta: 1.0,
            max_iters: 2000,
            tol: 1e-6,
        }
    }

    pub fn ipot() -> Self {
        Self {
            method: OtMethod::Ipot,
            ..Self::sinkhorn()
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidValue(format!("epsilon must be positive, got {eps}")));
            }
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidValue(format!("beta must be positive, got {}", self.beta)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidValue("max_iters must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidValue(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::sinkhorn()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub method: OtMethod,
    pub plan: TransportPlan,
    pub plan_cost: f64,
    pub iters_used: usize,
    /// Largest absolute row or column marginal violation of `plan`.
    pub violation: f64,
    /// False when `max_iters` ran out first. The plan is still returned.
    pub converged: bool,
    /// Regularization actually used (Sinkhorn only).
    pub epsilon: Option<f64>,
}

/// One-line JSON summary written next to an exported plan.
#[derive(Debug, Clone, Serialize)]
pub struct PlanSummary {
    pub method: OtMethod,
    pub iters_used: usize,
    pub violation: f64,
    pub plan_cost: f64,
}

impl ExactSolution {
    pub fn summary(&self) -> PlanSummary {
        PlanSummary {
            method: self.method,
            iters_used: self.iters_used,
            violation: self.violation,
            plan_cost: self.plan_cost,
        }
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string(&self.summary()).expect("summary serializes")
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Solves `min Σ T_ij c_ij` subject to both marginals.
///
/// Tokens with zero mass are removed before iterating and come back as
/// all-zero rows or columns of the returned plan.
pub fn solve_exact(
    cost: &CostMatrix,
    row_masses: &MassVector,
    col_masses: &MassVector,
    cfg: &SolverConfig,
) -> Result<ExactSolution> {
    cfg.validate()?;
    if cost.rows() != row_masses.len() || cost.cols() != col_masses.len() {
        return Err(Error::ShapeMismatch(format!(
            "cost is {}x{} but masses have lengths {} and {}",
            cost.rows(),
            cost.cols(),
            row_masses.len(),
            col_masses.len()
        )));
    }
    let rows: Vec<usize> = (0..cost.rows()).filter(|&i| row_masses[i] > 0.0).collect();
    let cols: Vec<usize> = (0..cost.cols()).filter(|&j| col_masses[j] > 0.0).collect();
    let sub_cost = Matrix::from_fn(rows.len(), cols.len(), |i, j| cost.get(rows[i], cols[j]));
    let a: Vec<f64> = rows.iter().map(|&i| row_masses[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| col_masses[j]).collect();

    let (epsilon, reduced) = match cfg.method {
        OtMethod::Sinkhorn => {
            let eps = cfg.epsilon.unwrap_or_else(|| default_epsilon(&sub_cost));
            (Some(eps), sinkhorn_log(&sub_cost, &a, &b, eps, cfg)?)
        }
        OtMethod::Ipot => (None, ipot_log(&sub_cost, &a, &b, cfg)?),
    };

    let mut values = Matrix::zeros(cost.rows(), cost.cols());
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            values.set(i, j, reduced.plan.get(ri, cj));
        }
    }
    let plan = TransportPlan::from_parts(
        values,
        row_masses.as_slice().to_vec(),
        col_masses.as_slice().to_vec(),
    );
    let plan_cost = plan.cost(cost);
    let violation = plan.marginal_violation();
    Ok(ExactSolution {
        method: cfg.method,
        plan,
        plan_cost,
        iters_used: reduced.iters,
        violation,
        converged: reduced.converged,
        epsilon,
    })
}

/// `0.01 · mean(cost)`, or 0.01 when every cost is zero.
pub fn default_epsilon(cost: &Matrix) -> f64 {
    let v = cost.as_slice();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if mean > 0.0 {
        0.01 * mean
    } else {
        0.01
    }
}

struct Reduced {
    plan: Matrix,
    iters: usize,
    converged: bool,
}

fn column_violation(plan: &Matrix, b: &[f64]) -> f64 {
    plan.col_sums()
        .iter()
        .zip(b)
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max)
}

fn ensure_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalUnderflow(format!(
            "{what} became non-finite; the regularization is too small for the cost scale"
        )))
    }
}

/// Sinkhorn iterations on dual potentials `f`, `g` with
/// `T_ij = exp((f_i + g_j − c_ij) / ε)`.
fn sinkhorn_log(cost: &Matrix, a: &[f64], b: &[f64], eps: f64, cfg: &SolverConfig) -> Result<Reduced> {
    let (n, m) = (cost.rows(), cost.cols());
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let plan_of = |f: &[f64], g: &[f64]| {
        Matrix::from_fn(n, m, |i, j| ((f[i] + g[j] - cost.get(i, j)) / eps).exp())
    };

    let mut iters = 0;
    let mut converged = false;
    let mut plan = plan_of(&f, &g);
    while iters < cfg.max_iters {
        iters += 1;
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| (f[i] - cost.get(i, j)) / eps));
            g[j] = eps * (log_b[j] - lse);
        }
        for i in 0..n {
            let lse = log_sum_exp((0..m).map(|j| (g[j] - cost.get(i, j)) / eps));
            f[i] = eps * (log_a[i] - lse);
        }
        ensure_finite(&f, "sinkhorn row potential")?;
        ensure_finite(&g, "sinkhorn column potential")?;
        plan = plan_of(&f, &g);
        if column_violation(&plan, b) <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(Reduced {
        plan,
        iters,
        converged,
    })
}

/// Inexact proximal point iterations: each step solves the transport
/// problem regularized by `β · KL(T ‖ T_prev)` with a single Sinkhorn sweep.
/// The column scaling is carried across steps.
fn ipot_log(cost: &Matrix, a: &[f64], b: &[f64], cfg: &SolverConfig) -> Result<Reduced> {
    let (n, m) = (cost.rows(), cost.cols());
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut log_t = Matrix::from_fn(n, m, |i, j| log_a[i] + log_b[j]);
    let mut plan = Matrix::from_fn(n, m, |i, j| log_t.get(i, j).exp());
    let mut log_u = vec![0.0; n];
    let mut log_v = vec![0.0; m];
    let mut log_q = Matrix::zeros(n, m);

    let mut iters = 0;
    let mut converged = false;
    while iters < cfg.max_iters {
        iters += 1;
        for i in 0..n {
            for j in 0..m {
                log_q.set(i, j, log_t.get(i, j) - cost.get(i, j) / cfg.beta);
            }
        }
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| log_q.get(i, j) + log_u[i]));
            log_v[j] = log_b[j] - lse;
        }
        for i in 0..n {
            let lse = log_sum_exp(log_q.row(i).iter().zip(&log_v).map(|(q, v)| q + v));
            log_u[i] = log_a[i] - lse;
        }
        ensure_finite(&log_u, "ipot row scaling")?;
        ensure_finite(&log_v, "ipot column scaling")?;
        let mut change: f64 = 0.0;
        for i in 0..n {
            for j in 0..m {
                let lt = log_u[i] + log_q.get(i, j) + log_v[j];
                let t = lt.exp();
                change = change.max((t - plan.get(i, j)).abs());
                log_t.set(i, j, lt);
                plan.set(i, j, t);
            }
        }
        if change <= cfg.tol && column_violation(&plan, b) <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(Reduced {
        plan,
        iters,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(v: &[f64]) -> MassVector {
        MassVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn one_by_one() {
        let cost = CostMatrix::from_rows(&[vec![2.5]]).unwrap();
        for cfg in [SolverConfig::sinkhorn(), SolverConfig::ipot()] {
            let sol = solve_exact(&cost, &mv(&[1.0]), &mv(&[1.0]), &cfg).unwrap();
            assert_eq!(sol.plan.values().get(0, 0), 1.0);
            assert_eq!(sol.plan_cost, 2.5);
            assert!(sol.converged);
        }
    }

    #[test]
    fn perfect_matching_approached_as_epsilon_shrinks() {
        let cost = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let half = mv(&[0.5, 0.5]);
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03, 0.01] {
            let cfg = SolverConfig::sinkhorn().with_epsilon(eps);
            let sol = solve_exact(&cost, &half, &half, &cfg).unwrap();
            assert!(sol.converged);
            assert!(sol.plan_cost <= last + 1e-12);
            last = sol.plan_cost;
        }
        assert!(last < 1e-12);
        let ipot = solve_exact(&cost, &half, &half, &SolverConfig::ipot()).unwrap();
        assert!(ipot.plan_cost < 1e-6);
        assert!((ipot.plan.values().get(0, 0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_mass_tokens_are_reinserted_as_zeros() {
        let cost = CostMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.5, 3.0, 1.0]]).unwrap();
        let sol = solve_exact(&cost, &mv(&[0.0, 1.0]), &mv(&[0.5, 0.0, 0.5]), &SolverConfig::ipot())
            .unwrap();
        let t = sol.plan.values();
        assert_eq!(t.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(t.get(1, 1), 0.0);
        assert!((t.get(1, 0) - 0.5).abs() < 1e-12);
        assert!((sol.plan_cost - 0.75).abs() < 1e-12);
    }

    #[test]
    fn not_converged_is_flagged() {
        let cost = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.3]]).unwrap();
        let cfg = SolverConfig {
            max_iters: 1,
            tol: 1e-15,
            ..SolverConfig::sinkhorn().with_epsilon(1e-3)
        };
        let sol = solve_exact(&cost, &mv(&[0.3, 0.7]), &mv(&[0.6, 0.4]), &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iters_used, 1);
    }

    #[test]
    fn tiny_epsilon_does_not_underflow() {
        let cost = CostMatrix::from_rows(&[vec![50.0, 80.0], vec![90.0, 40.0]]).unwrap();
        let cfg = SolverConfig::sinkhorn().with_epsilon(1e-3);
        let sol = solve_exact(&cost, &mv(&[0.5, 0.5]), &mv(&[0.5, 0.5]), &cfg).unwrap();
        assert!(sol.converged);
        assert!((sol.plan_cost - 45.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_configs() {
        let cost = CostMatrix::from_rows(&[vec![1.0]]).unwrap();
        let one = mv(&[1.0]);
        let bad = [
            SolverConfig::sinkhorn().with_epsilon(0.0),
            SolverConfig { beta: -1.0, ..SolverConfig::ipot() },
            SolverConfig { max_iters: 0, ..SolverConfig::ipot() },
            SolverConfig { tol: 0.0, ..SolverConfig::ipot() },
        ];
        for cfg in bad {
            assert!(solve_exact(&cost, &one, &one, &cfg).is_err());
        }
        let two = mv(&[0.5, 0.5]);
        assert!(matches!(
            solve_exact(&cost, &two, &one, &SolverConfig::ipot()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn sidecar_shape() {
        let cost = CostMatrix::from_rows(&[vec![2.0]]).unwrap();
        let sol = solve_exact(&cost, &mv(&[1.0]), &mv(&[1.0]), &SolverConfig::ipot()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&sol.sidecar_json()).unwrap();
        assert_eq!(json["method"], "ipot");
        assert_eq!(json["plan_cost"], 2.0);
        assert!(json["iters_used"].is_u64());
        assert!(json["violation"].is_f64());
    }
}
