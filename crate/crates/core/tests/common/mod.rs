//! Random instance builders and brute-force oracles. Nothing here calls the
//! library's numerical routines; they exist to check them.

#![allow(dead_code)]

use cmot::{EmbeddingSequence, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

pub fn gaussian_seq(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingSequence {
    EmbeddingSequence::from_rows(&gaussian_rows(rng, n, d)).unwrap()
}

pub fn rows_of(seq: &EmbeddingSequence) -> Vec<Vec<f64>> {
    seq.rows().map(<[f64]>::to_vec).collect()
}

pub fn norm_oracle(row: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in row {
        s += x * x;
    }
    s.sqrt()
}

pub fn mass_oracle(rows: &[Vec<f64>]) -> Vec<f64> {
    let norms: Vec<f64> = rows.iter().map(|r| norm_oracle(r)).collect();
    let total: f64 = norms.iter().sum();
    norms.iter().map(|n| n / total).collect()
}

pub fn distance_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d;
    }
    s.sqrt()
}

pub fn cost_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; b.len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b.len() {
            c[i][j] = distance_oracle(&a[i], &b[j]);
        }
    }
    c
}

/// Admissible 1-based column range of 1-based row `i` from the real-valued
/// window formula, evaluated by enumeration over candidate columns.
pub fn window_oracle(i: usize, n: usize, n_hat: usize, w: usize) -> (usize, usize) {
    let center = n_hat as f64 * i as f64 / n as f64;
    let admissible: Vec<usize> = (1..=n_hat)
        .filter(|&j| {
            let j = j as f64;
            // Tolerate rounding in the real-valued center.
            j >= center - w as f64 - 1e-9 && j <= center + w as f64 + 1e-9
        })
        .collect();
    (*admissible.first().unwrap(), *admissible.last().unwrap())
}

/// `Σ_i m_i min_{admissible j} c_ij`, in row order.
pub fn relaxed_oracle(cost: &[Vec<f64>], masses: &[f64], window: Option<usize>) -> f64 {
    let n = cost.len();
    let m = cost[0].len();
    let mut total = 0.0;
    for i in 0..n {
        let (lo, hi) = match window {
            Some(w) => window_oracle(i + 1, n, m, w),
            None => (1, m),
        };
        let mut best = f64::INFINITY;
        for j in lo..=hi {
            if cost[i][j - 1] < best {
                best = cost[i][j - 1];
            }
        }
        total += masses[i] * best;
    }
    total
}

/// Optimal cost of a 2x2 transport problem. With `T_11 = t` every other
/// entry is fixed by the marginals, the cost is linear in `t`, and the
/// optimum sits at one end of the feasible interval.
pub fn lp_2x2_oracle(c: [[f64; 2]; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let lo = (b[0] - a[1]).max(0.0);
    let hi = a[0].min(b[0]);
    let f = |t: f64| {
        t * c[0][0] + (a[0] - t) * c[0][1] + (b[0] - t) * c[1][0] + (a[1] - b[0] + t) * c[1][1]
    };
    f(lo).min(f(hi))
}

/// Central differences of `f` around `x`, one coordinate at a time.
pub fn central_diff(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + step;
            let up = f(&probe);
            probe[k] = orig - step;
            let down = f(&probe);
            probe[k] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a − n| / max(|a| + |n|, 1e-8)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| rel_error(*a, *n))
        .fold(0.0, f64::max)
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Relaxed distance of `a` against `b` with the alignment frozen at
/// `targets`, masses from norms. Written out longhand as a value oracle for
/// finite differencing.
pub fn frozen_distance(a_flat: &[f64], b_flat: &[f64], d: usize, targets: &[usize]) -> f64 {
    let n = a_flat.len() / d;
    let norms: Vec<f64> = (0..n).map(|i| norm_oracle(&a_flat[i * d..(i + 1) * d])).collect();
    let total: f64 = norms.iter().sum();
    let mut dist = 0.0;
    for i in 0..n {
        let j = targets[i];
        dist += norms[i] / total
            * distance_oracle(&a_flat[i * d..(i + 1) * d], &b_flat[j * d..(j + 1) * d]);
    }
    dist
}

/// Random point in the interior of the probability simplex with every
/// entry at least `min`.
pub fn interior_distribution(rng: &mut ChaCha8Rng, v: usize, min: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..v).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    assert!(p.iter().all(|&x| x >= min));
    p
}

/// `½ (KL(p‖q) + KL(q‖p))` for one row, after floor-and-renormalize at 1e-12.
pub fn sym_kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let fl = |r: &[f64]| {
        let c: Vec<f64> = r.iter().map(|x| if *x < 1e-12 { 1e-12 } else { *x }).collect();
        let s: f64 = c.iter().sum();
        c.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let (p, q) = (fl(p), fl(q));
    let mut pq = 0.0;
    let mut qp = 0.0;
    for k in 0..p.len() {
        pq += p[k] * (p[k].ln() - q[k].ln());
        qp += q[k] * (q[k].ln() - p[k].ln());
    }
    0.5 * (pq + qp)
}
