//! Synthetic speech/text pairs with known alignments, and a benchmark that
//! scores alignment methods against them.
//!
//! Text tokens are i.i.d. standard Gaussian vectors scaled to unit norm.
//! Each text token is repeated for a duration drawn uniformly from
//! `1..=dur_max` and every repeat gets independent Gaussian noise, giving
//! the speech sequence and a monotone ground-truth alignment.
//!
//! Trial `t` of a benchmark draws from ChaCha stream `t` of the configured
//! seed; [`generate`] is trial 0.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cost::cost_matrix;
use crate::error::{Error, Result};
use crate::exact_ot::{solve_exact, SolverConfig};
use crate::metrics::a_score;
use crate::relaxed_ot::{extract_alignment, solve_relaxed, Alignment, WindowConfig};
use crate::rng;
use crate::sequences::{masses_from_norms, EmbeddingSequence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_text: usize,
    pub dim: usize,
    pub dur_max: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_text: 20,
            dim: 16,
            dur_max: 4,
            noise_sigma: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_text == 0 || self.dim == 0 || self.dur_max == 0 {
            return Err(Error::InvalidValue(
                "n_text, dim and dur_max must all be at least 1".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "noise_sigma must be finite and nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub text: EmbeddingSequence,
    pub speech: EmbeddingSequence,
    pub truth: Alignment,
    /// Number of speech frames generated from each text token.
    pub durations: Vec<usize>,
}

fn gaussian_row(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_row(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let row = gaussian_row(rng, dim);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return row.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn all_distinct(rows: &[Vec<f64>]) -> bool {
    rows.iter()
        .enumerate()
        .all(|(i, a)| rows[i + 1..].iter().all(|b| a != b))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthInstance> {
    generate_trial(cfg, 0)
}

/// Instance for benchmark trial `trial`.
pub fn generate_trial(cfg: &SynthConfig, trial: u64) -> Result<SynthInstance> {
    cfg.validate()?;
    let mut rng = rng::seeded_stream(cfg.seed, trial);
    let text_rows = loop {
        let rows: Vec<Vec<f64>> = (0..cfg.n_text).map(|_| unit_row(&mut rng, cfg.dim)).collect();
        if all_distinct(&rows) {
            break rows;
        }
    };
    let durations: Vec<usize> = (0..cfg.n_text)
        .map(|_| rng.random_range(1..=cfg.dur_max))
        .collect();

    let mut speech = Vec::new();
    let mut truth = Vec::new();
    for (t, (row, &dur)) in text_rows.iter().zip(&durations).enumerate() {
        for _ in 0..dur {
            let frame = if cfg.noise_sigma > 0.0 {
                let noise = gaussian_row(&mut rng, cfg.dim);
                row.iter().zip(noise).map(|(x, z)| x + cfg.noise_sigma * z).collect()
            } else {
                row.clone()
            };
            speech.push(frame);
            truth.push(t);
        }
    }
    Ok(SynthInstance {
        text: EmbeddingSequence::from_rows(&text_rows)?,
        speech: EmbeddingSequence::from_rows(&speech)?,
        truth: Alignment::new(truth),
        durations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    Relaxed,
    RelaxedWindow(usize),
    Ipot,
    Sinkhorn,
}

impl BenchMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BenchMethod::Relaxed => "relaxed",
            BenchMethod::RelaxedWindow(_) => "relaxed_window",
            BenchMethod::Ipot => "ipot",
            BenchMethod::Sinkhorn => "sinkhorn",
        }
    }

    /// Parses a method name; `relaxed_window` takes its width from `window`.
    pub fn parse(name: &str, window: usize) -> Result<Self> {
        match name.trim() {
            "relaxed" => Ok(BenchMethod::Relaxed),
            "relaxed_window" => {
                WindowConfig::new(window)?;
                Ok(BenchMethod::RelaxedWindow(window))
            }
            "ipot" => Ok(BenchMethod::Ipot),
            "sinkhorn" => Ok(BenchMethod::Sinkhorn),
            other => Err(Error::InvalidValue(format!("unknown method {other:?}"))),
        }
    }

    /// Computes the alignment and distance this method assigns to `inst`.
    pub fn align(&self, inst: &SynthInstance) -> Result<MethodOutput> {
        let cost = cost_matrix(&inst.speech, &inst.text)?;
        let speech_mass = masses_from_norms(&inst.speech)?;
        let relaxed = |window| -> Result<MethodOutput> {
            let (plan, distance) = solve_relaxed(&cost, &speech_mass, window)?;
            Ok(MethodOutput {
                alignment: extract_alignment(&plan),
                distance,
                converged: true,
            })
        };
        match *self {
            BenchMethod::Relaxed => relaxed(WindowConfig::disabled()),
            BenchMethod::RelaxedWindow(w) => relaxed(WindowConfig::new(w)?),
            BenchMethod::Ipot | BenchMethod::Sinkhorn => {
                let text_mass = masses_from_norms(&inst.text)?;
                let cfg = if *self == BenchMethod::Ipot {
                    SolverConfig::ipot()
                } else {
                    SolverConfig::sinkhorn()
                };
                let sol = solve_exact(&cost, &speech_mass, &text_mass, &cfg)?;
                Ok(MethodOutput {
                    alignment: extract_alignment(&sol.plan),
                    distance: sol.plan_cost,
                    converged: sol.converged,
                })
            }
        }
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, crate::relaxed_ot::DEFAULT_WINDOW)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub alignment: Alignment,
    /// Relaxed distance for relaxed methods, plan cost for exact ones.
    pub distance: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: BenchMethod,
    pub trial: usize,
    pub a_score: f64,
    pub distance: f64,
    pub wall_ms: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub trials: usize,
    pub mean_ascore: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std_ascore: f64,
    pub mean_distance: f64,
    pub mean_wall_ms: f64,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub records: Vec<TrialRecord>,
}

pub const BENCH_CSV_HEADER: &str = "method,trials,mean_ascore,std_ascore,mean_distance,mean_wall_ms";

impl BenchReport {
    pub fn row(&self, method: BenchMethod) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Per-trial records of `method`, in trial order.
    pub fn trials_of(&self, method: BenchMethod) -> Vec<&TrialRecord> {
        self.records.iter().filter(|r| r.method == method).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{BENCH_CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.method.name(),
                r.trials,
                r.mean_ascore,
                r.std_ascore,
                r.mean_distance,
                r.mean_wall_ms
            )
            .unwrap();
        }
        out
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Runs every method on `trials` generated instances. All methods see the
/// same instances. Trials run sequentially so wall times are not skewed by
/// contention.
pub fn run_bench(cfg: &SynthConfig, trials: usize, methods: &[BenchMethod]) -> Result<BenchReport> {
    if trials == 0 {
        return Err(Error::InvalidValue("trials must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidValue("no methods requested".into()));
    }
    let mut records = Vec::with_capacity(trials * methods.len());
    for t in 0..trials {
        let inst = generate_trial(cfg, t as u64)?;
        for &method in methods {
            let start = Instant::now();
            let out = method.align(&inst)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            records.push(TrialRecord {
                method,
                trial: t,
                a_score: a_score(&out.alignment, &inst.truth)?,
                distance: out.distance,
                wall_ms,
                converged: out.converged,
            });
        }
    }
    let rows = methods
        .iter()
        .map(|&method| {
            let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method).collect();
            let scores: Vec<f64> = mine.iter().map(|r| r.a_score).collect();
            let dists: Vec<f64> = mine.iter().map(|r| r.distance).collect();
            let times: Vec<f64> = mine.iter().map(|r| r.wall_ms).collect();
            BenchRow {
                method,
                trials,
                mean_ascore: mean(&scores),
                std_ascore: sample_std(&scores),
                mean_distance: mean(&dists),
                mean_wall_ms: mean(&times),
                unconverged: mine.iter().filter(|r| !r.converged).count(),
            }
        })
        .collect();
    Ok(BenchReport { rows, records })
}
