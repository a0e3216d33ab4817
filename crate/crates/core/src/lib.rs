//! Cross-modal sequence alignment via relaxed optimal transport.
//!
//! A speech-side embedding sequence is aligned to a text-side sequence by
//! sending each speech token's mass (its normalized L2 norm) to the cheapest
//! text token under Euclidean cost, optionally restricted to a band around
//! the scaled diagonal. The resulting alignment drives a token-level hard-swap
//! mixup. Entropic Sinkhorn and IPOT solvers for the fully constrained
//! problem are included as reference oracles, along with alignment and
//! modality-gap metrics, the training-loss arithmetic, and a synthetic
//! benchmark with known ground-truth alignments.
//!
//! Indices are 0-based in the Rust API and 1-based in every file format.

pub mod cost;
pub mod error;
pub mod exact_ot;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod mixup;
pub mod relaxed_ot;
pub mod rng;
pub mod sequences;
pub mod synthbench;

pub use cost::{cost_matrix, CostMatrix};
pub use error::{Error, Result};
pub use exact_ot::{solve_exact, ExactSolution, OtMethod, SolverConfig};
pub use losses::{
    cross_entropy, symmetric_kl, symmetric_kl_grad, total_objective, LossComponents, ObjectiveWeights,
    TokenDistributionSequence,
};
pub use matrix::Matrix;
pub use metrics::{a_score, modality_gap, GapReport};
pub use mixup::{mixup, mixup_batch, MixupConfig, MixupSequence, Origin};
pub use relaxed_ot::{
    extract_alignment, relaxed_grad, solve_relaxed, window_bounds, Alignment, RelaxedGradient,
    TransportPlan, WindowConfig,
};
pub use sequences::{masses_from_norms, EmbeddingSequence, MassVector};
pub use synthbench::{generate, run_bench, BenchMethod, BenchReport, SynthConfig, SynthInstance};
