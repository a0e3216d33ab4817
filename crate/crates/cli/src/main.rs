//! `cmot` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 numerical error (including non-convergence under `--strict`).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmot::relaxed_ot::DEFAULT_WINDOW;
use cmot::{
    a_score, cost_matrix, extract_alignment, generate, masses_from_norms, mixup, modality_gap,
    run_bench, solve_exact, solve_relaxed, Alignment, BenchMethod, EmbeddingSequence,
    MixupConfig, OtMethod, SolverConfig, SynthConfig, WindowConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cmot", version, about = "Relaxed-OT cross-modal alignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align a speech sequence to a text sequence and write the alignment TSV
    Align(AlignArgs),
    /// Print the relaxed or exact transport distance between two sequences
    Distance(DistanceArgs),
    /// Build a token-level mixup sequence from an alignment
    Mixup(MixupArgs),
    /// Alignment accuracy of a predicted alignment against a reference
    Ascore(AscoreArgs),
    /// Sentence- and word-level modality gap
    Gap(GapArgs),
    /// Generate a synthetic instance with a ground-truth alignment
    Synth(SynthArgs),
    /// Benchmark alignment methods on synthetic instances
    Bench(BenchArgs),
    /// Export the pairwise cost matrix as CSV
    Heatmap(HeatmapArgs),
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    speech: PathBuf,
    #[arg(long)]
    text: PathBuf,
}

#[derive(Args)]
struct WindowArgs {
    /// Half-width of the diagonal window
    #[arg(long, default_value_t = DEFAULT_WINDOW, conflicts_with = "no_window")]
    window: usize,
    /// Let every row use any column
    #[arg(long)]
    no_window: bool,
}

impl WindowArgs {
    fn config(&self) -> Result<WindowConfig, CliError> {
        if self.no_window {
            Ok(WindowConfig::disabled())
        } else {
            WindowConfig::new(self.window).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    window: WindowArgs,
    /// Also write the cost matrix CSV here
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceMethod {
    Relaxed,
    Sinkhorn,
    Ipot,
}

#[derive(Args)]
struct DistanceArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum, default_value_t = DistanceMethod::Relaxed)]
    method: DistanceMethod,
    #[command(flatten)]
    window: WindowArgs,
    /// Sinkhorn regularization (default: 0.01 x mean cost)
    #[arg(long)]
    epsilon: Option<f64>,
    /// IPOT proximal weight
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Write the transport plan CSV here, with a JSON summary at <path>.json
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Exit with status 3 if the solver does not converge
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MixupArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    align: PathBuf,
    /// Probability of taking the aligned text token
    #[arg(long, default_value_t = cmot::mixup::DEFAULT_MIXUP_PROB)]
    prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AscoreArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GapArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    align: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthParams {
    #[arg(long, default_value_t = 20)]
    n_text: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    dur_max: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SynthParams {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            n_text: self.n_text,
            dim: self.dim,
            dur_max: self.dur_max,
            noise_sigma: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    params: SynthParams,
    /// Directory receiving text.tsv, speech.tsv and truth.tsv
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    params: SynthParams,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Window half-width used by relaxed_window
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Comma-separated subset of relaxed, relaxed_window, ipot, sinkhorn
    #[arg(long, default_value = "relaxed,relaxed_window,ipot")]
    methods: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<cmot::Error> for CliError {
    fn from(e: cmot::Error) -> Self {
        match e {
            cmot::Error::NumericalUnderflow(_) | cmot::Error::DegenerateGradient(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn read_seq(path: &Path) -> Result<EmbeddingSequence, CliError> {
    EmbeddingSequence::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_alignment(path: &Path) -> Result<Alignment, CliError> {
    Alignment::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Writes to `out` if given, otherwise to stdout.
fn emit(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, body),
        None => io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

fn align(args: &AlignArgs) -> Result<(), CliError> {
    let speech = read_seq(&args.pair.speech)?;
    let text = read_seq(&args.pair.text)?;
    let window = args.window.config()?;
    let cost = cost_matrix(&speech, &text)?;
    if let Some(path) = &args.heatmap {
        write_file(path, &cost.to_csv())?;
    }
    let masses = masses_from_norms(&speech)?;
    let (plan, _) = solve_relaxed(&cost, &masses, window)?;
    emit(args.out.as_deref(), &extract_alignment(&plan).to_tsv())
}

fn plan_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn distance(args: &DistanceArgs) -> Result<(), CliError> {
    let speech = read_seq(&args.pair.speech)?;
    let text = read_seq(&args.pair.text)?;
    let cost = cost_matrix(&speech, &text)?;
    let speech_mass = masses_from_norms(&speech)?;
    let method = match args.method {
        DistanceMethod::Relaxed => None,
        DistanceMethod::Sinkhorn => Some(OtMethod::Sinkhorn),
        DistanceMethod::Ipot => Some(OtMethod::Ipot),
    };
    let Some(method) = method else {
        let (plan, distance) = solve_relaxed(&cost, &speech_mass, args.window.config()?)?;
        if let Some(path) = &args.plan {
            write_file(path, &plan.values().to_csv())?;
            let summary = json!({
                "method": "relaxed",
                "iters_used": 0,
                "violation": plan.marginal_violation(),
                "plan_cost": distance,
            });
            write_file(&plan_sidecar(path), &format!("{summary}\n"))?;
        }
        let line = json!({ "method": "relaxed", "distance": distance });
        return emit(args.out.as_deref(), &format!("{line}\n"));
    };

    let cfg = SolverConfig {
        method,
        epsilon: args.epsilon,
        beta: args.beta,
        max_iters: args.max_iters,
        tol: args.tol,
    };
    let text_mass = masses_from_norms(&text)?;
    let sol = solve_exact(&cost, &speech_mass, &text_mass, &cfg).map_err(|e| match e {
        cmot::Error::InvalidValue(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    if let Some(path) = &args.plan {
        write_file(path, &sol.plan.values().to_csv())?;
        write_file(&plan_sidecar(path), &format!("{}\n", sol.sidecar_json()))?;
    }
    let line = json!({
        "method": method.name(),
        "distance": sol.plan_cost,
        "iters_used": sol.iters_used,
        "violation": sol.violation,
        "converged": sol.converged,
    });
    emit(args.out.as_deref(), &format!("{line}\n"))?;
    if !sol.converged {
        let msg = format!(
            "{} did not converge in {} iterations (violation {:e} > tol {:e})",
            method.name(),
            sol.iters_used,
            sol.violation,
            cfg.tol
        );
        if args.strict {
            return Err(CliError::Numerical(msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(())
}

fn run_mixup(args: &MixupArgs) -> Result<(), CliError> {
    let cfg = MixupConfig::new(args.prob, args.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let speech = read_seq(&args.pair.speech)?;
    let text = read_seq(&args.pair.text)?;
    let align = read_alignment(&args.align)?;
    let out = mixup(&speech, &text, &align, &cfg)?;
    emit(args.out.as_deref(), &out.to_tsv())
}

fn ascore(args: &AscoreArgs) -> Result<(), CliError> {
    let pred = read_alignment(&args.pred)?;
    let reference = read_alignment(&args.reference)?;
    let score = a_score(&pred, &reference)?;
    emit(args.out.as_deref(), &format!("{}\n", json!({ "a_score": score })))
}

fn gap(args: &GapArgs) -> Result<(), CliError> {
    let speech = read_seq(&args.pair.speech)?;
    let text = read_seq(&args.pair.text)?;
    let align = read_alignment(&args.align)?;
    let report = modality_gap(&speech, &text, &align)?;
    emit(args.out.as_deref(), &format!("{}\n", report.to_json()))
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let inst = generate(&args.params.config()).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out_dir.display())))?;
    write_file(&args.out_dir.join("text.tsv"), &inst.text.to_tsv())?;
    write_file(&args.out_dir.join("speech.tsv"), &inst.speech.to_tsv())?;
    write_file(&args.out_dir.join("truth.tsv"), &inst.truth.to_tsv())
}

fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let methods = args
        .methods
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(|m| BenchMethod::parse(m, args.window))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if methods.is_empty() || args.trials == 0 {
        return Err(CliError::Usage("need at least one method and one trial".into()));
    }
    let report = run_bench(&args.params.config(), args.trials, &methods).map_err(|e| match e {
        cmot::Error::InvalidValue(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    for row in report.rows.iter().filter(|r| r.unconverged > 0) {
        eprintln!(
            "warning: {} did not converge on {} of {} trials",
            row.method.name(),
            row.unconverged,
            row.trials
        );
    }
    emit(args.out.as_deref(), &report.to_csv())
}

fn heatmap(args: &HeatmapArgs) -> Result<(), CliError> {
    let speech = read_seq(&args.pair.speech)?;
    let text = read_seq(&args.pair.text)?;
    emit(args.out.as_deref(), &cost_matrix(&speech, &text)?.to_csv())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Align(a) => align(a),
        Command::Distance(a) => distance(a),
        Command::Mixup(a) => run_mixup(a),
        Command::Ascore(a) => ascore(a),
        Command::Gap(a) => gap(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
        Command::Heatmap(a) => heatmap(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
