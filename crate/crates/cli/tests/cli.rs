//! The binary is a thin adapter: every output must equal the library's
//! result serialized through the documented formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cmot::*;
use tempfile::TempDir;

fn cmot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cmot(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Fixture {
    dir: TempDir,
    inst: SynthInstance,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let d = dir.path().to_str().unwrap();
        ok(&["synth", "--out-dir", d, "--n-text", "7", "--dim", "5", "--seed", "3"]);
        let cfg = SynthConfig { n_text: 7, dim: 5, dur_max: 4, noise_sigma: 0.5, seed: 3 };
        Fixture { dir, inst: generate(&cfg).unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn synth_writes_library_instance() {
    let f = Fixture::new();
    assert_eq!(read(&f.path("text.tsv")), f.inst.text.to_tsv());
    assert_eq!(read(&f.path("speech.tsv")), f.inst.speech.to_tsv());
    assert_eq!(read(&f.path("truth.tsv")), f.inst.truth.to_tsv());
}

#[test]
fn align_matches_library() {
    let f = Fixture::new();
    let (s, t) = (f.arg("speech.tsv"), f.arg("text.tsv"));
    let heat = f.arg("heat.csv");
    let stdout = ok(&["align", "--speech", &s, "--text", &t, "--window", "2", "--heatmap", &heat]);
    let cost = cost_matrix(&f.inst.speech, &f.inst.text).unwrap();
    let m = masses_from_norms(&f.inst.speech).unwrap();
    let (plan, _) = solve_relaxed(&cost, &m, WindowConfig::new(2).unwrap()).unwrap();
    assert_eq!(stdout, extract_alignment(&plan).to_tsv());
    assert_eq!(read(&f.path("heat.csv")), cost.to_csv());

    // Default window is 10.
    let stdout = ok(&["align", "--speech", &s, "--text", &t]);
    let (plan, _) = solve_relaxed(&cost, &m, WindowConfig::new(10).unwrap()).unwrap();
    assert_eq!(stdout, extract_alignment(&plan).to_tsv());
}

#[test]
fn align_identical_files_gives_identity() {
    let f = Fixture::new();
    let t = f.arg("text.tsv");
    let stdout = ok(&["align", "--speech", &t, "--text", &t, "--no-window"]);
    assert_eq!(stdout, Alignment::identity(7).to_tsv());
}

#[test]
fn distance_matches_library() {
    let f = Fixture::new();
    let (s, t) = (f.arg("speech.tsv"), f.arg("text.tsv"));
    let cost = cost_matrix(&f.inst.speech, &f.inst.text).unwrap();
    let ms = masses_from_norms(&f.inst.speech).unwrap();
    let mt = masses_from_norms(&f.inst.text).unwrap();

    let line = ok(&["distance", "--speech", &s, "--text", &t, "--no-window"]);
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    let (_, d) = solve_relaxed(&cost, &ms, WindowConfig::disabled()).unwrap();
    assert_eq!(v["method"], "relaxed");
    assert_eq!(v["distance"].as_f64().unwrap(), d);

    let plan = f.arg("plan.csv");
    let line = ok(&["distance", "--speech", &s, "--text", &t, "--method", "ipot", "--plan", &plan]);
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    let sol = solve_exact(&cost, &ms, &mt, &SolverConfig::ipot()).unwrap();
    assert_eq!(v["distance"].as_f64().unwrap(), sol.plan_cost);
    assert_eq!(v["iters_used"].as_u64().unwrap() as usize, sol.iters_used);
    assert_eq!(read(&f.path("plan.csv")), sol.plan.values().to_csv());
    assert_eq!(read(&f.path("plan.csv.json")), format!("{}\n", sol.sidecar_json()));

    let line = ok(&[
        "distance", "--speech", &s, "--text", &t, "--method", "sinkhorn", "--epsilon", "0.05",
    ]);
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    let sol = solve_exact(&cost, &ms, &mt, &SolverConfig::sinkhorn().with_epsilon(0.05)).unwrap();
    assert_eq!(v["distance"].as_f64().unwrap(), sol.plan_cost);
}

#[test]
fn strict_non_convergence_exits_3() {
    let f = Fixture::new();
    let (s, t) = (f.arg("speech.tsv"), f.arg("text.tsv"));
    let args = ["distance", "--speech", &s, "--text", &t, "--method", "sinkhorn", "--max-iters", "1"];
    let lax = cmot(&args);
    assert_eq!(lax.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lax.stderr).contains("did not converge"));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(cmot(&strict).status.code(), Some(3));
}

#[test]
fn mixup_matches_library_and_prob_zero_copies_speech() {
    let f = Fixture::new();
    let (s, t, a) = (f.arg("speech.tsv"), f.arg("text.tsv"), f.arg("truth.tsv"));
    let stdout = ok(&["mixup", "--speech", &s, "--text", &t, "--align", &a, "--seed", "9"]);
    let cfg = MixupConfig::new(0.2, 9).unwrap();
    let want = mixup(&f.inst.speech, &f.inst.text, &f.inst.truth, &cfg).unwrap();
    assert_eq!(stdout, want.to_tsv());

    let zero = ok(&["mixup", "--speech", &s, "--text", &t, "--align", &a, "--prob", "0"]);
    let speech = read(&f.path("speech.tsv"));
    let stripped: String = zero
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l}\n")
            } else {
                let (body, tag) = l.rsplit_once('\t').unwrap();
                assert_eq!(tag, "S");
                format!("{body}\n")
            }
        })
        .collect();
    assert_eq!(stripped, speech);
}

#[test]
fn metrics_match_library() {
    let f = Fixture::new();
    let (s, t, truth) = (f.arg("speech.tsv"), f.arg("text.tsv"), f.arg("truth.tsv"));
    let pred = f.arg("pred.tsv");
    ok(&["align", "--speech", &s, "--text", &t, "--no-window", "--out", &pred]);
    let pred_a = Alignment::read(&pred).unwrap();

    let v: serde_json::Value =
        serde_json::from_str(&ok(&["ascore", "--pred", &pred, "--ref", &truth])).unwrap();
    assert_eq!(v["a_score"].as_f64().unwrap(), a_score(&pred_a, &f.inst.truth).unwrap());

    let line = ok(&["gap", "--speech", &s, "--text", &t, "--align", &pred]);
    let want = modality_gap(&f.inst.speech, &f.inst.text, &pred_a).unwrap();
    assert_eq!(line, format!("{}\n", want.to_json()));
}

#[test]
fn heatmap_matches_library() {
    let f = Fixture::new();
    let (s, t) = (f.arg("speech.tsv"), f.arg("text.tsv"));
    let csv = ok(&["heatmap", "--speech", &s, "--text", &t]);
    assert_eq!(csv, cost_matrix(&f.inst.speech, &f.inst.text).unwrap().to_csv());
}

#[test]
fn bench_matches_library_apart_from_timing() {
    let csv = ok(&["bench", "--trials", "4", "--n-text", "6", "--dim", "4", "--window", "2",
        "--methods", "relaxed,relaxed_window,sinkhorn", "--seed", "2"]);
    let cfg = SynthConfig { n_text: 6, dim: 4, dur_max: 4, noise_sigma: 0.5, seed: 2 };
    let methods = [BenchMethod::Relaxed, BenchMethod::RelaxedWindow(2), BenchMethod::Sinkhorn];
    let want = run_bench(&cfg, 4, &methods).unwrap().to_csv();
    let strip = |s: &str| -> Vec<String> {
        s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    assert_eq!(strip(&csv), strip(&want));
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    let t = f.arg("text.tsv");
    assert_eq!(cmot(&["align", "--text", &t]).status.code(), Some(1));
    assert_eq!(cmot(&["align", "--speech", &t, "--text", &t, "--frobnicate"]).status.code(), Some(1));
    assert_eq!(cmot(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cmot(&["--help"]).status.code(), Some(0));
    assert_eq!(
        cmot(&["align", "--speech", &t, "--text", &t, "--window", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(
        cmot(&["bench", "--trials", "1", "--methods", "dtw"]).status.code(),
        Some(1)
    );

    let bad = f.path("bad.tsv");
    fs::write(&bad, "n 2 d 5\n1\t2\t3\t4\t5\n").unwrap();
    let bad = bad.to_str().unwrap();
    let out = cmot(&["heatmap", "--speech", bad, "--text", &t]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
    let missing = f.arg("nope.tsv");
    assert_eq!(cmot(&["heatmap", "--speech", &missing, "--text", &t]).status.code(), Some(2));

    let other_dim = f.path("d3.tsv");
    fs::write(&other_dim, "n 1 d 3\n1\t2\t3\n").unwrap();
    let code = cmot(&["align", "--speech", other_dim.to_str().unwrap(), "--text", &t]).status.code();
    assert_eq!(code, Some(2));

    let prob = cmot(&["mixup", "--speech", &t, "--text", &t, "--align", &f.arg("truth.tsv"),
        "--prob", "1.5"]);
    assert_eq!(prob.status.code(), Some(1));
}
