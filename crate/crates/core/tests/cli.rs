//! End-to-end checks of the command-line surface: output files, config
//! handling, determinism across reruns, and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sgld")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sgld-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(args: &[&str]) -> String {
    let out = Command::new(bin()).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn rate_sweep_writes_the_output_set() {
    let dir = tmp_dir("outputs");
    let out = dir.join("rs");
    run_ok(&["rate-sweep", "--out", out.to_str().unwrap()]);
    for f in ["results.csv", "report.txt", "meta.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("experiment,parameter,metric,value,stderr\n"));
    assert!(csv.contains("kl_sup"));
    let meta = std::fs::read_to_string(out.join("meta.txt")).unwrap();
    assert!(meta.contains("seed = 12345"));
    assert!(meta.contains("generator = chacha12-stream/ziggurat-normal"));
    assert!(meta.contains("threads = 1"));
}

#[test]
fn emit_plot_data_writes_two_column_files() {
    let dir = tmp_dir("plots");
    let out = dir.join("rs");
    run_ok(&[
        "rate-sweep",
        "--out",
        out.to_str().unwrap(),
        "--emit-plot-data",
    ]);
    let plots = out.join("plots");
    assert!(plots.join("kl_sup_vs_eta.dat").exists());
    let text = std::fs::read_to_string(plots.join("kl_sup_vs_eta.dat")).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first.split_whitespace().count(), 2);
}

#[test]
fn fixed_seed_reruns_are_byte_identical() {
    let dir = tmp_dir("determinism");
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "contraction",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "777",
        ]);
    }
    let read = |p: &Path| std::fs::read(p.join("results.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(
        std::fs::read(a.join("report.txt")).unwrap(),
        std::fs::read(b.join("report.txt")).unwrap()
    );
}

#[test]
fn seed_flag_changes_monte_carlo_rows() {
    let dir = tmp_dir("seeded");
    let (a, b) = (dir.join("a"), dir.join("b"));
    run_ok(&["contraction", "--out", a.to_str().unwrap(), "--seed", "1"]);
    run_ok(&["contraction", "--out", b.to_str().unwrap(), "--seed", "2"]);
    assert_ne!(
        std::fs::read(a.join("results.csv")).unwrap(),
        std::fs::read(b.join("results.csv")).unwrap()
    );
}

#[test]
fn config_file_drives_the_run() {
    let dir = tmp_dir("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "[sampler]\nseed = 4242\n\n[experiment]\nkind = rate-sweep\neta_grid = 0.1, 0.05, 0.025\nhorizon_t = 20\n",
    )
    .unwrap();
    let out = dir.join("rs");
    run_ok(&[
        "rate-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let meta = std::fs::read_to_string(out.join("meta.txt")).unwrap();
    assert!(meta.contains("seed = 4242"));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    // three swept steps plus the slope-support rows, no 0.0125 entry
    assert!(!csv.contains(",1.2500000000000000e-2,"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "[sampler]\nbeta = 0.5\n").unwrap();
    let out = Command::new(bin())
        .args(["verify", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key"), "stderr: {err}");
}

#[test]
fn shipped_configs_parse_and_run_their_kind() {
    use sgld::config::{ExperimentConfig, ExperimentKind};
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tmp_dir("shipped");
    // every shipped config parses and validates against its own subcommand
    for (file, kind) in [
        ("rate-sweep.cfg", ExperimentKind::RateSweep),
        ("schedule-decay.cfg", ExperimentKind::ScheduleDecay),
        ("sgld-sweep.cfg", ExperimentKind::SgldSweep),
        ("stationary-bias.cfg", ExperimentKind::StationaryBias),
        ("contraction.cfg", ExperimentKind::Contraction),
        ("verify.cfg", ExperimentKind::Verify),
    ] {
        let cfg = ExperimentConfig::from_file(&root.join(file), kind)
            .unwrap_or_else(|e| panic!("{file}: {e}"));
        cfg.potential
            .build()
            .unwrap_or_else(|e| panic!("{file}: {e}"));
    }
    // and run the cheapest one end to end from its file
    let out = dir.join("rs");
    run_ok(&[
        "rate-sweep",
        "--config",
        root.join("rate-sweep.cfg").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(out.join("results.csv").exists());
}

#[test]
fn mismatched_config_kind_is_rejected() {
    let dir = tmp_dir("kindcfg");
    let cfg = dir.join("kind.cfg");
    std::fs::write(&cfg, "[experiment]\nkind = verify\n").unwrap();
    let out = Command::new(bin())
        .args(["rate-sweep", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
