use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "channel_widths = [3.0, 3.0]\ninstances = 1\nraster = \"pgm\"\n";

fn vskimg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vskimg")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn chain_without_trigger_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = vskimg(&["chain", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trigger"), "{}", stderr(&o));
}

#[test]
fn invalid_config_is_rejected_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tau = 3.0\n");
    let o = vskimg(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tau"), "{}", stderr(&o));
    let o = vskimg(&["simulate", "--tau", "0.0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_then_reconstruct_and_chain_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let sim = dir.path().join("sim");
    let sim_s = sim.to_str().unwrap();
    assert!(vskimg(&["simulate", "--config", &cfg, "--seed", "3", "--out", sim_s])
        .status
        .success());
    for name in [
        "vis_ch01.csv",
        "vis_ch02.csv",
        "truth_ch01.pgm",
        "truth_ch01.scale.txt",
        "manifest.toml",
    ] {
        assert!(sim.join(name).exists(), "{name}");
    }

    let rec = dir.path().join("rec");
    let o = vskimg(&[
        "reconstruct",
        "--config",
        &cfg,
        "--vis",
        sim.join("vis_ch02.csv").to_str().unwrap(),
        "--scaling-image",
        sim.join("truth_ch01.csv").to_str().unwrap(),
        "--out",
        rec.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(rec.join("reconstruct_summary.csv")).unwrap();
    assert!(
        summary.lines().nth(1).unwrap().contains(",tolerance_met,holds,"),
        "{summary}"
    );
    assert!(std::fs::read_to_string(rec.join("trace.csv"))
        .unwrap()
        .starts_with("k,diff_norm,d_residual,neg_norm\n"));

    let chain = dir.path().join("chain");
    let o = vskimg(&[
        "chain",
        "--config",
        &cfg,
        "--vis-dir",
        sim_s,
        "--trigger",
        sim.join("truth_ch01.csv").to_str().unwrap(),
        "--out",
        chain.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(chain.join("chain_report.toml")).unwrap();
    assert!(report.contains("all_checks_hold = true"), "{report}");
    assert!(chain.join("ledger_ch02.csv").exists());
    let manifest = std::fs::read_to_string(chain.join("manifest.toml")).unwrap();
    assert!(manifest.contains("# input truth_ch01.csv"));
}

#[test]
fn flags_override_the_file_and_the_manifest_is_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}tau = 0.5\n"));
    let a = dir.path().join("a");
    let o = vskimg(&[
        "simulate",
        "--config",
        &cfg,
        "--tau",
        "0.3",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let manifest = a.join("manifest.toml");
    assert!(std::fs::read_to_string(&manifest).unwrap().contains("tau = 0.3"));
    let b = dir.path().join("b");
    let o = vskimg(&[
        "simulate",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.join("vis_ch02.csv")).unwrap(),
        std::fs::read(b.join("vis_ch02.csv")).unwrap()
    );
}

#[test]
fn diagnose_writes_bound_and_continuity_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("diag");
    let o = vskimg(&["diagnose", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bounds = std::fs::read_to_string(out.join("bound_report.csv")).unwrap();
    assert_eq!(bounds.lines().count(), 3);
    assert!(bounds.lines().skip(1).all(|l| l.contains(",true,")));
    let cont = std::fs::read_to_string(out.join("continuity_report.csv")).unwrap();
    assert!(cont.lines().skip(1).all(|l| l.ends_with(",true")));
}
