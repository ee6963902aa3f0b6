//! End-to-end command-line behavior: exit codes, file outputs, round trips.

use std::process::Command;

fn alq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alq"))
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = alq().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage") || text.contains("usage"), "{text}");
}

#[test]
fn unknown_subcommand_exits_1() {
    let out = alq().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_preset_exits_1() {
    let out = alq().args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_value_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "preset = \"sec4_1\"\n[overrides]\nrho = -1.0\n").unwrap();
    let out = alq()
        .args(["run", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("rho"), "{text}");
}

#[test]
fn short_preset_run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = alq()
        .args(["run", "--preset", "sec4_1", "--duration", "0.2", "--decimate", "10"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,x0,x1,x2,u0,"), "{header}");
    // 0.2 s at dt=1e-4 is 2000 ticks; every 10th kept
    assert_eq!(lines.count(), 200);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("final_theta_err = "));
    assert!(summary.contains("overflow = false"));
}

#[test]
fn trace_csv_round_trips_through_the_parser() {
    let dir = tempfile::tempdir().unwrap();
    let out = alq()
        .args(["run", "--preset", "sec4_1", "--duration", "0.05", "--decimate", "1"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let parsed = alq_cli::output::parse_trace_csv(&text).unwrap();
    assert_eq!(parsed.t.len(), 500);
    // re-emit and compare byte for byte
    let mut buf = Vec::new();
    alq_cli::output::write_trace_csv(&parsed, &mut buf, 1).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), text);
}

#[test]
fn table1_command_emits_20_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = alq().arg("table1").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn spectra_command_reports_three_sets() {
    let dir = tempfile::tempdir().unwrap();
    let out = alq().arg("spectra").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("spectra.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("plant")).count(), 3);
}

#[test]
fn riccati_check_runs_for_both_presets() {
    for preset in ["sec4_1", "sec4_2"] {
        let out = alq().args(["riccati-check", "--preset", preset]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("relative difference"));
    }
}

#[test]
fn ideal_sweep_marks_singular_horizons() {
    let dir = tempfile::tempdir().unwrap();
    let out = alq()
        .args(["ideal-sweep", "--preset", "sec4_2", "--tau-inf", "1,5", "--duration-ignored"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    // unknown flag: exit 1
    assert_eq!(out.status.code(), Some(1));

    let out = alq()
        .args(["ideal-sweep", "--preset", "sec4_2", "--tau-inf", "1,5"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("ideal_sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with("false"));
    assert!(lines[2].ends_with(",true"));
}
