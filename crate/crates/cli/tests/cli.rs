use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tailsitter"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SHORT_DASH: &str = r#"
id = "dash"
seed = 5

[trajectory]
kind = "hover_to_hover"
displacement = [3.0, 0.0, 0.0]
yaw_change = 0.0
duration = 2.0
hold_before = 0.5
hold_after = 0.5
"#;

#[test]
fn run_writes_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "dash.toml", SHORT_DASH);
    let out = dir.path().join("out");
    ok(&bin()
        .arg("run")
        .arg(&s)
        .arg("-o")
        .arg(&out)
        .args(["--decimate", "10"])
        .output()
        .unwrap());

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("dash.proposed.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "completed");
    assert_eq!(json["seed"], 5);
    let csv = std::fs::read_to_string(out.join("dash.proposed.csv")).unwrap();
    // 3 s at 2 kHz, every tenth step, plus the header
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert!((590..=610).contains(&rows), "{rows} rows");
}

#[test]
fn overrides_change_output_names_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "dash.toml", SHORT_DASH);
    let out = dir.path().join("out");
    ok(&bin()
        .arg("run")
        .arg(&s)
        .arg("-o")
        .arg(&out)
        .args(["--variant", "baseline+indi", "--seed", "9", "--no-log"])
        .output()
        .unwrap());
    assert!(!out.join("dash.baseline_indi.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("dash.baseline_indi.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 9);
}

#[test]
fn unknown_variant_is_rejected() {
    let out = bin().args(["run", "x.toml", "--variant", "pid"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown variant"));
}

#[test]
fn malformed_scenario_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "bad.toml",
        "id = \"bad\"\n[trajectory]\nkind = \"spiral\"\n",
    );
    let out = bin().arg("run").arg(&s).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn batch_expands_variants_and_compares() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "dash.toml", SHORT_DASH);
    let m = write(
        dir.path(),
        "batch.toml",
        "variants = [\"proposed\", \"baseline\"]\ninclude = [\"dash.toml\"]\n",
    );
    let out = dir.path().join("out");
    let stdout = ok(&bin()
        .arg("batch")
        .arg(&m)
        .arg("-o")
        .arg(&out)
        .args(["-j", "2", "--no-log"])
        .output()
        .unwrap());
    assert!(stdout.contains("ranking"));
    let summary: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.len(), 2);
    assert!(out.join("comparison.json").exists());
    assert!(out.join("dash.baseline.json").exists());

    // the compare subcommand reproduces the ranking from the per-run files
    let cmp = ok(&bin()
        .arg("compare")
        .arg(out.join("dash.proposed.json"))
        .arg(out.join("dash.baseline.json"))
        .output()
        .unwrap());
    assert!(cmp.contains("dash.proposed < dash.baseline"), "{cmp}");
}

#[test]
fn batch_rejects_duplicate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "dash.toml", SHORT_DASH);
    let m = write(dir.path(), "batch.toml", "include = [\"dash.toml\", \"dash.toml\"]\n");
    let out = bin().arg("batch").arg(&m).arg("-o").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}

#[test]
fn feasibility_flags_rotor_limit() {
    let dir = tempfile::tempdir().unwrap();
    let fine = write(dir.path(), "dash.toml", SHORT_DASH);
    let report: serde_json::Value =
        serde_json::from_str(&ok(&bin().arg("feasibility").arg(&fine).output().unwrap())).unwrap();
    assert_eq!(report["feasible"], true);

    // 20 m in 1.2 s needs far more thrust than the rotors give
    let fast = write(
        dir.path(),
        "fast.toml",
        &SHORT_DASH.replace("[3.0", "[20.0").replace("2.0\nhold", "1.2\nhold"),
    );
    let out = bin().arg("feasibility").arg(&fast).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["rotor_limit_violations"].as_u64().unwrap() > 0);
}

#[test]
fn identify_writes_loadable_parameter_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&bin()
        .arg("run")
        .arg(scenarios().join("hover_to_hover.toml"))
        .arg("-o")
        .arg(&out)
        .args(["--decimate", "4"])
        .output()
        .unwrap());
    let params = dir.path().join("fit.toml");
    let stdout = ok(&bin()
        .arg("identify")
        .arg(out.join("hover_to_hover.proposed.csv"))
        .arg("-o")
        .arg(&params)
        .output()
        .unwrap());
    assert!(stdout.contains("lift axis"));
    let (_, c) = tailsitter::config::load_parameters(&params).unwrap();
    // the plant flew the analytical coefficients
    let truth = tailsitter::config::defaults::analytical_coeffs();
    assert!(
        (c.c_lv - truth.c_lv).abs() < 0.05 * truth.c_lv,
        "{} vs {}",
        c.c_lv,
        truth.c_lv
    );
    assert!((c.c_dlt - truth.c_dlt).abs() < 0.05 * truth.c_dlt);
}

#[test]
fn shipped_scenarios_are_feasible() {
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let p = entry.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        if !text.contains("[trajectory]") {
            continue;
        }
        ok(&bin().arg("feasibility").arg(&p).output().unwrap());
    }
}
