//! End-to-end checks of the `hjflow` binary: exit codes, artifact layout,
//! byte-level determinism, and per-run isolation inside sweeps.

use std::fs;
use std::path::Path;
use std::process::Command;

fn hjflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hjflow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_emits_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "run.cfg",
        &format!(
            "experiment = single\noutput_dir = {}\nseed = 5\n\
             grid.kind = interval\ngrid.length = 1.0\ngrid.n = 101\n\
             F.kind = power\nF.p = 3\n\
             u0.kind = cosine\nu0.amplitude = 0.2\n\
             run.t_end = 0.5\nrun.dt_max = 5e-4\nrun.save_stride = 10\n",
            out.display()
        ),
    );

    let status = hjflow().arg("run").arg(&cfg).status().unwrap();
    assert!(status.success(), "first run failed");
    for artifact in [
        "run/series.csv",
        "run/final.snap",
        "run/verdicts.csv",
        "run/meta.txt",
        "summary.csv",
        "plots.gp",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
    let first = fs::read(out.join("run/series.csv")).unwrap();
    let first_summary = fs::read(out.join("summary.csv")).unwrap();

    // rerun into the same directory with a bounded pool: identical bytes
    let status = hjflow()
        .arg("run")
        .arg(&cfg)
        .env("HJFLOW_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success(), "rerun failed");
    assert_eq!(first, fs::read(out.join("run/series.csv")).unwrap());
    assert_eq!(first_summary, fs::read(out.join("summary.csv")).unwrap());
}

#[test]
fn verify_recomputes_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "run.cfg",
        &format!(
            "output_dir = {}\ngrid.n = 101\nF.p = 2\nu0.amplitude = 0.1\nrun.t_end = 0.3\nrun.dt_max = 5e-4\n",
            out.display()
        ),
    );
    assert!(hjflow().arg("run").arg(&cfg).status().unwrap().success());
    fs::remove_file(out.join("run/verdicts.csv")).unwrap();
    let output = hjflow().arg("verify").arg(&out).output().unwrap();
    assert!(
        output.status.success(),
        "verify failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out.join("run/verdicts.csv").exists());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("max_nonincreasing"));
}

#[test]
fn sweep_isolates_guard_hits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "sweep.cfg",
        &format!(
            "experiment = sweep-kappa\noutput_dir = {}\n\
             grid.kind = interval\ngrid.length = 1.0\ngrid.n = 101\n\
             F.kind = power\nF.p = 3\n\
             u0.kind = cosine\n\
             run.t_end = 0.5\nrun.dt_max = 5e-4\nrun.blowup_guard = 0.1\n\
             sweep.amplitudes = 0.001, 0.5\n",
            out.display()
        ),
    );
    let status = hjflow().arg("sweep").arg(&cfg).status().unwrap();
    // one run trips the gradient guard, so verdicts fail with exit code 1
    assert_eq!(status.code(), Some(1));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("amp0.001,completed,"), "{}", lines[1]);
    assert!(
        lines[2].starts_with("amp0.5,gradient-guard,"),
        "{}",
        lines[2]
    );
}

#[test]
fn eig_prints_interface_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "eig.cfg",
        &format!(
            "experiment = eig\noutput_dir = {}\ngrid.kind = interval\ngrid.length = 1.0\ngrid.n = 201\n",
            out.display()
        ),
    );
    let output = hjflow().arg("eig").arg(&cfg).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let line = text.lines().next().unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields.len(), 4, "expected 4 fields, got `{line}`");
    let lambda: f64 = fields[0].parse().unwrap();
    let analytic: f64 = fields[1].parse().unwrap();
    assert!((lambda - analytic).abs() <= 1e-8 * analytic);
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lambda - pi2).abs() <= 1e-2 * pi2);
}

#[test]
fn semigroup_subcommand_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "sg.cfg",
        &format!(
            "experiment = semigroup\noutput_dir = {}\nseed = 9\n\
             grid.kind = interval\ngrid.length = 1.0\ngrid.n = 101\n\
             semigroup.samples = 5\nsemigroup.times = 1e-3, 1e-2, 0.1\n",
            out.display()
        ),
    );
    let status = hjflow().arg("semigroup").arg(&cfg).status().unwrap();
    assert!(status.success());
    assert!(out.join("semigroup.csv").exists());
    let verdicts = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.contains("sg_contraction"));
    assert!(verdicts.contains("sg_eigen_saturation"));
    assert!(verdicts.contains("sg_c1_stable_under_refinement"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "run.t_end = 1\nrun.dtmax = 0.1\n");
    let output = hjflow().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("unknown key"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn subcommand_kind_mismatch_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "single.cfg",
        "experiment = single\nrun.t_end = 0.1\n",
    );
    let output = hjflow().arg("sweep").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn colehopf_experiment_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "ch.cfg",
        &format!(
            "experiment = oracle-colehopf\noutput_dir = {}\n\
             grid.kind = interval\ngrid.length = 1.0\ngrid.n = 201\n\
             F.kind = power\nF.p = 2\n\
             u0.kind = cosine\nu0.amplitude = 0.3\n\
             run.t_end = 2.0\nrun.dt_max = 2e-4\n\
             colehopf.tol_c = 2e-3\ncolehopf.tol_u = 4e-3\n",
            out.display()
        ),
    );
    let status = hjflow().arg("run").arg(&cfg).status().unwrap();
    assert!(status.success());
    let verdicts = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.contains("colehopf_c_error,true"), "{verdicts}");
    assert!(verdicts.contains("colehopf_final_dev,true"), "{verdicts}");
}

#[test]
fn picard_experiment_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "pc.cfg",
        &format!(
            "experiment = picard-crosscheck\noutput_dir = {}\n\
             grid.kind = interval\ngrid.length = 1.0\ngrid.n = 101\n\
             F.kind = power\nF.p = 3\n\
             u0.kind = cosine\nu0.amplitude = 0.1\n\
             run.t_end = 0.05\nrun.dt_max = 1e-4\n",
            out.display()
        ),
    );
    let status = hjflow().arg("run").arg(&cfg).status().unwrap();
    assert!(status.success());
    let verdicts = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.contains("picard_vs_march,true"), "{verdicts}");
}
