use std::path::Path;
use std::process::{Command, Output};

fn kernelcast(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kernelcast"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("KERNELCAST_THREADS", n),
        None => cmd.env_remove("KERNELCAST_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(out: &Path, extra: &str) -> String {
    format!(
        r#"
experiment = "population"

[system]
mode = "explicit"
h_re = [[1.0, 1.0], [1.0, -1.0]]

[[baths]]
density = "drude"
lambda = 1.0
gamma = 1.0
coupling = "donor_gap"
n_matsubara = 1

[hierarchy]
depth = 2

[grids]
dt = 0.01
t_end = 1.0
t_snap = 0.4
snapshots = 40

[dmd]
delay = 5

[output]
dir = "{}"
{extra}
"#,
        out.display()
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_report_and_echoes_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(tmp.path(), "run.cfg", &small_config(&out, ""));
    let o = kernelcast(&["run", &cfg], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["defaults_applied"]["baths[0].beta"], 1.0);
    assert_eq!(report["config"]["baths"][0]["beta"], 1.0);
    assert_eq!(report["hierarchy"]["n_ado"], 6);
    for f in report["files"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists(), "{f}");
    }
    let echo = out.join("config.echo.cfg");
    let rerun = tmp.path().join("rerun");
    let text = std::fs::read_to_string(&echo).unwrap().replace(&out.display().to_string(), &rerun.display().to_string());
    let cfg2 = write(tmp.path(), "echo.cfg", &text);
    assert!(kernelcast(&["run", &cfg2], None).status.success());
    assert_eq!(
        std::fs::read(out.join("population_dmd.csv")).unwrap(),
        std::fs::read(rerun.join("population_dmd.csv")).unwrap()
    );
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for n in ["1", "3"] {
        let out = tmp.path().join(format!("t{n}"));
        let cfg = write(tmp.path(), &format!("t{n}.cfg"), &small_config(&out, ""));
        let o = kernelcast(&["run", &cfg], Some(n));
        assert!(o.status.success(), "{}", stderr(&o));
        dirs.push(out);
    }
    for name in ["kernels_reference.csv", "kernels_dmd.csv", "population_direct.csv", "kernels_spectrum_dmd.csv"] {
        assert_eq!(std::fs::read(dirs[0].join(name)).unwrap(), std::fs::read(dirs[1].join(name)).unwrap(), "{name}");
    }
}

#[test]
fn snapshot_window_past_end_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config(&tmp.path().join("out"), "").replace("t_end = 1.0", "t_end = 0.3");
    let cfg = write(tmp.path(), "bad.cfg", &text);
    let o = kernelcast(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("grids.t_snap"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn every_violation_is_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config(&tmp.path().join("out"), "")
        .replace("gamma = 1.0", "gamma = -1.0")
        .replace("delay = 5", "delay = 0")
        .replace("[output]", "[floquet]\nn_max = 3\nn_phase = 4\n\n[output]");
    let cfg = write(tmp.path(), "bad.cfg", &text);
    let o = kernelcast(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for field in ["baths[0].gamma", "dmd.delay"] {
        assert!(err.contains(field), "{field} missing from {err}");
    }
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config(&tmp.path().join("out"), "").replace("depth = 2", "depht = 2");
    let cfg = write(tmp.path(), "typo.cfg", &text);
    let o = kernelcast(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("depht"));
    let o = kernelcast(&["run", "/nonexistent/x.cfg"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_hierarchy_is_a_capacity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config(&tmp.path().join("out"), "").replace("depth = 2", "depth = 40\nentry_cap = 1000");
    let cfg = write(tmp.path(), "big.cfg", &text);
    let o = kernelcast(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("hierarchy.depth"));
}

#[test]
fn degenerate_fit_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,y\n");
    for k in 0..50 {
        csv.push_str(&format!("{},0\n", k as f64 * 0.1));
    }
    let series = write(tmp.path(), "zeros.csv", &csv);
    let text = format!(
        "experiment = \"dmd_fit\"\n[grids]\ndt = 0.1\nt_end = 5.0\nt_snap = 3.0\nsnapshots = 30\n[dmd]\ndelay = 2\n[inputs]\nseries = \"{series}\"\n[output]\ndir = \"{}\"\n",
        tmp.path().join("out").display()
    );
    let cfg = write(tmp.path(), "fit.cfg", &text);
    let o = kernelcast(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[numerical]"));
}

#[test]
fn compare_reports_per_column_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.csv", "t,x_re,x_im,P\n0,1,0,0.5\n0.1,2,1,0.25\n0.2,3,-1,0\n");
    let b = write(tmp.path(), "b.csv", "t,x_re,x_im,P\n0,1,0,0.500001\n0.1,2,1,0.250001\n0.2,3,-1,0.000001\n");
    let o = kernelcast(&["compare", &a, &a], None);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["columns"]["x"]["max_abs"], 0.0);
    assert_eq!(v["columns"]["P"]["rel_l2"], 0.0);
    let o = kernelcast(&["compare", &a, &b], None);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let d = v["columns"]["P"]["max_abs"].as_f64().unwrap();
    assert!((d - 1e-6).abs() < 1e-12, "{d}");
    assert_eq!(v["columns"]["x"]["max_abs"], 0.0);
}

#[test]
fn compare_refuses_incompatible_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.csv", "t,y\n0,0\n0.3,1\n0.6,2\n");
    let b = write(tmp.path(), "b.csv", "t,y\n0,0\n0.2,1\n0.4,2\n");
    let o = kernelcast(&["compare", &a, &b], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("grid"));
}

#[test]
fn bad_thread_override_is_rejected() {
    let o = kernelcast(&["compare", "a", "b"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("KERNELCAST_THREADS"));
}
