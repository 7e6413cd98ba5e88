use fomlab::cli::{CliError, RunReport, EXIT_CONVERGENCE};
use fomlab::FomError;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fomlab");

const ROC: &str = r#"
command = "roc"
[model]
family = "gaussian_location"
sigma = 1.0
[task]
theta0 = 0.0
theta1 = 1.0
[output]
format = "csv"
"#;

const MC_BFI: &str = r#"
command = "bfi"
method = "monte_carlo"
[model]
family = "gaussian_scale"
[prior]
family = "lognormal"
mu = 0.0
s = 0.3
[numerics]
seed = 11
mc_samples = 50000
"#;

fn fomlab(dir: &Path, config: &str, out: Option<&str>, threads: Option<&str>) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(BIN);
    cmd.arg("--config").arg(&cfg).arg("--quiet");
    if let Some(o) = out {
        cmd.arg("--output").arg(dir.join(o));
    }
    match threads {
        Some(t) => cmd.env("FOMLAB_THREADS", t),
        None => cmd.env_remove("FOMLAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).expect("JSON error on stderr");
    serde_json::from_str::<serde_json::Value>(line).unwrap()["error"].clone()
}

#[test]
fn fi_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"fi\"\n[model]\nfamily = \"poisson_rate\"\n[task]\ntheta = 4.0\n";
    let out = fomlab(dir.path(), cfg, Some("fi.json"), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("fi.json")).unwrap();
    let report = RunReport::from_json(&text).unwrap();
    assert_eq!(report.to_json().unwrap(), text);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let fi = v["results"][0]["fisher"]["value"]["value"].as_f64().unwrap();
    assert!((fi - 0.25).abs() < 1e-12);
}

#[test]
fn report_goes_to_stdout_without_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"fi\"\n[model]\nfamily = \"gaussian_scale\"\n[task]\ntheta = 2.0\n";
    let out = fomlab(dir.path(), cfg, None, None);
    assert_eq!(out.status.code(), Some(0));
    let report = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.results.len(), 1);
}

#[test]
fn roc_csv_has_header_and_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = fomlab(dir.path(), ROC, Some("roc.csv"), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("roc.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("fpf,tpf"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert!(rows.len() > 100);
    assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    assert_eq!(rows.first(), Some(&(0.0, 0.0)));
    assert_eq!(rows.last(), Some(&(1.0, 1.0)));
}

#[test]
fn config_errors_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = MC_BFI.replace("seed = 11\n", "");
    let csv_auc = ROC.replace("\"roc\"", "\"auc\"");
    let cases = [
        ("command = \"fi\"\n[model]\nfamily = \"laplace\"\n", "model.family"),
        ("command = \"fi\"\n[model]\nfamily = \"poisson_rate\"\n[task]\nthetta = 1.0\n", "task.thetta"),
        ("command = \"fi\"\n[model]\nfamily = \"poisson_rate\"\n[task]\ntheta = -1.0\n", "task.theta"),
        (no_seed.as_str(), "numerics.seed"),
        (csv_auc.as_str(), "output.format"),
    ];
    for (cfg, key) in cases {
        let out = fomlab(dir.path(), cfg, Some("never.json"), None);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        assert_eq!(error_json(&out)["key"], key, "{cfg}");
        assert!(!dir.path().join("never.json").exists());
    }
    let missing = Command::new(BIN).args(["--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fomlab(dir.path(), MC_BFI, Some("x.json"), Some("zero"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["key"], "FOMLAB_THREADS");
}

#[test]
fn reports_match_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for t in ["1", "3"] {
        let name = format!("t{t}.json");
        let out = fomlab(dir.path(), MC_BFI, Some(&name), Some(t));
        assert_eq!(out.status.code(), Some(0));
        let report = RunReport::from_json(&std::fs::read_to_string(dir.path().join(&name)).unwrap()).unwrap();
        bodies.push(report.canonical_without_time().unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn convergence_maps_to_exit_3() {
    let e = CliError::from(FomError::convergence("ran out of intervals", 0.5));
    assert_eq!(e.exit_code, EXIT_CONVERGENCE);
    assert_eq!(e.kind, "convergence");
}
