use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const IDEAL: &str = r#"{"model": "ideal", "f": 3, "k_B": 1, "alpha2": "Pu", "beta2": "Pv"}"#;

fn igflow(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_igflow"));
    cmd.args(args).env_remove("IGFLOW_TOLERANCES");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn setup() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("ideal.json");
    fs::write(&model, IDEAL).unwrap();
    (dir, model)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses a CSV with a header into (header, rows).
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn max_slope_error(x: &[f64], y: &[f64], slope: f64) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0]) - slope).abs())
        .fold(0.0, f64::max)
}

#[test]
fn hamilton_endpoint_matches_exponential_solution() {
    let (dir, model) = setup();
    let out = dir.path().join("t.csv");
    let run = igflow(
        &["simulate", "hamilton", "--model", s(&model), "--q0", "1,1", "--span", "0:2", "--out", s(&out)],
        &[],
    );
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["tau", "q1", "q2", "p1", "p2"]);
    // Constant-pressure ideal gas: q(τ) = q₀ e^{τ/E}, E² = P_u + P_v = 3/2 + 1.
    let e = 2.5f64.sqrt();
    let last = rows.last().unwrap();
    assert_eq!(last[0], 2.0);
    let exact = (2.0 / e).exp();
    assert!((last[1] - exact).abs() <= 1e-8 * exact, "{} vs {exact}", last[1]);
}

#[test]
fn discrete_flow_passes_through_geometric_mean() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d.csv");
    let step = format!("{}", 2f64.ln() / 100.0);
    let run = igflow(
        &[
            "simulate", "discrete", "--q0", "0.2,0.8", "--q2", "0.5,0.5", "--span", "0:5",
            "--output-step", &step, "--out", s(&out),
        ],
        &[],
    );
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "q1", "q2", "D"]);
    let row = rows.iter().find(|r| (r[0] - 2f64.ln()).abs() < 1e-12).expect("row at ln 2");
    // At β = 1/2 the normalized geometric mean of (0.2, 0.8) and (0.5, 0.5) is (1/3, 2/3).
    assert!((row[1] - 1.0 / 3.0).abs() < 1e-6 && (row[2] - 2.0 / 3.0).abs() < 1e-6);
    let d = column(&header, &rows, "D");
    assert!(d.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn missing_config_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    let missing = dir.path().join("missing.json");
    let run = igflow(
        &["simulate", "hamilton", "--model", s(&missing), "--q0", "1,1", "--span", "0:2", "--out", s(&out)],
        &[],
    );
    assert_eq!(code(&run), 2);
    assert!(!run.stderr.is_empty());
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn inadmissible_initial_state_exits_2() {
    let (dir, model) = setup();
    let out = dir.path().join("t.csv");
    let run = igflow(
        &["simulate", "gradient", "--model", s(&model), "--q0", "-1,1", "--span", "0:1", "--out", s(&out)],
        &[],
    );
    assert_eq!(code(&run), 2);
    assert!(!out.exists());
}

#[test]
fn flow_leaving_the_domain_exits_3() {
    let (dir, model) = setup();
    let out = dir.path().join("t.csv");
    let run = igflow(
        &[
            "simulate", "hamilton", "--model", s(&model), "--q0", "1,1", "--span", "0:-40", "--step", "0.5",
            "--output-step", "1", "--out", s(&out),
        ],
        &[],
    );
    assert_eq!(code(&run), 3, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(!out.exists());
}

#[test]
fn adaptive_step_underflow_exits_3() {
    let (_dir, model) = setup();
    let run = igflow(
        &[
            "simulate", "hamilton", "--model", s(&model), "--q0", "1,1", "--span", "0:2", "--adaptive",
            "--rtol", "1e-14", "--atol", "1e-16", "--min-step", "0.05", "--output-step", "0.1",
        ],
        &[],
    );
    assert_eq!(code(&run), 3);
    assert!(run.stdout.is_empty());
}

#[test]
fn verify_ideal_defaults_pass() {
    let (dir, model) = setup();
    let out = dir.path().join("r.json");
    let run = igflow(&["verify", "--model", s(&model), "--out", s(&out)], &[]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == true));
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(names.contains(&"flows.flow_equivalence"));
    assert_eq!(report["summary"]["passed"], report["summary"]["total"]);
    assert_eq!(report["config"]["model"]["model"], "ideal");
}

#[test]
fn failing_check_exits_1_with_report() {
    let (dir, model) = setup();
    let tol = dir.path().join("tol.json");
    fs::write(&tol, r#"{"flow_equivalence": -1.0}"#).unwrap();
    let check = |run: Output| {
        assert_eq!(code(&run), 1);
        let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
        let failed: Vec<&str> = report["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["pass"] == false)
            .map(|c| c["name"].as_str().unwrap())
            .collect();
        assert_eq!(failed, ["flows.flow_equivalence"]);
    };
    check(igflow(&["verify", "--model", s(&model), "--tolerances", s(&tol)], &[]));
    check(igflow(&["verify", "--model", s(&model)], &[("IGFLOW_TOLERANCES", &tol)]));
}

#[test]
fn tolerance_env_var_takes_precedence_over_flag() {
    let (dir, model) = setup();
    let strict = dir.path().join("strict.json");
    fs::write(&strict, r#"{"flow_equivalence": -1.0}"#).unwrap();
    let loose = dir.path().join("loose.json");
    fs::write(&loose, "{}").unwrap();
    let run = igflow(
        &["verify", "--model", s(&model), "--suite", "flows", "--tolerances", s(&loose)],
        &[("IGFLOW_TOLERANCES", &strict)],
    );
    assert_eq!(code(&run), 1);
}

#[test]
fn bad_tolerance_file_exits_2() {
    let (dir, model) = setup();
    let tol = dir.path().join("tol.json");
    fs::write(&tol, r#"{"no_such_check": 1.0}"#).unwrap();
    let run = igflow(&["verify", "--model", s(&model), "--tolerances", s(&tol)], &[]);
    assert_eq!(code(&run), 2);
    let run = igflow(&["verify", "--model", s(&model), "--suite", "everything"], &[]);
    assert_eq!(code(&run), 2);
}

#[test]
fn discrete_suite_passes() {
    let (_dir, model) = setup();
    let run = igflow(&["verify", "--model", s(&model), "--suite", "discrete"], &[]);
    assert_eq!(code(&run), 0);
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["name"].as_str().unwrap().starts_with("discrete.")));
    let residual = checks
        .iter()
        .find(|c| c["name"] == "discrete.canonical_residual")
        .unwrap()["residual"]
        .as_f64()
        .unwrap();
    assert!(residual <= 1e-10);
}

#[test]
fn exported_entropy_grows_at_rate_e() {
    let (dir, model) = setup();
    let traj = dir.path().join("t.csv");
    let out = dir.path().join("s.csv");
    igflow(&["simulate", "hamilton", "--model", s(&model), "--q0", "1,1", "--span", "0:2", "--out", s(&traj)], &[]);
    let run = igflow(
        &["export-plotdata", "--input", s(&traj), "--quantities", "s", "--model", s(&model), "--out", s(&out)],
        &[],
    );
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["tau", "q1", "q2", "p1", "p2", "s"]);
    let tau = column(&header, &rows, "tau");
    let entropy = column(&header, &rows, "s");
    assert!(max_slope_error(&tau, &entropy, 2.5f64.sqrt()) <= 1e-6);
}

#[test]
fn exported_temperature_is_exponential_in_t() {
    let (dir, model) = setup();
    let traj = dir.path().join("g.csv");
    igflow(&["simulate", "gradient", "--model", s(&model), "--q0", "1.5,1", "--span", "0:2", "--out", s(&traj)], &[]);
    let run = igflow(&["export-plotdata", "--input", s(&traj), "--quantities", "T,P"], &[]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let out = dir.path().join("tp.csv");
    fs::write(&out, &run.stdout).unwrap();
    let (header, rows) = read_csv(&out);
    assert_eq!(header.last().unwrap(), "P");
    let t = column(&header, &rows, "t");
    let ln_temp: Vec<f64> = column(&header, &rows, "T").iter().map(|x| x.ln()).collect();
    assert!(max_slope_error(&t, &ln_temp, 1.0) <= 1e-6);
}

#[test]
fn export_derived_columns_follow_request_order() {
    let (dir, model) = setup();
    let traj = dir.path().join("t.csv");
    igflow(&["simulate", "hamilton", "--model", s(&model), "--q0", "1,1", "--span", "0:1", "--out", s(&traj)], &[]);
    let out = dir.path().join("x.csv");
    let run = igflow(
        &[
            "export-plotdata", "--input", s(&traj), "--quantities", "eikonal,H,s", "--model", s(&model), "--out",
            s(&out),
        ],
        &[],
    );
    assert_eq!(code(&run), 0);
    let (header, rows) = read_csv(&out);
    assert_eq!(&header[5..], ["eikonal", "H", "s"]);
    assert!(column(&header, &rows, "eikonal").iter().all(|r| r.abs() <= 1e-10));
    assert!(column(&header, &rows, "H").iter().all(|h| (h - 2.5f64.sqrt()).abs() <= 1e-8));
}

#[test]
fn export_kl_divergence_on_discrete_run() {
    let dir = TempDir::new().unwrap();
    let traj = dir.path().join("d.csv");
    igflow(
        &["simulate", "discrete", "--q0", "0.2,0.8", "--q2", "0.5,0.5", "--span", "0:1", "--out", s(&traj)],
        &[],
    );
    let out = dir.path().join("x.csv");
    let run = igflow(
        &["export-plotdata", "--input", s(&traj), "--quantities", "D", "--q2", "0.5,0.5", "--out", s(&out)],
        &[],
    );
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let (header, rows) = read_csv(&out);
    for r in &rows {
        assert!((r[3] - r[4]).abs() <= 1e-14 * r[3].abs().max(1.0));
    }
    assert_eq!(header.len(), 5);
    let run = igflow(&["export-plotdata", "--input", s(&traj), "--quantities", "D"], &[]);
    assert_eq!(code(&run), 2);
}

#[test]
fn export_without_quantities_echoes_input() {
    let (dir, model) = setup();
    let traj = dir.path().join("t.csv");
    igflow(&["simulate", "hamilton", "--model", s(&model), "--q0", "1,1", "--span", "0:1", "--out", s(&traj)], &[]);
    let run = igflow(&["export-plotdata", "--input", s(&traj)], &[]);
    assert_eq!(code(&run), 0);
    assert_eq!(run.stdout, fs::read(&traj).unwrap());
}

#[test]
fn export_rejects_unknown_quantity_and_missing_model() {
    let (dir, model) = setup();
    let traj = dir.path().join("t.csv");
    igflow(&["simulate", "hamilton", "--model", s(&model), "--q0", "1,1", "--span", "0:1", "--out", s(&traj)], &[]);
    let out = dir.path().join("x.csv");
    let run = igflow(&["export-plotdata", "--input", s(&traj), "--quantities", "s,entropy", "--out", s(&out)], &[]);
    assert_eq!(code(&run), 2);
    assert!(!out.exists());
    let run = igflow(&["export-plotdata", "--input", s(&traj), "--quantities", "s"], &[]);
    assert_eq!(code(&run), 2);
}

#[test]
fn outputs_are_deterministic() {
    let (dir, model) = setup();
    let mut csv = Vec::new();
    let mut json = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("t{i}.csv"));
        igflow(&["simulate", "hamilton", "--model", s(&model), "--q0", "1,2", "--span", "0:1", "--out", s(&out)], &[]);
        csv.push(fs::read(&out).unwrap());
        json.push(igflow(&["verify", "--model", s(&model), "--seed", "7"], &[]).stdout);
    }
    assert!(!csv[0].is_empty() && !json[0].is_empty());
    assert_eq!(csv[0], csv[1]);
    assert_eq!(json[0], json[1]);
}
