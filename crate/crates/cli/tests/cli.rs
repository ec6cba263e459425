use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hierlasso::{
    build_h, build_hasse, constrained_lasso_path, lambda_grid, Dataset, Model, PathOptions,
};
use hierlasso_cli::{
    expand_design, simulate_coincidence, simulate_prediction, RawTable, Scaling, SimulationConfig,
};
use nalgebra::{DMatrix, DVector};

const SMALL: &str = "x1,x2,x3,y\n0,-1,-1,-2\n-1,0,0,0\n-1,-1,-1,1\n-1,0,1,1\n-3,-1,1,-1\n-1,0,1,-1\n7,3,-1,2\n";
const MODEL: &str = r#"{"k": 3, "terms": [[1,0,0],[0,1,0],[0,0,1],[1,1,0],[1,0,1]]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hierlasso"))
}

fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("small.csv");
    let model = dir.join("model.json");
    std::fs::write(&data, SMALL).unwrap();
    std::fs::write(&model, MODEL).unwrap();
    (data, model)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn path_cmd(data: &Path, model: &Path, out: &Path, extra: &[&str]) -> Command {
    let mut c = bin();
    c.arg("path")
        .arg("--data")
        .arg(data)
        .arg("--model")
        .arg(model)
        .arg("--out")
        .arg(out)
        .args(extra);
    c
}

#[test]
fn path_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = fixture(dir.path());
    let args = ["--constraint", "S", "--weight", "const:8", "--standardize", "off"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&mut path_cmd(&data, &model, &a, &args)).status.success());
    assert!(run(&mut path_cmd(&data, &model, &b, &args)).status.success());
    for ext in ["json", "csv"] {
        let x = std::fs::read(a.with_extension(ext)).unwrap();
        let y = std::fs::read(b.with_extension(ext)).unwrap();
        assert_eq!(x, y, "{ext} differs");
    }
}

#[test]
fn path_summary_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = fixture(dir.path());
    let out = dir.path().join("h");
    let o = run(&mut path_cmd(&data, &model, &out, &["--constraint", "H", "--standardize", "off"]));
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("lambda_max 40\n"), "{text}");
    assert!(text.contains("points 60\n"));
    assert!(text.contains("hierarchy_ok 60/60"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 60);
    assert_eq!(json["method"], "constrained");
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(csv.starts_with("lambda,x1,x2,x3,x1*x2,x1*x3\n"));
    assert_eq!(csv.lines().count(), 61);

    // no constraint means the plain lasso
    let out = dir.path().join("plain");
    let o = run(&mut path_cmd(&data, &model, &out, &["--standardize", "off"]));
    assert!(String::from_utf8(o.stdout).unwrap().contains("method plain"));

    let out = dir.path().join("relaxed");
    let o = run(&mut path_cmd(&data, &model, &out, &["--constraint", "W", "--method", "relaxed"]));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("proxy_hierarchy_ok 60/60"), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = fixture(dir.path());
    let out = dir.path().join("x");
    let code = |c: &mut Command| run(c).status.code().unwrap();
    assert_eq!(code(&mut path_cmd(&data, &model, &out, &["--constraint", "Q"])), 2);
    assert_eq!(code(&mut path_cmd(&dir.path().join("missing.csv"), &model, &out, &[])), 2);
    let bad_k = dir.path().join("k2.json");
    std::fs::write(&bad_k, r#"{"k": 2, "terms": [[1,0]]}"#).unwrap();
    assert_eq!(code(&mut path_cmd(&data, &bad_k, &out, &[])), 2);
    // 7 rows cannot support the 19 cubic terms
    let mut c = bin();
    c.args(["path", "--degree", "3", "--out"]).arg(&out).arg("--data").arg(&data);
    assert_eq!(code(&mut c), 2);
    // a vanishing ridge leaves the relaxed Hessian singular
    let args = ["--constraint", "H", "--method", "relaxed", "--delta", "1e-300"];
    assert_eq!(code(&mut path_cmd(&data, &model, &out, &args)), 3);
    assert_eq!(code(&mut path_cmd(&data, &model, &out, &[])), 0);
}

#[test]
fn relations_and_hasse() {
    let dir = tempfile::tempdir().unwrap();
    let (_, model) = fixture(dir.path());
    let o = run(bin().arg("relations").arg("--model").arg(&model));
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "x1 -> x1*x2\nx1 -> x1*x3\nx2 -> x1*x2\nx3 -> x1*x3\n"
    );
    let o = run(bin().arg("hasse").arg("--model").arg(&model));
    let dot = String::from_utf8(o.stdout).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), 4);
}

#[test]
fn select_reports_original_scale() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = fixture(dir.path());
    let out = dir.path().join("sel.json");
    let o = run(bin()
        .args(["select", "--constraint", "S", "--weight", "count"])
        .arg("--data")
        .arg(&data)
        .arg("--valid")
        .arg(&data)
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert!(v["validation_mse"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["original_coefficients"].as_array().unwrap().len(), 5);
    assert!(v["original_intercept"].is_number());
}

#[test]
fn simulation_reports_repeat_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "2", "1"] {
        let out = dir.path().join(format!("c{}.json", outs.len()));
        let o = run(bin()
            .env("HIERLASSO_THREADS", threads)
            .args(["simulate", "coincidence", "--reps", "3", "--lambdas", "8", "--seed", "11", "--out"])
            .arg(&out));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
    let v: serde_json::Value = serde_json::from_slice(&outs[0]).unwrap();
    assert_eq!(v["seed"], 11);
    assert_eq!(v["replications"], 3);
    assert_eq!(v["config"]["n_train"], 40);
    let o = run(bin().env("HIERLASSO_THREADS", "many").args(["simulate", "coincidence", "--reps", "1"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn benchmark_emits_seven_rows_per_scenario() {
    let o = run(bin().args(["benchmark", "--scenarios", "2", "--max-k", "2", "--max-degree", "2", "--lambdas", "4"]));
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 14);
    for method in ["constrained", "relaxed"] {
        for kind in ["S", "H", "W"] {
            assert_eq!(rows.iter().filter(|r| r.contains(&format!(",{method},{kind},"))).count(), 2);
        }
    }
    assert_eq!(rows.iter().filter(|r| r.contains(",plain,none,")).count(), 2);
}

#[test]
fn noiseless_prediction_counts_ties_as_wins() {
    let mut cfg = SimulationConfig::prediction_default();
    cfg.replications = 4;
    cfg.noise_variances = vec![0.0];
    cfg.weights = vec![10.0];
    cfg.n_lambda = 10;
    let r = simulate_prediction(&cfg).unwrap();
    assert_eq!((r.truth_terms, r.candidate_terms), (11, 24));
    let c = &r.cells[0];
    assert!(c.mean_error_s < 1e-12 && c.mean_error_lasso < 1e-12, "{c:?}");
    assert_eq!(c.wins.successes, 4);
}

#[test]
fn coincidence_signs_never_exceed_terms() {
    let mut cfg = SimulationConfig::coincidence_default(3).unwrap();
    cfg.replications = 8;
    cfg.weights = vec![1.0, 10.0];
    cfg.noise_variances = vec![0.0, 0.5];
    cfg.n_lambda = 12;
    let r = simulate_coincidence(&cfg).unwrap();
    assert_eq!(r.cells.len(), 4);
    assert_eq!(r.candidate_terms, 19);
    for c in &r.cells {
        assert!(c.terms_and_signs.successes <= c.terms_only.successes);
        assert_eq!(c.terms_only.trials, 8);
    }
}

#[test]
fn standardized_fit_predicts_like_manual_scaling() {
    let raw = RawTable::from_reader(SMALL.as_bytes(), None).unwrap();
    let model: Model = serde_json::from_str(MODEL).unwrap();
    let std_ds = expand_design(&raw, &model, &Scaling::Fit).unwrap();
    let plain = expand_design(&raw, &model, &Scaling::Raw).unwrap();

    // scale the raw columns by hand
    let x = plain.x();
    let (n, p) = (x.nrows(), x.ncols());
    let means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| (x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
        .collect();
    let ybar = plain.y().sum() / n as f64;
    let xs = DMatrix::from_fn(n, p, |i, j| (x[(i, j)] - means[j]) / sds[j]);
    let ys = DVector::from_fn(n, |i, _| plain.y()[i] - ybar);
    let manual = Dataset::new(model.clone(), xs, ys).unwrap();

    let cs = build_h(&build_hasse(&model));
    let opts = PathOptions::default();
    let grid = lambda_grid(&std_ds, 12).unwrap();
    let a = constrained_lasso_path(&std_ds, &cs, &grid, &opts).unwrap();
    let b = constrained_lasso_path(&manual, &cs, &grid, &opts).unwrap();
    let st = std_ds.standardization().unwrap();
    for (pa, pb) in a.points.iter().zip(&b.points) {
        let (c0, slopes) = st.to_original(&pa.theta).unwrap();
        for (i, row) in raw.rows.iter().enumerate() {
            let fitted: f64 = c0
                + model
                    .terms()
                    .iter()
                    .zip(&slopes)
                    .map(|(t, s)| s * t.evaluate(row))
                    .sum::<f64>();
            let manual_fit: f64 = ybar
                + (0..p)
                    .map(|j| pb.theta[j] * (plain.x()[(i, j)] - means[j]) / sds[j])
                    .sum::<f64>();
            assert!((fitted - manual_fit).abs() < 1e-10, "lambda {}", pa.lambda);
        }
    }
}
