use std::process::{Command, Output};

fn gadi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gadi")).args(args).output().expect("run gadi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_prints_json_and_exit_code() {
    let o = gadi(&["solve", "convdiff3d:n=4", "--alpha", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["status"], "Converged");
    assert!(v["forward_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["alpha_source"], "given");

    let o = gadi(&["solve", "convdiff3d:n=4", "--alpha", "0.5", "--max-iters", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["status"], "MaxIters");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(gadi(&["solve", "convdiff3d:n=4"]).status.code(), Some(1));
    assert_eq!(gadi(&["solve", "heat:n=4", "--alpha", "1"]).status.code(), Some(1));
    assert_eq!(gadi(&["solve", "convdiff3d:n=4", "--alpha", "1", "--prec", "half,quad,double"]).status.code(), Some(1));
    assert_eq!(gadi(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gadi(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# shifts\nalpha = 0.25\nprec = single,double,double\nmax_iters = 3\n").unwrap();
    let o = gadi(&["solve", "convdiff3d:n=3", "--config", cfg.to_str().unwrap(), "--max-iters", "5000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["alpha"], 0.25);
    assert_eq!(v["precisions"]["u_r"], "single");
}

#[test]
fn table_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = gadi(&[
        "table",
        "--problem",
        "convdiff3d:n=3",
        "--precs",
        "double,double,double;single,single,single",
        "--alphas",
        "0.5,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["problem", "u_r", "u", "u_f", "alpha", "status", "rres", "iters"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][1], "double");
    assert_eq!(&rows[1][1], "single");
    assert_eq!(&rows[2][4], "2.000e0");
    for r in &rows {
        assert_eq!(&r[5], "Converged");
        let rres: f64 = r[6].parse().unwrap();
        assert!(rres < 1e-3);
    }
}

#[test]
fn sweep_writes_histories() {
    let o = gadi(&["sweep", "convdiff3d:n=3", "--prec", "double,double,double", "--alphas", "0.5,1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,status,iter,rres"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first, vec!["5.000e-1", "Converged", "0", "1.000e0"]);
    assert!(text.lines().any(|l| l.starts_with("1.000e0,")));
}

#[test]
fn gpr_predicts_from_saved_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("train");
    let o = gadi(&[
        "gpr",
        "--sizes",
        "3,4,5",
        "--predict",
        "8",
        "--precision",
        "double",
        "--budget",
        "8",
        "--training-out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("n,order,alpha_double,std_double\n8,512,"), "{text}");
    let training = dir.path().join("train_double.csv");
    assert!(training.exists());

    let o = gadi(&["solve", "convdiff3d:n=4", "--gpr", training.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["alpha_source"], "gpr");
    assert!(v["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn bounds_report() {
    let o = gadi(&["bounds", "convdiff3d:n=3", "--alpha", "1", "--lambda", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["bounds"]["constants"]["lambda"], 0.3);
    assert!(v["bounds"]["kappa_hat"].as_f64().unwrap() > 1.0);
    assert!(v["measured_status"].is_string());
}
