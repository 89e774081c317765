use std::fs;
use std::process::{Command, Output};

fn usp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usp"))
        .args(args)
        .env_remove("USP_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON report")
}

#[test]
fn classic_pearson_on_marital() {
    let o = usp(&["test", "--dataset", "marital", "--method", "pearson", "--mode", "classic"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!((v["p_value"].as_f64().unwrap() - 0.0235).abs() <= 0.0005);
    assert!((v["statistic"].as_f64().unwrap() - 23.6).abs() <= 0.05);
    assert_eq!(v["method"], "pearson");
    assert_eq!(v["mode"], "classic");
}

#[test]
fn usp_on_marital_rejects() {
    let o = usp(&["test", "--dataset", "marital", "--method", "usp", "--B", "999", "--seed", "1"]);
    assert!(o.status.success());
    let v = json(&o);
    let p = v["p_value"].as_f64().unwrap();
    assert!(p <= 0.01, "{p}");
    assert_eq!(v["reject"], true);
    assert_eq!(v["B"], 999);
    let scaled = p * 1000.0;
    assert!((scaled - scaled.round()).abs() < 1e-9);
}

#[test]
fn csv_input_and_bad_cells() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    fs::write(&good, "# eye colour\n20,30,10,15,10\n25,15,12,20,10\n").unwrap();
    let o = usp(&["test", "--input", good.to_str().unwrap(), "--method", "g", "--mode", "classic"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["df"], 4);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2,3\n4,-5,6\n").unwrap();
    let o = usp(&["test", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column 2"), "{err}");
}

#[test]
fn undefined_statistic_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero_col.csv");
    fs::write(&path, "3,0,1\n2,0,4\n").unwrap();
    let o = usp(&["test", "--input", path.to_str().unwrap(), "--method", "pearson"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(usp(&["asymsize", "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(usp(&["power", "--family", "sparse", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(
        usp(&["subsample", "--dataset", "eyecolour", "--m", "99999"]).status.code(),
        Some(2)
    );
    assert_eq!(usp(&["test", "--dataset", "nowhere"]).status.code(), Some(2));
    assert_eq!(usp(&["bogus"]).status.code(), Some(2));
    assert_eq!(usp(&["--help"]).status.code(), Some(0));
}

#[test]
fn asymsize_rows() {
    let o = usp(&["asymsize", "--test", "pearson", "--alpha", "0.05", "--lambda", "1:1:1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines, ["lambda,alpha,test,asymptotic_size", lines[1]]);
    let size: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((size - 0.0803).abs() < 1e-4);
}

#[test]
fn asymsize_g_default_grid_has_jump() {
    let o = usp(&["asymsize", "--test", "g", "--alpha", "0.05"]);
    assert!(o.status.success());
    let rows: Vec<(f64, f64)> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 500);
    let jump = rows
        .windows(2)
        .find(|w| w[0].0 < 1.3859 && w[1].0 > 1.3859)
        .unwrap();
    assert!(jump[1].1 - jump[0].1 > 0.01, "{jump:?}");
}

#[test]
fn power_is_byte_identical_across_runs_and_threads() {
    let args = [
        "power", "--family", "sparse", "--n", "100", "--reps", "50", "--B", "19", "--eps-grid",
        "0:0.06:3", "--seed", "11", "--tests", "usp,pearson-perm,g-perm,pearson-classic,g-classic",
    ];
    let a = usp(&args);
    assert!(a.status.success());
    let b = usp(&[&["--threads", "1"][..], &args[..]].concat());
    let c = usp(&[&["--threads", "3"][..], &args[..]].concat());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(b.stdout, c.stdout);
    let out = stdout(&a);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "epsilon,n,reps,method,mode,rejection_rate,std_err");
    assert_eq!(lines.len(), 1 + 3 * 5);
    assert!(lines[1].starts_with("0,100,50,usp,permutation,"));
}

#[test]
fn threads_env_fallback() {
    let o = Command::new(env!("CARGO_BIN_EXE_usp"))
        .args(["test", "--dataset", "eyecolour", "--B", "99"])
        .env("USP_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(o.stdout, usp(&["test", "--dataset", "eyecolour", "--B", "99"]).stdout);
}

#[test]
fn dhat_mean_near_zero_under_null() {
    let o = usp(&["dhat", "--family", "sparse", "--I", "5", "--J", "8", "--n", "100", "--eps", "0", "--reps", "100"]);
    assert!(o.status.success());
    let xs: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(xs.len(), 100);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "mean {mean}");
}

#[test]
fn subsample_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub.csv");
    let o = usp(&[
        "subsample", "--dataset", "eyecolour", "--m", "84", "--reps", "40", "--B", "99", "--seed", "7",
        "--output", path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,reps,method,mode,rejection_rate,std_err");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("84,40,pearson,permutation,"));
}
