use std::process::{Command, Output};

use serde_json::Value;

fn ppz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&o.stdout));
    })
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cos_zeros_as_json() {
    let o = ppz(&[
        "zeros",
        "--builtin",
        "cos",
        "--window",
        "-15:15",
        "--iters",
        "10",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let zeros = v["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 10);
    for z in zeros {
        let x = z["location"][0].as_f64().unwrap();
        let k = ((x - std::f64::consts::FRAC_PI_2) / std::f64::consts::PI).round();
        let truth = (k + 0.5) * std::f64::consts::PI;
        assert!((x - truth).abs() < 1e-6);
    }
    assert_eq!(v["seed"], 1);
    assert_eq!(v["config"]["base"]["K"], 10.0);
}

#[test]
fn no_zeros_exits_one_with_empty_list() {
    let o = ppz(&["zeros", "--fn", "x^2+1", "--window", "0:1"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["zeros"].as_array().unwrap().len(), 0);
}

#[test]
fn sincos_extrema_count() {
    let o = ppz(&[
        "extrema",
        "--builtin",
        "sincos",
        "--window",
        "-15:15",
        "--iters",
        "5",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["extrema"].as_array().unwrap().len(), 19);
    assert_eq!(v["finite_difference"]["eps"], 1e-6);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["zeros", "--builtin", "cos", "--window", "0:1", "--bogus"],
        vec!["zeros", "--fn", "x", "--builtin", "cos", "--window", "0:1"],
        vec!["zeros", "--window", "0:1"],
        vec!["zeros", "--fn", "y+1", "--window", "0:1"],
        vec!["zeros", "--fn", "x1+x2", "--window", "0:1"],
        vec!["zeros", "--builtin", "cos", "--window", "1:0"],
        vec![
            "zeros",
            "--builtin",
            "cos",
            "--window",
            "0:1",
            "--r-frac",
            "0.7",
        ],
        vec!["zeros", "--builtin", "nope", "--window", "0:1"],
        vec![
            "cox-envelope",
            "--builtin",
            "cos",
            "--window",
            "0:1",
            "--draws",
            "10",
        ],
    ] {
        let o = ppz(&args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn evaluation_error_exits_three() {
    let o = ppz(&["zeros", "--fn", "log(x)", "--window", "-1:1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn csv_output_and_out_file() {
    let dir = std::env::temp_dir().join(format!("ppz-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("zeros.csv");
    let o = ppz(&[
        "zeros",
        "--builtin",
        "cos",
        "--window",
        "-15:15",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,magnitude,achieved_tol,depth"));
    assert_eq!(lines.count(), 10);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn complex_roots_in_csv() {
    let o = ppz(&[
        "zeros",
        "--complex",
        "--fn",
        "(s-(0.5-1i))^2*(s-(1+0.5i))^3",
        "--window",
        "0:1.5,-1.5:1",
        "--K",
        "15",
        "--child-n",
        "1000",
        "--dedup-radius",
        "0.01",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("sigma,t,magnitude"));
    let roots: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').take(2).map(|c| c.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    for (re, im) in [(0.5, -1.0), (1.0, 0.5)] {
        assert!(
            roots.iter().any(|&(a, b)| (a - re).hypot(b - im) < 1e-4),
            "{roots:?}"
        );
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        let o = ppz(&[
            "zeros",
            "--builtin",
            "sincos",
            "--window",
            "-15:15",
            "--threads",
            threads,
        ]);
        let mut v = json(&o);
        v["wall_time"] = Value::Null;
        v
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn constraint_filters_zeros() {
    let o = ppz(&[
        "zeros",
        "--builtin",
        "cos",
        "--window",
        "-15:15",
        "--constraint",
        "x > 0",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let zeros = v["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 5);
    assert!(zeros
        .iter()
        .all(|z| z["location"][0].as_f64().unwrap() > 0.0));
    assert_eq!(v["function"]["constraint"], "x > 0");
}

#[test]
fn expected_count_report() {
    let o = ppz(&[
        "expected-count",
        "--builtin",
        "cos",
        "--window",
        "0:6.283185307179586",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let riemann = v["riemann"]["estimate"].as_f64().unwrap();
    let mc = &v["monte_carlo"];
    let (est, se) = (
        mc["estimate"].as_f64().unwrap(),
        mc["std_error"].as_f64().unwrap(),
    );
    assert!((riemann - est).abs() < 4.0 * se);
}

#[test]
fn cox_envelope_at_a_representable_zero() {
    let o = ppz(&[
        "cox-envelope",
        "--fn",
        "x-0.25",
        "--window",
        "0:1",
        "--grid",
        "5",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,lower,mean,upper"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[1], "0.25,1.0,1.0,1.0");
}

#[test]
fn repro_filters() {
    let o = ppz(&["repro", "--only", "gauss-*"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 3);

    let o = ppz(&["repro", "--only", "zz*"]);
    assert_eq!(code(&o), 2);

    let o = ppz(&["repro", "no-such-case"]);
    assert_eq!(code(&o), 2);

    let o = ppz(&["repro", "--list"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("eta-strip"));
}

#[test]
fn repro_json_summary() {
    let o = ppz(&["repro", "cos-zeros-10it", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v[0]["id"], "cos-zeros-10it");
    assert_eq!(v[0]["pass"], true);
}
