use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invsub"))
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn stable_half() -> PathBuf {
    scratch("stable_half.json", r#"{"schema_version": 1, "kind": "stable", "alpha": 0.5}"#)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn header(o: &Output) -> String {
    stdout(o).lines().next().unwrap_or_default().to_string()
}

#[test]
fn invert_header_and_value() {
    let d = stable_half();
    let o = run(&["invert", "--descriptor", d.to_str().unwrap(), "--x", "1", "--t", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(header(&o), "x,t,k,l,target,method,value,error_scale,mantissa,log_scale,error");
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let v: f64 = row[6].parse().unwrap();
    let exact = (-0.25f64).exp() / std::f64::consts::PI.sqrt();
    assert!((v / exact - 1.0).abs() < 1e-9, "{v} vs {exact}");
    // 17 significant digits in scientific notation.
    let mantissa = row[6].split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn invert_json_is_one_object_per_query() {
    let d = stable_half();
    let o = run(&["invert", "--descriptor", d.to_str().unwrap(), "--x", "0.5,1", "--t", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    for l in lines {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v["value"].as_f64().unwrap() > 0.0);
        assert!(v["diagnostics"].is_object());
    }
}

#[test]
fn invert_batch_file() {
    let d = stable_half();
    let batch = scratch("batch.csv", "x,t,k,l\n0.5,1,0,0\n1,2,0,1\n");
    let o = run(&["invert", "--descriptor", d.to_str().unwrap(), "--batch", batch.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][3], "1");
}

#[test]
fn series_matches_invert() {
    let d = stable_half();
    let args = |cmd: &'static str| {
        run(&[cmd, "--descriptor", d.to_str().unwrap(), "--target", "g", "--x", "2", "--t", "0.5", "--format", "json"])
    };
    let a: serde_json::Value = serde_json::from_str(stdout(&args("series")).trim()).unwrap();
    let b: serde_json::Value = serde_json::from_str(stdout(&args("invert")).trim()).unwrap();
    let (a, b) = (a["value"].as_f64().unwrap(), b["value"].as_f64().unwrap());
    assert!((a / b - 1.0).abs() < 1e-8, "{a} vs {b}");
}

#[test]
fn saddle_json_fields() {
    let d = stable_half();
    let o = run(&["saddle", "--descriptor", d.to_str().unwrap(), "--x", "100", "--t", "100", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    for key in ["c", "leading", "error_scale", "regime"] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    assert_eq!(v["c"].as_f64().unwrap(), 0.25);
    assert_eq!(v["regime"], "interior");
}

#[test]
fn saddle_domain_error_exits_one() {
    let d = scratch("gamma.json", r#"{"schema_version": 1, "kind": "gamma"}"#);
    let o = run(&["saddle", "--descriptor", d.to_str().unwrap(), "--x", "1", "--t", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",domain"));
    assert!(stderr(&o).contains("domain"));
}

#[test]
fn saddle_probe_header() {
    let d = stable_half();
    let o = run(&["saddle-probe", "--descriptor", d.to_str().unwrap(), "--schedule", "x", "--grid", "1e2:1e3:3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(header(&o), "x,t,a_star,regime,leading,error_scale,reference,ratio,error");
    let out = stdout(&o);
    let blocks: Vec<&str> = out.split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    assert!(blocks[1].starts_with("fitted_rate,predicted_rate,ratio_of_fits,fitted_exponent\n"));
}

#[test]
fn conditions_tables() {
    let d = stable_half();
    let o = run(&["conditions", "--descriptor", d.to_str().unwrap(), "--check", "a1,a2,dr", "--grid", "10:1e7:24"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let blocks: Vec<&str> = out.split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    assert!(blocks[0].starts_with("condition,x,ratio\n"));
    assert_eq!(blocks[0].lines().count(), 1 + 3 * 24);
    let verdicts: Vec<&str> = blocks[1].lines().collect();
    assert_eq!(verdicts[0], "condition,verdict,estimate,trend");
    assert!(verdicts[1].starts_with("A1,supported,"));
    assert!(verdicts[2].starts_with("A2,supported,"));
    assert!(verdicts[3].starts_with("DR,supported,"));
}

#[test]
fn mc_header_and_thread_independence() {
    let d = stable_half();
    let args = |threads: &'static str| {
        run(&[
            "mc", "--descriptor", d.to_str().unwrap(), "--t", "1", "--grid", "0.5:1.5:3", "--paths", "2e4", "--seed", "9",
            "--threads", threads,
        ])
    };
    let (a, b) = (args("1"), args("3"));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(header(&a), "x,estimate,ci_lo,ci_hi,creep_fraction");
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 4);
}

#[test]
fn compare_stable_grid_agrees() {
    let cfg = scratch(
        "compare_stable.json",
        r#"{"schema_version": 1,
            "descriptor": {"kind": "stable", "alpha": 0.5},
            "target": "f", "x": [0.5, 1, 2], "t": [0.5, 1, 2], "methods": "all"}"#,
    );
    let o = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(header(&o), "x,t,k,l,target,method,value,error_scale,agree,error");
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 9 * 5);
    assert!(rows.iter().all(|r| r.ends_with(",true,")));
}

#[test]
fn compare_saddle_domain_is_per_row() {
    let cfg = scratch(
        "compare_gamma.json",
        r#"{"schema_version": 1, "descriptor": {"kind": "gamma"}, "x": [1], "t": [2], "methods": ["bromwich", "saddle"]}"#,
    );
    let o = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains(",saddle,,,true,saddle: domain"));
    assert!(out.lines().nth(1).unwrap().contains(",bromwich,2."));
}

#[test]
fn compare_disagreement_exits_one() {
    // A 1% confidence band; at the default seed it misses the exact value.
    let cfg = scratch(
        "compare_strict.json",
        r#"{"schema_version": 1, "descriptor": {"kind": "stable", "alpha": 0.5}, "x": [0.5], "t": [1],
            "methods": ["bromwich", "mc"], "mc": {"paths": 2000, "ci_level": 0.01}, "tolerance": {"rel": 0}}"#,
    );
    let o = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",false,"));
    assert!(stderr(&o).contains("0/1 rows agree"));
}

#[test]
fn malformed_kind_exits_two_with_key_path() {
    let cfg = scratch(
        "compare_bad.json",
        r#"{"schema_version": 1, "descriptor": {"kind": "stabel", "alpha": 0.5}, "x": [1], "t": [1]}"#,
    );
    let o = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("descriptor.kind"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["invert"]).status.code(), Some(2));
    assert_eq!(run(&["invert", "--bogus"]).status.code(), Some(2));
    let d = stable_half();
    assert_eq!(run(&["invert", "--descriptor", d.to_str().unwrap(), "--x", "a:b:c"]).status.code(), Some(2));
    assert_eq!(run(&["mc", "--descriptor", d.to_str().unwrap(), "--target", "G"]).status.code(), Some(2));
}

#[test]
fn study_from_config() {
    let cfg = scratch(
        "study.json",
        r#"{"schema_version": 1, "descriptor": {"kind": "stable", "alpha": 0.5},
            "schedule": "x", "x": {"lo": 100, "hi": 10000, "n": 5, "spacing": "log"}, "l": 1}"#,
    );
    let o = run(&["study", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["probe"]["rows"].as_array().unwrap().len(), 5);
    assert!(v["fitted_rate"].as_f64().unwrap() < 0.0);
}

#[test]
fn out_flag_writes_file() {
    let d = stable_half();
    let dest = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("out.csv");
    let _ = std::fs::remove_file(&dest);
    let o = run(&["invert", "--descriptor", d.to_str().unwrap(), "--out", dest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    assert!(std::fs::read_to_string(&dest).unwrap().starts_with("x,t,"));
}

#[test]
fn poly_reports_exponent() {
    let d = scratch("gamma_poly.json", r#"{"schema_version": 1, "kind": "gamma"}"#);
    let o = run(&["poly", "--descriptor", d.to_str().unwrap(), "--n", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let summary = out.split("\n\n").nth(1).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let exponent: f64 = row[3].parse().unwrap();
    assert!((exponent - 3.0).abs() < 0.05, "{exponent}");
}
