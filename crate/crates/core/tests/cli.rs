use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asd-landscape")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_spec(dir: &Path, name: &str, target: &str) -> String {
    let path = dir.join(name);
    let o = bin(&["synth", "--target", target, "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn so3_crit_table() {
    let o = bin(&["so3", "crit", "--M", "5 0 0 0 2 0 0 0 1", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    let vals: Vec<f64> = v["critical"].as_array().unwrap().iter().map(|c| c["value"].as_f64().unwrap()).collect();
    assert_eq!(vals.len(), 4);
    for (a, b) in vals.iter().zip([8.0, 2.0, -4.0, -6.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    let text = stdout(&bin(&["so3", "crit", "--M", "5,0,0,0,2,0,0,0,1"]));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn so3_crit_reads_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("m.txt");
    std::fs::write(&f, "[[3, 0, 0], [0, 2, 0], [0, 0, -1]]").unwrap();
    let v = json(&bin(&["so3", "crit", "--M", f.to_str().unwrap(), "--format", "json"]));
    assert_eq!(v["critical"][2]["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn synth_diag_target() {
    let o = bin(&["synth", "--target", "diag:3,2,1", "--p", "0,0,0,0"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["version"], 1);
    for (k, d) in [3.0, 2.0, 1.0].iter().enumerate() {
        let a = v["A"][k][k].as_f64().unwrap();
        assert!((a - d / (2.0 * PI * PI)).abs() < 1e-14, "{a}");
    }
    assert_eq!(v["A"][0][1].as_f64().unwrap(), 0.0);
}

#[test]
fn synth_then_scan_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", "diag:3,2,1");
    let o = bin(&["landscape", "scan", "--spec", &spec, "--grid", "1"]);
    assert!(o.status.success());
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header[..9], ["p1", "p2", "p3", "p4", "F", "mu1", "mu2", "mu3", "detM"]);
    assert_eq!(header.len(), 21);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let get = |k: usize| rows[0][k].parse::<f64>().unwrap();
    for (k, want) in [(5, 9.0), (6, 4.0), (7, 1.0), (8, 6.0)] {
        assert!((get(k) - want).abs() < 1e-5 * want, "{} vs {want}", get(k));
    }
}

#[test]
fn scan_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", "diag:1,1,1");
    let out = dir.path().join("scan.csv");
    let o = bin(&["landscape", "scan", "--spec", &spec, "--grid", "2", "--d0", "0.6", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1 + 16);
}

#[test]
fn field_json() {
    let v = json(&bin(&["field", "--p", "0,0,0,0", "--x", "0.1,0.2,0.3,0.4"]));
    assert_eq!(v["alpha"][2].as_f64().unwrap(), 0.3);
    assert_eq!(v["dh_asd"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_subset_json() {
    let o = bin(&["verify", "--only", "4,7", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    let f0 = v["F0"].as_f64().unwrap();
    assert!((f0 - 12.0 * PI * PI).abs() < 1e-8 * f0);
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_coarse_quadrature_fails() {
    let o = bin(&["verify", "--only", "5", "--quad-radial", "2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    let c = &v["checks"][0];
    assert_eq!(c["passed"], false);
    assert!(c["detail"].as_str().unwrap().contains("not converged"));
}

#[test]
fn configuration_errors_exit_2() {
    assert_eq!(bin(&["verify", "--only", "4", "--quad-radial", "1"]).status.code(), Some(2));
    assert_eq!(bin(&["verify", "--only", "99"]).status.code(), Some(2));
    assert_eq!(bin(&["nonsense"]).status.code(), Some(2));
    assert_eq!(bin(&["reduce", "window", "--spec", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(bin(&["so3", "crit", "--M", "1 2 3"]).status.code(), Some(2));
    assert_eq!(bin(&["so3", "crit", "--M", "5 0 0 0 2 0 0 0 1", "--format", "csv"]).status.code(), Some(2));
}

#[test]
fn operation_errors_exit_1() {
    let o = bin(&["field", "--p", "1.5,0,0,0", "--x", "0,0,0,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn reduce_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", "diag:5,2,1");
    let args = ["reduce", "stilde", "--spec", &spec, "--eps", "0.01", "--seed", "4"];
    let (a, b) = (bin(&args), bin(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["inclusion_holds"], true);
    assert_eq!(v["samples"], 100);
    let w = json(&bin(&["reduce", "window", "--spec", &spec, "--probe", "2"]));
    assert!(w["window"]["D1"].as_f64().unwrap() < w["window"]["D2"].as_f64().unwrap());
    let big = bin(&["reduce", "stilde", "--spec", &spec, "--eps", "0.01", "--eta", "9"]);
    assert_eq!(big.status.code(), Some(1));
}

#[test]
fn perturb_separates_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", "diag:1,1,1");
    let out = dir.path().join("p.json");
    let o = bin(&["perturb", "--spec", &spec, "--mu", "0.01", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let scan = bin(&["landscape", "scan", "--spec", out.to_str().unwrap(), "--grid", "1", "--format", "json"]);
    let v = json(&scan);
    let mu = &v["items"][0]["m"]["spectrum"]["mu"];
    let mu: Vec<f64> = (0..3).map(|k| mu[k].as_f64().unwrap()).collect();
    assert!(mu[0] > mu[1] && mu[1] > mu[2] && mu[2] > 0.0, "{mu:?}");
}
