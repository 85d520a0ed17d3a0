use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringanneal")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(bin(&["optimize", "--N", "5"]).status.code(), Some(64));
    assert_eq!(bin(&["optimize", "--N", "6", "--T", "3"]).status.code(), Some(64));
    assert_eq!(bin(&["optimize", "--N", "5", "--T", "3", "--k-init", "4"]).status.code(), Some(64));
    assert_eq!(bin(&["no-such-command"]).status.code(), Some(64));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn optimize_writes_a_successful_record() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.json");
    let o = bin(&["optimize", "--N", "5", "--T", "12.5", "--c", "0.5", "--seed", "1", "--output", rec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rec).unwrap()).unwrap();
    assert_eq!(v["success"], true);
    assert_eq!(v["backend"], "statevector");
    assert!(v["E_final"].as_f64().unwrap() <= -2.5);
    assert_eq!(v["model"]["N"], 5);

    let trace = bin(&["trace", "--schedule", rec.to_str().unwrap(), "--grid", "51"]);
    assert_eq!(trace.status.code(), Some(0));
    let text = stdout(&trace);
    assert!(text.lines().any(|l| l.starts_with("# crossings_at_A_star: ")));
    let rows = data_rows(&text);
    assert_eq!(rows[0], "t,A,P0,P1,residual,gap");
    assert_eq!(rows.len(), 52);
    let p0: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((p0 - 1.0).abs() < 1e-9);

    let linear = stdout(&bin(&["trace", "--schedule", rec.to_str().unwrap(), "--grid", "201", "--linear"]));
    assert!(linear.contains("# crossings_at_A_star: 1\n"));
    assert!(linear.contains("# P0_P1_inversions: 1\n"), "{}", &linear[..600.min(linear.len())]);
}

#[test]
fn optimize_failure_exits_2() {
    let o = bin(&["optimize", "--N", "5", "--T", "0.5", "--restarts", "1", "--max-iter", "20", "--k-max", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["success"], false);
}

#[test]
fn dla_backend_is_routed() {
    let o = bin(&["optimize", "--N", "7", "--T", "1", "--backend", "dla", "--restarts", "1", "--max-iter", "10", "--k-max", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["backend"], "dla");
    let o = bin(&["optimize", "--N", "17", "--T", "1", "--statevector-limit", "15", "--restarts", "1", "--max-iter", "2", "--k-max", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["backend"], "dla");
}

#[test]
fn trace_refuses_large_rings() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.json");
    std::fs::write(&s, r#"{"T": 5.0, "points": [[2.5, 0.5]]}"#).unwrap();
    let o = bin(&["trace", "--schedule", s.to_str().unwrap(), "--N", "17"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("17"));
    let o = bin(&["trace", "--schedule", s.to_str().unwrap(), "--N", "5", "--grid", "3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn minimize_time_with_stub_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let args = ["minimize-time", "--N", "5", "--seed", "4", "--simulate-step-function", "10", "--csv", csv.to_str().unwrap()];
    assert_eq!(bin(&args).status.code(), Some(0));
    assert_eq!(bin(&args).status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1], rows[2]);
    let header: Vec<&str> = rows[0].split(',').collect();
    let col = header.iter().position(|h| *h == "T_min").unwrap();
    let t: f64 = rows[1].split(',').nth(col).unwrap().parse().unwrap();
    assert!((10.0..=12.5).contains(&t));
    assert!(text.starts_with("# tool: ringanneal"));
}

#[test]
fn minimize_time_cap_exits_2() {
    let o = bin(&["minimize-time", "--N", "5", "--simulate-step-function", "100", "--cap", "50"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("exceeds-cap"));
}

#[test]
fn baseline_outputs() {
    let o = bin(&["baseline", "--N", "5", "--cap", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout(&o).trim(), "exceeds cap");
    let o = bin(&["baseline", "--N", "5", "--c", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 560.0);
}

#[test]
fn dla_dim_lists_dimensions() {
    let o = bin(&["dla-dim", "--N", "3", "5", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "N,dimension\n3,18\n5,50\n7,98\n");
}

fn write_spec(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
}

#[test]
fn campaign_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    write_spec(&spec, r#"{"N": [5], "c": [0.5], "repetitions": 2, "seed": 11, "restarts": 1, "max_iter": 60, "k_max": 7}"#);
    let run = |out: &str| {
        let o = bin(&["campaign", spec.to_str().unwrap(), "--output-dir", dir.path().join(out).to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join(out).join("results.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(data_rows(&text).len(), 3);
    for f in ["summary.csv", "fit.csv", "timings.csv"] {
        assert!(dir.path().join("a").join(f).exists());
    }

    write_spec(&spec, r#"{"N": [], "c": [0.5], "repetitions": 2, "seed": 11}"#);
    let o = bin(&["campaign", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
}
