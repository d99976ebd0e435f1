use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vbspool"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn homogeneous(dir: &TempDir, count: usize, k: usize, load: f64, n: usize) -> PathBuf {
    write(
        dir,
        &format!("pool-{count}-{k}-{n}.json"),
        &format!(
            r#"{{"classes":[{{"count":{count},"radio_servers":{k},"load":{load},"discipline":"per_session"}}],"compute_servers":{n}}}"#
        ),
    )
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// `(N, class, p_overall)` from sweep CSV.
fn csv_points(out: &Output) -> Vec<(usize, usize, f64, String)> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with("# "));
    assert_eq!(lines.next(), Some("N,N_norm,class,p_radio,p_compute,p_overall,method"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap(), f[5].parse().unwrap(), f[6].to_string())
        })
        .collect()
}

fn erlang_b(a: f64, k: usize) -> f64 {
    (1..=k).fold(1.0, |b, i| a * b / (i as f64 + a * b))
}

#[test]
fn blocking_report_with_header() {
    let dir = TempDir::new().unwrap();
    let cfg = homogeneous(&dir, 40, 30, 20.0, 900);
    let doc = json(&run(&["blocking", "--engine", "recursive"], &cfg));
    let r = &doc["result"];
    let radio = r["per_class_radio"][0].as_f64().unwrap();
    let comp = r["computational"].as_f64().unwrap();
    let overall = r["per_class_overall"][0].as_f64().unwrap();
    assert!((radio + comp - overall).abs() < 1e-15);
    assert_eq!(r["method"], "recursive");
    let h = &doc["header"];
    assert_eq!(h["tool"], "vbspool");
    assert_eq!(h["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(h["config"]["compute_servers"], 900);
    assert_eq!(h["config"]["classes"][0]["arrival_rate"], 20.0);
}

#[test]
fn engine_preconditions_exit_3() {
    let dir = TempDir::new().unwrap();
    let big = homogeneous(&dir, 40, 30, 20.0, 900);
    let out = run(&["blocking", "--engine", "exact"], &big);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("state space"));
    let below_mean = homogeneous(&dir, 40, 30, 20.0, 700);
    let out = run(&["blocking", "--engine", "approx"], &below_mean);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("approximation valid only"));
    let out = run(&["sweep", "--engine", "exact", "--sweep-n", "1:10"], &big);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["blocking"], &missing).status.code(), Some(4));
    let bad = write(&dir, "bad.json", r#"{"classes":[{"count":0,"radio_servers":3,"load":2,"discipline":"per_session"}],"compute_servers":4}"#);
    let out = run(&["blocking"], &bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("class 1: count must be ≥ 1"));
    let garbage = write(&dir, "garbage.json", "{");
    assert_eq!(run(&["blocking"], &garbage).status.code(), Some(2));
    let good = homogeneous(&dir, 2, 3, 1.0, 4);
    assert_eq!(run(&["sweep", "--sweep-n", "5:1"], &good).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--sweep-n", "1:5:0"], &good).status.code(), Some(2));
    assert_eq!(run(&["knee", "--delta", "-1"], &good).status.code(), Some(2));
    assert_eq!(run(&["blocking", "--engine", "magic"], &good).status.code(), Some(2));
    let unwritable = dir.path().join("no/such/dir/out.json");
    let out = bin()
        .args(["blocking", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&unwritable)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let out = bin().env("VBSPOOL_THREADS", "0").args(["blocking", "--config"]).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let cfg = homogeneous(&dir, 10, 5, 3.0, 40);
    let args = ["sweep", "--sweep-n", "10:50:5", "--config"];
    let one = bin().env("VBSPOOL_THREADS", "1").args(args).arg(&cfg).output().unwrap();
    let four = bin().env("VBSPOOL_THREADS", "4").args(args).arg(&cfg).output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn sweep_reproduces_real_time_knee_curve() {
    let dir = TempDir::new().unwrap();
    let cfg = homogeneous(&dir, 40, 30, 20.0, 900);
    let rows = csv_points(&run(&["sweep", "--sweep-n", "794:1200:8", "--engine", "recursive,approx"], &cfg));
    let recursive: Vec<_> = rows.iter().filter(|r| r.3 == "recursive").collect();
    let approx: Vec<_> = rows.iter().filter(|r| r.3 == "approx").collect();
    assert_eq!(recursive.len(), 51);
    assert!(!approx.is_empty());
    assert!(rows.windows(2).all(|w| (w[0].0, w[0].1) <= (w[1].0, w[1].1)));
    assert!(recursive.windows(2).all(|w| w[1].2 <= w[0].2 * (1.0 + 1e-11)));
    let plateau = recursive.last().unwrap().2;
    assert!((plateau - erlang_b(20.0, 30)).abs() < 1e-6);
    assert!(recursive[0].2 > 3.0 * plateau);
}

#[test]
fn sweep_heterogeneous_pool_plateaus() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "fig5.json",
        r#"{"classes":[{"count":20,"radio_servers":30,"load":20,"discipline":"per_session"},
            {"count":20,"radio_servers":28,"load":20,"discipline":"per_session"}],"compute_servers":1000}"#,
    );
    let rows = csv_points(&run(&["sweep", "--sweep-n", "500:1160:20"], &cfg));
    let at = |n: usize, class: usize| rows.iter().find(|r| r.0 == n && r.1 == class).unwrap().2;
    assert!((at(1160, 1) - erlang_b(20.0, 30)).abs() < 1e-6);
    assert!((at(1160, 2) - erlang_b(20.0, 28)).abs() < 1e-6);
    assert!(at(1160, 1) < 1e-2 && at(1160, 2) < 2e-2 && at(1160, 2) > 1e-2);
    assert!((at(500, 1) - at(500, 2)).abs() < 1e-3);
}

#[test]
fn knee_reports() {
    let dir = TempDir::new().unwrap();
    let m50 = homogeneous(&dir, 50, 30, 20.0, 1500);
    let g = json(&run(&["knee", "--delta", "1e-4", "--method", "exact-search"], &m50));
    assert!(g["result"]["achieved_gain_fraction"].as_f64().unwrap() >= 0.75);
    assert_eq!(g["header"]["delta"], 1e-4);
    let m40 = homogeneous(&dir, 40, 30, 20.0, 1200);
    let g = json(&run(&["knee"], &m40));
    assert!(1.0 - g["result"]["knee_normalized"].as_f64().unwrap() > 0.20);
    assert!(g["result"]["utilization_limit"].as_f64().unwrap() < 1.0);
    assert!(g["result"]["regime"].is_string());
    let g = json(&run(&["knee", "--delta", "1"], &m40));
    assert_eq!(g["result"]["knee_servers"], 1);
}

#[test]
fn knee_position_falls_with_pool_size() {
    let dir = TempDir::new().unwrap();
    let cfg = homogeneous(&dir, 10, 30, 20.0, 300);
    let doc = json(&run(&["knee", "--sweep-pool", "1:8", "--method", "approx"], &cfg));
    let rows = doc["result"].as_array().unwrap();
    let knees: Vec<f64> = rows.iter().map(|r| r["knee_normalized"].as_f64().unwrap()).collect();
    let eta = rows[0]["utilization_limit"].as_f64().unwrap();
    assert!(knees.windows(2).all(|w| w[1] < w[0]), "{knees:?}");
    assert!(knees.iter().all(|k| *k > eta));
}

#[test]
fn simulate_is_reproducible_and_within_ci() {
    let dir = TempDir::new().unwrap();
    let cfg = homogeneous(&dir, 2, 3, 1.0, 4);
    let args = ["simulate", "--seed", "42", "--replications", "2"];
    let a = run(&args, &cfg);
    let b = run(&args, &cfg);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc = json(&a);
    assert_eq!(doc["header"]["seed"], 42);
    assert!(doc["header"]["generator"].as_str().unwrap().contains("ChaCha8"));
    let stats = &doc["result"]["stats"];
    let offered = stats["offered"][0].as_u64().unwrap();
    assert!(offered > 900_000);
    // exact answer from the 13-state enumeration
    let exact_overall = {
        let w = [1.0, 1.0, 0.5, 1.0 / 6.0];
        let mut z = 0.0;
        let mut blocked = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i + j <= 4 {
                    let p = w[i] * w[j];
                    z += p;
                    if i + j == 4 || i == 3 {
                        blocked += p;
                    }
                }
            }
        }
        blocked / z
    };
    let est = stats["blocking_estimates"][0]["overall"]["value"].as_f64().unwrap();
    let sigma = (exact_overall * (1.0 - exact_overall) / offered as f64).sqrt();
    assert!((est - exact_overall).abs() < 4.0 * sigma, "{est} vs {exact_overall}");
}

#[test]
fn replications_shrink_interval() {
    let dir = TempDir::new().unwrap();
    let cfg = homogeneous(&dir, 2, 3, 1.0, 4);
    let hw = |reps: &str| {
        let doc = json(&run(&["simulate", "--horizon", "2000", "--replications", reps], &cfg));
        doc["result"]["stats"]["blocking_estimates"][0]["overall"]["half_width"].as_f64().unwrap()
    };
    let ratio = hw("8") / hw("1");
    assert!((ratio - 1.0 / 8f64.sqrt()).abs() < 0.05, "{ratio}");
}

#[test]
fn csv_for_single_blocking_and_out_file() {
    let dir = TempDir::new().unwrap();
    let cfg = homogeneous(&dir, 2, 3, 1.0, 4);
    let out_path = dir.path().join("r.csv");
    let out = bin()
        .args(["blocking", "--engine", "exact", "--format", "csv", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(out_path).unwrap();
    assert!(text.starts_with("# tool: vbspool\n# version: "));
    assert!(text.contains("# config: {\"classes\""));
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("4,0.666666666667,1,"), "{last}");
    assert!(last.ends_with(",exact"));
}
