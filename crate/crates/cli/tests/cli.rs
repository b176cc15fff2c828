use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn iet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iet")).args(args).env_remove("IET_PRECISION_BITS").output().expect("spawn iet")
}

fn ok_json(args: &[&str]) -> Value {
    let o = iet(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn ok_text(args: &[&str]) -> String {
    let o = iet(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn two_letter_class_is_a_single_node() {
    let v = ok_json(&["rauzy-class", "--d", "2"]);
    assert_eq!(v["size"], 1);
}

#[test]
fn four_letter_rotation_class() {
    let csv = ok_text(&["rauzy-class", "--d", "4", "--rotation", "--format", "csv"]);
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().any(|x| &x[1] == "A B C D / B C D A"));
    for x in &rows {
        assert_eq!(&x[2] == "true", monodromy_is_a_shift(&x[1]), "{}", &x[1]);
    }
}

fn monodromy_is_a_shift(perm: &str) -> bool {
    let (top, bot) = perm.split_once('/').unwrap();
    let top: Vec<&str> = top.split_whitespace().collect();
    let bot: Vec<&str> = bot.split_whitespace().collect();
    let d = top.len();
    let m: Vec<usize> = top.iter().map(|a| bot.iter().position(|b| b == a).unwrap()).collect();
    (0..d).any(|k| (0..d).all(|i| m[i] == (i + k) % d))
}

#[test]
fn golden_orbit_has_fibonacci_heights() {
    let csv = ok_text(&["orbit", "--perm", "A B / B A", "--lengths", "golden", "--blocks", "12", "--format", "csv"]);
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let hdr = r.headers().unwrap().clone();
    let hi = hdr.iter().position(|h| h == "heights").unwrap();
    let ti = hdr.iter().position(|h| h == "tiling").unwrap();
    let fib = {
        let mut f = vec![1u64, 1];
        while f.len() < 40 {
            let n = f.len();
            f.push(f[n - 1] + f[n - 2]);
        }
        f
    };
    let mut n = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[ti], "1");
        for h in rec[hi].split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty()) {
            assert!(fib.contains(&h.parse::<u64>().unwrap()), "height {h}");
        }
        n += 1;
    }
    assert_eq!(n, 13);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = ["orbit", "--d", "4", "--rotation", "--seed", "11", "--blocks", "30", "--format", "csv"];
    assert_eq!(ok_text(&a), ok_text(&a));
    let b = ["scan", "--d", "3", "--seed", "5", "--samples", "4", "--blocks", "200"];
    assert_eq!(ok_text(&b), ok_text(&b));
}

#[test]
fn continued_fractions_and_partitions() {
    let v = ok_json(&["cf", "--alpha", "7/10"]);
    assert_eq!(v["quotients"], serde_json::json!(["1", "2", "3"]));
    let p = ok_json(&["partition", "--alpha", "golden", "--n", "3"]);
    let counts: Vec<u64> = p["counts"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(counts, vec![3, 2]);
}

#[test]
fn rotation_number_of_a_rational_rotation() {
    let v = ok_json(&["rotation-number", "--alpha", "2/7", "--max-iter", "2000"]);
    let rho: f64 = v["estimate"].as_str().unwrap().parse().unwrap();
    assert!((rho - 2.0 / 7.0).abs() < 1e-3, "{rho}");
}

#[test]
fn two_letter_exponent_is_near_its_known_value() {
    let v = ok_json(&["lyapunov", "--d", "2", "--samples", "60", "--blocks", "300", "--seed", "7"]);
    let top = v["theta_top"].as_f64().unwrap();
    assert!((top / 1.18657 - 1.0).abs() < 0.05, "{top}");
}

#[test]
fn exit_codes() {
    assert_eq!(iet(&["rauzy-class", "--perm", "{\"top\": [1"]).status.code(), Some(2));
    assert_eq!(iet(&["rauzy-class", "--perm", "A B / A B"]).status.code(), Some(2));
    assert_eq!(iet(&["lyapunov", "--d", "3"]).status.code(), Some(2));
    assert_eq!(iet(&["scan", "--d", "3", "--seed", "1", "--samples", "0"]).status.code(), Some(2));
    assert_eq!(iet(&["cf", "--alpha", "golden", "--terms", "500", "--precision-bits", "256"]).status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_iet"))
        .args(["cf", "--alpha", "golden", "--terms", "500"])
        .env("IET_PRECISION_BITS", "1024")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn manifest_digests_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["scan", "--d", "3", "--seed", "2", "--samples", "5", "--blocks", "300", "--out"];
    let o = iet(&[&args[..], &[a.to_str().unwrap()]].concat());
    assert!(o.status.success());
    let m = read_json(&a.join("manifest.json"));
    assert_eq!(m["command"], "scan");
    assert_eq!(m["instances"].as_array().unwrap().len(), 5);
    let bytes = std::fs::read(a.join("scan.json")).unwrap();
    let want = {
        use sha2::Digest;
        hex::encode(sha2::Sha256::digest(&bytes))
    };
    assert_eq!(m["outputs"]["scan.json"], want.as_str());
    assert_eq!(std::fs::read_dir(a.join("instances")).unwrap().count(), 5);
    let v = read_json(&a.join("scan.json"));
    assert!(v["fraction_with_hit"].is_number());

    let o = iet(&["scan", "--config", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(b.join("scan.json")).unwrap(), bytes);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"alpha": "7/10"}"#).unwrap();
    let v = ok_json(&["cf", "--alpha", "1/3", "--config", cfg.to_str().unwrap()]);
    assert_eq!(v["quotients"], serde_json::json!(["1", "2", "3"]));
    std::fs::write(&cfg, r#"{"no_such_key": 1}"#).unwrap();
    assert_eq!(iet(&["cf", "--alpha", "1/3", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn dimension_records_precision_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("low");
    let o = iet(&["dimension", "--d", "3", "--samples", "2", "--seed", "3", "--precision-bits", "64", "--blocks", "160", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out.join("manifest.json"));
    for inst in m["instances"].as_array().unwrap() {
        assert_eq!(inst["status"], "precision_exhausted");
    }
}

#[test]
fn zero_slope_trace_stays_at_one() {
    let csv = ok_text(&["dimension", "--d", "3", "--samples", "1", "--seed", "3", "--omega", "0,0,0", "--blocks", "80", "--format", "csv"]);
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let last = r.records().last().unwrap().unwrap();
    assert_eq!(&last[1], "80");
    let w: f64 = last[3].parse().unwrap();
    assert!((w - 1.0).abs() < 1e-9, "{w}");
}
