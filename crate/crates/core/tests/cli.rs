use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kdc::harness::{read_records, COLUMNS};

const CONFIG: &str = r#"{"dim":50,"gamma":1.0,"zeta":0.5,"source_norm":1.0,"noise_sd":0.3,
"regime":"cor1.1","scale":0.3,"n_list":[64,128,256],"m_rule":2,"replications":2,"base_seed":7}"#;

fn kdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdc")).args(args).env("KDC_THREADS", "2").output().expect("spawn kdc")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_writes_records_and_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("runs").join("records.csv");
    let o = kdc(&["sweep", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    let recs = read_records(text.as_bytes()).unwrap();
    assert_eq!(recs.iter().map(|r| r.n_total).collect::<Vec<_>>(), [64, 128, 256]);
    assert!(recs.iter().all(|r| r.m == 2 && r.error.is_none() && r.risk_mean > 0.0));

    let table = std::fs::read_to_string(dir.path().join("runs").join("rate_fit.csv")).unwrap();
    assert!(table.starts_with("N,risk_mean,risk_se,log_N,log_risk"));
}

fn strip_wall(text: &str) -> String {
    let col = COLUMNS.iter().position(|c| *c == "wall_ms").unwrap();
    text.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f[col] = "";
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sweep_is_reproducible_up_to_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(kdc(&["sweep", "--config", s(&cfg), "--out", s(&a)]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_kdc"))
        .args(["sweep", "--config", s(&cfg), "--out", s(&b)])
        .env("KDC_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let ta = std::fs::read_to_string(a).unwrap();
    let tb = std::fs::read_to_string(b).unwrap();
    assert_eq!(strip_wall(&ta), strip_wall(&tb));
}

#[test]
fn seed_flag_changes_the_draw() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = kdc(&["sample", "--config", s(&cfg), "--n", "16"]);
    let b = kdc(&["sample", "--config", s(&cfg), "--n", "16", "--seed", "8"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
    let ds = kdc::Dataset::read_csv(&a.stdout[..]).unwrap();
    assert_eq!(ds.len(), 16);
    assert!(ds.inputs.iter().all(|x| (0.0..=1.0).contains(x)));
}

#[test]
fn gen_problem_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = kdc(&["gen-problem", "--config", s(&cfg)]);
    assert!(o.status.success());
    let p = kdc::SpectralProblem::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(p.dim, 50);
    assert!((p.source_norm_sq() - 1.0).abs() < 1e-12);
}

#[test]
fn train_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = kdc(&["train", "--config", s(&cfg), "--n", "32"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("partition,x,alpha"));
    assert_eq!(lines.count(), 32);
    assert!(String::from_utf8_lossy(&o.stderr).contains("excess_risk="));
}

#[test]
fn decompose_reports_all_components() {
    let dir = tempfile::tempdir().unwrap();
    let body = CONFIG.replace(r#""base_seed":7}"#, r#""base_seed":7,"decomp_n_data":50,"decomp_n_index":20}"#);
    let cfg = write_config(dir.path(), &body);
    let o = kdc(&["decompose", "--config", s(&cfg), "--n", "32"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["total", "bias", "sample_var", "comp_var", "residual"]);
}

#[test]
fn rate_fit_reads_a_records_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let rec = dir.path().join("records.csv");
    assert!(kdc(&["sweep", "--config", s(&cfg), "--out", s(&rec)]).status.success());
    let o = kdc(&["rate-fit", "--config", s(&cfg), "--records", s(&rec)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("slope"));
}

#[test]
fn validate_filters_passes_for_every_filter() {
    let o = kdc(&["validate-filters", "--lambda-points", "40", "--u-points", "40"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn exit_codes_distinguish_errors_from_failures() {
    let dir = tempfile::tempdir().unwrap();
    // missing config is a usage error
    assert_eq!(kdc(&["sweep"]).status.code(), Some(2));
    // unknown keys are rejected
    let bad = write_config(dir.path(), r#"{"gamma":1.0,"bogus":1}"#);
    assert_eq!(kdc(&["sweep", "--config", s(&bad)]).status.code(), Some(2));
    // a regime whose preconditions fail is recorded per row, and the run fails
    let cfg = write_config(
        dir.path(),
        r#"{"dim":10,"gamma":0.5,"zeta":0.1,"noise_sd":0.3,"regime":"cor2.1","n_list":[64,128]}"#,
    );
    let out = dir.path().join("r.csv");
    let o = kdc(&["sweep", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let recs = read_records(std::fs::File::open(out).unwrap()).unwrap();
    assert!(recs.iter().all(|r| r.error.is_some()));
}
