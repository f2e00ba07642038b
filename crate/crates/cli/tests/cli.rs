//! End-to-end tests of the batch front end: exit codes, report files, and
//! byte-identical reruns for a fixed (config, seed) pair.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_degenlab"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("degenlab-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn audit_small_run_passes() {
    let out = tmp_dir("audit");
    let status = bin()
        .args([
            "audit", "--op", "pucci+", "--alpha", "1", "--samples", "500", "--seed", "0", "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = String::from_utf8(read(&out, "audit.csv")).unwrap();
    assert!(csv.starts_with("check,detail,worst,threshold,pass"));
    assert!(csv.contains("ellipticity_envelope"));
    assert!(csv.contains("duality"));
}

#[test]
fn audit_is_byte_deterministic() {
    let out1 = tmp_dir("det1");
    let out2 = tmp_dir("det2");
    for out in [&out1, &out2] {
        let status = bin()
            .args([
                "audit", "--op", "scalar-coeff", "--coeff", "wave", "--alpha", "1.5",
                "--samples", "400", "--seed", "42", "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    assert_eq!(read(&out1, "audit.csv"), read(&out2, "audit.csv"));
}

#[test]
fn missing_config_is_usage_error() {
    let status = bin()
        .args(["solve", "--config", "definitely-missing.cfg"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("degenlab <command>"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = bin().args(["audit", "--frobnicate", "9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_command_is_usage_error() {
    let out = bin().args(["transmogrify"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_end_to_end_with_config() {
    let out = tmp_dir("solve");
    let cfg = out.join("problem.cfg");
    std::fs::write(
        &cfg,
        "[operator]\nfamily=pseudo-p\np=4\n[domain]\nkind=box\nlo=0,0\nhi=1,1\n[grid]\nh=0.0625\n[problem]\nforcing=one\nboundary=zero\ntol=1e-5\nmax_iter=2000000\n",
    )
    .unwrap();
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let field = read(&out, "field.csv");
    assert!(field.starts_with(b"x0,x1,value"));
    let bin_data = read(&out, "field.bin");
    let magic = f64::from_le_bytes(bin_data[0..8].try_into().unwrap());
    assert_eq!(magic, 1145718321.0);
    assert!(read(&out, "residuals.csv").starts_with(b"sweep,residual"));
}

#[test]
fn barrier_audit_with_tiny_amplitude_fails_mathematically() {
    let out = tmp_dir("barrier-fail");
    let status = bin()
        .args([
            "barrier-audit", "--alpha", "1", "--samples", "200", "--f-inf", "50", "--m", "0.001",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "a failed check reports exit code 1");
    let csv = String::from_utf8(read(&out, "barrier_summary.csv")).unwrap();
    assert!(csv.contains("false"));
}

#[test]
fn pinch_scan_and_certificate_pass() {
    let out = tmp_dir("scan");
    let status = bin()
        .args(["prop4-scan", "--alpha", "3", "--gamma", "0.5", "--points", "200", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(read(&out, "pinch_scan.csv").starts_with(b"check,point,norm_x,mu1,bound"));

    let status = bin()
        .args(["certificate", "--alpha", "1", "--lambda", "1", "--Lambda", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let kv = String::from_utf8(read(&out, "certificate.kv")).unwrap();
    assert!(kv.contains("regime=lip_small_alpha"));
}

#[test]
fn help_prints_usage() {
    let out = bin().args(["help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("regularity-scan"));
}
