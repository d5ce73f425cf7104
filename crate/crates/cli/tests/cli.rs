use std::path::Path;
use std::process::{Command, Output};

fn edsimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edsimo"))
        .args(args)
        .output()
        .expect("run edsimo")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|c| c == name).unwrap();
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

#[test]
fn optimize_fig2_setup_starts_at_zero() {
    let out = edsimo(&[
        "optimize", "--M", "6", "--N", "500", "--K", "50", "--snr-db", "0",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .starts_with("# schema=1\nsymbol_index,p_m,alpha_m,lambda_m,P_e,iterations,converged\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 7);
    let alpha = column(&rows, "alpha_m");
    assert_eq!(alpha[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(column(&rows, "lambda_m")[5], "");
    assert!(column(&rows, "converged").iter().all(|c| c == "true"));
}

#[test]
fn two_symbol_alpha() {
    let out = edsimo(&["optimize", "--M", "2"]);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let alpha: Vec<f64> = column(&rows, "alpha_m")
        .iter()
        .map(|a| a.parse().unwrap())
        .collect();
    assert_eq!(alpha, vec![0.0, 2.0]);
}

#[test]
fn unsorted_powers_fail() {
    for cmd in ["sep", "validate", "simulate"] {
        let out = edsimo(&[cmd, "--M", "4", "--powers", "0,1.5,0.5,2", "--trials", "10"]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("not strictly increasing"));
    }
}

#[test]
fn bad_parameters_fail() {
    let out = edsimo(&["optimize", "--M", "1"]);
    assert!(!out.status.success());
    let out = edsimo(&["brute-force", "--M", "6"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid too large"));
}

#[test]
fn json_output_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "M=3\nN=200\nformat=json\n").unwrap();
    let out_path = dir.path().join("o.json");
    let out = edsimo(&[
        "sep",
        "--config",
        cfg.to_str().unwrap(),
        "--N",
        "100",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["scenario"], "sep");
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert!(v["rows"][2]["lambda_m"].is_null());
    // N=100 from the flag, not 200 from the file: sigma2 of the zero-power
    // symbol is sigma_z^4 / N.
    assert_eq!(v["rows"][0]["sigma2_m"], 0.01);
}

#[test]
fn sweep_k_columns() {
    let out = edsimo(&[
        "sweep-snr",
        "--M",
        "4",
        "--snr-values",
        "-3,0,3",
        "--k-values",
        "0,50",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 7);
    let pe: Vec<f64> = column(&rows, "P_e")
        .iter()
        .map(|x| x.parse().unwrap())
        .collect();
    // Rows come in (K=0, K=50) pairs per SNR.
    for pair in pe.chunks(2) {
        assert!(pair[1] <= pair[0]);
    }
    assert!(column(&rows, "empirical_ser").iter().all(String::is_empty));
}

#[test]
fn simulate_writes_counts() {
    let out = edsimo(&[
        "simulate", "--M", "3", "--N", "100", "--trials", "2000", "--seed", "5",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(column(&rows, "trials"), vec!["2000"; 3]);
    assert_eq!(column(&rows, "seed"), vec!["5"; 3]);
}

#[test]
fn validate_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    let out = edsimo(&[
        "validate",
        "--trials",
        "2000",
        "--out",
        path.to_str().unwrap(),
    ]);
    let rows = csv_rows(&std::fs::read_to_string(Path::new(&path)).unwrap());
    let names = column(&rows, "check");
    for want in [
        "boundary_offset",
        "boundary_pdf_equality",
        "brute_force_sep_gap",
        "brute_force_alpha_gap",
        "mc_ser_z",
        "mc_moments_z",
        "gaussianity_moments_z",
        "convexity_violations",
    ] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    let failed = column(&rows, "passed")
        .iter()
        .filter(|p| *p == "false")
        .count();
    assert_eq!(out.status.success(), failed == 0);
    if failed > 0 {
        assert_eq!(out.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED"));
    }
}
