//! End-to-end tests of the binary: closed-form series, file round trips,
//! exit codes, and the verification subcommand.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wreathmix"))
}

#[test]
fn exact_single_position_matches_closed_form() {
    // Measure {(e,{}): 0.4, (e,{1}): 0.6} on one position: the chi-square
    // series is 0.4^{2k} (1/p_1 − 1).
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("single.json");
    std::fs::write(
        &path,
        r#"{"n":1,"mode":"plain","atoms":[{"pi":"e","J":[],"w":0.4},{"pi":"e","J":[1],"w":0.6}]}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "exact",
            "--measure",
            path.to_str().unwrap(),
            "--p",
            "0.7,0.3",
            "--k-max",
            "6",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,l2,tv,chi_square");
    for (i, line) in lines.enumerate() {
        let k = i + 1;
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], k.to_string());
        let chi: f64 = cols[3].parse().unwrap();
        let expect = 0.4f64.powi(2 * k as i32) * (1.0 / 0.7 - 1.0);
        assert!(
            (chi - expect).abs() <= 1e-12 * (1.0 + expect),
            "k = {k}: {chi} vs {expect}"
        );
        let l2: f64 = cols[1].parse().unwrap();
        assert!((l2 * l2 - expect).abs() <= 1e-12 * (1.0 + expect));
    }
}

#[test]
fn decompose_rejects_k_zero_with_usage_exit() {
    let out = bin()
        .args([
            "decompose", "--n", "2", "--alphabet", "2", "--k", "0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k >= 1"), "stderr: {err}");
}

#[test]
fn capacity_errors_use_exit_code_2() {
    let out = bin()
        .args([
            "exact", "--n", "8", "--alphabet", "5", "--k-max", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn measure_written_by_builder_reloads_to_the_same_series() {
    // Build the transposition measure, save it through the library, and
    // check the CLI produces bit-identical output from the file route.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transpositions3.json");
    wreathmix::AugmentedMeasure::transpositions(3)
        .unwrap()
        .save(&path)
        .unwrap();
    let from_builder = bin()
        .args([
            "exact", "--n", "3", "--measure", "transposition", "--p", "0.7,0.3", "--k-max", "6",
        ])
        .output()
        .unwrap();
    let from_file = bin()
        .args([
            "exact",
            "--measure",
            path.to_str().unwrap(),
            "--p",
            "0.7,0.3",
            "--k-max",
            "6",
        ])
        .output()
        .unwrap();
    assert!(from_builder.status.success());
    assert!(from_file.status.success());
    assert_eq!(from_builder.stdout, from_file.stdout);
}

#[test]
fn bounds_emits_the_documented_columns() {
    let out = bin()
        .args([
            "bounds", "--n", "4", "--r", "2", "--measure", "bernoulli-laplace", "--p",
            "0.7,0.3", "--c", "0.5,1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,r,p_min,c,k,exact_l2,table_bound_l2_squared,contraction_threshold_k,contraction_bound,envelope,lower_indicator_l2_squared"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn simulate_is_seed_deterministic() {
    let run = || {
        bin()
            .args([
                "simulate", "--n", "2", "--alphabet", "2", "--k", "4", "--replicas", "2000",
                "--seed", "7",
            ])
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let parsed: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(parsed["n_replicas"], 2000);
    assert!(parsed["tv"].as_f64().unwrap() >= 0.0);
}

#[test]
fn verify_grid_passes_with_exit_zero() {
    let out = bin().args(["verify", "--k-max", "3"]).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("OK"));
    assert!(!text.contains("FAIL "));
}
