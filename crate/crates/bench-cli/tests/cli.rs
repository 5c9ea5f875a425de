//! Harness behavior: CSV schema stability, deterministic output, row
//! ordering, the documented exit codes, and the spec'd example results.

use std::process::Command;

use rdsim_bench::{
    cmd_equal_area, cmd_min_size, cmd_run, cmd_sweep, load_config, with_vrf, CSV_HEADER,
};
use rdsim_core::config::VrfModel;
use rdsim_core::kernels::DEFAULT_SEED;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdsim-bench"))
}

#[test]
fn csv_schema_is_stable() {
    let cfg = load_config(None).unwrap();
    let result = cmd_sweep(&["dropout".to_string()], &[3, 4], &cfg, DEFAULT_SEED).unwrap();
    let csv = result.to_csv();
    assert_eq!(
        csv.lines().next().unwrap(),
        "kernel,vrf_model,cvrf_size,vlen_bits,cycles,hit_rate,spills,fills,cycles_normalized"
    );
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 1 + 3); // header + 2 sizes + baseline
}

#[test]
fn rerunning_a_sweep_is_byte_identical() {
    let cfg = load_config(None).unwrap();
    let kernels = vec!["gemv".to_string(), "dropout".to_string()];
    let a = cmd_sweep(&kernels, &[3, 5, 8], &cfg, 7).unwrap().to_csv();
    let b = cmd_sweep(&kernels, &[3, 5, 8], &cfg, 7).unwrap().to_csv();
    assert_eq!(a, b);
}

#[test]
fn sweep_rows_are_sorted_and_satisfy_invariants() {
    let cfg = load_config(None).unwrap();
    let kernels = vec!["matmul_tiled".to_string(), "dropout".to_string()];
    let result = cmd_sweep(&kernels, &[5, 3, 4], &cfg, DEFAULT_SEED).unwrap();
    let keys: Vec<(String, usize, usize)> = result
        .rows
        .iter()
        .map(|r| (r.kernel.clone(), r.vlen_bits, r.cvrf_size))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(result.check_invariants().is_empty());
    assert!(result.check_monotonicity().is_empty());
}

#[test]
fn full_vrf_run_has_a_perfect_hit_rate() {
    let cfg = load_config(None).unwrap();
    let result = cmd_run("gemv", &cfg, DEFAULT_SEED, None).unwrap();
    assert_eq!(result.rows.len(), 1);
    assert_eq!(result.rows[0].hit_rate, 1.0);
    assert_eq!(result.rows[0].cycles_normalized, 1.0);
}

#[test]
fn dropout_at_size_three_clears_95_percent() {
    let cfg = load_config(None).unwrap();
    let compact3 = with_vrf(&cfg, VrfModel::Compact(3)).unwrap();
    let result = cmd_run("dropout", &compact3, DEFAULT_SEED, None).unwrap();
    assert!(result.rows[0].hit_rate > 0.95);
}

#[test]
fn conv2d_at_size_eight_spills() {
    let cfg = load_config(None).unwrap();
    let compact8 = with_vrf(&cfg, VrfModel::Compact(8)).unwrap();
    let result = cmd_run("conv2d", &compact8, DEFAULT_SEED, None).unwrap();
    assert!(result.rows[0].spills > 0);
    assert!(result.rows[0].hit_rate < 1.0);
}

#[test]
fn min_size_scan_matches_the_reference_kernels() {
    let cfg = load_config(None).unwrap();
    let kernels = vec![
        "dropout".to_string(),
        "matmul_tiled".to_string(),
        "phase_rotation".to_string(),
    ];
    let rows = cmd_min_size(&kernels, 0.95, &cfg, DEFAULT_SEED).unwrap();
    let get = |name: &str| rows.iter().find(|r| r.kernel == name).unwrap();
    assert_eq!(get("dropout").min_size, 3);
    assert!(get("matmul_tiled").min_size <= 5);
    assert_eq!(get("phase_rotation").min_size, 3);
    assert!(rows.iter().all(|r| r.reached));
}

#[test]
fn equal_area_report_carries_three_rows_per_kernel() {
    let cfg = load_config(None).unwrap();
    let result = cmd_equal_area(&["gemv".to_string()], &cfg, DEFAULT_SEED).unwrap();
    assert_eq!(result.rows.len(), 3);
    let reduced = result
        .rows
        .iter()
        .find(|r| r.vlen_bits == 64 && r.vrf_model == "full")
        .unwrap();
    let compact = result
        .rows
        .iter()
        .find(|r| r.vlen_bits == 256 && r.vrf_model == "compact")
        .unwrap();
    assert!(reduced.cycles as f64 >= 2.0 * compact.cycles as f64);
}

#[test]
fn exit_codes_follow_the_contract() {
    // Usage error: malformed flag value.
    let out = bin()
        .args(["min-size", "--threshold", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Simulation/command error: unknown kernel.
    let out = bin().args(["run", "--kernel", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Success with --check on a passing report.
    let out = bin()
        .args(["run", "--kernel", "dropout", "--vrf", "compact", "--cvrf-size", "4", "--check"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    // Unknown subcommand is a usage error.
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trace_and_csv_files_are_written() {
    let dir = std::env::temp_dir().join("rdsim-bench-test");
    std::fs::create_dir_all(&dir).unwrap();
    let trace = dir.join("dropout.trace");
    let csv = dir.join("dropout.csv");
    let out = bin()
        .args([
            "run",
            "--kernel",
            "dropout",
            "--vrf",
            "compact",
            "--cvrf-size",
            "3",
        ])
        .arg("--trace")
        .arg(&trace)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    let first = trace_text.lines().next().unwrap();
    // pc, mnemonic, hits, misses, microops, cycles_so_far
    assert_eq!(first.split(',').count(), 6);
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with(CSV_HEADER));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn emit_golden_writes_sources_and_images() {
    let dir = std::env::temp_dir().join("rdsim-bench-golden");
    std::fs::remove_dir_all(&dir).ok();
    let out = bin()
        .args(["emit-golden", "--kernels", "gemv"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let src = std::fs::read_to_string(dir.join("gemv.vasm")).unwrap();
    assert!(src.contains("vmacc.vv"));
    let golden = std::fs::read_to_string(dir.join("gemv.golden")).unwrap();
    assert!(golden.lines().next().unwrap().contains(": "));
    std::fs::remove_dir_all(&dir).ok();
}
