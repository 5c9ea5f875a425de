//! Experiment harness: single runs, cVRF-size sweeps, minimum-size
//! reports, and the equal-area comparison. Simulations are independent and
//! run in parallel; rows are sorted before emission so output bytes never
//! depend on scheduling.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use rdsim_core::asm::analyze_registers;
use rdsim_core::config::{ConfigError, MachineConfig, ValidatedConfig, VrfModel};
use rdsim_core::kernels::{build_kernel, KernelCase, KernelError, KERNEL_NAMES};
use rdsim_core::pipeline::{run, run_traced, SimError};
use rdsim_core::stats::ExecStats;

pub const CSV_HEADER: &str =
    "kernel,vrf_model,cvrf_size,vlen_bits,cycles,hit_rate,spills,fills,cycles_normalized";

/// Cycle budget: generous for desk-scale kernels, catches livelock.
pub const MAX_CYCLES: u64 = 500_000_000;

#[derive(Debug)]
pub enum HarnessError {
    Usage(String),
    Kernel(KernelError),
    Config(ConfigError),
    Sim(SimError),
    Io(std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 simulation/config/kernel/io.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Usage(m) => write!(f, "usage error: {m}"),
            HarnessError::Kernel(e) => write!(f, "{e}"),
            HarnessError::Config(e) => write!(f, "{e}"),
            HarnessError::Sim(e) => write!(f, "simulation error: {e}"),
            HarnessError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<KernelError> for HarnessError {
    fn from(e: KernelError) -> Self {
        HarnessError::Kernel(e)
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        HarnessError::Sim(e)
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e)
    }
}

/// One result row of the stable CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kernel: String,
    pub vrf_model: String,
    pub cvrf_size: usize,
    pub vlen_bits: usize,
    pub cycles: u64,
    pub hit_rate: f64,
    pub spills: u64,
    pub fills: u64,
    pub cycles_normalized: f64,
}

impl SweepRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{},{},{:.6}",
            self.kernel,
            self.vrf_model,
            self.cvrf_size,
            self.vlen_bits,
            self.cycles,
            self.hit_rate,
            self.spills,
            self.fills,
            self.cycles_normalized
        )
    }
}

#[derive(Debug, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.kernel, a.vlen_bits, a.cvrf_size, &a.vrf_model).cmp(&(
                &b.kernel,
                b.vlen_bits,
                b.cvrf_size,
                &b.vrf_model,
            ))
        });
    }

    /// Row invariants: the baseline row is exactly 1.0; compact rows at
    /// the baseline vector length can never beat the full VRF.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut failures = Vec::new();
        for row in &self.rows {
            if row.vrf_model == "full" && row.vlen_bits == 256 && row.cycles_normalized != 1.0 {
                failures.push(format!(
                    "{}: baseline row normalizes to {} instead of 1.0",
                    row.kernel, row.cycles_normalized
                ));
            }
            if row.vrf_model == "compact"
                && row.vlen_bits == 256
                && row.cycles_normalized < 1.0 - 1e-9
            {
                failures.push(format!(
                    "{}: compact size {} normalized {} below 1.0",
                    row.kernel, row.cvrf_size, row.cycles_normalized
                ));
            }
            if !(0.0..=1.0).contains(&row.hit_rate) {
                failures.push(format!("{}: hit rate {} out of range", row.kernel, row.hit_rate));
            }
        }
        failures
    }

    /// Per-kernel hit-rate monotonicity over compact sizes.
    pub fn check_monotonicity(&self) -> Vec<String> {
        let mut failures = Vec::new();
        let mut kernels: Vec<&str> = self.rows.iter().map(|r| r.kernel.as_str()).collect();
        kernels.sort_unstable();
        kernels.dedup();
        for kernel in kernels {
            let mut sizes: Vec<&SweepRow> = self
                .rows
                .iter()
                .filter(|r| r.kernel == kernel && r.vrf_model == "compact")
                .collect();
            sizes.sort_by_key(|r| r.cvrf_size);
            for pair in sizes.windows(2) {
                if pair[1].hit_rate < pair[0].hit_rate - 1e-12 {
                    failures.push(format!(
                        "{kernel}: hit rate drops from {:.6} (size {}) to {:.6} (size {})",
                        pair[0].hit_rate, pair[0].cvrf_size, pair[1].hit_rate, pair[1].cvrf_size
                    ));
                }
            }
        }
        failures
    }
}

/// Loads and validates a config file, or the defaults when absent.
pub fn load_config(path: Option<&Path>) -> Result<ValidatedConfig, HarnessError> {
    let cfg = match path {
        Some(p) => MachineConfig::from_kv_text(&fs::read_to_string(p)?)?,
        None => MachineConfig::default(),
    };
    Ok(cfg.validate()?)
}

/// Same machine with a different VRF model.
pub fn with_vrf(cfg: &ValidatedConfig, model: VrfModel) -> Result<ValidatedConfig, HarnessError> {
    let mut raw = cfg.clone().into_inner();
    raw.vrf_model = model;
    Ok(raw.validate()?)
}

/// The normalization baseline: a full VRF at 256-bit vectors, keeping the
/// memory-system parameters of the given config.
pub fn baseline_config(cfg: &ValidatedConfig) -> Result<ValidatedConfig, HarnessError> {
    let mut raw = cfg.clone().into_inner();
    raw.vrf_model = VrfModel::Full;
    raw.vlen_bits = 256;
    raw.lanes = 8;
    Ok(raw.validate()?)
}

fn vrf_label(cfg: &ValidatedConfig) -> (&'static str, usize) {
    match cfg.vrf_model {
        VrfModel::Full => ("full", 32),
        VrfModel::Compact(n) => ("compact", n),
    }
}

/// Runs one kernel under one configuration.
pub fn measure(
    name: &str,
    cfg: &ValidatedConfig,
    seed: u64,
) -> Result<(KernelCase, ExecStats), HarnessError> {
    let kernel = build_kernel(name, cfg, seed)?;
    let out = run(&kernel.program, cfg, &[], MAX_CYCLES)?;
    Ok((kernel, out.stats))
}

fn row_from(name: &str, cfg: &ValidatedConfig, stats: &ExecStats, baseline_cycles: u64) -> SweepRow {
    let (model, size) = vrf_label(cfg);
    SweepRow {
        kernel: name.to_string(),
        vrf_model: model.to_string(),
        cvrf_size: size,
        vlen_bits: cfg.vlen_bits,
        cycles: stats.cycles,
        hit_rate: stats.hit_rate(),
        spills: stats.spills,
        fills: stats.fills,
        cycles_normalized: stats.cycles as f64 / baseline_cycles as f64,
    }
}

/// Resolves a kernel list argument; empty means the whole registry.
pub fn kernel_list(names: &[String]) -> Result<Vec<String>, HarnessError> {
    if names.is_empty() {
        return Ok(KERNEL_NAMES.iter().map(|s| s.to_string()).collect());
    }
    for n in names {
        if !KERNEL_NAMES.contains(&n.as_str()) {
            return Err(KernelError::UnknownKernel(n.clone()).into());
        }
    }
    Ok(names.to_vec())
}

/// `run`: one simulation, one row (plus its baseline for normalization).
pub fn cmd_run(
    name: &str,
    cfg: &ValidatedConfig,
    seed: u64,
    trace_path: Option<&Path>,
) -> Result<SweepResult, HarnessError> {
    let base_cfg = baseline_config(cfg)?;
    let (_, base_stats) = measure(name, &base_cfg, seed)?;
    let kernel = build_kernel(name, cfg, seed)?;
    let stats = if let Some(path) = trace_path {
        let (out, trace) = run_traced(&kernel.program, cfg, &[], MAX_CYCLES)?;
        let mut text = String::new();
        for row in &trace {
            text.push_str(&row.to_string());
            text.push('\n');
        }
        fs::write(path, text)?;
        out.stats
    } else {
        run(&kernel.program, cfg, &[], MAX_CYCLES)?.stats
    };
    let mut result = SweepResult {
        rows: vec![row_from(name, cfg, &stats, base_stats.cycles)],
    };
    result.sort();
    Ok(result)
}

/// `sweep`: every (kernel, size) pair plus the full-VRF baseline rows.
pub fn cmd_sweep(
    kernels: &[String],
    sizes: &[usize],
    cfg: &ValidatedConfig,
    seed: u64,
) -> Result<SweepResult, HarnessError> {
    for s in sizes {
        if !(3..=32).contains(s) {
            return Err(HarnessError::Usage(format!(
                "cVRF size {s} outside the supported range 3..=32"
            )));
        }
    }
    let kernels = kernel_list(kernels)?;
    let base_cfg = baseline_config(cfg)?;
    let baselines: Vec<(String, u64)> = kernels
        .par_iter()
        .map(|name| measure(name, &base_cfg, seed).map(|(_, s)| (name.clone(), s.cycles)))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<SweepRow> = baselines
        .iter()
        .map(|(name, cycles)| {
            let (model, size) = vrf_label(&base_cfg);
            SweepRow {
                kernel: name.clone(),
                vrf_model: model.to_string(),
                cvrf_size: size,
                vlen_bits: base_cfg.vlen_bits,
                cycles: *cycles,
                hit_rate: 1.0,
                spills: 0,
                fills: 0,
                cycles_normalized: 1.0,
            }
        })
        .collect();
    let jobs: Vec<(String, usize, u64)> = baselines
        .iter()
        .flat_map(|(name, cycles)| sizes.iter().map(move |s| (name.clone(), *s, *cycles)))
        .collect();
    let compact_rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(name, size, base_cycles)| {
            let cc = with_vrf(cfg, VrfModel::Compact(*size))?;
            let (_, stats) = measure(name, &cc, seed)?;
            Ok(row_from(name, &cc, &stats, *base_cycles))
        })
        .collect::<Result<_, HarnessError>>()?;
    rows.extend(compact_rows);
    let mut result = SweepResult { rows };
    result.sort();
    Ok(result)
}

/// One kernel's minimum-size scan result.
#[derive(Debug, Clone, PartialEq)]
pub struct MinSizeRow {
    pub kernel: String,
    pub threshold: f64,
    pub min_size: usize,
    /// False when even size 32 stays at or below the threshold.
    pub reached: bool,
}

/// `min-size`: smallest cVRF size whose whole-run hit rate exceeds the
/// threshold, scanning sizes 3..=32.
pub fn cmd_min_size(
    kernels: &[String],
    threshold: f64,
    cfg: &ValidatedConfig,
    seed: u64,
) -> Result<Vec<MinSizeRow>, HarnessError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(HarnessError::Usage(format!(
            "threshold {threshold} must lie strictly between 0 and 1"
        )));
    }
    let kernels = kernel_list(kernels)?;
    kernels
        .par_iter()
        .map(|name| {
            for size in 3..=32 {
                let cc = with_vrf(cfg, VrfModel::Compact(size))?;
                let (_, stats) = measure(name, &cc, seed)?;
                if stats.hit_rate() > threshold {
                    return Ok(MinSizeRow {
                        kernel: name.clone(),
                        threshold,
                        min_size: size,
                        reached: true,
                    });
                }
            }
            Ok(MinSizeRow {
                kernel: name.clone(),
                threshold,
                min_size: 32,
                reached: false,
            })
        })
        .collect()
}

pub fn min_size_csv(rows: &[MinSizeRow]) -> String {
    let mut out = String::from("kernel,threshold,min_cvrf_size,reached\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{},{}\n",
            r.kernel, r.threshold, r.min_size, r.reached
        ));
    }
    out
}

/// `equal-area`: compact 8x256-bit versus a full VRF of 32x64-bit vectors,
/// both normalized to the full-size 256-bit baseline.
pub fn cmd_equal_area(
    kernels: &[String],
    cfg: &ValidatedConfig,
    seed: u64,
) -> Result<SweepResult, HarnessError> {
    let kernels = kernel_list(kernels)?;
    let base_cfg = baseline_config(cfg)?;
    let compact8 = with_vrf(&base_cfg, VrfModel::Compact(8))?;
    let reduced = {
        let mut raw = base_cfg.clone().into_inner();
        raw.vlen_bits = 64;
        raw.lanes = 2;
        raw.validate()?
    };
    let rows: Vec<SweepRow> = kernels
        .par_iter()
        .map(|name| {
            let (_, base) = measure(name, &base_cfg, seed)?;
            let (_, a) = measure(name, &compact8, seed)?;
            let (_, b) = measure(name, &reduced, seed)?;
            Ok(vec![
                row_from(name, &base_cfg, &base, base.cycles),
                row_from(name, &compact8, &a, base.cycles),
                row_from(name, &reduced, &b, base.cycles),
            ])
        })
        .collect::<Result<Vec<_>, HarnessError>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut result = SweepResult { rows };
    result.sort();
    Ok(result)
}

/// Equal-area acceptance-style checks, used by `--check`.
pub fn check_equal_area(result: &SweepResult, cfg: &ValidatedConfig, seed: u64) -> Vec<String> {
    let mut failures = Vec::new();
    let mut kernels: Vec<&str> = result.rows.iter().map(|r| r.kernel.as_str()).collect();
    kernels.sort_unstable();
    kernels.dedup();
    for kernel in kernels {
        let find = |model: &str, vlen: usize| {
            result
                .rows
                .iter()
                .find(|r| r.kernel == kernel && r.vrf_model == model && r.vlen_bits == vlen)
        };
        let (Some(a), Some(b)) = (find("compact", 256), find("full", 64)) else {
            continue;
        };
        if matches!(kernel, "gemv" | "matmul_tiled" | "dropout")
            && (b.cycles as f64) < 2.0 * a.cycles as f64
        {
            failures.push(format!(
                "{kernel}: reduced-length VRF only {:.3}x slower than the compact VRF",
                b.cycles as f64 / a.cycles as f64
            ));
        }
        if let Ok(built) = build_kernel(kernel, cfg, seed) {
            let active = analyze_registers(&built.program).active_registers;
            if active <= 8 && a.cycles_normalized > 1.05 {
                failures.push(format!(
                    "{kernel}: compact(8) at {:.4}x of the full-size baseline",
                    a.cycles_normalized
                ));
            }
        }
    }
    failures
}

/// `analyze`: static register-usage report text.
pub fn cmd_analyze(name: &str, cfg: &ValidatedConfig, seed: u64) -> Result<String, HarnessError> {
    let kernel = build_kernel(name, cfg, seed)?;
    let report = analyze_registers(&kernel.program);
    Ok(format!(
        "kernel: {} ({})\n{report}",
        kernel.name, kernel.problem_size
    ))
}

/// `emit-golden`: kernel sources and golden output images for fixtures.
pub fn cmd_emit_golden(
    kernels: &[String],
    out_dir: &Path,
    cfg: &ValidatedConfig,
    seed: u64,
) -> Result<Vec<String>, HarnessError> {
    let kernels = kernel_list(kernels)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for name in &kernels {
        let kernel = build_kernel(name, cfg, seed)?;
        let src_path = out_dir.join(format!("{name}.vasm"));
        fs::write(&src_path, &kernel.source)?;
        let golden_path = out_dir.join(format!("{name}.golden"));
        fs::write(&golden_path, golden_image(kernel.output_addr, &kernel.golden))?;
        written.push(src_path.display().to_string());
        written.push(golden_path.display().to_string());
    }
    Ok(written)
}

/// `addr: hexbytes` image of a golden region, 16 bytes per line (the
/// memory-image fixture format).
pub fn golden_image(addr: usize, bytes: &[u8]) -> String {
    let mut out = String::new();
    for (i, chunk) in bytes.chunks(16).enumerate() {
        out.push_str(&format!("{:08x}: ", addr + i * 16));
        for b in chunk {
            out.push_str(&format!("{b:02x}"));
        }
        out.push('\n');
    }
    out
}

/// Renders rows as an aligned human-readable table.
pub fn render_table(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str("# all cycle counts normalized to the full VRF at vlen_bits=256\n");
    out.push_str(&format!(
        "{:<16} {:>8} {:>6} {:>6} {:>10} {:>9} {:>8} {:>8} {:>11}\n",
        "kernel", "vrf", "size", "vlen", "cycles", "hit_rate", "spills", "fills", "normalized"
    ));
    for r in &result.rows {
        out.push_str(&format!(
            "{:<16} {:>8} {:>6} {:>6} {:>10} {:>9.4} {:>8} {:>8} {:>11.4}\n",
            r.kernel,
            r.vrf_model,
            r.cvrf_size,
            r.vlen_bits,
            r.cycles,
            r.hit_rate,
            r.spills,
            r.fills,
            r.cycles_normalized
        ));
    }
    out
}

/// Parses a sizes argument: `3-16` or `3,4,8,16`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, HarnessError> {
    let bad = || HarnessError::Usage(format!("cannot parse sizes {text:?} (use `3-16` or `3,4,8`)"));
    if let Some((lo, hi)) = text.split_once('-') {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).collect())
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect()
    }
}
