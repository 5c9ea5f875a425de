//! Command-line front end. Exit codes: 0 success, 1 usage error,
//! 2 simulation error, 3 check failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use rdsim_bench::{
    check_equal_area, cmd_analyze, cmd_emit_golden, cmd_equal_area, cmd_min_size, cmd_run,
    cmd_sweep, load_config, min_size_csv, parse_sizes, render_table, with_vrf, HarnessError,
    SweepResult,
};
use rdsim_core::config::VrfModel;
use rdsim_core::kernels::DEFAULT_SEED;

#[derive(Parser)]
#[command(
    name = "rdsim-bench",
    about = "Experiment harness for the register-dispersion vector-core simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one kernel under one configuration and report a result row.
    Run {
        #[arg(long)]
        kernel: String,
        /// VRF model: full or compact.
        #[arg(long, default_value = "full")]
        vrf: String,
        /// Compact VRF size (with --vrf compact).
        #[arg(long, default_value_t = 8)]
        cvrf_size: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write a per-instruction trace to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Verify result-row invariants; failures exit with code 3.
        #[arg(long)]
        check: bool,
    },
    /// Sweep compact-VRF sizes over kernels, with full-VRF baselines.
    Sweep {
        /// Comma-separated kernel names (default: all).
        #[arg(long, value_delimiter = ',')]
        kernels: Vec<String>,
        /// Sizes as a range `3-16` or list `3,4,8`.
        #[arg(long, default_value = "3-16")]
        sizes: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Verify row invariants and hit-rate monotonicity.
        #[arg(long)]
        check: bool,
    },
    /// Report the minimum cVRF size reaching a hit-rate threshold.
    MinSize {
        #[arg(long, value_delimiter = ',')]
        kernels: Vec<String>,
        #[arg(long, default_value_t = 0.95)]
        threshold: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Verify the expected minimum sizes for the reference kernels.
        #[arg(long)]
        check: bool,
    },
    /// Compare compact 8x256-bit against an equal-area full 32x64-bit VRF.
    EqualArea {
        #[arg(long, value_delimiter = ',')]
        kernels: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        check: bool,
    },
    /// Static register-usage report for one kernel.
    Analyze {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Write kernel sources and golden output images to a directory.
    EmitGolden {
        #[arg(long, value_delimiter = ',')]
        kernels: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(check_failures) if check_failures.is_empty() => ExitCode::SUCCESS,
        Ok(check_failures) => {
            eprintln!("check failed:");
            for f in &check_failures {
                eprintln!("  - {f}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write_csv(result: &SweepResult, out: Option<&PathBuf>) -> Result<(), HarnessError> {
    if let Some(path) = out {
        fs::write(path, result.to_csv())?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Vec<String>, HarnessError> {
    match cli.cmd {
        Cmd::Run {
            kernel,
            vrf,
            cvrf_size,
            config,
            out,
            seed,
            trace,
            check,
        } => {
            let base = load_config(config.as_deref())?;
            let cfg = match vrf.as_str() {
                "full" => with_vrf(&base, VrfModel::Full)?,
                "compact" => with_vrf(&base, VrfModel::Compact(cvrf_size))?,
                other => {
                    return Err(HarnessError::Usage(format!(
                        "--vrf must be full or compact, got {other:?}"
                    )))
                }
            };
            let result = cmd_run(&kernel, &cfg, seed, trace.as_deref())?;
            print!("{}", render_table(&result));
            write_csv(&result, out.as_ref())?;
            Ok(if check { result.check_invariants() } else { vec![] })
        }
        Cmd::Sweep {
            kernels,
            sizes,
            config,
            out,
            seed,
            check,
        } => {
            let cfg = load_config(config.as_deref())?;
            let sizes = parse_sizes(&sizes)?;
            let result = cmd_sweep(&kernels, &sizes, &cfg, seed)?;
            print!("{}", render_table(&result));
            write_csv(&result, out.as_ref())?;
            let mut failures = vec![];
            if check {
                failures.extend(result.check_invariants());
                failures.extend(result.check_monotonicity());
            }
            Ok(failures)
        }
        Cmd::MinSize {
            kernels,
            threshold,
            config,
            out,
            seed,
            check,
        } => {
            let cfg = load_config(config.as_deref())?;
            let rows = cmd_min_size(&kernels, threshold, &cfg, seed)?;
            println!(
                "# smallest cVRF size with whole-run hit rate above {threshold}"
            );
            for r in &rows {
                if r.reached {
                    println!("{:<16} {}", r.kernel, r.min_size);
                } else {
                    println!("{:<16} {} (warning: threshold never reached)", r.kernel, r.min_size);
                }
            }
            if let Some(path) = out {
                fs::write(path, min_size_csv(&rows))?;
            }
            let mut failures = vec![];
            if check {
                for r in &rows {
                    let bound = match r.kernel.as_str() {
                        "dropout" => Some(3),
                        "matmul_tiled" => Some(5),
                        "phase_rotation" => Some(3),
                        _ => None,
                    };
                    if let Some(bound) = bound {
                        if !r.reached || r.min_size > bound {
                            failures.push(format!(
                                "{}: min size {} exceeds the expected {bound}",
                                r.kernel, r.min_size
                            ));
                        }
                    }
                }
            }
            Ok(failures)
        }
        Cmd::EqualArea {
            kernels,
            config,
            out,
            seed,
            check,
        } => {
            let cfg = load_config(config.as_deref())?;
            let result = cmd_equal_area(&kernels, &cfg, seed)?;
            print!("{}", render_table(&result));
            write_csv(&result, out.as_ref())?;
            Ok(if check {
                check_equal_area(&result, &cfg, seed)
            } else {
                vec![]
            })
        }
        Cmd::Analyze {
            kernel,
            config,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            print!("{}", cmd_analyze(&kernel, &cfg, seed)?);
            Ok(vec![])
        }
        Cmd::EmitGolden {
            kernels,
            out,
            config,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            for path in cmd_emit_golden(&kernels, &out, &cfg, seed)? {
                println!("wrote {path}");
            }
            Ok(vec![])
        }
    }
}
