//! `aircomp`: config-driven sweeps, snapshot dumps, fronthaul counts, and
//! a fast selftest.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error,
//! 3 selftest failure.

use std::path::PathBuf;
use std::process::ExitCode;

use aircomp_core::channel::{build_snapshot, snapshot_rng};
use aircomp_core::design::fronthaul_count;
use aircomp_sim::config::{self, ExperimentSpec};
use aircomp_sim::harness;
use aircomp_sim::output::{self, Format};
use aircomp_sim::selftest;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "aircomp",
    about = "Over-the-air computation in cell-free massive MIMO: MSE sweeps and fronthaul accounting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

impl From<CliFormat> for Format {
    fn from(f: CliFormat) -> Format {
        match f {
            CliFormat::Csv => Format::Csv,
            CliFormat::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo MSE sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set max_power_dbm=-10:5:30`.
        #[arg(long = "set")]
        set: Vec<String>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: CliFormat,
        /// Worker thread cap; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Generate one seeded network snapshot and dump it as JSON.
    Snapshot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
        /// Snapshot index within the seeded family.
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print fronthaul signaling counts for all three cooperation levels.
    Fronthaul {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Run the fast invariant suite.
    Selftest,
}

fn load_spec(config: &PathBuf, set: &[String]) -> Result<ExperimentSpec, ExitCode> {
    let mut spec = config::load_config(config, set).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(1)
    })?;
    if let Ok(seed) = std::env::var("AIRCOMP_SEED") {
        match seed.parse::<u64>() {
            Ok(s) => {
                spec.seed = s;
                spec.base.seed = s;
            }
            Err(_) => {
                eprintln!("config error at `AIRCOMP_SEED`: not an unsigned integer: {seed}");
                return Err(ExitCode::from(1));
            }
        }
    }
    Ok(spec)
}

fn run() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep {
            config,
            set,
            out,
            format,
            workers,
        } => {
            let spec = match load_spec(&config, &set) {
                Ok(s) => s,
                Err(code) => return code,
            };
            if workers > 0 {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global()
                {
                    eprintln!("runtime error: {e}");
                    return ExitCode::from(2);
                }
            }
            eprintln!(
                "note: tau_c = {} samples (defaulted coherence block length; affects only fronthaul counts)",
                spec.base.tau_c
            );
            let format = Format::from(format);
            let out_path = out.clone();
            let mut flush = |records: &[harness::MseRecord], partial: bool| {
                if let Some(path) = &out_path {
                    if partial {
                        let _ = output::emit(records, &spec, format, Some(path), true);
                    }
                }
            };
            let records = match harness::sweep_with_flush(&spec, &mut flush) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("runtime error: {e}");
                    return ExitCode::from(2);
                }
            };
            match output::emit(&records, &spec, format, out.as_deref(), false) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("runtime error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Snapshot {
            config,
            set,
            index,
            out,
        } => {
            let spec = match load_spec(&config, &set) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let mut rng = snapshot_rng(spec.seed, index);
            let snapshot = match build_snapshot(&spec.base, &mut rng) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("runtime error: {e}");
                    return ExitCode::from(2);
                }
            };
            let text = serde_json::json!({
                "seed": spec.seed,
                "index": index,
                "config_hash": spec.config_hash(),
                "snapshot": snapshot,
            });
            let rendered = format!("{:#}\n", text);
            let result = match out {
                Some(path) => std::fs::write(path, rendered),
                None => {
                    print!("{rendered}");
                    Ok(())
                }
            };
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("runtime error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Fronthaul { config, set } => {
            let spec = match load_spec(&config, &set) {
                Ok(s) => s,
                Err(code) => return code,
            };
            println!("level,per_block_to_cpu,per_block_to_aps,statistical");
            for level in [3u8, 2, 1] {
                let f = fronthaul_count(level, &spec.base);
                println!(
                    "{},{},{},{}",
                    level, f.per_block_to_cpu, f.per_block_to_aps, f.statistical
                );
            }
            println!(
                "# tau_c = {} samples (defaulted coherence block length)",
                spec.base.tau_c
            );
            ExitCode::SUCCESS
        }
        Command::Selftest => {
            let checks = selftest::run();
            let mut failed = false;
            for c in &checks {
                if c.passed {
                    println!("PASS {}", c.name);
                } else {
                    println!("FAIL {}: {}", c.name, c.detail);
                    failed = true;
                }
            }
            if failed {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}

fn main() -> ExitCode {
    run()
}
