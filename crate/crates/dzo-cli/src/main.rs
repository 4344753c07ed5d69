//! Experiment driver over the dzo library.
//!
//! Exit codes are part of the contract: 0 success, 1 configuration or usage
//! error, 2 validation failure (a check printed FAIL), 3 runtime or IO
//! failure during an otherwise valid run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dzo::checks::{self, Check};
use dzo::config::{self, ExperimentConfig};
use dzo::metrics::{aggregate_traces, fit_rate, CsvTable, Trace};
use dzo::network::GraphKind;

const EXIT_CONFIG: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "dzo", version, about = "Distributed zero-order optimization experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its trace CSV plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment per seed and aggregate the traces.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Number of consecutive seeds starting at the config seed.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-derive library guarantees and print one PASS/FAIL line per check.
    Validate {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Fit a power law to the tail of a trace column.
    Ratefit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        column: String,
        /// Fraction of recorded points in the fit window, in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
    },
    /// Hard-instance tooling.
    Hard {
        #[command(subcommand)]
        cmd: HardCmd,
    },
}

#[derive(Subcommand)]
enum Suite {
    /// Kernel moment conditions and constant growth.
    Kernel {
        /// Check a single order instead of 2..=6.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Metropolis matrix properties and the spectral bound.
    Mixing {
        /// Graph family; requires --n.
        #[arg(long, requires = "n")]
        graph: Option<GraphArg>,
        /// Node count; requires --graph.
        #[arg(long, requires = "graph")]
        n: Option<usize>,
        /// Edge probability for erdos_renyi.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Gradient-estimator statistics.
    Estimator {
        /// Kernel order (default 2).
        #[arg(long)]
        beta: Option<f64>,
        /// Which statistic to probe; default is unbiasedness.
        #[arg(long, value_enum)]
        probe: Option<ProbeArg>,
    },
    /// Hard-instance integrity over the full parameter grid.
    Hard,
}

#[derive(Copy, Clone, ValueEnum)]
enum GraphArg {
    Complete,
    Ring,
    Path,
    Grid,
    ErdosRenyi,
}

impl GraphArg {
    fn kind(self) -> GraphKind {
        match self {
            GraphArg::Complete => GraphKind::Complete,
            GraphArg::Ring => GraphKind::Ring,
            GraphArg::Path => GraphKind::Path,
            GraphArg::Grid => GraphKind::Grid,
            GraphArg::ErdosRenyi => GraphKind::ErdosRenyi,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ProbeArg {
    Bias,
    Variance,
}

#[derive(Subcommand)]
enum HardCmd {
    /// Integrity checks for one hard-instance cell.
    Check(HardArgs),
}

#[derive(Args)]
struct HardArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long)]
    d: usize,
}

fn main() -> ExitCode {
    dzo::init_threads_from_env();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.cmd {
        Cmd::Run { config, out } => cmd_run(&config, &out),
        Cmd::Sweep { config, seeds, out } => cmd_sweep(&config, seeds, &out),
        Cmd::Validate { suite } => cmd_validate(suite),
        Cmd::Ratefit { csv, column, tail } => cmd_ratefit(&csv, &column, tail),
        Cmd::Hard { cmd: HardCmd::Check(args) } => cmd_hard_check(&args),
    };
    ExitCode::from(code)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read config {}: {e}", path.display());
        EXIT_CONFIG
    })?;
    config::parse_config(&text).map_err(|errors| {
        eprintln!("error: invalid config {}:", path.display());
        for e in errors {
            eprintln!("  - {e}");
        }
        EXIT_CONFIG
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), u8> {
    fs::write(path, content).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_RUNTIME
    })
}

fn ensure_dir(dir: &Path) -> Result<(), u8> {
    fs::create_dir_all(dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", dir.display());
        EXIT_RUNTIME
    })
}

fn manifest_json(cfg: &ExperimentConfig, traces: &[&Trace], files: &[String]) -> String {
    let seeds: Vec<u64> = traces.iter().map(|t| t.seed).collect();
    let doc = serde_json::json!({
        "config_hash": config::config_hash(cfg),
        "seeds": seeds,
        "files": files,
        "dzo_version": env!("CARGO_PKG_VERSION"),
    });
    serde_json::to_string_pretty(&doc).expect("manifest serializes")
}

fn cmd_run(config_path: &Path, out: &Path) -> u8 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let trace = match config::run_experiment(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: run failed: {e}");
            return EXIT_RUNTIME;
        }
    };
    if ensure_dir(out).is_err() {
        return EXIT_RUNTIME;
    }
    let csv_path = out.join("trace.csv");
    if write_file(&csv_path, &trace.to_csv()).is_err() {
        return EXIT_RUNTIME;
    }
    let manifest = manifest_json(&cfg, &[&trace], &["trace.csv".into()]);
    if write_file(&out.join("manifest.json"), &manifest).is_err() {
        return EXIT_RUNTIME;
    }
    println!(
        "run seed={} rows={} config_hash={} -> {}",
        trace.seed,
        trace.rows.len(),
        trace.config_hash,
        csv_path.display()
    );
    0
}

fn cmd_sweep(config_path: &Path, seeds_arg: Option<u64>, out: &Path) -> u8 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let k = match seeds_arg.or(cfg.seeds) {
        Some(k) if k >= 2 => k,
        Some(k) => {
            eprintln!("error: sweeps need at least 2 seeds, got {k}");
            return EXIT_CONFIG;
        }
        None => {
            eprintln!("error: sweeps need a seed count (--seeds or the config `seeds` key)");
            return EXIT_CONFIG;
        }
    };
    let seeds = config::consecutive_seeds(cfg.seed, k);
    let traces = match config::sweep_seeds(&cfg, &seeds) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: sweep failed: {e}");
            return EXIT_RUNTIME;
        }
    };
    let aggregate = match aggregate_traces(&traces) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: aggregation failed: {e}");
            return EXIT_RUNTIME;
        }
    };
    if ensure_dir(out).is_err() {
        return EXIT_RUNTIME;
    }
    let mut files = Vec::new();
    for trace in &traces {
        let name = format!("seed_{}.csv", trace.seed);
        if write_file(&out.join(&name), &trace.to_csv()).is_err() {
            return EXIT_RUNTIME;
        }
        files.push(name);
    }
    if write_file(&out.join("aggregate.csv"), &aggregate.to_csv()).is_err() {
        return EXIT_RUNTIME;
    }
    files.push("aggregate.csv".into());
    let refs: Vec<&Trace> = traces.iter().collect();
    let manifest = manifest_json(&cfg, &refs, &files);
    if write_file(&out.join("manifest.json"), &manifest).is_err() {
        return EXIT_RUNTIME;
    }
    println!(
        "sweep seeds={}..{} rows={} config_hash={} -> {}",
        seeds[0],
        seeds[seeds.len() - 1],
        aggregate.t.len(),
        config::config_hash(&cfg),
        out.display()
    );
    0
}

fn report(checks: &[Check]) -> u8 {
    for c in checks {
        println!("{}", c.summary_line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("checks: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        0
    } else {
        EXIT_VALIDATION
    }
}

fn cmd_validate(suite: Suite) -> u8 {
    let checks = match suite {
        Suite::Kernel { beta } => match beta {
            Some(b) => vec![checks::kernel_check(b)],
            None => checks::kernel_suite(),
        },
        Suite::Mixing { graph, n, p } => match (graph, n) {
            (Some(g), Some(n)) => {
                let kind = g.kind();
                if p.is_some() && kind != GraphKind::ErdosRenyi {
                    eprintln!("error: --p only applies to erdos_renyi");
                    return EXIT_CONFIG;
                }
                let p = match kind {
                    GraphKind::ErdosRenyi => Some(p.unwrap_or(0.3)),
                    _ => None,
                };
                vec![checks::mixing_check(kind, n, p, 0)]
            }
            _ => checks::mixing_suite(),
        },
        Suite::Estimator { beta, probe } => {
            let beta = beta.unwrap_or(2.0);
            match probe {
                None => checks::estimator_suite(),
                Some(ProbeArg::Bias) => checks::estimator_bias_checks(beta, 1_000_000),
                Some(ProbeArg::Variance) => checks::estimator_variance_checks(beta, 200_000),
            }
        }
        Suite::Hard => checks::hard_suite(),
    };
    report(&checks)
}

fn cmd_ratefit(csv: &Path, column: &str, tail: f64) -> u8 {
    let text = match fs::read_to_string(csv) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", csv.display());
            return EXIT_CONFIG;
        }
    };
    let fit = CsvTable::parse(&text)
        .and_then(|table| table.series(column))
        .and_then(|series| fit_rate(&series, tail));
    match fit {
        Ok(fit) => {
            println!(
                "ratefit column={column} tail={tail} slope={:.6} intercept={:.6} r_squared={:.6} window={}..{} points={}",
                fit.slope, fit.intercept, fit.r_squared, fit.window.0, fit.window.1, fit.points
            );
            0
        }
        Err(e) => {
            eprintln!("error: ratefit failed: {e}");
            EXIT_CONFIG
        }
    }
}

fn cmd_hard_check(args: &HardArgs) -> u8 {
    // Argument sanity is a usage concern; integrity failures are exit 2.
    if let Err(e) =
        dzo::hard::make_hard_instance(args.beta, args.alpha, args.horizon, args.d, &vec![1; args.d])
    {
        eprintln!("error: invalid hard-instance parameters: {e}");
        return EXIT_CONFIG;
    }
    report(&checks::hard_cell_check(args.beta, args.alpha, args.horizon, args.d))
}
