use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimo_noma::check::run_checks;
use mimo_noma::harness::{emit_results, run_scenario, ScenarioSpec};
use mimo_noma::network::NetworkConfig;
use mimo_noma::solver::{constructed_dims, problem_dims};
use mimo_noma::surrogate::MinorantKind;

#[derive(Parser)]
#[command(name = "mimo-noma", version, about = "Multi-cell MIMO-NOMA precoder optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo scenario and write results.csv, ue_rates.csv, summary.json.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle and invariant checks.
    Check {
        /// Smaller sample counts.
        #[arg(long)]
        quick: bool,
    },
    /// Compare closed-form problem sizes with constructed programs.
    Dims {
        #[arg(long, default_value_t = 3)]
        cells: usize,
        #[arg(long, default_value_t = 2)]
        pairs: usize,
        #[arg(long, default_value_t = 4)]
        nt: usize,
        #[arg(long, default_value_t = 2)]
        nr: usize,
        #[arg(long, default_value_t = 2)]
        streams: usize,
    },
}

fn run(scenario: PathBuf, trials: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> mimo_noma::Result<()> {
    let mut spec = ScenarioSpec::load(&scenario)?;
    if let Some(t) = trials {
        spec.trials = t;
    }
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    if let Some(o) = out {
        spec.out_dir = o;
    }
    let table = run_scenario(&spec)?;
    for a in &table.aggregates {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:>10} {:<8} feasible {:>3}/{:<3} mean ST {:>9} bps/Hz  paired {:>9}  iters {:>7}",
            a.sweep_value,
            a.algorithm.as_str(),
            a.feasible,
            a.trials,
            fmt(a.mean_total_st_bps_hz),
            fmt(a.paired_mean_total_st_bps_hz),
            fmt(a.mean_iterations),
        );
    }
    for path in emit_results(&table, &spec.out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dims(config: NetworkConfig) -> mimo_noma::Result<bool> {
    let mut ok = true;
    for kind in [MinorantKind::Qp, MinorantKind::Sdp, MinorantKind::Soc] {
        let config = match kind {
            MinorantKind::Soc => NetworkConfig { rx_antennas: 1, streams: 1, ..config.clone() },
            _ => config.clone(),
        };
        let (f, c) = (problem_dims(&config, kind), constructed_dims(&config, kind, 0)?);
        ok &= f == c;
        println!(
            "{kind:?}: N={} K={} Nt={} Nr={} L={}  formula n={} m={}  constructed n={} m={}",
            config.n_cells, config.pairs_per_cell, config.tx_antennas, config.rx_antennas, config.streams, f.n, f.m, c.n, c.m
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, trials, seed, out } => run(scenario, trials, seed, out).map(|_| true),
        Command::Check { quick } => {
            let outcomes = run_checks(quick);
            for o in &outcomes {
                println!("{} {:<13} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Command::Dims { cells, pairs, nt, nr, streams } => dims(NetworkConfig {
            n_cells: cells,
            pairs_per_cell: pairs,
            tx_antennas: nt,
            rx_antennas: nr,
            streams,
            ..NetworkConfig::default()
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
