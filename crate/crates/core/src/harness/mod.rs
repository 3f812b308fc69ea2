//! Monte Carlo scenarios: sweep a parameter, run every algorithm on shared
//! channel draws, aggregate and write CSV/JSON.

mod output;
mod stats;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{emit_results, read_results_csv, ResultRow, UeRateRecord, RESULTS_CSV, SUMMARY_JSON, UE_RATES_CSV};
pub use stats::{aggregate, cdf, cdf_at, is_feasible_status, Aggregate, CdfPoint};

use crate::error::{Error, Result};
use crate::network::{build_topology, pair_users, pair_users_with, sample_channels, ClusterStrategy, NetworkConfig};
use crate::optimizer::{run_path_following, Algorithm, OptimizerSettings};

/// Thread-count override for [`run_scenario`].
pub const THREADS_ENV: &str = "MIMO_NOMA_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "power_dbm")]
    PowerDbm,
    #[serde(rename = "threshold_bps_hz")]
    ThresholdBpsHz,
    #[serde(rename = "pairs_K")]
    PairsK,
    #[serde(rename = "antennas_Nt")]
    AntennasNt,
    #[serde(rename = "cluster_size")]
    ClusterSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_trials() -> usize {
    100
}

fn default_cluster_size() -> usize {
    2
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub base: NetworkConfig,
    pub sweep: Sweep,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Used unless the sweep runs over cluster sizes.
    #[serde(default = "default_cluster_size")]
    pub cluster_size: usize,
    /// Overrides `cluster_size` with an explicit strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusterStrategy>,
    /// Loop settings shared by all algorithms; `algorithm` is ignored.
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sweep.values.is_empty() {
            return bad("sweep values must be non-empty".into());
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        self.optimizer.validate()?;
        for &value in &self.sweep.values {
            let (config, _) = self.point(value)?;
            config.validate()?;
            if self.algorithms.contains(&Algorithm::Soc) && (config.rx_antennas != 1 || config.streams != 1) {
                return bad("the soc algorithm needs rx_antennas = streams = 1".into());
            }
        }
        Ok(())
    }

    /// Configuration and cluster size at one sweep value.
    pub fn point(&self, value: f64) -> Result<(NetworkConfig, usize)> {
        let mut config = self.base.clone();
        let mut cluster = self.cluster_size;
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!("sweep value {value} must be a positive integer")))
            }
        };
        match self.sweep.axis {
            SweepAxis::PowerDbm => config.power_budget_dbm = value,
            SweepAxis::ThresholdBpsHz => config.qos_threshold_bps_hz = value,
            SweepAxis::PairsK => config.pairs_per_cell = count()?,
            SweepAxis::AntennasNt => config.tx_antennas = count()?,
            SweepAxis::ClusterSize => cluster = count()?,
        }
        Ok((config, cluster))
    }

    pub fn points(&self) -> usize {
        self.sweep.values.len()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `t` at sweep point `p`; splitmix64 is a bijection, so
/// distinct cells never share a seed.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    master ^ splitmix64(((point as u64) << 32) | trial as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub spec: ScenarioSpec,
    /// Ordered by (sweep point, trial, algorithm in spec order).
    pub rows: Vec<ResultRow>,
    pub ue_rates: Vec<UeRateRecord>,
    pub aggregates: Vec<Aggregate>,
}

struct Cell {
    rows: Vec<ResultRow>,
    ue_rates: Vec<UeRateRecord>,
}

fn run_cell(spec: &ScenarioSpec, point: usize, trial: usize) -> Result<Cell> {
    let value = spec.sweep.values[point];
    let (config, cluster) = spec.point(value)?;
    let seed = trial_seed(spec.master_seed, point, trial);
    let topo = build_topology(&config, seed)?;
    let channels = sample_channels(&topo, &config, seed)?;
    let plan = match spec.clustering {
        Some(strategy) if spec.sweep.axis != SweepAxis::ClusterSize => pair_users_with(&topo, &config, strategy, seed)?,
        _ => pair_users(&topo, &config, cluster, seed)?,
    };
    let mut out = Cell { rows: Vec::new(), ue_rates: Vec::new() };
    for &algorithm in &spec.algorithms {
        let settings = OptimizerSettings {
            algorithm,
            cluster_generalization: plan.max_cluster_size() > 2,
            ..spec.optimizer.clone()
        };
        let base = ResultRow {
            sweep_value: value,
            algorithm,
            trial,
            total_st_bps_hz: f64::NAN,
            iterations: 0,
            status: "error".into(),
            bwr: f64::NAN,
        };
        match run_path_following(&channels, &plan, &config, &settings) {
            Ok(trace) => {
                let report = &trace.report;
                out.rows.push(ResultRow {
                    total_st_bps_hz: report.total_bps_hz(),
                    iterations: trace.iterations(),
                    status: trace.status.as_str().into(),
                    bwr: report.bwr(),
                    ..base
                });
                out.ue_rates.extend(report.rows(&config).into_iter().map(|r| UeRateRecord {
                    sweep_value: value,
                    algorithm,
                    trial,
                    cell: r.cell,
                    ue: r.ue,
                    class: r.class,
                    rate_bps_hz: r.rate_bps_hz,
                }));
            }
            Err(e) => {
                log::warn!("point {value} trial {trial} {algorithm}: {e}");
                out.rows.push(base);
            }
        }
    }
    Ok(out)
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Every (sweep point, trial) draws its own topology, channels and plan;
/// all algorithms in that cell share them.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ResultsTable> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..spec.points()).flat_map(|p| (0..spec.trials).map(move |t| (p, t))).collect();
    let work = || cells.par_iter().map(|&(p, t)| run_cell(spec, p, t)).collect::<Result<Vec<_>>>();
    let done = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut rows = Vec::new();
    let mut ue_rates = Vec::new();
    for cell in done {
        rows.extend(cell.rows);
        ue_rates.extend(cell.ue_rates);
    }
    let aggregates = aggregate(&rows, &spec.algorithms);
    Ok(ResultsTable { spec: spec.clone(), rows, ue_rates, aggregates })
}
