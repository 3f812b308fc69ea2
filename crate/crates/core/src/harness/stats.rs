use serde::{Deserialize, Serialize};

use super::ResultRow;
use crate::error::{Error, Result};
use crate::optimizer::Algorithm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub probability: f64,
}

/// Empirical CDF at the sorted sample points (ties collapse to one step).
pub fn cdf(values: &[f64]) -> Result<Vec<CdfPoint>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("cdf of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("cdf sample contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::with_capacity(sorted.len());
    for (i, &v) in sorted.iter().enumerate() {
        let probability = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.value == v => last.probability = probability,
            _ => out.push(CdfPoint { value: v, probability }),
        }
    }
    Ok(out)
}

/// Step-function value of an empirical CDF at `x`.
pub fn cdf_at(points: &[CdfPoint], x: f64) -> f64 {
    points.iter().take_while(|p| p.value <= x).last().map_or(0.0, |p| p.probability)
}

/// Per (sweep value, algorithm) statistics over recorded rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub feasible: usize,
    /// Over this algorithm's feasible trials.
    pub mean_total_st_bps_hz: Option<f64>,
    /// Over trials where every algorithm ended feasible.
    pub paired_trials: usize,
    pub paired_mean_total_st_bps_hz: Option<f64>,
    pub mean_iterations: Option<f64>,
    /// Over feasible trials with a finite ratio.
    pub mean_bwr: Option<f64>,
    pub cdf: Vec<CdfPoint>,
}

/// Statuses whose final point meets the QoS constraints.
pub fn is_feasible_status(status: &str) -> bool {
    matches!(status, "converged" | "iteration-cap" | "stalled" | "numerical-failure")
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Aggregates from the raw rows alone; sweep values keep first-seen order.
pub fn aggregate(rows: &[ResultRow], algorithms: &[Algorithm]) -> Vec<Aggregate> {
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.iter().any(|v| v.to_bits() == r.sweep_value.to_bits()) {
            values.push(r.sweep_value);
        }
    }
    let mut out = Vec::new();
    for &value in &values {
        let at: Vec<&ResultRow> = rows.iter().filter(|r| r.sweep_value.to_bits() == value.to_bits()).collect();
        let mut trials: Vec<usize> = at.iter().map(|r| r.trial).collect();
        trials.sort_unstable();
        trials.dedup();
        let paired: Vec<usize> = trials
            .iter()
            .copied()
            .filter(|&t| {
                algorithms.iter().all(|&a| {
                    at.iter().any(|r| r.trial == t && r.algorithm == a && is_feasible_status(&r.status))
                })
            })
            .collect();
        for &algorithm in algorithms {
            let mine: Vec<&ResultRow> = at.iter().copied().filter(|r| r.algorithm == algorithm).collect();
            let ok: Vec<&ResultRow> = mine.iter().copied().filter(|r| is_feasible_status(&r.status)).collect();
            let totals: Vec<f64> = ok.iter().map(|r| r.total_st_bps_hz).collect();
            out.push(Aggregate {
                sweep_value: value,
                algorithm,
                trials: mine.len(),
                feasible: ok.len(),
                mean_total_st_bps_hz: mean(totals.iter().copied()),
                paired_trials: paired.len(),
                paired_mean_total_st_bps_hz: mean(
                    ok.iter().filter(|r| paired.contains(&r.trial)).map(|r| r.total_st_bps_hz),
                ),
                mean_iterations: mean(ok.iter().map(|r| r.iterations as f64)),
                mean_bwr: mean(ok.iter().map(|r| r.bwr).filter(|b| b.is_finite())),
                cdf: if totals.is_empty() { Vec::new() } else { cdf(&totals).unwrap_or_default() },
            });
        }
    }
    out
}
