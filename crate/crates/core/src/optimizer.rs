//! Path-following loops over the convex subproblems, their initialization
//! and the CoMP/DPC baselines.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::network::{Channels, ClusterPlan, NetworkConfig};
use crate::solver::{
    lower_feasibility_subproblem, lower_qp_subproblem, lower_sdp_subproblem, lower_soc_subproblem, solve,
    ClarabelBackend, ConicBackend, ConicProgram, LoweringParams, MinorantSet, SolveStatus,
};
use crate::surrogate::{qp_minorants, sdp_minorants, soc_minorants, MinorantKind};
use crate::throughput::{evaluate, rotate_phases, DecodeStructure, PrecoderSet, RateReport, Scheme};

/// Slack allowed on QoS when accepting an iterate, nats.
pub const QOS_SLACK: f64 = 1e-7;

/// Extra QoS asked of each subproblem beyond the floor, nats.
const QOS_MARGIN: f64 = 1e-4;

/// Initialization stops once `τ` improves by less than this, relatively.
const INIT_PROGRESS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Qp,
    Sdp,
    Soc,
    CompQp,
    DpcQp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Self::Qp, Self::Sdp, Self::Soc, Self::CompQp, Self::DpcQp];

    pub fn kind(self) -> MinorantKind {
        match self {
            Self::Sdp => MinorantKind::Sdp,
            Self::Soc => MinorantKind::Soc,
            _ => MinorantKind::Qp,
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            Self::CompQp => Scheme::Comp,
            Self::DpcQp => Scheme::Dpc,
            _ => Scheme::Noma,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Qp => "qp",
            Self::Sdp => "sdp",
            Self::Soc => "soc",
            Self::CompQp => "comp-qp",
            Self::DpcQp => "dpc-qp",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Self::CompQp | Self::DpcQp)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub max_init_iterations: usize,
    pub algorithm: Algorithm,
    /// Allow clusters of more than two UEs.
    pub cluster_generalization: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iterations: 100,
            max_init_iterations: 50,
            algorithm: Algorithm::Qp,
            cluster_generalization: false,
        }
    }
}

impl OptimizerSettings {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_iterations == 0 || self.max_init_iterations == 0 {
            return Err(Error::InvalidConfig("epsilon must be positive and iteration caps at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    IterationCap,
    InitFailed { best_tau: f64 },
    /// A subproblem or minorant construction failed; the last good iterate is kept.
    NumericalFailure,
    /// The subproblem's point did not improve the exact objective.
    Stalled,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::IterationCap => "iteration-cap",
            Self::InitFailed { .. } => "init-failed",
            Self::NumericalFailure => "numerical-failure",
            Self::Stalled => "stalled",
        }
    }

    /// The run ended at a QoS-feasible point.
    pub fn is_feasible(&self) -> bool {
        !matches!(self, Self::InitFailed { .. })
    }
}

/// One accepted path-following iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub objective_nats: f64,
    pub min_rate_nats: f64,
    /// Largest per-BS power as a fraction of the budget.
    pub max_power_fraction: f64,
    /// Optimal value of the subproblem that produced this iterate (none for the start).
    pub subproblem_objective: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationTrace {
    pub algorithm: Algorithm,
    pub status: RunStatus,
    /// Exact ratio `min rate / r` after each initialization step.
    pub init_tau: Vec<f64>,
    pub iterates: Vec<IterateRecord>,
    /// In the caller's units.
    pub precoders: PrecoderSet,
    pub report: RateReport,
}

impl IterationTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.iterates.iter().map(|r| r.objective_nats).collect()
    }

    /// Subproblem solves after initialization.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        self.report.total_nats()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Final relative objective increment, and the relative gap between the
/// last subproblem's optimum and the exact objective it started from.
pub fn kkt_gap(trace: &IterationTrace) -> f64 {
    let obj = trace.objectives();
    let n = obj.len();
    if n < 2 {
        return 0.0;
    }
    let (prev, last) = (obj[n - 2], obj[n - 1]);
    let increment = (last - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
    let certificate = trace.iterates[n - 1]
        .subproblem_objective
        .map_or(0.0, |s| (s - prev).abs() / prev.abs().max(f64::MIN_POSITIVE));
    increment.max(certificate)
}

/// Problem in units where `σ² = 1` and every BS budget is 1.
struct Normalized<'a> {
    channels: Channels,
    structure: DecodeStructure,
    qos: f64,
    kind: MinorantKind,
    backend: &'a dyn ConicBackend,
}

impl Normalized<'_> {
    /// Lowering parameters with the QoS floor raised by `margin` (if nonzero).
    fn params(&self, margin: f64) -> LoweringParams {
        let qos_nats = if self.qos > 0.0 { self.qos + margin } else { self.qos };
        LoweringParams { power: 1.0, qos_nats }
    }

    fn prepare(&self, v: &PrecoderSet) -> Result<PrecoderSet> {
        if self.kind == MinorantKind::Soc {
            rotate_phases(&self.channels, v)
        } else {
            Ok(v.clone())
        }
    }

    fn report(&self, v: &PrecoderSet) -> Result<RateReport> {
        evaluate(&self.channels, v, &self.structure)
    }

    fn program(&self, v: &PrecoderSet, feasibility: bool, margin: f64) -> Result<ConicProgram> {
        let (c, s) = (&self.channels, &self.structure);
        let p = self.params(margin);
        Ok(match (self.kind, feasibility) {
            (MinorantKind::Qp, false) => lower_qp_subproblem(&qp_minorants(v, c, s)?, p),
            (MinorantKind::Sdp, false) => lower_sdp_subproblem(&sdp_minorants(v, c, s)?, p),
            (MinorantKind::Soc, false) => lower_soc_subproblem(&soc_minorants(v, c, s)?, p),
            (MinorantKind::Qp, true) => lower_feasibility_subproblem(MinorantSet::Qp(&qp_minorants(v, c, s)?), p),
            (MinorantKind::Sdp, true) => {
                lower_feasibility_subproblem(MinorantSet::Sdp(&sdp_minorants(v, c, s)?), p)
            }
            (MinorantKind::Soc, true) => {
                lower_feasibility_subproblem(MinorantSet::Soc(&soc_minorants(v, c, s)?), p)
            }
        })
    }

    /// Solve one subproblem at `v`; the power-projected point and the optimum.
    fn step(&self, v: &PrecoderSet, feasibility: bool) -> Result<(PrecoderSet, f64)> {
        let (raw, objective) = self.solve_raw(v, feasibility, 0.0)?;
        Ok((self.prepare(&raw)?, objective))
    }

    /// Like [`Self::step`] but without the SOC phase rotation, so the point
    /// stays in the frame of the minorants built at `v`.
    fn solve_raw(&self, v: &PrecoderSet, feasibility: bool, margin: f64) -> Result<(PrecoderSet, f64)> {
        let program = self.program(v, feasibility, margin)?;
        let sol = solve(&program, self.backend)?;
        // Inexact points are still screened by the exact-rate acceptance test.
        let usable = sol.status.has_solution()
            || matches!(sol.status, SolveStatus::IterationLimit | SolveStatus::NumericalFailure)
                && sol.x.iter().all(|x| x.is_finite());
        if !usable {
            return Err(Error::Backend(format!("subproblem status {:?}", sol.status)));
        }
        if sol.status != SolveStatus::Optimal {
            log::debug!("subproblem status {:?}", sol.status);
        }
        Ok((project_power(&program.unpack(&sol.x)?, 1.0), sol.objective))
    }

    fn record(&self, v: &PrecoderSet, sub: Option<f64>, start: Instant) -> Result<(IterateRecord, RateReport)> {
        let report = self.report(v)?;
        let rec = IterateRecord {
            objective_nats: report.total_nats(),
            min_rate_nats: report.min_rate_nats(),
            max_power_fraction: (0..v.n_cells()).map(|i| v.cell_power(i)).fold(0.0, f64::max),
            subproblem_objective: sub,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((rec, report))
    }

    fn tau(&self, report: &RateReport) -> f64 {
        if self.qos > 0.0 { report.min_rate_nats() / self.qos } else { f64::INFINITY }
    }
}

/// Step fractions tried when a full step fails exact acceptance.
const BACKTRACK: [f64; 5] = [0.9, 0.7, 0.5, 0.3, 0.1];

/// `a + λ (b − a)`; convex in every constraint, so budgets carry over.
fn blend(a: &PrecoderSet, b: &PrecoderSet, lambda: f64) -> Result<PrecoderSet> {
    let m = a
        .matrices()
        .iter()
        .zip(b.matrices())
        .map(|(x, y)| x * C64::new(1.0 - lambda, 0.0) + y * C64::new(lambda, 0.0))
        .collect();
    PrecoderSet::from_matrices(a.n_cells(), a.users_per_cell(), m)
}

/// Scale down every BS whose power exceeds `budget`.
pub fn project_power(v: &PrecoderSet, budget: f64) -> PrecoderSet {
    let mut out = v.clone();
    for i in 0..v.n_cells() {
        let p = v.cell_power(i);
        if p > budget {
            // Land strictly inside so rounding cannot leave the budget.
            out.scale_cell(i, (budget / p).sqrt() * (1.0 - 1e-12));
        }
    }
    out
}

fn structure_for(algorithm: Algorithm, plan: &ClusterPlan) -> Result<DecodeStructure> {
    DecodeStructure::for_scheme(algorithm.scheme(), plan)
}

fn normalize<'a>(
    channels: &Channels,
    plan: &ClusterPlan,
    config: &NetworkConfig,
    settings: &OptimizerSettings,
    backend: &'a dyn ConicBackend,
) -> Result<(Normalized<'a>, f64)> {
    settings.validate()?;
    if plan.max_cluster_size() > 2 && !settings.cluster_generalization && settings.algorithm.scheme() == Scheme::Noma {
        return Err(Error::InvalidConfig("clusters above two UEs need cluster_generalization".into()));
    }
    if settings.algorithm == Algorithm::Soc && (channels.rx_antennas() != 1 || config.streams != 1) {
        return Err(Error::InvalidConfig("the SOC algorithm needs Nr = L = 1".into()));
    }
    let power = config.power_budget_w();
    let gain = (power / channels.noise_power()).sqrt();
    let norm = Normalized {
        channels: channels.rescaled(gain, 1.0),
        structure: structure_for(settings.algorithm, plan)?,
        qos: config.qos_threshold_nats(),
        kind: settings.algorithm.kind(),
        backend,
    };
    Ok((norm, power))
}

struct InitOutcome {
    v: PrecoderSet,
    tau: Vec<f64>,
    ok: bool,
}

fn init(norm: &Normalized<'_>, config: &NetworkConfig, settings: &OptimizerSettings) -> Result<InitOutcome> {
    let mut v = norm.prepare(&PrecoderSet::seed(&norm.channels, config.streams, 1.0))?;
    let mut taus = Vec::new();
    let mut tau = norm.tau(&norm.report(&v)?);
    if tau >= 1.0 {
        return Ok(InitOutcome { v, tau: taus, ok: true });
    }
    let mut best = (tau, v.clone());
    for _ in 0..settings.max_init_iterations {
        let next = match norm.step(&v, true) {
            Ok((next, _)) => next,
            Err(e) => {
                log::debug!("initialization step failed: {e}");
                return Ok(InitOutcome { v: best.1, tau: taus, ok: false });
            }
        };
        tau = norm.tau(&norm.report(&next)?);
        taus.push(tau);
        v = next;
        if tau >= 1.0 {
            return Ok(InitOutcome { v, tau: taus, ok: true });
        }
        if tau <= best.0 * (1.0 + INIT_PROGRESS) {
            if tau > best.0 {
                best = (tau, v.clone());
            }
            break;
        }
        best = (tau, v.clone());
    }
    Ok(InitOutcome { v: best.1, tau: taus, ok: false })
}

/// Generate a QoS-feasible start by iterating the max-min ratio subproblem.
pub fn initialize(
    channels: &Channels,
    plan: &ClusterPlan,
    config: &NetworkConfig,
    settings: &OptimizerSettings,
) -> Result<std::result::Result<PrecoderSet, f64>> {
    let backend = ClarabelBackend::default();
    let (norm, power) = normalize(channels, plan, config, settings, &backend)?;
    let out = init(&norm, config, settings)?;
    if out.ok {
        Ok(Ok(out.v.scaled(power.sqrt())))
    } else {
        let best = norm.tau(&norm.report(&out.v)?);
        Ok(Err(best))
    }
}

pub fn run_path_following(
    channels: &Channels,
    plan: &ClusterPlan,
    config: &NetworkConfig,
    settings: &OptimizerSettings,
) -> Result<IterationTrace> {
    run_with_backend(channels, plan, config, settings, &ClarabelBackend::default())
}

/// CoMP or DPC baselines through the same machinery.
pub fn run_baseline(
    channels: &Channels,
    plan: &ClusterPlan,
    config: &NetworkConfig,
    settings: &OptimizerSettings,
) -> Result<IterationTrace> {
    if !settings.algorithm.is_baseline() {
        return Err(Error::InvalidConfig(format!("{} is not a baseline", settings.algorithm)));
    }
    run_path_following(channels, plan, config, settings)
}

pub fn run_with_backend(
    channels: &Channels,
    plan: &ClusterPlan,
    config: &NetworkConfig,
    settings: &OptimizerSettings,
    backend: &dyn ConicBackend,
) -> Result<IterationTrace> {
    let (norm, power) = normalize(channels, plan, config, settings, backend)?;
    let start = Instant::now();
    let init = init(&norm, config, settings)?;
    let finish = |status: RunStatus, v: &PrecoderSet, iterates: Vec<IterateRecord>, tau: Vec<f64>| {
        let precoders = v.scaled(power.sqrt());
        let report = evaluate(channels, &precoders, &norm.structure)?;
        Ok(IterationTrace { algorithm: settings.algorithm, status, init_tau: tau, iterates, precoders, report })
    };
    if !init.ok {
        let best_tau = norm.tau(&norm.report(&init.v)?);
        return finish(RunStatus::InitFailed { best_tau }, &init.v, Vec::new(), init.tau);
    }

    let mut v = init.v;
    let (first, _) = norm.record(&v, None, start)?;
    let mut iterates = vec![first];
    let mut status = RunStatus::IterationCap;
    for _ in 0..settings.max_iterations {
        let current = iterates.last().expect("start recorded").objective_nats;
        let acceptable = |r: &IterateRecord| {
            r.min_rate_nats >= norm.qos - QOS_SLACK && r.max_power_fraction <= 1.0 && r.objective_nats >= current
        };
        // One solve with the QoS rows raised by `margin`; the full step, or
        // the longest acceptable step toward it, or the full step as is.
        let attempt = |margin: f64| -> Result<(PrecoderSet, IterateRecord, bool)> {
            let (raw, sub) = norm.solve_raw(&v, false, margin)?;
            let full = norm.prepare(&raw)?;
            let (rec, _) = norm.record(&full, Some(sub), start)?;
            if acceptable(&rec) {
                return Ok((full, rec, true));
            }
            // The minorants are concave and touch at `v`, so points on the
            // segment toward `raw` keep the anchor's QoS margins and ascend.
            for lambda in BACKTRACK {
                let b = norm.prepare(&blend(&v, &raw, lambda)?)?;
                let (r, _) = norm.record(&b, Some(sub), start)?;
                if acceptable(&r) {
                    log::debug!("{}: accepted step fraction {lambda}", settings.algorithm);
                    return Ok((b, r, true));
                }
            }
            Ok((full, rec, false))
        };
        // Reduced-accuracy solves can undershoot QoS rows by about 1e-4, so
        // ask for a little more first and fall back to the plain floor.
        let outcome = match attempt(QOS_MARGIN) {
            Ok(out) if out.2 => Ok(out),
            first => {
                if let Err(e) = &first {
                    log::debug!("{}: subproblem with QoS margin failed: {e}", settings.algorithm);
                }
                match attempt(0.0) {
                    Ok(out) if !out.2 && matches!(first, Ok(_)) => first,
                    second => second,
                }
            }
        };
        let (next, rec) = match outcome {
            Ok((next, rec, _)) => (next, rec),
            Err(e) => {
                log::debug!("{}: subproblem failed: {e}", settings.algorithm);
                status = RunStatus::NumericalFailure;
                break;
            }
        };
        let feasible = rec.min_rate_nats >= norm.qos - QOS_SLACK && rec.max_power_fraction <= 1.0;
        let change = (rec.objective_nats - current) / current.abs().max(f64::MIN_POSITIVE);
        if !feasible || rec.objective_nats < current {
            log::debug!(
                "{}: rejected step, objective {} -> {}, min rate {} (floor {})",
                settings.algorithm,
                current,
                rec.objective_nats,
                rec.min_rate_nats,
                norm.qos
            );
            status = if feasible && change.abs() <= settings.epsilon { RunStatus::Converged } else { RunStatus::Stalled };
            break;
        }
        v = next;
        iterates.push(rec);
        if change <= settings.epsilon {
            status = RunStatus::Converged;
            break;
        }
    }
    finish(status, &v, iterates, init.tau)
}
