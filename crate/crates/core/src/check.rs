//! Fast self-checks behind `mimo-noma check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::linalg::{complex_gaussian, scaled_identity, CMatrix, C64};
use crate::network::{build_topology, pair_users, sample_channels, Channels, ClusterPlan, NetworkConfig};
use crate::optimizer::{run_path_following, Algorithm, OptimizerSettings, QOS_SLACK};
use crate::solver::{constructed_dims, problem_dims};
use crate::surrogate::{
    check_inequality_in1, check_inequality_in2, check_inequality_zf8, qp_minorants, sdp_minorants, soc_minorants,
    MinorantKind,
};
use crate::throughput::{cluster_rates, evaluate, miso_rates, noma_rates, DecodeStructure, PrecoderSet};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<std::result::Result<String, String>>) -> CheckOutcome {
    match result {
        Ok(Ok(detail)) => CheckOutcome { name, passed: true, detail },
        Ok(Err(detail)) => CheckOutcome { name, passed: false, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
    }
}

fn random_pd(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let extra = r.random_range(0..3);
    let a = complex_gaussian(r, n, n + extra);
    &a * a.adjoint() + scaled_identity(n, r.random_range(0.1..1.0))
}

fn random_channels(r: &mut ChaCha8Rng, n: usize, u: usize, nr: usize, nt: usize) -> Result<Channels> {
    let h = (0..n * n * u).map(|_| complex_gaussian(r, nr, nt) * C64::new(r.random_range(0.2..2.0), 0.0)).collect();
    Channels::from_parts(n, u, 1.0, h)
}

fn random_precoders(r: &mut ChaCha8Rng, n: usize, u: usize, nt: usize, l: usize) -> Result<PrecoderSet> {
    let mut v = PrecoderSet::from_matrices(n, u, (0..n * u).map(|_| complex_gaussian(r, nt, l)).collect())?;
    for i in 0..n {
        let f = (r.random_range(0.2..2.0) / v.cell_power(i)).sqrt();
        v.scale_cell(i, f);
    }
    Ok(v)
}

fn perturbed(r: &mut ChaCha8Rng, v: &PrecoderSet, step: f64) -> Result<PrecoderSet> {
    let m = v
        .matrices()
        .iter()
        .map(|b| b + complex_gaussian(r, b.nrows(), b.ncols()) * C64::new(step, 0.0))
        .collect();
    PrecoderSet::from_matrices(v.n_cells(), v.users_per_cell(), m)
}

fn inequalities(samples: usize) -> Result<std::result::Result<String, String>> {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let n = r.random_range(1..5);
        let l = r.random_range(1..4);
        let (x, x_bar) = (random_pd(&mut r, n), random_pd(&mut r, n));
        let (v, v_bar) = (complex_gaussian(&mut r, n, l), complex_gaussian(&mut r, n, l));
        let z = 10f64.powf(r.random_range(-4.0..4.0));
        let zb = 10f64.powf(r.random_range(-4.0..4.0));
        worst = worst
            .min(check_inequality_in1(&v, &v_bar, &x, &x_bar)?)
            .min(check_inequality_in2(&x, &x_bar)?)
            .min(check_inequality_zf8(z, zb)?);
    }
    let detail = format!("{samples} samples, worst residual {worst:.3e}");
    Ok(if worst >= -1e-9 { Ok(detail) } else { Err(detail) })
}

enum Family {
    Qp(crate::surrogate::QpMinorantSet),
    Sdp(crate::surrogate::SdpMinorantSet),
    Soc(crate::surrogate::SocMinorantSet),
}

impl Family {
    fn build(kind: MinorantKind, anchor: &PrecoderSet, ch: &Channels, s: &DecodeStructure) -> Result<Self> {
        Ok(match kind {
            MinorantKind::Qp => Self::Qp(qp_minorants(anchor, ch, s)?),
            MinorantKind::Sdp => Self::Sdp(sdp_minorants(anchor, ch, s)?),
            MinorantKind::Soc => Self::Soc(soc_minorants(anchor, ch, s)?),
        })
    }

    /// The minorant of one message, or `None` outside the trust region.
    fn value(&self, v: &PrecoderSet, ue: crate::network::UeId) -> Option<f64> {
        match self {
            Self::Qp(s) => Some(s.message_value(v, ue)),
            Self::Sdp(s) => s.in_trust_region(v).then(|| s.message_value(v, ue).ok()).flatten(),
            Self::Soc(s) => s.in_trust_region(v).then(|| s.message_value(v, ue).ok()).flatten(),
        }
    }
}

fn minorants(anchors: usize, samples: usize) -> Result<std::result::Result<String, String>> {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let (n, k, nt) = (2, 2, 4);
    let structure = DecodeStructure::noma(&ClusterPlan::identity_pairs(n, k))?;
    let (mut touch, mut dominated, mut checked) = (0.0f64, f64::INFINITY, 0usize);
    for kind in [MinorantKind::Qp, MinorantKind::Sdp, MinorantKind::Soc] {
        let (nr, l) = if kind == MinorantKind::Soc { (1, 1) } else { (2, 2) };
        for _ in 0..anchors {
            let ch = random_channels(&mut r, n, 2 * k, nr, nt)?;
            let anchor = random_precoders(&mut r, n, 2 * k, nt, l)?;
            let family = Family::build(kind, &anchor, &ch, &structure)?;
            // Smallest exact-minus-minorant gap over all messages.
            let gap = |v: &PrecoderSet| -> Result<Option<f64>> {
                let exact = evaluate(&ch, v, &structure)?;
                let mut worst = f64::INFINITY;
                for ue in ch.ues() {
                    match family.value(v, ue) {
                        Some(m) => worst = worst.min(exact.rate_nats(ue) - m),
                        None => return Ok(None),
                    }
                }
                Ok(Some(worst))
            };
            let scale = evaluate(&ch, &anchor, &structure)?.total_nats().max(1.0);
            touch = touch.max(gap(&anchor)?.map_or(f64::INFINITY, f64::abs) / scale);
            for _ in 0..samples {
                let step = r.random_range(0.0..0.5);
                let v = perturbed(&mut r, &anchor, step)?;
                if let Some(g) = gap(&v)? {
                    dominated = dominated.min(g);
                    checked += 1;
                }
            }
        }
    }
    let detail = format!("touch {touch:.2e}, worst domination gap {dominated:.2e} over {checked} points");
    Ok(if touch <= 1e-8 && dominated >= -1e-9 && checked > 0 { Ok(detail) } else { Err(detail) })
}

fn dims(configs: usize) -> Result<std::result::Result<String, String>> {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = Vec::new();
    for c in 0..configs {
        let soc = c % 3 == 2;
        let nr = if soc { 1 } else { r.random_range(1..4) };
        let nt = r.random_range(2..6);
        let config = NetworkConfig {
            n_cells: r.random_range(1..4),
            pairs_per_cell: r.random_range(1..4),
            tx_antennas: nt,
            rx_antennas: nr,
            streams: if soc { 1 } else { r.random_range(1..=nr.min(nt)) },
            ..NetworkConfig::default()
        };
        let kind = [MinorantKind::Qp, MinorantKind::Sdp, MinorantKind::Soc][c % 3];
        let (a, b) = (problem_dims(&config, kind), constructed_dims(&config, kind, c as u64)?);
        if a != b {
            mismatches.push(format!("{kind:?} {a:?} vs {b:?}"));
        }
    }
    Ok(if mismatches.is_empty() { Ok(format!("{configs} configs match")) } else { Err(mismatches.join("; ")) })
}

fn rate_paths(instances: usize) -> Result<std::result::Result<String, String>> {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let (mut miso_err, mut cluster_err) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let (n, k) = (2, 2);
        let plan = ClusterPlan::identity_pairs(n, k);
        let ch = random_channels(&mut r, n, 2 * k, 1, 3)?;
        let v = random_precoders(&mut r, n, 2 * k, 3, 1)?;
        let (a, b) = (miso_rates(&ch, &v, &plan)?, noma_rates(&ch, &v, &plan)?);
        let ch2 = random_channels(&mut r, n, 2 * k, 2, 3)?;
        let v2 = random_precoders(&mut r, n, 2 * k, 3, 2)?;
        let (c, d) = (cluster_rates(&ch2, &v2, &plan)?, noma_rates(&ch2, &v2, &plan)?);
        for ue in ch.ues() {
            miso_err = miso_err.max((a.rate_nats(ue) - b.rate_nats(ue)).abs());
            cluster_err = cluster_err.max((c.rate_nats(ue) - d.rate_nats(ue)).abs());
        }
    }
    let detail = format!("miso vs noma {miso_err:.2e}, cluster vs noma {cluster_err:.2e}");
    Ok(if miso_err <= 1e-9 && cluster_err <= 1e-12 { Ok(detail) } else { Err(detail) })
}

fn ascent() -> Result<std::result::Result<String, String>> {
    let mimo = NetworkConfig { n_cells: 2, pairs_per_cell: 1, tx_antennas: 3, rx_antennas: 2, streams: 1, ..Default::default() };
    let miso = NetworkConfig { n_cells: 2, pairs_per_cell: 1, qos_threshold_bps_hz: 0.5, ..NetworkConfig::miso(3) };
    let mut bad = Vec::new();
    let mut runs = 0;
    for (config, algs) in [
        (&mimo, &[Algorithm::Qp, Algorithm::Sdp, Algorithm::CompQp, Algorithm::DpcQp][..]),
        (&miso, &[Algorithm::Soc][..]),
    ] {
        let topo = build_topology(config, 7)?;
        let ch = sample_channels(&topo, config, 7)?;
        let plan = pair_users(&topo, config, 2, 7)?;
        for &alg in algs {
            let trace = run_path_following(&ch, &plan, config, &OptimizerSettings::for_algorithm(alg))?;
            runs += 1;
            let obj = trace.objectives();
            let monotone = obj.windows(2).all(|w| w[1] >= w[0] - 1e-7);
            let feasible = trace.iterates.iter().all(|i| {
                i.min_rate_nats >= config.qos_threshold_nats() - QOS_SLACK && i.max_power_fraction <= 1.0 + 1e-9
            });
            if !(monotone && feasible) {
                bad.push(format!("{alg}: monotone {monotone} feasible {feasible}"));
            }
        }
    }
    Ok(if bad.is_empty() { Ok(format!("{runs} runs monotone and feasible")) } else { Err(bad.join("; ")) })
}

/// Run every check; `quick` shrinks sample counts.
pub fn run_checks(quick: bool) -> Vec<CheckOutcome> {
    let s = if quick { 10 } else { 1 };
    vec![
        outcome("inequalities", inequalities(10_000 / s)),
        outcome("minorants", minorants(if quick { 2 } else { 10 }, 1000 / s)),
        outcome("dims", dims(20)),
        outcome("rate-paths", rate_paths(100 / s)),
        outcome("ascent", ascent()),
    ]
}
