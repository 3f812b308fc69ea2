use std::f64::consts::LN_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::decode::{received_all, DecodeStructure, ReceivedAt, Scheme};
use super::PrecoderSet;
use crate::error::{Error, Result};
use crate::linalg::{rate_log_det, CMatrix, C64};
use crate::network::{Channels, ClusterPlan, NetworkConfig, UeId};

/// Covariances seen by one UE under each exclusion set.
#[derive(Clone, Debug)]
pub struct CovarianceBundle {
    pub ue: UeId,
    /// Everything received, own signal included.
    pub m_full: CMatrix,
    /// Own message removed (CoMP: all else is interference).
    pub m_comp: CMatrix,
    /// Intra-cell messages of index `≥ j` removed (DPC).
    pub m_dpc: CMatrix,
    /// Present when the UE belongs to a two-UE cluster.
    pub pair: Option<PairCovariances>,
}

/// Pair `(weak, strong)` with the weak UE's message decoded first.
#[derive(Clone, Debug)]
pub struct PairCovariances {
    pub weak: UeId,
    pub strong: UeId,
    /// At the strong UE without the weak message.
    pub strong_minus_weak: CMatrix,
    /// At the weak UE without its own message.
    pub weak_minus_weak: CMatrix,
    /// At the strong UE without either pair message.
    pub strong_minus_both: CMatrix,
}

fn covariance_by_sum(
    channels: &Channels,
    v: &PrecoderSet,
    decoder: UeId,
    keep: impl Fn(UeId) -> bool,
) -> CMatrix {
    let mut m = crate::linalg::scaled_identity(channels.rx_antennas(), channels.noise_power());
    for f in v.ues() {
        if keep(f) {
            let g = channels.link(f.cell, decoder) * v.get(f);
            m += &g * g.adjoint();
        }
    }
    m
}

pub fn covariance_bundle(
    channels: &Channels,
    v: &PrecoderSet,
    plan: &ClusterPlan,
    ue: UeId,
) -> Result<CovarianceBundle> {
    v.check_shape(channels)?;
    plan.validate()?;
    if plan.n_cells() != channels.n_cells() || plan.users_per_cell != channels.users_per_cell() {
        return Err(Error::Dimension("cluster plan does not match channels".into()));
    }
    let m_full = covariance_by_sum(channels, v, ue, |_| true);
    let m_comp = covariance_by_sum(channels, v, ue, |f| f != ue);
    let m_dpc = covariance_by_sum(channels, v, ue, |f| f.cell != ue.cell || f.ue < ue.ue);
    let pair = match plan.locate(ue) {
        (cluster, _) if cluster.len() == 2 => {
            let weak = UeId::new(ue.cell, cluster[0]);
            let strong = UeId::new(ue.cell, cluster[1]);
            Some(PairCovariances {
                weak,
                strong,
                strong_minus_weak: covariance_by_sum(channels, v, strong, |f| f != weak),
                weak_minus_weak: covariance_by_sum(channels, v, weak, |f| f != weak),
                strong_minus_both: covariance_by_sum(channels, v, strong, |f| f != weak && f != strong),
            })
        }
        _ => None,
    };
    Ok(CovarianceBundle { ue, m_full, m_comp, m_dpc, pair })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderRate {
    pub decoder: UeId,
    pub rate_nats: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeRate {
    pub ue: UeId,
    /// Minimum over `decoders`.
    pub rate_nats: f64,
    pub decoders: Vec<DecoderRate>,
}

/// Per-UE achievable rates under one scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scheme: Scheme,
    pub n_cells: usize,
    pub users_per_cell: usize,
    /// Flat `(cell, ue)` order.
    pub rates: Vec<UeRate>,
}

/// One CSV row of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeRateRow {
    pub cell: usize,
    pub ue: usize,
    pub class: String,
    pub rate_bps_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub scheme: Scheme,
    pub per_cell_bps_hz: Vec<f64>,
    pub total_bps_hz: f64,
}

pub fn nats_to_bps_hz(nats: f64) -> f64 {
    nats / LN_2
}

impl RateReport {
    pub fn rate_nats(&self, ue: UeId) -> f64 {
        self.rates[ue.flat(self.users_per_cell)].rate_nats
    }

    pub fn rate_bps_hz(&self, ue: UeId) -> f64 {
        nats_to_bps_hz(self.rate_nats(ue))
    }

    pub fn ue(&self, ue: UeId) -> &UeRate {
        &self.rates[ue.flat(self.users_per_cell)]
    }

    pub fn cell_sum_nats(&self, cell: usize) -> f64 {
        let u = self.users_per_cell;
        self.rates[cell * u..(cell + 1) * u].iter().map(|r| r.rate_nats).sum()
    }

    /// The objective: sum of all UE rates, nats.
    pub fn total_nats(&self) -> f64 {
        self.rates.iter().map(|r| r.rate_nats).sum()
    }

    pub fn total_bps_hz(&self) -> f64 {
        nats_to_bps_hz(self.total_nats())
    }

    pub fn min_rate_nats(&self) -> f64 {
        self.rates.iter().map(|r| r.rate_nats).fold(f64::INFINITY, f64::min)
    }

    /// Best-to-worst UE rate ratio (infinite when some UE gets nothing).
    pub fn bwr(&self) -> f64 {
        let max = self.rates.iter().map(|r| r.rate_nats).fold(0.0, f64::max);
        let min = self.min_rate_nats();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    pub fn rows(&self, config: &NetworkConfig) -> Vec<UeRateRow> {
        self.rates
            .iter()
            .map(|r| UeRateRow {
                cell: r.ue.cell,
                ue: r.ue.ue,
                class: config.ue_class(r.ue.ue).as_str().to_string(),
                rate_bps_hz: nats_to_bps_hz(r.rate_nats),
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, config: &NetworkConfig, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows(config) {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> RateSummary {
        RateSummary {
            scheme: self.scheme,
            per_cell_bps_hz: (0..self.n_cells).map(|i| nats_to_bps_hz(self.cell_sum_nats(i))).collect(),
            total_bps_hz: self.total_bps_hz(),
        }
    }
}

fn check_inputs(channels: &Channels, v: &PrecoderSet) -> Result<()> {
    v.check_shape(channels)?;
    if v.streams() > channels.rx_antennas().min(channels.tx_antennas()) {
        return Err(Error::Dimension("streams exceed min(Nt, Nr)".into()));
    }
    Ok(())
}

/// Evaluate every message of `structure` exactly.
pub fn evaluate(channels: &Channels, v: &PrecoderSet, structure: &DecodeStructure) -> Result<RateReport> {
    check_inputs(channels, v)?;
    structure.check_shape(channels)?;
    let received = received_all(channels, v);
    let u = channels.users_per_cell();
    let rates = structure
        .messages
        .iter()
        .map(|msg| {
            let decoders = msg
                .terms
                .iter()
                .map(|term| {
                    let at: &ReceivedAt = &received[term.decoder.flat(u)];
                    let m = at.covariance(channels.noise_power(), &term.excluded, u);
                    let signal = &at.g[msg.message.flat(u)];
                    Ok(DecoderRate { decoder: term.decoder, rate_nats: rate_log_det(signal, &m)? })
                })
                .collect::<Result<Vec<_>>>()?;
            let rate_nats = decoders.iter().map(|d| d.rate_nats).fold(f64::INFINITY, f64::min);
            Ok(UeRate { ue: msg.message, rate_nats, decoders })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport { scheme: structure.scheme, n_cells: channels.n_cells(), users_per_cell: u, rates })
}

fn own_rate(channels: &Channels, v: &PrecoderSet, message: UeId, decoder: UeId, m: &CMatrix) -> Result<f64> {
    rate_log_det(&(channels.link(message.cell, decoder) * v.get(message)), m)
}

/// Two-UE NOMA: the weak message is decoded at both UEs, the strong one at
/// itself after cancellation. Singleton clusters fall back to CoMP.
pub fn noma_rates(channels: &Channels, v: &PrecoderSet, plan: &ClusterPlan) -> Result<RateReport> {
    check_inputs(channels, v)?;
    if plan.max_cluster_size() > 2 {
        return Err(Error::InvalidPlan("noma_rates handles clusters of at most two UEs".into()));
    }
    let mut rates = Vec::with_capacity(channels.n_cells() * channels.users_per_cell());
    for ue in channels.ues() {
        let b = covariance_bundle(channels, v, plan, ue)?;
        let entry = match &b.pair {
            None => {
                let r = own_rate(channels, v, ue, ue, &b.m_comp)?;
                UeRate { ue, rate_nats: r, decoders: vec![DecoderRate { decoder: ue, rate_nats: r }] }
            }
            Some(p) if p.weak == ue => {
                let at_self = own_rate(channels, v, ue, ue, &p.weak_minus_weak)?;
                let at_strong = own_rate(channels, v, ue, p.strong, &p.strong_minus_weak)?;
                UeRate {
                    ue,
                    rate_nats: at_self.min(at_strong),
                    decoders: vec![
                        DecoderRate { decoder: ue, rate_nats: at_self },
                        DecoderRate { decoder: p.strong, rate_nats: at_strong },
                    ],
                }
            }
            Some(p) => {
                let r = own_rate(channels, v, ue, ue, &p.strong_minus_both)?;
                UeRate { ue, rate_nats: r, decoders: vec![DecoderRate { decoder: ue, rate_nats: r }] }
            }
        };
        rates.push(entry);
    }
    Ok(RateReport {
        scheme: Scheme::Noma,
        n_cells: channels.n_cells(),
        users_per_cell: channels.users_per_cell(),
        rates,
    })
}

fn single_term_rates(
    channels: &Channels,
    v: &PrecoderSet,
    plan: &ClusterPlan,
    scheme: Scheme,
) -> Result<RateReport> {
    check_inputs(channels, v)?;
    let mut rates = Vec::new();
    for ue in channels.ues() {
        let b = covariance_bundle(channels, v, plan, ue)?;
        let m = if scheme == Scheme::Dpc { &b.m_dpc } else { &b.m_comp };
        let r = own_rate(channels, v, ue, ue, m)?;
        rates.push(UeRate { ue, rate_nats: r, decoders: vec![DecoderRate { decoder: ue, rate_nats: r }] });
    }
    Ok(RateReport { scheme, n_cells: channels.n_cells(), users_per_cell: channels.users_per_cell(), rates })
}

/// Linear precoding with all interference treated as noise.
pub fn comp_rates(channels: &Channels, v: &PrecoderSet, plan: &ClusterPlan) -> Result<RateReport> {
    single_term_rates(channels, v, plan, Scheme::Comp)
}

/// Dirty-paper coding per cell, encoding order from the last UE index down.
pub fn dpc_rates(channels: &Channels, v: &PrecoderSet, plan: &ClusterPlan) -> Result<RateReport> {
    single_term_rates(channels, v, plan, Scheme::Dpc)
}

/// Successive decoding within clusters of any size.
pub fn cluster_rates(channels: &Channels, v: &PrecoderSet, plan: &ClusterPlan) -> Result<RateReport> {
    evaluate(channels, v, &DecodeStructure::noma(plan)?)
}

/// Rotate each `V_{i,j}` so that `H_{i,i,j} V_{i,j}` is real and non-negative.
pub fn rotate_phases(channels: &Channels, v: &PrecoderSet) -> Result<PrecoderSet> {
    if channels.rx_antennas() != 1 || v.streams() != 1 {
        return Err(Error::Dimension("phase rotation needs Nr = 1 and L = 1".into()));
    }
    v.check_shape(channels)?;
    let mut out = v.clone();
    for ue in channels.ues() {
        let hv = (channels.direct(ue) * v.get(ue))[(0, 0)];
        if hv.norm() > 0.0 {
            *out.get_mut(ue) *= C64::from_polar(1.0, -hv.arg());
        }
    }
    Ok(out)
}

/// Single-antenna receivers: same decoding rules as [`cluster_rates`] but
/// evaluated on scalar SINRs after phase rotation.
pub fn miso_rates(channels: &Channels, v: &PrecoderSet, plan: &ClusterPlan) -> Result<RateReport> {
    let v = rotate_phases(channels, v)?;
    let structure = DecodeStructure::noma(plan)?;
    structure.check_shape(channels)?;
    let sigma2 = channels.noise_power();
    let gain = |f: UeId, d: UeId| (channels.link(f.cell, d) * v.get(f))[(0, 0)].norm_sqr();
    let rates = structure
        .messages
        .iter()
        .map(|msg| {
            let decoders: Vec<DecoderRate> = msg
                .terms
                .iter()
                .map(|t| {
                    let interference: f64 = v
                        .ues()
                        .filter(|f| !t.excluded.contains(f))
                        .map(|f| gain(f, t.decoder))
                        .sum();
                    let sinr = gain(msg.message, t.decoder) / (sigma2 + interference);
                    DecoderRate { decoder: t.decoder, rate_nats: sinr.ln_1p() }
                })
                .collect();
            let rate_nats = decoders.iter().map(|d| d.rate_nats).fold(f64::INFINITY, f64::min);
            UeRate { ue: msg.message, rate_nats, decoders }
        })
        .collect();
    Ok(RateReport {
        scheme: Scheme::Noma,
        n_cells: channels.n_cells(),
        users_per_cell: channels.users_per_cell(),
        rates,
    })
}
