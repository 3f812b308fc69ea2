use super::{lookup, term_anchors, zf_coefficients, MinorantId};
use crate::error::{Error, Result};
use crate::linalg::{dominant_right_singular_vectors, CMatrix, C64};
use crate::network::{Channels, UeId};
use crate::throughput::{DecodeStructure, PrecoderSet};

/// Relative size of the anchor repair applied when a signal product vanishes.
pub const DEGENERACY_STEP: f64 = 1e-6;

/// Fractional minorant `a(z̄) − b(z̄)·ℳ(V)/φ(V)` of one scalar SINR term,
/// with `φ(V) = 2Re{ḡ* h V_m} − |ḡ|²` a linear lower bound on `|h V_m|²`.
#[derive(Clone, Debug)]
pub struct SocTerm {
    pub id: MinorantId,
    pub decoder: UeId,
    pub anchor_rate: f64,
    pub z_bar: f64,
    pub a: f64,
    pub b: f64,
    /// `ḡ = h V̄_m`.
    pub anchor_signal: C64,
    /// `h = H_{cell(m), d}`, `1 × Nt`.
    pub signal_row: CMatrix,
    /// `(f, H_{cell(f), d})` for every message still interfering.
    pub interferers: Vec<(UeId, CMatrix)>,
    pub noise_power: f64,
}

impl SocTerm {
    pub fn phi(&self, v: &PrecoderSet) -> f64 {
        let x = (&self.signal_row * v.get(self.id.message))[(0, 0)];
        2.0 * (self.anchor_signal.conj() * x).re - self.anchor_signal.norm_sqr()
    }

    /// `ℳ(V) = σ² + Σ_f |h_f V_f|²`.
    pub fn interference(&self, v: &PrecoderSet) -> f64 {
        self.noise_power
            + self.interferers.iter().map(|(f, row)| (row * v.get(*f))[(0, 0)].norm_sqr()).sum::<f64>()
    }

    pub fn eval(&self, v: &PrecoderSet) -> Result<f64> {
        let phi = self.phi(v);
        if !(phi > 0.0) {
            return Err(Error::TrustRegion(format!(
                "{} at decoder {}: φ = {phi:e}",
                self.id.message, self.decoder
            )));
        }
        Ok(self.a - self.b * self.interference(v) / phi)
    }
}

#[derive(Clone, Debug)]
pub struct SocMinorantSet {
    /// The anchor after any degeneracy repair; minorants touch here.
    pub anchor: PrecoderSet,
    pub users_per_cell: usize,
    pub terms: Vec<Vec<SocTerm>>,
}

impl SocMinorantSet {
    pub fn term(&self, id: MinorantId) -> Result<&SocTerm> {
        lookup(&self.terms, id, self.users_per_cell)
    }

    pub fn ids(&self) -> impl Iterator<Item = MinorantId> + '_ {
        self.terms.iter().flat_map(|ts| ts.iter().map(|t| t.id))
    }

    pub fn in_trust_region(&self, v: &PrecoderSet) -> bool {
        self.terms.iter().flatten().all(|t| t.phi(v) > 0.0)
    }

    pub fn message_value(&self, v: &PrecoderSet, ue: UeId) -> Result<f64> {
        let mut best = f64::INFINITY;
        for t in &self.terms[ue.flat(self.users_per_cell)] {
            best = best.min(t.eval(v)?);
        }
        Ok(best)
    }

    pub fn objective(&self, v: &PrecoderSet) -> Result<f64> {
        v.ues().map(|ue| self.message_value(v, ue)).sum()
    }
}

/// Nudges every precoder whose signal product vanishes at one of its
/// decoders along that channel's dominant right singular vector.
fn repair_anchor(anchor: &PrecoderSet, channels: &Channels, structure: &DecodeStructure) -> PrecoderSet {
    let count = anchor.matrices().len().max(1) as f64;
    let rms = (anchor.matrices().iter().map(|m| m.norm_squared()).sum::<f64>() / count).sqrt();
    let step = DEGENERACY_STEP * if rms > 0.0 { rms } else { 1.0 };
    let mut out = anchor.clone();
    for msg in &structure.messages {
        for t in &msg.terms {
            let h = channels.link(msg.message.cell, t.decoder);
            if (h * out.get(msg.message))[(0, 0)].norm_sqr() == 0.0 {
                let dir = dominant_right_singular_vectors(h, 1);
                *out.get_mut(msg.message) += dir * C64::from(step);
            }
        }
    }
    out
}

pub fn soc_minorants(
    anchor: &PrecoderSet,
    channels: &Channels,
    structure: &DecodeStructure,
) -> Result<SocMinorantSet> {
    anchor.check_shape(channels)?;
    if channels.rx_antennas() != 1 || anchor.streams() != 1 {
        return Err(Error::Dimension(format!(
            "fractional minorants need Nr = L = 1 (got Nr = {}, L = {})",
            channels.rx_antennas(),
            anchor.streams()
        )));
    }
    let anchor = repair_anchor(anchor, channels, structure);
    let anchors = term_anchors(channels, &anchor, structure)?;
    let sigma2 = channels.noise_power();
    let terms = anchors
        .into_iter()
        .map(|ts| {
            ts.into_iter()
                .enumerate()
                .map(|(k, t)| {
                    let g = t.signal[(0, 0)];
                    let m_bar = t.covariance[(0, 0)].re;
                    let z_bar = g.norm_sqr() / m_bar;
                    let (a, b) = zf_coefficients(z_bar);
                    SocTerm {
                        id: MinorantId::new(t.message, k),
                        decoder: t.decoder,
                        anchor_rate: t.rate,
                        z_bar,
                        a,
                        b,
                        anchor_signal: g,
                        signal_row: t.links[t.message.cell].clone(),
                        interferers: t.included.iter().map(|&f| (f, t.links[f.cell].clone())).collect(),
                        noise_power: sigma2,
                    }
                })
                .collect()
        })
        .collect();
    Ok(SocMinorantSet { anchor, users_per_cell: channels.users_per_cell(), terms })
}

pub fn eval_soc_minorant(set: &SocMinorantSet, v: &PrecoderSet, which: MinorantId) -> Result<f64> {
    set.term(which)?.eval(v)
}
