use super::{lookup, psd_violation, term_anchors, HermitianAffine, HermitianTerm, MinorantId};
use crate::error::{Error, Result};
use crate::linalg::{hermitize, identity, inner, inverse_pd, min_eigenvalue, psd_sqrt, CMatrix, C64};
use crate::network::{Channels, UeId};
use crate::throughput::{DecodeStructure, PrecoderSet};

/// Matrix-fractional minorant `R(V̄) + L − ⟨C, (I + Q(V))⁻¹⟩` of one
/// decoding term, with the matrix-concave
/// `Q(V) = P(V) − Σ_f (W_f V_f)(W_f V_f)ᴴ` that touches `X(V̄)` at the anchor.
/// The linearized interference `ℒ(V) ⪰ 0` is kept as the trust region.
#[derive(Clone, Debug)]
pub struct SdpTerm {
    pub id: MinorantId,
    pub decoder: UeId,
    pub anchor_rate: f64,
    pub streams: usize,
    pub rx_antennas: usize,
    /// `C = I + X̄`.
    pub c_matrix: CMatrix,
    pub c_sqrt: CMatrix,
    /// Affine part `P(V)` of `Q`, `L × L`.
    pub q_affine: HermitianAffine,
    /// `(f, W_f = B̄invᴴ H_f)` for every message still interfering, `L × Nt`.
    pub q_quadratic: Vec<(UeId, CMatrix)>,
    /// `ℒ(V)`, `Nr × Nr`; `None` when nothing interferes (the region is everything).
    pub trust: Option<HermitianAffine>,
}

impl SdpTerm {
    pub fn q(&self, v: &PrecoderSet) -> CMatrix {
        let mut q = self.q_affine.eval(v);
        for (f, w) in &self.q_quadratic {
            let x = w * v.get(*f);
            q -= &x * x.adjoint();
        }
        hermitize(&q)
    }

    /// Smallest eigenvalue of `ℒ(v)`, or `+∞` without a trust region.
    pub fn trust_margin(&self, v: &PrecoderSet) -> f64 {
        self.trust.as_ref().map_or(f64::INFINITY, |t| min_eigenvalue(&t.eval(v)))
    }

    pub fn in_trust_region(&self, v: &PrecoderSet) -> bool {
        self.trust.as_ref().is_none_or(|t| psd_violation(&t.eval(v)).is_none())
    }

    pub fn eval(&self, v: &PrecoderSet) -> Result<f64> {
        if let Some(t) = &self.trust {
            if let Some(lam) = psd_violation(&t.eval(v)) {
                return Err(Error::TrustRegion(format!(
                    "{} at decoder {}: λ_min(ℒ) = {lam:e}",
                    self.id.message, self.decoder
                )));
            }
        }
        let iq = identity(self.streams) + self.q(v);
        let inv = inverse_pd(&iq, "I + Q(V)").map_err(|_| {
            Error::Domain(format!("I + Q(V) is not positive definite for {}", self.id.message))
        })?;
        Ok(self.anchor_rate + self.streams as f64 - inner(&self.c_matrix, &inv).re)
    }
}

#[derive(Clone, Debug)]
pub struct SdpMinorantSet {
    pub anchor: PrecoderSet,
    pub users_per_cell: usize,
    pub terms: Vec<Vec<SdpTerm>>,
}

impl SdpMinorantSet {
    pub fn term(&self, id: MinorantId) -> Result<&SdpTerm> {
        lookup(&self.terms, id, self.users_per_cell)
    }

    pub fn ids(&self) -> impl Iterator<Item = MinorantId> + '_ {
        self.terms.iter().flat_map(|ts| ts.iter().map(|t| t.id))
    }

    pub fn in_trust_region(&self, v: &PrecoderSet) -> bool {
        self.terms.iter().flatten().all(|t| t.in_trust_region(v))
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

pub fn sdp_minorants(
    anchor: &PrecoderSet,
    channels: &Channels,
    structure: &DecodeStructure,
) -> Result<SdpMinorantSet> {
    let anchors = term_anchors(channels, anchor, structure)?;
    let sigma2 = channels.noise_power();
    let l = anchor.streams();
    let nr = channels.rx_antennas();
    let terms = anchors
        .into_iter()
        .map(|ts| {
            ts.into_iter()
                .enumerate()
                .map(|(k, t)| {
                    let binv = &t.covariance_inv * &t.signal;
                    let x_bar = hermitize(&(t.signal.adjoint() * &binv));
                    let c_matrix = identity(l) + &x_bar;
                    let c_sqrt = psd_sqrt(&c_matrix);

                    let q_const = -(binv.adjoint() * &binv) * C64::from(sigma2);
                    let q_terms = vec![HermitianTerm {
                        ue: t.message,
                        left: binv.adjoint() * &t.links[t.message.cell],
                        right: identity(l),
                    }];
                    let mut q_quadratic = Vec::with_capacity(t.included.len());
                    let mut l_const = CMatrix::zeros(nr, nr);
                    let mut l_terms = Vec::with_capacity(t.included.len());
                    for &f in &t.included {
                        let hf = &t.links[f.cell];
                        let g_bar = hf * anchor.get(f);
                        q_quadratic.push((f, binv.adjoint() * hf));
                        l_const -= &g_bar * g_bar.adjoint();
                        l_terms.push(HermitianTerm { ue: f, left: hf.clone(), right: g_bar });
                    }
                    let trust = (!l_terms.is_empty())
                        .then(|| HermitianAffine { constant: l_const, terms: l_terms });
                    Ok(SdpTerm {
                        id: MinorantId::new(t.message, k),
                        decoder: t.decoder,
                        anchor_rate: t.rate,
                        streams: l,
                        rx_antennas: nr,
                        c_matrix,
                        c_sqrt,
                        q_affine: HermitianAffine { constant: q_const, terms: q_terms },
                        q_quadratic,
                        trust,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SdpMinorantSet { anchor: anchor.clone(), users_per_cell: channels.users_per_cell(), terms })
}

pub fn eval_sdp_minorant(set: &SdpMinorantSet, v: &PrecoderSet, which: MinorantId) -> Result<f64> {
    set.term(which)?.eval(v)
}
