use super::{lookup, psd_violation, term_anchors, MinorantId};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, identity, inner, trace, CMatrix};
use crate::network::{Channels, UeId};
use crate::throughput::{DecodeStructure, PrecoderSet};

/// Concave quadratic minorant of one decoding term,
/// `a + 2Re⟨A, V_m⟩ − ⟨D, M_F(V)⟩` with `M_F` the covariance that still
/// contains the message and `D = M_E(V̄)⁻¹ − M_F(V̄)⁻¹ = F Fᴴ`.
#[derive(Clone, Debug)]
pub struct QpTerm {
    pub id: MinorantId,
    pub decoder: UeId,
    /// Exact rate at the anchor.
    pub anchor_rate: f64,
    /// `a = R(V̄) − tr X̄ < 0` for a nonzero signal.
    pub a: f64,
    /// `A = Hᴴ M_E(V̄)⁻¹ H V̄_m`, `Nt × L`.
    pub a_matrix: CMatrix,
    /// `D`, `Nr × Nr` PSD.
    pub weight: CMatrix,
    /// `F = M_E(V̄)⁻¹ B̄ (I + X̄)^{-1/2}`, so `D = F Fᴴ`.
    pub factor: CMatrix,
    /// `Fᴴ H_{s,d}` per BS `s`.
    pub weighted_links: Vec<CMatrix>,
    /// Messages present in `M_F`.
    pub quad_ues: Vec<UeId>,
    /// `a − σ² tr D`.
    pub constant: f64,
}

impl QpTerm {
    pub fn eval(&self, v: &PrecoderSet) -> f64 {
        let lin = 2.0 * inner(&self.a_matrix, v.get(self.id.message)).re;
        let quad: f64 =
            self.quad_ues.iter().map(|f| (&self.weighted_links[f.cell] * v.get(*f)).norm_squared()).sum();
        self.constant + lin - quad
    }
}

#[derive(Clone, Debug)]
pub struct QpMinorantSet {
    pub anchor: PrecoderSet,
    pub users_per_cell: usize,
    /// `terms[message flat index][term]`.
    pub terms: Vec<Vec<QpTerm>>,
}

impl QpMinorantSet {
    pub fn term(&self, id: MinorantId) -> Result<&QpTerm> {
        lookup(&self.terms, id, self.users_per_cell)
    }

    pub fn ids(&self) -> impl Iterator<Item = MinorantId> + '_ {
        self.terms.iter().flat_map(|ts| ts.iter().map(|t| t.id))
    }

    /// Minorant of a message's rate: minimum over its decoders.
    pub fn message_value(&self, v: &PrecoderSet, ue: UeId) -> f64 {
        self.terms[ue.flat(self.users_per_cell)].iter().map(|t| t.eval(v)).fold(f64::INFINITY, f64::min)
    }

    /// Sum of message minorants.
    pub fn objective(&self, v: &PrecoderSet) -> f64 {
        v.ues().map(|ue| self.message_value(v, ue)).sum()
    }
}

pub fn qp_minorants(
    anchor: &PrecoderSet,
    channels: &Channels,
    structure: &DecodeStructure,
) -> Result<QpMinorantSet> {
    let anchors = term_anchors(channels, anchor, structure)?;
    let sigma2 = channels.noise_power();
    let l = anchor.streams();
    let terms = anchors
        .into_iter()
        .map(|ts| {
            ts.into_iter()
                .enumerate()
                .map(|(k, t)| {
                    let h = &t.links[t.message.cell];
                    let minv_b = &t.covariance_inv * &t.signal;
                    let x_bar = crate::linalg::hermitize(&(t.signal.adjoint() * &minv_b));
                    let c = identity(l) + &x_bar;
                    // (I + X̄)^{-1/2} through the Cholesky factor: C⁻¹ = L⁻ᴴ L⁻¹.
                    let chol = cholesky(&c, "I + X̄")?;
                    let linv = chol
                        .l()
                        .solve_lower_triangular(&identity(l))
                        .ok_or_else(|| Error::NotPositiveDefinite("I + X̄".into()))?;
                    let factor = &minv_b * linv.adjoint();
                    let weight = &factor * factor.adjoint();
                    if let Some(lam) = psd_violation(&weight) {
                        return Err(Error::NotPositiveDefinite(format!(
                            "quadratic weight has eigenvalue {lam:e}"
                        )));
                    }
                    let a = t.rate - trace(&x_bar).re;
                    let a_matrix = h.adjoint() * &minv_b;
                    let weighted_links = t.links.iter().map(|hs| factor.adjoint() * hs).collect();
                    let mut quad_ues = t.included.clone();
                    quad_ues.push(t.message);
                    let constant = a - sigma2 * factor.norm_squared();
                    Ok(QpTerm {
                        id: MinorantId::new(t.message, k),
                        decoder: t.decoder,
                        anchor_rate: t.rate,
                        a,
                        a_matrix,
                        weight,
                        factor,
                        weighted_links,
                        quad_ues,
                        constant,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QpMinorantSet { anchor: anchor.clone(), users_per_cell: channels.users_per_cell(), terms })
}

pub fn eval_qp_minorant(set: &QpMinorantSet, v: &PrecoderSet, which: MinorantId) -> Result<f64> {
    Ok(set.term(which)?.eval(v))
}
