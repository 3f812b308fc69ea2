//! Concave minorants of the log-det rates (quadratic, SDP and MISO
//! fractional families) and the scalar/matrix inequalities behind them.

mod inequalities;
mod qp;
mod sdp;
mod soc;

pub use inequalities::{
    check_inequality_in1, check_inequality_in2, check_inequality_zf8, zf_coefficients,
};
pub use qp::{eval_qp_minorant, qp_minorants, QpMinorantSet, QpTerm};
pub use sdp::{eval_sdp_minorant, sdp_minorants, SdpMinorantSet, SdpTerm};
pub use soc::{eval_soc_minorant, soc_minorants, SocMinorantSet, SocTerm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse_pd, rate_log_det, CMatrix};
use crate::network::{Channels, UeId};
use crate::throughput::{DecodeStructure, PrecoderSet, ReceivedAt};

/// PSD tests accept eigenvalues down to `-PSD_TOL · max(1, ‖M‖)`.
pub const PSD_TOL: f64 = 1e-9;

/// Addresses one decoding term: message `message` at its `term`-th decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinorantId {
    pub message: UeId,
    pub term: usize,
}

impl MinorantId {
    pub fn new(message: UeId, term: usize) -> Self {
        Self { message, term }
    }
}

/// Which minorant family a program is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinorantKind {
    Qp,
    Sdp,
    Soc,
}

/// Anchor quantities shared by all families for one decoding term.
#[derive(Clone, Debug)]
pub(crate) struct TermAnchor {
    pub message: UeId,
    pub decoder: UeId,
    /// Messages still interfering at the decoder (complement of the exclusion set).
    pub included: Vec<UeId>,
    /// `H_{cell(f), d}` for every BS.
    pub links: Vec<CMatrix>,
    /// `B̄ = H_{cell(m), d} V̄_m`.
    pub signal: CMatrix,
    /// `M_E(V̄)`.
    pub covariance: CMatrix,
    pub covariance_inv: CMatrix,
    /// Exact rate at the anchor, nats.
    pub rate: f64,
}

pub(crate) fn term_anchors(
    channels: &Channels,
    anchor: &PrecoderSet,
    structure: &DecodeStructure,
) -> Result<Vec<Vec<TermAnchor>>> {
    anchor.check_shape(channels)?;
    structure.check_shape(channels)?;
    let u = channels.users_per_cell();
    let sigma2 = channels.noise_power();
    let mut received: Vec<Option<ReceivedAt>> = (0..channels.n_cells() * u).map(|_| None).collect();
    structure
        .messages
        .iter()
        .map(|msg| {
            msg.terms
                .iter()
                .map(|t| {
                    let at = received[t.decoder.flat(u)]
                        .get_or_insert_with(|| ReceivedAt::new(channels, anchor, t.decoder));
                    let covariance = at.covariance(sigma2, &t.excluded, u);
                    let signal = at.g[msg.message.flat(u)].clone();
                    let rate = rate_log_det(&signal, &covariance)?;
                    let covariance_inv = inverse_pd(&covariance, "anchor interference covariance")?;
                    let included = anchor.ues().filter(|f| !t.excluded.contains(f)).collect();
                    let links = (0..channels.n_cells()).map(|s| channels.link(s, t.decoder).clone()).collect();
                    Ok(TermAnchor {
                        message: msg.message,
                        decoder: t.decoder,
                        included,
                        links,
                        signal,
                        covariance,
                        covariance_inv,
                        rate,
                    })
                })
                .collect()
        })
        .collect()
}

pub(crate) fn lookup<'a, T>(terms: &'a [Vec<T>], id: MinorantId, users_per_cell: usize) -> Result<&'a T> {
    terms
        .get(id.message.flat(users_per_cell))
        .and_then(|t| t.get(id.term))
        .filter(|_| id.message.ue < users_per_cell)
        .ok_or_else(|| Error::UnknownMinorant(format!("{} term {}", id.message, id.term)))
}

/// `constant + Σ_k (left_k V_{ue_k} right_kᴴ + right_k (left_k V_{ue_k})ᴴ)`,
/// a Hermitian-valued affine map of the precoders.
#[derive(Clone, Debug)]
pub struct HermitianAffine {
    pub constant: CMatrix,
    pub terms: Vec<HermitianTerm>,
}

#[derive(Clone, Debug)]
pub struct HermitianTerm {
    pub ue: UeId,
    /// `n × Nt`.
    pub left: CMatrix,
    /// `n × L`.
    pub right: CMatrix,
}

impl HermitianAffine {
    pub fn eval(&self, v: &PrecoderSet) -> CMatrix {
        let mut m = self.constant.clone();
        for t in &self.terms {
            let x = &t.left * v.get(t.ue) * t.right.adjoint();
            m += &x + x.adjoint();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

pub(crate) fn psd_violation(m: &CMatrix) -> Option<f64> {
    let lam = crate::linalg::min_eigenvalue(m);
    let scale = m.norm().max(1.0);
    (lam < -PSD_TOL * scale).then_some(lam)
}
