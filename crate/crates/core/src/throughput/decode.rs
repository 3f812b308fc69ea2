use serde::{Deserialize, Serialize};

use super::PrecoderSet;
use crate::error::{Error, Result};
use crate::linalg::{scaled_identity, CMatrix};
use crate::network::{Channels, ClusterPlan, UeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Noma,
    Comp,
    Dpc,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Noma => "noma",
            Scheme::Comp => "comp",
            Scheme::Dpc => "dpc",
        }
    }
}

/// One receiver that must decode a message, and the messages absent from
/// its interference covariance (the message itself plus anything already
/// canceled or pre-canceled).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeTerm {
    pub decoder: UeId,
    pub excluded: Vec<UeId>,
}

/// A message's achievable rate is the minimum over its terms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTerms {
    pub message: UeId,
    pub terms: Vec<DecodeTerm>,
}

/// Decoding obligations of every message, in flat UE order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeStructure {
    pub scheme: Scheme,
    pub n_cells: usize,
    pub users_per_cell: usize,
    pub messages: Vec<MessageTerms>,
}

impl DecodeStructure {
    /// Successive decoding within each cluster: message `u_k` is decoded at
    /// every `u_l`, `l ≥ k`, after `u_1 … u_{k-1}` have been canceled.
    pub fn noma(plan: &ClusterPlan) -> Result<Self> {
        plan.validate()?;
        let u = plan.users_per_cell;
        let mut messages: Vec<Option<MessageTerms>> = vec![None; plan.n_cells() * u];
        for (i, cell) in plan.clusters.iter().enumerate() {
            for cluster in cell {
                for k in 0..cluster.len() {
                    let message = UeId::new(i, cluster[k]);
                    let excluded: Vec<UeId> = cluster[..=k].iter().map(|&j| UeId::new(i, j)).collect();
                    let terms = cluster[k..]
                        .iter()
                        .map(|&l| DecodeTerm { decoder: UeId::new(i, l), excluded: excluded.clone() })
                        .collect();
                    messages[message.flat(u)] = Some(MessageTerms { message, terms });
                }
            }
        }
        let messages = messages.into_iter().map(|m| m.expect("validated plan")).collect();
        Ok(Self { scheme: Scheme::Noma, n_cells: plan.n_cells(), users_per_cell: u, messages })
    }

    /// Every UE decodes only its own message against all interference.
    pub fn comp(n_cells: usize, users_per_cell: usize) -> Self {
        let messages = (0..n_cells * users_per_cell)
            .map(|k| {
                let ue = UeId::from_flat(k, users_per_cell);
                MessageTerms { message: ue, terms: vec![DecodeTerm { decoder: ue, excluded: vec![ue] }] }
            })
            .collect();
        Self { scheme: Scheme::Comp, n_cells, users_per_cell, messages }
    }

    /// Encoding from the highest index down: UE `j` is free of the intra-cell
    /// messages `k ≥ j` and still sees `k < j` plus all other cells.
    pub fn dpc(n_cells: usize, users_per_cell: usize) -> Self {
        let messages = (0..n_cells * users_per_cell)
            .map(|k| {
                let ue = UeId::from_flat(k, users_per_cell);
                let excluded = (ue.ue..users_per_cell).map(|l| UeId::new(ue.cell, l)).collect();
                MessageTerms { message: ue, terms: vec![DecodeTerm { decoder: ue, excluded }] }
            })
            .collect();
        Self { scheme: Scheme::Dpc, n_cells, users_per_cell, messages }
    }

    pub fn for_scheme(scheme: Scheme, plan: &ClusterPlan) -> Result<Self> {
        match scheme {
            Scheme::Noma => Self::noma(plan),
            Scheme::Comp => Ok(Self::comp(plan.n_cells(), plan.users_per_cell)),
            Scheme::Dpc => Ok(Self::dpc(plan.n_cells(), plan.users_per_cell)),
        }
    }

    pub fn message(&self, ue: UeId) -> &MessageTerms {
        &self.messages[ue.flat(self.users_per_cell)]
    }

    pub fn total_terms(&self) -> usize {
        self.messages.iter().map(|m| m.terms.len()).sum()
    }

    /// Messages needing a min-epigraph slack (decoded at more than one UE).
    pub fn multi_term_messages(&self) -> usize {
        self.messages.iter().filter(|m| m.terms.len() > 1).count()
    }

    pub fn check_shape(&self, channels: &Channels) -> Result<()> {
        if self.n_cells != channels.n_cells() || self.users_per_cell != channels.users_per_cell() {
            return Err(Error::Dimension("decode structure does not match channels".into()));
        }
        Ok(())
    }
}

/// Received signal components `G_f = H_{cell(f), d} V_f` of every message `f`
/// at one decoder `d`.
pub struct ReceivedAt {
    pub decoder: UeId,
    pub g: Vec<CMatrix>,
}

impl ReceivedAt {
    pub fn new(channels: &Channels, v: &PrecoderSet, decoder: UeId) -> Self {
        let g = v.ues().map(|f| channels.link(f.cell, decoder) * v.get(f)).collect();
        Self { decoder, g }
    }

    /// `σ² I + Σ_{f ∉ excluded} G_f G_fᴴ`.
    pub fn covariance(&self, noise_power: f64, excluded: &[UeId], users_per_cell: usize) -> CMatrix {
        let nr = self.g[0].nrows();
        let mut m = scaled_identity(nr, noise_power);
        for (k, g) in self.g.iter().enumerate() {
            if !excluded.iter().any(|e| e.flat(users_per_cell) == k) {
                m += g * g.adjoint();
            }
        }
        m
    }
}

/// Signal components at every UE, indexed by the decoder's flat position.
pub fn received_all(channels: &Channels, v: &PrecoderSet) -> Vec<ReceivedAt> {
    channels.ues().map(|d| ReceivedAt::new(channels, v, d)).collect()
}

/// Interference-plus-noise covariance of `excluded`'s complement at `decoder`.
pub fn interference_covariance(
    channels: &Channels,
    v: &PrecoderSet,
    decoder: UeId,
    excluded: &[UeId],
) -> CMatrix {
    ReceivedAt::new(channels, v, decoder).covariance(
        channels.noise_power(),
        excluded,
        channels.users_per_cell(),
    )
}
