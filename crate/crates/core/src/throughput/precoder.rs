use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dominant_right_singular_vectors, CMatrix, C64};
use crate::network::{Channels, UeId};

/// One `Nt × L` precoder per UE, stored in flat `(cell, ue)` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawPrecoders", try_from = "RawPrecoders")]
pub struct PrecoderSet {
    n_cells: usize,
    users_per_cell: usize,
    tx: usize,
    streams: usize,
    v: Vec<CMatrix>,
}

impl PrecoderSet {
    pub fn zeros(n_cells: usize, users_per_cell: usize, tx: usize, streams: usize) -> Self {
        let v = vec![CMatrix::zeros(tx, streams); n_cells * users_per_cell];
        Self { n_cells, users_per_cell, tx, streams, v }
    }

    pub fn from_matrices(n_cells: usize, users_per_cell: usize, v: Vec<CMatrix>) -> Result<Self> {
        if v.len() != n_cells * users_per_cell || v.is_empty() {
            return Err(Error::Dimension(format!(
                "expected {} precoders, got {}",
                n_cells * users_per_cell,
                v.len()
            )));
        }
        let (tx, streams) = v[0].shape();
        if v.iter().any(|m| m.shape() != (tx, streams)) {
            return Err(Error::Dimension("precoders differ in shape".into()));
        }
        Ok(Self { n_cells, users_per_cell, tx, streams, v })
    }

    /// `sqrt(P / (2K·L))` times the `L` dominant right singular vectors of each
    /// direct channel: every BS spends exactly its budget.
    pub fn seed(channels: &Channels, streams: usize, power_w: f64) -> Self {
        let u = channels.users_per_cell();
        let scale = (power_w / (u * streams) as f64).sqrt();
        let v = channels
            .ues()
            .map(|ue| dominant_right_singular_vectors(channels.direct(ue), streams) * C64::new(scale, 0.0))
            .collect();
        Self { n_cells: channels.n_cells(), users_per_cell: u, tx: channels.tx_antennas(), streams, v }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    pub fn streams(&self) -> usize {
        self.streams
    }

    pub fn get(&self, ue: UeId) -> &CMatrix {
        &self.v[ue.flat(self.users_per_cell)]
    }

    pub fn get_mut(&mut self, ue: UeId) -> &mut CMatrix {
        &mut self.v[ue.flat(self.users_per_cell)]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.v
    }

    pub fn ues(&self) -> impl Iterator<Item = UeId> + '_ {
        let u = self.users_per_cell;
        (0..self.v.len()).map(move |k| UeId::from_flat(k, u))
    }

    /// Transmit power of BS `cell`, `Σ_j ‖V_{cell,j}‖²_F`.
    pub fn cell_power(&self, cell: usize) -> f64 {
        let u = self.users_per_cell;
        self.v[cell * u..(cell + 1) * u].iter().map(|m| m.norm_squared()).sum()
    }

    pub fn scale_cell(&mut self, cell: usize, factor: f64) {
        let u = self.users_per_cell;
        for m in &mut self.v[cell * u..(cell + 1) * u] {
            *m *= C64::new(factor, 0.0);
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.v {
            *m *= C64::new(factor, 0.0);
        }
        out
    }

    /// Frobenius distance between two precoder sets of equal shape.
    pub fn distance(&self, other: &Self) -> f64 {
        self.v.iter().zip(&other.v).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt()
    }

    pub fn check_shape(&self, channels: &Channels) -> Result<()> {
        if self.n_cells != channels.n_cells()
            || self.users_per_cell != channels.users_per_cell()
            || self.tx != channels.tx_antennas()
        {
            return Err(Error::Dimension(format!(
                "precoders ({} cells, {} UEs, Nt = {}) do not match channels ({}, {}, {})",
                self.n_cells,
                self.users_per_cell,
                self.tx,
                channels.n_cells(),
                channels.users_per_cell(),
                channels.tx_antennas()
            )));
        }
        if self.v.iter().flat_map(|m| m.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("precoder entries must be finite".into()));
        }
        Ok(())
    }
}

/// Per-BS transmit powers in the precoders' power unit.
pub fn sum_power(v: &PrecoderSet) -> Vec<f64> {
    (0..v.n_cells()).map(|i| v.cell_power(i)).collect()
}

#[derive(Serialize, Deserialize)]
struct RawPrecoders {
    n_cells: usize,
    users_per_cell: usize,
    tx_antennas: usize,
    streams: usize,
    /// Column-major `[re, im]` entries per UE.
    v: Vec<Vec<[f64; 2]>>,
}

impl From<PrecoderSet> for RawPrecoders {
    fn from(p: PrecoderSet) -> Self {
        Self {
            n_cells: p.n_cells,
            users_per_cell: p.users_per_cell,
            tx_antennas: p.tx,
            streams: p.streams,
            v: p.v.iter().map(|m| m.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

impl TryFrom<RawPrecoders> for PrecoderSet {
    type Error = Error;

    fn try_from(r: RawPrecoders) -> Result<Self> {
        let len = r.tx_antennas * r.streams;
        if r.v.len() != r.n_cells * r.users_per_cell || r.v.iter().any(|m| m.len() != len) {
            return Err(Error::Dimension("precoder JSON has inconsistent sizes".into()));
        }
        let v = r
            .v
            .iter()
            .map(|m| {
                CMatrix::from_iterator(r.tx_antennas, r.streams, m.iter().map(|e| C64::new(e[0], e[1])))
            })
            .collect();
        Ok(Self {
            n_cells: r.n_cells,
            users_per_cell: r.users_per_cell,
            tx: r.tx_antennas,
            streams: r.streams,
            v,
        })
    }
}
