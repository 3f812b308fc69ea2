//! System model: configuration, cell geometry, channel draws and the
//! cluster (pairing) plan.

mod channels;
mod cluster;
mod config;
mod topology;

pub use channels::{path_loss_db, sample_channels, sample_channels_with, Channels, ShadowingMode};
pub use cluster::{pair_users, pair_users_with, ClusterPlan, ClusterStrategy, TripleScenario};
pub use config::{noise_power, NetworkConfig};
pub use topology::{build_topology, Topology};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A user equipment addressed by `(cell, index within cell)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UeId {
    pub cell: usize,
    pub ue: usize,
}

impl UeId {
    pub fn new(cell: usize, ue: usize) -> Self {
        Self { cell, ue }
    }

    /// Row-major position among all UEs of an `n_cells × users_per_cell` grid.
    pub fn flat(self, users_per_cell: usize) -> usize {
        self.cell * users_per_cell + self.ue
    }

    pub fn from_flat(index: usize, users_per_cell: usize) -> Self {
        Self::new(index / users_per_cell, index % users_per_cell)
    }
}

impl std::fmt::Display for UeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // One-based, as is customary when reporting UE (i, j).
        write!(f, "({},{})", self.cell + 1, self.ue + 1)
    }
}

/// Geometric class of a UE; determines where it is dropped and where its
/// message sits in the successive decoding order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UeClass {
    Center,
    Middle,
    Edge,
}

impl UeClass {
    /// Position in the decoding order: weaker classes are decoded first.
    pub fn decode_rank(self) -> u8 {
        match self {
            UeClass::Edge => 0,
            UeClass::Middle => 1,
            UeClass::Center => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UeClass::Center => "center",
            UeClass::Middle => "middle",
            UeClass::Edge => "edge",
        }
    }
}

/// Independent random streams derived from one master seed.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Stream {
    Topology = 0x7f4a_7c15,
    Channels = 0x3c6e_f372,
    Pairing = 0x1b87_3593,
}

pub(crate) fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(stream as u64))
}
