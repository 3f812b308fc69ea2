use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{lower_qp_subproblem, lower_sdp_subproblem, lower_soc_subproblem, LoweringParams};
use crate::error::{Error, Result};
use crate::linalg::complex_gaussian;
use crate::network::{Channels, ClusterPlan, NetworkConfig};
use crate::surrogate::{qp_minorants, sdp_minorants, soc_minorants, MinorantKind};
use crate::throughput::{DecodeStructure, PrecoderSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n: usize,
    pub m: usize,
}

/// Closed-form sizes of the sum-throughput subproblem for two-user clusters.
pub fn problem_dims(config: &NetworkConfig, kind: MinorantKind) -> ProblemDims {
    let (n_cells, k) = (config.n_cells, config.pairs_per_cell);
    let n = k * n_cells * (2 * config.tx_antennas * config.streams + 1);
    let m = match kind {
        MinorantKind::Qp => n_cells * (1 + 3 * k),
        MinorantKind::Sdp => n_cells * (1 + 3 * k) + 3 * n_cells * k * config.rx_antennas,
        MinorantKind::Soc => n_cells * (1 + 6 * k),
    };
    ProblemDims { n, m }
}

/// Sizes read off a program lowered on a random instance shaped like `config`.
pub fn constructed_dims(config: &NetworkConfig, kind: MinorantKind, seed: u64) -> Result<ProblemDims> {
    config.validate()?;
    if kind == MinorantKind::Soc && (config.rx_antennas != 1 || config.streams != 1) {
        return Err(Error::InvalidConfig("the SOC subproblem needs Nr = L = 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, u) = (config.n_cells, config.users_per_cell());
    let h = (0..n * n * u).map(|_| complex_gaussian(&mut rng, config.rx_antennas, config.tx_antennas)).collect();
    let channels = Channels::from_parts(n, u, 1.0, h)?;
    let plan = ClusterPlan::identity_pairs(n, config.pairs_per_cell);
    let structure = DecodeStructure::noma(&plan)?;
    let anchor = PrecoderSet::seed(&channels, config.streams, 1.0);
    let params = LoweringParams { power: 1.0, qos_nats: config.qos_threshold_nats() };
    let meta = match kind {
        MinorantKind::Qp => lower_qp_subproblem(&qp_minorants(&anchor, &channels, &structure)?, params).metadata,
        MinorantKind::Sdp => lower_sdp_subproblem(&sdp_minorants(&anchor, &channels, &structure)?, params).metadata,
        MinorantKind::Soc => lower_soc_subproblem(&soc_minorants(&anchor, &channels, &structure)?, params).metadata,
    };
    Ok(ProblemDims { n: meta.n(), m: meta.m() })
}
