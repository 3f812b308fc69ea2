use rand::Rng;
use rand_distr::Normal;

use super::{stream_rng, NetworkConfig, Stream, Topology, UeId};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, CMatrix};

/// Distance-dependent path loss in dB; `distance_m` is converted to km here.
pub fn path_loss_db(distance_m: f64) -> f64 {
    128.1 + 37.6 * (distance_m / 1000.0).log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ShadowingMode {
    #[default]
    Enabled,
    Disabled,
}

/// Every BS→UE channel `H[s][i][j]` (`Nr × Nt`), plus the noise power.
#[derive(Clone, Debug)]
pub struct Channels {
    n_cells: usize,
    users_per_cell: usize,
    rx: usize,
    tx: usize,
    noise_power: f64,
    h: Vec<CMatrix>,
    path_loss_db: Vec<f64>,
}

impl Channels {
    /// Assemble from explicit matrices, laid out as `h[(s * n_cells + i) * users_per_cell + j]`.
    pub fn from_parts(
        n_cells: usize,
        users_per_cell: usize,
        noise_power: f64,
        h: Vec<CMatrix>,
    ) -> Result<Self> {
        let expected = n_cells * n_cells * users_per_cell;
        if h.len() != expected || expected == 0 {
            return Err(Error::Dimension(format!(
                "expected {expected} channel matrices, got {}",
                h.len()
            )));
        }
        let (rx, tx) = h[0].shape();
        if h.iter().any(|m| m.shape() != (rx, tx)) {
            return Err(Error::Dimension("channel matrices differ in shape".into()));
        }
        if h.iter().flat_map(|m| m.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("channel entries must be finite".into()));
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::Domain("noise power must be positive".into()));
        }
        let path_loss_db = vec![f64::NAN; h.len()];
        Ok(Self { n_cells, users_per_cell, rx, tx, noise_power, h, path_loss_db })
    }

    fn index(&self, bs: usize, ue: UeId) -> usize {
        (bs * self.n_cells + ue.cell) * self.users_per_cell + ue.ue
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn ues(&self) -> impl Iterator<Item = UeId> + '_ {
        (0..self.n_cells).flat_map(move |i| (0..self.users_per_cell).map(move |j| UeId::new(i, j)))
    }

    /// `H_{bs, ue}`.
    pub fn link(&self, bs: usize, ue: UeId) -> &CMatrix {
        &self.h[self.index(bs, ue)]
    }

    /// Channel from the UE's serving BS.
    pub fn direct(&self, ue: UeId) -> &CMatrix {
        self.link(ue.cell, ue)
    }

    /// Total path loss (distance law plus shadowing) of a link, NaN when the
    /// channels were assembled by hand.
    pub fn path_loss(&self, bs: usize, ue: UeId) -> f64 {
        self.path_loss_db[self.index(bs, ue)]
    }

    /// Copy with every channel multiplied by `gain` and the noise power replaced.
    pub fn rescaled(&self, gain: f64, noise_power: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.h {
            *m *= crate::linalg::C64::new(gain, 0.0);
        }
        out.noise_power = noise_power;
        out
    }
}

pub fn sample_channels(topology: &Topology, config: &NetworkConfig, seed: u64) -> Result<Channels> {
    sample_channels_with(topology, config, seed, ShadowingMode::Enabled)
}

/// `H = sqrt(10^{-PL/10}) · H̃` with `H̃` i.i.d. CN(0,1) and PL the distance
/// law plus (optionally) a normal shadowing draw per link.
pub fn sample_channels_with(
    topology: &Topology,
    config: &NetworkConfig,
    seed: u64,
    shadowing: ShadowingMode,
) -> Result<Channels> {
    config.validate()?;
    let n = config.n_cells;
    let u = config.users_per_cell();
    if topology.n_cells() != n || topology.users_per_cell() != u {
        return Err(Error::Dimension("topology does not match configuration".into()));
    }
    let mut rng = stream_rng(seed, Stream::Channels);
    let shadow = Normal::new(0.0, config.shadowing_std_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut h = Vec::with_capacity(n * n * u);
    let mut losses = Vec::with_capacity(n * n * u);
    for s in 0..n {
        for i in 0..n {
            for j in 0..u {
                let ue = UeId::new(i, j);
                let draw: f64 = rng.sample(shadow);
                let pl = path_loss_db(topology.distance(s, ue))
                    + if shadowing == ShadowingMode::Enabled { draw } else { 0.0 };
                let gain = 10f64.powf(-pl / 20.0);
                let m = complex_gaussian(&mut rng, config.rx_antennas, config.tx_antennas)
                    * crate::linalg::C64::new(gain, 0.0);
                h.push(m);
                losses.push(pl);
            }
        }
    }
    let mut ch = Channels::from_parts(n, u, config.noise_power_w(), h)?;
    ch.path_loss_db = losses;
    Ok(ch)
}
