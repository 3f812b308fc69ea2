use serde::{Deserialize, Serialize};

use super::UeClass;
use crate::error::{Error, Result};

/// Scalar system parameters of a multi-cell downlink.
///
/// Serialized field names are the on-disk scenario format; dB and dBm
/// quantities carry the unit in their suffix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_cells: usize,
    /// `K`: each cell serves `2K` UEs.
    pub pairs_per_cell: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Concurrent data streams per UE, `L ≤ min(Nt, Nr)`.
    pub streams: usize,
    /// Per-BS transmit power budget.
    pub power_budget_dbm: f64,
    /// Per-UE minimum throughput, bps/Hz.
    pub qos_threshold_bps_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub cell_radius_m: f64,
    pub center_radius_m: f64,
    /// When set, UEs are split evenly into center, middle and edge classes
    /// with the middle ring spanning `(center_radius_m, middle_radius_m]`.
    pub middle_radius_m: Option<f64>,
    pub min_bs_ue_distance_m: f64,
    pub shadowing_std_db: f64,
    pub inter_site_distance_m: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_cells: 3,
            pairs_per_cell: 2,
            tx_antennas: 4,
            rx_antennas: 2,
            streams: 2,
            power_budget_dbm: 30.0,
            qos_threshold_bps_hz: 1.0,
            noise_density_dbm_hz: -174.0,
            bandwidth_hz: 20e6,
            cell_radius_m: 500.0,
            center_radius_m: 150.0,
            middle_radius_m: None,
            min_bs_ue_distance_m: 10.0,
            shadowing_std_db: 8.0,
            inter_site_distance_m: 3f64.sqrt() * 500.0,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    /// Single-antenna receivers with one stream per UE.
    pub fn miso(tx_antennas: usize) -> Self {
        Self { tx_antennas, rx_antennas: 1, streams: 1, ..Self::default() }
    }

    pub fn users_per_cell(&self) -> usize {
        2 * self.pairs_per_cell
    }

    pub fn total_users(&self) -> usize {
        self.n_cells * self.users_per_cell()
    }

    pub fn power_budget_w(&self) -> f64 {
        dbm_to_watts(self.power_budget_dbm)
    }

    pub fn qos_threshold_nats(&self) -> f64 {
        self.qos_threshold_bps_hz * std::f64::consts::LN_2
    }

    pub fn noise_power_w(&self) -> f64 {
        noise_power(self)
    }

    pub fn has_middle_class(&self) -> bool {
        self.middle_radius_m.is_some()
    }

    /// Geometric class of UE `j` of any cell.
    pub fn ue_class(&self, j: usize) -> UeClass {
        let u = self.users_per_cell();
        if self.has_middle_class() {
            match 3 * j / u {
                0 => UeClass::Center,
                1 => UeClass::Middle,
                _ => UeClass::Edge,
            }
        } else if j < self.pairs_per_cell {
            UeClass::Center
        } else {
            UeClass::Edge
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_cells < 1 {
            return bad("n_cells must be at least 1".into());
        }
        if self.pairs_per_cell < 1 {
            return bad("pairs_per_cell must be at least 1".into());
        }
        if self.tx_antennas < 1 || self.rx_antennas < 1 {
            return bad("antenna counts must be positive".into());
        }
        if self.streams < 1 || self.streams > self.tx_antennas.min(self.rx_antennas) {
            return bad(format!(
                "streams = {} must lie in [1, min(Nt, Nr) = {}]",
                self.streams,
                self.tx_antennas.min(self.rx_antennas)
            ));
        }
        let finite = [
            self.power_budget_dbm,
            self.qos_threshold_bps_hz,
            self.noise_density_dbm_hz,
            self.bandwidth_hz,
            self.cell_radius_m,
            self.center_radius_m,
            self.min_bs_ue_distance_m,
            self.shadowing_std_db,
            self.inter_site_distance_m,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("all numeric parameters must be finite".into());
        }
        if self.qos_threshold_bps_hz < 0.0 {
            return bad("qos_threshold_bps_hz must be non-negative".into());
        }
        if self.bandwidth_hz <= 0.0 {
            return bad("bandwidth_hz must be positive".into());
        }
        if self.shadowing_std_db < 0.0 {
            return bad("shadowing_std_db must be non-negative".into());
        }
        if self.min_bs_ue_distance_m <= 0.0 {
            return bad("min_bs_ue_distance_m must be positive".into());
        }
        if self.center_radius_m <= self.min_bs_ue_distance_m {
            return bad(format!(
                "center ring is empty: center_radius_m ({}) must exceed min_bs_ue_distance_m ({})",
                self.center_radius_m, self.min_bs_ue_distance_m
            ));
        }
        if self.cell_radius_m <= self.center_radius_m {
            return bad("cell_radius_m must exceed center_radius_m".into());
        }
        if let Some(rm) = self.middle_radius_m {
            if !(rm.is_finite() && rm > self.center_radius_m && rm < self.cell_radius_m) {
                return bad("middle_radius_m must lie strictly between center and cell radii".into());
            }
            if self.users_per_cell() % 3 != 0 {
                return bad("three UE classes need users_per_cell divisible by 3".into());
            }
        }
        if self.n_cells > 1 && self.inter_site_distance_m <= 0.0 {
            return bad("inter_site_distance_m must be positive".into());
        }
        Ok(())
    }
}

pub(crate) fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise power in watts over the configured bandwidth.
pub fn noise_power(config: &NetworkConfig) -> f64 {
    let dbm = config.noise_density_dbm_hz + 10.0 * config.bandwidth_hz.log10();
    dbm_to_watts(dbm)
}
