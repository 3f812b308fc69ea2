use std::f64::consts::{FRAC_PI_6, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{stream_rng, NetworkConfig, Stream, UeClass, UeId};
use crate::error::Result;

/// BS and UE positions in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_positions: Vec<[f64; 2]>,
    /// `ue_positions[cell][j]`.
    pub ue_positions: Vec<Vec<[f64; 2]>>,
    pub ue_class: Vec<Vec<UeClass>>,
}

impl Topology {
    pub fn n_cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.ue_positions.first().map_or(0, Vec::len)
    }

    pub fn class_of(&self, ue: UeId) -> UeClass {
        self.ue_class[ue.cell][ue.ue]
    }

    /// Distance in meters from BS `bs` to `ue`.
    pub fn distance(&self, bs: usize, ue: UeId) -> f64 {
        dist(self.bs_positions[bs], self.ue_positions[ue.cell][ue.ue])
    }

    /// Distance from each UE to its own BS.
    pub fn serving_distance(&self, ue: UeId) -> f64 {
        self.distance(ue.cell, ue)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Hexagonal-lattice BS sites with spacing `isd`, nearest to the centroid of
/// the triangle `(0,0), (isd,0), (isd/2, isd·√3/2)` first. With three cells
/// this is exactly that triangle.
pub(crate) fn bs_layout(n_cells: usize, isd: f64) -> Vec<[f64; 2]> {
    let h = 3f64.sqrt() / 2.0;
    let centroid = [isd / 2.0, isd * h / 3.0];
    let reach = (n_cells as f64).sqrt().ceil() as i64 + 2;
    let mut sites = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            let p = [isd * (a as f64 + b as f64 / 2.0), isd * h * b as f64];
            sites.push(p);
        }
    }
    // Ties broken by angle about the centroid so the ordering is total.
    let key = |p: &[f64; 2]| {
        let d = dist(*p, centroid);
        let ang = (p[1] - centroid[1]).atan2(p[0] - centroid[0]).rem_euclid(2.0 * PI);
        ((d / isd.max(1e-12) * 1e9).round() as i64, (ang * 1e9).round() as i64)
    };
    sites.sort_by_key(key);
    sites.truncate(n_cells);
    if n_cells == 1 {
        return vec![[0.0, 0.0]];
    }
    sites
}

/// Bearings (radians) from BS `i` toward its lattice neighbors.
fn neighbor_bearings(sites: &[[f64; 2]], i: usize, isd: f64) -> Vec<f64> {
    sites
        .iter()
        .enumerate()
        .filter(|&(k, p)| k != i && dist(*p, sites[i]) <= 1.01 * isd)
        .map(|(_, p)| (p[1] - sites[i][1]).atan2(p[0] - sites[i][0]))
        .collect()
}

/// Radius drawn uniformly by area on `[r_in, r_out]`.
fn area_uniform_radius<R: Rng + ?Sized>(rng: &mut R, r_in: f64, r_out: f64) -> f64 {
    let u: f64 = rng.random();
    (r_in * r_in + u * (r_out * r_out - r_in * r_in)).sqrt()
}

/// Drops all UEs. Center UEs fill the disc `[d_min, r_n]`, middle UEs the
/// ring up to `r_m`, and edge UEs the outer ring restricted to a ±30° sector
/// facing one neighboring cell (neighbors taken in turn).
pub fn build_topology(config: &NetworkConfig, seed: u64) -> Result<Topology> {
    config.validate()?;
    let mut rng = stream_rng(seed, Stream::Topology);
    let isd = config.inter_site_distance_m;
    let bs_positions = bs_layout(config.n_cells, isd);
    let u = config.users_per_cell();
    let edge_inner = config.middle_radius_m.unwrap_or(config.center_radius_m);

    let mut ue_positions = Vec::with_capacity(config.n_cells);
    let mut ue_class = Vec::with_capacity(config.n_cells);
    for (i, &bs) in bs_positions.iter().enumerate() {
        let bearings = neighbor_bearings(&bs_positions, i, isd);
        let mut positions = Vec::with_capacity(u);
        let mut classes = Vec::with_capacity(u);
        let mut edge_count = 0;
        for j in 0..u {
            let class = config.ue_class(j);
            let (r, theta) = match class {
                UeClass::Center => {
                    let r = area_uniform_radius(
                        &mut rng,
                        config.min_bs_ue_distance_m,
                        config.center_radius_m,
                    );
                    (r, rng.random_range(0.0..2.0 * PI))
                }
                UeClass::Middle => {
                    let rm = config.middle_radius_m.expect("middle class implies a radius");
                    let r = area_uniform_radius(&mut rng, config.center_radius_m, rm);
                    (r, rng.random_range(0.0..2.0 * PI))
                }
                UeClass::Edge => {
                    let r = area_uniform_radius(&mut rng, edge_inner, config.cell_radius_m);
                    let theta = if bearings.is_empty() {
                        rng.random_range(0.0..2.0 * PI)
                    } else {
                        let b = bearings[edge_count % bearings.len()];
                        b + rng.random_range(-FRAC_PI_6..FRAC_PI_6)
                    };
                    edge_count += 1;
                    (r, theta)
                }
            };
            positions.push([bs[0] + r * theta.cos(), bs[1] + r * theta.sin()]);
            classes.push(class);
        }
        ue_positions.push(positions);
        ue_class.push(classes);
    }
    Ok(Topology { bs_positions, ue_positions, ue_class })
}
