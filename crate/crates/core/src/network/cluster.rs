use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{stream_rng, NetworkConfig, Stream, Topology, UeClass, UeId};
use crate::error::{Error, Result};

/// How three-UE clusters are drawn in the three-class layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripleScenario {
    /// One center, one middle and one edge UE per cluster.
    Distinct,
    /// One center UE plus two UEs of a single other class.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterStrategy {
    /// No superposition: every UE on its own (CoMP).
    Singletons,
    Pairs,
    Triples(TripleScenario),
    /// Every UE of a cell in one cluster.
    WholeCell,
}

/// Per-cell clusters, each listed in decoding order (weakest first).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub users_per_cell: usize,
    /// `clusters[cell][c]` lists UE indices of cluster `c`.
    pub clusters: Vec<Vec<Vec<usize>>>,
}

impl ClusterPlan {
    pub fn new(users_per_cell: usize, clusters: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let plan = Self { users_per_cell, clusters };
        plan.validate()?;
        Ok(plan)
    }

    pub fn singletons(n_cells: usize, users_per_cell: usize) -> Self {
        let clusters = (0..n_cells).map(|_| (0..users_per_cell).map(|j| vec![j]).collect()).collect();
        Self { users_per_cell, clusters }
    }

    /// Center `j` paired with edge `K + j` in every cell.
    pub fn identity_pairs(n_cells: usize, pairs_per_cell: usize) -> Self {
        let clusters = (0..n_cells)
            .map(|_| (0..pairs_per_cell).map(|j| vec![pairs_per_cell + j, j]).collect())
            .collect();
        Self { users_per_cell: 2 * pairs_per_cell, clusters }
    }

    pub fn n_cells(&self) -> usize {
        self.clusters.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, cell) in self.clusters.iter().enumerate() {
            let mut seen = vec![false; self.users_per_cell];
            for cluster in cell {
                if cluster.is_empty() {
                    return Err(Error::InvalidPlan(format!("empty cluster in cell {i}")));
                }
                for &j in cluster {
                    if j >= self.users_per_cell || seen[j] {
                        return Err(Error::InvalidPlan(format!(
                            "UE {j} of cell {i} is out of range or repeated"
                        )));
                    }
                    seen[j] = true;
                }
            }
            if !seen.iter().all(|&s| s) {
                return Err(Error::InvalidPlan(format!("cell {i} leaves UEs unclustered")));
            }
        }
        Ok(())
    }

    /// The cluster containing `ue` and the UE's position in its decode order.
    pub fn locate(&self, ue: UeId) -> (&[usize], usize) {
        for cluster in &self.clusters[ue.cell] {
            if let Some(pos) = cluster.iter().position(|&j| j == ue.ue) {
                return (cluster, pos);
            }
        }
        panic!("UE {ue} missing from a validated plan");
    }

    /// Partner of `ue` in a two-UE cluster.
    pub fn partner(&self, ue: UeId) -> Option<UeId> {
        let (cluster, pos) = self.locate(ue);
        (cluster.len() == 2).then(|| UeId::new(ue.cell, cluster[1 - pos]))
    }

    /// `p(j)` for each cell: partner index per UE, `None` outside pairs.
    pub fn pair_map(&self) -> Vec<Vec<Option<usize>>> {
        (0..self.n_cells())
            .map(|i| {
                (0..self.users_per_cell)
                    .map(|j| self.partner(UeId::new(i, j)).map(|p| p.ue))
                    .collect()
            })
            .collect()
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().flatten().map(Vec::len).max().unwrap_or(0)
    }
}

fn sort_decode_order(config: &NetworkConfig, members: &mut [usize]) {
    members.sort_by_key(|&j| (config.ue_class(j).decode_rank(), j));
}

fn class_members(config: &NetworkConfig, class: UeClass) -> Vec<usize> {
    (0..config.users_per_cell()).filter(|&j| config.ue_class(j) == class).collect()
}

/// Cluster by size: 1 gives singletons, 2 pairs, 3 distinct triples, and
/// `2K` one cluster per cell.
pub fn pair_users(
    topology: &Topology,
    config: &NetworkConfig,
    cluster_size: usize,
    seed: u64,
) -> Result<ClusterPlan> {
    let u = config.users_per_cell();
    let strategy = match cluster_size {
        1 => ClusterStrategy::Singletons,
        2 => ClusterStrategy::Pairs,
        3 if config.has_middle_class() => ClusterStrategy::Triples(TripleScenario::Distinct),
        s if s == u => ClusterStrategy::WholeCell,
        s => {
            return Err(Error::InvalidPlan(format!(
                "cluster size {s} is not supported for {u} UEs per cell"
            )))
        }
    };
    pair_users_with(topology, config, strategy, seed)
}

pub fn pair_users_with(
    topology: &Topology,
    config: &NetworkConfig,
    strategy: ClusterStrategy,
    seed: u64,
) -> Result<ClusterPlan> {
    config.validate()?;
    if topology.n_cells() != config.n_cells || topology.users_per_cell() != config.users_per_cell() {
        return Err(Error::Dimension("topology does not match configuration".into()));
    }
    let mut rng = stream_rng(seed, Stream::Pairing);
    let u = config.users_per_cell();
    let centers = class_members(config, UeClass::Center);
    let middles = class_members(config, UeClass::Middle);
    let edges = class_members(config, UeClass::Edge);
    let mut clusters = Vec::with_capacity(config.n_cells);
    for _ in 0..config.n_cells {
        let mut cell: Vec<Vec<usize>> = match strategy {
            ClusterStrategy::Singletons => (0..u).map(|j| vec![j]).collect(),
            ClusterStrategy::WholeCell => vec![(0..u).collect()],
            ClusterStrategy::Pairs if middles.is_empty() => {
                let mut e = edges.clone();
                e.shuffle(&mut rng);
                centers.iter().zip(e).map(|(&c, e)| vec![c, e]).collect()
            }
            ClusterStrategy::Pairs => {
                // Half the centers take a middle UE, the rest an edge UE; the
                // leftover middle and edge UEs pair with each other.
                if centers.len() % 2 != 0 {
                    return Err(Error::InvalidPlan(
                        "three-class pairing needs an even number of UEs per class".into(),
                    ));
                }
                let mut c = centers.clone();
                let mut m = middles.clone();
                let mut e = edges.clone();
                c.shuffle(&mut rng);
                m.shuffle(&mut rng);
                e.shuffle(&mut rng);
                let half = c.len() / 2;
                let mut out = Vec::with_capacity(u / 2);
                for k in 0..half {
                    out.push(vec![c[k], m[k]]);
                    out.push(vec![c[half + k], e[k]]);
                }
                for k in half..m.len() {
                    out.push(vec![m[k], e[k]]);
                }
                out
            }
            ClusterStrategy::Triples(scenario) => {
                if middles.is_empty() {
                    return Err(Error::InvalidPlan("triples need three UE classes".into()));
                }
                let mut m = middles.clone();
                let mut e = edges.clone();
                m.shuffle(&mut rng);
                e.shuffle(&mut rng);
                match scenario {
                    TripleScenario::Distinct => {
                        centers.iter().zip(m).zip(e).map(|((&c, m), e)| vec![c, m, e]).collect()
                    }
                    TripleScenario::Mixed => {
                        if centers.len() % 2 != 0 {
                            return Err(Error::InvalidPlan(
                                "mixed triples need an even number of UEs per class".into(),
                            ));
                        }
                        let mut c = centers.clone();
                        c.shuffle(&mut rng);
                        let half = c.len() / 2;
                        let mut out = Vec::with_capacity(c.len());
                        for k in 0..half {
                            out.push(vec![c[2 * k], m[2 * k], m[2 * k + 1]]);
                            out.push(vec![c[2 * k + 1], e[2 * k], e[2 * k + 1]]);
                        }
                        out
                    }
                }
            }
        };
        for cluster in &mut cell {
            sort_decode_order(config, cluster);
        }
        cell.sort_by_key(|c| c.iter().copied().max());
        clusters.push(cell);
    }
    ClusterPlan::new(u, clusters)
}
