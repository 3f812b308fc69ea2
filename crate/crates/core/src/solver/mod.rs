//! Conic standard form of the convex subproblems and the backend that solves them.

mod backend;
mod dims;
mod expr;
mod lower;

pub use backend::{ClarabelBackend, ConicBackend};
pub use dims::{constructed_dims, problem_dims, ProblemDims};
pub use expr::{AffineExpr, CAffine, CExprMatrix, VariableLayout};
pub use lower::{
    lower_feasibility_subproblem, lower_qp_subproblem, lower_sdp_subproblem, lower_soc_subproblem,
    LoweringParams, MinorantSet,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, CMatrix, C64};
use crate::surrogate::MinorantKind;
use crate::throughput::PrecoderSet;

/// Cone of one constraint block; the block's rows `y` must satisfy `y ∈ K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cone {
    Zero,
    Nonneg,
    /// `y[0] ≥ ‖y[1..]‖`.
    SecondOrder,
    /// Symmetric `dim × dim` matrix given by its upper triangle, column-major, unscaled.
    Psd { dim: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeBlock {
    pub cone: Cone,
    pub label: String,
    pub rows: Vec<AffineExpr>,
}

impl ConeBlock {
    pub fn new(cone: Cone, label: impl Into<String>, mut rows: Vec<AffineExpr>) -> Self {
        rows.iter_mut().for_each(AffineExpr::compact);
        Self { cone, label: label.into(), rows }
    }

    /// How far `x` is from satisfying this block (0 when inside the cone).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        match self.cone {
            Cone::Zero => y.iter().fold(0.0, |m, v| m.max(v.abs())),
            Cone::Nonneg => y.iter().fold(0.0, |m, v| m.max(-v)),
            Cone::SecondOrder => {
                let tail = y[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                (tail - y[0]).max(0.0)
            }
            Cone::Psd { dim } => {
                let mut m = CMatrix::zeros(dim, dim);
                let mut k = 0;
                for j in 0..dim {
                    for i in 0..=j {
                        m[(i, j)] = C64::new(y[k], 0.0);
                        m[(j, i)] = C64::new(y[k], 0.0);
                        k += 1;
                    }
                }
                (-min_eigenvalue(&m)).max(0.0)
            }
        }
    }
}

/// Counts follow the closed-form convention: complex precoder entries plus the
/// min-realizing slacks, and one row per power budget, per rate row and
/// per trust-region row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramMetadata {
    pub kind: MinorantKind,
    pub feasibility: bool,
    pub n_complex: usize,
    pub n_min_slacks: usize,
    pub n_real_variables: usize,
    pub m_power: usize,
    pub m_rate: usize,
    pub m_trust: usize,
}

impl ProgramMetadata {
    pub fn n(&self) -> usize {
        self.n_complex + self.n_min_slacks
    }

    pub fn m(&self) -> usize {
        self.m_power + self.m_rate + self.m_trust
    }
}

/// Maximize `objective(x)` subject to every block.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicProgram {
    pub layout: VariableLayout,
    pub objective: AffineExpr,
    pub blocks: Vec<ConeBlock>,
    pub metadata: ProgramMetadata,
}

impl ConicProgram {
    pub fn n_variables(&self) -> usize {
        self.layout.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_variables();
        for b in &self.blocks {
            let ok = match b.cone {
                Cone::Zero | Cone::Nonneg => !b.rows.is_empty(),
                Cone::SecondOrder => !b.rows.is_empty(),
                Cone::Psd { dim } => b.rows.len() == dim * (dim + 1) / 2 && dim > 0,
            };
            if !ok {
                return Err(Error::Dimension(format!("block '{}' has {} rows", b.label, b.rows.len())));
            }
            if b.rows.iter().flat_map(|r| &r.terms).any(|&(i, _)| i >= n) {
                return Err(Error::Dimension(format!("block '{}' references a missing variable", b.label)));
            }
        }
        Ok(())
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.violation(x)).fold(0.0, f64::max)
    }

    /// Pack a precoder set (slacks zero) into a variable vector.
    pub fn pack(&self, v: &PrecoderSet) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; l.len()];
        for (k, m) in v.matrices().iter().enumerate() {
            for c in 0..l.streams {
                for r in 0..l.tx_antennas {
                    x[l.re(k, r, c)] = m[(r, c)].re;
                    x[l.im(k, r, c)] = m[(r, c)].im;
                }
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> Result<PrecoderSet> {
        let l = &self.layout;
        let v = (0..l.n_cells * l.users_per_cell)
            .map(|k| {
                CMatrix::from_fn(l.tx_antennas, l.streams, |r, c| C64::new(x[l.re(k, r, c)], x[l.im(k, r, c)]))
            })
            .collect();
        PrecoderSet::from_matrices(l.n_cells, l.users_per_cell, v)
    }

    pub fn slack(&self, name: &str) -> Option<usize> {
        self.layout.slacks.iter().position(|s| s == name).map(|k| self.layout.n_precoder() + k)
    }

    /// Self-describing JSON dump for cross-checking with other solvers.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Solved to reduced accuracy.
    AlmostOptimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, Self::Optimal | Self::AlmostOptimal)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub wall_time_s: f64,
}

pub fn solve(program: &ConicProgram, backend: &dyn ConicBackend) -> Result<Solution> {
    program.validate()?;
    backend.solve(program)
}
