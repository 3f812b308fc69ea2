use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Cone, ConicProgram, Solution, SolveStatus};
use crate::error::{Error, Result};

/// Anything that can solve a [`ConicProgram`].
pub trait ConicBackend: Send + Sync {
    fn solve(&self, program: &ConicProgram) -> Result<Solution>;
}

/// Interior-point backend built on Clarabel.
#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    pub tolerance: f64,
    pub max_iterations: u32,
    pub verbose: bool,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 200, verbose: false }
    }
}

impl ConicBackend for ClarabelBackend {
    fn solve(&self, program: &ConicProgram) -> Result<Solution> {
        let n = program.n_variables();
        let sqrt2 = std::f64::consts::SQRT_2;
        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones = Vec::with_capacity(program.blocks.len());
        for blk in &program.blocks {
            // PSD rows are scaled to Clarabel's svec convention.
            let scales: Vec<f64> = match blk.cone {
                Cone::Psd { dim } => (0..dim).flat_map(|j| (0..=j).map(move |i| if i == j { 1.0 } else { sqrt2 })).collect(),
                _ => vec![1.0; blk.rows.len()],
            };
            for (row, s) in blk.rows.iter().zip(scales) {
                let r = b.len();
                // Clarabel wants b − A x ∈ K for our y = c·x + d.
                b.push(s * row.constant);
                for &(j, c) in &row.terms {
                    ri.push(r);
                    ci.push(j);
                    vals.push(-s * c);
                }
            }
            cones.push(match blk.cone {
                Cone::Zero => SupportedConeT::ZeroConeT(blk.rows.len()),
                Cone::Nonneg => SupportedConeT::NonnegativeConeT(blk.rows.len()),
                Cone::SecondOrder => SupportedConeT::SecondOrderConeT(blk.rows.len()),
                Cone::Psd { dim } => SupportedConeT::PSDTriangleConeT(dim),
            });
        }
        let a = CscMatrix::new_from_triplets(b.len(), n, ri, ci, vals);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(j, c) in &program.objective.terms {
            q[j] -= c;
        }
        let settings = DefaultSettings {
            max_iter: self.max_iterations,
            verbose: self.verbose,
            tol_gap_abs: self.tolerance,
            tol_gap_rel: self.tolerance,
            tol_feas: self.tolerance,
            ..DefaultSettings::default()
        };
        let start = Instant::now();
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
            _ => SolveStatus::NumericalFailure,
        };
        let x = sol.x.clone();
        Ok(Solution {
            status,
            objective: program.objective.eval(&x),
            x,
            iterations: sol.iterations,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}
