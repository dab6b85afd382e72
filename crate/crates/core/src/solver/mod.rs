//! Numerical engines: an interior-point solver for small concave maximization
//! problems with affine constraints, and the convex-concave procedure that
//! drives the per-slot power problem.

mod ccp;
mod ipm;

pub use ccp::{ccp_solve, CcpLinearization, CcpResult, CcpStop, DcProgram};
pub use ipm::{solve_concave, SolverOptions};

use nalgebra::DMatrix;

/// Hessian of a concave objective (negative semidefinite).
#[derive(Debug, Clone)]
pub enum Hessian {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

pub trait ConcaveObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn hessian(&self, x: &[f64]) -> Hessian;
}

/// Sparse affine rows `a_i · x (op) rhs_i`.
#[derive(Debug, Clone, Default)]
pub struct LinearRows {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

impl LinearRows {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn eval(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// `maximize f(x)` subject to `E x = e`, `G x <= g` and `lower <= x <= upper`
/// (infinite bounds allowed).
pub struct ConcaveProgram<O> {
    pub objective: O,
    pub equalities: LinearRows,
    pub inequalities: LinearRows,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Optional starting point; moved into the interior of the bounds.
    pub start: Option<Vec<f64>>,
}

impl<O: ConcaveObjective> ConcaveProgram<O> {
    pub fn new(objective: O) -> Self {
        let n = objective.dim();
        Self {
            objective,
            equalities: LinearRows::new(),
            inequalities: LinearRows::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            start: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// Largest violation of any constraint at `x`.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.equalities.len() {
            worst = worst.max((self.equalities.eval(i, x) - self.equalities.rhs[i]).abs());
        }
        for i in 0..self.inequalities.len() {
            worst = worst.max(self.inequalities.eval(i, x) - self.inequalities.rhs[i]);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Max-norm of stationarity, primal feasibility and complementarity.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}
