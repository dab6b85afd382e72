//! Convex-concave procedure for `minimize f(x) + g(x)` with `f` concave and
//! `g` convex over a polytope: `f` is replaced by its first-order expansion at
//! the current reference point and the resulting convex problem is solved
//! with the interior-point method.

use super::{solve_concave, ConcaveObjective, ConcaveProgram, Hessian, LinearRows, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// First-order expansion `k0 + Σ_j gradient_j (x_j - reference_j)` of the
/// concave part.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpLinearization {
    pub k0: f64,
    pub gradient: Vec<f64>,
    pub reference: Vec<f64>,
}

impl CcpLinearization {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.k0
            + self
                .gradient
                .iter()
                .zip(x.iter().zip(&self.reference))
                .map(|(k, (x, r))| k * (x - r))
                .sum::<f64>()
    }
}

/// Difference-of-convex program over `lower <= x <= upper`, `G x <= h`.
pub trait DcProgram {
    fn dim(&self) -> usize;
    /// Concave part `f`.
    fn concave_value(&self, x: &[f64]) -> f64;
    fn linearize(&self, reference: &[f64]) -> CcpLinearization;
    /// Convex part `g`.
    fn convex_value(&self, x: &[f64]) -> f64;
    fn convex_gradient(&self, x: &[f64], grad: &mut [f64]);
    fn convex_hessian(&self, x: &[f64]) -> DMatrix<f64>;
    fn inequalities(&self) -> LinearRows;
    fn lower(&self) -> Vec<f64>;
    fn upper(&self) -> Vec<f64>;

    fn objective(&self, x: &[f64]) -> f64 {
        self.concave_value(x) + self.convex_value(x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CcpStop {
    pub rel: f64,
    pub max_iter: usize,
}

impl Default for CcpStop {
    fn default() -> Self {
        Self {
            rel: 1e-6,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CcpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Objective at the start point and after every accepted iteration.
    pub history: Vec<f64>,
    /// Objective at every inner solution, accepted or not.
    pub raw_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `-(linearization + g)`, maximized by the interior-point solver.
struct Surrogate<'a, P> {
    program: &'a P,
    lin: &'a CcpLinearization,
}

impl<P: DcProgram> ConcaveObjective for Surrogate<'_, P> {
    fn dim(&self) -> usize {
        self.program.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        -(self.lin.eval(x) + self.program.convex_value(x))
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.program.convex_gradient(x, grad);
        for (g, k) in grad.iter_mut().zip(&self.lin.gradient) {
            *g = -(*g + k);
        }
    }

    fn hessian(&self, x: &[f64]) -> Hessian {
        Hessian::Dense(-self.program.convex_hessian(x))
    }
}

/// Runs the procedure from `start`. An inner solution is accepted only if it
/// lowers the objective, so the returned objective never exceeds the start's.
pub fn ccp_solve<P: DcProgram>(
    program: &P,
    start: &[f64],
    stop: CcpStop,
    inner: &SolverOptions,
) -> Result<CcpResult> {
    let inequalities = program.inequalities();
    let lower = program.lower();
    let upper = program.upper();
    let mut x = start.to_vec();
    let mut objective = program.objective(&x);
    let mut history = vec![objective];
    let mut raw_history = vec![objective];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < stop.max_iter {
        iterations += 1;
        let lin = program.linearize(&x);
        let convexified = ConcaveProgram {
            objective: Surrogate {
                program,
                lin: &lin,
            },
            equalities: LinearRows::new(),
            inequalities: inequalities.clone(),
            lower: lower.clone(),
            upper: upper.clone(),
            start: Some(x.clone()),
        };
        let report = solve_concave(&convexified, inner);
        if report.status != SolveStatus::Optimal {
            return Err(Error::Solver(format!(
                "CCP iteration {iterations}: inner solve ended with {:?}",
                report.status
            )));
        }
        let candidate = program.objective(&report.x);
        raw_history.push(candidate);
        if !(candidate < objective) {
            converged = true;
            break;
        }
        let change = (objective - candidate) / objective.abs().max(f64::MIN_POSITIVE);
        x = report.x;
        objective = candidate;
        history.push(objective);
        if change < stop.rel {
            converged = true;
            break;
        }
    }
    Ok(CcpResult {
        x,
        objective,
        history,
        raw_history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `f(x) = a·x` (affine), `g(x) = Σ (x_j - c_j)²` over `0 <= x <= 1`.
    struct AffinePlusQuadratic {
        a: Vec<f64>,
        c: Vec<f64>,
    }

    impl DcProgram for AffinePlusQuadratic {
        fn dim(&self) -> usize {
            self.a.len()
        }
        fn concave_value(&self, x: &[f64]) -> f64 {
            self.a.iter().zip(x).map(|(a, x)| a * x).sum()
        }
        fn linearize(&self, reference: &[f64]) -> CcpLinearization {
            CcpLinearization {
                k0: self.concave_value(reference),
                gradient: self.a.clone(),
                reference: reference.to_vec(),
            }
        }
        fn convex_value(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.c).map(|(x, c)| (x - c) * (x - c)).sum()
        }
        fn convex_gradient(&self, x: &[f64], grad: &mut [f64]) {
            for ((g, x), c) in grad.iter_mut().zip(x).zip(&self.c) {
                *g = 2.0 * (x - c);
            }
        }
        fn convex_hessian(&self, x: &[f64]) -> DMatrix<f64> {
            DMatrix::identity(x.len(), x.len()) * 2.0
        }
        fn inequalities(&self) -> LinearRows {
            LinearRows::new()
        }
        fn lower(&self) -> Vec<f64> {
            vec![0.0; self.a.len()]
        }
        fn upper(&self) -> Vec<f64> {
            vec![1.0; self.a.len()]
        }
    }

    #[test]
    fn affine_concave_part_is_reproduced_exactly() {
        let p = AffinePlusQuadratic {
            a: vec![1.0, -2.0],
            c: vec![0.2, 0.1],
        };
        let lin = p.linearize(&[0.3, 0.9]);
        for x in [[0.0, 0.0], [1.0, 0.5], [0.3, 0.9]] {
            assert!((lin.eval(&x) - p.concave_value(&x)).abs() < 1e-15);
        }
    }

    #[test]
    fn affine_concave_part_converges_in_one_step() {
        let p = AffinePlusQuadratic {
            a: vec![1.0, -2.0],
            c: vec![0.2, 0.1],
        };
        let r = ccp_solve(&p, &[0.5, 0.5], CcpStop::default(), &SolverOptions::default()).unwrap();
        // Minimizer of x - 2y + (x-0.2)² + (y-0.1)² on the box: x = 0, y = 1.
        assert!(r.x[0].abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
        // All progress happens in the first iteration.
        assert!((r.history[1] - r.objective).abs() < 1e-9);
        assert!(r.converged);
    }

    #[test]
    fn zero_objective_keeps_start() {
        let p = AffinePlusQuadratic {
            a: vec![0.0],
            c: vec![0.0],
        };
        // g is not zero here; use a start at the optimum to make every inner
        // solution non-improving.
        let r = ccp_solve(&p, &[0.0], CcpStop::default(), &SolverOptions::default()).unwrap();
        assert_eq!(r.x, vec![0.0]);
    }
}
