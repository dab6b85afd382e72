//! Primal-dual interior-point method (Mehrotra predictor-corrector on the
//! log-barrier KKT system).
//!
//! Inequality rows get explicit slacks so the working problem is
//! `minimize φ(z)  s.t.  A z = b,  lo <= z <= hi` with `φ = -f`. Each
//! iteration takes an affine-scaling predictor, picks the centering weight
//! `σ = (μ_aff/μ)³` and takes the corrected step with the
//! fraction-to-boundary rule. If the equality residual stops shrinking a
//! phase-1 program minimizing the total violation decides feasibility.

use super::{ConcaveObjective, ConcaveProgram, Hessian, SolveReport, SolveStatus};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Target for the average complementarity and the scaled KKT residuals.
    pub tol: f64,
    /// Initial complementarity; derived from the start point when absent.
    pub mu0: Option<f64>,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            mu0: None,
            max_iter: 600,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

const STEP_FRACTION: f64 = 0.995;

enum LiftedHessian {
    Diagonal(Vec<f64>),
    /// Dense block over the leading variables; zero elsewhere.
    Dense(DMatrix<f64>),
}

trait LiftedObjective {
    fn gradient(&self, z: &[f64], g: &mut [f64]);
    fn hessian(&self, z: &[f64]) -> LiftedHessian;
}

/// `φ(z) = -f(x)` where `x` is the leading block of `z`.
struct Negated<'a, O> {
    inner: &'a O,
    nx: usize,
    n: usize,
}

impl<O: ConcaveObjective> LiftedObjective for Negated<'_, O> {
    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        self.inner.gradient(&z[..self.nx], &mut g[..self.nx]);
        for v in &mut g[..self.nx] {
            *v = -*v;
        }
        for v in &mut g[self.nx..] {
            *v = 0.0;
        }
    }

    fn hessian(&self, z: &[f64]) -> LiftedHessian {
        match self.inner.hessian(&z[..self.nx]) {
            Hessian::Diagonal(d) => {
                let mut h = vec![0.0; self.n];
                for (hj, dj) in h.iter_mut().zip(d) {
                    *hj = -dj;
                }
                LiftedHessian::Diagonal(h)
            }
            Hessian::Dense(m) => LiftedHessian::Dense(-m),
        }
    }
}

struct Linear {
    c: Vec<f64>,
}

impl LiftedObjective for Linear {
    fn gradient(&self, _z: &[f64], g: &mut [f64]) {
        g.copy_from_slice(&self.c);
    }

    fn hessian(&self, _z: &[f64]) -> LiftedHessian {
        LiftedHessian::Diagonal(vec![0.0; self.c.len()])
    }
}

/// Equality-constrained, box-bounded working problem.
struct Lifted {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Lifted {
    fn new(n: usize, rows: Vec<Vec<(usize, f64)>>, b: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let mut cols = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                cols[j].push((i, a));
            }
        }
        Self {
            n,
            rows,
            cols,
            b,
            lo,
            hi,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn bound_count(&self) -> usize {
        self.lo.iter().filter(|l| l.is_finite()).count()
            + self.hi.iter().filter(|h| h.is_finite()).count()
    }

    /// Moves `z` strictly inside the bounds.
    fn interior(&self, z: &mut [f64]) {
        for j in 0..z.len() {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            let width = hi - lo;
            let push = if width.is_finite() {
                (1e-3 * width).min(1e-2).max(1e-12)
            } else {
                1e-2
            };
            if !z[j].is_finite() {
                z[j] = default_start(lo, hi);
            }
            if lo.is_finite() && z[j] < lo + push {
                z[j] = lo + push;
            }
            if hi.is_finite() && z[j] > hi - push {
                z[j] = hi - push;
            }
            if width.is_finite() && !(z[j] > lo && z[j] < hi) {
                z[j] = 0.5 * (lo + hi);
            }
        }
    }
}

fn default_start(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}

struct Iterate {
    z: Vec<f64>,
    nu: Vec<f64>,
    wl: Vec<f64>,
    wu: Vec<f64>,
}

#[derive(Clone)]
struct Residuals {
    rd: Vec<f64>,
    rp: Vec<f64>,
    rcl: Vec<f64>,
    rcu: Vec<f64>,
}

impl Residuals {
    fn norm(&self) -> f64 {
        [&self.rd, &self.rp, &self.rcl, &self.rcu]
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

enum CoreOutcome {
    Converged,
    MaxIter,
    /// Primal residual stalled: the affine set may miss the box interior.
    Stalled,
}

struct Core<'a, F> {
    p: &'a Lifted,
    obj: &'a F,
    opts: &'a SolverOptions,
    iterations: usize,
}

impl<F: LiftedObjective> Core<'_, F> {
    fn residuals(&self, it: &Iterate, mu: f64, grad: &mut [f64]) -> Residuals {
        let p = self.p;
        self.obj.gradient(&it.z, grad);
        let mut rd = grad.to_vec();
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in row {
                rd[j] += a * it.nu[i];
            }
        }
        let mut rcl = vec![0.0; p.n];
        let mut rcu = vec![0.0; p.n];
        for j in 0..p.n {
            rd[j] += it.wu[j] - it.wl[j];
            if p.lo[j].is_finite() {
                rcl[j] = (it.z[j] - p.lo[j]) * it.wl[j] - mu;
            }
            if p.hi[j].is_finite() {
                rcu[j] = (p.hi[j] - it.z[j]) * it.wu[j] - mu;
            }
        }
        let rp = p
            .rows
            .iter()
            .zip(&p.b)
            .map(|(row, b)| row.iter().map(|&(j, a)| a * it.z[j]).sum::<f64>() - b)
            .collect();
        Residuals { rd, rp, rcl, rcu }
    }

    fn direction(&self, it: &Iterate, r: &Residuals) -> Option<(Vec<f64>, Vec<f64>)> {
        let p = self.p;
        let n = p.n;
        let m = p.m();
        let mut sigma = vec![0.0; n];
        let mut rtd = r.rd.clone();
        for j in 0..n {
            if p.lo[j].is_finite() {
                let gap = it.z[j] - p.lo[j];
                sigma[j] += it.wl[j] / gap;
                rtd[j] += r.rcl[j] / gap;
            }
            if p.hi[j].is_finite() {
                let gap = p.hi[j] - it.z[j];
                sigma[j] += it.wu[j] / gap;
                rtd[j] -= r.rcu[j] / gap;
            }
        }
        match self.obj.hessian(&it.z) {
            LiftedHessian::Diagonal(h) => {
                let d: Vec<f64> = h
                    .iter()
                    .zip(&sigma)
                    .map(|(h, s)| (h + s).max(1e-14))
                    .collect();
                if m == 0 {
                    let dz = rtd.iter().zip(&d).map(|(r, d)| -r / d).collect();
                    return Some((dz, Vec::new()));
                }
                let mut normal = DMatrix::<f64>::zeros(m, m);
                for j in 0..n {
                    let col = &p.cols[j];
                    let inv = 1.0 / d[j];
                    for &(r1, a1) in col {
                        for &(r2, a2) in col {
                            normal[(r1, r2)] += a1 * a2 * inv;
                        }
                    }
                }
                let mut rhs = DVector::from_column_slice(&r.rp);
                for j in 0..n {
                    let t = -rtd[j] / d[j];
                    for &(i, a) in &p.cols[j] {
                        rhs[i] += a * t;
                    }
                }
                let dnu = solve_spd(normal, rhs)?;
                let mut dz = vec![0.0; n];
                for j in 0..n {
                    let atnu: f64 = p.cols[j].iter().map(|&(i, a)| a * dnu[i]).sum();
                    dz[j] = (-rtd[j] - atnu) / d[j];
                }
                Some((dz, dnu.iter().cloned().collect()))
            }
            LiftedHessian::Dense(h) => {
                let nx = h.nrows();
                let mut k = DMatrix::<f64>::zeros(n + m, n + m);
                k.view_mut((0, 0), (nx, nx)).copy_from(&h);
                for j in 0..n {
                    k[(j, j)] += sigma[j];
                    if k[(j, j)] <= 0.0 {
                        k[(j, j)] = 1e-14;
                    }
                }
                for (i, row) in p.rows.iter().enumerate() {
                    for &(j, a) in row {
                        k[(n + i, j)] += a;
                        k[(j, n + i)] += a;
                    }
                }
                let mut rhs = DVector::<f64>::zeros(n + m);
                for j in 0..n {
                    rhs[j] = -rtd[j];
                }
                for i in 0..m {
                    rhs[n + i] = -r.rp[i];
                }
                let sol = k.clone().lu().solve(&rhs).or_else(|| {
                    for i in 0..m {
                        k[(n + i, n + i)] -= 1e-12;
                    }
                    k.lu().solve(&rhs)
                })?;
                if sol.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                Some((sol.rows(0, n).iter().cloned().collect(), sol.rows(n, m).iter().cloned().collect()))
            }
        }
    }

    fn dual_steps(&self, it: &Iterate, r: &Residuals, dz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let mut dwl = vec![0.0; p.n];
        let mut dwu = vec![0.0; p.n];
        for j in 0..p.n {
            if p.lo[j].is_finite() {
                dwl[j] = (-r.rcl[j] - it.wl[j] * dz[j]) / (it.z[j] - p.lo[j]);
            }
            if p.hi[j].is_finite() {
                dwu[j] = (-r.rcu[j] + it.wu[j] * dz[j]) / (p.hi[j] - it.z[j]);
            }
        }
        (dwl, dwu)
    }

    fn max_step(&self, it: &Iterate, dz: &[f64], dwl: &[f64], dwu: &[f64]) -> f64 {
        let p = self.p;
        let mut alpha: f64 = 1.0 / STEP_FRACTION;
        for j in 0..p.n {
            if p.lo[j].is_finite() {
                if dz[j] < 0.0 {
                    alpha = alpha.min((it.z[j] - p.lo[j]) / -dz[j]);
                }
                if dwl[j] < 0.0 {
                    alpha = alpha.min(it.wl[j] / -dwl[j]);
                }
            }
            if p.hi[j].is_finite() {
                if dz[j] > 0.0 {
                    alpha = alpha.min((p.hi[j] - it.z[j]) / dz[j]);
                }
                if dwu[j] < 0.0 {
                    alpha = alpha.min(it.wu[j] / -dwu[j]);
                }
            }
        }
        (STEP_FRACTION * alpha).min(1.0)
    }

    /// Largest equality residual relative to `1 + |b_i| + Σ_j |a_ij z_j|`.
    fn relative_primal(&self, it: &Iterate, rp: &[f64]) -> f64 {
        self.p
            .rows
            .iter()
            .zip(&self.p.b)
            .zip(rp)
            .map(|((row, b), r)| {
                let size: f64 = row.iter().map(|&(j, a)| (a * it.z[j]).abs()).sum();
                r.abs() / (1.0 + b.abs() + size)
            })
            .fold(0.0, f64::max)
    }

    fn strictly_inside(&self, it: &Iterate) -> bool {
        let p = self.p;
        (0..p.n).all(|j| {
            it.z[j].is_finite()
                && (!p.lo[j].is_finite() || (it.z[j] > p.lo[j] && it.wl[j] > 0.0))
                && (!p.hi[j].is_finite() || (it.z[j] < p.hi[j] && it.wu[j] > 0.0))
        })
    }

    /// Average complementarity over the finite bounds.
    fn complementarity(&self, it: &Iterate) -> f64 {
        let p = self.p;
        let mut total = 0.0;
        for j in 0..p.n {
            if p.lo[j].is_finite() {
                total += (it.z[j] - p.lo[j]) * it.wl[j];
            }
            if p.hi[j].is_finite() {
                total += (p.hi[j] - it.z[j]) * it.wu[j];
            }
        }
        total / p.bound_count().max(1) as f64
    }

    /// Average complementarity after a step of length `alpha`.
    fn complementarity_after(&self, it: &Iterate, alpha: f64, dz: &[f64], dwl: &[f64], dwu: &[f64]) -> f64 {
        let p = self.p;
        let mut total = 0.0;
        for j in 0..p.n {
            let z = it.z[j] + alpha * dz[j];
            if p.lo[j].is_finite() {
                total += (z - p.lo[j]) * (it.wl[j] + alpha * dwl[j]);
            }
            if p.hi[j].is_finite() {
                total += (p.hi[j] - z) * (it.wu[j] + alpha * dwu[j]);
            }
        }
        total / p.bound_count().max(1) as f64
    }

    /// Predictor-corrector iterations until the residuals and the average
    /// complementarity fall below the tolerance.
    fn run(&mut self, it: &mut Iterate) -> CoreOutcome {
        let p = self.p;
        let tol = self.opts.tol;
        let mut grad = vec![0.0; p.n];
        self.obj.gradient(&it.z, &mut grad);
        let scale_d = 1.0 + inf_norm(&grad);
        let mu_start = self.complementarity(it).max(1.0);
        let mut best = f64::INFINITY;
        let mut since_progress = 0;
        loop {
            let mu = self.complementarity(it);
            let r = self.residuals(it, 0.0, &mut grad);
            let rd = inf_norm(&r.rd);
            let rp = self.relative_primal(it, &r.rp);
            log::trace!("ipm {} rd {rd:.3e} rp {rp:.3e} mu {mu:.3e}", self.iterations);
            if !(mu.is_finite() && rd.is_finite() && rp.is_finite()) {
                return CoreOutcome::Stalled;
            }
            if rd <= tol * scale_d && rp <= tol && mu <= tol * scale_d {
                return CoreOutcome::Converged;
            }
            let floor = 1e3 * tol;
            let at_floor = rp <= floor && rd <= floor * scale_d && mu <= floor * scale_d;
            if at_floor && mu <= 1e-3 * tol * scale_d {
                return CoreOutcome::Converged;
            }
            if self.iterations >= self.opts.max_iter {
                return CoreOutcome::MaxIter;
            }
            let merit = rp.max(rd / scale_d).max(mu / scale_d);
            if merit < 0.5 * best {
                best = merit;
                since_progress = 0;
            } else {
                since_progress += 1;
            }
            // Accuracy floor of the linear algebra: accept a slightly looser
            // point once progress stops.
            if since_progress >= 50 {
                return if at_floor {
                    CoreOutcome::Converged
                } else {
                    CoreOutcome::Stalled
                };
            }
            // Diverging complementarity with no primal progress signals an
            // empty feasible set.
            if mu > 1e12 * mu_start && rp > tol {
                return CoreOutcome::Stalled;
            }
            self.iterations += 1;

            let Some((dz_a, _)) = self.direction(it, &r) else {
                return if rp > tol { CoreOutcome::Stalled } else { CoreOutcome::MaxIter };
            };
            let (dwl_a, dwu_a) = self.dual_steps(it, &r, &dz_a);
            let alpha_a = (self.max_step(it, &dz_a, &dwl_a, &dwu_a) / STEP_FRACTION).min(1.0);
            let mu_a = self.complementarity_after(it, alpha_a, &dz_a, &dwl_a, &dwu_a);
            let sigma = if mu > 0.0 { (mu_a / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

            let target = sigma * mu;
            let base = self.residuals(it, target, &mut grad);
            let phi0 = base.norm();
            let mut rc = base.clone();
            for j in 0..p.n {
                if p.lo[j].is_finite() {
                    rc.rcl[j] += dz_a[j] * dwl_a[j];
                }
                if p.hi[j].is_finite() {
                    rc.rcu[j] -= dz_a[j] * dwu_a[j];
                }
            }
            // Without progress, prefer steps that lower the perturbed KKT
            // residual; this breaks cycles on strongly curved objectives.
            let mut next = None;
            let since_progress = since_progress;
            for r in [&rc, &base] {
                let Some((dz, dnu)) = self.direction(it, r) else {
                    continue;
                };
                let (dwl, dwu) = self.dual_steps(it, r, &dz);
                let alpha = self.max_step(it, &dz, &dwl, &dwu);
                let d = [&dz[..], &dnu[..], &dwl[..], &dwu[..]];
                next = (since_progress >= 5)
                    .then(|| self.line_search(it, d, alpha, target, phi0, true, &mut grad))
                    .flatten()
                    .or_else(|| self.line_search(it, d, alpha, target, phi0, false, &mut grad));
                if next.is_some() {
                    break;
                }
            }
            match next {
                Some(trial) => *it = trial,
                None => return if rp > tol { CoreOutcome::Stalled } else { CoreOutcome::MaxIter },
            }
        }
    }

    /// Backtracks from `alpha` until the iterate stays strictly inside with a
    /// finite gradient and, when `monotone`, the perturbed KKT residual
    /// decreases.
    fn line_search(
        &self,
        it: &Iterate,
        d: [&[f64]; 4],
        mut alpha: f64,
        target: f64,
        phi0: f64,
        monotone: bool,
        grad: &mut [f64],
    ) -> Option<Iterate> {
        for _ in 0..40 {
            let trial = Iterate {
                z: axpy(&it.z, alpha, d[0]),
                nu: axpy(&it.nu, alpha, d[1]),
                wl: axpy(&it.wl, alpha, d[2]),
                wu: axpy(&it.wu, alpha, d[3]),
            };
            self.obj.gradient(&trial.z, grad);
            if grad.iter().all(|g| g.is_finite()) && self.strictly_inside(&trial)
                && (!monotone || self.residuals(&trial, target, grad).norm() <= (1.0 - 1e-4 * alpha) * phi0) {
                    return Some(trial);
                }
            alpha *= 0.5;
        }
        None
    }
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

fn solve_spd(m: DMatrix<f64>, rhs: DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    let trace = m.trace().abs().max(1.0);
    let mut reg = m.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-12 * trace;
    }
    if let Some(ch) = reg.cholesky() {
        return Some(ch.solve(&rhs));
    }
    m.lu().solve(&rhs)
}

fn start_iterate(p: &Lifted, z: Vec<f64>, mu: f64) -> Iterate {
    let mut wl = vec![0.0; p.n];
    let mut wu = vec![0.0; p.n];
    for j in 0..p.n {
        if p.lo[j].is_finite() {
            wl[j] = mu / (z[j] - p.lo[j]);
        }
        if p.hi[j].is_finite() {
            wu[j] = mu / (p.hi[j] - z[j]);
        }
    }
    Iterate {
        z,
        nu: vec![0.0; p.m()],
        wl,
        wu,
    }
}

fn initial_mu<F: LiftedObjective>(p: &Lifted, obj: &F, z: &[f64], opts: &SolverOptions) -> f64 {
    if let Some(mu) = opts.mu0 {
        return mu;
    }
    let mut g = vec![0.0; p.n];
    obj.gradient(z, &mut g);
    let mut width = 0.0;
    let mut count = 0.0;
    for j in 0..p.n {
        let d = (z[j] - p.lo[j]).min(p.hi[j] - z[j]);
        if d.is_finite() {
            width += d;
            count += 1.0;
        }
    }
    let width = if count > 0.0 { width / count } else { 1.0 };
    (inf_norm(&g) * width.max(1e-3)).max(1e-6)
}

fn run_core<F: LiftedObjective>(
    p: &Lifted,
    obj: &F,
    z0: Vec<f64>,
    opts: &SolverOptions,
    iterations: &mut usize,
) -> (Iterate, CoreOutcome, f64) {
    let mu = initial_mu(p, obj, &z0, opts);
    let mut it = start_iterate(p, z0, mu);
    let mut core = Core {
        p,
        obj,
        opts,
        iterations: *iterations,
    };
    let outcome = core.run(&mut it);
    *iterations = core.iterations;
    let final_mu = it
        .z
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let mut c: f64 = 0.0;
            if p.lo[j].is_finite() {
                c = c.max((z - p.lo[j]) * it.wl[j]);
            }
            if p.hi[j].is_finite() {
                c = c.max((p.hi[j] - z) * it.wu[j]);
            }
            c
        })
        .fold(0.0, f64::max);
    (it, outcome, final_mu)
}

/// Maximizes a concave objective subject to affine constraints and bounds.
pub fn solve_concave<O: ConcaveObjective>(
    program: &ConcaveProgram<O>,
    opts: &SolverOptions,
) -> SolveReport {
    let nx = program.dim();
    let ni = program.inequalities.len();
    let n = nx + ni;
    let mut rows = program.equalities.rows.clone();
    let mut b = program.equalities.rhs.clone();
    for (i, row) in program.inequalities.rows.iter().enumerate() {
        let mut r = row.clone();
        r.push((nx + i, 1.0));
        rows.push(r);
        b.push(program.inequalities.rhs[i]);
    }
    let mut lo = program.lower.clone();
    let mut hi = program.upper.clone();
    lo.extend(std::iter::repeat_n(0.0, ni));
    hi.extend(std::iter::repeat_n(f64::INFINITY, ni));
    let lifted = Lifted::new(n, rows, b, lo, hi);

    let mut z0: Vec<f64> = match &program.start {
        Some(x) => x.clone(),
        None => (0..nx)
            .map(|j| default_start(program.lower[j], program.upper[j]))
            .collect(),
    };
    lifted.interior(&mut z0[..]);
    for i in 0..ni {
        let slack = program.inequalities.rhs[i] - program.inequalities.eval(i, &z0);
        z0.push(slack.max(1e-2 * (1.0 + program.inequalities.rhs[i].abs())));
    }

    let objective = Negated {
        inner: &program.objective,
        nx,
        n,
    };
    let mut iterations = 0;
    let (mut it, mut outcome, _) = run_core(&lifted, &objective, z0.clone(), opts, &mut iterations);

    if matches!(outcome, CoreOutcome::Stalled) {
        match phase_one(&lifted, &z0, opts, &mut iterations) {
            Some(z) => {
                let (it2, out2, _) = run_core(&lifted, &objective, z, opts, &mut iterations);
                it = it2;
                outcome = match out2 {
                    CoreOutcome::Stalled => CoreOutcome::MaxIter,
                    o => o,
                };
            }
            None => {
                let x = it.z[..nx].to_vec();
                return SolveReport {
                    objective: program.objective.value(&x),
                    kkt_residual: program.infeasibility(&x),
                    x,
                    iterations,
                    status: SolveStatus::Infeasible,
                };
            }
        }
    }

    let mut grad = vec![0.0; n];
    let core = Core {
        p: &lifted,
        obj: &objective,
        opts,
        iterations,
    };
    let r = core.residuals(&it, 0.0, &mut grad);
    let kkt = inf_norm(&r.rd)
        .max(inf_norm(&r.rp))
        .max(inf_norm(&r.rcl))
        .max(inf_norm(&r.rcu));
    let x = it.z[..nx].to_vec();
    SolveReport {
        objective: program.objective.value(&x),
        kkt_residual: kkt,
        x,
        iterations,
        status: match outcome {
            CoreOutcome::Converged => SolveStatus::Optimal,
            _ => SolveStatus::MaxIter,
        },
    }
}

/// Minimizes total equality violation `Σ (a⁺ + a⁻)` over the box. Returns an
/// interior point with negligible violation, or `None` if none exists.
fn phase_one(p: &Lifted, z: &[f64], opts: &SolverOptions, iterations: &mut usize) -> Option<Vec<f64>> {
    let n = p.n;
    let m = p.m();
    let mut z0 = z.to_vec();
    p.interior(&mut z0);
    let residual: Vec<f64> = p
        .rows
        .iter()
        .zip(&p.b)
        .map(|(row, b)| b - row.iter().map(|&(j, a)| a * z0[j]).sum::<f64>())
        .collect();
    let mut rows = p.rows.clone();
    for (i, row) in rows.iter_mut().enumerate() {
        row.push((n + i, 1.0));
        row.push((n + m + i, -1.0));
    }
    for r in &residual {
        z0.push(r.max(0.0) + 1.0);
    }
    for r in &residual {
        z0.push((-r).max(0.0) + 1.0);
    }
    let mut lo = p.lo.clone();
    let mut hi = p.hi.clone();
    lo.extend(std::iter::repeat_n(0.0, 2 * m));
    hi.extend(std::iter::repeat_n(f64::INFINITY, 2 * m));
    let aux = Lifted::new(n + 2 * m, rows, p.b.clone(), lo, hi);
    let mut c = vec![0.0; n + 2 * m];
    for v in &mut c[n..] {
        *v = 1.0;
    }
    let obj = Linear { c };
    let inner_opts = SolverOptions {
        tol: opts.tol.min(1e-10),
        ..opts.clone()
    };
    let (it, _, _) = run_core(&aux, &obj, z0, &inner_opts, iterations);
    let violation: f64 = it.z[n..].iter().sum();
    let scale = 1.0 + inf_norm(&p.b);
    if violation > 1e-7 * scale {
        return None;
    }
    Some(it.z[..n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::LinearRows;

    struct NegSquares(usize);
    impl ConcaveObjective for NegSquares {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, x: &[f64]) -> f64 {
            -x.iter().map(|v| v * v).sum::<f64>()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for (g, x) in g.iter_mut().zip(x) {
                *g = -2.0 * x;
            }
        }
        fn hessian(&self, _x: &[f64]) -> Hessian {
            Hessian::Diagonal(vec![-2.0; self.0])
        }
    }

    struct SumLog {
        n: usize,
        dense: bool,
    }
    impl ConcaveObjective for SumLog {
        fn dim(&self) -> usize {
            self.n
        }
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().map(|v| (1.0 + v).ln()).sum()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for (g, x) in g.iter_mut().zip(x) {
                *g = 1.0 / (1.0 + x);
            }
        }
        fn hessian(&self, x: &[f64]) -> Hessian {
            let d: Vec<f64> = x.iter().map(|v| -1.0 / ((1.0 + v) * (1.0 + v))).collect();
            if self.dense {
                Hessian::Dense(DMatrix::from_diagonal(&DVector::from_vec(d)))
            } else {
                Hessian::Diagonal(d)
            }
        }
    }

    #[test]
    fn negative_norm_over_simplex_is_uniform() {
        let mut p = ConcaveProgram::new(NegSquares(4));
        p.equalities.push((0..4).map(|j| (j, 1.0)).collect(), 1.0);
        p.lower = vec![0.0; 4];
        let r = solve_concave(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        for x in &r.x {
            assert!((x - 0.25).abs() < 1e-8, "{:?}", r.x);
        }
        assert!(r.kkt_residual <= 1e-9);
    }

    #[test]
    fn sum_log_under_budget_splits_equally() {
        for dense in [false, true] {
            let mut p = ConcaveProgram::new(SumLog { n: 3, dense });
            p.inequalities.push((0..3).map(|j| (j, 1.0)).collect(), 6.0);
            p.lower = vec![0.0; 3];
            let r = solve_concave(&p, &SolverOptions::default());
            assert_eq!(r.status, SolveStatus::Optimal);
            for x in &r.x {
                assert!((x - 2.0).abs() < 1e-7, "{:?}", r.x);
            }
        }
    }

    #[test]
    fn monotone_objective_hits_upper_bound() {
        let mut p = ConcaveProgram::new(SumLog { n: 1, dense: false });
        p.lower = vec![0.0];
        p.upper = vec![2.0];
        let r = solve_concave(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = ConcaveProgram::new(SumLog { n: 2, dense: false });
        p.equalities.push(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.inequalities.push(vec![(0, -1.0), (1, -1.0)], -3.0);
        p.lower = vec![0.0; 2];
        let r = solve_concave(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn rows_helper_evaluates() {
        let mut rows = LinearRows::new();
        rows.push(vec![(0, 2.0), (2, -1.0)], 0.0);
        assert_eq!(rows.eval(0, &[1.0, 5.0, 3.0]), -1.0);
    }
}
