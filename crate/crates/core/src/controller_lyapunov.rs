//! State-realization-based controller: virtual queues for the QoS, CCE and
//! auxiliary-variable constraints, the per-slot subproblems P1 (auxiliary
//! rate), P2 (deviation bound) and P3 (powers, solved by the convex-concave
//! procedure and projected onto the action grid), frame replay and the
//! per-state mapping rule computed from time-averaged queues.
//!
//! P3 is evaluated in normalized powers `x = P / P_b` with
//! `a = P_b h / σ²` and cross coefficients `c = P_b' [H]_max / σ²`.

use crate::controller_stats::{FronthaulPayload, MappingRule};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::solver::{ccp_solve, CcpLinearization, CcpResult, CcpStop, DcProgram, LinearRows, SolverOptions};
use nalgebra::DMatrix;
use std::collections::HashMap;

/// P1: `argmin_{0≤γ≤v_max} F γ - κλ̂ ln(1+γ)`.
pub fn solve_p1(f: f64, kappa: f64, lambda: f64, v_max: f64) -> f64 {
    let k = kappa * lambda;
    if f <= k / (v_max + 1.0) {
        v_max
    } else if f <= k {
        k / f - 1.0
    } else {
        0.0
    }
}

/// P2: `v_max` when `Z < Σ_χ Y^χ` at the realized local state, else 0.
pub fn solve_p2(z: f64, y_sum: f64, v_max: f64) -> f64 {
    if z < y_sum {
        v_max
    } else {
        0.0
    }
}

/// `Ξ = (Y, Z, D, F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualQueueSet {
    /// `y[b][ω_b · |A_b| + χ_b]`.
    pub y: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub d: Vec<f64>,
    /// Signed.
    pub f: Vec<f64>,
}

impl VirtualQueueSet {
    pub fn zeros(game: &Game) -> Self {
        let n = game.bs_count();
        Self {
            y: (0..n)
                .map(|b| vec![0.0; game.local_state_count(b) * game.local_action_count(b)])
                .collect(),
            z: vec![0.0; n],
            d: vec![0.0; n],
            f: vec![0.0; n],
        }
    }

    /// `Y^χ_{ω_b}` for every `χ ∈ A_b`.
    pub fn y_at(&self, game: &Game, b: usize, local: usize) -> &[f64] {
        let na = game.local_action_count(b);
        &self.y[b][local * na..(local + 1) * na]
    }

    fn zip_apply(&mut self, other: &Self, f: impl Fn(f64, f64) -> f64) {
        for (a, b) in self.y.iter_mut().flatten().zip(other.y.iter().flatten()) {
            *a = f(*a, *b);
        }
        for (xs, ys) in [(&mut self.z, &other.z), (&mut self.d, &other.d), (&mut self.f, &other.f)] {
            for (a, b) in xs.iter_mut().zip(ys) {
                *a = f(*a, *b);
            }
        }
    }

    fn scale(&mut self, k: f64) {
        self.zip_apply(&self.clone(), |a, _| a * k);
    }

    /// Every queue value, Y first.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.y
            .iter()
            .flatten()
            .chain(&self.z)
            .chain(&self.d)
            .chain(&self.f)
            .copied()
    }
}

/// Per-slot controller variables.
#[derive(Debug, Clone)]
pub struct SlotDecision {
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    /// Local action per BS.
    pub actions: Vec<usize>,
    /// `v_b(h(t), α(t))`.
    pub v: Vec<f64>,
    pub ccp: Option<CcpResult>,
}

/// `coef · ln(1 + constant + Σ w_j x_j)`.
#[derive(Debug, Clone)]
struct LogTerm {
    coef: f64,
    constant: f64,
    weights: Vec<(usize, f64)>,
}

impl LogTerm {
    fn arg(&self, x: &[f64]) -> f64 {
        1.0 + self.constant + self.weights.iter().map(|&(j, w)| w * x[j]).sum::<f64>()
    }
}

fn terms_value(terms: &[LogTerm], x: &[f64]) -> f64 {
    terms.iter().map(|t| t.coef * t.arg(x).ln()).sum()
}

fn terms_gradient(terms: &[LogTerm], x: &[f64], grad: &mut [f64]) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    for t in terms {
        let k = t.coef / t.arg(x);
        for &(j, w) in &t.weights {
            grad[j] += k * w;
        }
    }
}

/// P3 at one global state with one queue snapshot, relaxed to the per-BS
/// budget polytope.
#[derive(Debug, Clone)]
pub struct P3Instance {
    /// Variable offset of each BS's links.
    offsets: Vec<usize>,
    /// Normalization power `P_b` (top grid level) per BS.
    p_ref: Vec<f64>,
    /// Normalized budget per BS.
    budgets: Vec<f64>,
    /// Concave part `f` (nonnegative coefficients).
    concave: Vec<LogTerm>,
    /// Convex part `g` (nonpositive coefficients).
    convex: Vec<LogTerm>,
    dim: usize,
}

impl P3Instance {
    /// Builds P3 for global state `state` using the queue values in `queues`
    /// (instantaneous or time-averaged).
    pub fn new(game: &Game, state: usize, queues: &VirtualQueueSet) -> Self {
        let n = game.bs_count();
        let s_count = game.subcarriers();
        let noise = game.noise();
        let mut own = vec![0; n];
        let sigma = game.split_state(state, &mut own);
        let mut offsets = Vec::with_capacity(n);
        let mut dim = 0;
        for b in 0..n {
            offsets.push(dim);
            dim += game.ues(b) * s_count;
        }
        let p_ref: Vec<f64> = (0..n).map(|b| *game.power_levels(b).last().unwrap()).collect();
        let budgets = (0..n).map(|b| game.budget(b) / p_ref[b]).collect();
        let mut concave = Vec::new();
        let mut convex = Vec::new();
        for b in 0..n {
            let local = game.local_state(sigma, own[b], b);
            let y = queues.y_at(game, b, local);
            let y_sum: f64 = y.iter().sum();
            let f = queues.f[b];
            let f_neg = (-f).max(0.0);
            let drive = queues.d[b] + f.max(0.0) + queues.z[b];
            let gains = game.own_gains(b, own[b]);
            let levels = game.power_levels(b);
            for m in 0..game.ues(b) {
                for s in 0..s_count {
                    let l = m * s_count + s;
                    let a = p_ref[b] * gains[l] / noise;
                    let mut cross = Vec::new();
                    for tx in (0..n).filter(|&tx| tx != b) {
                        let c = p_ref[tx] * game.max_cross_gain(tx, b, m, s) / noise;
                        for m2 in 0..game.ues(tx) {
                            cross.push((offsets[tx] + m2 * s_count + s, c));
                        }
                    }
                    let mut with_own = cross.clone();
                    with_own.push((offsets[b] + l, a));
                    // Y terms grouped by the deviation's power level on this link.
                    let mut by_level = vec![0.0; levels.len()];
                    for (chi, yv) in y.iter().enumerate() {
                        by_level[game.power_digits(b, chi)[l]] += yv;
                    }
                    for (level, &coef) in by_level.iter().enumerate() {
                        if coef != 0.0 {
                            concave.push(LogTerm {
                                coef,
                                constant: levels[level] / p_ref[b] * a,
                                weights: cross.clone(),
                            });
                        }
                    }
                    if f_neg != 0.0 {
                        concave.push(LogTerm {
                            coef: f_neg,
                            constant: 0.0,
                            weights: with_own.clone(),
                        });
                    }
                    if drive != 0.0 {
                        concave.push(LogTerm {
                            coef: drive,
                            constant: 0.0,
                            weights: cross.clone(),
                        });
                        convex.push(LogTerm {
                            coef: -drive,
                            constant: 0.0,
                            weights: with_own,
                        });
                    }
                    if y_sum + f_neg != 0.0 {
                        convex.push(LogTerm {
                            coef: -(y_sum + f_neg),
                            constant: 0.0,
                            weights: cross,
                        });
                    }
                }
            }
        }
        Self {
            offsets,
            p_ref,
            budgets,
            concave,
            convex,
            dim,
        }
    }

    /// Uniform split of each BS's budget over its links.
    pub fn uniform_start(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for b in 0..self.offsets.len() {
            let end = self.offsets.get(b + 1).copied().unwrap_or(self.dim);
            let links = end - self.offsets[b];
            for v in &mut x[self.offsets[b]..end] {
                *v = self.budgets[b] / links as f64;
            }
        }
        x
    }

    /// Normalized variables → powers.
    pub fn powers(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.offsets.len())
            .map(|b| {
                let end = self.offsets.get(b + 1).copied().unwrap_or(self.dim);
                x[self.offsets[b]..end].iter().map(|v| v * self.p_ref[b]).collect()
            })
            .collect()
    }

    /// Powers → normalized variables.
    pub fn normalize(&self, powers: &[Vec<f64>]) -> Vec<f64> {
        powers
            .iter()
            .zip(&self.p_ref)
            .flat_map(|(p, r)| p.iter().map(move |v| v / r))
            .collect()
    }

    pub fn gradient_concave(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        terms_gradient(&self.concave, x, &mut g);
        g
    }

    pub fn is_zero(&self) -> bool {
        self.concave.is_empty() && self.convex.is_empty()
    }
}

impl DcProgram for P3Instance {
    fn dim(&self) -> usize {
        self.dim
    }

    fn concave_value(&self, x: &[f64]) -> f64 {
        terms_value(&self.concave, x)
    }

    fn linearize(&self, reference: &[f64]) -> CcpLinearization {
        CcpLinearization {
            k0: self.concave_value(reference),
            gradient: self.gradient_concave(reference),
            reference: reference.to_vec(),
        }
    }

    fn convex_value(&self, x: &[f64]) -> f64 {
        terms_value(&self.convex, x)
    }

    fn convex_gradient(&self, x: &[f64], grad: &mut [f64]) {
        terms_gradient(&self.convex, x, grad);
    }

    fn convex_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for t in &self.convex {
            let u = t.arg(x);
            let k = -t.coef / (u * u);
            for &(i, wi) in &t.weights {
                for &(j, wj) in &t.weights {
                    h[(i, j)] += k * wi * wj;
                }
            }
        }
        h
    }

    fn inequalities(&self) -> LinearRows {
        let mut rows = LinearRows::new();
        for b in 0..self.offsets.len() {
            let end = self.offsets.get(b + 1).copied().unwrap_or(self.dim);
            rows.push((self.offsets[b]..end).map(|j| (j, 1.0)).collect(), self.budgets[b]);
        }
        rows
    }

    fn lower(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn upper(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.dim];
        for b in 0..self.offsets.len() {
            let end = self.offsets.get(b + 1).copied().unwrap_or(self.dim);
            for v in &mut u[self.offsets[b]..end] {
                *v = self.budgets[b];
            }
        }
        u
    }
}

/// Nearest member of `A_b` to `powers`; near-ties go to the lowest index.
pub fn project_to_actions(game: &Game, b: usize, powers: &[f64]) -> usize {
    game.nearest_action(b, powers, u64::MAX)
}

#[derive(Debug, Clone)]
pub struct P3Solution {
    /// Continuous CCP output, per BS and link.
    pub powers: Vec<Vec<f64>>,
    /// Projected local actions.
    pub actions: Vec<usize>,
    pub ccp: CcpResult,
}

/// Runs the CCP from the uniform split and projects onto `A`.
pub fn solve_p3(game: &Game, instance: &P3Instance, stop: CcpStop, inner: &SolverOptions) -> Result<P3Solution> {
    let start = instance.uniform_start();
    let ccp = if instance.is_zero() {
        CcpResult {
            x: start.clone(),
            objective: 0.0,
            history: vec![0.0],
            raw_history: vec![0.0],
            iterations: 0,
            converged: true,
        }
    } else {
        ccp_solve(instance, &start, stop, inner)?
    };
    let powers = instance.powers(&ccp.x);
    // A zero objective makes every point a minimizer; the tie rule picks index 0.
    let actions = (0..game.bs_count())
        .map(|b| if instance.is_zero() { 0 } else { project_to_actions(game, b, &powers[b]) })
        .collect();
    Ok(P3Solution { powers, actions, ccp })
}

/// Realization-mode payload: `T0` state realizations plus `λ̂_b` uploaded, one
/// rule index fed back.
pub fn payload_realization(frame_slots: usize, unit_rate: f64) -> FronthaulPayload {
    FronthaulPayload {
        upload_values: frame_slots + 1,
        feedback_values: 1,
        upload_rate: (frame_slots + 1) as f64 * unit_rate,
        feedback_rate: unit_rate,
    }
}

/// Controller state carried across frames.
#[derive(Debug, Clone)]
pub struct LyapunovController {
    game: Game,
    kappa: f64,
    v_max: Vec<f64>,
    queues: VirtualQueueSet,
    sums: VirtualQueueSet,
    slots: usize,
    stop: CcpStop,
    inner: SolverOptions,
    /// Rule of the current frame, filled on demand.
    rule: HashMap<usize, Vec<usize>>,
    averaged: Option<VirtualQueueSet>,
}

impl LyapunovController {
    pub fn new(game: Game, kappa: f64) -> Self {
        let v_max = (0..game.bs_count()).map(|b| game.v_max(b)).collect();
        let queues = VirtualQueueSet::zeros(&game);
        Self {
            sums: queues.clone(),
            queues,
            game,
            kappa,
            v_max,
            slots: 0,
            stop: CcpStop::default(),
            inner: SolverOptions::default(),
            rule: HashMap::new(),
            averaged: None,
        }
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn v_max(&self) -> &[f64] {
        &self.v_max
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn queues(&self) -> &VirtualQueueSet {
        &self.queues
    }

    /// Number of slots replayed so far.
    pub fn replayed_slots(&self) -> usize {
        self.slots
    }

    /// Steps 3–4 for one slot: solve P1, P2, P3 at the realized state with
    /// the current queues, then update the queues.
    pub fn replay_slot(&mut self, state: usize, lambda: &[f64]) -> Result<SlotDecision> {
        let game = &self.game;
        let n = game.bs_count();
        let mut own = vec![0; n];
        let sigma = game.split_state(state, &mut own);
        let gamma: Vec<f64> = (0..n)
            .map(|b| solve_p1(self.queues.f[b], self.kappa, lambda[b], self.v_max[b]))
            .collect();
        let locals: Vec<usize> = (0..n).map(|b| game.local_state(sigma, own[b], b)).collect();
        let theta: Vec<f64> = (0..n)
            .map(|b| {
                let y_sum: f64 = self.queues.y_at(game, b, locals[b]).iter().sum();
                solve_p2(self.queues.z[b], y_sum, self.v_max[b])
            })
            .collect();
        let instance = P3Instance::new(game, state, &self.queues);
        let p3 = solve_p3(game, &instance, self.stop, &self.inner)?;
        let actions = p3.actions.clone();
        let v: Vec<f64> = (0..n)
            .map(|b| game.aux_utility(b, sigma, own[b], &actions))
            .collect();

        self.sums.zip_apply(&self.queues, |s, q| s + q);
        self.slots += 1;
        let mut acts = actions.clone();
        for b in 0..n {
            let na = game.local_action_count(b);
            let base = locals[b] * na;
            for chi in 0..na {
                acts[b] = chi;
                let deviation = game.aux_utility(b, sigma, own[b], &acts);
                let yq = &mut self.queues.y[b][base + chi];
                *yq = (*yq + deviation - theta[b]).max(0.0);
            }
            acts[b] = actions[b];
            self.queues.z[b] = (self.queues.z[b] + theta[b] - v[b]).max(0.0);
            self.queues.d[b] = (self.queues.d[b] + lambda[b] - v[b]).max(0.0);
            self.queues.f[b] += gamma[b] - v[b];
        }
        Ok(SlotDecision {
            gamma,
            theta,
            actions,
            v,
            ccp: Some(p3.ccp),
        })
    }

    /// Replays a frame of uploaded realizations and prepares the next rule.
    pub fn run_frame(&mut self, states: &[usize], lambda: &[f64]) -> Result<()> {
        for (k, &w) in states.iter().enumerate() {
            self.replay_slot(w, lambda).map_err(|e| Error::Slot {
                slot: k,
                source: Box::new(e),
            })?;
        }
        self.averaged = Some(self.averaged_queues()?);
        self.rule.clear();
        Ok(())
    }

    /// Arithmetic means of `Ξ(τ)` over every replayed slot.
    pub fn averaged_queues(&self) -> Result<VirtualQueueSet> {
        if self.slots == 0 {
            return Err(Error::Domain("no replayed slots to average".into()));
        }
        let mut avg = self.sums.clone();
        avg.scale(1.0 / self.slots as f64);
        Ok(avg)
    }

    /// Whether a rule from averaged queues exists (at least one frame was
    /// replayed).
    pub fn has_rule(&self) -> bool {
        self.averaged.is_some()
    }

    /// Step 6 at one global state: P3 with the averaged queues. Each state is
    /// solved independently from the uniform split, so evaluating only the
    /// realized states gives the same actions as the full table.
    pub fn rule_action(&mut self, state: usize) -> Result<Vec<usize>> {
        if let Some(a) = self.rule.get(&state) {
            return Ok(a.clone());
        }
        let averaged = self
            .averaged
            .as_ref()
            .ok_or_else(|| Error::Domain("no averaged queues yet".into()))?;
        let instance = P3Instance::new(&self.game, state, averaged);
        let actions = solve_p3(&self.game, &instance, self.stop, &self.inner)?.actions;
        self.rule.insert(state, actions.clone());
        Ok(actions)
    }

    /// Full mapping rule over `W` (global action indices).
    pub fn mapping_rule(&mut self) -> Result<MappingRule> {
        let actions = (0..self.game.state_count())
            .map(|w| {
                let a = self.rule_action(w)?;
                Ok(self.game.action(&a))
            })
            .collect::<Result<_>>()?;
        Ok(MappingRule::new(actions))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::toy_game;
    use crate::game::GameSpec;
    use crate::model::{RadioConfig, Topology};

    fn deployment() -> Game {
        let topo = Topology::symmetric(2, (10.0, 40.0), (20.0, 30.0)).unwrap();
        Game::new(GameSpec::from_deployment(&topo, &RadioConfig::default(), &[0.25, 0.5], 2).unwrap()).unwrap()
    }

    fn random_queues(game: &Game, seed: u64) -> VirtualQueueSet {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut q = VirtualQueueSet::zeros(game);
        for v in q.y.iter_mut().flatten() {
            *v = if rng.gen_bool(0.3) { rng.gen_range(0.0..5.0) } else { 0.0 };
        }
        for b in 0..game.bs_count() {
            q.z[b] = rng.gen_range(0.0..5.0);
            q.d[b] = rng.gen_range(0.0..5.0);
            q.f[b] = rng.gen_range(-5.0..5.0);
        }
        q
    }

    #[test]
    fn p1_cases() {
        assert_eq!(solve_p1(1.0, 10.0, 1.0, 4.0), 4.0);
        assert_eq!(solve_p1(5.0, 10.0, 1.0, 4.0), 1.0);
        assert_eq!(solve_p1(20.0, 10.0, 1.0, 4.0), 0.0);
    }

    #[test]
    fn p2_cases() {
        assert_eq!(solve_p2(2.0, 3.0, 7.0), 7.0);
        assert_eq!(solve_p2(3.0, 3.0, 7.0), 0.0);
        assert_eq!(solve_p2(0.0, 0.0, 7.0), 0.0);
    }

    #[test]
    fn d_update_example() {
        let g = toy_game([1.0, 1.0]);
        let mut c = LyapunovController::new(g, 1.0);
        // Zero queues: P3 is zero, so all BSs stay silent and v = 0.
        let d = c.replay_slot(0, &[5.0, 0.0]).unwrap();
        assert_eq!(d.v, vec![0.0, 0.0]);
        assert_eq!(c.queues().d[0], 5.0);
    }

    /// P3 in normalized units equals `ln 2 · T0/(T0-ς) · Σ_b [Σ_χ Y ṽ(χ) -
    /// (D+Z+F) v_b]` at grid points.
    #[test]
    fn p3_objective_matches_utility_form() {
        let g = deployment();
        let mut own = vec![0; 2];
        for seed in 0..5 {
            let q = random_queues(&g, seed);
            let w = (seed as usize * 97) % g.state_count();
            let sigma = g.split_state(w, &mut own);
            let p3 = P3Instance::new(&g, w, &q);
            let air = 1.0 - g.sigma_levels()[sigma] / g.frame_slots();
            for a0 in 0..g.local_action_count(0) {
                for a1 in 0..g.local_action_count(1) {
                    let acts = [a0, a1];
                    let powers = vec![g.powers(0, a0).to_vec(), g.powers(1, a1).to_vec()];
                    let x = p3.normalize(&powers);
                    let mut expect = 0.0;
                    for b in 0..2 {
                        let local = g.local_state(sigma, own[b], b);
                        let mut dev = acts;
                        for (chi, y) in q.y_at(&g, b, local).iter().enumerate() {
                            dev[b] = chi;
                            expect += y * g.aux_utility(b, sigma, own[b], &dev);
                        }
                        expect -= (q.d[b] + q.z[b] + q.f[b]) * g.aux_utility(b, sigma, own[b], &acts);
                    }
                    let got = p3.objective(&x) * air / std::f64::consts::LN_2;
                    assert!((got - expect).abs() <= 1e-9 * (1.0 + expect.abs()), "{got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn concave_gradient_matches_finite_differences() {
        let g = deployment();
        for seed in 0..5 {
            let q = random_queues(&g, seed + 10);
            let p3 = P3Instance::new(&g, (seed as usize * 31) % g.state_count(), &q);
            let x: Vec<f64> = (0..p3.dim()).map(|j| 0.1 + 0.07 * j as f64).collect();
            let grad = p3.gradient_concave(&x);
            for j in 0..x.len() {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (p3.concave_value(&xp) - p3.concave_value(&xm)) / (2.0 * h);
                assert!((fd - grad[j]).abs() <= 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", grad[j]);
            }
            let lin = p3.linearize(&x);
            assert!((lin.eval(&x) - p3.concave_value(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ccp_is_monotone_on_random_instances() {
        let g = deployment();
        for seed in 0..10 {
            let q = random_queues(&g, seed + 100);
            let p3 = P3Instance::new(&g, (seed as usize * 53) % g.state_count(), &q);
            let sol = solve_p3(&g, &p3, CcpStop::default(), &SolverOptions::default()).unwrap();
            for w in sol.ccp.raw_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", sol.ccp.raw_history);
            }
            assert!(sol.ccp.iterations <= 50);
        }
    }

    #[test]
    fn zero_queues_give_lowest_index_rule() {
        let g = toy_game([1.0, 1.0]);
        let mut c = LyapunovController::new(g, 1.0);
        c.run_frame(&[0], &[0.0, 0.0]).unwrap();
        let rule = c.mapping_rule().unwrap();
        assert!(rule.actions().iter().all(|&a| a == 0));
    }

    #[test]
    fn projection_ties_go_low() {
        let g = deployment();
        let p = g.power_levels(0)[1];
        // Half power on both UEs of each sub-carrier: off, UE0 and UE1 tie.
        assert_eq!(project_to_actions(&g, 0, &[p / 2.0; 4]), 0);
        // Exact grid point.
        for a in 0..g.local_action_count(0) {
            assert_eq!(project_to_actions(&g, 0, g.powers(0, a)), a);
        }
    }

    #[test]
    fn replay_is_reproducible() {
        let g = deployment();
        let states = [3, 77, 200, 511, 3];
        let mut a = LyapunovController::new(g.clone(), 1e4);
        let mut b = LyapunovController::new(g, 1e4);
        a.run_frame(&states, &[1.6, 1.0]).unwrap();
        b.run_frame(&states, &[1.6, 1.0]).unwrap();
        assert_eq!(a.queues(), b.queues());
        assert!(a.queues().y.iter().flatten().all(|&y| y >= 0.0));
    }

    #[test]
    fn averages_match_batch_mean() {
        let g = toy_game([1.0, 1.0]);
        let mut c = LyapunovController::new(g.clone(), 10.0);
        let mut history = Vec::new();
        for t in 0..7 {
            history.push(c.queues().clone());
            c.replay_slot(t % g.state_count(), &[0.3, 0.2]).unwrap();
        }
        let avg = c.averaged_queues().unwrap();
        let batch_d: f64 = history.iter().map(|q| q.d[0]).sum::<f64>() / 7.0;
        assert!((avg.d[0] - batch_d).abs() < 1e-12);
        let batch_f: f64 = history.iter().map(|q| q.f[1]).sum::<f64>() / 7.0;
        assert!((avg.f[1] - batch_f).abs() < 1e-12);
    }

    #[test]
    fn payload_counts() {
        let r = crate::controller_stats::default_unit_rate();
        let p = payload_realization(10, r);
        assert_eq!((p.upload_values, p.feedback_values), (11, 1));
        assert_eq!(payload_realization(1, r).upload_values, 2);
    }
}
