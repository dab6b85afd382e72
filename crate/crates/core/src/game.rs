//! Finite stochastic game between base stations: state and action
//! enumerations, the expected-rate utility `u`, the pessimistic utility `v`
//! (cross gains at their maxima), stationary utilities and brute-force
//! equilibrium audits.
//!
//! Indexing conventions (all mixed-radix, most significant digit first):
//! - a BS's own-gain index runs over its links `(ue, subcarrier)` in UE-major
//!   order, each digit a gain level;
//! - local state `ω_b = ς_level · R_b + own_b` where `R_b` counts own-gain
//!   combinations;
//! - global state digits are `[ς_level, own_0, own_1, …]`;
//! - a BS action is a vector of power-level digits over its links in the same
//!   UE-major order; feasible vectors are numbered in lexicographic order;
//! - global action digits are `[a_0, a_1, …]`.

use crate::error::{Error, Result};
use crate::model::{Bounds, GainLevelSet, RadioConfig, Topology};
use std::collections::HashMap;

/// Everything needed to enumerate a game and evaluate its utilities.
#[derive(Debug, Clone)]
pub struct GameSpec {
    pub ues_per_bs: Vec<usize>,
    pub subcarriers: usize,
    pub frame_slots: f64,
    pub noise: f64,
    /// Round-trip levels `G` in slots.
    pub sigma_levels: Vec<f64>,
    /// `gains[tx][rx_bs][ue][s]`.
    pub gains: Vec<Vec<Vec<Vec<GainLevelSet>>>>,
    /// Per-BS power grid, ascending, starting at 0.
    pub power_levels: Vec<Vec<f64>>,
    pub budgets: Vec<f64>,
}

impl GameSpec {
    /// Game for a deployment: Rayleigh-quantized gains with `gain_levels`
    /// levels per link and the per-subcarrier grid `{0, P_b}`.
    pub fn from_deployment(
        topology: &Topology,
        radio: &RadioConfig,
        sigma_levels: &[f64],
        gain_levels: usize,
    ) -> Result<Self> {
        let b_count = topology.bs_count();
        let mut gains = Vec::with_capacity(b_count);
        for tx in 0..b_count {
            let mut per_rx = Vec::with_capacity(b_count);
            for rx in 0..b_count {
                let mut per_ue = Vec::new();
                for ue in 0..topology.ues_per_bs()[rx] {
                    let mean = radio.link_gain(topology.distance(tx, rx, ue))?;
                    let set = GainLevelSet::rayleigh(mean, gain_levels)?;
                    per_ue.push(vec![set; radio.subcarriers]);
                }
                per_rx.push(per_ue);
            }
            gains.push(per_rx);
        }
        Ok(Self {
            ues_per_bs: topology.ues_per_bs().to_vec(),
            subcarriers: radio.subcarriers,
            frame_slots: radio.frame_slots as f64,
            noise: radio.noise_w,
            sigma_levels: sigma_levels.to_vec(),
            gains,
            power_levels: vec![vec![0.0, radio.bs_power_w]; b_count],
            budgets: vec![radio.power_budget(); b_count],
        })
    }
}

#[derive(Debug, Clone)]
struct BsTables {
    ues: usize,
    /// Radix of every own link digit.
    own_radix: Vec<usize>,
    own_count: usize,
    /// `own_values[own][link]`.
    own_values: Vec<Vec<f64>>,
    /// Powers per link for every feasible action.
    actions: Vec<Vec<f64>>,
    action_digits: Vec<Vec<usize>>,
    /// Total power per subcarrier for every action.
    action_totals: Vec<Vec<f64>>,
    lookup: HashMap<Vec<usize>, usize>,
    /// `hmax[tx][ue][s]`: largest gain from BS `tx` to this BS's UE.
    hmax: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Game {
    spec: GameSpec,
    bs: Vec<BsTables>,
    state_count: usize,
    action_count: usize,
}

fn mixed_radix(digits: &[usize], radix: &[usize]) -> usize {
    digits.iter().zip(radix).fold(0, |acc, (&d, &r)| acc * r + d)
}

fn split_radix(mut index: usize, radix: &[usize], out: &mut [usize]) {
    for k in (0..radix.len()).rev() {
        out[k] = index % radix[k];
        index /= radix[k];
    }
}

impl Game {
    pub fn new(spec: GameSpec) -> Result<Self> {
        let b_count = spec.ues_per_bs.len();
        if b_count == 0 || spec.subcarriers == 0 || spec.ues_per_bs.contains(&0) {
            return Err(Error::Domain("game needs BSs, UEs and sub-carriers".into()));
        }
        if spec.sigma_levels.is_empty() {
            return Err(Error::Domain("round-trip level set is empty".into()));
        }
        if spec.power_levels.len() != b_count || spec.budgets.len() != b_count {
            return Err(Error::Domain("power grid or budget missing for some BS".into()));
        }
        if spec.gains.len() != b_count
            || spec.gains.iter().any(|per_rx| {
                per_rx.len() != b_count
                    || per_rx
                        .iter()
                        .zip(&spec.ues_per_bs)
                        .any(|(per_ue, &m)| per_ue.len() != m || per_ue.iter().any(|l| l.len() != spec.subcarriers))
            })
        {
            return Err(Error::Domain("gain table shape does not match the game".into()));
        }
        let s_count = spec.subcarriers;
        let mut bs = Vec::with_capacity(b_count);
        for b in 0..b_count {
            let ues = spec.ues_per_bs[b];
            let levels = &spec.power_levels[b];
            if levels.is_empty() || levels[0] != 0.0 || levels.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Domain(format!(
                    "power grid of BS {b} must start at 0 and increase"
                )));
            }
            let links = ues * s_count;
            let own_radix: Vec<usize> = (0..links)
                .map(|l| spec.gains[b][b][l / s_count][l % s_count].len())
                .collect();
            let own_count: usize = own_radix.iter().product();
            let mut digits = vec![0; links];
            let own_values = (0..own_count)
                .map(|own| {
                    split_radix(own, &own_radix, &mut digits);
                    (0..links)
                        .map(|l| spec.gains[b][b][l / s_count][l % s_count].value(digits[l]))
                        .collect()
                })
                .collect();

            let level_radix = vec![levels.len(); links];
            let combos: usize = level_radix.iter().product();
            let mut actions = Vec::new();
            let mut action_digits = Vec::new();
            let mut action_totals = Vec::new();
            let mut lookup = HashMap::new();
            let budget = spec.budgets[b];
            for c in 0..combos {
                split_radix(c, &level_radix, &mut digits);
                let mut totals = vec![0.0; s_count];
                let mut busy = vec![0usize; s_count];
                for l in 0..links {
                    if digits[l] > 0 {
                        totals[l % s_count] += levels[digits[l]];
                        busy[l % s_count] += 1;
                    }
                }
                let total: f64 = totals.iter().sum();
                if busy.iter().any(|&k| k > 1) || total > budget * (1.0 + 1e-12) {
                    continue;
                }
                lookup.insert(digits.clone(), actions.len());
                actions.push(digits.iter().map(|&d| levels[d]).collect());
                action_digits.push(digits.clone());
                action_totals.push(totals);
            }
            let hmax = (0..b_count)
                .map(|tx| {
                    (0..ues)
                        .map(|m| (0..s_count).map(|s| spec.gains[tx][b][m][s].max()).collect())
                        .collect()
                })
                .collect();
            bs.push(BsTables {
                ues,
                own_radix,
                own_count,
                own_values,
                actions,
                action_digits,
                action_totals,
                lookup,
                hmax,
            });
        }
        let state_count = spec.sigma_levels.len() * bs.iter().map(|t| t.own_count).product::<usize>();
        let action_count = bs.iter().map(|t| t.actions.len()).product();
        Ok(Self {
            spec,
            bs,
            state_count,
            action_count,
        })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn bs_count(&self) -> usize {
        self.bs.len()
    }

    pub fn ues(&self, b: usize) -> usize {
        self.bs[b].ues
    }

    pub fn subcarriers(&self) -> usize {
        self.spec.subcarriers
    }

    pub fn sigma_levels(&self) -> &[f64] {
        &self.spec.sigma_levels
    }

    pub fn noise(&self) -> f64 {
        self.spec.noise
    }

    pub fn frame_slots(&self) -> f64 {
        self.spec.frame_slots
    }

    /// `|W|`.
    pub fn state_count(&self) -> usize {
        self.state_count
    }

    /// Own-gain combinations of BS `b`.
    pub fn own_count(&self, b: usize) -> usize {
        self.bs[b].own_count
    }

    /// `|W_b|`.
    pub fn local_state_count(&self, b: usize) -> usize {
        self.spec.sigma_levels.len() * self.bs[b].own_count
    }

    /// `|A|`.
    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// `|A_b|`.
    pub fn local_action_count(&self, b: usize) -> usize {
        self.bs[b].actions.len()
    }

    pub fn state(&self, sigma: usize, own: &[usize]) -> usize {
        own.iter()
            .zip(&self.bs)
            .fold(sigma, |acc, (&o, t)| acc * t.own_count + o)
    }

    /// Splits a global state into `(ς level, own-gain index per BS)`.
    pub fn split_state(&self, state: usize, own: &mut [usize]) -> usize {
        let mut rest = state;
        for b in (0..self.bs.len()).rev() {
            own[b] = rest % self.bs[b].own_count;
            rest /= self.bs[b].own_count;
        }
        rest
    }

    pub fn local_state(&self, sigma: usize, own: usize, b: usize) -> usize {
        sigma * self.bs[b].own_count + own
    }

    /// `(ς level, own index)` of a local state.
    pub fn split_local(&self, b: usize, local: usize) -> (usize, usize) {
        (local / self.bs[b].own_count, local % self.bs[b].own_count)
    }

    pub fn local_of(&self, state: usize, b: usize) -> usize {
        let mut own = vec![0; self.bs.len()];
        let sigma = self.split_state(state, &mut own);
        self.local_state(sigma, own[b], b)
    }

    /// Gain level digits of an own-gain index, UE-major over links.
    pub fn own_digits(&self, b: usize, own: usize) -> Vec<usize> {
        let mut d = vec![0; self.bs[b].own_radix.len()];
        split_radix(own, &self.bs[b].own_radix, &mut d);
        d
    }

    pub fn own_index(&self, b: usize, digits: &[usize]) -> usize {
        mixed_radix(digits, &self.bs[b].own_radix)
    }

    /// Gain values on BS `b`'s links for own-gain index `own`.
    pub fn own_gains(&self, b: usize, own: usize) -> &[f64] {
        &self.bs[b].own_values[own]
    }

    pub fn gain_levels(&self, tx: usize, rx: usize, ue: usize, s: usize) -> &GainLevelSet {
        &self.spec.gains[tx][rx][ue][s]
    }

    pub fn max_cross_gain(&self, tx: usize, rx: usize, ue: usize, s: usize) -> f64 {
        self.bs[rx].hmax[tx][ue][s]
    }

    pub fn action(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.bs)
            .fold(0, |acc, (&a, t)| acc * t.actions.len() + a)
    }

    pub fn split_action(&self, action: usize, out: &mut [usize]) {
        let mut rest = action;
        for b in (0..self.bs.len()).rev() {
            out[b] = rest % self.bs[b].actions.len();
            rest /= self.bs[b].actions.len();
        }
    }

    /// Powers on BS `b`'s links (UE-major) for local action `a`.
    pub fn powers(&self, b: usize, a: usize) -> &[f64] {
        &self.bs[b].actions[a]
    }

    pub fn power_digits(&self, b: usize, a: usize) -> &[usize] {
        &self.bs[b].action_digits[a]
    }

    pub fn subcarrier_power(&self, b: usize, a: usize, s: usize) -> f64 {
        self.bs[b].action_totals[a][s]
    }

    pub fn action_of_digits(&self, b: usize, digits: &[usize]) -> Option<usize> {
        self.bs[b].lookup.get(digits).copied()
    }

    /// Nearest member of `A_b` to `powers` (Euclidean); only actions that are
    /// silent outside the sub-carrier bitmask `allowed` compete. Near-ties go
    /// to the lowest index.
    pub fn nearest_action(&self, b: usize, powers: &[f64], allowed: u64) -> usize {
        let s_count = self.spec.subcarriers;
        let scale = self.spec.power_levels[b].last().unwrap().powi(2);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (a, cand) in self.bs[b].actions.iter().enumerate() {
            if (0..s_count).any(|s| allowed & (1 << s) == 0 && self.bs[b].action_totals[a][s] > 0.0) {
                continue;
            }
            let d: f64 = cand.iter().zip(powers).map(|(p, q)| (p - q) * (p - q)).sum();
            if d < best_d - 1e-12 * scale {
                best = a;
                best_d = d;
            }
        }
        best
    }

    pub fn power_levels(&self, b: usize) -> &[f64] {
        &self.spec.power_levels[b]
    }

    pub fn budget(&self, b: usize) -> f64 {
        self.spec.budgets[b]
    }

    /// Whether every combination of per-subcarrier choices fits the budget,
    /// so the action set is a product over sub-carriers.
    pub fn subcarriers_separable(&self) -> bool {
        (0..self.bs.len()).all(|b| {
            let top = *self.spec.power_levels[b].last().unwrap();
            top * self.spec.subcarriers as f64 <= self.spec.budgets[b] * (1.0 + 1e-12)
        })
    }

    fn airtime(&self, sigma: usize) -> f64 {
        crate::model::airtime_fraction(self.spec.sigma_levels[sigma], self.spec.frame_slots)
    }

    /// `v_b` for ς level `sigma`, own gains `own` and per-BS actions.
    pub fn aux_utility(&self, b: usize, sigma: usize, own: usize, actions: &[usize]) -> f64 {
        let t = &self.bs[b];
        let s_count = self.spec.subcarriers;
        let powers = &t.actions[actions[b]];
        let gains = &t.own_values[own];
        let mut total = 0.0;
        for s in 0..s_count {
            for m in 0..t.ues {
                let l = m * s_count + s;
                if powers[l] == 0.0 {
                    continue;
                }
                let mut interference = 0.0;
                for (tx, &a) in actions.iter().enumerate() {
                    if tx != b {
                        interference += self.bs[tx].action_totals[a][s] * t.hmax[tx][m][s];
                    }
                }
                total += (1.0 + powers[l] * gains[l] / (self.spec.noise + interference)).log2();
            }
        }
        self.airtime(sigma) * total
    }

    /// `u_b`: the expected rate sum over the cross-gain pmfs of `model`.
    pub fn expected_utility(
        &self,
        b: usize,
        sigma: usize,
        own: usize,
        actions: &[usize],
        model: &InterferenceModel,
    ) -> f64 {
        let t = &self.bs[b];
        let s_count = self.spec.subcarriers;
        let powers = &t.actions[actions[b]];
        let gains = &t.own_values[own];
        let mut total = 0.0;
        for s in 0..s_count {
            // Interferers active on this sub-carrier.
            let active: Vec<(usize, f64)> = actions
                .iter()
                .enumerate()
                .filter(|&(tx, &a)| tx != b && self.bs[tx].action_totals[a][s] > 0.0)
                .map(|(tx, &a)| (tx, self.bs[tx].action_totals[a][s]))
                .collect();
            for m in 0..t.ues {
                let l = m * s_count + s;
                if powers[l] == 0.0 {
                    continue;
                }
                let signal = powers[l] * gains[l];
                let radix: Vec<usize> = active
                    .iter()
                    .map(|&(tx, _)| self.spec.gains[tx][b][m][s].len())
                    .collect();
                let outcomes: usize = radix.iter().product();
                let mut digits = vec![0; active.len()];
                for o in 0..outcomes {
                    split_radix(o, &radix, &mut digits);
                    let mut prob = 1.0;
                    let mut interference = 0.0;
                    for (k, &(tx, p)) in active.iter().enumerate() {
                        prob *= model.pmf(tx, b, m, s)[digits[k]];
                        interference += p * self.spec.gains[tx][b][m][s].value(digits[k]);
                    }
                    if prob > 0.0 {
                        total += prob * (1.0 + signal / (self.spec.noise + interference)).log2();
                    }
                }
            }
        }
        self.airtime(sigma) * total
    }

    /// Per-BS auxiliary utilities at a global state and action.
    pub fn utility_v(&self, state: usize, action: usize) -> Vec<f64> {
        self.per_bs(state, action, |b, sigma, own, acts| self.aux_utility(b, sigma, own, acts))
    }

    /// Per-BS expected utilities at a global state and action.
    pub fn utility_u(&self, state: usize, action: usize, model: &InterferenceModel) -> Vec<f64> {
        self.per_bs(state, action, |b, sigma, own, acts| {
            self.expected_utility(b, sigma, own, acts, model)
        })
    }

    fn per_bs(
        &self,
        state: usize,
        action: usize,
        f: impl Fn(usize, usize, usize, &[usize]) -> f64,
    ) -> Vec<f64> {
        let n = self.bs.len();
        let mut own = vec![0; n];
        let mut acts = vec![0; n];
        let sigma = self.split_state(state, &mut own);
        self.split_action(action, &mut acts);
        (0..n).map(|b| f(b, sigma, own[b], &acts)).collect()
    }

    /// Largest `v_b` over states and actions (others silent, best own
    /// action, best own gains and the shortest round trip). Silence of the
    /// others also makes this the largest `u_b`.
    pub fn v_max(&self, b: usize) -> f64 {
        let mut acts = vec![0; self.bs.len()];
        let mut best: f64 = 0.0;
        for sigma in 0..self.spec.sigma_levels.len() {
            for own in 0..self.bs[b].own_count {
                for a in 0..self.bs[b].actions.len() {
                    acts[b] = a;
                    best = best.max(self.aux_utility(b, sigma, own, &acts));
                }
            }
        }
        best
    }

    pub fn bounds(&self) -> Bounds {
        let mut rate_max: f64 = 0.0;
        for (b, t) in self.bs.iter().enumerate() {
            let p = *self.spec.power_levels[b].last().unwrap();
            for m in 0..t.ues {
                for s in 0..self.spec.subcarriers {
                    let h = self.spec.gains[b][b][m][s].max();
                    rate_max = rate_max.max(Bounds::rate_bound(p, h, self.spec.noise));
                }
            }
        }
        let v_max: Vec<f64> = (0..self.bs.len()).map(|b| self.v_max(b)).collect();
        Bounds {
            rate_max,
            u_max: v_max.clone(),
            v_max,
        }
    }

    /// Sub-game over the given round-trip levels and a subset of
    /// sub-carriers.
    pub fn restrict(&self, sigma_levels: &[f64], subcarriers: &[usize]) -> Result<Game> {
        let spec = &self.spec;
        let gains = spec
            .gains
            .iter()
            .map(|per_rx| {
                per_rx
                    .iter()
                    .map(|per_ue| {
                        per_ue
                            .iter()
                            .map(|per_s| subcarriers.iter().map(|&s| per_s[s].clone()).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Game::new(GameSpec {
            ues_per_bs: spec.ues_per_bs.clone(),
            subcarriers: subcarriers.len(),
            frame_slots: spec.frame_slots,
            noise: spec.noise,
            sigma_levels: sigma_levels.to_vec(),
            gains,
            power_levels: spec.power_levels.clone(),
            budgets: spec.budgets.clone(),
        })
    }
}

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("{what} is not a pmf: {p:?}")));
    }
    Ok(())
}

/// Product-form state distribution: round-trip pmf times independent
/// own-link gain pmfs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    sigma: Vec<f64>,
    /// `own_link[b][link]`: pmf over the link's gain levels.
    own_link: Vec<Vec<Vec<f64>>>,
    /// `own[b][own_index]`: product over BS `b`'s links.
    own: Vec<Vec<f64>>,
}

impl StateDistribution {
    pub fn new(game: &Game, sigma: Vec<f64>, own_link: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if sigma.len() != game.sigma_levels().len() || own_link.len() != game.bs_count() {
            return Err(Error::Domain("state distribution shape mismatch".into()));
        }
        check_pmf(&sigma, "round-trip distribution")?;
        let mut own = Vec::with_capacity(game.bs_count());
        for (b, links) in own_link.iter().enumerate() {
            let radix = &game.bs[b].own_radix;
            if links.len() != radix.len() || links.iter().zip(radix).any(|(p, &r)| p.len() != r) {
                return Err(Error::Domain(format!("gain pmf shape mismatch at BS {b}")));
            }
            for p in links {
                check_pmf(p, "gain distribution")?;
            }
            let mut digits = vec![0; radix.len()];
            own.push(
                (0..game.own_count(b))
                    .map(|o| {
                        split_radix(o, radix, &mut digits);
                        links.iter().zip(&digits).map(|(p, &d)| p[d]).product()
                    })
                    .collect(),
            );
        }
        Ok(Self {
            sigma,
            own_link,
            own,
        })
    }

    /// Equiprobable levels on every link and round-trip level.
    pub fn uniform(game: &Game) -> Self {
        let g = game.sigma_levels().len();
        let own_link = (0..game.bs_count())
            .map(|b| {
                game.bs[b]
                    .own_radix
                    .iter()
                    .map(|&r| vec![1.0 / r as f64; r])
                    .collect()
            })
            .collect();
        Self::new(game, vec![1.0 / g as f64; g], own_link).expect("uniform pmfs are valid")
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn own_link(&self, b: usize) -> &[Vec<f64>] {
        &self.own_link[b]
    }

    pub fn own_prob(&self, b: usize, own: usize) -> f64 {
        self.own[b][own]
    }

    pub fn prob(&self, game: &Game, state: usize) -> f64 {
        let mut own = vec![0; game.bs_count()];
        let sigma = game.split_state(state, &mut own);
        own.iter()
            .enumerate()
            .fold(self.sigma[sigma], |p, (b, &o)| p * self.own[b][o])
    }

    pub fn local_prob(&self, game: &Game, b: usize, local: usize) -> f64 {
        let (sigma, own) = game.split_local(b, local);
        self.sigma[sigma] * self.own[b][own]
    }
}

/// Cross-gain pmfs used by the expected utility.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceModel {
    /// `pmf[tx][rx][ue][s]`.
    pmf: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
}

impl InterferenceModel {
    pub fn new(game: &Game, pmf: Vec<Vec<Vec<Vec<Vec<f64>>>>>) -> Result<Self> {
        let n = game.bs_count();
        if pmf.len() != n {
            return Err(Error::Domain("interference model shape mismatch".into()));
        }
        for tx in 0..n {
            for rx in 0..n {
                for m in 0..game.ues(rx) {
                    for s in 0..game.subcarriers() {
                        let p = pmf
                            .get(tx)
                            .and_then(|r| r.get(rx))
                            .and_then(|r| r.get(m))
                            .and_then(|r| r.get(s))
                            .ok_or_else(|| Error::Domain("interference model shape mismatch".into()))?;
                        if p.len() != game.gain_levels(tx, rx, m, s).len() {
                            return Err(Error::Domain("interference pmf length mismatch".into()));
                        }
                        check_pmf(p, "cross-gain distribution")?;
                    }
                }
            }
        }
        Ok(Self { pmf })
    }

    /// Equiprobable levels, matching equiprobable quantization cells.
    pub fn uniform(game: &Game) -> Self {
        let n = game.bs_count();
        let pmf = (0..n)
            .map(|tx| {
                (0..n)
                    .map(|rx| {
                        (0..game.ues(rx))
                            .map(|m| {
                                (0..game.subcarriers())
                                    .map(|s| {
                                        let k = game.gain_levels(tx, rx, m, s).len();
                                        vec![1.0 / k as f64; k]
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { pmf }
    }

    pub fn pmf(&self, tx: usize, rx: usize, ue: usize, s: usize) -> &[f64] {
        &self.pmf[tx][rx][ue][s]
    }
}

/// Conditional action distribution `Pr(α|ω)`, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    states: usize,
    actions: usize,
    table: Vec<f64>,
}

impl Strategy {
    pub fn new(states: usize, actions: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != states * actions || actions == 0 {
            return Err(Error::Domain("strategy table shape mismatch".into()));
        }
        let s = Self {
            states,
            actions,
            table,
        };
        for w in 0..states {
            check_pmf(s.row(w), "strategy row")?;
        }
        Ok(s)
    }

    pub fn uniform(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            table: vec![1.0 / actions as f64; states * actions],
        }
    }

    /// Plays `choice[ω]` with certainty.
    pub fn deterministic(actions: usize, choice: &[usize]) -> Self {
        let mut table = vec![0.0; choice.len() * actions];
        for (w, &a) in choice.iter().enumerate() {
            table[w * actions + a] = 1.0;
        }
        Self {
            states: choice.len(),
            actions,
            table,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.table[state * self.actions..(state + 1) * self.actions]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.table[state * self.actions + action]
    }

    /// `weight·self + (1-weight)·other`.
    pub fn mix(&self, other: &Strategy, weight: f64) -> Strategy {
        Strategy {
            states: self.states,
            actions: self.actions,
            table: self
                .table
                .iter()
                .zip(&other.table)
                .map(|(a, b)| weight * a + (1.0 - weight) * b)
                .collect(),
        }
    }
}

/// Which utility an audit evaluates.
#[derive(Debug, Clone, Copy)]
pub enum Utility<'a> {
    Auxiliary,
    Expected(&'a InterferenceModel),
}

impl Utility<'_> {
    pub fn eval(&self, game: &Game, b: usize, sigma: usize, own: usize, actions: &[usize]) -> f64 {
        match self {
            Utility::Auxiliary => game.aux_utility(b, sigma, own, actions),
            Utility::Expected(model) => game.expected_utility(b, sigma, own, actions, model),
        }
    }
}

/// `ū_b = Σ_ω Σ_α Pr(ω) Pr(α|ω) utility_b(ω, α)` for every BS.
pub fn stationary_expected_utility(
    game: &Game,
    strategy: &Strategy,
    dist: &StateDistribution,
    utility: Utility,
) -> Vec<f64> {
    let n = game.bs_count();
    let mut own = vec![0; n];
    let mut acts = vec![0; n];
    let mut out = vec![0.0; n];
    for w in 0..game.state_count() {
        let pw = dist.prob(game, w);
        if pw == 0.0 {
            continue;
        }
        let sigma = game.split_state(w, &mut own);
        for (a, &pa) in strategy.row(w).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            game.split_action(a, &mut acts);
            for b in 0..n {
                out[b] += pw * pa * utility.eval(game, b, sigma, own[b], &acts);
            }
        }
    }
    out
}

/// Opponent-action distribution seen by BS `b` in local state `local`:
/// `q(α_{-b}) = Σ_{ω|ω_b} Pr(ω)/Pr(ω_b) Σ_{α_b} Pr(α|ω)`, keyed by global
/// action with BS `b`'s digit zeroed.
fn opponent_mixture(
    game: &Game,
    b: usize,
    local: usize,
    strategy: &Strategy,
    dist: &StateDistribution,
) -> Result<(Vec<f64>, f64)> {
    let n = game.bs_count();
    let p_local = dist.local_prob(game, b, local);
    if !(p_local > 0.0) {
        return Err(Error::UndefinedState(local));
    }
    let (sigma, own_b) = game.split_local(b, local);
    let others: Vec<usize> = (0..n).filter(|&k| k != b).collect();
    let radix: Vec<usize> = others.iter().map(|&k| game.own_count(k)).collect();
    let combos: usize = radix.iter().product();
    let mut digits = vec![0; others.len()];
    let mut own = vec![0; n];
    let mut acts = vec![0; n];
    let mut q = vec![0.0; game.action_count()];
    own[b] = own_b;
    for c in 0..combos {
        split_radix(c, &radix, &mut digits);
        let mut weight = 1.0;
        for (k, &bs) in others.iter().enumerate() {
            own[bs] = digits[k];
            weight *= dist.own_prob(bs, digits[k]);
        }
        if weight == 0.0 {
            continue;
        }
        let w = game.state(sigma, &own);
        for (a, &pa) in strategy.row(w).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            game.split_action(a, &mut acts);
            acts[b] = 0;
            q[game.action(&acts)] += weight * pa;
        }
    }
    Ok((q, p_local))
}

/// Per-deviation conditional utilities `Σ_{ω|ω_b} Pr(ω)/Pr(ω_b) Σ_α Pr(α|ω)
/// utility(ω, χ, α_{-b})` for every `χ ∈ A_b`.
pub fn deviation_utilities(
    game: &Game,
    b: usize,
    local: usize,
    strategy: &Strategy,
    dist: &StateDistribution,
    utility: Utility,
) -> Result<Vec<f64>> {
    let (q, _) = opponent_mixture(game, b, local, strategy, dist)?;
    let (sigma, own_b) = game.split_local(b, local);
    let n = game.bs_count();
    let mut acts = vec![0; n];
    let mut out = vec![0.0; game.local_action_count(b)];
    for (a, &qa) in q.iter().enumerate() {
        if qa == 0.0 {
            continue;
        }
        game.split_action(a, &mut acts);
        for (chi, o) in out.iter_mut().enumerate() {
            acts[b] = chi;
            *o += qa * utility.eval(game, b, sigma, own_b, &acts);
        }
    }
    Ok(out)
}

/// Best deviation value `θ_b(ω_b)` (auxiliary utility) or `μ_b(ω_b)`
/// (expected utility).
pub fn deviation_value(
    game: &Game,
    b: usize,
    local: usize,
    strategy: &Strategy,
    dist: &StateDistribution,
    utility: Utility,
) -> Result<f64> {
    Ok(deviation_utilities(game, b, local, strategy, dist, utility)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Conditional utility actually obtained in local state `local`.
pub fn conditional_utility(
    game: &Game,
    b: usize,
    local: usize,
    strategy: &Strategy,
    dist: &StateDistribution,
    utility: Utility,
) -> Result<f64> {
    let p_local = dist.local_prob(game, b, local);
    if !(p_local > 0.0) {
        return Err(Error::UndefinedState(local));
    }
    let (sigma, own_b) = game.split_local(b, local);
    let n = game.bs_count();
    let mut own = vec![0; n];
    let mut acts = vec![0; n];
    let mut total = 0.0;
    for w in 0..game.state_count() {
        let s = game.split_state(w, &mut own);
        if s != sigma || own[b] != own_b {
            continue;
        }
        let pw = dist.prob(game, w) / p_local;
        if pw == 0.0 {
            continue;
        }
        for (a, &pa) in strategy.row(w).iter().enumerate() {
            if pa > 0.0 {
                game.split_action(a, &mut acts);
                total += pw * pa * utility.eval(game, b, sigma, own_b, &acts);
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct BsCceCheck {
    /// `Σ_{ω_b} Pr(ω_b) θ_b(ω_b) - ū_b`.
    pub gap: f64,
    /// `max(0, gap - ε)`.
    pub violation: f64,
    pub pass: bool,
    /// Deviation values per local state (zero where `Pr(ω_b) = 0`).
    pub theta: Vec<f64>,
    pub achieved: f64,
}

#[derive(Debug, Clone)]
pub struct CceReport {
    pub per_bs: Vec<BsCceCheck>,
    pub worst_violation: f64,
    pub pass: bool,
}

/// Checks the ε-CCE conditions: with `θ_b(ω_b)` the best deviation value,
/// every deviation row holds by construction and the remaining condition is
/// `ū_b ≥ Σ_{ω_b} Pr(ω_b) θ_b(ω_b) - ε`.
pub fn check_epsilon_cce(
    game: &Game,
    strategy: &Strategy,
    dist: &StateDistribution,
    epsilon: f64,
    utility: Utility,
) -> Result<CceReport> {
    let achieved = stationary_expected_utility(game, strategy, dist, utility);
    let mut per_bs = Vec::with_capacity(game.bs_count());
    for b in 0..game.bs_count() {
        let mut theta = vec![0.0; game.local_state_count(b)];
        let mut bound = 0.0;
        for (local, t) in theta.iter_mut().enumerate() {
            let p = dist.local_prob(game, b, local);
            if p > 0.0 {
                *t = deviation_value(game, b, local, strategy, dist, utility)?;
                bound += p * *t;
            }
        }
        let gap = bound - achieved[b];
        let violation = (gap - epsilon).max(0.0);
        per_bs.push(BsCceCheck {
            gap,
            violation,
            pass: violation == 0.0,
            theta,
            achieved: achieved[b],
        });
    }
    let worst_violation = per_bs.iter().fold(0.0_f64, |m, c| m.max(c.violation));
    Ok(CceReport {
        pass: per_bs.iter().all(|c| c.pass),
        per_bs,
        worst_violation,
    })
}

#[derive(Debug, Clone)]
pub struct EquilibriumAudit {
    /// Deviation values under the auxiliary utility, per BS and local state.
    pub theta: Vec<Vec<f64>>,
    /// Deviation values under the expected utility.
    pub mu: Vec<Vec<f64>>,
    /// `Σ_{ω_b} Pr(ω_b) (μ_b - θ_b)` per BS.
    pub per_bs: Vec<f64>,
    pub epsilon: f64,
}

/// Gap between expected-utility and auxiliary-utility deviation values,
/// `ε = max_b Σ_{ω_b} Pr(ω_b)(μ_b(ω_b) - θ_b(ω_b))`.
pub fn epsilon_gap(
    game: &Game,
    strategy: &Strategy,
    dist: &StateDistribution,
    model: &InterferenceModel,
) -> Result<EquilibriumAudit> {
    let n = game.bs_count();
    let mut theta = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    let mut per_bs = Vec::with_capacity(n);
    for b in 0..n {
        let mut t = vec![0.0; game.local_state_count(b)];
        let mut m = vec![0.0; game.local_state_count(b)];
        let mut acc = 0.0;
        for local in 0..t.len() {
            let p = dist.local_prob(game, b, local);
            if p > 0.0 {
                t[local] = deviation_value(game, b, local, strategy, dist, Utility::Auxiliary)?;
                m[local] = deviation_value(game, b, local, strategy, dist, Utility::Expected(model))?;
                acc += p * (m[local] - t[local]);
            }
        }
        theta.push(t);
        mu.push(m);
        per_bs.push(acc.max(0.0));
    }
    let epsilon = per_bs.iter().cloned().fold(0.0, f64::max);
    Ok(EquilibriumAudit {
        theta,
        mu,
        per_bs,
        epsilon,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two BSs, one UE each, one sub-carrier, two gain levels per link and a
    /// single round-trip level; powers `{0, 1}` with unit noise.
    pub(crate) fn toy_game(cross: [f64; 2]) -> Game {
        let own = GainLevelSet::new(vec![1.0, 4.0], vec![2.0]).unwrap();
        let cross_set = |c: f64| GainLevelSet::new(vec![0.5 * c, c], vec![0.75 * c]).unwrap();
        let gains = vec![
            vec![vec![vec![own.clone()]], vec![vec![cross_set(cross[0])]]],
            vec![vec![vec![cross_set(cross[1])]], vec![vec![own.clone()]]],
        ];
        Game::new(GameSpec {
            ues_per_bs: vec![1, 1],
            subcarriers: 1,
            frame_slots: 10.0,
            noise: 1.0,
            sigma_levels: vec![0.0],
            gains,
            power_levels: vec![vec![0.0, 1.0]; 2],
            budgets: vec![1.0; 2],
        })
        .unwrap()
    }

    #[test]
    fn enumeration_sizes_and_round_trips() {
        let g = toy_game([1.0, 1.0]);
        assert_eq!(g.state_count(), 4);
        assert_eq!(g.local_state_count(0), 2);
        assert_eq!(g.local_action_count(0), 2);
        assert_eq!(g.action_count(), 4);
        let mut own = vec![0; 2];
        for w in 0..4 {
            let s = g.split_state(w, &mut own);
            assert_eq!(g.state(s, &own), w);
        }
        let mut acts = vec![0; 2];
        for a in 0..4 {
            g.split_action(a, &mut acts);
            assert_eq!(g.action(&acts), a);
        }
    }

    #[test]
    fn action_set_respects_single_ue_and_budget() {
        let topo = Topology::symmetric(2, (10.0, 40.0), (20.0, 30.0)).unwrap();
        let radio = RadioConfig::default();
        let g = Game::new(GameSpec::from_deployment(&topo, &radio, &[0.25, 0.5], 2).unwrap()).unwrap();
        // Per sub-carrier: off, UE 0 or UE 1 -> 3² actions.
        assert_eq!(g.local_action_count(0), 9);
        assert_eq!(g.local_state_count(0), 32);
        assert_eq!(g.state_count(), 512);
        assert!(g.subcarriers_separable());
        for a in 0..9 {
            let p = g.powers(0, a);
            assert!(p.iter().sum::<f64>() <= g.budget(0) + 1e-15);
            for s in 0..2 {
                assert!(p[s] == 0.0 || p[2 + s] == 0.0);
            }
        }
        assert!(g.powers(0, 0).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn utilities_zero_when_silent() {
        let g = toy_game([1.0, 1.0]);
        let model = InterferenceModel::uniform(&g);
        for w in 0..4 {
            assert_eq!(g.utility_u(w, 0, &model), vec![0.0, 0.0]);
            assert_eq!(g.utility_v(w, 0), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn expected_utility_is_two_point_average() {
        let g = toy_game([2.0, 2.0]);
        let model = InterferenceModel::uniform(&g);
        // Both transmit, own gains at the high level 4: interference gain 1 or 2.
        let w = g.state(0, &[1, 1]);
        let u = g.utility_u(w, 3, &model);
        let expect = 0.5 * (1.0 + 4.0 / 2.0f64).log2() + 0.5 * (1.0 + 4.0 / 3.0f64).log2();
        assert!((u[0] - expect).abs() < 1e-15);
        let v = g.utility_v(w, 3);
        assert!((v[0] - (1.0 + 4.0 / 3.0f64).log2()).abs() < 1e-15);
    }

    #[test]
    fn stationary_utility_of_uniform_strategy_is_mean() {
        let g = toy_game([1.0, 1.0]);
        let dist = StateDistribution::uniform(&g);
        let w = g.state(0, &[0, 0]);
        let single = StateDistribution::new(&g, vec![1.0], vec![vec![vec![1.0, 0.0]]; 2]).unwrap();
        let mut table = vec![0.0; 16];
        table[w * 4] = 0.5;
        table[w * 4 + 2] = 0.5;
        for other in [1, 2, 3] {
            table[other * 4] = 1.0;
        }
        let s = Strategy::new(4, 4, table).unwrap();
        let u = stationary_expected_utility(&g, &s, &single, Utility::Auxiliary);
        let on = g.utility_v(w, 2)[0];
        assert!((u[0] - 0.5 * on).abs() < 1e-15);
        let _ = dist;
    }
}
