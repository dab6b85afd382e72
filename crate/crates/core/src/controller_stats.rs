//! Statistics-based controller: the CCE-constrained utility program over the
//! auxiliary utility, mapping-rule sampling, and fronthaul payload and
//! problem-size accounting.
//!
//! The program is solved over blocks. Airtime is affine in ς, so every
//! round-trip level shares one conditional strategy solved at the mean ς;
//! this loses nothing. When the power budget cannot bind, the action set is a
//! product over sub-carriers and the program is solved over strategies that
//! factor across sub-carriers (a block per sub-carrier, coupled only through
//! `v̂_b`). A factored CCE of the per-sub-carrier blocks is a CCE of the full
//! game because deviation values add across independent sub-carriers.

use crate::error::{Error, Result};
use crate::game::{Game, StateDistribution, Strategy};
use crate::solver::{
    solve_concave, ConcaveObjective, ConcaveProgram, Hessian, LinearRows, SolveReport, SolveStatus,
    SolverOptions,
};
use num_bigint::BigUint;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Empirical inputs uploaded by the BSs.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedStatistics {
    /// Round-trip pmf over the game's levels.
    pub sigma: Vec<f64>,
    /// `gains[b][m][s]`: pmf over the own-link gain levels.
    pub gains: Vec<Vec<Vec<Vec<f64>>>>,
    /// `λ̂_b` in bit/s/Hz per slot.
    pub arrivals: Vec<f64>,
}

impl EstimatedStatistics {
    /// Equiprobable levels everywhere.
    pub fn uniform(game: &Game, arrivals: Vec<f64>) -> Self {
        let g = game.sigma_levels().len();
        let gains = (0..game.bs_count())
            .map(|b| {
                (0..game.ues(b))
                    .map(|m| {
                        (0..game.subcarriers())
                            .map(|s| {
                                let k = game.gain_levels(b, b, m, s).len();
                                vec![1.0 / k as f64; k]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            sigma: vec![1.0 / g as f64; g],
            gains,
            arrivals,
        }
    }

    /// Product-form state distribution.
    pub fn distribution(&self, game: &Game) -> Result<StateDistribution> {
        if self.gains.len() != game.bs_count() || self.arrivals.len() != game.bs_count() {
            return Err(Error::Domain("statistics do not match the game".into()));
        }
        let s_count = game.subcarriers();
        let own_link = (0..game.bs_count())
            .map(|b| {
                (0..game.ues(b) * s_count)
                    .map(|l| {
                        self.gains[b]
                            .get(l / s_count)
                            .and_then(|per_s| per_s.get(l % s_count))
                            .cloned()
                            .unwrap_or_default()
                    })
                    .collect()
            })
            .collect();
        StateDistribution::new(game, self.sigma.clone(), own_link)
    }

    pub fn mean_sigma(&self, game: &Game) -> f64 {
        self.sigma
            .iter()
            .zip(game.sigma_levels())
            .map(|(p, g)| p * g)
            .sum()
    }
}

/// One block of the program: a sub-game with its state distribution.
struct Block {
    game: Game,
    dist: StateDistribution,
    /// Sub-carriers of the full game covered by this block.
    subcarriers: Vec<usize>,
    p_offset: usize,
    theta_offset: Vec<usize>,
}

/// Solution of the statistics program.
#[derive(Debug, Clone)]
pub struct StatsSolution {
    /// Per-block strategies (block sub-game indexing).
    pub blocks: Vec<Strategy>,
    /// Per-block sub-carrier sets.
    pub block_subcarriers: Vec<Vec<usize>>,
    /// `θ_b` per block and block-local state.
    pub theta: Vec<Vec<Vec<f64>>>,
    /// `v̂_b`.
    pub v: Vec<f64>,
    pub objective: f64,
    pub report: SolveReport,
}

/// `Σ_b λ̂_b ln(1 + v̂_b)` over the trailing `v̂` variables.
struct NetworkUtility {
    dim: usize,
    v_offset: usize,
    weights: Vec<f64>,
}

impl ConcaveObjective for NetworkUtility {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(b, w)| w * (1.0 + x[self.v_offset + b]).ln())
            .sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (b, w) in self.weights.iter().enumerate() {
            grad[self.v_offset + b] = w / (1.0 + x[self.v_offset + b]);
        }
    }

    fn hessian(&self, x: &[f64]) -> Hessian {
        let mut h = vec![0.0; self.dim];
        for (b, w) in self.weights.iter().enumerate() {
            let d = 1.0 + x[self.v_offset + b];
            h[self.v_offset + b] = -w / (d * d);
        }
        Hessian::Diagonal(h)
    }
}

/// Built program together with the block layout needed to read it back.
pub struct StatsProgram {
    program: ConcaveProgram<NetworkUtility>,
    blocks: Vec<Block>,
    v_offset: usize,
    bs_count: usize,
}

impl StatsProgram {
    pub fn dim(&self) -> usize {
        self.program.dim()
    }

    pub fn equality_count(&self) -> usize {
        self.program.equalities.len()
    }

    pub fn inequality_count(&self) -> usize {
        self.program.inequalities.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }
}

/// Relaxation of the θ upper bound and of the aggregate CCE rows, giving the
/// barrier a strict interior.
fn relaxation(v_max: f64) -> f64 {
    1e-9 * v_max.max(1.0)
}

/// Builds the program. `separate_subcarriers` chooses the factored class
/// (used only when the game's action set is a product over sub-carriers).
pub fn build_program(
    game: &Game,
    stats: &EstimatedStatistics,
    separate_subcarriers: bool,
) -> Result<StatsProgram> {
    if game.state_count() == 0 || game.action_count() == 0 {
        return Err(Error::Domain("empty state or action space".into()));
    }
    if stats.arrivals.len() != game.bs_count() || stats.arrivals.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::Domain("arrival estimates must be nonnegative, one per BS".into()));
    }
    stats.distribution(game)?;
    let n_bs = game.bs_count();
    let s_count = game.subcarriers();
    let groups: Vec<Vec<usize>> = if separate_subcarriers && game.subcarriers_separable() && s_count > 1 {
        (0..s_count).map(|s| vec![s]).collect()
    } else {
        vec![(0..s_count).collect()]
    };
    let sigma_levels = [stats.mean_sigma(game)];

    let mut blocks = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for subs in &groups {
        let sub = game.restrict(&sigma_levels, subs)?;
        let own_link = (0..n_bs)
            .map(|b| {
                (0..game.ues(b))
                    .flat_map(|m| subs.iter().map(move |&s| (m, s)))
                    .map(|(m, s)| stats.gains[b][m][s].clone())
                    .collect()
            })
            .collect();
        let dist = StateDistribution::new(&sub, vec![1.0], own_link)?;
        let p_offset = offset;
        offset += sub.state_count() * sub.action_count();
        blocks.push(Block {
            game: sub,
            dist,
            subcarriers: subs.clone(),
            p_offset,
            theta_offset: Vec::new(),
        });
    }
    for block in &mut blocks {
        for b in 0..n_bs {
            block.theta_offset.push(offset);
            offset += block.game.local_state_count(b);
        }
    }
    let v_offset = offset;
    let dim = v_offset + n_bs;

    let mut lower = vec![0.0; dim];
    let mut upper = vec![f64::INFINITY; dim];
    let mut equalities = LinearRows::new();
    let mut inequalities = LinearRows::new();
    let mut v_rows: Vec<Vec<(usize, f64)>> = (0..n_bs).map(|b| vec![(v_offset + b, 1.0)]).collect();
    lower[v_offset..v_offset + n_bs].copy_from_slice(&stats.arrivals);

    let mut own = vec![0; n_bs];
    let mut acts = vec![0; n_bs];
    for block in &blocks {
        let g = &block.game;
        let na = g.action_count();
        let v_max: Vec<f64> = (0..n_bs).map(|b| g.v_max(b)).collect();
        for b in 0..n_bs {
            for local in 0..g.local_state_count(b) {
                upper[block.theta_offset[b] + local] = v_max[b] + relaxation(v_max[b]);
            }
        }
        // Row-stochasticity and the v̂ definition.
        let mut utilities = vec![vec![0.0; n_bs]; g.state_count() * na];
        for w in 0..g.state_count() {
            let row = (0..na).map(|a| (block.p_offset + w * na + a, 1.0)).collect();
            equalities.push(row, 1.0);
            let pw = block.dist.prob(g, w);
            let sigma = g.split_state(w, &mut own);
            for a in 0..na {
                g.split_action(a, &mut acts);
                for b in 0..n_bs {
                    let u = g.aux_utility(b, sigma, own[b], &acts);
                    utilities[w * na + a][b] = u;
                    if pw > 0.0 && u != 0.0 {
                        v_rows[b].push((block.p_offset + w * na + a, -pw * u));
                    }
                }
            }
        }
        for b in 0..n_bs {
            // Aggregate row: Σ Pr(ω_b) θ_b(ω_b) - v̂_b(block) <= ε_r.
            let mut agg = Vec::new();
            for local in 0..g.local_state_count(b) {
                let p_local = block.dist.local_prob(g, b, local);
                if p_local == 0.0 {
                    continue;
                }
                agg.push((block.theta_offset[b] + local, p_local));
                let (sigma, own_b) = g.split_local(b, local);
                let states: Vec<usize> = (0..g.state_count())
                    .filter(|&w| {
                        let s = g.split_state(w, &mut own);
                        s == sigma && own[b] == own_b
                    })
                    .collect();
                for chi in 0..g.local_action_count(b) {
                    let mut row = Vec::new();
                    for &w in &states {
                        let pw = block.dist.prob(g, w) / p_local;
                        if pw == 0.0 {
                            continue;
                        }
                        for a in 0..na {
                            g.split_action(a, &mut acts);
                            acts[b] = chi;
                            let u = g.aux_utility(b, sigma, own_b, &acts);
                            if u != 0.0 {
                                row.push((block.p_offset + w * na + a, pw * u));
                            }
                        }
                    }
                    row.push((block.theta_offset[b] + local, -1.0));
                    inequalities.push(row, 0.0);
                }
            }
            for w in 0..g.state_count() {
                let pw = block.dist.prob(g, w);
                if pw == 0.0 {
                    continue;
                }
                for a in 0..na {
                    let u = utilities[w * na + a][b];
                    if u != 0.0 {
                        agg.push((block.p_offset + w * na + a, -pw * u));
                    }
                }
            }
            inequalities.push(agg, relaxation(v_max[b]));
        }
    }
    for row in v_rows {
        equalities.push(row, 0.0);
    }

    // Start from uniform strategies with v̂ at its value there.
    let mut start = vec![0.0; dim];
    for block in &blocks {
        let na = block.game.action_count();
        for j in 0..block.game.state_count() * na {
            start[block.p_offset + j] = 1.0 / na as f64;
        }
    }
    for b in 0..n_bs {
        let row = &equalities.rows[equalities.len() - n_bs + b];
        let v: f64 = row.iter().skip(1).map(|&(j, a)| -a * start[j]).sum();
        start[v_offset + b] = v.max(stats.arrivals[b]) + 1e-3;
    }

    let program = ConcaveProgram {
        objective: NetworkUtility {
            dim,
            v_offset,
            weights: stats.arrivals.clone(),
        },
        equalities,
        inequalities,
        lower,
        upper,
        start: Some(start),
    };
    Ok(StatsProgram {
        program,
        blocks,
        v_offset,
        bs_count: n_bs,
    })
}

/// Solves the program and returns the cleaned block strategies.
pub fn solve_stats_allocation(program: &StatsProgram, opts: &SolverOptions) -> Result<StatsSolution> {
    let report = solve_concave(&program.program, opts);
    match report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::MaxIter => {
            if report.kkt_residual > 1e-6 {
                return Err(Error::Solver(format!(
                    "statistics program stopped at the iteration cap (KKT residual {:.3e})",
                    report.kkt_residual
                )));
            }
            log::warn!(
                "statistics program hit the iteration cap with KKT residual {:.3e}",
                report.kkt_residual
            );
        }
    }
    let x = &report.x;
    let mut blocks = Vec::with_capacity(program.blocks.len());
    let mut theta = Vec::with_capacity(program.blocks.len());
    for block in &program.blocks {
        let ns = block.game.state_count();
        let na = block.game.action_count();
        let mut table = x[block.p_offset..block.p_offset + ns * na].to_vec();
        for row in table.chunks_mut(na) {
            for p in row.iter_mut() {
                if *p < 1e-12 {
                    *p = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            } else {
                row.iter_mut().for_each(|p| *p = 1.0 / na as f64);
            }
        }
        blocks.push(Strategy::new(ns, na, table)?);
        theta.push(
            (0..program.bs_count)
                .map(|b| {
                    let o = block.theta_offset[b];
                    x[o..o + block.game.local_state_count(b)].to_vec()
                })
                .collect(),
        );
    }
    Ok(StatsSolution {
        blocks,
        block_subcarriers: program.blocks.iter().map(|b| b.subcarriers.clone()).collect(),
        theta,
        v: x[program.v_offset..program.v_offset + program.bs_count].to_vec(),
        objective: report.objective,
        report,
    })
}

/// Builds, solves and expands to the full game in one call.
pub fn allocate(game: &Game, stats: &EstimatedStatistics, opts: &SolverOptions) -> Result<(Strategy, StatsSolution)> {
    let program = build_program(game, stats, true)?;
    let solution = solve_stats_allocation(&program, opts)?;
    let strategy = solution.joint_strategy(game)?;
    Ok((strategy, solution))
}

impl StatsSolution {
    /// Full-game strategy `Pr(α|ω) = Π_k Pr_k(α^k|ω^k)`; every round-trip
    /// level uses the same conditional strategy.
    pub fn joint_strategy(&self, game: &Game) -> Result<Strategy> {
        let n_bs = game.bs_count();
        let s_count = game.subcarriers();
        let probe_levels = [game.sigma_levels()[0]];
        let subs: Vec<Game> = self
            .block_subcarriers
            .iter()
            .map(|sc| game.restrict(&probe_levels, sc))
            .collect::<Result<_>>()?;
        // own_map[k][b][own], act_map[k][b][a]: block-local indices.
        let mut own_map = vec![vec![Vec::new(); n_bs]; subs.len()];
        let mut act_map = vec![vec![Vec::new(); n_bs]; subs.len()];
        for (k, (sub, sc)) in subs.iter().zip(&self.block_subcarriers).enumerate() {
            for b in 0..n_bs {
                let links = |digits: &[usize]| -> Vec<usize> {
                    (0..game.ues(b))
                        .flat_map(|m| sc.iter().map(move |&s| m * s_count + s))
                        .map(|l| digits[l])
                        .collect()
                };
                own_map[k][b] = (0..game.own_count(b))
                    .map(|o| sub.own_index(b, &links(&game.own_digits(b, o))))
                    .collect();
                act_map[k][b] = (0..game.local_action_count(b))
                    .map(|a| {
                        sub.action_of_digits(b, &links(game.power_digits(b, a)))
                            .ok_or_else(|| Error::Domain("action does not factor over sub-carriers".into()))
                    })
                    .collect::<Result<_>>()?;
            }
        }
        let ns = game.state_count();
        let na = game.action_count();
        let mut table = vec![0.0; ns * na];
        let mut own = vec![0; n_bs];
        let mut acts = vec![0; n_bs];
        let mut block_own = vec![0; n_bs];
        let mut block_act = vec![0; n_bs];
        for w in 0..ns {
            game.split_state(w, &mut own);
            let block_states: Vec<usize> = (0..subs.len())
                .map(|k| {
                    for b in 0..n_bs {
                        block_own[b] = own_map[k][b][own[b]];
                    }
                    subs[k].state(0, &block_own)
                })
                .collect();
            for a in 0..na {
                game.split_action(a, &mut acts);
                let mut p = 1.0;
                for k in 0..subs.len() {
                    for b in 0..n_bs {
                        block_act[b] = act_map[k][b][acts[b]];
                    }
                    p *= self.blocks[k].prob(block_states[k], subs[k].action(&block_act));
                    if p == 0.0 {
                        break;
                    }
                }
                table[w * na + a] = p;
            }
        }
        Strategy::new(ns, na, table)
    }
}

/// State → global action table with a canonical scalar index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MappingRule {
    actions: Vec<usize>,
}

impl MappingRule {
    pub fn new(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    pub fn action(&self, state: usize) -> usize {
        self.actions[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Mixed-radix index `Σ_ω action(ω) · |A|^(|W|-1-ω)`.
    pub fn canonical_index(&self, action_count: usize) -> BigUint {
        let radix = BigUint::from(action_count);
        self.actions
            .iter()
            .fold(BigUint::from(0u32), |acc, &a| acc * &radix + BigUint::from(a))
    }

    pub fn from_index(index: &BigUint, state_count: usize, action_count: usize) -> Result<Self> {
        let radix = BigUint::from(action_count);
        let mut rest = index.clone();
        let mut actions = vec![0; state_count];
        for slot in actions.iter_mut().rev() {
            let digit = &rest % &radix;
            *slot = digit.iter_u64_digits().next().unwrap_or(0) as usize;
            rest /= &radix;
        }
        if rest != BigUint::from(0u32) {
            return Err(Error::Domain("mapping-rule index out of range".into()));
        }
        Ok(Self { actions })
    }

    /// Most likely action per state, ties to the lowest index.
    pub fn argmax(strategy: &Strategy) -> Self {
        Self {
            actions: (0..strategy.states())
                .map(|w| {
                    strategy
                        .row(w)
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |best, (a, &p)| if p > best.1 { (a, p) } else { best })
                        .0
                })
                .collect(),
        }
    }
}

/// Draws `frame_slots` rules; every state's action in every rule is an
/// independent draw from `Pr(·|ω)`.
pub fn sample_mapping_rules<R: Rng + ?Sized>(
    strategy: &Strategy,
    frame_slots: usize,
    rng: &mut R,
) -> Result<Vec<MappingRule>> {
    let samplers: Vec<WeightedIndex<f64>> = (0..strategy.states())
        .map(|w| {
            WeightedIndex::new(strategy.row(w))
                .map_err(|e| Error::Domain(format!("strategy row {w} cannot be sampled: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok((0..frame_slots)
        .map(|_| MappingRule::new(samplers.iter().map(|d| d.sample(rng)).collect()))
        .collect())
}

/// Values sent over the fronthaul per frame and the rates they require.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FronthaulPayload {
    pub upload_values: usize,
    pub feedback_values: usize,
    /// `R^U` in bit/s/Hz.
    pub upload_rate: f64,
    /// `R^F` in bit/s/Hz.
    pub feedback_rate: f64,
}

/// Rate needed to carry one real value over the fronthaul.
pub fn default_unit_rate() -> f64 {
    0.025 * 1.05f64.log2()
}

/// Statistics-mode payload of BS `b`: `1 + |G| + Σ_{m,s}|H_bm^(s)|` uploaded
/// values and `T0` fed-back rule indices.
pub fn payload_stats(game: &Game, b: usize, frame_slots: usize, unit_rate: f64) -> FronthaulPayload {
    let gains: usize = (0..game.ues(b))
        .flat_map(|m| (0..game.subcarriers()).map(move |s| (m, s)))
        .map(|(m, s)| game.gain_levels(b, b, m, s).len())
        .sum();
    let upload_values = 1 + game.sigma_levels().len() + gains;
    FronthaulPayload {
        upload_values,
        feedback_values: frame_slots,
        upload_rate: upload_values as f64 * unit_rate,
        feedback_rate: frame_slots as f64 * unit_rate,
    }
}

/// Variable and constraint counts of the unreduced program:
/// `|W||A| + Σ_b|W_b|` and
/// `2|B| + Σ_b|W_b||A_b| + |W| + |W||A| + 2Σ_b|W_b|`.
pub fn problem_dimensions(game: &Game) -> Result<(u128, u128)> {
    if game.action_count() == 0 || game.state_count() == 0 {
        return Err(Error::Domain("empty state or action space".into()));
    }
    let w = game.state_count() as u128;
    let a = game.action_count() as u128;
    let n_bs = game.bs_count() as u128;
    let sum_wb: u128 = (0..game.bs_count()).map(|b| game.local_state_count(b) as u128).sum();
    let sum_wa: u128 = (0..game.bs_count())
        .map(|b| (game.local_state_count(b) * game.local_action_count(b)) as u128)
        .sum();
    Ok((w * a + sum_wb, 2 * n_bs + sum_wa + w + w * a + 2 * sum_wb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::toy_game;
    use crate::game::{check_epsilon_cce, Utility};
    use crate::model::{GainLevelSet, RadioConfig, Topology};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_program_is_a_cce() {
        let g = toy_game([1.0, 1.0]);
        let stats = EstimatedStatistics::uniform(&g, vec![0.2, 0.2]);
        let (strategy, sol) = allocate(&g, &stats, &SolverOptions::default()).unwrap();
        let dist = stats.distribution(&g).unwrap();
        let audit = check_epsilon_cce(&g, &strategy, &dist, 1e-6, Utility::Auxiliary).unwrap();
        assert!(audit.pass, "{audit:?}");
        assert!(sol.v.iter().all(|&v| v >= 0.2 - 1e-9));
    }

    #[test]
    fn single_bs_puts_mass_on_best_action() {
        let own = GainLevelSet::constant(1.0).unwrap();
        let g = Game::new(crate::game::GameSpec {
            ues_per_bs: vec![1],
            subcarriers: 1,
            frame_slots: 10.0,
            noise: 1.0,
            sigma_levels: vec![0.0],
            gains: vec![vec![vec![vec![own]]]],
            power_levels: vec![vec![0.0, 1.0]],
            budgets: vec![1.0],
        })
        .unwrap();
        let stats = EstimatedStatistics::uniform(&g, vec![0.5]);
        let program = build_program(&g, &stats, true).unwrap();
        // Two probabilities, one θ and the explicit v̂.
        assert_eq!(program.dim(), 4);
        let sol = solve_stats_allocation(&program, &SolverOptions::default()).unwrap();
        assert!((sol.blocks[0].prob(0, 1) - 1.0).abs() < 1e-6);
        assert!((sol.objective - 0.5 * 2.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn unreachable_qos_is_infeasible() {
        let g = toy_game([1.0, 1.0]);
        let stats = EstimatedStatistics::uniform(&g, vec![50.0, 0.1]);
        let program = build_program(&g, &stats, true).unwrap();
        assert!(matches!(
            solve_stats_allocation(&program, &SolverOptions::default()),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn factored_program_matches_audit_on_deployment() {
        let topo = Topology::symmetric(2, (10.0, 40.0), (20.0, 30.0)).unwrap();
        let radio = RadioConfig::default();
        let g = Game::new(crate::game::GameSpec::from_deployment(&topo, &radio, &[0.25, 0.5], 2).unwrap())
            .unwrap();
        let stats = EstimatedStatistics::uniform(&g, vec![1.6, 1.0]);
        let program = build_program(&g, &stats, true).unwrap();
        assert_eq!(program.block_count(), 2);
        let (strategy, _) = allocate(&g, &stats, &SolverOptions::default()).unwrap();
        let dist = stats.distribution(&g).unwrap();
        let audit = check_epsilon_cce(&g, &strategy, &dist, 1e-6, Utility::Auxiliary).unwrap();
        assert!(audit.pass, "worst violation {}", audit.worst_violation);
    }

    #[test]
    fn mapping_rule_index_round_trips() {
        let rule = MappingRule::new(vec![3, 0, 8, 1]);
        let idx = rule.canonical_index(9);
        assert_eq!(idx, BigUint::from(3u32 * 729 + 8 * 9 + 1));
        assert_eq!(MappingRule::from_index(&idx, 4, 9).unwrap(), rule);
    }

    #[test]
    fn deterministic_strategy_gives_identical_rules() {
        let s = Strategy::deterministic(3, &[2, 0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rules = sample_mapping_rules(&s, 10, &mut rng).unwrap();
        assert!(rules.iter().all(|r| r == &MappingRule::argmax(&s)));
    }

    #[test]
    fn uniform_strategy_samples_evenly() {
        let s = Strategy::uniform(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let rules = sample_mapping_rules(&s, n, &mut rng).unwrap();
        let ones = rules.iter().filter(|r| r.action(0) == 1).count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn payload_and_dimension_counts() {
        let topo = Topology::symmetric(2, (10.0, 40.0), (20.0, 30.0)).unwrap();
        let radio = RadioConfig::default();
        let g = Game::new(crate::game::GameSpec::from_deployment(&topo, &radio, &[0.25, 0.5], 2).unwrap())
            .unwrap();
        let p = payload_stats(&g, 0, 10, default_unit_rate());
        assert_eq!(p.upload_values, 11);
        assert_eq!(p.feedback_values, 10);
        let (vars, cons) = problem_dimensions(&g).unwrap();
        assert_eq!(vars, 512 * 81 + 64);
        assert_eq!(cons, 4 + 2 * 32 * 9 + 512 + 512 * 81 + 128);
    }
}
