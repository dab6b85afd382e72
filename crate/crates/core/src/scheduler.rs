//! Per-slot BS-side scheduling: allocated sub-carriers, queue-weighted
//! water-filling over the estimated interference, projection onto the action
//! grid, service and queue update, and the running estimators.

use crate::controller_stats::EstimatedStatistics;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::model::{dl_rate, queue_step_bits};
use std::collections::HashMap;

/// Bitmask of sub-carriers that carry power under `action`; every
/// sub-carrier when `sdn` is false.
pub fn allocated_subcarriers(game: &Game, b: usize, action: usize, sdn: bool) -> u64 {
    let s_count = game.subcarriers();
    if !sdn {
        return full_mask(s_count);
    }
    (0..s_count)
        .filter(|&s| game.subcarrier_power(b, action, s) > 0.0)
        .fold(0, |m, s| m | (1 << s))
}

pub fn full_mask(subcarriers: usize) -> u64 {
    if subcarriers >= 64 {
        u64::MAX
    } else {
        (1u64 << subcarriers) - 1
    }
}

/// A finite pmf as `(value, probability)` pairs.
pub type Pmf = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillResult {
    /// Per link, UE-major.
    pub powers: Vec<f64>,
    /// Budget multiplier.
    pub gamma: f64,
    /// Largest relative violation of the KKT system.
    pub kkt_residual: f64,
}

/// Marginal `w E[h / (σ² + I + P h)]`.
fn marginal(weight: f64, gain: f64, pmf: &[(f64, f64)], noise: f64, p: f64) -> f64 {
    weight * pmf.iter().map(|&(i, pr)| pr * gain / (noise + i + p * gain)).sum::<f64>()
}

/// Maximizes `Σ w_m E[ln(1 + P h/(σ²+I))]` over links of allowed sub-carriers
/// subject to `Σ P = budget`, `P ≥ 0`.
///
/// `weights` is per UE, `gains` and `interference` per link `m·S + s`.
pub fn waterfill(
    weights: &[f64],
    gains: &[f64],
    interference: &[Pmf],
    subcarriers: usize,
    allowed: u64,
    budget: f64,
    noise: f64,
) -> Result<WaterfillResult> {
    if !(budget > 0.0) {
        return Err(Error::Domain(format!("budget must be positive, got {budget}")));
    }
    let links: Vec<usize> = (0..gains.len())
        .filter(|l| allowed & (1 << (l % subcarriers)) != 0)
        .collect();
    if links.is_empty() {
        return Err(Error::NoAllocation);
    }
    let marg = |l: usize, p: f64| marginal(weights[l / subcarriers], gains[l], &interference[l], noise, p);
    let mut powers = vec![0.0; gains.len()];
    let top = links.iter().map(|&l| marg(l, 0.0)).fold(0.0_f64, f64::max);
    if !(top > 0.0) {
        log::warn!("all water-filling marginals are zero; splitting the budget uniformly");
        for &l in &links {
            powers[l] = budget / links.len() as f64;
        }
        return Ok(WaterfillResult {
            powers,
            gamma: 0.0,
            kkt_residual: 0.0,
        });
    }
    let level = |l: usize, gamma: f64| -> f64 {
        if marg(l, 0.0) <= gamma {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, budget);
        while marg(l, hi) > gamma {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if marg(l, mid) > gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let total = |gamma: f64| links.iter().map(|&l| level(l, gamma)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, top);
    let mut gamma = 0.5 * top;
    for _ in 0..300 {
        gamma = 0.5 * (lo + hi);
        let t = total(gamma);
        if (t - budget).abs() <= 1e-12 * budget {
            break;
        }
        if t > budget {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    for &l in &links {
        powers[l] = level(l, gamma);
    }
    let kkt_residual = kkt_residual(&powers, &links, gamma, budget, marg);
    Ok(WaterfillResult {
        powers,
        gamma,
        kkt_residual,
    })
}

fn kkt_residual(powers: &[f64], links: &[usize], gamma: f64, budget: f64, marg: impl Fn(usize, f64) -> f64) -> f64 {
    let scale = gamma.max(f64::MIN_POSITIVE);
    let mut r = ((powers.iter().sum::<f64>() - budget) / budget).abs();
    for &l in links {
        let p = powers[l];
        let m = marg(l, p);
        let v = if p > 0.0 {
            // Stationarity with a zero multiplier on P ≥ 0.
            (m - gamma).abs() / scale
        } else {
            (m - gamma).max(0.0) / scale
        };
        r = r.max(v);
    }
    r
}

/// Nearest member of `A_b` that is silent outside `allowed`.
pub fn project_action(game: &Game, b: usize, powers: &[f64], allowed: u64) -> usize {
    game.nearest_action(b, powers, allowed)
}

/// Conditional interference pmfs per link, keyed by (local state, allocated
/// sub-carrier mask), with running-average updates.
#[derive(Debug, Clone, Default)]
pub struct InterferenceEstimate {
    links: usize,
    table: HashMap<(usize, u64), Condition>,
}

#[derive(Debug, Clone)]
struct Condition {
    count: u64,
    pmfs: Vec<Pmf>,
}

impl InterferenceEstimate {
    pub fn new(links: usize) -> Self {
        Self {
            links,
            table: HashMap::new(),
        }
    }

    /// Per-link pmfs; a point mass at zero before any observation.
    pub fn pmfs(&self, local: usize, mask: u64) -> Vec<Pmf> {
        match self.table.get(&(local, mask)) {
            Some(c) => c.pmfs.clone(),
            None => vec![vec![(0.0, 1.0)]; self.links],
        }
    }

    pub fn count(&self, local: usize, mask: u64) -> u64 {
        self.table.get(&(local, mask)).map_or(0, |c| c.count)
    }

    /// New mass `1/(1+k)` on the observed values, old pmf scaled by `k/(1+k)`.
    pub fn update(&mut self, local: usize, mask: u64, observed: &[f64]) {
        let links = self.links;
        let c = self.table.entry((local, mask)).or_insert_with(|| Condition {
            count: 0,
            pmfs: vec![Vec::new(); links],
        });
        let k = c.count as f64;
        for (pmf, &obs) in c.pmfs.iter_mut().zip(observed) {
            for e in pmf.iter_mut() {
                e.1 *= k / (k + 1.0);
            }
            match pmf.iter_mut().find(|e| e.0 == obs) {
                Some(e) => e.1 += 1.0 / (k + 1.0),
                None => pmf.push((obs, 1.0 / (k + 1.0))),
            }
        }
        c.count += 1;
    }
}

/// Output of the BS-side decision for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPlan {
    pub allowed: u64,
    pub waterfill: Option<WaterfillResult>,
    pub action: usize,
}

/// Water-filling with weights `Q/(B Δt) + V` over the allowed sub-carriers,
/// then projection. An empty allocation idles the BS.
#[allow(clippy::too_many_arguments)]
pub fn plan_slot(
    game: &Game,
    b: usize,
    estimate: &InterferenceEstimate,
    local: usize,
    allowed: u64,
    own_gains: &[f64],
    queues: &[u64],
    v: f64,
    bits_per_rate_unit: f64,
) -> Result<SlotPlan> {
    if allowed & full_mask(game.subcarriers()) == 0 {
        return Ok(SlotPlan {
            allowed,
            waterfill: None,
            action: 0,
        });
    }
    let weights: Vec<f64> = queues.iter().map(|&q| q as f64 / bits_per_rate_unit + v).collect();
    let pmfs = estimate.pmfs(local, allowed);
    let wf = waterfill(
        &weights,
        own_gains,
        &pmfs,
        game.subcarriers(),
        allowed,
        game.budget(b),
        game.noise(),
    )?;
    let action = project_action(game, b, &wf.powers, allowed);
    Ok(SlotPlan {
        allowed,
        waterfill: Some(wf),
        action,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServeOutcome {
    /// Per UE, bit/s/Hz.
    pub rates: Vec<f64>,
    /// Offered service per UE in bits.
    pub service: Vec<u64>,
    pub queues: Vec<u64>,
    /// Offered service that found the queue empty.
    pub unused: Vec<u64>,
}

/// Rates from the realized interference, service `floor(R B Δt)` bits and the
/// queue update.
#[allow(clippy::too_many_arguments)]
pub fn serve_slot(
    powers: &[f64],
    gains: &[f64],
    interference: &[f64],
    subcarriers: usize,
    airtime: (f64, f64),
    noise: f64,
    bits_per_rate_unit: f64,
    queues: &[u64],
    arrivals: &[u64],
) -> ServeOutcome {
    let (varsigma, frame_slots) = airtime;
    let ues = queues.len();
    let mut rates = vec![0.0; ues];
    for (l, &p) in powers.iter().enumerate() {
        if p > 0.0 {
            rates[l / subcarriers] += dl_rate(p, gains[l], interference[l], varsigma, frame_slots, noise);
        }
    }
    let service: Vec<u64> = rates.iter().map(|r| (r * bits_per_rate_unit).floor() as u64).collect();
    let (queues, unused) = queues
        .iter()
        .zip(&service)
        .zip(arrivals)
        .map(|((&q, &s), &a)| queue_step_bits(q, s, a))
        .unzip();
    ServeOutcome {
        rates,
        service,
        queues,
        unused,
    }
}

/// Observations of one frame for the running estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    /// `Σ_t Σ_m λ_bm(t) / T0` per BS, in rate units.
    pub arrivals: Vec<f64>,
    /// `[b][m][s][level]`: fraction of the frame's slots at each level.
    pub gains: Vec<Vec<Vec<Vec<f64>>>>,
    /// Round-trip level of the frame.
    pub sigma: usize,
}

impl FrameObservation {
    pub fn new(game: &Game, sigma: usize) -> Self {
        let gains = (0..game.bs_count())
            .map(|b| {
                (0..game.ues(b))
                    .map(|m| {
                        (0..game.subcarriers())
                            .map(|s| vec![0.0; game.gain_levels(b, b, m, s).len()])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            arrivals: vec![0.0; game.bs_count()],
            gains,
            sigma,
        }
    }

    /// Adds one slot: per-BS arrivals (rate units) and own-link levels.
    pub fn record_slot(&mut self, game: &Game, arrivals: &[f64], own: &[usize], frame_slots: usize) {
        let w = 1.0 / frame_slots as f64;
        let s_count = game.subcarriers();
        for b in 0..game.bs_count() {
            self.arrivals[b] += arrivals[b] * w;
            for (l, &level) in game.own_digits(b, own[b]).iter().enumerate() {
                self.gains[b][l / s_count][l % s_count][level] += w;
            }
        }
    }
}

/// Running averages after `frames_seen` earlier frames:
/// `new = (k·old + frame)/(k+1)`. Channel and round-trip pmfs only when
/// `with_channels` (statistics mode).
pub fn update_empirical_stats(
    stats: &mut EstimatedStatistics,
    frames_seen: usize,
    obs: &FrameObservation,
    with_channels: bool,
) {
    let k = frames_seen as f64;
    let mix = |old: &mut f64, new: f64| *old = (k * *old + new) / (k + 1.0);
    for (old, &new) in stats.arrivals.iter_mut().zip(&obs.arrivals) {
        mix(old, new);
    }
    if !with_channels {
        return;
    }
    for (old, new) in stats
        .gains
        .iter_mut()
        .flatten()
        .flatten()
        .flatten()
        .zip(obs.gains.iter().flatten().flatten().flatten())
    {
        mix(old, *new);
    }
    for (g, old) in stats.sigma.iter_mut().enumerate() {
        mix(old, if g == obs.sigma { 1.0 } else { 0.0 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameSpec;
    use crate::model::{RadioConfig, Topology};

    fn deployment() -> Game {
        let topo = Topology::symmetric(2, (10.0, 40.0), (20.0, 30.0)).unwrap();
        Game::new(GameSpec::from_deployment(&topo, &RadioConfig::default(), &[0.25, 0.5], 2).unwrap()).unwrap()
    }

    fn point(i: f64) -> Pmf {
        vec![(i, 1.0)]
    }

    fn objective(w: &[f64], h: &[f64], pmfs: &[Pmf], s: usize, p: &[f64], noise: f64) -> f64 {
        p.iter()
            .enumerate()
            .map(|(l, &x)| w[l / s] * pmfs[l].iter().map(|&(i, pr)| pr * (1.0 + x * h[l] / (noise + i)).ln()).sum::<f64>())
            .sum()
    }

    #[test]
    fn allocation_masks() {
        let g = deployment();
        assert_eq!(allocated_subcarriers(&g, 0, 0, true), 0);
        assert_eq!(allocated_subcarriers(&g, 0, 0, false), 0b11);
        let a = g.action_of_digits(0, &[0, 1, 0, 0]).unwrap();
        assert_eq!(allocated_subcarriers(&g, 0, a, true), 0b10);
    }

    #[test]
    fn single_link_takes_everything() {
        let r = waterfill(&[1.0], &[2.0], &[point(0.5)], 1, 1, 3.0, 1.0).unwrap();
        assert!((r.powers[0] - 3.0).abs() < 1e-9);
        assert!(r.kkt_residual <= 1e-8);
    }

    #[test]
    fn symmetric_carriers_split_equally() {
        let r = waterfill(&[2.0], &[1.5, 1.5], &[point(0.3), point(0.3)], 2, 0b11, 4.0, 1.0).unwrap();
        assert!((r.powers[0] - 2.0).abs() < 1e-9 && (r.powers[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn matches_classical_water_level() {
        // P_s = (w/γ - n_s/h_s)^+ with n_s = σ² + I_s.
        let (h, n) = ([1.0, 0.5], [1.0 + 0.2, 1.0 + 1.0]);
        let budget = 3.0;
        let r = waterfill(&[1.0], &h, &[point(0.2), point(1.0)], 2, 0b11, budget, 1.0).unwrap();
        let floors = [n[0] / h[0], n[1] / h[1]];
        let level = (budget + floors[0] + floors[1]) / 2.0;
        assert!((r.powers[0] - (level - floors[0])).abs() < 1e-9);
        assert!((r.powers[1] - (level - floors[1])).abs() < 1e-9);
        assert!((r.gamma - 1.0 / level).abs() < 1e-9);
        let mut best = f64::NEG_INFINITY;
        let steps = 1_000_000;
        for k in 0..=steps {
            let p0 = budget * k as f64 / steps as f64;
            best = best.max(objective(&[1.0], &h, &[point(0.2), point(1.0)], 2, &[p0, budget - p0], 1.0));
        }
        let got = objective(&[1.0], &h, &[point(0.2), point(1.0)], 2, &r.powers, 1.0);
        assert!(got >= best - 1e-9);
    }

    #[test]
    fn dominated_link_stays_off() {
        let r = waterfill(&[1.0], &[1.0, 1e-3], &[point(0.0), point(0.0)], 2, 0b11, 1.0, 1.0).unwrap();
        assert_eq!(r.powers[1], 0.0);
        assert!(r.kkt_residual <= 1e-8);
    }

    #[test]
    fn respects_mask_and_errors_when_empty() {
        let r = waterfill(&[1.0, 1.0], &[1.0; 4], &vec![point(0.0); 4], 2, 0b01, 2.0, 1.0).unwrap();
        assert_eq!((r.powers[1], r.powers[3]), (0.0, 0.0));
        assert!(matches!(
            waterfill(&[1.0], &[1.0, 1.0], &[point(0.0), point(0.0)], 2, 0, 1.0, 1.0),
            Err(Error::NoAllocation)
        ));
    }

    #[test]
    fn zero_marginals_split_uniformly() {
        let r = waterfill(&[0.0], &[1.0, 1.0], &[point(0.0), point(0.0)], 2, 0b11, 2.0, 1.0).unwrap();
        assert_eq!(r.powers, vec![1.0, 1.0]);
    }

    #[test]
    fn queue_weight_and_v_tilt_power() {
        // Two UEs on one carrier, identical channels: the larger weight wins.
        let r = waterfill(&[5.0, 1.0], &[1.0, 1.0], &[point(0.0), point(0.0)], 1, 1, 1.0, 1.0).unwrap();
        assert!(r.powers[0] >= r.powers[1]);
        // Large V: nearly equal weights, the better channel gets more.
        let r = waterfill(&[1e6 + 5.0, 1e6], &[1.0, 3.0], &[point(0.0), point(0.0)], 1, 1, 1.0, 1.0).unwrap();
        assert!(r.powers[1] > r.powers[0]);
    }

    #[test]
    fn projection_rules() {
        let g = deployment();
        let p = g.power_levels(0)[1];
        for a in 0..g.local_action_count(0) {
            assert_eq!(project_action(&g, 0, g.powers(0, a), 0b11), a);
        }
        // Half step between off and on for one link: lower index (off).
        assert_eq!(project_action(&g, 0, &[p / 2.0, 0.0, 0.0, 0.0], 0b11), 0);
        // Power outside the mask is never kept.
        let a = project_action(&g, 0, &[p, p, 0.0, 0.0], 0b01);
        assert_eq!(g.subcarrier_power(0, a, 1), 0.0);
    }

    #[test]
    fn interference_recursion() {
        let mut e = InterferenceEstimate::new(1);
        assert_eq!(e.pmfs(0, 1), vec![vec![(0.0, 1.0)]]);
        e.update(0, 1, &[2.0]);
        assert_eq!(e.pmfs(0, 1), vec![vec![(2.0, 1.0)]]);
        e.update(0, 1, &[2.0]);
        assert_eq!(e.pmfs(0, 1), vec![vec![(2.0, 1.0)]]);
        let mut e = InterferenceEstimate::new(1);
        e.update(3, 1, &[1.0]);
        e.update(3, 1, &[2.0]);
        assert_eq!(e.pmfs(3, 1), vec![vec![(1.0, 0.5), (2.0, 0.5)]]);
        // Other conditions are untouched.
        assert_eq!(e.pmfs(3, 2), vec![vec![(0.0, 1.0)]]);
        assert_eq!(e.count(3, 1), 2);
    }

    #[test]
    fn serve_idle_and_active() {
        let out = serve_slot(&[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], 2, (0.0, 10.0), 1.0, 1e6, &[100], &[7]);
        assert_eq!(out.queues, vec![107]);
        let out = serve_slot(&[1.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], 2, (0.0, 10.0), 1.0, 1e6, &[100], &[7]);
        assert_eq!(out.service, vec![1_000_000]);
        assert_eq!((out.queues[0], out.unused[0]), (7, 999_900));
    }

    #[test]
    fn empirical_recursions_match_batch() {
        let g = deployment();
        let mut stats = EstimatedStatistics::uniform(&g, vec![0.0, 0.0]);
        let mut all = Vec::new();
        let mut own = vec![0; 2];
        for n in 0..6 {
            let mut obs = FrameObservation::new(&g, n % 2);
            for t in 0..10 {
                let w = (n * 37 + t * 11) % g.state_count();
                g.split_state(w, &mut own);
                let lam = [0.1 * t as f64, 0.05 * n as f64];
                obs.record_slot(&g, &lam, &own, 10);
                all.push((lam, own.clone()));
            }
            update_empirical_stats(&mut stats, n, &obs, true);
        }
        let slots = all.len() as f64;
        let batch: f64 = all.iter().map(|(l, _)| l[0]).sum::<f64>() / slots;
        assert!((stats.arrivals[0] - batch).abs() < 1e-12);
        let digit = |o: &Vec<usize>| g.own_digits(1, o[1])[3];
        let batch_p: f64 = all.iter().filter(|(_, o)| digit(o) == 1).count() as f64 / slots;
        assert!((stats.gains[1][1][1][1] - batch_p).abs() < 1e-12);
        assert!((stats.sigma[0] - 0.5).abs() < 1e-12);
        for pmf in stats.gains.iter().flatten().flatten() {
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_arrivals_exact_after_first_frame() {
        let g = deployment();
        let mut stats = EstimatedStatistics::uniform(&g, vec![0.0, 0.0]);
        let mut obs = FrameObservation::new(&g, 0);
        for _ in 0..10 {
            obs.record_slot(&g, &[1.6, 1.0], &[0, 0], 10);
        }
        update_empirical_stats(&mut stats, 0, &obs, false);
        assert!((stats.arrivals[0] - 1.6).abs() < 1e-12);
        assert_eq!(stats.sigma, vec![0.5, 0.5]);
    }
}
