//! Slotted two-timescale simulation: channel and arrival generation, fronthaul
//! round trips, frame orchestration for the statistics, realization and
//! non-SDN modes, and metrics.
//!
//! Randomness: every draw comes from a ChaCha8 stream seeded by the scenario
//! seed with stream id `kind << 56 | frame << 16 | slot`, so channels and
//! arrivals are common across modes and any frame is reproducible alone.

use crate::controller_lyapunov::{payload_realization, LyapunovController, VirtualQueueSet};
use crate::controller_stats::{allocate, payload_stats, sample_mapping_rules, EstimatedStatistics, MappingRule};
use crate::error::{Error, Result};
use crate::game::{Game, GameSpec};
use crate::model::{
    feedback_time, quantize_gain, round_trip, upload_time, GainLevelSet, RadioConfig, Topology, RoundTrip,
};
use crate::scheduler::{
    allocated_subcarriers, full_mask, plan_slot, serve_slot, update_empirical_stats, FrameObservation,
    InterferenceEstimate,
};
use crate::solver::SolverOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Statistics,
    Realization,
    NonSdn,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Statistics, Mode::Realization, Mode::NonSdn];

    pub fn is_sdn(self) -> bool {
        self != Mode::NonSdn
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Statistics => "statistics",
            Mode::Realization => "realization",
            Mode::NonSdn => "non-sdn",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statistics" | "stats" => Ok(Mode::Statistics),
            "realization" => Ok(Mode::Realization),
            "non-sdn" | "nonsdn" => Ok(Mode::NonSdn),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub radio: RadioConfig,
    /// Mean arrival rate per UE in bit/s, `[b][m]`.
    pub arrival_bps: Vec<Vec<f64>>,
    pub mode: Mode,
    pub frames: usize,
    pub seed: u64,
    pub v: f64,
    pub kappa: f64,
    /// Received SNR at the controller, `P_b g / σ²`, in dB.
    pub fronthaul_snr_db: f64,
    /// Round-trip level set `G` in slots, ascending.
    pub sigma_levels: Vec<f64>,
    pub gain_levels: usize,
    pub unit_rate: f64,
    pub packet_bits: u64,
    /// Arrival cap as a multiple of the per-UE mean.
    pub arrival_cap: f64,
    /// Slots excluded from long-run averages.
    pub warmup_slots: usize,
}

impl Scenario {
    /// Two BSs with a near and a far UE each, 8/8 and 5/5 Mbit/s arrivals.
    pub fn reference(mode: Mode) -> Self {
        Self::with_bs_count(mode, 2).expect("reference topology is valid")
    }

    /// `bs_count` BSs laid out like the reference pair; arrival means cycle
    /// through 8/8 and 5/5 Mbit/s.
    pub fn with_bs_count(mode: Mode, bs_count: usize) -> Result<Self> {
        Ok(Self {
            topology: Topology::symmetric(bs_count, (10.0, 40.0), (20.0, 30.0))?,
            radio: RadioConfig::default(),
            arrival_bps: (0..bs_count)
                .map(|b| if b % 2 == 0 { vec![8e6, 8e6] } else { vec![5e6, 5e6] })
                .collect(),
            mode,
            frames: 500,
            seed: 1,
            v: 100.0,
            kappa: 1e4,
            fronthaul_snr_db: 20.0,
            sigma_levels: vec![0.25, 0.5],
            gain_levels: 2,
            unit_rate: crate::controller_stats::default_unit_rate(),
            packet_bits: 12_000,
            arrival_cap: 3.0,
            warmup_slots: 100,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        let shape_ok = self.arrival_bps.len() == self.topology.bs_count()
            && self
                .arrival_bps
                .iter()
                .zip(self.topology.ues_per_bs())
                .all(|(a, &m)| a.len() == m);
        if !shape_ok {
            return Err(Error::Config("arrival means do not match the topology".into()));
        }
        if self.arrival_bps.iter().flatten().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::Config("arrival means must be finite and nonnegative".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("horizon must be at least one frame".into()));
        }
        if !(self.v >= 0.0) || !(self.kappa > 0.0) {
            return Err(Error::Config("need V ≥ 0 and κ > 0".into()));
        }
        if self.sigma_levels.is_empty()
            || self.sigma_levels.windows(2).any(|w| !(w[0] < w[1]))
            || self.sigma_levels[0] < 0.0
            || *self.sigma_levels.last().unwrap() > self.radio.frame_slots as f64
        {
            return Err(Error::Config("round-trip levels must be ascending within [0, T0]".into()));
        }
        if self.gain_levels == 0 || self.packet_bits == 0 || !(self.arrival_cap >= 1.0) || !(self.unit_rate > 0.0) {
            return Err(Error::Config("invalid quantization, packet size, cap or unit rate".into()));
        }
        if self.topology.ues_per_bs().iter().any(|&m| m > 16) || self.radio.subcarriers > 16 {
            return Err(Error::Config("at most 16 UEs per BS and 16 sub-carriers".into()));
        }
        Ok(())
    }

    pub fn game(&self) -> Result<Game> {
        Game::new(GameSpec::from_deployment(
            &self.topology,
            &self.radio,
            &self.sigma_levels,
            self.gain_levels,
        )?)
    }

    pub fn slots(&self) -> usize {
        self.frames * self.radio.frame_slots
    }

    /// Mean arrivals per UE in bits per slot.
    pub fn mean_bits_per_slot(&self) -> Vec<Vec<f64>> {
        self.arrival_bps
            .iter()
            .map(|a| a.iter().map(|x| x * self.radio.slot_s).collect())
            .collect()
    }

    /// Mean controller-link gain giving the configured received SNR.
    pub fn controller_link_gain(&self) -> f64 {
        crate::model::db_to_linear(self.fronthaul_snr_db) * self.radio.noise_w / self.radio.bs_power_w
    }
}

#[derive(Clone, Copy)]
enum StreamKind {
    Channel = 1,
    Arrival = 2,
    Fronthaul = 3,
    Rules = 4,
}

fn stream(seed: u64, kind: StreamKind, frame: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 56) | ((frame as u64) << 16) | slot as u64);
    rng
}

/// Quantized DL gain levels `[tx][rx][ue][s]` for one slot.
pub type GainLevels = Vec<Vec<Vec<Vec<usize>>>>;

/// Independent Exp(1) fading × path loss per link, quantized.
pub fn generate_channels<R: Rng + ?Sized>(game: &Game, rng: &mut R) -> GainLevels {
    let n = game.bs_count();
    (0..n)
        .map(|tx| {
            (0..n)
                .map(|rx| {
                    (0..game.ues(rx))
                        .map(|m| {
                            (0..game.subcarriers())
                                .map(|s| {
                                    let set = game.gain_levels(tx, rx, m, s);
                                    let fading: f64 = Exp1.sample(rng);
                                    quantize_gain(fading * set.mean(), set)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Poisson packet counts in bits, capped at `cap × mean`, per UE.
pub fn generate_arrivals<R: Rng + ?Sized>(
    mean_bits: &[Vec<f64>],
    packet_bits: u64,
    cap: f64,
    rng: &mut R,
) -> Vec<Vec<u64>> {
    mean_bits
        .iter()
        .map(|per_bs| {
            per_bs
                .iter()
                .map(|&mean| {
                    if mean <= 0.0 {
                        return 0;
                    }
                    let packets = mean / packet_bits as f64;
                    let count = Poisson::new(packets).map(|d| d.sample(rng)).unwrap_or(0.0) as u64;
                    (count * packet_bits).min((cap * mean).floor() as u64)
                })
                .collect()
        })
        .collect()
}

/// Controller-link gains of one frame and the resulting round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct FronthaulDraw {
    /// `[b][s]` BS → controller.
    pub uplink: Vec<Vec<f64>>,
    /// `[b][s]` controller → BS.
    pub downlink: Vec<Vec<f64>>,
}

impl FronthaulDraw {
    pub fn sample<R: Rng + ?Sized>(bs_count: usize, subcarriers: usize, levels: &GainLevelSet, rng: &mut R) -> Self {
        let mut draw = || -> Vec<Vec<f64>> {
            (0..bs_count)
                .map(|_| {
                    (0..subcarriers)
                        .map(|_| {
                            let fading: f64 = Exp1.sample(rng);
                            levels.value(quantize_gain(fading * levels.mean(), levels))
                        })
                        .collect()
                })
                .collect()
        };
        let uplink = draw();
        let downlink = draw();
        Self { uplink, downlink }
    }

    /// Round trip for per-BS upload and feedback rates.
    pub fn round_trip(&self, radio: &RadioConfig, upload: &[f64], feedback: &[f64], levels: &[f64]) -> Result<RoundTrip> {
        let n = self.uplink.len();
        let t0 = radio.frame_slots as f64;
        let up: Vec<f64> = (0..n)
            .map(|b| {
                let interference: Vec<f64> = (0..radio.subcarriers)
                    .map(|s| {
                        (0..n)
                            .filter(|&o| o != b)
                            .map(|o| radio.bs_power_w * self.uplink[o][s])
                            .sum()
                    })
                    .collect();
                upload_time(radio.bs_power_w, &self.uplink[b], &interference, upload[b], t0, radio.noise_w)
            })
            .collect();
        let down: Vec<f64> = (0..n)
            .map(|b| feedback_time(&self.downlink[b], n, feedback[b], t0, radio.noise_w, radio.controller_power_w))
            .collect();
        round_trip(&up, &down, levels)
    }
}

/// How the BSs obtained their sub-carrier allocation in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    /// Every sub-carrier, no controller.
    NonSdn,
    /// First frame: uniform-power rule.
    Bootstrap,
    /// Rule from the controller.
    Controlled,
    /// Fronthaul overflow: uncoordinated, still charged the largest level.
    Unavailable,
}

impl FrameKind {
    pub fn label(self) -> &'static str {
        match self {
            FrameKind::NonSdn => "non-sdn",
            FrameKind::Bootstrap => "bootstrap",
            FrameKind::Controlled => "controlled",
            FrameKind::Unavailable => "unavailable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub varsigma: f64,
    pub raw_varsigma: f64,
    pub kind: FrameKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub frame: usize,
    pub varsigma: f64,
    pub kind: FrameKind,
    /// Per UE (BS-major), bit/s/Hz.
    pub rates: Vec<f64>,
    /// Per UE, bits after the slot.
    pub queues: Vec<u64>,
    /// Per BS, total transmit power.
    pub power: Vec<f64>,
}

/// Per-UE cumulative bit counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Conservation {
    pub arrived: Vec<u64>,
    pub offered: Vec<u64>,
    pub delivered: Vec<u64>,
    /// Offered service that found the queue empty.
    pub unused: Vec<u64>,
    pub final_queue: Vec<u64>,
}

impl Conservation {
    /// `arrived = (offered − unused) + final` and `delivered = offered − unused`
    /// for every UE.
    pub fn holds(&self) -> bool {
        (0..self.arrived.len()).all(|u| {
            self.delivered[u] + self.unused[u] == self.offered[u]
                && self.arrived[u] == self.offered[u] - self.unused[u] + self.final_queue[u]
        })
    }
}

/// Final virtual-queue values of a realization-mode episode.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualQueueReport {
    pub queues: VirtualQueueSet,
    pub replayed_slots: usize,
    pub v_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mode: Mode,
    pub seed: u64,
    pub warmup_slots: usize,
    pub ues_per_bs: Vec<usize>,
    pub slots: Vec<SlotRecord>,
    pub frames: Vec<FrameRecord>,
    pub conservation: Conservation,
    pub virtual_queues: Option<VirtualQueueReport>,
    /// `λ̂_b` at the end of the episode, rate units.
    pub arrival_estimates: Vec<f64>,
    /// Upload and feedback values per BS per frame.
    pub payload: Option<(usize, usize)>,
}

impl Metrics {
    fn steady(&self) -> &[SlotRecord] {
        let start = self.warmup_slots.min(self.slots.len().saturating_sub(1));
        &self.slots[start..]
    }

    /// Mean network sum rate after warm-up.
    pub fn long_run_sum_rate(&self) -> f64 {
        let s = self.steady();
        s.iter().map(|r| r.rates.iter().sum::<f64>()).sum::<f64>() / s.len() as f64
    }

    /// Mean total queue (bits) after warm-up.
    pub fn long_run_total_queue(&self) -> f64 {
        let s = self.steady();
        s.iter().map(|r| r.queues.iter().sum::<u64>() as f64).sum::<f64>() / s.len() as f64
    }

    /// `(1/t) Σ_{τ≤t}` of the sum rate for every slot.
    pub fn moving_average_sum_rate(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.slots
            .iter()
            .enumerate()
            .map(|(t, r)| {
                acc += r.rates.iter().sum::<f64>();
                acc / (t + 1) as f64
            })
            .collect()
    }

    pub fn mean_varsigma(&self) -> f64 {
        self.frames.iter().map(|f| f.varsigma).sum::<f64>() / self.frames.len() as f64
    }

    pub fn unavailable_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.kind == FrameKind::Unavailable).count()
    }
}

/// `(η_R̄, η_Q̄)`: long-run sum rate and total queue relative to a baseline.
pub fn compute_ratios(sdn: &Metrics, baseline: &Metrics) -> Result<(f64, f64)> {
    let (r, q) = (baseline.long_run_sum_rate(), baseline.long_run_total_queue());
    if r == 0.0 {
        return Err(Error::ZeroBaseline("sum rate"));
    }
    if q == 0.0 {
        return Err(Error::ZeroBaseline("total queue"));
    }
    Ok((sdn.long_run_sum_rate() / r, sdn.long_run_total_queue() / q))
}

/// Uniform-power action: every sub-carrier at full power, UE `s mod |M_b|`.
pub fn bootstrap_action(game: &Game, b: usize) -> Result<usize> {
    let s_count = game.subcarriers();
    let ues = game.ues(b);
    let top = game.power_levels(b).len() - 1;
    let digits: Vec<usize> = (0..ues * s_count)
        .map(|l| if l / s_count == l % s_count % ues { top } else { 0 })
        .collect();
    game.action_of_digits(b, &digits)
        .ok_or_else(|| Error::Config("uniform-power action exceeds the budget".into()))
}

enum Rule {
    None,
    Bootstrap(Vec<usize>),
    Sampled(Vec<MappingRule>),
    Realization,
}

/// Runs one episode.
pub fn run_episode(scenario: &Scenario) -> Result<Metrics> {
    scenario.validate()?;
    let game = scenario.game()?;
    let radio = &scenario.radio;
    let n = game.bs_count();
    let s_count = game.subcarriers();
    let t0 = radio.frame_slots;
    let bits_per_rate = radio.bits_per_rate_unit();
    let mean_bits = scenario.mean_bits_per_slot();
    let ues: Vec<usize> = (0..n).map(|b| game.ues(b)).collect();
    let ue_total: usize = ues.iter().sum();
    let offsets: Vec<usize> = ues.iter().scan(0, |acc, &m| { let o = *acc; *acc += m; Some(o) }).collect();
    let top_level = scenario.sigma_levels.len() - 1;
    let controller_levels = GainLevelSet::rayleigh(scenario.controller_link_gain(), scenario.gain_levels)?;
    let opts = SolverOptions::default();

    let payloads: Vec<(usize, usize, f64, f64)> = (0..n)
        .map(|b| {
            let p = match scenario.mode {
                Mode::Realization => payload_realization(t0, scenario.unit_rate),
                _ => payload_stats(&game, b, t0, scenario.unit_rate),
            };
            (p.upload_values, p.feedback_values, p.upload_rate, p.feedback_rate)
        })
        .collect();

    let mut queues: Vec<Vec<u64>> = ues.iter().map(|&m| vec![0; m]).collect();
    let mut estimates: Vec<InterferenceEstimate> =
        (0..n).map(|b| InterferenceEstimate::new(game.ues(b) * s_count)).collect();
    let mut stats = EstimatedStatistics::uniform(&game, vec![0.0; n]);
    let mut lyapunov = (scenario.mode == Mode::Realization).then(|| LyapunovController::new(game.clone(), scenario.kappa));
    let mut previous_states: Vec<usize> = Vec::new();
    let bootstrap: Vec<usize> = (0..n).map(|b| bootstrap_action(&game, b)).collect::<Result<_>>()?;

    let mut cons = Conservation {
        arrived: vec![0; ue_total],
        offered: vec![0; ue_total],
        delivered: vec![0; ue_total],
        unused: vec![0; ue_total],
        final_queue: vec![0; ue_total],
    };
    let mut slots = Vec::with_capacity(scenario.slots());
    let mut frames = Vec::with_capacity(scenario.frames);
    let mut own = vec![0; n];

    for frame in 0..scenario.frames {
        let (varsigma, raw, sigma_level, unavailable) = if scenario.mode.is_sdn() {
            let draw = FronthaulDraw::sample(n, s_count, &controller_levels, &mut stream(scenario.seed, StreamKind::Fronthaul, frame, 0));
            let up: Vec<f64> = payloads.iter().map(|p| p.2).collect();
            let down: Vec<f64> = payloads.iter().map(|p| p.3).collect();
            let rt = draw.round_trip(radio, &up, &down, &scenario.sigma_levels)?;
            (rt.value, rt.raw, rt.level, rt.unavailable)
        } else {
            (0.0, 0.0, 0, false)
        };

        let (kind, rule) = if !scenario.mode.is_sdn() {
            (FrameKind::NonSdn, Rule::None)
        } else if unavailable {
            (FrameKind::Unavailable, Rule::None)
        } else {
            match scenario.mode {
                Mode::Statistics if frame > 0 => {
                    let (strategy, _) = allocate(&game, &stats, &opts).map_err(|e| e.in_frame(frame))?;
                    let mut rng = stream(scenario.seed, StreamKind::Rules, frame, 0);
                    let rules = sample_mapping_rules(&strategy, t0, &mut rng)?;
                    (FrameKind::Controlled, Rule::Sampled(rules))
                }
                Mode::Realization => {
                    let ctl = lyapunov.as_mut().expect("realization controller");
                    if !previous_states.is_empty() {
                        ctl.run_frame(&previous_states, &stats.arrivals).map_err(|e| e.in_frame(frame))?;
                    }
                    if ctl.has_rule() {
                        (FrameKind::Controlled, Rule::Realization)
                    } else {
                        (FrameKind::Bootstrap, Rule::Bootstrap(bootstrap.clone()))
                    }
                }
                _ => (FrameKind::Bootstrap, Rule::Bootstrap(bootstrap.clone())),
            }
        };
        // Realizations of the previous frame ride on this frame's upload.
        previous_states.clear();
        let charged = if scenario.mode.is_sdn() { varsigma } else { 0.0 };
        frames.push(FrameRecord {
            frame,
            varsigma: charged,
            raw_varsigma: raw,
            kind,
        });
        let key_sigma = if scenario.mode.is_sdn() { sigma_level } else { 0 };
        let mut obs = FrameObservation::new(&game, sigma_level.min(top_level));

        for t in 0..t0 {
            let slot = frame * t0 + t;
            let levels = generate_channels(&game, &mut stream(scenario.seed, StreamKind::Channel, frame, t));
            for b in 0..n {
                let digits: Vec<usize> = (0..ues[b] * s_count).map(|l| levels[b][b][l / s_count][l % s_count]).collect();
                own[b] = game.own_index(b, &digits);
            }
            let state = game.state(key_sigma, &own);
            let suggested: Option<Vec<usize>> = match &rule {
                Rule::None => None,
                Rule::Bootstrap(a) => Some(a.clone()),
                Rule::Sampled(rules) => {
                    let mut acts = vec![0; n];
                    game.split_action(rules[t].action(state), &mut acts);
                    Some(acts)
                }
                Rule::Realization => Some(
                    lyapunov
                        .as_mut()
                        .expect("realization controller")
                        .rule_action(state)
                        .map_err(|e| e.in_slot(slot).in_frame(frame))?,
                ),
            };
            let mut actions = vec![0; n];
            let mut masks = vec![0; n];
            let mut locals = vec![0; n];
            for b in 0..n {
                masks[b] = match &suggested {
                    Some(a) => allocated_subcarriers(&game, b, a[b], true),
                    None => full_mask(s_count),
                };
                locals[b] = game.local_state(key_sigma, own[b], b);
                let plan = plan_slot(
                    &game,
                    b,
                    &estimates[b],
                    locals[b],
                    masks[b],
                    game.own_gains(b, own[b]),
                    &queues[b],
                    scenario.v,
                    bits_per_rate,
                )
                .map_err(|e| e.in_frame(frame))?;
                actions[b] = plan.action;
            }
            let arrivals = generate_arrivals(
                &mean_bits,
                scenario.packet_bits,
                scenario.arrival_cap,
                &mut stream(scenario.seed, StreamKind::Arrival, frame, t),
            );
            let mut rates = vec![0.0; ue_total];
            let mut power = vec![0.0; n];
            for b in 0..n {
                let interference: Vec<f64> = (0..ues[b] * s_count)
                    .map(|l| {
                        let (m, s) = (l / s_count, l % s_count);
                        (0..n)
                            .filter(|&tx| tx != b)
                            .map(|tx| {
                                let p: f64 = (0..ues[tx]).map(|m2| game.powers(tx, actions[tx])[m2 * s_count + s]).sum();
                                p * game.gain_levels(tx, b, m, s).value(levels[tx][b][m][s])
                            })
                            .sum()
                    })
                    .collect();
                let powers = game.powers(b, actions[b]);
                power[b] = powers.iter().sum();
                let out = serve_slot(
                    powers,
                    game.own_gains(b, own[b]),
                    &interference,
                    s_count,
                    (charged, t0 as f64),
                    game.noise(),
                    bits_per_rate,
                    &queues[b],
                    &arrivals[b],
                );
                estimates[b].update(locals[b], masks[b], &interference);
                for m in 0..ues[b] {
                    let u = offsets[b] + m;
                    cons.arrived[u] += arrivals[b][m];
                    cons.offered[u] += out.service[m];
                    cons.unused[u] += out.unused[m];
                    cons.delivered[u] += out.service[m] - out.unused[m];
                    rates[u] = out.rates[m];
                }
                queues[b] = out.queues;
            }
            let per_bs: Vec<f64> = arrivals
                .iter()
                .map(|a| a.iter().sum::<u64>() as f64 / bits_per_rate)
                .collect();
            obs.record_slot(&game, &per_bs, &own, t0);
            previous_states.push(state);
            slots.push(SlotRecord {
                slot,
                frame,
                varsigma: charged,
                kind,
                rates,
                queues: queues.iter().flatten().copied().collect(),
                power,
            });
        }
        update_empirical_stats(&mut stats, frame, &obs, scenario.mode == Mode::Statistics);
    }
    cons.final_queue = queues.iter().flatten().copied().collect();
    let virtual_queues = lyapunov.map(|c| VirtualQueueReport {
        queues: c.queues().clone(),
        replayed_slots: c.replayed_slots(),
        v_max: c.v_max().to_vec(),
    });
    let payload = scenario.mode.is_sdn().then(|| {
        (
            payloads.iter().map(|p| p.0).max().unwrap_or(0),
            payloads.iter().map(|p| p.1).max().unwrap_or(0),
        )
    });
    Ok(Metrics {
        mode: scenario.mode,
        seed: scenario.seed,
        warmup_slots: scenario.warmup_slots,
        ues_per_bs: ues,
        slots,
        frames,
        conservation: cons,
        virtual_queues,
        arrival_estimates: stats.arrivals,
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(mode: Mode, frames: usize) -> Scenario {
        Scenario {
            frames,
            ..Scenario::reference(mode)
        }
    }

    #[test]
    fn channels_are_deterministic_and_median_split() {
        let game = Scenario::reference(Mode::NonSdn).game().unwrap();
        let a = generate_channels(&game, &mut stream(7, StreamKind::Channel, 3, 4));
        let b = generate_channels(&game, &mut stream(7, StreamKind::Channel, 3, 4));
        assert_eq!(a, b);
        let mut rng = stream(9, StreamKind::Channel, 0, 0);
        let draws = 100_000;
        let high: usize = (0..draws).map(|_| generate_channels(&game, &mut rng)[0][0][0][0]).sum();
        assert!((high as f64 / draws as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn arrivals_mean_zero_and_cap() {
        let mut rng = stream(1, StreamKind::Arrival, 0, 0);
        assert_eq!(generate_arrivals(&[vec![0.0]], 12_000, 3.0, &mut rng), vec![vec![0]]);
        let n = 100_000;
        let mean = 800_000.0;
        let total: u64 = (0..n)
            .map(|_| generate_arrivals(&[vec![mean]], 12_000, 3.0, &mut rng)[0][0])
            .sum();
        let sd = (mean * 12_000.0).sqrt();
        assert!((total as f64 / n as f64 - mean).abs() < 3.0 * sd / (n as f64).sqrt());
        // Cap below the typical draw: constant at the cap.
        let capped = generate_arrivals(&[vec![1e9]], 12_000, 1.0, &mut rng)[0][0];
        assert!(capped <= 1e9 as u64);
    }

    #[test]
    fn bootstrap_powers_every_subcarrier() {
        let game = Scenario::reference(Mode::Realization).game().unwrap();
        for b in 0..2 {
            let a = bootstrap_action(&game, b).unwrap();
            assert_eq!(allocated_subcarriers(&game, b, a, true), 0b11);
        }
    }

    #[test]
    fn non_sdn_has_zero_round_trip_and_conserves_bits() {
        let m = run_episode(&short(Mode::NonSdn, 5)).unwrap();
        assert!(m.frames.iter().all(|f| f.varsigma == 0.0 && f.kind == FrameKind::NonSdn));
        assert!(m.conservation.holds());
        assert_eq!(m.slots.len(), 50);
    }

    #[test]
    fn episodes_are_deterministic() {
        for mode in Mode::ALL {
            let a = run_episode(&short(mode, 4)).unwrap();
            let b = run_episode(&short(mode, 4)).unwrap();
            assert_eq!(a, b, "{mode}");
            assert!(a.conservation.holds());
        }
    }

    #[test]
    fn sdn_frames_are_charged_a_level() {
        let m = run_episode(&short(Mode::Realization, 4)).unwrap();
        assert_eq!(m.frames[0].kind, FrameKind::Bootstrap);
        assert!(m.frames[1..].iter().all(|f| f.kind == FrameKind::Controlled));
        assert!(m.frames.iter().all(|f| f.varsigma == 0.25));
    }

    #[test]
    fn low_snr_overflows() {
        let s = Scenario {
            fronthaul_snr_db: -20.0,
            ..short(Mode::Statistics, 3)
        };
        let m = run_episode(&s).unwrap();
        assert!(m.frames.iter().all(|f| f.kind == FrameKind::Unavailable && f.varsigma == 0.5));
    }

    #[test]
    fn ratios() {
        let m = run_episode(&short(Mode::NonSdn, 3)).unwrap();
        let (r, q) = compute_ratios(&m, &m).unwrap();
        assert_eq!((r, q), (1.0, 1.0));
        let mut zero = m.clone();
        for s in &mut zero.slots {
            s.rates.iter_mut().for_each(|r| *r = 0.0);
        }
        assert!(matches!(compute_ratios(&m, &zero), Err(Error::ZeroBaseline(_))));
    }
}
