//! Physical-layer and queueing primitives: path loss, gain quantization,
//! fronthaul time costs, the effective downlink rate and queue evolution.
//!
//! Time portions are expressed in slots. Rates are spectral efficiencies in
//! bit/s/Hz; [`RadioConfig::bits_per_rate_unit`] converts them into bits per
//! slot for one sub-channel.

use crate::error::{Error, Result};

pub const DEFAULT_CARRIER_GHZ: f64 = 2.4;

/// Path loss in dB at `d` meters for the default 2.4 GHz carrier.
pub fn path_loss(d: f64) -> Result<f64> {
    path_loss_at(d, DEFAULT_CARRIER_GHZ)
}

/// Path loss in dB: `30 log10 d + 20 log10 f + 46` with `f` in GHz.
pub fn path_loss_at(d: f64, carrier_ghz: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    if !(carrier_ghz > 0.0) {
        return Err(Error::Domain(format!(
            "carrier frequency must be positive, got {carrier_ghz}"
        )));
    }
    Ok(30.0 * d.log10() + 20.0 * carrier_ghz.log10() + 46.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Finite set of gain values for one link with the thresholds that map a raw
/// gain onto a level. `thresholds[i]` separates level `i` from level `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainLevelSet {
    values: Vec<f64>,
    thresholds: Vec<f64>,
}

impl GainLevelSet {
    pub fn new(values: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("gain level set is empty".into()));
        }
        if thresholds.len() + 1 != values.len() {
            return Err(Error::Domain(format!(
                "{} levels need {} thresholds, got {}",
                values.len(),
                values.len() - 1,
                thresholds.len()
            )));
        }
        if values[0] < 0.0 || values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(
                "gain levels must be nonnegative and strictly increasing".into(),
            ));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("thresholds must be strictly increasing".into()));
        }
        Ok(Self { values, thresholds })
    }

    /// A single deterministic level (no thresholds).
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![value], Vec::new())
    }

    /// Equiprobable quantization of `mean_gain · X`, `X ~ Exp(1)`: cell
    /// boundaries at the `i/levels` quantiles, each level the conditional mean
    /// of its cell. With two levels the threshold is the median.
    pub fn rayleigh(mean_gain: f64, levels: usize) -> Result<Self> {
        if !(mean_gain > 0.0) || levels == 0 {
            return Err(Error::Domain(format!(
                "rayleigh levels need a positive mean and at least one level, got {mean_gain}, {levels}"
            )));
        }
        let edges: Vec<f64> = (0..=levels)
            .map(|i| {
                if i == levels {
                    f64::INFINITY
                } else {
                    -(1.0 - i as f64 / levels as f64).ln()
                }
            })
            .collect();
        let values = edges
            .windows(2)
            .map(|w| mean_gain * exp_conditional_mean(w[0], w[1]))
            .collect();
        let thresholds = edges[1..levels].iter().map(|e| mean_gain * e).collect();
        Self::new(values, thresholds)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("nonempty by construction")
    }

    pub fn value(&self, level: usize) -> f64 {
        self.values[level]
    }

    /// Average of the levels; the fading mean for [`Self::rayleigh`] sets.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Scales every level and threshold by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            thresholds: self.thresholds.iter().map(|t| t * factor).collect(),
        }
    }
}

/// `E[X | a <= X < b]` for `X ~ Exp(1)`.
fn exp_conditional_mean(a: f64, b: f64) -> f64 {
    let ea = (-a).exp();
    if b.is_infinite() {
        return a + 1.0;
    }
    let eb = (-b).exp();
    ((a + 1.0) * ea - (b + 1.0) * eb) / (ea - eb)
}

/// Index of the level whose cell contains `raw`. A raw value equal to a
/// threshold belongs to the upper cell.
pub fn quantize_gain(raw: f64, levels: &GainLevelSet) -> usize {
    levels.thresholds.partition_point(|&t| t <= raw)
}

/// Upload time portion in slots for one BS.
///
/// `own_gains[s]` is the BS-to-controller gain on sub-carrier `s` and
/// `interference[s]` the summed received power of the other BSs on it. Returns
/// `f64::INFINITY` when the link carries no information but `rate > 0`.
pub fn upload_time(
    power: f64,
    own_gains: &[f64],
    interference: &[f64],
    rate: f64,
    frame_slots: f64,
    noise: f64,
) -> f64 {
    debug_assert_eq!(own_gains.len(), interference.len());
    if rate == 0.0 {
        return 0.0;
    }
    let efficiency: f64 = own_gains
        .iter()
        .zip(interference)
        .map(|(&h, &i)| (1.0 + power * h / (noise + i)).log2())
        .sum();
    time_for(rate, frame_slots, efficiency)
}

/// Feedback time portion in slots for one BS. The controller broadcasts to
/// all `bs_count` BSs with power `controller_power` on every sub-carrier.
pub fn feedback_time(
    gains: &[f64],
    bs_count: usize,
    rate: f64,
    frame_slots: f64,
    noise: f64,
    controller_power: f64,
) -> f64 {
    if rate == 0.0 {
        return 0.0;
    }
    let b = bs_count as f64;
    let efficiency: f64 = gains
        .iter()
        .map(|&h| {
            let signal = controller_power * h;
            (1.0 + signal / (b * noise + (b - 1.0) * signal)).log2()
        })
        .sum();
    time_for(rate, frame_slots, efficiency)
}

fn time_for(rate: f64, frame_slots: f64, efficiency: f64) -> f64 {
    if efficiency > 0.0 {
        frame_slots * rate / efficiency
    } else {
        f64::INFINITY
    }
}

/// Quantized fronthaul round trip of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrip {
    /// `max ς^U + max ς^F` before quantization.
    pub raw: f64,
    /// Element of the level set charged to the frame.
    pub value: f64,
    pub level: usize,
    /// Set when `raw` exceeds the largest level: recommendations do not arrive
    /// in time and BSs fall back to uncoordinated scheduling.
    pub unavailable: bool,
}

/// Ceils `max upload + max feedback` to the next element of `levels`
/// (ascending). Overflow charges the largest level and raises `unavailable`.
pub fn round_trip(upload: &[f64], feedback: &[f64], levels: &[f64]) -> Result<RoundTrip> {
    if upload.is_empty() || feedback.is_empty() || levels.is_empty() {
        return Err(Error::Domain("round trip needs nonempty inputs".into()));
    }
    let raw = upload.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        + feedback.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let found = levels.iter().position(|&g| g >= raw);
    Ok(match found {
        Some(level) => RoundTrip {
            raw,
            value: levels[level],
            level,
            unavailable: false,
        },
        None => RoundTrip {
            raw,
            value: levels[levels.len() - 1],
            level: levels.len() - 1,
            unavailable: true,
        },
    })
}

/// Effective downlink spectral efficiency `((T0-ς)/T0) log2(1 + Ph/(σ²+I))`.
pub fn dl_rate(
    power: f64,
    gain: f64,
    interference: f64,
    varsigma: f64,
    frame_slots: f64,
    noise: f64,
) -> f64 {
    airtime_fraction(varsigma, frame_slots) * (1.0 + power * gain / (noise + interference)).log2()
}

pub fn airtime_fraction(varsigma: f64, frame_slots: f64) -> f64 {
    ((frame_slots - varsigma) / frame_slots).max(0.0)
}

/// `max(Q - R, 0) + λ`.
pub fn queue_step(queue: f64, service: f64, arrival: f64) -> f64 {
    (queue - service).max(0.0) + arrival
}

/// Integer-bit variant of [`queue_step`]; also returns the service that found
/// the queue empty (offered minus delivered).
pub fn queue_step_bits(queue: u64, service: u64, arrival: u64) -> (u64, u64) {
    let delivered = service.min(queue);
    (queue - delivered + arrival, service - delivered)
}

/// Which UE a global UE index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UeId {
    pub bs: usize,
    pub ue: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    ues_per_bs: Vec<usize>,
    /// `distances[tx][rx_bs][ue]`: meters from BS `tx` to UE `ue` of BS `rx_bs`.
    distances: Vec<Vec<Vec<f64>>>,
    controller: bool,
}

impl Topology {
    pub fn new(
        ues_per_bs: Vec<usize>,
        distances: Vec<Vec<Vec<f64>>>,
        controller: bool,
    ) -> Result<Self> {
        let bs_count = ues_per_bs.len();
        if bs_count == 0 || ues_per_bs.contains(&0) {
            return Err(Error::Domain("every BS needs at least one UE".into()));
        }
        if distances.len() != bs_count
            || distances.iter().any(|row| {
                row.len() != bs_count || row.iter().zip(&ues_per_bs).any(|(d, &m)| d.len() != m)
            })
        {
            return Err(Error::Domain("distance table shape does not match UEs".into()));
        }
        if distances.iter().flatten().flatten().any(|&d| !(d > 0.0)) {
            return Err(Error::Domain("all distances must be positive".into()));
        }
        Ok(Self {
            ues_per_bs,
            distances,
            controller,
        })
    }

    /// Every BS serves a near UE and a far UE. The near UE is `near.0` meters
    /// from its BS and `near.1` from every other BS; likewise for `far`.
    pub fn symmetric(bs_count: usize, near: (f64, f64), far: (f64, f64)) -> Result<Self> {
        let distances = (0..bs_count)
            .map(|tx| {
                (0..bs_count)
                    .map(|rx| {
                        if tx == rx {
                            vec![near.0, far.0]
                        } else {
                            vec![near.1, far.1]
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(vec![2; bs_count], distances, true)
    }

    pub fn bs_count(&self) -> usize {
        self.ues_per_bs.len()
    }

    pub fn ues_per_bs(&self) -> &[usize] {
        &self.ues_per_bs
    }

    pub fn ue_count(&self) -> usize {
        self.ues_per_bs.iter().sum()
    }

    pub fn has_controller(&self) -> bool {
        self.controller
    }

    pub fn distance(&self, tx: usize, rx_bs: usize, ue: usize) -> f64 {
        self.distances[tx][rx_bs][ue]
    }

    /// UEs in serving order: BS-major, then UE index.
    pub fn ues(&self) -> impl Iterator<Item = UeId> + '_ {
        self.ues_per_bs
            .iter()
            .enumerate()
            .flat_map(|(bs, &m)| (0..m).map(move |ue| UeId { bs, ue }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub subcarriers: usize,
    pub bandwidth_hz: f64,
    /// Per-subcarrier BS power `P_b`.
    pub bs_power_w: f64,
    pub controller_power_w: f64,
    pub noise_w: f64,
    pub carrier_ghz: f64,
    pub slot_s: f64,
    pub frame_slots: usize,
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.subcarriers >= 1
            && self.bandwidth_hz > 0.0
            && self.bs_power_w > 0.0
            && self.controller_power_w > 0.0
            && self.noise_w > 0.0
            && self.carrier_ghz > 0.0
            && self.slot_s > 0.0
            && self.frame_slots >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid radio configuration {self:?}")))
        }
    }

    /// Bits carried in one slot on one sub-channel by one bit/s/Hz.
    pub fn bits_per_rate_unit(&self) -> f64 {
        self.bandwidth_hz * self.slot_s
    }

    pub fn power_budget(&self) -> f64 {
        self.subcarriers as f64 * self.bs_power_w
    }

    /// Linear path-loss factor of a link of length `d`.
    pub fn link_gain(&self, d: f64) -> Result<f64> {
        Ok(db_to_linear(-path_loss_at(d, self.carrier_ghz)?))
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            subcarriers: 2,
            bandwidth_hz: 10e6,
            bs_power_w: dbm_to_watts(20.0),
            controller_power_w: dbm_to_watts(25.0),
            noise_w: dbm_to_watts(-85.0),
            carrier_ghz: DEFAULT_CARRIER_GHZ,
            slot_s: 0.1,
            frame_slots: 10,
        }
    }
}

/// Upper bounds on rates and utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub rate_max: f64,
    pub v_max: Vec<f64>,
    pub u_max: Vec<f64>,
}

impl Bounds {
    /// Largest value [`dl_rate`] can return for powers up to `max_power` and
    /// gains up to `max_gain`.
    pub fn rate_bound(max_power: f64, max_gain: f64, noise: f64) -> f64 {
        (1.0 + max_power * max_gain / noise).log2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_loss_matches_hand_values() {
        assert!((path_loss(10.0).unwrap() - 83.604).abs() < 1e-3);
        assert!((path_loss(1.0).unwrap() - 53.604).abs() < 1e-3);
        assert!((path_loss(40.0).unwrap() - 101.666).abs() < 1e-3);
        assert!(path_loss(0.0).is_err());
        assert!(path_loss(-3.0).is_err());
    }

    #[test]
    fn two_level_rayleigh_levels_are_conditional_means() {
        let set = GainLevelSet::rayleigh(2.0, 2).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((set.thresholds()[0] - 2.0 * ln2).abs() < 1e-12);
        assert!((set.value(0) - 2.0 * (1.0 - ln2)).abs() < 1e-12);
        assert!((set.value(1) - 2.0 * (1.0 + ln2)).abs() < 1e-12);
        // Equiprobable cells: the levels average back to the mean.
        assert!(((set.value(0) + set.value(1)) / 2.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantize_boundaries_and_ties() {
        let set = GainLevelSet::rayleigh(1.0, 2).unwrap();
        assert_eq!(quantize_gain(0.0, &set), 0);
        assert_eq!(quantize_gain(1e9, &set), 1);
        assert_eq!(quantize_gain(std::f64::consts::LN_2, &set), 1);
        assert_eq!(quantize_gain(std::f64::consts::LN_2 - 1e-12, &set), 0);
        let four = GainLevelSet::rayleigh(1.0, 4).unwrap();
        assert_eq!(quantize_gain(four.thresholds()[2], &four), 3);
    }

    #[test]
    fn upload_time_examples() {
        assert_eq!(upload_time(1.0, &[1.0], &[0.0], 0.0, 10.0, 1.0), 0.0);
        assert!((upload_time(1.0, &[1.0], &[0.0], 0.5, 10.0, 1.0) - 5.0).abs() < 1e-12);
        let base = upload_time(1.0, &[1.0], &[0.0], 0.5, 10.0, 1.0);
        assert!(upload_time(1.0, &[1.0], &[0.3], 0.5, 10.0, 1.0) > base);
        assert!(upload_time(1.0, &[0.0], &[0.0], 0.5, 10.0, 1.0).is_infinite());
    }

    #[test]
    fn feedback_time_examples() {
        assert_eq!(feedback_time(&[1.0], 2, 0.0, 10.0, 1.0, 1.0), 0.0);
        // Single BS: plain SNR.
        let t = feedback_time(&[3.0], 1, 0.5, 10.0, 1.0, 1.0);
        assert!((t - 5.0 / 4f64.log2()).abs() < 1e-12);
        // Two BSs with P_C h = σ²: SINR 1/3.
        let t = feedback_time(&[1.0], 2, 0.5, 10.0, 1.0, 1.0);
        assert!((t - 5.0 / (4.0f64 / 3.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn round_trip_examples() {
        let g = [0.25, 0.5];
        let rt = round_trip(&[0.0], &[0.0], &g).unwrap();
        assert_eq!((rt.value, rt.unavailable), (0.25, false));
        let rt = round_trip(&[0.1, 0.2], &[0.1, 0.05], &g).unwrap();
        assert_eq!((rt.value, rt.level, rt.unavailable), (0.5, 1, false));
        let rt = round_trip(&[0.9], &[0.0], &g).unwrap();
        assert_eq!((rt.value, rt.unavailable), (0.5, true));
        let rt = round_trip(&[f64::INFINITY], &[0.0], &g).unwrap();
        assert!(rt.unavailable);
    }

    #[test]
    fn dl_rate_examples() {
        assert_eq!(dl_rate(1.0, 1.0, 0.0, 10.0, 10.0, 1.0), 0.0);
        assert_eq!(dl_rate(0.0, 1.0, 0.0, 0.0, 10.0, 1.0), 0.0);
        assert!((dl_rate(1.0, 1.0, 0.0, 0.0, 10.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn queue_step_examples() {
        assert_eq!(queue_step(5.0, 3.0, 2.0), 4.0);
        assert_eq!(queue_step(1.0, 5.0, 0.0), 0.0);
        assert_eq!(queue_step(0.0, 0.0, 7.0), 7.0);
        assert_eq!(queue_step_bits(5, 3, 2), (4, 0));
        assert_eq!(queue_step_bits(1, 5, 0), (0, 4));
    }

    #[test]
    fn default_radio_matches_scenario_constants() {
        let r = RadioConfig::default();
        assert!((r.bs_power_w - 0.1).abs() < 1e-15);
        assert!((linear_to_db(r.noise_w) + 115.0).abs() < 1e-9);
        assert_eq!(r.bits_per_rate_unit(), 1e6);
    }

    #[test]
    fn topology_rejects_bad_shapes() {
        assert!(Topology::symmetric(2, (10.0, 40.0), (20.0, 30.0)).is_ok());
        assert!(Topology::symmetric(2, (0.0, 40.0), (20.0, 30.0)).is_err());
        assert!(Topology::new(vec![1], vec![vec![vec![1.0, 2.0]]], false).is_err());
    }

    proptest! {
        #[test]
        fn queue_step_never_below_arrival(q in 0.0..1e6f64, r in 0.0..1e6f64, a in 0.0..1e6f64) {
            let next = queue_step(q, r, a);
            prop_assert!(next >= a && next >= 0.0);
        }

        #[test]
        fn rate_monotone_and_bounded(
            p in 0.0..1.0f64, dp in 0.0..1.0f64, h in 0.0..1.0f64, i in 0.0..1.0f64,
            di in 0.0..1.0f64, s in 0.0..10.0f64, ds in 0.0..1.0f64,
        ) {
            let r = dl_rate(p, h, i, s, 10.0, 0.1);
            prop_assert!(dl_rate(p + dp, h, i, s, 10.0, 0.1) >= r);
            prop_assert!(dl_rate(p, h + dp, i, s, 10.0, 0.1) >= r);
            prop_assert!(dl_rate(p, h, i + di, s, 10.0, 0.1) <= r);
            prop_assert!(dl_rate(p, h, i, (s + ds).min(10.0), 10.0, 0.1) <= r);
            prop_assert!(r <= Bounds::rate_bound(2.0, 1.0, 0.1));
        }

        #[test]
        fn upload_time_linear_in_rate_and_frame(r in 0.01..5.0f64, t0 in 1.0..20.0f64, h in 0.1..10.0f64) {
            let base = upload_time(1.0, &[h, h / 2.0], &[0.1, 0.2], r, t0, 1.0);
            prop_assert!((upload_time(1.0, &[h, h / 2.0], &[0.1, 0.2], 2.0 * r, t0, 1.0) - 2.0 * base).abs() < 1e-9 * base);
            prop_assert!((upload_time(1.0, &[h, h / 2.0], &[0.1, 0.2], r, 3.0 * t0, 1.0) - 3.0 * base).abs() < 1e-9 * base);
        }

        #[test]
        fn round_trip_in_levels_and_not_below_raw(u in 0.0..1.0f64, f in 0.0..1.0f64) {
            let g = [0.25, 0.5];
            let rt = round_trip(&[u], &[f], &g).unwrap();
            prop_assert!(g.contains(&rt.value));
            prop_assert!(rt.unavailable || rt.value >= rt.raw);
        }
    }
}
