//! Experiment configuration, orchestration and CSV emission.
//!
//! Config files hold one `key = value` pair per line; `#` starts a comment.
//! Unspecified keys take the reference-scenario defaults.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::controller_stats::{allocate, EstimatedStatistics};
use crate::game::{check_epsilon_cce, epsilon_gap, CceReport, InterferenceModel, Utility};
use crate::model::{dbm_to_watts, Topology};
use crate::sim::{compute_ratios, run_episode, Metrics, Mode, Scenario};
use crate::solver::SolverOptions;
use crate::{Error, Result};

/// Version tag written in the first column of every per-slot row.
pub const SLOT_SCHEMA: &str = "slot-v1";
/// Version tag written in the first column of every summary row.
pub const SUMMARY_SCHEMA: &str = "summary-v1";

const KEYS: &[&str] = &[
    "mode",
    "frames",
    "seeds",
    "v",
    "kappa",
    "fronthaul_snr_db",
    "sigma_levels",
    "gain_levels",
    "subcarriers",
    "bandwidth_hz",
    "bs_power_dbm",
    "controller_power_dbm",
    "noise_dbm",
    "carrier_ghz",
    "slot_s",
    "frame_slots",
    "bs_count",
    "near_m",
    "far_m",
    "arrival_mbps",
    "unit_rate",
    "packet_bits",
    "arrival_cap",
    "warmup_slots",
    "out_dir",
    "sweep",
];

/// Swept parameter and its values.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    None,
    V(Vec<f64>),
    Snr(Vec<f64>),
    BsCount(Vec<usize>),
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepPoint {
    Base,
    V(f64),
    Snr(f64),
    BsCount(usize),
}

impl Sweep {
    pub fn points(&self) -> Vec<SweepPoint> {
        match self {
            Sweep::None => vec![SweepPoint::Base],
            Sweep::V(v) => v.iter().map(|&x| SweepPoint::V(x)).collect(),
            Sweep::Snr(v) => v.iter().map(|&x| SweepPoint::Snr(x)).collect(),
            Sweep::BsCount(v) => v.iter().map(|&x| SweepPoint::BsCount(x)).collect(),
        }
    }
}

impl SweepPoint {
    pub fn axis(&self) -> &'static str {
        match self {
            SweepPoint::Base => "run",
            SweepPoint::V(_) => "V",
            SweepPoint::Snr(_) => "snr",
            SweepPoint::BsCount(_) => "bs",
        }
    }

    pub fn value(&self) -> String {
        match self {
            SweepPoint::Base => "base".into(),
            SweepPoint::V(x) | SweepPoint::Snr(x) => format!("{x}"),
            SweepPoint::BsCount(n) => n.to_string(),
        }
    }
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.axis(), self.value())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub base: Scenario,
    /// Own-cell and cross-cell distances (m) of the near UE.
    pub near: (f64, f64),
    /// Own-cell and cross-cell distances (m) of the far UE.
    pub far: (f64, f64),
    /// Per-BS arrival means (bit/s), cycled when the BS count grows.
    pub arrival_pattern: Vec<Vec<f64>>,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        let base = Scenario::reference(Mode::Realization);
        Self {
            arrival_pattern: base.arrival_bps.clone(),
            base,
            near: (10.0, 40.0),
            far: (20.0, 30.0),
            sweep: Sweep::None,
            seeds: vec![1],
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentPlan {
    /// Scenario for one sweep point and seed.
    pub fn scenario(&self, point: SweepPoint, seed: u64) -> Result<Scenario> {
        let mut s = self.base.clone();
        s.seed = seed;
        match point {
            SweepPoint::Base => {}
            SweepPoint::V(v) => s.v = v,
            SweepPoint::Snr(snr) => s.fronthaul_snr_db = snr,
            SweepPoint::BsCount(n) => self.set_bs_count(&mut s, n)?,
        }
        s.validate()?;
        Ok(s)
    }

    fn set_bs_count(&self, s: &mut Scenario, n: usize) -> Result<()> {
        s.topology = Topology::symmetric(n, self.near, self.far)?;
        s.arrival_bps = (0..n)
            .map(|b| self.arrival_pattern[b % self.arrival_pattern.len()].clone())
            .collect();
        Ok(())
    }

    /// Every `(point, seed)` pair in output order.
    pub fn jobs(&self) -> Vec<(SweepPoint, u64)> {
        self.sweep
            .points()
            .into_iter()
            .flat_map(|p| self.seeds.iter().map(move |&s| (p, s)))
            .collect()
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{key}: cannot parse `{}`", text.trim())))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, text: &str) -> Result<Vec<T>> {
    let items: Vec<T> = text
        .split(',')
        .map(|t| parse_num(line, key, t))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(parse_err(line, format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_pair(line: usize, key: &str, text: &str) -> Result<(f64, f64)> {
    match parse_list::<f64>(line, key, text)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(parse_err(line, format!("{key}: expected two values"))),
    }
}

/// `a,b,c` or the half-open range `a..b`.
fn parse_seeds(line: usize, text: &str) -> Result<Vec<u64>> {
    let seeds = match text.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (parse_num(line, "seeds", a)?, parse_num(line, "seeds", b)?);
            (a..b).collect()
        }
        None => parse_list(line, "seeds", text)?,
    };
    if seeds.is_empty() {
        return Err(parse_err(line, "seeds: empty range"));
    }
    Ok(seeds)
}

fn parse_sweep(line: usize, text: &str) -> Result<Sweep> {
    let (axis, values) = text
        .trim()
        .split_once(char::is_whitespace)
        .ok_or_else(|| parse_err(line, "sweep: expected `<axis> <v1,v2,...>`"))?;
    let sweep = match axis.to_ascii_lowercase().as_str() {
        "v" => {
            let v: Vec<f64> = parse_list(line, "sweep", values)?;
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(parse_err(line, "sweep: V values must be finite and nonnegative"));
            }
            Sweep::V(v)
        }
        "snr" => {
            let v: Vec<f64> = parse_list(line, "sweep", values)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(parse_err(line, "sweep: SNR values must be finite"));
            }
            Sweep::Snr(v)
        }
        "bs" | "bs_count" => {
            let v: Vec<usize> = parse_list(line, "sweep", values)?;
            if v.contains(&0) {
                return Err(parse_err(line, "sweep: BS counts must be positive"));
            }
            Sweep::BsCount(v)
        }
        other => return Err(parse_err(line, format!("sweep: unknown axis `{other}`"))),
    };
    Ok(sweep)
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentPlan> {
    let mut entries: HashMap<&str, (usize, &str)> = HashMap::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        last_line = line;
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(parse_err(line, format!("unknown key `{key}`")));
        }
        if entries.insert(key, (line, value.trim())).is_some() {
            return Err(parse_err(line, format!("duplicate key `{key}`")));
        }
    }

    let mut plan = ExperimentPlan::default();
    let base = &mut plan.base;
    let mut bs_count = base.topology.bs_count();
    for &key in KEYS {
        let Some(&(line, value)) = entries.get(key) else { continue };
        match key {
            "mode" => base.mode = value.parse().map_err(|e: Error| parse_err(line, e.to_string()))?,
            "frames" => base.frames = parse_num(line, key, value)?,
            "seeds" => plan.seeds = parse_seeds(line, value)?,
            "v" => base.v = parse_num(line, key, value)?,
            "kappa" => base.kappa = parse_num(line, key, value)?,
            "fronthaul_snr_db" => base.fronthaul_snr_db = parse_num(line, key, value)?,
            "sigma_levels" => base.sigma_levels = parse_list(line, key, value)?,
            "gain_levels" => base.gain_levels = parse_num(line, key, value)?,
            "subcarriers" => base.radio.subcarriers = parse_num(line, key, value)?,
            "bandwidth_hz" => base.radio.bandwidth_hz = parse_num(line, key, value)?,
            "bs_power_dbm" => base.radio.bs_power_w = dbm_to_watts(parse_num(line, key, value)?),
            "controller_power_dbm" => {
                base.radio.controller_power_w = dbm_to_watts(parse_num(line, key, value)?)
            }
            "noise_dbm" => base.radio.noise_w = dbm_to_watts(parse_num(line, key, value)?),
            "carrier_ghz" => base.radio.carrier_ghz = parse_num(line, key, value)?,
            "slot_s" => base.radio.slot_s = parse_num(line, key, value)?,
            "frame_slots" => base.radio.frame_slots = parse_num(line, key, value)?,
            "bs_count" => bs_count = parse_num(line, key, value)?,
            "near_m" => plan.near = parse_pair(line, key, value)?,
            "far_m" => plan.far = parse_pair(line, key, value)?,
            "arrival_mbps" => {
                plan.arrival_pattern = value
                    .split(';')
                    .map(|row| {
                        let (a, b) = parse_pair(line, key, row)?;
                        Ok(vec![a * 1e6, b * 1e6])
                    })
                    .collect::<Result<_>>()?
            }
            "unit_rate" => base.unit_rate = parse_num(line, key, value)?,
            "packet_bits" => base.packet_bits = parse_num(line, key, value)?,
            "arrival_cap" => base.arrival_cap = parse_num(line, key, value)?,
            "warmup_slots" => base.warmup_slots = parse_num(line, key, value)?,
            "out_dir" => plan.out_dir = PathBuf::from(value),
            "sweep" => plan.sweep = parse_sweep(line, value)?,
            _ => unreachable!("key list and match arms agree"),
        }
    }

    let at = |key: &str| entries.get(key).map_or(last_line, |e| e.0);
    if bs_count == 0 {
        return Err(parse_err(at("bs_count"), "bs_count must be positive"));
    }
    let layout = plan.clone();
    layout
        .set_bs_count(&mut plan.base, bs_count)
        .map_err(|e| parse_err(at("near_m").max(at("far_m")), e.to_string()))?;
    plan.base
        .validate()
        .map_err(|e| parse_err(last_line, e.to_string()))?;
    for point in plan.sweep.points() {
        plan.scenario(point, plan.seeds[0])
            .map_err(|e| parse_err(at("sweep"), format!("sweep point {point}: {e}")))?;
    }
    Ok(plan)
}

/// File stem `<mode>_<axis>=<value>_seed=<s>`.
pub fn file_stem(mode: Mode, point: SweepPoint, seed: u64) -> String {
    format!("{mode}_{point}_seed={seed}")
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Writes the per-slot log of one episode.
pub fn write_slot_csv(path: &Path, metrics: &Metrics) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["schema", "slot", "frame", "varsigma"].map(String::from).to_vec();
    let ues = &metrics.ues_per_bs;
    for kind in ["rate", "queue"] {
        for (b, &m) in ues.iter().enumerate() {
            header.extend((0..m).map(|u| format!("{kind}_b{b}_u{u}")));
        }
    }
    header.extend((0..ues.len()).map(|b| format!("power_b{b}")));
    header.extend(
        ["sum_rate", "total_queue", "avg_sum_rate", "frame_kind", "unavailable", "warmup"].map(String::from),
    );
    w.write_record(&header)?;

    for (r, avg) in metrics.slots.iter().zip(metrics.moving_average_sum_rate()) {
        let mut row = vec![
            SLOT_SCHEMA.to_string(),
            r.slot.to_string(),
            r.frame.to_string(),
            fmt_f(r.varsigma),
        ];
        row.extend(r.rates.iter().map(|&x| fmt_f(x)));
        row.extend(r.queues.iter().map(u64::to_string));
        row.extend(r.power.iter().map(|&x| fmt_f(x)));
        row.push(fmt_f(r.rates.iter().sum()));
        row.push(r.queues.iter().sum::<u64>().to_string());
        row.push(fmt_f(avg));
        row.push(r.kind.label().to_string());
        row.push(u8::from(r.kind == crate::sim::FrameKind::Unavailable).to_string());
        row.push(u8::from(r.slot < metrics.warmup_slots).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Largest `|q(T)|/T` over all virtual queues, relative to `v_max`.
pub fn virtual_queue_ratio(metrics: &Metrics) -> Option<f64> {
    let vq = metrics.virtual_queues.as_ref()?;
    let t = vq.replayed_slots.max(1) as f64;
    let scale = vq.v_max.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    Some(vq.queues.values().map(|q| q.abs() / t / scale).fold(0.0, f64::max))
}

/// Writes the one-row summary of an episode against its non-SDN baseline.
pub fn write_summary_csv(
    path: &Path,
    scenario: &Scenario,
    point: SweepPoint,
    metrics: &Metrics,
    baseline: &Metrics,
) -> Result<()> {
    let ratios = compute_ratios(metrics, baseline);
    let (eta_rate, eta_queue) = match ratios {
        Ok((r, q)) => (fmt_f(r), fmt_f(q)),
        Err(_) => (String::new(), String::new()),
    };
    let (up, down) = metrics
        .payload
        .map_or((String::new(), String::new()), |(u, d)| (u.to_string(), d.to_string()));
    let replayed = metrics
        .virtual_queues
        .as_ref()
        .map_or(String::new(), |v| v.replayed_slots.to_string());
    let vq_ratio = virtual_queue_ratio(metrics).map_or(String::new(), fmt_f);

    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "schema",
        "mode",
        "axis",
        "value",
        "seed",
        "bs_count",
        "frames",
        "slots",
        "warmup_slots",
        "v",
        "kappa",
        "fronthaul_snr_db",
        "long_run_sum_rate",
        "long_run_total_queue",
        "baseline_sum_rate",
        "baseline_total_queue",
        "eta_rate",
        "eta_queue",
        "mean_varsigma",
        "unavailable_frames",
        "upload_values",
        "feedback_values",
        "conservation",
        "replayed_slots",
        "virtual_queue_ratio",
    ])?;
    w.write_record([
        SUMMARY_SCHEMA.to_string(),
        metrics.mode.to_string(),
        point.axis().to_string(),
        point.value(),
        metrics.seed.to_string(),
        scenario.topology.bs_count().to_string(),
        metrics.frames.len().to_string(),
        metrics.slots.len().to_string(),
        metrics.warmup_slots.to_string(),
        fmt_f(scenario.v),
        fmt_f(scenario.kappa),
        fmt_f(scenario.fronthaul_snr_db),
        fmt_f(metrics.long_run_sum_rate()),
        fmt_f(metrics.long_run_total_queue()),
        fmt_f(baseline.long_run_sum_rate()),
        fmt_f(baseline.long_run_total_queue()),
        eta_rate,
        eta_queue,
        fmt_f(metrics.mean_varsigma()),
        metrics.unavailable_frames().to_string(),
        up,
        down,
        u8::from(metrics.conservation.holds()).to_string(),
        replayed,
        vq_ratio,
    ])?;
    w.flush()?;
    Ok(())
}

fn with_path(path: &Path, r: Result<()>) -> Result<PathBuf> {
    r.map(|_| path.to_path_buf()).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

fn run_job(plan: &ExperimentPlan, point: SweepPoint, seed: u64) -> Result<[PathBuf; 2]> {
    let scenario = plan.scenario(point, seed)?;
    let metrics = run_episode(&scenario)?;
    let baseline = if scenario.mode.is_sdn() {
        run_episode(&Scenario { mode: Mode::NonSdn, ..scenario.clone() })?
    } else {
        metrics.clone()
    };
    let stem = file_stem(scenario.mode, point, seed);
    let slot_path = plan.out_dir.join(format!("{stem}.csv"));
    let summary_path = plan.out_dir.join(format!("{stem}_summary.csv"));
    Ok([
        with_path(&slot_path, write_slot_csv(&slot_path, &metrics))?,
        with_path(
            &summary_path,
            write_summary_csv(&summary_path, &scenario, point, &metrics, &baseline),
        )?,
    ])
}

/// Outcome of a plan: written files and per-job failures.
#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub failures: Vec<(SweepPoint, u64, Error)>,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every `(point, seed)` job on the worker pool and writes its CSVs.
pub fn run_plan(plan: &ExperimentPlan) -> Result<RunReport> {
    fs::create_dir_all(&plan.out_dir).map_err(|e| Error::File {
        path: plan.out_dir.clone(),
        source: Box::new(e.into()),
    })?;
    let outcomes: Vec<_> = plan
        .jobs()
        .into_par_iter()
        .map(|(p, s)| (p, s, run_job(plan, p, s)))
        .collect();
    let mut report = RunReport::default();
    for (p, s, r) in outcomes {
        match r {
            Ok(files) => report.files.extend(files),
            Err(e) => {
                log::error!("{p} seed {s}: {e}");
                report.failures.push((p, s, e));
            }
        }
    }
    Ok(report)
}

/// Equilibrium audit of the statistics controller's strategy.
#[derive(Debug)]
pub struct AuditReport {
    pub auxiliary: CceReport,
    pub epsilon: f64,
    pub per_bs_gap: Vec<f64>,
    pub expected: CceReport,
}

/// Solves the statistics program under uniform state statistics and the
/// scenario's arrival means, then checks the ε-CCE conditions under both
/// utilities by exhaustive deviation enumeration.
pub fn audit(scenario: &Scenario) -> Result<AuditReport> {
    let game = scenario.game()?;
    let per_rate = scenario.radio.bits_per_rate_unit();
    let arrivals = scenario
        .mean_bits_per_slot()
        .iter()
        .map(|a| a.iter().sum::<f64>() / per_rate)
        .collect();
    let stats = EstimatedStatistics::uniform(&game, arrivals);
    let (strategy, _) = allocate(&game, &stats, &SolverOptions::default())?;
    let dist = stats.distribution(&game)?;
    let auxiliary = check_epsilon_cce(&game, &strategy, &dist, 1e-6, Utility::Auxiliary)?;
    let model = InterferenceModel::uniform(&game);
    let gap = epsilon_gap(&game, &strategy, &dist, &model)?;
    let expected = check_epsilon_cce(&game, &strategy, &dist, gap.epsilon + 1e-6, Utility::Expected(&model))?;
    Ok(AuditReport {
        auxiliary,
        epsilon: gap.epsilon,
        per_bs_gap: gap.per_bs,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference() {
        let plan = parse_config("").unwrap();
        assert_eq!(plan, ExperimentPlan::default());
        assert_eq!(plan.base, Scenario::reference(Mode::Realization));
        assert_eq!(plan.seeds, vec![1]);
        assert_eq!(plan.jobs().len(), 1);
    }

    #[test]
    fn comments_and_whitespace() {
        let plan = parse_config("# header\n\n  frames = 20  # short\nmode=statistics\n").unwrap();
        assert_eq!(plan.base.frames, 20);
        assert_eq!(plan.base.mode, Mode::Statistics);
    }

    #[test]
    fn non_sdn_mode() {
        let plan = parse_config("mode=non-sdn").unwrap();
        assert_eq!(plan.base.mode, Mode::NonSdn);
    }

    #[test]
    fn v_sweep() {
        let plan = parse_config("sweep=V 0,10,100,1000\nseeds=1..11").unwrap();
        assert_eq!(plan.sweep, Sweep::V(vec![0.0, 10.0, 100.0, 1000.0]));
        assert_eq!(plan.seeds.len(), 10);
        assert_eq!(plan.jobs().len(), 40);
        let s = plan.scenario(SweepPoint::V(1000.0), 7).unwrap();
        assert_eq!((s.v, s.seed), (1000.0, 7));
    }

    #[test]
    fn bs_sweep_cycles_arrivals() {
        let plan = parse_config("sweep=bs 1,3\narrival_mbps=8,8;5,5").unwrap();
        let s = plan.scenario(SweepPoint::BsCount(3), 1).unwrap();
        assert_eq!(s.topology.bs_count(), 3);
        assert_eq!(s.arrival_bps, vec![vec![8e6, 8e6], vec![5e6, 5e6], vec![8e6, 8e6]]);
    }

    #[test]
    fn radio_keys() {
        let plan = parse_config("noise_dbm=-85\nbs_power_dbm=20\nsigma_levels=0.25,0.5,1").unwrap();
        assert!((plan.base.radio.noise_w - 10f64.powf(-11.5)).abs() < 1e-20);
        assert_eq!(plan.base.sigma_levels, vec![0.25, 0.5, 1.0]);
    }

    fn line_of(text: &str) -> usize {
        match parse_config(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of("frames=10\nbogus=1"), 2);
        assert_eq!(line_of("# c\nframes=ten"), 2);
        assert_eq!(line_of("mode=sometimes"), 1);
        assert_eq!(line_of("frames=1\nframes=2"), 2);
        assert_eq!(line_of("\nno equals sign"), 2);
        assert_eq!(line_of("sweep=V -1,2"), 1);
        assert_eq!(line_of("sweep=power 1"), 1);
        assert_eq!(line_of("x=1\n"), 1);
        assert_eq!(line_of("seeds=5..5"), 1);
        assert_eq!(line_of("frames=0"), 1);
        assert_eq!(line_of("frames=3\nsigma_levels=0.5,0.25"), 2);
        assert_eq!(line_of("arrival_mbps=8,8,8"), 1);
    }

    #[test]
    fn stems() {
        assert_eq!(file_stem(Mode::Statistics, SweepPoint::V(100.0), 3), "statistics_V=100_seed=3");
        assert_eq!(file_stem(Mode::NonSdn, SweepPoint::Snr(-10.0), 1), "non-sdn_snr=-10_seed=1");
        assert_eq!(file_stem(Mode::Realization, SweepPoint::Base, 1), "realization_run=base_seed=1");
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("fhsdn-cli-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn single_run_writes_two_deterministic_files() {
        let dir = temp_dir("single");
        let text = format!("frames=3\nwarmup_slots=0\nout_dir={}", dir.display());
        let plan = parse_config(&text).unwrap();
        let report = run_plan(&plan).unwrap();
        assert!(report.succeeded());
        assert_eq!(report.files.len(), 2);
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 2);
        let first: Vec<Vec<u8>> = report.files.iter().map(|p| fs::read(p).unwrap()).collect();

        let slot = String::from_utf8(first[0].clone()).unwrap();
        let mut lines = slot.lines();
        let width = lines.next().unwrap().split(',').count();
        assert_eq!(lines.clone().count(), 30);
        assert!(lines.all(|l| l.starts_with(SLOT_SCHEMA) && l.split(',').count() == width));

        let again = run_plan(&plan).unwrap();
        let second: Vec<Vec<u8>> = again.files.iter().map(|p| fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_file_count() {
        let dir = temp_dir("sweep");
        let text = format!(
            "mode=non-sdn\nframes=1\nwarmup_slots=0\nsweep=V 0,10,100,1000\nseeds=1..11\nout_dir={}",
            dir.display()
        );
        let report = run_plan(&parse_config(&text).unwrap()).unwrap();
        assert!(report.succeeded());
        assert_eq!(report.files.len(), 80);
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 80);
        fs::remove_dir_all(&dir).unwrap();
    }
}
