//! Monte Carlo harness: success-detection metric, closed-form training
//! overhead, `key = value` config parsing, per-trial seed derivation, and
//! CSV output.

use crate::channel::{draw_channel, snr_to_noise, AngleMode, ChannelRealization, MeasurementModel};
use crate::training::{
    exhaustive_sweep, train_baseline_subtraction, train_dynamic, SearchTrace, TrainingOutcome,
};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

/// Training method simulated per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Hierarchical search with dynamic codebook nulling.
    Dynamic,
    /// Hierarchical search with static codebooks and measurement subtraction.
    BaselineSubtraction,
    /// Full bottom-layer sweep (single-path oracle).
    Exhaustive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dynamic => "dynamic",
            Method::BaselineSubtraction => "baseline_subtraction",
            Method::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(Method::Dynamic),
            "baseline_subtraction" => Ok(Method::BaselineSubtraction),
            "exhaustive" => Ok(Method::Exhaustive),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected dynamic, baseline_subtraction, or exhaustive)"
            ))),
        }
    }
}

impl FromStr for AngleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(AngleMode::Continuous),
            "on_grid" => Ok(AngleMode::OnGrid),
            other => Err(Error::InvalidArgument(format!(
                "unknown angle mode `{other}` (expected continuous or on_grid)"
            ))),
        }
    }
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nt: usize,
    pub nr: usize,
    /// True path count of each drawn channel.
    pub l: usize,
    /// Paths the training detects.
    pub l_d: usize,
    /// Layer where the search starts with a full scan.
    pub s0: u32,
    pub power: f64,
    pub snr_db_list: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub method: Method,
    pub angle_mode: AngleMode,
}

impl Default for ExperimentConfig {
    /// The reference configuration: 32x32 arrays, three paths, start layer
    /// 2, a thousand trials over -5..20 dB in 2.5 dB steps.
    fn default() -> Self {
        Self {
            nt: 32,
            nr: 32,
            l: 3,
            l_d: 3,
            s0: 2,
            power: 1.0,
            snr_db_list: (0..11).map(|k| -5.0 + 2.5 * k as f64).collect(),
            trials: 1000,
            seed: 1,
            method: Method::Dynamic,
            angle_mode: AngleMode::Continuous,
        }
    }
}

impl ExperimentConfig {
    /// Checks every cross-field invariant, naming the violated one.
    pub fn validate(&self) -> Result<()> {
        let constraint = |msg: &str| Err(Error::ConstraintViolation(msg.to_string()));
        if !self.nt.is_power_of_two() || !self.nr.is_power_of_two() {
            return constraint("Nt and Nr must be powers of two");
        }
        if self.l < 1 {
            return constraint("L >= 1");
        }
        if self.l_d < 1 {
            return constraint("L_d >= 1");
        }
        if self.l_d > self.l {
            return constraint("L_d <= L");
        }
        let max_s0 = self.nt.min(self.nr).trailing_zeros();
        if self.s0 > max_s0 {
            return constraint("S0 <= log2 N");
        }
        if self.trials < 1 {
            return constraint("trials >= 1");
        }
        if !self.power.is_finite() || self.power <= 0.0 {
            return constraint("P > 0");
        }
        if self.snr_db_list.is_empty() {
            return constraint("snr_db_list nonempty");
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return constraint("snr_db_list finite");
        }
        if self.method == Method::Exhaustive && self.l_d != 1 {
            return constraint("method=exhaustive requires L_d = 1");
        }
        if self.angle_mode == AngleMode::OnGrid && self.l > self.nt * self.nr {
            return constraint("L <= Nt*Nr for on_grid angles");
        }
        Ok(())
    }
}

/// One aggregated point of a success-rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub trials: u64,
    pub successes: u64,
    /// `successes / trials`, exact.
    pub success_rate: f64,
    /// Half-width of the 95% Wilson score interval.
    pub wilson_halfwidth: f64,
    pub mean_measurements: f64,
    /// Trials failed by construction: coinciding true bin pairs, or a
    /// degenerate codebook mid-search.
    pub degenerate_trials: u64,
}

/// Bottom-layer bin of a direction cosine: the smallest `i` with
/// `omega <= -1 + 2i/n`; `omega = -1` maps to bin 1.
pub fn true_bin(omega: f64, n: usize) -> Result<usize> {
    if omega.is_nan() || omega.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "direction cosine {omega} outside [-1, 1]"
        )));
    }
    let i = ((omega + 1.0) * n as f64 / 2.0).ceil() as usize;
    Ok(i.clamp(1, n))
}

/// True when every true path's (departure bin, arrival bin) pair is matched
/// one-to-one by a detected pair. With as many detections as paths this is
/// multiset equality.
pub fn success_detection(outcome: &TrainingOutcome, ch: &ChannelRealization) -> bool {
    let mut available: HashMap<(usize, usize), usize> = HashMap::new();
    for &pair in &outcome.detected {
        *available.entry(pair).or_insert(0) += 1;
    }
    for path in ch.paths() {
        let p = true_bin(path.aod, ch.nt()).expect("validated on construction");
        let q = true_bin(path.aoa, ch.nr()).expect("validated on construction");
        match available.get_mut(&(p, q)) {
            Some(count) if *count > 0 => *count -= 1,
            _ => return false,
        }
    }
    true
}

/// Closed-form overhead formulas compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverheadMethod {
    /// Dynamic-codebook hierarchical search.
    Dynamic,
    /// Subtraction-based hierarchical search (same count as dynamic).
    Hs,
    /// Multi-path decomposition and recovery.
    Mdr,
    /// Adaptive compressed sensing with `K` codewords per stage.
    Acs,
}

impl OverheadMethod {
    pub fn name(self) -> &'static str {
        match self {
            OverheadMethod::Dynamic => "dynamic",
            OverheadMethod::Hs => "hs",
            OverheadMethod::Mdr => "mdr",
            OverheadMethod::Acs => "acs",
        }
    }
}

impl FromStr for OverheadMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(OverheadMethod::Dynamic),
            "hs" => Ok(OverheadMethod::Hs),
            "mdr" => Ok(OverheadMethod::Mdr),
            "acs" => Ok(OverheadMethod::Acs),
            other => Err(Error::InvalidArgument(format!(
                "unknown overhead method `{other}`"
            ))),
        }
    }
}

/// Total training measurements of a complete multi-path session:
/// `Ld (4^S0 + 4 log2 Nt - 4 S0)` for dynamic and hs,
/// `Ld (4^S0 + 4 log2 Nt - 4 S0 + 9)` for mdr, and
/// `K^2 Ld^3 log2 Nt` for acs.
pub fn overhead(method: OverheadMethod, nt: usize, l_d: usize, s0: u32, k: usize) -> Result<u64> {
    if !nt.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "array size {nt} is not a power of two"
        )));
    }
    let log_nt = nt.trailing_zeros() as u64;
    if s0 as u64 > log_nt {
        return Err(Error::InvalidArgument(format!(
            "start layer {s0} exceeds log2({nt})"
        )));
    }
    if l_d < 1 {
        return Err(Error::InvalidArgument("path count must be >= 1".into()));
    }
    let l_d = l_d as u64;
    let per_path = 4u64.pow(s0) + 4 * log_nt - 4 * s0 as u64;
    Ok(match method {
        OverheadMethod::Dynamic | OverheadMethod::Hs => l_d * per_path,
        OverheadMethod::Mdr => l_d * (per_path + 9),
        OverheadMethod::Acs => {
            if k < 2 {
                return Err(Error::InvalidArgument(format!(
                    "acs stage width K = {k} must be >= 2"
                )));
            }
            (k as u64).pow(2) * l_d.pow(3) * log_nt
        }
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed derived from the experiment seed, the SNR
/// point index, and the trial index. Methods share channels at equal
/// indices.
pub fn trial_seed(seed: u64, snr_index: u64, trial_index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ snr_index) ^ trial_index)
}

/// Half-width of the 95% Wilson score interval for `successes / trials`.
pub fn wilson_halfwidth(successes: u64, trials: u64) -> f64 {
    let z = 1.96f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

fn duplicate_true_bins(ch: &ChannelRealization) -> bool {
    let mut seen = BTreeSet::new();
    for path in ch.paths() {
        let p = true_bin(path.aod, ch.nt()).expect("validated");
        let q = true_bin(path.aoa, ch.nr()).expect("validated");
        if !seen.insert((p, q)) {
            return true;
        }
    }
    false
}

/// Runs the configured trials at every SNR point and aggregates each into a
/// [`CurvePoint`]. Per-trial seeds come from [`trial_seed`], so reruns (and
/// parallel partitions of the trial loop) reproduce identical points.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(cfg.snr_db_list.len());
    for (si, &snr_db) in cfg.snr_db_list.iter().enumerate() {
        let noise_var = snr_to_noise(snr_db, cfg.power);
        let mut successes = 0u64;
        let mut measurements = 0u64;
        let mut degenerate = 0u64;
        for ti in 0..cfg.trials {
            let mut rng =
                ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, si as u64, ti));
            let ch = draw_channel(cfg.nt, cfg.nr, cfg.l, cfg.angle_mode, &mut rng)?;
            let mut mm = MeasurementModel::new(cfg.power, noise_var, rng)?;
            let ambiguous = duplicate_true_bins(&ch);
            let outcome = match cfg.method {
                Method::Dynamic => train_dynamic(cfg.nt, cfg.nr, cfg.l_d, cfg.s0, &ch, &mut mm),
                Method::BaselineSubtraction => {
                    train_baseline_subtraction(cfg.nt, cfg.nr, cfg.l_d, cfg.s0, &ch, &mut mm)
                }
                Method::Exhaustive => exhaustive_sweep(&ch, &mut mm).map(|(p, q)| {
                    TrainingOutcome {
                        detected: vec![(p, q)],
                        tx_indices: BTreeSet::from([p]),
                        rx_indices: BTreeSet::from([q]),
                        total_measurements: mm.count(),
                        traces: vec![SearchTrace {
                            entries: Vec::new(),
                            measurements_used: mm.count(),
                        }],
                    }
                }),
            };
            measurements += mm.count();
            match outcome {
                Ok(outcome) => {
                    if ambiguous {
                        degenerate += 1;
                    } else if success_detection(&outcome, &ch) {
                        successes += 1;
                    }
                }
                Err(Error::DegenerateCodebook(_)) => degenerate += 1,
                Err(e) => return Err(e),
            }
        }
        points.push(CurvePoint {
            snr_db,
            trials: cfg.trials,
            successes,
            success_rate: successes as f64 / cfg.trials as f64,
            wilson_halfwidth: wilson_halfwidth(successes, cfg.trials),
            mean_measurements: measurements as f64 / cfg.trials as f64,
            degenerate_trials: degenerate,
        });
    }
    Ok(points)
}

/// CSV column header shared by `run` and `sweep` outputs.
pub const CSV_HEADER: &str =
    "method,snr_db,trials,successes,success_rate,wilson_halfwidth,mean_measurements,degenerate_trials";

/// Writes one or more labelled curves as CSV with LF line endings.
pub fn write_csv<W: Write>(mut out: W, series: &[(Method, Vec<CurvePoint>)]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (method, points) in series {
        for p in points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                method.name(),
                p.snr_db,
                p.trials,
                p.successes,
                p.success_rate,
                p.wilson_halfwidth,
                p.mean_measurements,
                p.degenerate_trials
            )?;
        }
    }
    Ok(())
}

/// Parses a `-5..20 step 2.5` range or a comma-separated list of dB values.
pub(crate) fn parse_snr_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    if let Some((range, step)) = value.split_once("step") {
        let (lo, hi) = range
            .trim()
            .split_once("..")
            .ok_or_else(|| format!("expected `lo..hi step d`, got `{value}`"))?;
        let lo: f64 = lo.trim().parse().map_err(|e| format!("range start: {e}"))?;
        let hi: f64 = hi.trim().parse().map_err(|e| format!("range end: {e}"))?;
        let step: f64 = step.trim().parse().map_err(|e| format!("range step: {e}"))?;
        if step.is_nan() || step <= 0.0 {
            return Err(format!("range step {step} must be positive"));
        }
        if hi < lo {
            return Err(format!("empty range {lo}..{hi}"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| lo + step * k as f64).collect())
    } else {
        value
            .split(',')
            .map(|part| part.trim().parse::<f64>().map_err(|e| format!("{part}: {e}")))
            .collect()
    }
}

/// Parses line-oriented `key = value` config text. `#` starts a comment,
/// keys are case-insensitive, unknown keys are rejected with their line
/// number, and missing keys take the defaults of
/// [`ExperimentConfig::default`]. The returned config is validated.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg = parse_config_unchecked(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// [`parse_config`] without the final invariant check, so CLI flag
/// overrides can be applied before validating the effective config.
pub(crate) fn parse_config_unchecked(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno, message };
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{body}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        if value.is_empty() {
            return Err(err(format!("empty value for key `{key}`")));
        }
        match key.as_str() {
            "nt" => cfg.nt = value.parse().map_err(|e| err(format!("nt: {e}")))?,
            "nr" => cfg.nr = value.parse().map_err(|e| err(format!("nr: {e}")))?,
            "l" => cfg.l = value.parse().map_err(|e| err(format!("l: {e}")))?,
            "l_d" | "ld" => cfg.l_d = value.parse().map_err(|e| err(format!("l_d: {e}")))?,
            "s0" => cfg.s0 = value.parse().map_err(|e| err(format!("s0: {e}")))?,
            "p" | "power" => cfg.power = value.parse().map_err(|e| err(format!("power: {e}")))?,
            "snr_db_list" | "snr" => cfg.snr_db_list = parse_snr_list(value).map_err(err)?,
            "trials" => cfg.trials = value.parse().map_err(|e| err(format!("trials: {e}")))?,
            "seed" => cfg.seed = value.parse().map_err(|e| err(format!("seed: {e}")))?,
            "method" => cfg.method = value.parse()?,
            "angle_mode" => cfg.angle_mode = value.parse()?,
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    Ok(cfg)
}
