use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{ChannelMode, FadingConfig};
use crate::error::{Error, Result};
use crate::metrics::Method;
use crate::protocol::UeEstimateMode;
use crate::quantizer::MAX_BITS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// `tau` taken from the sweep.
    GaussMarkov,
    /// Coefficients from the Jakes autocorrelation; `tau` is derived.
    Jakes { order: usize, doppler: f64 },
}

/// Outer loop of the sweep; decides row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Bits,
    Tau,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(SweepAxis::Bits),
            "tau" => Ok(SweepAxis::Tau),
            other => Err(Error::InvalidConfig(vec![format!("unknown sweep axis `{other}` (bits|tau)")])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSelection {
    Conventional,
    Proposed,
    Both,
}

impl MethodSelection {
    pub fn methods(&self) -> &'static [Method] {
        match self {
            MethodSelection::Conventional => &[Method::Conventional],
            MethodSelection::Proposed => &[Method::Proposed],
            MethodSelection::Both => &[Method::Conventional, Method::Proposed],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub subcarriers: usize,
    pub trials: usize,
    /// Report cycles per trial, initialization included.
    pub samples_per_trial: usize,
    /// Channel samples discarded before the first report; `None` means `10 p`.
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub channel: ChannelModel,
    pub axis: SweepAxis,
    pub bits: Vec<u32>,
    pub tau: Vec<f64>,
    pub methods: MethodSelection,
    pub noise_variance: f64,
    pub tx_power: f64,
    pub init_length: usize,
    pub suppression_threshold: f64,
    pub kappa: f64,
    /// Proposed method sends unquantized estimates during initialization.
    pub lossless_init: bool,
    pub ue_estimate: UeEstimateMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_t: 4,
            n_r: 2,
            subcarriers: 1,
            trials: 200,
            samples_per_trial: 1000,
            burn_in: None,
            seed: 42,
            channel: ChannelModel::GaussMarkov,
            axis: SweepAxis::Bits,
            bits: (1..=10).collect(),
            tau: vec![0.1, 0.5],
            methods: MethodSelection::Both,
            noise_variance: 0.1,
            tx_power: 1.0,
            init_length: 20,
            suppression_threshold: 0.0,
            kappa: 3.0,
            lossless_init: false,
            ue_estimate: UeEstimateMode::Filtered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig3,
    Fig4,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            other => Err(Error::InvalidConfig(vec![format!("unknown preset `{other}` (fig3|fig4)")])),
        }
    }
}

impl ExperimentConfig {
    /// Bits 1..=10 at `tau` 0.1 and 0.5.
    pub fn fig3() -> Self {
        Self::default()
    }

    /// `tau` 0, 0.1, ..., 1 at 1 and 2 bits.
    pub fn fig4() -> Self {
        Self {
            axis: SweepAxis::Tau,
            bits: vec![1, 2],
            tau: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            ..Self::default()
        }
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Fig3 => Self::fig3(),
            Preset::Fig4 => Self::fig4(),
        }
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.n_t == 0 || self.n_r == 0 || self.subcarriers == 0 {
            v.push("antenna and subcarrier counts must be positive".to_string());
        }
        if self.trials == 0 {
            v.push("trials must be at least 1".to_string());
        }
        if self.init_length == 0 {
            v.push("session.init_length must be at least 1".to_string());
        }
        if self.samples_per_trial <= self.init_length {
            v.push(format!(
                "samples ({}) must exceed session.init_length ({})",
                self.samples_per_trial, self.init_length
            ));
        }
        if self.bits.is_empty() {
            v.push("sweep.bits must not be empty".to_string());
        }
        for &b in &self.bits {
            if !(1..=MAX_BITS).contains(&b) {
                v.push(format!("sweep.bits value {b} outside [1, {MAX_BITS}]"));
            }
        }
        match self.channel {
            ChannelModel::GaussMarkov => {
                if self.tau.is_empty() {
                    v.push("sweep.tau must not be empty for the gauss_markov channel".to_string());
                }
                for &t in &self.tau {
                    if !(0.0..=1.0).contains(&t) {
                        v.push(format!("sweep.tau value {t} outside [0, 1]"));
                    }
                }
            }
            ChannelModel::Jakes { order, doppler } => {
                if !self.tau.is_empty() {
                    v.push("sweep.tau must be empty for the jakes channel (tau is derived)".to_string());
                }
                match FadingConfig::jakes(order, doppler) {
                    Ok(config) if order > self.init_length => v.push(format!(
                        "session.init_length ({}) must be at least the AR order {}",
                        self.init_length,
                        config.order()
                    )),
                    Ok(_) => {}
                    Err(e) => v.push(format!("jakes channel: {e}")),
                }
            }
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            v.push(format!("noise_variance must be nonnegative, got {}", self.noise_variance));
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            v.push(format!("tx_power must be positive, got {}", self.tx_power));
        }
        if !(self.suppression_threshold >= 0.0) {
            v.push(format!("session.epsilon must be nonnegative, got {}", self.suppression_threshold));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            v.push(format!("session.kappa must be positive, got {}", self.kappa));
        }
        if v.is_empty() { Ok(()) } else { Err(Error::InvalidConfig(v)) }
    }

    /// Fading processes of the sweep, one per `tau` point.
    pub fn fading_configs(&self) -> Result<Vec<FadingConfig>> {
        match self.channel {
            ChannelModel::GaussMarkov => self
                .tau
                .iter()
                .map(|&tau| crate::channel::make_config(ChannelMode::GaussMarkov { tau }))
                .collect(),
            ChannelModel::Jakes { order, doppler } => {
                Ok(vec![crate::channel::make_config(ChannelMode::Jakes { order, doppler })?])
            }
        }
    }

    pub fn links(&self) -> usize {
        self.n_t * self.n_r * self.subcarriers
    }

    /// Reads a flat `key = value` file. Lines starting with `#` are comments.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Parses config text on top of the defaults.
    ///
    /// Keys: `n_t`, `n_r`, `subcarriers`, `trials`, `samples`, `burn_in`,
    /// `seed`, `channel` (`gauss_markov` | `jakes`), `channel.order`,
    /// `channel.doppler`, `sweep` (`bits` | `tau`), `sweep.bits`,
    /// `sweep.tau`, `methods` (`both` | `conventional` | `proposed`),
    /// `noise_variance`, `tx_power`, `session.init_length`,
    /// `session.epsilon`, `session.kappa`, `session.lossless_init`,
    /// `session.ue_estimate` (`filtered` | `raw`).
    ///
    /// Lists are comma separated. `a..b` is an inclusive integer range and
    /// `a..b:s` an inclusive range with step `s`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut errors = Vec::new();
        let mut jakes_order = 1usize;
        let mut jakes_doppler = 0.05f64;
        let mut channel_kind = "gauss_markov".to_string();
        let mut tau_given = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", lineno + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let at = |e: String| format!("line {}: {key}: {e}", lineno + 1);
            let res: std::result::Result<(), String> = (|| {
                match key {
                    "n_t" => config.n_t = num(value)?,
                    "n_r" => config.n_r = num(value)?,
                    "subcarriers" => config.subcarriers = num(value)?,
                    "trials" => config.trials = num(value)?,
                    "samples" => config.samples_per_trial = num(value)?,
                    "burn_in" => config.burn_in = Some(num(value)?),
                    "seed" => config.seed = num(value)?,
                    "channel" => match value {
                        "gauss_markov" | "jakes" => channel_kind = value.to_string(),
                        other => return Err(format!("unknown channel `{other}`")),
                    },
                    "channel.order" => jakes_order = num(value)?,
                    "channel.doppler" => jakes_doppler = num(value)?,
                    "sweep" => config.axis = value.parse().map_err(|e: Error| e.to_string())?,
                    "sweep.bits" => config.bits = int_list(value)?,
                    "sweep.tau" => {
                        config.tau = float_list(value)?;
                        tau_given = true;
                    }
                    "methods" => {
                        config.methods = match value {
                            "both" => MethodSelection::Both,
                            "conventional" => MethodSelection::Conventional,
                            "proposed" => MethodSelection::Proposed,
                            other => return Err(format!("unknown method selection `{other}`")),
                        }
                    }
                    "noise_variance" => config.noise_variance = num(value)?,
                    "tx_power" => config.tx_power = num(value)?,
                    "session.init_length" => config.init_length = num(value)?,
                    "session.epsilon" => config.suppression_threshold = num(value)?,
                    "session.kappa" => config.kappa = num(value)?,
                    "session.lossless_init" => config.lossless_init = num(value)?,
                    "session.ue_estimate" => {
                        config.ue_estimate = match value {
                            "filtered" => UeEstimateMode::Filtered,
                            "raw" => UeEstimateMode::Raw,
                            other => return Err(format!("unknown estimate mode `{other}`")),
                        }
                    }
                    _ => return Err("unknown key".to_string()),
                }
                Ok(())
            })();
            if let Err(e) = res {
                errors.push(at(e));
            }
        }
        if channel_kind == "jakes" {
            config.channel = ChannelModel::Jakes { order: jakes_order, doppler: jakes_doppler };
            if !tau_given {
                config.tau.clear();
            }
        }
        if !errors.is_empty() {
            return Err(Error::InvalidConfig(errors));
        }
        Ok(config)
    }

    /// Renders the config in the format accepted by [`ExperimentConfig::parse`].
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let join = |v: Vec<String>| v.join(", ");
        let _ = writeln!(s, "n_t = {}", self.n_t);
        let _ = writeln!(s, "n_r = {}", self.n_r);
        let _ = writeln!(s, "subcarriers = {}", self.subcarriers);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "samples = {}", self.samples_per_trial);
        if let Some(b) = self.burn_in {
            let _ = writeln!(s, "burn_in = {b}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        match self.channel {
            ChannelModel::GaussMarkov => {
                let _ = writeln!(s, "channel = gauss_markov");
            }
            ChannelModel::Jakes { order, doppler } => {
                let _ = writeln!(s, "channel = jakes");
                let _ = writeln!(s, "channel.order = {order}");
                let _ = writeln!(s, "channel.doppler = {doppler}");
            }
        }
        let axis = match self.axis {
            SweepAxis::Bits => "bits",
            SweepAxis::Tau => "tau",
        };
        let _ = writeln!(s, "sweep = {axis}");
        let _ = writeln!(s, "sweep.bits = {}", join(self.bits.iter().map(u32::to_string).collect()));
        if !self.tau.is_empty() {
            let _ = writeln!(s, "sweep.tau = {}", join(self.tau.iter().map(f64::to_string).collect()));
        }
        let methods = match self.methods {
            MethodSelection::Both => "both",
            MethodSelection::Conventional => "conventional",
            MethodSelection::Proposed => "proposed",
        };
        let _ = writeln!(s, "methods = {methods}");
        let _ = writeln!(s, "noise_variance = {}", self.noise_variance);
        let _ = writeln!(s, "tx_power = {}", self.tx_power);
        let _ = writeln!(s, "session.init_length = {}", self.init_length);
        let _ = writeln!(s, "session.epsilon = {}", self.suppression_threshold);
        let _ = writeln!(s, "session.kappa = {}", self.kappa);
        let _ = writeln!(s, "session.lossless_init = {}", self.lossless_init);
        let mode = match self.ue_estimate {
            UeEstimateMode::Filtered => "filtered",
            UeEstimateMode::Raw => "raw",
        };
        let _ = writeln!(s, "session.ue_estimate = {mode}");
        s
    }
}

fn num<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn int_list(value: &str) -> std::result::Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (u32, u32) = (num(a.trim())?, num(b.trim())?);
            if a > b {
                return Err(format!("empty range `{item}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(num(item)?);
        }
    }
    Ok(out)
}

fn float_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim) {
        if let Some((a, rest)) = item.split_once("..") {
            let (b, step) = match rest.split_once(':') {
                Some((b, s)) => (b, num::<f64>(s.trim())?),
                None => (rest, 1.0),
            };
            let (a, b): (f64, f64) = (num(a.trim())?, num(b.trim())?);
            if !(step > 0.0) || a > b {
                return Err(format!("bad range `{item}`"));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            out.extend((0..=count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12));
        } else {
            out.push(num(item)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_grids() {
        let f3 = ExperimentConfig::fig3();
        assert_eq!(f3.bits.len() * f3.tau.len() * 2, 40);
        let f4 = ExperimentConfig::fig4();
        assert_eq!(f4.bits.len() * f4.tau.len() * 2, 44);
        assert_eq!(f4.tau[3], 0.3);
        assert!(f3.validate().is_ok() && f4.validate().is_ok());
    }

    #[test]
    fn parse_round_trip() {
        let text = "# demo\ntrials = 7\nsweep = tau\nsweep.bits = 1..3, 8\nsweep.tau = 0..0.3:0.1\nsession.epsilon = 0.25 # inline\nsession.ue_estimate = raw\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.trials, 7);
        assert_eq!(c.axis, SweepAxis::Tau);
        assert_eq!(c.bits, vec![1, 2, 3, 8]);
        assert_eq!(c.tau, vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(c.suppression_threshold, 0.25);
        assert_eq!(c.ue_estimate, UeEstimateMode::Raw);
        assert_eq!(ExperimentConfig::parse(&c.to_config_text()).unwrap(), c);
        let j = ExperimentConfig::parse("channel = jakes\nchannel.order = 2\n").unwrap();
        assert_eq!(j.channel, ChannelModel::Jakes { order: 2, doppler: 0.05 });
        assert_eq!(ExperimentConfig::parse(&j.to_config_text()).unwrap(), j);
    }

    #[test]
    fn parse_reports_every_bad_line() {
        match ExperimentConfig::parse("trials = x\nbogus = 1\nno equals\n") {
            Err(Error::InvalidConfig(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_lists_every_violation() {
        let c = ExperimentConfig {
            trials: 0,
            samples_per_trial: 10,
            bits: vec![0, 30],
            tau: vec![1.5],
            ..ExperimentConfig::default()
        };
        match c.validate() {
            Err(Error::InvalidConfig(v)) => assert_eq!(v.len(), 5, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
