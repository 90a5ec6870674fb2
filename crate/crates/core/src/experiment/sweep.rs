use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{ExperimentConfig, SweepAxis};
use crate::channel::{complex_gaussian, ChannelTensor, FadingConfig, LinkGrid};
use crate::error::{Error, Result};
use crate::metrics::{mean_received_snr, mse, to_db, ConfigTag, Method, PrecodingSetup};
use crate::protocol::{
    assessment_handshake, estimate_trace, run_reporting, BsProposal, PredictorKind, RunOptions,
    SessionConfig, TraceRecord, UeCapabilities,
};
use crate::quantizer::Compression;
use crate::rng::{substream, Purpose};

/// Checks gathered alongside the headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RowDiagnostics {
    /// Mean `|h_bs - h_ue|` per link and cycle after initialization.
    pub mean_abs_bs_ue_error: f64,
    /// Largest `|h_bs - h|` after initialization over all trials.
    pub max_abs_true_error: f64,
    /// Payload bits (flag excluded) sent after initialization, all trials.
    pub prediction_payload_bits: u64,
    /// Fraction of post-initialization reports that were suppressed.
    pub suppressed_fraction: f64,
    /// Report cycles on which BS and UE predictions were compared bit for bit.
    pub lockstep_cycles: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub bits: u32,
    pub tau: f64,
    pub mse: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
    /// Mean bits per report cycle after initialization.
    pub avg_bits: f64,
    pub trials: usize,
    pub seed: u64,
    pub diagnostics: RowDiagnostics,
}

impl ResultRow {
    pub fn tag(&self) -> ConfigTag {
        ConfigTag { method: self.method, bits: self.bits, tau: self.tau }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    /// Per-cycle records of trial 0, when requested.
    pub trace: Vec<(ConfigTag, Vec<TraceRecord>)>,
}

impl ResultTable {
    pub fn find(&self, method: Method, bits: u32, tau: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.bits == bits && (r.tau - tau).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepOptions {
    pub record_trace: bool,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    fading: usize,
    bits: u32,
    method: Method,
}

#[derive(Debug, Clone, Default)]
struct Accum {
    mse: f64,
    snr: f64,
    bits: f64,
    bs_ue: f64,
    max_true: f64,
    payload: u64,
    suppressed: f64,
    lockstep: u64,
}

impl Accum {
    fn add(&mut self, other: &Accum) {
        self.mse += other.mse;
        self.snr += other.snr;
        self.bits += other.bits;
        self.bs_ue += other.bs_ue;
        self.max_true = self.max_true.max(other.max_true);
        self.payload += other.payload;
        self.suppressed += other.suppressed;
        self.lockstep += other.lockstep;
    }
}

fn points(config: &ExperimentConfig, fadings: usize) -> Vec<Point> {
    let methods = config.methods.methods();
    let mut out = Vec::new();
    let mut push = |fading, bits| {
        for &method in methods {
            out.push(Point { fading, bits, method });
        }
    };
    match config.axis {
        SweepAxis::Bits => {
            for f in 0..fadings {
                for &b in &config.bits {
                    push(f, b);
                }
            }
        }
        SweepAxis::Tau => {
            for &b in &config.bits {
                for f in 0..fadings {
                    push(f, b);
                }
            }
        }
    }
    out
}

/// Session for one method at one sweep point.
pub fn session_for(
    config: &ExperimentConfig,
    fading: &FadingConfig,
    bits: u32,
    method: Method,
) -> Result<SessionConfig> {
    let uniform = Compression::uniform(bits, config.kappa);
    let proposal = BsProposal {
        predictor: PredictorKind::Kalman,
        fading: fading.clone(),
        noise_variance: config.noise_variance,
        init_length: config.init_length,
        suppression_threshold: config.suppression_threshold,
        conventional: if method == Method::Proposed && config.lossless_init {
            Compression::Lossless
        } else {
            uniform
        },
        delta: uniform,
        ue_estimate: config.ue_estimate,
    };
    let ue = match method {
        Method::Conventional => UeCapabilities::without_prediction(),
        Method::Proposed => UeCapabilities::kalman(fading.order()),
    };
    Ok(assessment_handshake(&ue, &proposal)?.0)
}

/// Channel and pilot-noise traces of one trial. Both depend only on
/// `(seed, trial, link)`, so every method and sweep point sees the same
/// random numbers.
pub fn trial_traces(
    config: &ExperimentConfig,
    fading: &FadingConfig,
    trial: u64,
) -> Result<(Vec<ChannelTensor>, Vec<ChannelTensor>)> {
    let dims = (config.n_t, config.n_r, config.subcarriers);
    let burn_in = config.burn_in.unwrap_or_else(|| fading.default_burn_in());
    let channel = LinkGrid::new(fading.clone(), dims, config.seed, trial, burn_in)?
        .trace(config.samples_per_trial);
    let links = config.links();
    let mut per_link: Vec<Vec<Complex64>> = (0..links)
        .map(|l| {
            let mut rng = substream(config.seed, trial, l as u64, Purpose::PilotNoise);
            (0..config.samples_per_trial)
                .map(|_| complex_gaussian(&mut rng, config.noise_variance))
                .collect()
        })
        .collect();
    let noise = (0..config.samples_per_trial)
        .map(|n| {
            let gains = per_link.iter_mut().map(|v| v[n]).collect();
            ChannelTensor::new(config.n_t, config.n_r, config.subcarriers, gains)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((channel, noise))
}

struct TrialOutput {
    accums: Vec<Accum>,
    trace: Vec<(ConfigTag, Vec<TraceRecord>)>,
}

fn run_trial(
    config: &ExperimentConfig,
    fadings: &[FadingConfig],
    points: &[Point],
    trial: u64,
    record_trace: bool,
) -> Result<TrialOutput> {
    let setup = PrecodingSetup {
        tx_power: config.tx_power,
        noise_variance: config.noise_variance,
        n_t: config.n_t,
        n_r: config.n_r,
    };
    let start = config.init_length;
    let mut accums = vec![Accum::default(); points.len()];
    let mut trace = Vec::new();
    for (f, fading) in fadings.iter().enumerate() {
        let (channel, noise) = trial_traces(config, fading, trial)?;
        let mut estimates = None;
        for (i, point) in points.iter().enumerate().filter(|(_, p)| p.fading == f) {
            let session = session_for(config, fading, point.bits, point.method)?;
            let est = match &estimates {
                Some(e) => e,
                None => estimates.insert(estimate_trace(&channel, &noise, &session)?),
            };
            let options = RunOptions { record_trace, keep_predictions: false };
            let out = run_reporting(est, &session, options)?;
            let actual = &channel[start..];
            let recon = &out.reconstructed[start..];
            let cycles = actual.len() as f64;
            let links = config.links() as f64;
            let acc = &mut accums[i];
            acc.mse = mse(actual, recon)?;
            acc.snr = mean_received_snr(actual, recon, &setup)?;
            let post_bits = &out.bits[start..];
            acc.bits = post_bits.iter().sum::<u64>() as f64 / cycles;
            acc.payload = post_bits.iter().map(|b| b - 1).sum();
            acc.suppressed = out.tags[start..]
                .iter()
                .filter(|t| **t == crate::protocol::MessageTag::Suppressed)
                .count() as f64
                / cycles;
            acc.bs_ue = recon
                .iter()
                .zip(&out.estimates[start..])
                .map(|(r, e)| r.gains().iter().zip(e.gains()).map(|(a, b)| (a - b).norm()).sum::<f64>())
                .sum::<f64>()
                / (cycles * links);
            acc.max_true = recon
                .iter()
                .zip(actual)
                .flat_map(|(r, h)| r.gains().iter().zip(h.gains()).map(|(a, b)| (a - b).norm()))
                .fold(0.0, f64::max);
            acc.lockstep = if session.prediction_enabled() { out.bits.len() as u64 } else { 0 };
            if record_trace {
                let tag = ConfigTag { method: point.method, bits: point.bits, tau: fading.tau() };
                trace.push((tag, out.records));
            }
        }
    }
    Ok(TrialOutput { accums, trace })
}

/// Runs every (method, sweep point) over `config.trials` trials.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    run_sweep_with(config, SweepOptions::default())
}

pub fn run_sweep_with(config: &ExperimentConfig, options: SweepOptions) -> Result<ResultTable> {
    config.validate()?;
    let fadings = config.fading_configs()?;
    let points = points(config, fadings.len());
    let outputs = (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(config, &fadings, &points, trial, options.record_trace && trial == 0))
        .collect::<Result<Vec<_>>>()?;

    let mut totals = vec![Accum::default(); points.len()];
    let mut trace = Vec::new();
    for out in outputs {
        for (t, a) in totals.iter_mut().zip(&out.accums) {
            t.add(a);
        }
        if trace.is_empty() {
            trace = out.trace;
        }
    }
    let n = config.trials as f64;
    let rows = points
        .iter()
        .zip(&totals)
        .map(|(p, t)| {
            let snr = t.snr / n;
            let row = ResultRow {
                method: p.method,
                bits: p.bits,
                tau: fadings[p.fading].tau(),
                mse: t.mse / n,
                snr_linear: snr,
                snr_db: to_db(snr),
                avg_bits: t.bits / n,
                trials: config.trials,
                seed: config.seed,
                diagnostics: RowDiagnostics {
                    mean_abs_bs_ue_error: t.bs_ue / n,
                    max_abs_true_error: t.max_true,
                    prediction_payload_bits: t.payload,
                    suppressed_fraction: t.suppressed / n,
                    lockstep_cycles: t.lockstep,
                },
            };
            if !(row.mse.is_finite() && row.avg_bits.is_finite() && !row.snr_linear.is_nan()) {
                return Err(Error::Numerical(format!("non-finite result at {:?}", row.tag())));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable { config: config.clone(), rows, trace })
}
