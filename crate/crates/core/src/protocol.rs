//! Dual-predictor CSI reporting.
//!
//! During the first `init_length` report cycles the UE sends its quantized
//! channel estimate. Afterwards it sends only the quantized difference
//! between the shared prediction and its fresh estimate, or nothing when
//! that difference is within the suppression threshold. BS and UE both run
//! the shared predictor on the reconstructed channel `h_bs(n)`, which is
//! known at both ends, so their predictions stay bit-identical.

use std::fmt;

use num_complex::Complex64;

use crate::channel::{ChannelTensor, FadingConfig};
use crate::error::{Error, Result};
use crate::kalman::{
    init_belief, predict_channel, predict_in_place, update_in_place, KalmanBelief, KalmanWorkspace,
    StateSpaceModel,
};
use crate::quantizer::{Codec, Compression, Payload, MIN_FIT_SAMPLES};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    Kalman,
}

/// Map from (prediction, estimate) to the reported residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateFunction {
    #[default]
    Difference,
}

impl UpdateFunction {
    pub fn apply(&self, prediction: Complex64, estimate: Complex64) -> Complex64 {
        match self {
            UpdateFunction::Difference => prediction - estimate,
        }
    }

    /// Recovers the estimate from the prediction and a residual.
    pub fn invert(&self, prediction: Complex64, residual: Complex64) -> Complex64 {
        match self {
            UpdateFunction::Difference => prediction - residual,
        }
    }
}

/// What the UE reports as its channel estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UeEstimateMode {
    /// Posterior of a UE-local Kalman filter driven by the pilots.
    #[default]
    Filtered,
    /// The raw pilot observation.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeCapabilities {
    pub predictors: Vec<PredictorKind>,
    /// Past CSI estimates the UE can retain.
    pub memory_depth: usize,
}

impl UeCapabilities {
    pub fn kalman(memory_depth: usize) -> Self {
        Self { predictors: vec![PredictorKind::Kalman], memory_depth }
    }

    pub fn without_prediction() -> Self {
        Self { predictors: Vec::new(), memory_depth: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsProposal {
    pub predictor: PredictorKind,
    pub fading: FadingConfig,
    pub noise_variance: f64,
    pub init_length: usize,
    pub suppression_threshold: f64,
    pub conventional: Compression,
    pub delta: Compression,
    pub ue_estimate: UeEstimateMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandshakeOutcome {
    Agreed,
    NoPredictor,
    InsufficientMemory { available: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// `None` runs a conventional-only session.
    pub predictor: Option<PredictorKind>,
    pub memory_depth: usize,
    pub init_length: usize,
    pub suppression_threshold: f64,
    pub conventional: Compression,
    pub delta: Compression,
    pub update_function: UpdateFunction,
    pub fading: FadingConfig,
    pub noise_variance: f64,
    pub ue_estimate: UeEstimateMode,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.fading.order();
        let mut problems = Vec::new();
        if self.init_length < p.max(1) {
            problems.push(format!("init_length {} must be at least max(1, p) = {}", self.init_length, p.max(1)));
        }
        if !(self.suppression_threshold >= 0.0) {
            problems.push(format!("suppression threshold must be nonnegative, got {}", self.suppression_threshold));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            problems.push(format!("noise variance must be nonnegative, got {}", self.noise_variance));
        }
        if self.predictor.is_some() && self.memory_depth < p {
            problems.push(format!("memory depth {} is below the predictor order {p}", self.memory_depth));
        }
        for (name, c) in [("conventional", &self.conventional), ("delta", &self.delta)] {
            if let Err(e) = c.validate() {
                problems.push(format!("{name} compression: {e}"));
            }
        }
        if problems.is_empty() { Ok(()) } else { Err(Error::InvalidConfig(problems)) }
    }

    pub fn prediction_enabled(&self) -> bool {
        self.predictor.is_some()
    }

    /// Phase of report cycle `n` (1-based).
    pub fn phase_at(&self, n: u64) -> Phase {
        if !self.prediction_enabled() || n <= self.init_length as u64 {
            Phase::Initialization
        } else {
            Phase::Prediction
        }
    }
}

/// Agrees on the session parameters. A UE that cannot run the proposed
/// predictor gets a conventional-only session.
pub fn assessment_handshake(
    ue: &UeCapabilities,
    bs: &BsProposal,
) -> Result<(SessionConfig, HandshakeOutcome)> {
    let required = bs.fading.order();
    let outcome = if !ue.predictors.contains(&bs.predictor) {
        HandshakeOutcome::NoPredictor
    } else if ue.memory_depth < required {
        HandshakeOutcome::InsufficientMemory { available: ue.memory_depth, required }
    } else {
        HandshakeOutcome::Agreed
    };
    let agreed = outcome == HandshakeOutcome::Agreed;
    let session = SessionConfig {
        predictor: agreed.then_some(bs.predictor),
        memory_depth: if agreed { required } else { 0 },
        init_length: bs.init_length,
        suppression_threshold: bs.suppression_threshold,
        conventional: bs.conventional,
        delta: bs.delta,
        update_function: UpdateFunction::Difference,
        fading: bs.fading.clone(),
        noise_variance: bs.noise_variance,
        ue_estimate: bs.ue_estimate,
    };
    session.validate()?;
    Ok((session, outcome))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Initialization,
    Prediction,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Initialization => "init",
            Phase::Prediction => "prediction",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    Init(Vec<Payload>),
    Delta(Vec<Payload>),
    Suppressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageTag {
    Init,
    Delta,
    Suppressed,
}

impl fmt::Display for MessageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageTag::Init => "init",
            MessageTag::Delta => "delta",
            MessageTag::Suppressed => "suppressed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMessage {
    /// Report cycle this message belongs to (1-based).
    pub time_index: u64,
    pub body: MessageBody,
    /// One presence-flag bit plus the payload.
    pub bit_cost: u64,
}

impl FeedbackMessage {
    pub fn tag(&self) -> MessageTag {
        match self.body {
            MessageBody::Init(_) => MessageTag::Init,
            MessageBody::Delta(_) => MessageTag::Delta,
            MessageBody::Suppressed => MessageTag::Suppressed,
        }
    }

    pub fn payload_bits(&self) -> u64 {
        self.bit_cost - 1
    }
}

/// Resolved codecs for both feedback streams, known to both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Codebook {
    pub conventional: Codec,
    pub delta: Codec,
}

/// Number of leading report cycles used to fit quantizer ranges.
///
/// Normally the initialization window; extended when it holds fewer than
/// the samples range fitting requires.
pub fn calibration_length(session: &SessionConfig, links: usize) -> usize {
    let p = session.fading.order();
    session.init_length.max(MIN_FIT_SAMPLES.div_ceil(links.max(1)) + p)
}

/// Fits quantizer ranges from the UE's first estimates.
///
/// `estimates[n]` and `estimator_predictions[n]` hold, per link, the UE's
/// estimate of `h(n)` and its estimation filter's prediction of `h(n)`
/// before seeing the pilot. The conventional range comes from the estimates;
/// the delta range from the prediction residuals, skipping the first `p`
/// cycles while the filter is still filling its state.
pub fn calibrate(
    session: &SessionConfig,
    estimates: &[Vec<Complex64>],
    estimator_predictions: &[Vec<Complex64>],
) -> Result<Codebook> {
    let links = estimates.first().map_or(0, Vec::len);
    let window = calibration_length(session, links);
    if estimates.len() < window || estimator_predictions.len() < window {
        return Err(Error::Contract(format!(
            "calibration needs {window} report cycles, got {}",
            estimates.len().min(estimator_predictions.len())
        )));
    }
    let p = session.fading.order();
    let est: Vec<Complex64> = estimates[..window].iter().flatten().copied().collect();
    let residuals: Vec<Complex64> = (p..window)
        .flat_map(|n| {
            estimator_predictions[n]
                .iter()
                .zip(&estimates[n])
                .map(|(&pred, &e)| session.update_function.apply(pred, e))
        })
        .collect();
    Ok(Codebook {
        conventional: session.conventional.resolve(&est)?,
        delta: session.delta.resolve(&residuals)?,
    })
}

/// UE-local estimation filter, one per link, driven by the raw pilots.
#[derive(Debug, Clone)]
pub struct UeEstimator {
    mode: UeEstimateMode,
    model: StateSpaceModel,
    beliefs: Vec<KalmanBelief>,
    last_prior_prediction: Vec<Complex64>,
    workspace: KalmanWorkspace,
}

impl UeEstimator {
    pub fn new(session: &SessionConfig, links: usize) -> Result<Self> {
        let model = StateSpaceModel::from_fading(&session.fading, session.noise_variance)?;
        let belief = init_belief(session.fading.order())?;
        Ok(Self {
            mode: session.ue_estimate,
            model,
            beliefs: vec![belief; links],
            last_prior_prediction: vec![ZERO; links],
            workspace: KalmanWorkspace::new(session.fading.order()),
        })
    }

    /// The filter's prediction of the current channel before the latest pilot.
    pub fn last_prior_prediction(&self) -> &[Complex64] {
        &self.last_prior_prediction
    }

    pub fn beliefs(&self) -> &[KalmanBelief] {
        &self.beliefs
    }
}

/// UE estimate of `h(n)` on every link from the pilot observations `y(n)`.
pub fn ue_estimate(observation: &[Complex64], estimator: &mut UeEstimator) -> Result<Vec<Complex64>> {
    if observation.len() != estimator.beliefs.len() {
        return Err(Error::Contract(format!(
            "expected {} observations, got {}",
            estimator.beliefs.len(),
            observation.len()
        )));
    }
    let mut out = Vec::with_capacity(observation.len());
    for ((belief, prior_pred), &y) in
        estimator.beliefs.iter_mut().zip(estimator.last_prior_prediction.iter_mut()).zip(observation)
    {
        predict_in_place(belief, &estimator.model, &mut estimator.workspace)?;
        *prior_pred = belief.channel_estimate();
        update_in_place(belief, y, &estimator.model, &mut estimator.workspace)?;
        out.push(match estimator.mode {
            UeEstimateMode::Filtered => belief.channel_estimate(),
            UeEstimateMode::Raw => y,
        });
    }
    Ok(out)
}

/// The predictor replicated at BS and UE.
#[derive(Debug, Clone)]
pub struct SharedPredictor {
    init_model: StateSpaceModel,
    prediction_model: StateSpaceModel,
    beliefs: Vec<KalmanBelief>,
    last_prediction: Vec<Complex64>,
    workspace: KalmanWorkspace,
}

impl SharedPredictor {
    /// The measurement noise of the filter is the pilot noise plus the
    /// error variance of whichever codec produced its input.
    pub fn new(session: &SessionConfig, codebook: &Codebook, links: usize) -> Result<Self> {
        let base = StateSpaceModel::from_fading(&session.fading, session.noise_variance)?;
        let init_model = base
            .with_measurement_noise(session.noise_variance + codebook.conventional.error_variance())?;
        let prediction_model =
            base.with_measurement_noise(session.noise_variance + codebook.delta.error_variance())?;
        let belief = init_belief(session.fading.order())?;
        let first = predict_channel(&belief, &init_model);
        Ok(Self {
            init_model,
            prediction_model,
            beliefs: vec![belief; links],
            last_prediction: vec![first; links],
            workspace: KalmanWorkspace::new(session.fading.order()),
        })
    }

    /// `h~(n-1)`, the prediction of the current channel.
    pub fn last_prediction(&self) -> &[Complex64] {
        &self.last_prediction
    }

    pub fn beliefs(&self) -> &[KalmanBelief] {
        &self.beliefs
    }

    fn advance(&mut self, reconstructed: &[Complex64], phase: Phase) -> Result<()> {
        let model = match phase {
            Phase::Initialization => &self.init_model,
            Phase::Prediction => &self.prediction_model,
        };
        for ((belief, pred), &h) in
            self.beliefs.iter_mut().zip(self.last_prediction.iter_mut()).zip(reconstructed)
        {
            predict_in_place(belief, model, &mut self.workspace)?;
            update_in_place(belief, h, model, &mut self.workspace)?;
            *pred = predict_channel(belief, model);
        }
        Ok(())
    }
}

/// Reporting state of one end of the link.
#[derive(Debug, Clone)]
pub struct EndpointState {
    pub predictor: SharedPredictor,
    pub codebook: Codebook,
    pub phase: Phase,
    /// Completed report cycles.
    pub time_index: u64,
}

pub type UeState = EndpointState;
pub type BsState = EndpointState;

impl EndpointState {
    pub fn new(session: &SessionConfig, codebook: Codebook, links: usize) -> Result<Self> {
        session.validate()?;
        if links == 0 {
            return Err(Error::Contract("a session needs at least one link".into()));
        }
        Ok(Self {
            predictor: SharedPredictor::new(session, &codebook, links)?,
            codebook,
            phase: session.phase_at(1),
            time_index: 0,
        })
    }

    pub fn links(&self) -> usize {
        self.predictor.last_prediction.len()
    }

    pub fn last_prediction(&self) -> &[Complex64] {
        self.predictor.last_prediction()
    }
}

/// Builds the UE's report for the next cycle.
pub fn ue_report(
    estimate: &[Complex64],
    ue: &UeState,
    session: &SessionConfig,
) -> Result<FeedbackMessage> {
    if estimate.len() != ue.links() {
        return Err(Error::Contract(format!(
            "expected {} estimates, got {}",
            ue.links(),
            estimate.len()
        )));
    }
    let time_index = ue.time_index + 1;
    let links = estimate.len() as u64;
    let message = match ue.phase {
        Phase::Initialization => {
            let codec = &ue.codebook.conventional;
            let payload = estimate.iter().map(|&h| codec.encode(h)).collect::<Result<Vec<_>>>()?;
            FeedbackMessage {
                time_index,
                body: MessageBody::Init(payload),
                bit_cost: 1 + links * codec.bits_per_scalar(),
            }
        }
        Phase::Prediction => {
            let deltas: Vec<Complex64> = ue
                .last_prediction()
                .iter()
                .zip(estimate)
                .map(|(&pred, &h)| session.update_function.apply(pred, h))
                .collect();
            let largest = deltas.iter().map(|d| d.norm()).fold(0.0, f64::max);
            if largest <= session.suppression_threshold {
                FeedbackMessage { time_index, body: MessageBody::Suppressed, bit_cost: 1 }
            } else {
                let codec = &ue.codebook.delta;
                let payload = deltas.iter().map(|&d| codec.encode(d)).collect::<Result<Vec<_>>>()?;
                FeedbackMessage {
                    time_index,
                    body: MessageBody::Delta(payload),
                    bit_cost: 1 + links * codec.bits_per_scalar(),
                }
            }
        }
    };
    Ok(message)
}

/// Channel estimate at the BS after receiving `msg`.
pub fn bs_reconstruct(
    msg: &FeedbackMessage,
    bs: &BsState,
    session: &SessionConfig,
) -> Result<Vec<Complex64>> {
    if msg.time_index != bs.time_index + 1 {
        return Err(Error::Protocol(format!(
            "message for cycle {} arrived at cycle {}",
            msg.time_index,
            bs.time_index + 1
        )));
    }
    let check_len = |payload: &[Payload]| {
        if payload.len() == bs.links() {
            Ok(())
        } else {
            Err(Error::Protocol(format!(
                "payload carries {} values for {} links",
                payload.len(),
                bs.links()
            )))
        }
    };
    match (&msg.body, bs.phase) {
        (MessageBody::Init(payload), Phase::Initialization) => {
            check_len(payload)?;
            payload.iter().map(|q| bs.codebook.conventional.decode(q)).collect()
        }
        (MessageBody::Delta(payload), Phase::Prediction) => {
            check_len(payload)?;
            payload
                .iter()
                .zip(bs.last_prediction())
                .map(|(q, &pred)| {
                    let delta = bs.codebook.delta.decode(q)?;
                    Ok(session.update_function.invert(pred, delta))
                })
                .collect()
        }
        (MessageBody::Suppressed, Phase::Prediction) => Ok(bs.last_prediction().to_vec()),
        (_, phase) => Err(Error::Protocol(format!(
            "{} message received during the {phase} phase",
            msg.tag()
        ))),
    }
}

/// Feeds the reconstructed channel to both copies of the shared predictor
/// and checks that their predictions agree bit for bit.
pub fn advance_predictors(
    reconstructed: &[Complex64],
    ue: &mut UeState,
    bs: &mut BsState,
    session: &SessionConfig,
) -> Result<()> {
    if reconstructed.len() != ue.links() || reconstructed.len() != bs.links() {
        return Err(Error::Contract("reconstructed channel has the wrong number of links".into()));
    }
    if ue.time_index != bs.time_index {
        return Err(Error::Protocol(format!(
            "UE at cycle {} but BS at cycle {}",
            ue.time_index, bs.time_index
        )));
    }
    if session.prediction_enabled() {
        ue.predictor.advance(reconstructed, ue.phase)?;
        bs.predictor.advance(reconstructed, bs.phase)?;
    }
    let time_index = ue.time_index + 1;
    for (link, (&u, &b)) in ue.last_prediction().iter().zip(bs.last_prediction()).enumerate() {
        if !bit_equal(u, b) {
            return Err(Error::Desync { time_index, link, bs: b, ue: u });
        }
    }
    for end in [ue, bs] {
        end.time_index = time_index;
        end.phase = session.phase_at(time_index + 1);
    }
    Ok(())
}

fn bit_equal(a: Complex64, b: Complex64) -> bool {
    a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
}

/// One line of the per-cycle diagnostic trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time_index: u64,
    pub phase: Phase,
    pub tag: MessageTag,
    pub bit_cost: u64,
    /// Largest residual magnitude over links; `None` outside the prediction phase.
    pub max_abs_delta: Option<f64>,
    pub reconstructed: Vec<Complex64>,
    /// Shared prediction after the cycle (zero in conventional-only sessions).
    pub prediction: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub codebook: Codebook,
    pub estimates: Vec<ChannelTensor>,
    pub reconstructed: Vec<ChannelTensor>,
    pub bits: Vec<u64>,
    pub tags: Vec<MessageTag>,
    /// Shared predictions per cycle at each end; empty without prediction.
    pub ue_predictions: Vec<Vec<Complex64>>,
    pub bs_predictions: Vec<Vec<Complex64>>,
    pub records: Vec<TraceRecord>,
}

impl SessionOutput {
    pub fn total_bits(&self) -> u64 {
        self.bits.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub record_trace: bool,
    pub keep_predictions: bool,
}

/// UE estimates of a whole trace, with the estimation filter's one-step
/// predictions used for range calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTrace {
    pub dims: (usize, usize, usize),
    pub estimates: Vec<Vec<Complex64>>,
    pub prior_predictions: Vec<Vec<Complex64>>,
}

/// Runs the UE estimation filter over pilots `channel[n] + noise[n]`.
///
/// The estimates do not depend on the feedback, so one trace can drive
/// sessions with different quantizers.
pub fn estimate_trace(
    channel: &[ChannelTensor],
    noise: &[ChannelTensor],
    session: &SessionConfig,
) -> Result<EstimateTrace> {
    if channel.len() != noise.len() {
        return Err(Error::Contract(format!(
            "channel trace has {} samples but noise trace has {}",
            channel.len(),
            noise.len()
        )));
    }
    let Some(first) = channel.first() else {
        return Err(Error::Contract("empty channel trace".into()));
    };
    let dims = first.dims();
    if channel.iter().chain(noise).any(|t| t.dims() != dims) {
        return Err(Error::Contract("trace dimensions are not constant".into()));
    }
    let mut estimator = UeEstimator::new(session, first.link_count())?;
    let mut estimates = Vec::with_capacity(channel.len());
    let mut prior_predictions = Vec::with_capacity(channel.len());
    for (h, v) in channel.iter().zip(noise) {
        let y: Vec<Complex64> = h.gains().iter().zip(v.gains()).map(|(a, b)| a + b).collect();
        estimates.push(ue_estimate(&y, &mut estimator)?);
        prior_predictions.push(estimator.last_prior_prediction().to_vec());
    }
    Ok(EstimateTrace { dims, estimates, prior_predictions })
}

/// Calibrates the codebook and runs every report cycle of `trace`.
pub fn run_reporting(
    trace: &EstimateTrace,
    session: &SessionConfig,
    options: RunOptions,
) -> Result<SessionOutput> {
    session.validate()?;
    let (n_t, n_r, k) = trace.dims;
    let links = n_t * n_r * k;
    let codebook = calibrate(session, &trace.estimates, &trace.prior_predictions)?;

    let mut ue = UeState::new(session, codebook, links)?;
    let mut bs = BsState::new(session, codebook, links)?;
    let keep = options.keep_predictions && session.prediction_enabled();
    let cycles = trace.estimates.len();
    let mut out = SessionOutput {
        codebook,
        estimates: Vec::with_capacity(cycles),
        reconstructed: Vec::with_capacity(cycles),
        bits: Vec::with_capacity(cycles),
        tags: Vec::with_capacity(cycles),
        ue_predictions: Vec::new(),
        bs_predictions: Vec::new(),
        records: Vec::new(),
    };
    for estimate in &trace.estimates {
        let phase = ue.phase;
        let msg = ue_report(estimate, &ue, session)?;
        let reconstructed = bs_reconstruct(&msg, &bs, session)?;
        let max_abs_delta = (phase == Phase::Prediction).then(|| {
            ue.last_prediction()
                .iter()
                .zip(estimate)
                .map(|(&p, &e)| session.update_function.apply(p, e).norm())
                .fold(0.0, f64::max)
        });
        advance_predictors(&reconstructed, &mut ue, &mut bs, session)?;
        if keep {
            out.ue_predictions.push(ue.last_prediction().to_vec());
            out.bs_predictions.push(bs.last_prediction().to_vec());
        }
        if options.record_trace {
            out.records.push(TraceRecord {
                time_index: msg.time_index,
                phase,
                tag: msg.tag(),
                bit_cost: msg.bit_cost,
                max_abs_delta,
                reconstructed: reconstructed.clone(),
                prediction: bs.last_prediction().to_vec(),
            });
        }
        out.bits.push(msg.bit_cost);
        out.tags.push(msg.tag());
        out.estimates.push(ChannelTensor::new(n_t, n_r, k, estimate.clone())?);
        out.reconstructed.push(ChannelTensor::new(n_t, n_r, k, reconstructed)?);
    }
    Ok(out)
}

/// Runs estimation, calibration, initialization and prediction over a
/// whole trace. The pilot observation of cycle `n` is `channel[n] + noise[n]`.
pub fn run_link_session(
    channel: &[ChannelTensor],
    noise: &[ChannelTensor],
    session: &SessionConfig,
    options: RunOptions,
) -> Result<SessionOutput> {
    session.validate()?;
    let trace = estimate_trace(channel, noise, session)?;
    run_reporting(&trace, session, options)
}
