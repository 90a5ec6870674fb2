//! Estimation error and matched-filter link quality.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ChannelTensor;
use crate::error::{Error, Result};

/// Which feedback scheme produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Conventional,
    Proposed,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mean squared Frobenius error `(1/N) sum_n ||H(n) - H_hat(n)||_F^2`.
pub fn mse(actual: &[ChannelTensor], estimated: &[ChannelTensor]) -> Result<f64> {
    if actual.is_empty() {
        return Err(Error::Contract("mse needs at least one sample".into()));
    }
    if actual.len() != estimated.len() {
        return Err(Error::Contract(format!(
            "series lengths differ: {} vs {}",
            actual.len(),
            estimated.len()
        )));
    }
    let mut total = 0.0;
    for (h, e) in actual.iter().zip(estimated) {
        if h.dims() != e.dims() {
            return Err(Error::Contract(format!(
                "tensor dimensions differ: {:?} vs {:?}",
                h.dims(),
                e.dims()
            )));
        }
        total += h.gains().iter().zip(e.gains()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
    }
    Ok(total / actual.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecodingSetup {
    pub tx_power: f64,
    pub noise_variance: f64,
    pub n_t: usize,
    pub n_r: usize,
}

impl Default for PrecodingSetup {
    fn default() -> Self {
        Self { tx_power: 1.0, noise_variance: 0.1, n_t: 4, n_r: 2 }
    }
}

impl PrecodingSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return Err(Error::Domain(format!("tx power must be positive, got {}", self.tx_power)));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Domain(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        if self.n_t == 0 || self.n_r == 0 {
            return Err(Error::Domain("antenna counts must be positive".into()));
        }
        Ok(())
    }
}

/// `W = H_hat^H / ||H_hat||_F` for an `n_r x n_t` estimate.
pub fn mf_precoder(estimated: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let norm = estimated.norm();
    if !norm.is_finite() {
        return Err(Error::Domain("channel estimate must be finite".into()));
    }
    if norm == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    Ok(estimated.adjoint() / Complex64::new(norm, 0.0))
}

/// Matched-filter precoders for every subcarrier of `estimated`.
pub fn mf_precoders(estimated: &ChannelTensor) -> Result<Vec<DMatrix<Complex64>>> {
    (0..estimated.subcarriers()).map(|k| mf_precoder(&estimated.matrix(k))).collect()
}

/// `P ||H W||_F^2 / (n_r sigma_v^2)`; `+inf` when the noise variance is zero.
pub fn received_snr(
    actual: &DMatrix<Complex64>,
    precoder: &DMatrix<Complex64>,
    setup: &PrecodingSetup,
) -> Result<f64> {
    setup.validate()?;
    if actual.shape() != (setup.n_r, setup.n_t) || precoder.nrows() != setup.n_t {
        return Err(Error::Contract(format!(
            "channel {:?} and precoder {:?} do not fit {}x{} antennas",
            actual.shape(),
            precoder.shape(),
            setup.n_t,
            setup.n_r
        )));
    }
    let gain = (actual * precoder).norm_squared();
    if setup.noise_variance == 0.0 {
        return Ok(if gain == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(setup.tx_power * gain / (setup.n_r as f64 * setup.noise_variance))
}

/// Received SNR averaged over time and subcarriers when precoding on the
/// estimated channel.
pub fn mean_received_snr(
    actual: &[ChannelTensor],
    estimated: &[ChannelTensor],
    setup: &PrecodingSetup,
) -> Result<f64> {
    if actual.is_empty() || actual.len() != estimated.len() {
        return Err(Error::Contract("SNR needs two nonempty series of equal length".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (h, e) in actual.iter().zip(estimated) {
        if h.dims() != e.dims() {
            return Err(Error::Contract("tensor dimensions differ".into()));
        }
        for k in 0..h.subcarriers() {
            let w = mf_precoder(&e.matrix(k))?;
            total += received_snr(&h.matrix(k), &w, setup)?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Relative SNR improvement in percent, on linear SNR.
pub fn snr_gain_percent(proposed: f64, conventional: f64) -> Result<f64> {
    if !(conventional > 0.0 && conventional.is_finite()) {
        return Err(Error::Domain(format!("baseline SNR must be positive, got {conventional}")));
    }
    if !proposed.is_finite() {
        return Err(Error::Domain(format!("SNR must be finite, got {proposed}")));
    }
    Ok(100.0 * (proposed - conventional) / conventional)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigTag {
    pub method: Method,
    pub bits: u32,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub tag: ConfigTag,
    pub mse: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
    /// Mean bits per report cycle.
    pub avg_feedback_bits: f64,
}

impl MetricsRecord {
    pub fn new(tag: ConfigTag, mse: f64, snr_linear: f64, avg_feedback_bits: f64) -> Result<Self> {
        if !(mse >= 0.0) || !(snr_linear >= 0.0) || !avg_feedback_bits.is_finite() {
            return Err(Error::Numerical(format!(
                "invalid metrics: mse {mse}, snr {snr_linear}, bits {avg_feedback_bits}"
            )));
        }
        Ok(Self { tag, mse, snr_linear, snr_db: to_db(snr_linear), avg_feedback_bits })
    }
}
