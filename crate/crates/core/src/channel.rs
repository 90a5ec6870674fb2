//! Temporally correlated Rayleigh fading.
//!
//! Every link gain follows the complex AR(p) recursion
//!
//! ```text
//! h(n) = sqrt(1 - tau^2) * sum_{l=1..p} c(l) h(n-l) + tau * w(n),   w ~ CN(0, sigma_p^2)
//! ```
//!
//! `tau` measures one-step predictability: 0 freezes the channel, 1 makes
//! consecutive gains independent. Coefficients either come from the Jakes
//! autocorrelation through Yule-Walker or from the one-parameter
//! Gauss-Markov form (`c = [1]`, `sigma_p^2 = 1`).
//!
//! The products `sqrt(1 - tau^2) * c(l)` and `tau^2 * sigma_p^2` are called
//! the *effective* coefficients and innovation variance below; they alone
//! determine the law of the process.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::special::bessel_j0;

/// Largest Toeplitz condition estimate accepted by [`yule_walker`].
pub const MAX_TOEPLITZ_CONDITION: f64 = 1e12;

/// Denominators below this magnitude make [`psd`] report `+inf`.
pub const PSD_POLE_GUARD: f64 = 1e-12;

const MARGINAL_RADIUS_SLACK: f64 = 1e-12;

/// Parameters of one AR(p) fading process.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingConfig {
    coefficients: Vec<Complex64>,
    tau: f64,
    innovation_variance: f64,
    doppler: f64,
}

/// How to derive a [`FadingConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMode {
    /// `h(n) = sqrt(1 - tau^2) h(n-1) + tau w(n)` with unit stationary power.
    GaussMarkov { tau: f64 },
    /// AR(`order`) fit of the Jakes autocorrelation at normalized Doppler `doppler`.
    Jakes { order: usize, doppler: f64 },
}

impl FadingConfig {
    /// Validates and builds a configuration.
    ///
    /// The effective companion matrix must have spectral radius below one.
    /// With `tau == 0` the innovation is switched off and a radius of
    /// exactly one (a frozen channel) is accepted.
    pub fn new(
        coefficients: Vec<Complex64>,
        tau: f64,
        innovation_variance: f64,
        doppler: f64,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Domain("AR order must be at least 1".into()));
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("AR coefficients must be finite".into()));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Domain(format!("tau must lie in [0, 1], got {tau}")));
        }
        if !(innovation_variance > 0.0 && innovation_variance.is_finite()) {
            return Err(Error::Domain(format!(
                "innovation variance must be positive, got {innovation_variance}"
            )));
        }
        if !(doppler >= 0.0 && doppler.is_finite()) {
            return Err(Error::Domain(format!("doppler must be nonnegative, got {doppler}")));
        }
        let config = Self { coefficients, tau, innovation_variance, doppler };
        let radius = config.spectral_radius()?;
        let limit = if tau == 0.0 { 1.0 + MARGINAL_RADIUS_SLACK } else { 1.0 };
        if radius >= limit {
            return Err(Error::Unstable { radius });
        }
        Ok(config)
    }

    /// Gauss-Markov process with predictability `tau`.
    pub fn gauss_markov(tau: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(1.0, 0.0)], tau, 1.0, 0.0)
    }

    /// Jakes-model process of the given order, coefficients from Yule-Walker.
    pub fn jakes(order: usize, doppler: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("AR order must be at least 1".into()));
        }
        let autocorr = (0..=order)
            .map(|lag| jakes_autocorrelation(lag as i64, doppler))
            .collect::<Result<Vec<_>>>()?;
        let (coefficients, residual) = yule_walker(&autocorr, order)?;
        Self::from_ar(&coefficients, residual, doppler)
    }

    /// Builds the configuration whose effective coefficients and innovation
    /// variance equal the given AR model.
    ///
    /// The split into `tau`, `c` and `sigma_p^2` is a representation choice:
    /// `sigma_p^2 = 1 + v`, `tau^2 = v / (1 + v)`, `c = a / sqrt(1 - tau^2)`.
    pub fn from_ar(effective: &[Complex64], residual_variance: f64, doppler: f64) -> Result<Self> {
        if !(residual_variance > 0.0 && residual_variance.is_finite()) {
            return Err(Error::Domain(format!(
                "residual variance must be positive, got {residual_variance}"
            )));
        }
        let innovation_variance = 1.0 + residual_variance;
        let tau = (residual_variance / innovation_variance).sqrt();
        let scale = innovation_variance.sqrt();
        let coefficients = effective.iter().map(|a| a * scale).collect();
        Self::new(coefficients, tau, innovation_variance, doppler)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn innovation_variance(&self) -> f64 {
        self.innovation_variance
    }

    pub fn doppler(&self) -> f64 {
        self.doppler
    }

    /// `sqrt(1 - tau^2)`, the memory weight.
    pub fn memory_gain(&self) -> f64 {
        (1.0 - self.tau * self.tau).sqrt()
    }

    /// Coefficients actually applied to past gains: `sqrt(1 - tau^2) c(l)`.
    pub fn effective_coefficients(&self) -> Vec<Complex64> {
        let g = self.memory_gain();
        self.coefficients.iter().map(|c| c * g).collect()
    }

    /// Variance of the innovation term `tau w(n)`.
    pub fn effective_innovation_variance(&self) -> f64 {
        self.tau * self.tau * self.innovation_variance
    }

    /// Companion (state transition) matrix built from the effective coefficients.
    pub fn companion_matrix(&self) -> DMatrix<Complex64> {
        let p = self.order();
        let mut m = DMatrix::zeros(p, p);
        for (l, a) in self.effective_coefficients().into_iter().enumerate() {
            m[(0, l)] = a;
        }
        for i in 1..p {
            m[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Spectral radius of the effective companion matrix.
    pub fn spectral_radius(&self) -> Result<f64> {
        let m = self.companion_matrix();
        if m.nrows() == 1 {
            return Ok(m[(0, 0)].norm());
        }
        let eig = m
            .eigenvalues()
            .ok_or_else(|| Error::Numerical("companion eigenvalue iteration did not converge".into()))?;
        Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Stationary state covariance `E[x x^H]` of `x(n) = [h(n), ..., h(n-p+1)]`.
    ///
    /// Solves `P = A P A^H + Q` by Smith doubling. Undefined for a frozen
    /// channel (`tau == 0`).
    pub fn stationary_covariance(&self) -> Result<DMatrix<Complex64>> {
        if self.tau == 0.0 {
            return Err(Error::Domain(
                "a process without innovation has no stationary covariance".into(),
            ));
        }
        let p = self.order();
        let mut a = self.companion_matrix();
        let mut cov = DMatrix::zeros(p, p);
        cov[(0, 0)] = Complex64::new(self.effective_innovation_variance(), 0.0);
        for _ in 0..200 {
            let step = &a * &cov * a.adjoint();
            cov += &step;
            a = &a * &a;
            if a.norm() < 1e-18 || step.norm() <= 1e-17 * cov.norm() {
                return Ok(hermitize(cov));
            }
        }
        Err(Error::Numerical("stationary covariance did not converge".into()))
    }

    /// Analytic autocovariance `R(l) = E[h(n) h*(n-l)]` for `l = 0..=max_lag`.
    pub fn autocovariance(&self, max_lag: usize) -> Result<Vec<Complex64>> {
        let cov = self.stationary_covariance()?;
        let p = self.order();
        let a = self.effective_coefficients();
        let mut r: Vec<Complex64> = (0..p.min(max_lag + 1)).map(|l| cov[(0, l)]).collect();
        for lag in p..=max_lag {
            let v = (1..=p)
                .map(|m| {
                    let back = lag as isize - m as isize;
                    let rv = if back >= 0 { r[back as usize] } else { r[(-back) as usize].conj() };
                    a[m - 1] * rv
                })
                .sum();
            r.push(v);
        }
        Ok(r)
    }

    /// Burn-in length applied before statistics are collected: `10 p`.
    pub fn default_burn_in(&self) -> usize {
        10 * self.order()
    }

    /// Draws a history from the stationary law (or iid `CN(0, 1)` entries
    /// when the channel is frozen).
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> LinkState {
        let p = self.order();
        let z: Vec<Complex64> = (0..p).map(|_| complex_gaussian(rng, 1.0)).collect();
        let history = match self.stationary_covariance().ok().and_then(cholesky_factor) {
            Some(l) => (0..p)
                .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
                .collect(),
            None => z,
        };
        LinkState { history, time_index: 0 }
    }
}

/// Builds the configuration selected by `mode`.
pub fn make_config(mode: ChannelMode) -> Result<FadingConfig> {
    match mode {
        ChannelMode::GaussMarkov { tau } => FadingConfig::gauss_markov(tau),
        ChannelMode::Jakes { order, doppler } => FadingConfig::jakes(order, doppler),
    }
}

/// Jakes autocorrelation `R(l) = J0(2 pi f_m l)`.
pub fn jakes_autocorrelation(lag: i64, doppler: f64) -> Result<f64> {
    if lag < 0 {
        return Err(Error::Domain(format!("lag must be nonnegative, got {lag}")));
    }
    if !(doppler >= 0.0 && doppler.is_finite()) {
        return Err(Error::Domain(format!("doppler must be nonnegative, got {doppler}")));
    }
    bessel_j0(2.0 * PI * doppler * lag as f64)
}

/// Solves the Yule-Walker equations by Levinson-Durbin recursion.
///
/// `autocorr` holds `R(0..=order)`. Returns the AR coefficients and the
/// residual variance `R(0) - sum_l c(l) R(l)`.
pub fn yule_walker(autocorr: &[f64], order: usize) -> Result<(Vec<Complex64>, f64)> {
    if order == 0 {
        return Err(Error::Domain("AR order must be at least 1".into()));
    }
    if autocorr.len() != order + 1 {
        return Err(Error::Contract(format!(
            "need {} autocorrelation values for order {order}, got {}",
            order + 1,
            autocorr.len()
        )));
    }
    if autocorr.iter().any(|r| !r.is_finite()) {
        return Err(Error::Domain("autocorrelation values must be finite".into()));
    }
    if autocorr[0] <= 0.0 {
        return Err(Error::Domain(format!("R(0) must be positive, got {}", autocorr[0])));
    }

    let cond = toeplitz_condition(&autocorr[..order]);
    if !(cond <= MAX_TOEPLITZ_CONDITION) {
        return Err(Error::Numerical(format!(
            "Toeplitz matrix is ill-conditioned (condition estimate {cond:.3e})"
        )));
    }

    let mut a = vec![0.0; order + 1];
    let mut err = autocorr[0];
    for m in 1..=order {
        let acc = autocorr[m] - (1..m).map(|l| a[l] * autocorr[m - l]).sum::<f64>();
        let k = acc / err;
        let prev = a.clone();
        a[m] = k;
        for l in 1..m {
            a[l] = prev[l] - k * prev[m - l];
        }
        err *= 1.0 - k * k;
    }
    let coefficients = &a[1..];
    let residual =
        autocorr[0] - coefficients.iter().zip(&autocorr[1..]).map(|(c, r)| c * r).sum::<f64>();
    if residual < 0.0 {
        return Err(Error::Numerical(format!("negative residual variance {residual:.3e}")));
    }
    Ok((coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect(), residual))
}

/// 2-norm condition number of the symmetric Toeplitz matrix with first row `row`.
fn toeplitz_condition(row: &[f64]) -> f64 {
    let p = row.len();
    let t = DMatrix::from_fn(p, p, |i, j| row[i.abs_diff(j)]);
    let sv = t.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 { f64::INFINITY } else { max / min }
}

/// Power spectral density of the process at normalized frequency `f`.
///
/// Convention: `S(f) = tau^2 sigma_p^2 / |1 - sum_l a(l) e^{-j 2 pi f l}|^2`
/// with `a` the effective coefficients, i.e. the denominator polynomial's
/// coefficients are the negated recursion weights. Positive `a(1)` puts the
/// spectral peak at DC. Returns `+inf` when the denominator magnitude falls
/// below [`PSD_POLE_GUARD`].
pub fn psd(config: &FadingConfig, f: f64) -> Result<f64> {
    if !(-0.5..=0.5).contains(&f) {
        return Err(Error::Domain(format!("frequency must lie in [-0.5, 0.5], got {f}")));
    }
    let denom = config
        .effective_coefficients()
        .iter()
        .enumerate()
        .fold(Complex64::new(1.0, 0.0), |acc, (l, a)| {
            acc - a * Complex64::from_polar(1.0, -2.0 * PI * f * (l + 1) as f64)
        })
        .norm();
    if denom < PSD_POLE_GUARD {
        return Ok(f64::INFINITY);
    }
    Ok(config.effective_innovation_variance() / (denom * denom))
}

/// Memory of one link: `[h(n), h(n-1), ..., h(n-p+1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    history: Vec<Complex64>,
    time_index: u64,
}

impl LinkState {
    pub fn new(history: Vec<Complex64>) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::Contract("link history must hold at least one gain".into()));
        }
        Ok(Self { history, time_index: 0 })
    }

    pub fn history(&self) -> &[Complex64] {
        &self.history
    }

    pub fn current(&self) -> Complex64 {
        self.history[0]
    }

    pub fn time_index(&self) -> u64 {
        self.time_index
    }

    /// Advances the recursion one sample and returns the new gain.
    ///
    /// One innovation is drawn per call, even when `tau == 0`, so the
    /// random stream stays aligned across configurations.
    pub fn step<R: Rng + ?Sized>(&mut self, config: &FadingConfig, rng: &mut R) -> Complex64 {
        debug_assert_eq!(self.history.len(), config.order());
        let w = complex_gaussian(rng, config.innovation_variance());
        let memory: Complex64 =
            config.coefficients().iter().zip(&self.history).map(|(c, h)| c * h).sum();
        let gain = memory * config.memory_gain() + w * config.tau();
        self.history.rotate_right(1);
        self.history[0] = gain;
        self.time_index += 1;
        gain
    }
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Gains of every (tx, rx, subcarrier) link at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    n_t: usize,
    n_r: usize,
    subcarriers: usize,
    gains: Vec<Complex64>,
}

impl ChannelTensor {
    /// `gains` is laid out tx-major: index `(i * n_r + j) * subcarriers + k`.
    pub fn new(n_t: usize, n_r: usize, subcarriers: usize, gains: Vec<Complex64>) -> Result<Self> {
        if n_t == 0 || n_r == 0 || subcarriers == 0 {
            return Err(Error::Contract("tensor dimensions must be positive".into()));
        }
        if gains.len() != n_t * n_r * subcarriers {
            return Err(Error::Contract(format!(
                "expected {} gains for {n_t}x{n_r}x{subcarriers}, got {}",
                n_t * n_r * subcarriers,
                gains.len()
            )));
        }
        if gains.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::Domain("channel gains must be finite".into()));
        }
        Ok(Self { n_t, n_r, subcarriers, gains })
    }

    pub fn zeros(n_t: usize, n_r: usize, subcarriers: usize) -> Self {
        Self { n_t, n_r, subcarriers, gains: vec![Complex64::new(0.0, 0.0); n_t * n_r * subcarriers] }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_t, self.n_r, self.subcarriers)
    }

    pub fn link_count(&self) -> usize {
        self.gains.len()
    }

    /// Flat link index of `(tx, rx, subcarrier)`.
    pub fn link_index(&self, tx: usize, rx: usize, k: usize) -> usize {
        (tx * self.n_r + rx) * self.subcarriers + k
    }

    pub fn get(&self, tx: usize, rx: usize, k: usize) -> Complex64 {
        self.gains[self.link_index(tx, rx, k)]
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    /// The `n_r x n_t` channel matrix of subcarrier `k`.
    pub fn matrix(&self, k: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n_r, self.n_t, |j, i| self.get(i, j, k))
    }
}

/// Independent fading links over an `n_t x n_r x K` grid, each with its own
/// random substream.
#[derive(Debug, Clone)]
pub struct LinkGrid {
    config: FadingConfig,
    dims: (usize, usize, usize),
    states: Vec<LinkState>,
    rngs: Vec<ChaCha8Rng>,
}

impl LinkGrid {
    /// Seeds every link from `(seed, trial, link)`, draws a stationary
    /// history and discards `burn_in` samples.
    pub fn new(
        config: FadingConfig,
        dims: (usize, usize, usize),
        seed: u64,
        trial: u64,
        burn_in: usize,
    ) -> Result<Self> {
        let (n_t, n_r, k) = dims;
        if n_t == 0 || n_r == 0 || k == 0 {
            return Err(Error::Contract("grid dimensions must be positive".into()));
        }
        let links = n_t * n_r * k;
        let mut rngs: Vec<ChaCha8Rng> =
            (0..links).map(|l| substream(seed, trial, l as u64, Purpose::Channel)).collect();
        let states = rngs
            .iter_mut()
            .map(|rng| {
                let mut s = config.initial_state(rng);
                for _ in 0..burn_in {
                    s.step(&config, rng);
                }
                s.time_index = 0;
                s
            })
            .collect();
        Ok(Self { config, dims, states, rngs })
    }

    pub fn config(&self) -> &FadingConfig {
        &self.config
    }

    pub fn states(&self) -> &[LinkState] {
        &self.states
    }

    /// Steps every link once.
    pub fn sample_tensor(&mut self) -> ChannelTensor {
        let gains = self
            .states
            .iter_mut()
            .zip(self.rngs.iter_mut())
            .map(|(s, rng)| s.step(&self.config, rng))
            .collect();
        let (n_t, n_r, k) = self.dims;
        ChannelTensor { n_t, n_r, subcarriers: k, gains }
    }

    pub fn trace(&mut self, samples: usize) -> Vec<ChannelTensor> {
        (0..samples).map(|_| self.sample_tensor()).collect()
    }
}

pub(crate) fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj) * Complex64::new(0.5, 0.0)
}

fn cholesky_factor(cov: DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = cov.nrows();
    let scale = (0..n).map(|i| cov[(i, i)].re).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    for _ in 0..8 {
        let m = &cov + DMatrix::<Complex64>::identity(n, n) * Complex64::new(jitter, 0.0);
        if let Some(ch) = m.cholesky() {
            return Some(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 100.0 };
    }
    None
}
