//! Complex Kalman filter over the AR(p) state-space model.
//!
//! State `x(n) = [h(n), ..., h(n-p+1)]`, transition `x(n) = Phi x(n-1) + w(n)`,
//! scalar measurement `y(n) = M x(n) + v(n)`. The same filter serves as the
//! UE-local channel estimator and as the predictor shared by BS and UE.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{hermitize, FadingConfig};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Tolerance for Hermitian and PSD checks on covariance inputs.
pub const COVARIANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    transition: DMatrix<Complex64>,
    process_noise_cov: DMatrix<Complex64>,
    measurement: DVector<Complex64>,
    measurement_noise_var: f64,
    transition_adjoint: DMatrix<Complex64>,
    measurement_conj: DVector<Complex64>,
}

impl StateSpaceModel {
    /// Validates a model.
    ///
    /// `measurement` holds the entries of the 1 x p row `M`. The transition
    /// must have spectral radius below one; a radius of one is tolerated
    /// when the process noise is zero (deterministic, non-growing state).
    pub fn new(
        transition: DMatrix<Complex64>,
        process_noise_cov: DMatrix<Complex64>,
        measurement: DVector<Complex64>,
        measurement_noise_var: f64,
    ) -> Result<Self> {
        let p = transition.nrows();
        if p == 0 || transition.ncols() != p {
            return Err(Error::Contract(format!(
                "transition must be square and nonempty, got {}x{}",
                transition.nrows(),
                transition.ncols()
            )));
        }
        if process_noise_cov.shape() != (p, p) || measurement.len() != p {
            return Err(Error::Contract(format!(
                "model dimensions disagree: transition {p}x{p}, process noise {:?}, measurement {}",
                process_noise_cov.shape(),
                measurement.len()
            )));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !transition.iter().all(finite)
            || !process_noise_cov.iter().all(finite)
            || !measurement.iter().all(finite)
        {
            return Err(Error::Domain("model entries must be finite".into()));
        }
        if !(measurement_noise_var >= 0.0 && measurement_noise_var.is_finite()) {
            return Err(Error::Domain(format!(
                "measurement noise variance must be nonnegative, got {measurement_noise_var}"
            )));
        }
        let skew = (&process_noise_cov - process_noise_cov.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if skew > COVARIANCE_TOLERANCE {
            return Err(Error::Domain("process noise covariance must be Hermitian".into()));
        }
        let q_min = hermitize(process_noise_cov.clone())
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if q_min < -COVARIANCE_TOLERANCE {
            return Err(Error::Domain(format!(
                "process noise covariance is not PSD (eigenvalue {q_min:.3e})"
            )));
        }
        let radius = spectral_radius(&transition)?;
        let deterministic = process_noise_cov.iter().all(|z| *z == ZERO);
        let limit = if deterministic { 1.0 + 1e-12 } else { 1.0 };
        if radius >= limit {
            return Err(Error::Unstable { radius });
        }
        let transition_adjoint = transition.adjoint();
        let measurement_conj = measurement.map(|z| z.conj());
        Ok(Self {
            transition,
            process_noise_cov,
            measurement,
            measurement_noise_var,
            transition_adjoint,
            measurement_conj,
        })
    }

    /// Model matched to a fading process, observed through a unit pilot.
    ///
    /// `Phi` carries the effective coefficients and `Q_w(0,0)` the effective
    /// innovation variance, so the state equation reproduces the fading
    /// recursion exactly.
    pub fn from_fading(config: &FadingConfig, measurement_noise_var: f64) -> Result<Self> {
        let p = config.order();
        let mut process_noise_cov = DMatrix::zeros(p, p);
        process_noise_cov[(0, 0)] = Complex64::new(config.effective_innovation_variance(), 0.0);
        let mut measurement = DVector::zeros(p);
        measurement[0] = ONE;
        Self::new(config.companion_matrix(), process_noise_cov, measurement, measurement_noise_var)
    }

    /// Same dynamics with a different measurement noise variance.
    pub fn with_measurement_noise(&self, measurement_noise_var: f64) -> Result<Self> {
        if !(measurement_noise_var >= 0.0 && measurement_noise_var.is_finite()) {
            return Err(Error::Domain(format!(
                "measurement noise variance must be nonnegative, got {measurement_noise_var}"
            )));
        }
        Ok(Self { measurement_noise_var, ..self.clone() })
    }

    pub fn order(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<Complex64> {
        &self.transition
    }

    pub fn process_noise_cov(&self) -> &DMatrix<Complex64> {
        &self.process_noise_cov
    }

    pub fn measurement(&self) -> &DVector<Complex64> {
        &self.measurement
    }

    pub fn measurement_noise_var(&self) -> f64 {
        self.measurement_noise_var
    }
}

fn spectral_radius(m: &DMatrix<Complex64>) -> Result<f64> {
    if m.nrows() == 1 {
        return Ok(m[(0, 0)].norm());
    }
    let eig = m
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// State estimate and its error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanBelief {
    pub state_estimate: DVector<Complex64>,
    pub error_covariance: DMatrix<Complex64>,
}

impl KalmanBelief {
    pub fn order(&self) -> usize {
        self.state_estimate.len()
    }

    /// First state component, the current channel estimate.
    pub fn channel_estimate(&self) -> Complex64 {
        self.state_estimate[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Innovation {
    pub value: Complex64,
    pub gain: DVector<Complex64>,
    /// Scalar innovation covariance `M P M^H + Q_v`.
    pub covariance: f64,
}

/// Zero state, identity covariance.
pub fn init_belief(order: usize) -> Result<KalmanBelief> {
    if order == 0 {
        return Err(Error::Domain("filter order must be at least 1".into()));
    }
    Ok(KalmanBelief {
        state_estimate: DVector::zeros(order),
        error_covariance: DMatrix::identity(order, order),
    })
}

fn check_dims(belief: &KalmanBelief, model: &StateSpaceModel) -> Result<()> {
    let p = model.order();
    if belief.state_estimate.len() != p || belief.error_covariance.shape() != (p, p) {
        return Err(Error::Contract(format!(
            "belief of order {} does not match model of order {p}",
            belief.state_estimate.len()
        )));
    }
    Ok(())
}

/// Scratch buffers for the in-place filter steps.
#[derive(Debug, Clone)]
pub struct KalmanWorkspace {
    vector: DVector<Complex64>,
    matrix: DMatrix<Complex64>,
    gain: DVector<Complex64>,
}

impl KalmanWorkspace {
    pub fn new(order: usize) -> Self {
        Self {
            vector: DVector::zeros(order),
            matrix: DMatrix::zeros(order, order),
            gain: DVector::zeros(order),
        }
    }

    /// Gain of the most recent [`update_in_place`].
    pub fn gain(&self) -> &DVector<Complex64> {
        &self.gain
    }
}

fn hermitize_in_place(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let a = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = a;
            m[(j, i)] = a.conj();
        }
    }
}

/// Time update: `x = Phi x`, `P = Phi P Phi^H + Q_w`.
pub fn predict_in_place(
    belief: &mut KalmanBelief,
    model: &StateSpaceModel,
    ws: &mut KalmanWorkspace,
) -> Result<()> {
    check_dims(belief, model)?;
    let phi = &model.transition;
    phi.mul_to(&belief.state_estimate, &mut ws.vector);
    belief.state_estimate.copy_from(&ws.vector);
    phi.mul_to(&belief.error_covariance, &mut ws.matrix);
    ws.matrix.mul_to(&model.transition_adjoint, &mut belief.error_covariance);
    belief.error_covariance += &model.process_noise_cov;
    hermitize_in_place(&mut belief.error_covariance);
    Ok(())
}

/// Measurement update with scalar observation `y`; returns the innovation
/// value and its covariance, with the gain left in `ws`.
///
/// A zero innovation covariance (exact prior, noiseless pilot) yields a
/// zero gain, i.e. the pseudo-inverse of the scalar.
pub fn update_in_place(
    belief: &mut KalmanBelief,
    observation: Complex64,
    model: &StateSpaceModel,
    ws: &mut KalmanWorkspace,
) -> Result<(Complex64, f64)> {
    check_dims(belief, model)?;
    if !(observation.re.is_finite() && observation.im.is_finite()) {
        return Err(Error::Domain("observation must be finite".into()));
    }
    let m = &model.measurement;
    // P M^H
    belief.error_covariance.mul_to(&model.measurement_conj, &mut ws.vector);
    let s = m.iter().zip(ws.vector.iter()).map(|(a, b)| a * b).sum::<Complex64>().re
        + model.measurement_noise_var;
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Numerical(format!("innovation covariance {s} is not positive")));
    }
    if s == 0.0 {
        ws.gain.fill(ZERO);
    } else {
        for (g, v) in ws.gain.iter_mut().zip(ws.vector.iter()) {
            *g = v / s;
        }
    }
    let predicted = m.iter().zip(belief.state_estimate.iter()).map(|(a, b)| a * b).sum::<Complex64>();
    let value = observation - predicted;
    belief.state_estimate.axpy(value, &ws.gain, ONE);
    // (I - G M) P = P - G (P M^H)^H for Hermitian P
    belief.error_covariance.gerc(-ONE, &ws.gain, &ws.vector, ONE);
    hermitize_in_place(&mut belief.error_covariance);
    if !belief.state_estimate.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numerical("non-finite state estimate after update".into()));
    }
    Ok((value, s))
}

/// Time update: `x = Phi x`, `P = Phi P Phi^H + Q_w`.
pub fn predict(belief: &KalmanBelief, model: &StateSpaceModel) -> Result<KalmanBelief> {
    let mut next = belief.clone();
    predict_in_place(&mut next, model, &mut KalmanWorkspace::new(model.order()))?;
    Ok(next)
}

/// Measurement update with scalar observation `y`.
pub fn update(
    prior: &KalmanBelief,
    observation: Complex64,
    model: &StateSpaceModel,
) -> Result<(KalmanBelief, Innovation)> {
    let mut posterior = prior.clone();
    let mut ws = KalmanWorkspace::new(model.order());
    let (value, covariance) = update_in_place(&mut posterior, observation, model, &mut ws)?;
    Ok((posterior, Innovation { value, gain: ws.gain, covariance }))
}

/// One-step-ahead channel prediction: first entry of `Phi x`.
pub fn predict_channel(belief: &KalmanBelief, model: &StateSpaceModel) -> Complex64 {
    model
        .transition
        .row(0)
        .iter()
        .zip(belief.state_estimate.iter())
        .map(|(a, b)| a * b)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar(phi: f64, q_w: f64, q_v: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, c(phi)),
            DMatrix::from_element(1, 1, c(q_w)),
            DVector::from_element(1, ONE),
            q_v,
        )
        .unwrap()
    }

    #[test]
    fn init_examples() {
        let b = init_belief(3).unwrap();
        assert_eq!(b.state_estimate, DVector::zeros(3));
        assert_eq!(b.error_covariance, DMatrix::identity(3, 3));
        assert!(init_belief(0).is_err());
    }

    #[test]
    fn identity_model_predict_is_noop() {
        let model = scalar(1.0, 0.0, 1.0);
        let b = KalmanBelief {
            state_estimate: DVector::from_element(1, Complex64::new(0.4, -2.0)),
            error_covariance: DMatrix::from_element(1, 1, c(0.7)),
        };
        assert_eq!(predict(&b, &model).unwrap(), b);
    }

    #[test]
    fn hand_computed_update() {
        let model = scalar(1.0, 0.0, 1.0);
        let prior = init_belief(1).unwrap();
        let (post, inn) = update(&prior, c(2.0), &model).unwrap();
        assert_eq!(inn.gain[0], c(0.5));
        assert_eq!(inn.value, c(2.0));
        assert_eq!(post.state_estimate[0], c(1.0));
        assert_eq!(post.error_covariance[(0, 0)], c(0.5));
    }

    #[test]
    fn noiseless_measurement_is_trusted() {
        let model = scalar(0.9, 0.19, 0.0);
        let prior = predict(&init_belief(1).unwrap(), &model).unwrap();
        let y = Complex64::new(0.3, -0.8);
        let (post, _) = update(&prior, y, &model).unwrap();
        assert_eq!(post.state_estimate[0], y);
        assert_eq!(post.error_covariance[(0, 0)], ZERO);
    }

    #[test]
    fn zero_innovation_covariance_gives_zero_gain() {
        let model = scalar(1.0, 0.0, 0.0);
        let exact = KalmanBelief {
            state_estimate: DVector::from_element(1, c(1.5)),
            error_covariance: DMatrix::zeros(1, 1),
        };
        let (post, inn) = update(&exact, c(1.5), &model).unwrap();
        assert_eq!(inn.gain[0], ZERO);
        assert_eq!(post, exact);
    }

    #[test]
    fn predict_channel_examples() {
        let model = scalar(0.8, 0.36, 0.1);
        let b = KalmanBelief {
            state_estimate: DVector::from_element(1, ONE),
            error_covariance: DMatrix::identity(1, 1),
        };
        assert_eq!(predict_channel(&b, &model), c(0.8));
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let model = scalar(0.5, 0.75, 0.1);
        let b = init_belief(2).unwrap();
        assert!(matches!(predict(&b, &model), Err(Error::Contract(_))));
        assert!(matches!(update(&b, ONE, &model), Err(Error::Contract(_))));
    }

    #[test]
    fn model_validation() {
        let id = DMatrix::<Complex64>::identity(2, 2);
        let e1 = DVector::from_vec(vec![ONE, ZERO]);
        // identity transition with no process noise is allowed
        assert!(StateSpaceModel::new(id.clone(), DMatrix::zeros(2, 2), e1.clone(), 0.1).is_ok());
        // but unit radius with noise is not
        let mut q = DMatrix::zeros(2, 2);
        q[(0, 0)] = ONE;
        assert!(matches!(
            StateSpaceModel::new(id.clone(), q.clone(), e1.clone(), 0.1),
            Err(Error::Unstable { .. })
        ));
        let mut neg = DMatrix::zeros(2, 2);
        neg[(1, 1)] = c(-1.0);
        assert!(StateSpaceModel::new(id * c(0.5), neg, e1.clone(), 0.1).is_err());
        assert!(StateSpaceModel::new(DMatrix::identity(2, 2) * c(0.5), q, e1, -1.0).is_err());
    }

    #[test]
    fn from_fading_absorbs_memory_gain() {
        let config = FadingConfig::gauss_markov(0.6).unwrap();
        let model = StateSpaceModel::from_fading(&config, 0.1).unwrap();
        assert_abs_diff_eq!(model.transition()[(0, 0)].re, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(model.process_noise_cov()[(0, 0)].re, 0.36, epsilon = 1e-15);
        assert_eq!(model.measurement_noise_var(), 0.1);
        let quieter = model.with_measurement_noise(0.01).unwrap();
        assert_eq!(quieter.transition(), model.transition());
        assert_eq!(quieter.measurement_noise_var(), 0.01);
    }
}
