//! Gradient estimation from noisy field samples.
//!
//! Two estimators walk the robot along each coordinate axis around the
//! current position:
//!
//! * central differences: one sample at `+h` and one at `-h` per axis;
//! * line fit: `n` equally spaced samples across `[-h, +h]`, reduced to the
//!   slope of an ordinary least-squares line. Fitting over a segment longer
//!   than the carrier wavelength averages out small-scale fading.
//!
//! Every leg of the walk is charged with motor noise. Regressions use the
//! commanded offsets because the robot cannot observe where it really is.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{path_loss_derivatives, PathLossParams};
use crate::position::{norm, Position};
use crate::sensing::Sensor;

/// Something the estimator can walk around and sample.
pub trait Probe {
    fn dim(&self) -> usize;
    /// Random end-point error for a commanded displacement.
    fn motor_error(&mut self, displacement: &[f64]) -> Vec<f64>;
    /// One measurement at the true position `at`.
    fn sample(&mut self, at: &Position) -> Result<f64>;
}

impl Probe for Sensor {
    fn dim(&self) -> usize {
        Sensor::dim(self)
    }

    fn motor_error(&mut self, displacement: &[f64]) -> Vec<f64> {
        Sensor::motor_error(self, displacement)
    }

    fn sample(&mut self, at: &Position) -> Result<f64> {
        self.measure(at)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    CentralDifference,
    #[default]
    LineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Half-width for standalone use; optimizer runs take `h_k` from the gain
    /// schedule instead.
    #[serde(default = "default_h")]
    pub h_m: f64,
    #[serde(default = "default_samples")]
    pub samples_per_axis: usize,
}

fn default_h() -> f64 {
    0.5
}

fn default_samples() -> usize {
    21
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            kind: EstimatorKind::LineFit,
            h_m: default_h(),
            samples_per_axis: default_samples(),
        }
    }
}

impl EstimatorConfig {
    pub fn central_difference(h_m: f64) -> Self {
        EstimatorConfig {
            kind: EstimatorKind::CentralDifference,
            h_m,
            samples_per_axis: 2,
        }
    }

    pub fn line_fit(h_m: f64, samples_per_axis: usize) -> Self {
        EstimatorConfig {
            kind: EstimatorKind::LineFit,
            h_m,
            samples_per_axis,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_h(self.h_m)?;
        if self.kind == EstimatorKind::LineFit && self.samples_per_axis < 2 {
            return Err(Error::param("samples_per_axis", "line fit needs at least 2 samples per axis"));
        }
        Ok(())
    }
}

/// One measurement taken during an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub axis: usize,
    /// Commanded offset from the center along `axis`.
    pub offset_m: f64,
    /// Where the sample was really taken.
    pub at: Position,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g_hat: Vec<f64>,
    pub h_used: f64,
    pub n_measurements: usize,
    pub kind: EstimatorKind,
    pub samples: Vec<ProbeSample>,
    /// True robot position after returning to the (believed) center.
    pub end: Position,
}

/// Gradient estimators usable inside the optimizer.
///
/// Perturbation-based estimators (random directions, simultaneous
/// perturbation) fit behind the same interface.
pub trait GradientEstimator {
    fn kind(&self) -> EstimatorKind;
    fn estimate(&self, probe: &mut dyn Probe, center: &Position, h: f64) -> Result<GradientEstimate>;
}

impl GradientEstimator for EstimatorConfig {
    fn kind(&self) -> EstimatorKind {
        self.kind
    }

    fn estimate(&self, probe: &mut dyn Probe, center: &Position, h: f64) -> Result<GradientEstimate> {
        match self.kind {
            EstimatorKind::CentralDifference => estimate_central_difference(probe, center, h),
            EstimatorKind::LineFit => estimate_line_fit(probe, center, h, self.samples_per_axis),
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::param("h", format!("must be finite and > 0, got {h}")))
    }
}

/// Dead-reckoning walk: the robot moves between targets in its own believed
/// frame while motor errors accumulate into an unseen drift.
struct Walk {
    believed: Position,
    drift: Vec<f64>,
}

impl Walk {
    fn start(center: &Position) -> Self {
        Walk {
            believed: center.clone(),
            drift: vec![0.0; center.dim()],
        }
    }

    fn go(&mut self, probe: &mut dyn Probe, target: Position) -> Position {
        let displacement = target.sub(&self.believed);
        let err = probe.motor_error(displacement.coords());
        for (d, e) in self.drift.iter_mut().zip(err) {
            *d += e;
        }
        self.believed = target;
        self.actual()
    }

    fn actual(&self) -> Position {
        self.believed.add_scaled(&self.drift, 1.0)
    }
}

/// `(m_plus - m_minus) / 2h`.
pub fn central_difference(m_plus: f64, m_minus: f64, h: f64) -> f64 {
    (m_plus - m_minus) / (2.0 * h)
}

/// Slope of the ordinary least-squares line through `(offsets, values)`.
///
/// With exactly two points this is the two-point slope, which for offsets
/// `-h, +h` is bit-identical to [`central_difference`].
pub fn ols_slope(offsets: &[f64], values: &[f64]) -> Result<f64> {
    assert_eq!(offsets.len(), values.len());
    if offsets.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    if offsets.len() == 2 {
        let run = offsets[1] - offsets[0];
        if run == 0.0 {
            return Err(Error::DegenerateFit);
        }
        return Ok((values[1] - values[0]) / run);
    }
    let n = offsets.len() as f64;
    let mo = offsets.iter().sum::<f64>() / n;
    let mv = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (o, v) in offsets.iter().zip(values) {
        sxy += (o - mo) * (v - mv);
        sxx += (o - mo) * (o - mo);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    Ok(sxy / sxx)
}

/// Probe order per axis: `+h`, `-h`, back to center.
pub fn estimate_central_difference(probe: &mut dyn Probe, x: &Position, h: f64) -> Result<GradientEstimate> {
    check_h(h)?;
    let p = probe.dim();
    let mut walk = Walk::start(x);
    let mut g_hat = Vec::with_capacity(p);
    let mut samples = Vec::with_capacity(2 * p);
    for i in 0..p {
        let mut vals = [0.0; 2];
        for (slot, offset) in [(0, h), (1, -h)] {
            let at = walk.go(probe, x.offset_axis(i, offset));
            let value = probe.sample(&at)?;
            vals[slot] = value;
            samples.push(ProbeSample {
                axis: i,
                offset_m: offset,
                at,
                value,
            });
        }
        walk.go(probe, x.clone());
        g_hat.push(central_difference(vals[0], vals[1], h));
    }
    Ok(GradientEstimate {
        g_hat,
        h_used: h,
        n_measurements: 2 * p,
        kind: EstimatorKind::CentralDifference,
        samples,
        end: walk.actual(),
    })
}

/// Sweeps each axis from `-h` to `+h`, sampling `n` equally spaced points.
pub fn estimate_line_fit(probe: &mut dyn Probe, x: &Position, h: f64, n: usize) -> Result<GradientEstimate> {
    check_h(h)?;
    if n < 2 {
        return Err(Error::DegenerateFit);
    }
    let p = probe.dim();
    let mut walk = Walk::start(x);
    let mut g_hat = Vec::with_capacity(p);
    let mut samples = Vec::with_capacity(n * p);
    let offsets: Vec<f64> = (0..n)
        .map(|j| -h + 2.0 * h * j as f64 / (n - 1) as f64)
        .collect();
    let mut values = vec![0.0; n];
    for i in 0..p {
        for (j, &offset) in offsets.iter().enumerate() {
            let at = walk.go(probe, x.offset_axis(i, offset));
            let value = probe.sample(&at)?;
            values[j] = value;
            samples.push(ProbeSample {
                axis: i,
                offset_m: offset,
                at,
                value,
            });
        }
        walk.go(probe, x.clone());
        g_hat.push(ols_slope(&offsets, &values)?);
    }
    Ok(GradientEstimate {
        g_hat,
        h_used: h,
        n_measurements: n * p,
        kind: EstimatorKind::LineFit,
        samples,
        end: walk.actual(),
    })
}

/// Variance of one central-difference component under measurement noise
/// `sigma`: `sigma^2 / (2 h^2)`.
pub fn predicted_variance(sigma: f64, h: f64) -> f64 {
    sigma * sigma / (2.0 * h * h)
}

/// Variance of the line-fit slope with `n` equally spaced offsets on `[-h, h]`.
pub fn predicted_line_fit_variance(sigma: f64, h: f64, n: usize) -> f64 {
    let step = 2.0 * h / (n - 1) as f64;
    let sxx: f64 = (0..n)
        .map(|j| {
            let o = -h + step * j as f64;
            o * o
        })
        .sum();
    sigma * sigma / sxx
}

/// Upper bound on the truncation bias of the central difference taken along
/// the radial direction at `x`.
///
/// The remainder is `h²/12` times a sum of two third derivatives at unknown
/// points within `h`; `|f'''|` decays like `1/d³`, so both are bounded by its
/// value at `d - h`.
pub fn predicted_bias_bound(params: &PathLossParams, x: &Position, h: f64, epsilon_floor_m: f64) -> Result<f64> {
    check_h(h)?;
    let d = x.distance(&params.source);
    let third = path_loss_derivatives(params, d - h, epsilon_floor_m)?.third;
    Ok(h * h / 12.0 * 2.0 * third.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrRegime {
    SmallHValid,
    BiasDominated,
}

/// Signed SNR of one gradient component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrEntry {
    /// `(√2 h/σ) ∂f + (√2 h³ / 12σ) Δ₃`
    pub full: f64,
    /// `(h/σ) ∂f`
    pub small_h: f64,
    pub regime: SnrRegime,
}

/// SNR of a central-difference gradient component.
///
/// `third_derivative_term` is the sum of the two third derivatives in the
/// Taylor remainder. The bias is considered dominant once its term exceeds
/// 10% of the leading term.
pub fn snr(gradient_component: f64, sigma: f64, h: f64, third_derivative_term: f64) -> Result<SnrEntry> {
    if sigma == 0.0 {
        return Err(Error::ZeroNoise);
    }
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be > 0"));
    }
    check_h(h)?;
    let leading = 2f64.sqrt() * h / sigma * gradient_component;
    let bias = 2f64.sqrt() * h.powi(3) / (12.0 * sigma) * third_derivative_term;
    let regime = if bias.abs() > 0.1 * leading.abs() {
        SnrRegime::BiasDominated
    } else {
        SnrRegime::SmallHValid
    };
    Ok(SnrEntry {
        full: leading + bias,
        small_h: h / sigma * gradient_component,
        regime,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub components: Vec<SnrEntry>,
}

impl SnrReport {
    pub fn new(gradient: &[f64], third_terms: &[f64], sigma: f64, h: f64) -> Result<Self> {
        let components = gradient
            .iter()
            .zip(third_terms)
            .map(|(&g, &t)| snr(g, sigma, h, t))
            .collect::<Result<_>>()?;
        Ok(SnrReport { components })
    }

    pub fn any_bias_dominated(&self) -> bool {
        self.components.iter().any(|c| c.regime == SnrRegime::BiasDominated)
    }
}

/// Angle in radians between two vectors; `π` if either is zero.
pub fn angular_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let (a, b) = (norm(estimate), norm(truth));
    if a == 0.0 || b == 0.0 {
        return std::f64::consts::PI;
    }
    let cos = estimate.iter().zip(truth).map(|(x, y)| x * y).sum::<f64>() / (a * b);
    cos.clamp(-1.0, 1.0).acos()
}
