//! What the robot observes and where it actually ends up.
//!
//! Measurements are the true field plus i.i.d. zero-mean Gaussian noise.
//! Movements carry motor noise proportional to the commanded distance.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::position::{norm, Position};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotorMode {
    /// Commands are executed exactly.
    None,
    /// Error only along the direction of travel.
    Longitudinal,
    /// Isotropic error around the commanded end point.
    #[default]
    Vectorial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the additive measurement error, dB.
    pub sigma_meas_db: f64,
    #[serde(default)]
    pub motor_mode: MotorMode,
    /// Motor error standard deviation per meter commanded.
    #[serde(default = "default_sigma_motor")]
    pub sigma_motor: f64,
}

fn default_sigma_motor() -> f64 {
    0.02
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma_meas_db: 0.0,
            motor_mode: MotorMode::Vectorial,
            sigma_motor: default_sigma_motor(),
        }
    }
}

impl NoiseSpec {
    /// No measurement noise and exact motion.
    pub fn noiseless() -> Self {
        NoiseSpec {
            sigma_meas_db: 0.0,
            motor_mode: MotorMode::None,
            sigma_motor: 0.0,
        }
    }

    pub fn measurement_only(sigma_meas_db: f64) -> Self {
        NoiseSpec {
            sigma_meas_db,
            ..NoiseSpec::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_meas_db >= 0.0 && self.sigma_meas_db.is_finite()) {
            return Err(Error::param("sigma_meas_db", "must be finite and >= 0"));
        }
        if !(self.sigma_motor >= 0.0 && self.sigma_motor.is_finite()) {
            return Err(Error::param("sigma_motor", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Seeded random stream owned by one sensor or robot.
///
/// The full generator state is serializable so a run can be suspended and
/// resumed bit-for-bit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream(ChaCha8Rng);

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NoiseStream(rng)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

/// Commanded versus achieved end point of one movement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub commanded: Position,
    pub achieved: Position,
}

/// Random deviation of the end point for a commanded `displacement`.
pub fn motor_error(noise: &NoiseSpec, displacement: &[f64], rng: &mut NoiseStream) -> Vec<f64> {
    let length = norm(displacement);
    let sd = noise.sigma_motor * length;
    match noise.motor_mode {
        _ if sd == 0.0 => vec![0.0; displacement.len()],
        MotorMode::None => vec![0.0; displacement.len()],
        MotorMode::Longitudinal => {
            let along = sd * rng.standard_normal();
            displacement.iter().map(|d| along * d / length).collect()
        }
        MotorMode::Vectorial => displacement.iter().map(|_| sd * rng.standard_normal()).collect(),
    }
}

fn move_with(noise: &NoiseSpec, rng: &mut NoiseStream, from: &Position, to: &Position) -> MoveOutcome {
    let displacement = to.sub(from);
    let err = motor_error(noise, displacement.coords(), rng);
    MoveOutcome {
        commanded: to.clone(),
        achieved: to.add_scaled(&err, 1.0),
    }
}

/// A receiver observing one field.
#[derive(Clone, Debug)]
pub struct Sensor {
    field: Arc<FieldModel>,
    noise: NoiseSpec,
    rng: NoiseStream,
    noise_draws: u64,
}

impl Sensor {
    pub fn new(field: Arc<FieldModel>, noise: NoiseSpec, rng: NoiseStream) -> Result<Self> {
        noise.validate()?;
        Ok(Sensor {
            field,
            noise,
            rng,
            noise_draws: 0,
        })
    }

    pub fn field(&self) -> &Arc<FieldModel> {
        &self.field
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// Number of measurement-noise samples drawn so far.
    pub fn noise_draws(&self) -> u64 {
        self.noise_draws
    }

    pub fn stream(&self) -> &NoiseStream {
        &self.rng
    }

    /// True field value plus one fresh noise sample.
    pub fn measure(&mut self, x: &Position) -> Result<f64> {
        let truth = self.field.eval(x)?;
        if self.noise.sigma_meas_db == 0.0 {
            return Ok(truth);
        }
        self.noise_draws += 1;
        Ok(truth + self.noise.sigma_meas_db * self.rng.standard_normal())
    }

    /// End-point error for a commanded displacement under this sensor's motor noise.
    pub fn motor_error(&mut self, displacement: &[f64]) -> Vec<f64> {
        motor_error(&self.noise, displacement, &mut self.rng)
    }

    /// Executes a movement from `from` to `to` under this sensor's motor noise.
    pub fn move_robot(&mut self, from: &Position, to: &Position) -> MoveOutcome {
        move_with(&self.noise, &mut self.rng, from, to)
    }
}

/// The moving platform: motor noise without a field of its own.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Robot {
    noise: NoiseSpec,
    rng: NoiseStream,
}

impl Robot {
    pub fn new(noise: NoiseSpec, rng: NoiseStream) -> Result<Self> {
        noise.validate()?;
        Ok(Robot { noise, rng })
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn move_robot(&mut self, from: &Position, to: &Position) -> MoveOutcome {
        move_with(&self.noise, &mut self.rng, from, to)
    }

    pub fn motor_error(&mut self, displacement: &[f64]) -> Vec<f64> {
        motor_error(&self.noise, displacement, &mut self.rng)
    }
}

/// Free-function form of [`Sensor::measure`].
pub fn measure(sensor: &mut Sensor, x: &Position) -> Result<f64> {
    sensor.measure(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PathLossParams;

    fn pos(c: &[f64]) -> Position {
        Position::new(c.to_vec()).unwrap()
    }

    fn field() -> Arc<FieldModel> {
        Arc::new(FieldModel::new(PathLossParams::new(3.0, 1.0, pos(&[0.0, 0.0])).unwrap()).unwrap())
    }

    fn sensor(noise: NoiseSpec, seed: u64) -> Sensor {
        Sensor::new(field(), noise, NoiseStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn zero_noise_is_exact() {
        let mut s = sensor(NoiseSpec::noiseless(), 1);
        let x = pos(&[7.0, 1.0]);
        assert_eq!(s.measure(&x).unwrap(), s.field().eval(&x).unwrap());
        assert_eq!(s.noise_draws(), 0);
        let out = s.move_robot(&x, &pos(&[8.0, 2.0]));
        assert_eq!(out.achieved, out.commanded);
    }

    #[test]
    fn zero_sigma_motor_is_exact_in_every_mode() {
        for mode in [MotorMode::Longitudinal, MotorMode::Vectorial] {
            let noise = NoiseSpec {
                sigma_meas_db: 1.0,
                motor_mode: mode,
                sigma_motor: 0.0,
            };
            let mut s = sensor(noise, 2);
            let to = pos(&[3.0, -2.0]);
            assert_eq!(s.move_robot(&pos(&[0.0, 0.0]), &to).achieved, to);
        }
    }

    #[test]
    fn measurement_moments() {
        let sigma = 2.0;
        let mut s = sensor(NoiseSpec::measurement_only(sigma), 42);
        let x = pos(&[10.0, 0.0]);
        let truth = s.field().eval(&x).unwrap();
        let n = 100_000;
        let vals: Vec<f64> = (0..n).map(|_| s.measure(&x).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - truth).abs() < 3.0 * sigma / (n as f64).sqrt());
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05);

        // lag-1 autocorrelation of the noise sequence
        let e: Vec<f64> = vals.iter().map(|v| v - mean).collect();
        let c1: f64 = e.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / e.iter().map(|v| v * v).sum::<f64>();
        assert!(c1.abs() < 0.02, "lag-1 autocorrelation {c1}");
    }

    #[test]
    fn vectorial_rayleigh_mean() {
        let noise = NoiseSpec {
            sigma_meas_db: 0.0,
            motor_mode: MotorMode::Vectorial,
            sigma_motor: 0.05,
        };
        let mut s = sensor(noise, 7);
        let from = pos(&[0.0, 0.0]);
        let to = pos(&[0.6, 0.8]);
        let n = 10_000;
        let mut radius = 0.0;
        let mut bias = [0.0f64; 2];
        for _ in 0..n {
            let out = s.move_robot(&from, &to);
            let d = out.achieved.sub(&to);
            radius += d.norm();
            bias[0] += d.coords()[0];
            bias[1] += d.coords()[1];
        }
        let expected = 0.05 * (std::f64::consts::PI / 2.0).sqrt();
        assert!(((radius / n as f64) / expected - 1.0).abs() < 0.05);
        let se = 0.05 / (n as f64).sqrt();
        for b in bias {
            assert!((b / n as f64).abs() < 4.0 * se);
        }
    }

    #[test]
    fn longitudinal_stays_on_line() {
        let noise = NoiseSpec {
            sigma_meas_db: 0.0,
            motor_mode: MotorMode::Longitudinal,
            sigma_motor: 0.1,
        };
        let mut s = sensor(noise, 9);
        let from = pos(&[1.0, 1.0]);
        let to = pos(&[4.0, 5.0]);
        let mut moved = false;
        for _ in 0..100 {
            let a = s.move_robot(&from, &to).achieved;
            let (u, v) = (to.sub(&from), a.sub(&from));
            let cross = u.coords()[0] * v.coords()[1] - u.coords()[1] * v.coords()[0];
            assert!(cross.abs() < 1e-12);
            moved |= a != to;
        }
        assert!(moved);
    }

    #[test]
    fn identical_seeds_identical_outputs() {
        let noise = NoiseSpec {
            sigma_meas_db: 1.5,
            ..NoiseSpec::default()
        };
        let mut a = sensor(noise.clone(), 5);
        let mut b = sensor(noise, 5);
        let x = pos(&[4.0, 4.0]);
        for _ in 0..50 {
            assert_eq!(a.measure(&x).unwrap().to_bits(), b.measure(&x).unwrap().to_bits());
            assert_eq!(a.move_robot(&x, &pos(&[5.0, 4.0])), b.move_robot(&x, &pos(&[5.0, 4.0])));
        }
    }

    #[test]
    fn stream_state_roundtrips() {
        let mut a = NoiseStream::new(3, 1);
        for _ in 0..17 {
            a.standard_normal();
        }
        let json = serde_json::to_string(&a).unwrap();
        let mut b: NoiseStream = serde_json::from_str(&json).unwrap();
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn measure_propagates_floor() {
        let mut s = sensor(NoiseSpec::measurement_only(1.0), 1);
        assert!(matches!(
            s.measure(&pos(&[0.1, 0.0])),
            Err(Error::DistanceTooSmall { .. })
        ));
    }
}
