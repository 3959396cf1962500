//! Scalar objectives built from signal-strength measurements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::position::Position;
use crate::sensing::Sensor;

/// Offset added to every measurement inside the bridge objective so that
/// signal strengths are nonnegative.
pub const DEFAULT_BRIDGE_OFFSET_DB: f64 = 120.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Seek,
    Bridge,
}

#[derive(Clone, Debug)]
pub enum Objective {
    /// Negated signal strength of one node.
    Seek { sensor: Sensor },
    /// `|m1 - m2| - |m1 + m2|` over two nodes, each measurement offset by
    /// `offset_db`.
    Bridge {
        sensors: [Sensor; 2],
        offset_db: f64,
    },
}

/// Noise-free bridge value for offset measurements `m1`, `m2`.
pub fn bridge_value(m1: f64, m2: f64) -> f64 {
    (m1 - m2).abs() - (m1 + m2).abs()
}

impl Objective {
    pub fn seek(sensor: Sensor) -> Self {
        Objective::Seek { sensor }
    }

    pub fn bridge(first: Sensor, second: Sensor, offset_db: f64) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: second.dim(),
            });
        }
        if !offset_db.is_finite() {
            return Err(Error::param("offset_db", "must be finite"));
        }
        Ok(Objective::Bridge {
            sensors: [first, second],
            offset_db,
        })
    }

    pub fn kind(&self) -> ObjectiveKind {
        match self {
            Objective::Seek { .. } => ObjectiveKind::Seek,
            Objective::Bridge { .. } => ObjectiveKind::Bridge,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Objective::Seek { sensor } => sensor.dim(),
            Objective::Bridge { sensors, .. } => sensors[0].dim(),
        }
    }

    pub fn offset_db(&self) -> Option<f64> {
        match self {
            Objective::Seek { .. } => None,
            Objective::Bridge { offset_db, .. } => Some(*offset_db),
        }
    }

    pub fn sensors(&self) -> &[Sensor] {
        match self {
            Objective::Seek { sensor } => std::slice::from_ref(sensor),
            Objective::Bridge { sensors, .. } => sensors,
        }
    }

    /// Total measurement-noise samples drawn by all member sensors.
    pub fn noise_draws(&self) -> u64 {
        self.sensors().iter().map(Sensor::noise_draws).sum()
    }

    /// Errors if `x` is inside the floor of any member field.
    pub fn check_domain(&self, x: &Position) -> Result<()> {
        self.sensors().iter().try_for_each(|s| s.field().check_domain(x))
    }

    /// One fresh measurement per member sensor.
    pub fn eval(&mut self, x: &Position) -> Result<f64> {
        match self {
            Objective::Seek { sensor } => Ok(-sensor.measure(x)?),
            Objective::Bridge { sensors, offset_db } => {
                let m1 = sensors[0].measure(x)? + *offset_db;
                let m2 = sensors[1].measure(x)? + *offset_db;
                Ok(bridge_value(m1, m2))
            }
        }
    }

    /// Objective of the true fields, consuming no randomness.
    pub fn eval_noiseless(&self, x: &Position) -> Result<f64> {
        match self {
            Objective::Seek { sensor } => Ok(-sensor.field().eval(x)?),
            Objective::Bridge { sensors, offset_db } => {
                let m1 = sensors[0].field().eval(x)? + offset_db;
                let m2 = sensors[1].field().eval(x)? + offset_db;
                Ok(bridge_value(m1, m2))
            }
        }
    }
}

/// Axis-aligned grid, `min..=max` per axis with spacing `resolution_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub resolution_m: f64,
}

impl GridSpec {
    pub fn new(min: Vec<f64>, max: Vec<f64>, resolution_m: f64) -> Result<Self> {
        let g = GridSpec {
            min,
            max,
            resolution_m,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() || self.min.is_empty() || self.min.len() > 3 {
            return Err(Error::param("bbox", "min and max need the same dimension, 1 to 3"));
        }
        if !(self.resolution_m > 0.0 && self.resolution_m.is_finite()) {
            return Err(Error::param("resolution_m", "must be > 0"));
        }
        for (lo, hi) in self.min.iter().zip(&self.max) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param("bbox", "need finite min <= max on every axis"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Points per axis. The last point may fall short of `max` by less than
    /// one step.
    pub fn counts(&self) -> Vec<usize> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| ((hi - lo) / self.resolution_m + 1e-9).floor() as usize + 1)
            .collect()
    }

    /// All grid points, first axis varying slowest.
    pub fn points(&self) -> Vec<Position> {
        let counts = self.counts();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rest = flat;
            let mut c = vec![0.0; counts.len()];
            for axis in (0..counts.len()).rev() {
                let i = rest % counts[axis];
                rest /= counts[axis];
                c[axis] = self.min[axis] + i as f64 * self.resolution_m;
            }
            out.push(Position::new(c).expect("grid coordinates are finite"));
        }
        out
    }
}

/// Exhaustive minimization of the noise-free bridge objective over `grid`.
/// Points inside either field's floor are skipped.
pub fn bridge_optimum_oracle(
    first: &FieldModel,
    second: &FieldModel,
    grid: &GridSpec,
    offset_db: f64,
) -> Result<Position> {
    if first.fading().is_some() || second.fading().is_some() {
        return Err(Error::param("fading", "the bridge oracle needs fading off"));
    }
    if grid.dim() != first.dim() || grid.dim() != second.dim() {
        return Err(Error::DimensionMismatch {
            expected: first.dim(),
            got: grid.dim(),
        });
    }
    let mut best: Option<(f64, Position)> = None;
    for x in grid.points() {
        let (Ok(f1), Ok(f2)) = (first.eval(&x), second.eval(&x)) else {
            continue;
        };
        let g = bridge_value(f1 + offset_db, f2 + offset_db);
        if best.as_ref().is_none_or(|(b, _)| g < *b) {
            best = Some((g, x));
        }
    }
    best.map(|(_, x)| x)
        .ok_or_else(|| Error::InvalidPosition("no feasible grid point".into()))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::PathLossParams;
    use crate::sensing::{NoiseSpec, NoiseStream};

    fn field(gamma: f64, source: [f64; 2]) -> FieldModel {
        FieldModel::new(PathLossParams::new(gamma, 1.0, Position::new(source.to_vec()).unwrap()).unwrap())
            .unwrap()
    }

    fn sensor(f: FieldModel, sigma: f64, stream: u64) -> Sensor {
        Sensor::new(Arc::new(f), NoiseSpec::measurement_only(sigma), NoiseStream::new(7, stream)).unwrap()
    }

    #[test]
    fn seek_is_negated_field() {
        let f = field(3.0, [0.0, 0.0]);
        let x = Position::new(vec![3.0, 4.0]).unwrap();
        let truth = f.eval(&x).unwrap();
        let mut obj = Objective::seek(sensor(f, 0.0, 1));
        assert_eq!(obj.eval(&x).unwrap(), -truth);
        assert_eq!(obj.eval_noiseless(&x).unwrap(), -truth);
    }

    #[test]
    fn bridge_piecewise_branches() {
        assert_eq!(bridge_value(30.0, 30.0), -60.0);
        assert_eq!(bridge_value(50.0, 20.0), -40.0);
        assert_eq!(bridge_value(20.0, 50.0), -40.0);
    }

    #[test]
    fn bridge_with_offset() {
        let f1 = field(3.0, [-5.0, 0.0]);
        let f2 = field(3.0, [5.0, 0.0]);
        let x = Position::new(vec![-1.0, 2.0]).unwrap();
        let (v1, v2) = (f1.eval(&x).unwrap(), f2.eval(&x).unwrap());
        let mut obj = Objective::bridge(sensor(f1, 0.0, 1), sensor(f2, 0.0, 2), 120.0).unwrap();
        let expected = -2.0 * (v1.min(v2) + 120.0);
        assert!((obj.eval(&x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn noise_draw_counts() {
        let x = Position::new(vec![1.0, 2.0]).unwrap();
        let mut seek = Objective::seek(sensor(field(3.0, [-5.0, 0.0]), 2.0, 1));
        let mut bridge = Objective::bridge(
            sensor(field(3.0, [-5.0, 0.0]), 2.0, 1),
            sensor(field(3.0, [5.0, 0.0]), 2.0, 2),
            120.0,
        )
        .unwrap();
        for i in 1..=10 {
            seek.eval(&x).unwrap();
            bridge.eval(&x).unwrap();
            assert_eq!(seek.noise_draws(), i);
            assert_eq!(bridge.noise_draws(), 2 * i);
        }
    }

    #[test]
    fn symmetric_oracle_finds_midpoint() {
        let grid = GridSpec::new(vec![-8.0, -6.0], vec![8.0, 6.0], 0.05).unwrap();
        let x = bridge_optimum_oracle(&field(3.0, [-5.0, 0.0]), &field(3.0, [5.0, 0.0]), &grid, 120.0).unwrap();
        assert!(x.coords()[0].abs() <= 0.05 + 1e-9 && x.coords()[1].abs() <= 0.05 + 1e-9, "{x}");
    }

    #[test]
    fn asymmetric_oracle_on_equal_strength_locus() {
        let f1 = field(3.0, [-5.0, 0.0]);
        let f2 = field(2.0, [5.0, 0.0]);
        let step = 0.05;
        let grid = GridSpec::new(vec![-8.0, -6.0], vec![8.0, 6.0], step).unwrap();
        let x = bridge_optimum_oracle(&f1, &f2, &grid, 120.0).unwrap();
        let gap = (f1.eval(&x).unwrap() - f2.eval(&x).unwrap()).abs();
        let g1 = crate::position::norm(&f1.analytic_gradient(&x).unwrap());
        let g2 = crate::position::norm(&f2.analytic_gradient(&x).unwrap());
        assert!(gap <= (g1 + g2) * step * 2.0, "gap {gap} at {x}");
    }

    #[test]
    fn identical_fields_push_to_the_floor() {
        let f = field(3.0, [0.0, 0.0]);
        let grid = GridSpec::new(vec![-3.0, -3.0], vec![3.0, 3.0], 0.05).unwrap();
        let x = bridge_optimum_oracle(&f, &f, &grid, 120.0).unwrap();
        let d = x.norm();
        assert!(d >= f.epsilon_floor_m() && d < f.epsilon_floor_m() + 0.1, "{d}");
    }

    #[test]
    fn oracle_rejects_fading() {
        let f = field(3.0, [0.0, 0.0]).with_fading(Default::default()).unwrap();
        let grid = GridSpec::new(vec![1.0, 1.0], vec![2.0, 2.0], 0.5).unwrap();
        assert!(bridge_optimum_oracle(&f, &f, &grid, 120.0).is_err());
    }

    #[test]
    fn grid_points_cover_bbox() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 0.5], 0.25).unwrap();
        assert_eq!(g.counts(), vec![5, 3]);
        let pts = g.points();
        assert_eq!(pts.len(), 15);
        assert_eq!(pts[14].coords(), &[1.0, 0.5]);
    }
}
