//! True (noise-free) signal-strength fields in dB.
//!
//! A [`FieldModel`] is the sum of three scales: log-distance path loss,
//! geometric shadowing by walls, and deterministic multipath fading.

mod fading;
mod walls;

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

pub use fading::{eval_fading, FadingField, FadingParams};
pub use walls::{eval_shadowing, Wall, WallGeometry};

use crate::error::{Error, Result};
use crate::position::Position;

/// Default minimum distance to a source at which the field may be evaluated.
pub const DEFAULT_EPSILON_FLOOR_M: f64 = 0.5;

/// Log-distance path loss around a single transmitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub gamma_pl: f64,
    pub d0_m: f64,
    pub source: Position,
}

impl PathLossParams {
    pub fn new(gamma_pl: f64, d0_m: f64, source: Position) -> Result<Self> {
        let params = PathLossParams {
            gamma_pl,
            d0_m,
            source,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_pl > 0.0 && self.gamma_pl.is_finite()) {
            return Err(Error::param("gamma_pl", format!("must be > 0, got {}", self.gamma_pl)));
        }
        if !(self.d0_m > 0.0 && self.d0_m.is_finite()) {
            return Err(Error::param("d0_m", format!("must be > 0, got {}", self.d0_m)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// `-10 gamma log10(d / d0)` without any domain check.
    pub fn at_distance(&self, d: f64) -> f64 {
        -10.0 * self.gamma_pl * (d / self.d0_m).log10()
    }

    fn checked_distance(&self, x: &Position, floor: f64) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        let d = x.distance(&self.source);
        check_floor(d, floor)?;
        Ok(d)
    }
}

fn check_floor(distance: f64, floor: f64) -> Result<()> {
    if distance < floor {
        Err(Error::DistanceTooSmall { distance, floor })
    } else {
        Ok(())
    }
}

/// Path loss at `x` in dB.
pub fn eval_path_loss(params: &PathLossParams, x: &Position, epsilon_floor_m: f64) -> Result<f64> {
    let d = params.checked_distance(x, epsilon_floor_m)?;
    Ok(params.at_distance(d))
}

/// Radial derivatives of the path loss, in dB/m, dB/m² and dB/m³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLossDerivatives {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

pub fn path_loss_derivatives(
    params: &PathLossParams,
    distance: f64,
    epsilon_floor_m: f64,
) -> Result<PathLossDerivatives> {
    check_floor(distance, epsilon_floor_m)?;
    let c = 10.0 * params.gamma_pl / LN_10;
    Ok(PathLossDerivatives {
        first: -c / distance,
        second: c / (distance * distance),
        third: -2.0 * c / (distance * distance * distance),
    })
}

/// Composite field: path loss + shadowing + optional fading.
///
/// Immutable once built; evaluation takes `&self` and is safe to share
/// across threads.
#[derive(Clone, Debug)]
pub struct FieldModel {
    path_loss: PathLossParams,
    walls: Vec<Wall>,
    fading: Option<FadingField>,
    epsilon_floor_m: f64,
}

impl FieldModel {
    pub fn new(path_loss: PathLossParams) -> Result<Self> {
        path_loss.validate()?;
        Ok(FieldModel {
            path_loss,
            walls: Vec::new(),
            fading: None,
            epsilon_floor_m: DEFAULT_EPSILON_FLOOR_M,
        })
    }

    pub fn with_walls(mut self, walls: Vec<Wall>) -> Result<Self> {
        let dim = self.dim();
        if let Some(w) = walls.iter().find(|w| w.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: w.dim(),
            });
        }
        self.walls = walls;
        Ok(self)
    }

    pub fn with_fading(mut self, params: FadingParams) -> Result<Self> {
        self.fading = Some(FadingField::new(params, self.dim())?);
        Ok(self)
    }

    pub fn with_epsilon_floor(mut self, floor_m: f64) -> Result<Self> {
        if !(floor_m >= 0.0 && floor_m.is_finite()) {
            return Err(Error::param("epsilon_floor_m", "must be finite and >= 0"));
        }
        self.epsilon_floor_m = floor_m;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.path_loss.dim()
    }

    pub fn path_loss(&self) -> &PathLossParams {
        &self.path_loss
    }

    pub fn source(&self) -> &Position {
        &self.path_loss.source
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn fading(&self) -> Option<&FadingField> {
        self.fading.as_ref()
    }

    pub fn epsilon_floor_m(&self) -> f64 {
        self.epsilon_floor_m
    }

    /// The same model with fading removed.
    pub fn smooth_part(&self) -> FieldModel {
        FieldModel {
            fading: None,
            ..self.clone()
        }
    }

    /// True when neither walls nor (nonzero) fading are present.
    pub fn is_pure_path_loss(&self) -> bool {
        self.walls.is_empty() && self.fading.is_none()
    }

    /// Checks that `x` may be evaluated.
    pub fn check_domain(&self, x: &Position) -> Result<()> {
        self.path_loss.checked_distance(x, self.epsilon_floor_m).map(|_| ())
    }

    /// Path loss plus shadowing, i.e. the field with fading removed.
    pub fn eval_smooth(&self, x: &Position) -> Result<f64> {
        let pl = eval_path_loss(&self.path_loss, x, self.epsilon_floor_m)?;
        Ok(pl + eval_shadowing(&self.walls, &self.path_loss.source, x))
    }

    pub fn eval(&self, x: &Position) -> Result<f64> {
        let smooth = self.eval_smooth(x)?;
        Ok(match &self.fading {
            Some(f) => smooth + f.eval(x),
            None => smooth,
        })
    }

    /// Exact gradient of the pure path-loss field.
    pub fn analytic_gradient(&self, x: &Position) -> Result<Vec<f64>> {
        if !self.is_pure_path_loss() {
            return Err(Error::NotSmoothlyDifferentiable);
        }
        smooth_radial_gradient(&self.path_loss, x, self.epsilon_floor_m)
    }

    /// Gradient of the path-loss term alone, ignoring walls and fading.
    ///
    /// This is the "large-scale trend" reference used when measuring how badly
    /// fading corrupts gradient estimates.
    pub fn path_loss_gradient(&self, x: &Position) -> Result<Vec<f64>> {
        smooth_radial_gradient(&self.path_loss, x, self.epsilon_floor_m)
    }
}

fn smooth_radial_gradient(params: &PathLossParams, x: &Position, floor: f64) -> Result<Vec<f64>> {
    let d = params.checked_distance(x, floor)?;
    let slope = path_loss_derivatives(params, d, floor)?.first;
    let radial = x.sub(&params.source);
    Ok(radial.coords().iter().map(|c| slope * c / d).collect())
}

/// Free-function form of [`FieldModel::eval`].
pub fn eval_field(model: &FieldModel, x: &Position) -> Result<f64> {
    model.eval(x)
}

/// Free-function form of [`FieldModel::analytic_gradient`].
pub fn analytic_gradient(model: &FieldModel, x: &Position) -> Result<Vec<f64>> {
    model.analytic_gradient(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pos(c: &[f64]) -> Position {
        Position::new(c.to_vec()).unwrap()
    }

    fn free_space(gamma: f64, d0: f64) -> FieldModel {
        FieldModel::new(PathLossParams::new(gamma, d0, pos(&[0.0, 0.0])).unwrap()).unwrap()
    }

    #[test]
    fn path_loss_examples() {
        let p = PathLossParams::new(3.0, 1.0, pos(&[0.0, 0.0])).unwrap();
        assert_eq!(eval_path_loss(&p, &pos(&[1.0, 0.0]), 0.5).unwrap(), 0.0);
        assert_eq!(eval_path_loss(&p, &pos(&[10.0, 0.0]), 0.5).unwrap(), -30.0);
        let p = PathLossParams::new(2.5, 2.0, pos(&[0.0, 0.0])).unwrap();
        let v = eval_path_loss(&p, &pos(&[0.0, 20.0]), 0.5).unwrap();
        assert!((v + 25.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn path_loss_floor() {
        let p = PathLossParams::new(3.0, 1.0, pos(&[0.0, 0.0])).unwrap();
        let err = eval_path_loss(&p, &pos(&[0.3, 0.0]), 0.5).unwrap_err();
        assert!(matches!(err, Error::DistanceTooSmall { .. }));
        assert!(path_loss_derivatives(&p, 0.2, 0.5).is_err());
        assert!(PathLossParams::new(0.0, 1.0, pos(&[0.0])).is_err());
        assert!(PathLossParams::new(3.0, -1.0, pos(&[0.0])).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = PathLossParams::new(3.0, 1.0, pos(&[0.0])).unwrap();
        let d1 = path_loss_derivatives(&p, 1.0, 0.5).unwrap();
        assert!((d1.first + 13.028834457861).abs() < 1e-9);
        let d10 = path_loss_derivatives(&p, 10.0, 0.5).unwrap();
        assert!((d10.second - 0.130288344578).abs() < 1e-9);
    }

    #[test]
    fn composition_identity_without_walls_or_fading() {
        let m = free_space(3.0, 1.0);
        let x = pos(&[3.3, -4.1]);
        assert_eq!(m.eval(&x).unwrap(), eval_path_loss(m.path_loss(), &x, 0.5).unwrap());
    }

    #[test]
    fn analytic_gradient_examples() {
        let m = free_space(3.0, 1.0);
        let g = m.analytic_gradient(&pos(&[10.0, 0.0])).unwrap();
        assert!((g[0] + 1.302883445786).abs() < 1e-9 && g[1] == 0.0);
        let g = m.analytic_gradient(&pos(&[0.0, 10.0])).unwrap();
        assert!(g[0] == 0.0 && (g[1] + 1.302883445786).abs() < 1e-9);

        let faded = free_space(3.0, 1.0).with_fading(FadingParams::default()).unwrap();
        assert!(matches!(
            faded.analytic_gradient(&pos(&[10.0, 0.0])),
            Err(Error::NotSmoothlyDifferentiable)
        ));
        let walled = free_space(3.0, 1.0)
            .with_walls(vec![Wall::new(WallGeometry::Segment { a: [1.0, 1.0], b: [2.0, 2.0] }, 3.0).unwrap()])
            .unwrap();
        assert!(walled.analytic_gradient(&pos(&[10.0, 0.0])).is_err());
    }

    #[test]
    fn wall_dimension_checked() {
        let w = Wall::new(WallGeometry::Point { at: 1.0 }, 3.0).unwrap();
        assert!(free_space(3.0, 1.0).with_walls(vec![w]).is_err());
    }

    #[test]
    fn fading_bounded_around_smooth_part() {
        let m = free_space(3.0, 1.0)
            .with_walls(vec![Wall::new(WallGeometry::Segment { a: [2.0, -9.0], b: [2.0, 9.0] }, 6.0).unwrap()])
            .unwrap()
            .with_fading(FadingParams { seed: 5, ..FadingParams::default() })
            .unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            for j in 0..=200 {
                let x = pos(&[1.0 + i as f64 * 0.05, -5.0 + j as f64 * 0.05]);
                let dev = m.eval(&x).unwrap() - m.eval_smooth(&x).unwrap();
                worst = worst.max(dev.abs());
            }
        }
        assert!(worst <= 5.0 * 6.0, "max deviation {worst}");
        assert!(worst > 6.0, "fading suspiciously weak: {worst}");
    }

    proptest! {
        #[test]
        fn pure_field_decreases_with_distance(d1 in 0.5f64..1e3, frac in 1e-6f64..1.0, theta in 0.0f64..6.283) {
            let m = free_space(3.0, 1.0);
            let d2 = d1 + frac * 100.0;
            let (s, c) = theta.sin_cos();
            let f1 = m.eval(&pos(&[d1 * c, d1 * s])).unwrap();
            let f2 = m.eval(&pos(&[d2 * c, d2 * s])).unwrap();
            prop_assert!(f1 > f2);
        }

        #[test]
        fn first_derivative_matches_central_difference(gamma in 0.5f64..6.0, d in 1.0f64..100.0) {
            let p = PathLossParams::new(gamma, 1.0, pos(&[0.0])).unwrap();
            let h = 1e-4;
            let fd = (p.at_distance(d + h) - p.at_distance(d - h)) / (2.0 * h);
            let exact = path_loss_derivatives(&p, d, 0.5).unwrap().first;
            prop_assert!(((fd - exact) / exact).abs() < 1e-6);
        }

        #[test]
        fn shadowing_never_positive(x in -10.0f64..10.0, y in -10.0f64..10.0) {
            let walls = vec![
                Wall::new(WallGeometry::Segment { a: [-3.0, -3.0], b: [3.0, -3.0] }, 6.0).unwrap(),
                Wall::new(WallGeometry::Segment { a: [4.0, -8.0], b: [4.0, 8.0] }, 3.5).unwrap(),
            ];
            prop_assert!(eval_shadowing(&walls, &pos(&[0.0, 0.0]), &pos(&[x, y])) <= 0.0);
        }
    }
}
