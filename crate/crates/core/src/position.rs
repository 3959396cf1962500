//! Points in the 1-, 2- or 3-dimensional simulation plane, in meters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A finite point with 1 to 3 coordinates.
///
/// Arithmetic helpers panic on dimension mismatch; positions inside one
/// scenario always share a dimension and that is checked at construction of
/// the scenario, not on every vector operation.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Position(Vec<f64>);

impl Position {
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords = coords.into();
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidPosition(format!(
                "dimension must be 1..={MAX_DIM}, got {}",
                coords.len()
            )));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidPosition(format!("non-finite coordinate {c}")));
        }
        Ok(Position(coords))
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Position(vec![0.0; dim])
    }

    /// `i`-th unit vector.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut p = Self::origin(dim);
        p.0[i] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.sub(other).norm()
    }

    pub fn add(&self, other: &Position) -> Position {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Position) -> Position {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Position {
        Position(self.0.iter().map(|c| c * s).collect())
    }

    /// `self + s * dir`.
    pub fn add_scaled(&self, dir: &[f64], s: f64) -> Position {
        assert_eq!(self.dim(), dir.len(), "dimension mismatch");
        Position(self.0.iter().zip(dir).map(|(a, d)| a + s * d).collect())
    }

    /// Copy with the `i`-th coordinate shifted by `offset`.
    pub fn offset_axis(&self, i: usize, offset: f64) -> Position {
        let mut p = self.clone();
        p.0[i] += offset;
        p
    }

    pub fn dot(&self, other: &Position) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    fn zip(&self, other: &Position, f: impl Fn(f64, f64) -> f64) -> Position {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Position(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }
}

impl TryFrom<Vec<f64>> for Position {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Position::new(v)
    }
}

impl From<Position> for Vec<f64> {
    fn from(p: Position) -> Self {
        p.0
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Position").field(&self.0).finish()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Euclidean norm of a plain vector.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimension_and_nan() {
        assert!(Position::new(vec![]).is_err());
        assert!(Position::new(vec![0.0; 4]).is_err());
        assert!(Position::new(vec![1.0, f64::NAN]).is_err());
        assert!(Position::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn serde_rejects_invalid() {
        let p: Position = serde_json::from_str("[3.0, 4.0]").unwrap();
        assert_eq!(p.norm(), 5.0);
        assert!(serde_json::from_str::<Position>("[]").is_err());
    }

    #[test]
    fn offsets() {
        let p = Position::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(p.offset_axis(1, 0.5).coords(), &[1.0, 2.5]);
        assert_eq!(p.add_scaled(&[1.0, -1.0], 2.0).coords(), &[3.0, 0.0]);
        assert_eq!(Position::unit(3, 2).coords(), &[0.0, 0.0, 1.0]);
    }
}
