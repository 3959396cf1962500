//! Deterministic small-scale fading.
//!
//! Multipath interference is modeled as a frozen superposition of plane waves
//! at the carrier wavelength. Directions and phases are drawn once from the
//! seed, so the offset at a given point never changes.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::position::Position;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    pub wavelength_m: f64,
    /// Spatial standard deviation of the offset over regions much larger than
    /// the wavelength.
    pub amplitude_db: f64,
    pub num_waves: usize,
    pub seed: u64,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams {
            wavelength_m: 0.125,
            amplitude_db: 6.0,
            num_waves: 32,
            seed: 0,
        }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(Error::param("wavelength_m", "must be finite and > 0"));
        }
        if !(self.amplitude_db >= 0.0 && self.amplitude_db.is_finite()) {
            return Err(Error::param("amplitude_db", "must be finite and >= 0"));
        }
        if self.num_waves == 0 {
            return Err(Error::param("num_waves", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct PlaneWave {
    k: [f64; 3],
    phase: f64,
}

/// A realized fading pattern for one dimension.
#[derive(Clone, Debug)]
pub struct FadingField {
    params: FadingParams,
    dim: usize,
    waves: Vec<PlaneWave>,
    gain: f64,
}

impl FadingField {
    pub fn new(params: FadingParams, dim: usize) -> Result<Self> {
        params.validate()?;
        if !(1..=3).contains(&dim) {
            return Err(Error::param("dim", format!("must be 1..=3, got {dim}")));
        }
        let k = TAU / params.wavelength_m;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

        // In 1-D every wave has wave number +k or -k, so any superposition
        // collapses to one sinusoid; draw that sinusoid directly.
        let (waves, gain) = if dim == 1 {
            let phase = rng.random::<f64>() * TAU;
            let wave = PlaneWave {
                k: [k, 0.0, 0.0],
                phase,
            };
            (vec![wave], params.amplitude_db * 2f64.sqrt())
        } else {
            let waves = (0..params.num_waves)
                .map(|_| {
                    let dir = random_direction(&mut rng, dim);
                    let phase = rng.random::<f64>() * TAU;
                    PlaneWave {
                        k: [k * dir[0], k * dir[1], k * dir[2]],
                        phase,
                    }
                })
                .collect();
            // Each cosine has spatial variance 1/2 and distinct directions are
            // uncorrelated over large regions.
            let gain = params.amplitude_db * (2.0 / params.num_waves as f64).sqrt();
            (waves, gain)
        };
        Ok(FadingField {
            params,
            dim,
            waves,
            gain,
        })
    }

    pub fn params(&self) -> &FadingParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &Position) -> f64 {
        let c = x.coords();
        let sum: f64 = self
            .waves
            .iter()
            .map(|w| {
                let kx: f64 = c.iter().zip(&w.k).map(|(xi, ki)| xi * ki).sum();
                (kx + w.phase).cos()
            })
            .sum();
        self.gain * sum
    }
}

/// Fading offset in dB at `x`.
pub fn eval_fading(fading: &FadingField, x: &Position) -> f64 {
    fading.eval(x)
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> [f64; 3] {
    match dim {
        2 => {
            let theta = rng.random::<f64>() * TAU;
            [theta.cos(), theta.sin(), 0.0]
        }
        _ => {
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let phi = rng.random::<f64>() * 2.0 * PI;
            let r = (1.0 - z * z).sqrt();
            [r * phi.cos(), r * phi.sin(), z]
        }
    }
}
