//! Monte Carlo check of the central-difference variance and bias against
//! their predictions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::gradest::{estimate_central_difference, predicted_bias_bound, predicted_variance};
use crate::harness::{run_seed, Scenario, NODE_STREAM_BASE};
use crate::position::Position;
use crate::sensing::{NoiseSpec, NoiseStream, Sensor};
use crate::stats::variance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub sigma: f64,
    pub h: f64,
    pub predicted_var: f64,
    /// Sample variance of the component farthest from the prediction.
    pub empirical_var: f64,
    pub bias_bound: f64,
    /// Noise-free estimate minus the analytic gradient, along the radial
    /// direction.
    pub empirical_bias: f64,
    pub variance_ok: bool,
    pub bias_ok: bool,
}

impl GradcheckRow {
    pub fn passed(&self) -> bool {
        self.variance_ok && self.bias_ok
    }
}

/// Runs every `(sigma, h)` cell of the scenario's `[gradcheck]` section on
/// the first node's path loss (walls, fading and motor noise off).
pub fn run_gradcheck(scenario: &Scenario) -> Result<Vec<GradcheckRow>> {
    let g = scenario
        .config
        .gradcheck
        .as_ref()
        .ok_or_else(|| Error::Config("scenario has no [gradcheck] section".into()))?;
    let node = &scenario.fields[0];
    let field = Arc::new(
        FieldModel::new(node.path_loss().clone())?.with_epsilon_floor(node.epsilon_floor_m())?,
    );
    let x = Position::new(g.point_m.clone()).map_err(|e| Error::Config(format!("gradcheck.point_m: {e}")))?;
    let truth = field.analytic_gradient(&x)?;
    let radial = x.sub(field.source());
    let radial = radial.scale(radial.norm().recip());

    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &sigma in &g.sigmas_db {
        for &h in &g.hs_m {
            let seed = run_seed(scenario.config.master_seed, cell);
            cell += 1;
            let mut exact = Sensor::new(field.clone(), NoiseSpec::noiseless(), NoiseStream::new(seed, 0))?;
            let est = estimate_central_difference(&mut exact, &x, h)?;
            let bias: f64 = est.g_hat.iter().zip(&truth).zip(radial.coords()).map(|((e, t), u)| (e - t) * u).sum();
            let bound = predicted_bias_bound(field.path_loss(), &x, h, field.epsilon_floor_m())?;

            let mut noisy = Sensor::new(
                field.clone(),
                NoiseSpec::measurement_only(sigma),
                NoiseStream::new(seed, NODE_STREAM_BASE),
            )?;
            let mut samples = vec![Vec::with_capacity(g.repeats); x.dim()];
            for _ in 0..g.repeats {
                let e = estimate_central_difference(&mut noisy, &x, h)?;
                for (s, v) in samples.iter_mut().zip(e.g_hat) {
                    s.push(v);
                }
            }
            let predicted = predicted_variance(sigma, h);
            let empirical = samples
                .iter()
                .map(|s| variance(s))
                .max_by(|a, b| (a - predicted).abs().total_cmp(&(b - predicted).abs()))
                .expect("at least one component");
            rows.push(GradcheckRow {
                sigma,
                h,
                predicted_var: predicted,
                empirical_var: empirical,
                bias_bound: bound,
                empirical_bias: bias,
                variance_ok: ((empirical - predicted) / predicted).abs() <= g.variance_rel_tol,
                bias_ok: bias.abs() <= bound,
            });
        }
    }
    Ok(rows)
}
