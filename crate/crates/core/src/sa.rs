//! Finite difference stochastic approximation (FDSA).
//!
//! The robot position is the current iterate. Each iteration estimates the
//! objective gradient around it with probe width `h_k`, then moves by
//! `-a_k * g_hat`. Objectives are minimized; source seeking negates the
//! signal strength.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradest::{GradientEstimate, GradientEstimator, Probe};
use crate::objectives::Objective;
use crate::position::{norm, Position};
use crate::record::{IterationRow, RecordDetail, RunRecord, StepData, Termination};
use crate::sensing::Robot;
use crate::stats::fit_line;

/// Tolerance used when a criterion sits exactly on a p-series boundary.
const BOUNDARY_TOL: f64 = 1e-12;

/// Power-law gain sequences
/// `a_k = a / (k + 1 + A)^alpha` and `h_k = h0 / (k + 1)^gamma_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub a: f64,
    #[serde(rename = "A")]
    pub stability: f64,
    pub alpha: f64,
    pub h0_m: f64,
    pub gamma_s: f64,
}

impl Default for GainSchedule {
    fn default() -> Self {
        GainSchedule {
            a: 1.0,
            stability: 10.0,
            alpha: 1.0,
            h0_m: 1.0,
            gamma_s: 1.0 / 6.0,
        }
    }
}

impl GainSchedule {
    /// Minimal sanity for running: gains must be computable and probes must
    /// have positive width. Convergence conditions are not enforced here; see
    /// [`check_schedule`].
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.stability, self.alpha, self.h0_m, self.gamma_s]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("schedule", "all parameters must be finite"));
        }
        if self.a <= 0.0 {
            return Err(Error::param("a", "must be > 0"));
        }
        if self.h0_m <= 0.0 {
            return Err(Error::param("h0_m", "must be > 0"));
        }
        if self.stability < 0.0 {
            return Err(Error::param("A", "must be >= 0"));
        }
        Ok(())
    }

    pub fn a_k(&self, k: usize) -> f64 {
        self.a / (k as f64 + 1.0 + self.stability).powf(self.alpha)
    }

    pub fn h_k(&self, k: usize) -> f64 {
        self.h0_m / (k as f64 + 1.0).powf(self.gamma_s)
    }
}

/// `(a_k, h_k)`.
pub fn gains(schedule: &GainSchedule, k: usize) -> (f64, f64) {
    (schedule.a_k(k), schedule.h_k(k))
}

/// Convergence and asymptotic-normality conditions for a power-law schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleVerdict {
    pub a_positive: bool,
    pub h_positive: bool,
    pub a_to_zero: bool,
    pub h_to_zero: bool,
    pub sum_a_diverges: bool,
    pub sum_ah_converges: bool,
    pub sum_a2_over_h2_converges: bool,
    pub beta_positive: bool,
    pub normality_secondary: bool,
    pub beta: f64,
    pub predicted_rate_exponent: f64,
}

impl ScheduleVerdict {
    /// All seven convergence conditions hold.
    pub fn valid(&self) -> bool {
        self.a_positive
            && self.h_positive
            && self.a_to_zero
            && self.h_to_zero
            && self.sum_a_diverges
            && self.sum_ah_converges
            && self.sum_a2_over_h2_converges
    }

    pub fn asymptotically_normal(&self) -> bool {
        self.valid() && self.beta_positive && self.normality_secondary
    }

    /// `(name, holds)` for every condition, in display order.
    pub fn conditions(&self) -> [(&'static str, bool); 9] {
        [
            ("a_k > 0", self.a_positive),
            ("h_k > 0", self.h_positive),
            ("a_k -> 0", self.a_to_zero),
            ("h_k -> 0", self.h_to_zero),
            ("sum a_k = inf", self.sum_a_diverges),
            ("sum a_k h_k < inf", self.sum_ah_converges),
            ("sum a_k^2/h_k^2 < inf", self.sum_a2_over_h2_converges),
            ("beta > 0", self.beta_positive),
            ("3 gamma - alpha/2 >= 0", self.normality_secondary),
        ]
    }
}

/// Evaluates the conditions with p-series criteria on the exponents.
///
/// A series whose terms decay exactly like `1/k` counts as divergent.
pub fn check_schedule(s: &GainSchedule) -> ScheduleVerdict {
    let beta = s.alpha - 2.0 * s.gamma_s;
    ScheduleVerdict {
        a_positive: s.a > 0.0,
        h_positive: s.h0_m > 0.0,
        a_to_zero: s.alpha > 0.0,
        h_to_zero: s.gamma_s > 0.0,
        sum_a_diverges: s.alpha <= 1.0 + BOUNDARY_TOL,
        sum_ah_converges: s.alpha + s.gamma_s > 1.0 + BOUNDARY_TOL,
        sum_a2_over_h2_converges: 2.0 * s.alpha - 2.0 * s.gamma_s > 1.0 + BOUNDARY_TOL,
        beta_positive: beta > BOUNDARY_TOL,
        normality_secondary: 3.0 * s.gamma_s - s.alpha / 2.0 >= -BOUNDARY_TOL,
        beta,
        predicted_rate_exponent: -beta / 2.0,
    }
}

/// Numerical evidence about one series from its partial sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTrend {
    /// Partial sums of `|term|` after 10², 10³, 10⁵ and 10⁶ terms.
    pub partial_sums: [f64; 4],
    /// Decay exponent implied by comparing the growth over `[10², 10³)` and
    /// `[10⁵, 10⁶)`: `1 - log10(late / early) / 3`.
    pub local_exponent: f64,
}

impl SeriesTrend {
    /// Divergence as read from the partial sums: the late decade still adds
    /// (almost) as much as the early one.
    pub fn looks_divergent(&self) -> bool {
        self.local_exponent <= 1.05
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEvidence {
    pub sum_a: SeriesTrend,
    pub sum_ah: SeriesTrend,
    pub sum_a2_over_h2: SeriesTrend,
}

/// Accumulates the three series over the first 10⁶ terms.
pub fn series_evidence(s: &GainSchedule) -> SeriesEvidence {
    const MARKS: [usize; 4] = [100, 1_000, 100_000, 1_000_000];
    let mut acc = [0.0f64; 3];
    let mut out = [[0.0f64; 4]; 3];
    let mut mark = 0;
    for k in 0..MARKS[3] {
        let (a, h) = gains(s, k);
        acc[0] += a.abs();
        acc[1] += (a * h).abs();
        acc[2] += (a * a / (h * h)).abs();
        if k + 1 == MARKS[mark] {
            for j in 0..3 {
                out[j][mark] = acc[j];
            }
            mark += 1;
        }
    }
    let trend = |p: [f64; 4]| {
        let early = p[1] - p[0];
        let late = p[3] - p[2];
        SeriesTrend {
            partial_sums: p,
            local_exponent: 1.0 - (late / early).log10() / 3.0,
        }
    };
    SeriesEvidence {
        sum_a: trend(out[0]),
        sum_ah: trend(out[1]),
        sum_a2_over_h2: trend(out[2]),
    }
}

/// Optimizer state between iterations.
///
/// The iterate is the true robot position; nothing else needs to survive
/// from one iteration to the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub k: usize,
    pub x_hat: Position,
}

/// Result of one FDSA iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: RunState,
    pub a_k: f64,
    pub h_k: f64,
    pub estimate: GradientEstimate,
    pub commanded: Position,
    pub achieved: Position,
}

/// Robot plus objective, seen by the estimator as one probe.
struct Platform<'a> {
    robot: &'a mut Robot,
    objective: &'a mut Objective,
}

impl Probe for Platform<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn motor_error(&mut self, displacement: &[f64]) -> Vec<f64> {
        self.robot.motor_error(displacement)
    }

    fn sample(&mut self, at: &Position) -> Result<f64> {
        self.objective.eval(at)
    }
}

fn out_of_domain(k: usize, e: Error) -> Error {
    match e {
        Error::DistanceTooSmall { .. } => Error::ProbeOutOfDomain {
            k,
            source: Box::new(e),
        },
        other => other,
    }
}

/// One iteration: estimate, command `x_hat - a_k g_hat`, arrive with motor
/// noise accumulated over the probe walk and the step itself.
pub fn fdsa_step(
    state: &RunState,
    schedule: &GainSchedule,
    estimator: &dyn GradientEstimator,
    robot: &mut Robot,
    objective: &mut Objective,
) -> Result<StepOutcome> {
    let k = state.k;
    let (a_k, h_k) = gains(schedule, k);
    let estimate = {
        let mut platform = Platform {
            robot: &mut *robot,
            objective: &mut *objective,
        };
        estimator
            .estimate(&mut platform, &state.x_hat, h_k)
            .map_err(|e| out_of_domain(k, e))?
    };
    let displacement: Vec<f64> = estimate.g_hat.iter().map(|g| -a_k * g).collect();
    let commanded = state.x_hat.add_scaled(&displacement, 1.0);
    let err = robot.motor_error(&displacement);
    let achieved = estimate.end.add_scaled(&displacement, 1.0).add_scaled(&err, 1.0);
    objective.check_domain(&achieved).map_err(|e| out_of_domain(k, e))?;
    Ok(StepOutcome {
        next: RunState {
            k: k + 1,
            x_hat: achieved.clone(),
        },
        a_k,
        h_k,
        estimate,
        commanded,
        achieved,
    })
}

/// Optional early-termination rules. `max_iter` always applies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRules {
    /// Stop once `h_k` falls below this width.
    #[serde(default)]
    pub h_min_m: Option<f64>,
    /// Stop once a single iteration moves the robot less than this.
    #[serde(default)]
    pub min_step_m: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub max_iter: usize,
    pub stop: StopRules,
    /// Known optimum for the distance series.
    pub optimum: Option<Position>,
    pub detail: RecordDetail,
}

impl RunOptions {
    pub fn new(max_iter: usize) -> Self {
        RunOptions {
            max_iter,
            stop: StopRules::default(),
            optimum: None,
            detail: RecordDetail::Full,
        }
    }
}

/// Runs FDSA from `start` until `max_iter`, a stop rule, or a failure.
///
/// Schedules violating the convergence conditions still run; the verdict is
/// stored in the record.
pub fn run_fdsa(
    start: &Position,
    schedule: &GainSchedule,
    estimator: &dyn GradientEstimator,
    robot: &mut Robot,
    objective: &mut Objective,
    opts: &RunOptions,
) -> Result<RunRecord> {
    schedule.validate()?;
    if start.dim() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            got: start.dim(),
        });
    }
    let verdict = check_schedule(schedule);
    let mut rows = Vec::with_capacity(opts.max_iter + 1);
    let mut state = RunState {
        k: 0,
        x_hat: start.clone(),
    };
    let row = |state: &RunState, step: Option<StepData>| {
        let (a_k, h_k) = gains(schedule, state.k);
        IterationRow {
            k: state.k,
            a_k,
            h_k,
            x_hat: state.x_hat.clone(),
            dist: opts.optimum.as_ref().map(|o| state.x_hat.distance(o)),
            step,
        }
    };

    let termination = loop {
        if let Err(e) = objective.check_domain(&state.x_hat) {
            rows.push(row(&state, None));
            break Termination::Failure {
                k: state.k,
                message: out_of_domain(state.k, e).to_string(),
            };
        }
        if state.k >= opts.max_iter {
            rows.push(row(&state, None));
            break Termination::MaxIter;
        }
        if let Some(h_min) = opts.stop.h_min_m {
            if schedule.h_k(state.k) < h_min {
                rows.push(row(&state, None));
                break Termination::StopRule {
                    rule: format!("h_k below {h_min} m"),
                };
            }
        }
        match fdsa_step(&state, schedule, estimator, robot, objective) {
            Ok(out) => {
                let moved = out.achieved.distance(&state.x_hat);
                let samples = match opts.detail {
                    RecordDetail::Full => out.estimate.samples,
                    RecordDetail::Trajectory => Vec::new(),
                };
                rows.push(row(
                    &state,
                    Some(StepData {
                        g_hat: out.estimate.g_hat,
                        samples,
                        commanded: out.commanded,
                        achieved: out.achieved,
                    }),
                ));
                state = out.next;
                if let Some(min_step) = opts.stop.min_step_m {
                    if moved < min_step {
                        rows.push(row(&state, None));
                        break Termination::StopRule {
                            rule: format!("step below {min_step} m"),
                        };
                    }
                }
            }
            Err(e @ Error::ProbeOutOfDomain { .. }) => {
                rows.push(row(&state, None));
                break Termination::Failure {
                    k: state.k,
                    message: e.to_string(),
                };
            }
            Err(e) => return Err(e),
        }
    };

    Ok(RunRecord {
        scenario_hash: None,
        seed: None,
        rows,
        termination,
        verdict,
        stop_rules: opts.stop.clone(),
        objective_offset_db: objective.offset_db(),
    })
}

/// Fitted power law of the ensemble RMS distance, `rms(k) ~ k^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub stderr: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub n_records: usize,
}

/// Minimum number of usable records for [`fit_rate`].
pub const MIN_RATE_RECORDS: usize = 30;

/// RMS distance across the records at each `k`.
pub fn rms_curve(records: &[&RunRecord], k_min: usize, k_max: usize) -> Vec<(usize, f64)> {
    (k_min..=k_max)
        .map(|k| {
            let ms = records
                .iter()
                .map(|r| r.rows[k].dist.expect("distance series").powi(2))
                .sum::<f64>()
                / records.len() as f64;
            (k, ms.sqrt())
        })
        .collect()
}

/// Fits the slope of `log RMS distance` against `log k` over
/// `k_min..=k_max` (default: the shortest usable record).
///
/// Failed runs and runs without a distance series are skipped.
pub fn fit_rate(records: &[RunRecord], k_min: usize, k_max: Option<usize>) -> Result<RateFit> {
    let usable: Vec<&RunRecord> = records
        .iter()
        .filter(|r| !r.failed() && r.rows.iter().all(|row| row.dist.is_some()))
        .collect();
    if usable.len() < MIN_RATE_RECORDS {
        return Err(Error::InsufficientEnsemble {
            needed: MIN_RATE_RECORDS,
            got: usable.len(),
        });
    }
    let shortest = usable.iter().map(|r| r.iterations()).min().unwrap_or(0);
    let k_min = k_min.max(1);
    let k_max = k_max.unwrap_or(shortest).min(shortest);
    if k_max < k_min + 2 {
        return Err(Error::param(
            "k_min",
            format!("fit window {k_min}..={k_max} needs at least three points"),
        ));
    }
    let curve = rms_curve(&usable, k_min, k_max);
    let x: Vec<f64> = curve.iter().map(|(k, _)| (*k as f64).ln()).collect();
    let y: Vec<f64> = curve.iter().map(|(_, r)| r.ln()).collect();
    let fit = fit_line(&x, &y).ok_or(Error::param("k_min", "degenerate fit window"))?;
    Ok(RateFit {
        exponent: fit.slope,
        stderr: fit.slope_stderr,
        k_min,
        k_max,
        n_records: usable.len(),
    })
}

/// Norm of the commanded displacement of a step.
pub fn step_length(a_k: f64, g_hat: &[f64]) -> f64 {
    a_k * norm(g_hat)
}
