//! Experiment orchestration: scenarios, single runs, Monte Carlo ensembles
//! and their summaries.

pub mod export;
pub mod gradcheck;
pub mod scenario;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gradest::central_difference;
use crate::objectives::{bridge_value, Objective, ObjectiveKind};
use crate::position::{norm, Position};
use crate::record::{RecordDetail, RunRecord};
use crate::sa::{fit_rate, run_fdsa, GainSchedule, RunOptions};
use crate::sensing::{NoiseStream, Robot, Sensor};
use crate::stats::{median, quantile};

pub use scenario::{GainSpec, Scenario, ScenarioConfig};

/// Stream of the robot's motor noise within a run seed.
pub const ROBOT_STREAM: u64 = 0;
/// Stream of node `i`'s measurement noise is `NODE_STREAM_BASE + i`.
pub const NODE_STREAM_BASE: u64 = 1;
/// Stream used to draw a jittered start position.
pub const START_STREAM: u64 = 7;

/// Seed of run `index`: the first 8 bytes (little endian) of
/// `SHA-256("rf-taxis/run" || master_seed_le || index_le)`.
pub fn run_seed(master_seed: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"rf-taxis/run");
    h.update(master_seed.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Noise-free objective with fading removed.
fn smooth_objective(scenario: &Scenario, x: &Position) -> Result<f64> {
    let c = &scenario.config;
    let f = |i: usize| scenario.fields[i].eval_smooth(x);
    match c.objective {
        ObjectiveKind::Seek => Ok(-f(0)?),
        ObjectiveKind::Bridge => Ok(bridge_value(f(0)? + c.bridge.offset_db, f(1)? + c.bridge.offset_db)),
    }
}

/// Gain schedule of the scenario with `a` resolved.
///
/// `a = "auto"` picks `a` so that the first step from the nominal start,
/// on the smooth noise-free objective with probe width `h0`, is
/// `auto_first_step_m` long.
pub fn resolve_schedule(scenario: &Scenario) -> Result<GainSchedule> {
    let s = &scenario.config.schedule;
    let mut sched = GainSchedule {
        a: 1.0,
        stability: s.stability,
        alpha: s.alpha,
        h0_m: s.h0_m,
        gamma_s: s.gamma_s,
    };
    sched.a = match s.a {
        GainSpec::Fixed(a) => a,
        GainSpec::Auto(_) => {
            let x = &scenario.start;
            let h = s.h0_m;
            let g = (0..x.dim())
                .map(|i| {
                    let plus = smooth_objective(scenario, &x.offset_axis(i, h))?;
                    let minus = smooth_objective(scenario, &x.offset_axis(i, -h))?;
                    Ok(central_difference(plus, minus, h))
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Config(format!("schedule.a = \"auto\": {e}")))?;
            let g = norm(&g);
            if g == 0.0 {
                return Err(Error::Config(
                    "schedule.a = \"auto\": objective is flat at the start position".into(),
                ));
            }
            s.auto_first_step_m * sched.a_k(0).recip() / g
        }
    };
    Ok(sched)
}

/// Fresh robot, objective and start position for one seeded run.
pub fn build_run(scenario: &Scenario, seed: u64) -> Result<(Robot, Objective, Position)> {
    let c = &scenario.config;
    let robot = Robot::new(c.noise.clone(), NoiseStream::new(seed, ROBOT_STREAM))?;
    let sensor = |i: usize| {
        Sensor::new(
            scenario.fields[i].clone(),
            c.noise.clone(),
            NoiseStream::new(seed, NODE_STREAM_BASE + i as u64),
        )
    };
    let objective = match c.objective {
        ObjectiveKind::Seek => Objective::seek(sensor(0)?),
        ObjectiveKind::Bridge => Objective::bridge(sensor(0)?, sensor(1)?, c.bridge.offset_db)?,
    };
    let mut start = scenario.start.clone();
    let j = c.start.jitter_m;
    if j > 0.0 {
        let mut stream = NoiseStream::new(seed, START_STREAM);
        let offsets: Vec<f64> = (0..start.dim()).map(|_| stream.rng().random_range(-j..=j)).collect();
        start = start.add_scaled(&offsets, 1.0);
    }
    Ok((robot, objective, start))
}

/// Run `index` of the scenario.
pub fn run_single(scenario: &Scenario, index: u64, detail: RecordDetail) -> Result<RunRecord> {
    let schedule = resolve_schedule(scenario)?;
    run_with_schedule(scenario, &schedule, index, detail)
}

fn run_with_schedule(
    scenario: &Scenario,
    schedule: &GainSchedule,
    index: u64,
    detail: RecordDetail,
) -> Result<RunRecord> {
    let c = &scenario.config;
    let seed = run_seed(c.master_seed, index);
    let (mut robot, mut objective, start) = build_run(scenario, seed)?;
    let opts = RunOptions {
        max_iter: c.max_iter,
        stop: c.stop.clone(),
        optimum: Some(scenario.optimum.clone()),
        detail,
    };
    let mut record = run_fdsa(&start, schedule, &c.estimator, &mut robot, &mut objective, &opts)?;
    record.scenario_hash = Some(scenario.hash.clone());
    record.seed = Some(seed);
    Ok(record)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    /// Runs contributing at this `k`.
    pub n: usize,
    pub rms: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub scenario_hash: String,
    pub master_seed: u64,
    pub n_runs: usize,
    pub n_failed: usize,
    pub rate_exponent: Option<f64>,
    pub rate_stderr: Option<f64>,
    pub rate_k_min: Option<usize>,
    pub rate_k_max: Option<usize>,
    /// Why no rate was fitted, if so.
    pub rate_error: Option<String>,
    pub success_threshold_m: f64,
    /// Runs ending within the threshold; failed runs count as misses.
    pub success_fraction: f64,
    /// `None` when more than half the runs failed.
    pub median_final_distance: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

impl EnsembleSummary {
    pub fn from_records(scenario: &Scenario, records: &[RunRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InsufficientEnsemble { needed: 1, got: 0 });
        }
        let c = &scenario.config;
        let threshold = c.summary.success_threshold_m;
        let finals: Vec<f64> = records
            .iter()
            .map(|r| match (r.failed(), r.final_distance()) {
                (false, Some(d)) => d,
                _ => f64::INFINITY,
            })
            .collect();
        let successes = finals.iter().filter(|d| **d < threshold).count();
        let med = median(&finals);

        let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed()).collect();
        let longest = ok.iter().map(|r| r.rows.len()).max().unwrap_or(0);
        let curve = (0..longest)
            .map(|k| {
                let d: Vec<f64> = ok.iter().filter_map(|r| r.rows.get(k).and_then(|row| row.dist)).collect();
                let ms = d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
                CurvePoint {
                    k,
                    n: d.len(),
                    rms: ms.sqrt(),
                    median: median(&d),
                    q10: quantile(&d, 0.1),
                    q90: quantile(&d, 0.9),
                }
            })
            .collect();

        let k_min = c.summary.rate_k_min.unwrap_or(c.max_iter / 10);
        let (rate_exponent, rate_stderr, rate_k_min, rate_k_max, rate_error) =
            match fit_rate(records, k_min, c.summary.rate_k_max) {
                Ok(f) => (Some(f.exponent), Some(f.stderr), Some(f.k_min), Some(f.k_max), None),
                Err(e) => (None, None, None, None, Some(e.to_string())),
            };

        Ok(EnsembleSummary {
            scenario_hash: scenario.hash.clone(),
            master_seed: c.master_seed,
            n_runs: records.len(),
            n_failed: records.len() - ok.len(),
            rate_exponent,
            rate_stderr,
            rate_k_min,
            rate_k_max,
            rate_error,
            success_threshold_m: threshold,
            success_fraction: successes as f64 / records.len() as f64,
            median_final_distance: med.is_finite().then_some(med),
            curve,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub records: Vec<RunRecord>,
    pub summary: EnsembleSummary,
}

/// Runs `0..n_runs` on a pool of `workers` threads. Results do not depend on
/// `workers`.
pub fn run_ensemble(scenario: &Scenario, n_runs: usize, workers: usize, detail: RecordDetail) -> Result<Ensemble> {
    if n_runs == 0 {
        return Err(Error::param("runs", "must be >= 1"));
    }
    let schedule = resolve_schedule(scenario)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    let records = pool.install(|| {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|i| run_with_schedule(scenario, &schedule, i, detail))
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = EnsembleSummary::from_records(scenario, &records)?;
    Ok(Ensemble { records, summary })
}

/// First iteration from which `series` stays below `tol` for good.
pub fn settle_index(series: &[f64], tol: f64) -> Option<usize> {
    match series.iter().rposition(|d| *d >= tol) {
        None => Some(0),
        Some(last) if last + 1 < series.len() => Some(last + 1),
        Some(_) => None,
    }
}

/// When the iterate settles near the line of equal strength versus near the
/// optimum itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStage {
    /// Settling iteration of the distance to the perpendicular bisector of
    /// the two sources.
    pub cross_track: Option<usize>,
    /// Settling iteration of the distance, within the bisector, to the
    /// optimum's projection.
    pub along_track: Option<usize>,
}

impl TwoStage {
    /// Cross-track distance settled strictly before along-track distance.
    pub fn holds(&self) -> bool {
        match (self.cross_track, self.along_track) {
            (Some(c), Some(a)) => c < a,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

pub fn two_stage(record: &RunRecord, sources: [&Position; 2], optimum: &Position, tol: f64) -> TwoStage {
    let axis = sources[1].sub(sources[0]);
    let u = axis.scale(axis.norm().recip());
    let mid = sources[0].add(sources[1]).scale(0.5);
    let cross = |x: &Position| x.sub(&mid).dot(&u);
    let along = |x: &Position| {
        let c = cross(x);
        let in_plane = x.add_scaled(u.coords(), -c);
        let opt = optimum.add_scaled(u.coords(), -cross(optimum));
        in_plane.distance(&opt)
    };
    let cs: Vec<f64> = record.rows.iter().map(|r| cross(&r.x_hat).abs()).collect();
    let al: Vec<f64> = record.rows.iter().map(|r| along(&r.x_hat)).collect();
    TwoStage {
        cross_track: settle_index(&cs, tol),
        along_track: settle_index(&al, tol),
    }
}
