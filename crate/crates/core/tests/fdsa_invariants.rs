use std::sync::Arc;

use rf_taxis::gradest::{EstimatorConfig, GradientEstimator};
use rf_taxis::harness::{build_run, resolve_schedule, run_seed, Scenario};
use rf_taxis::objectives::Objective;
use rf_taxis::record::RecordDetail;
use rf_taxis::sa::{fdsa_step, run_fdsa, GainSchedule, RunOptions, RunState};
use rf_taxis::sensing::{NoiseSpec, NoiseStream, Robot, Sensor};
use rf_taxis::{FieldModel, PathLossParams, Position, RunRecord};

fn pure_field() -> Arc<FieldModel> {
    let params = PathLossParams::new(3.0, 1.0, Position::origin(2)).unwrap();
    Arc::new(FieldModel::new(params).unwrap().with_epsilon_floor(1e-6).unwrap())
}

fn noisy(seed: u64) -> (Robot, Objective) {
    let noise = NoiseSpec {
        sigma_meas_db: 2.0,
        ..NoiseSpec::default()
    };
    let robot = Robot::new(noise.clone(), NoiseStream::new(seed, 0)).unwrap();
    let sensor = Sensor::new(pure_field(), noise, NoiseStream::new(seed, 1)).unwrap();
    (robot, Objective::seek(sensor))
}

fn schedule() -> GainSchedule {
    GainSchedule {
        a: 20.0,
        ..GainSchedule::default()
    }
}

#[test]
fn stepping_by_hand_reproduces_a_run() {
    let start = Position::new(vec![15.0, -4.0]).unwrap();
    let est = EstimatorConfig::default();
    let mut opts = RunOptions::new(40);
    opts.optimum = Some(Position::origin(2));
    let (mut robot, mut obj) = noisy(9);
    let record = run_fdsa(&start, &schedule(), &est, &mut robot, &mut obj, &opts).unwrap();

    let (mut robot, mut obj) = noisy(9);
    let mut state = RunState { k: 0, x_hat: start };
    for row in &record.rows[..40] {
        assert_eq!(row.x_hat, state.x_hat);
        let out = fdsa_step(&state, &schedule(), &est, &mut robot, &mut obj).unwrap();
        assert_eq!(Some(&out.estimate.g_hat), row.step.as_ref().map(|s| &s.g_hat));
        // the state is serializable and carries everything needed to continue
        let json = serde_json::to_string(&out.next).unwrap();
        state = serde_json::from_str(&json).unwrap();
    }
    assert_eq!(&state.x_hat, record.final_position());
}

#[test]
fn rows_and_distances() {
    let start = Position::new(vec![12.0, 5.0]).unwrap();
    let (mut robot, mut obj) = noisy(3);
    let mut opts = RunOptions::new(25);
    opts.optimum = Some(Position::origin(2));
    let r = run_fdsa(&start, &schedule(), &EstimatorConfig::default(), &mut robot, &mut obj, &opts).unwrap();
    assert_eq!(r.rows.len(), r.iterations() + 1);
    assert_eq!(r.iterations(), 25);
    assert!(r.rows.iter().all(|row| row.dist.is_some()));
    assert_eq!(r.rows[0].dist, Some(13.0));
    assert!(r.rows.iter().enumerate().all(|(k, row)| row.k == k));
}

#[test]
fn noiseless_descent_never_increases_the_objective_before_overshoot() {
    let field = pure_field();
    let sensor = Sensor::new(field.clone(), NoiseSpec::noiseless(), NoiseStream::new(0, 1)).unwrap();
    let mut obj = Objective::seek(sensor);
    let mut robot = Robot::new(NoiseSpec::noiseless(), NoiseStream::new(0, 0)).unwrap();
    let s = GainSchedule {
        a: 5.0,
        ..GainSchedule::default()
    };
    let est = EstimatorConfig::central_difference(1.0);
    let mut state = RunState {
        k: 0,
        x_hat: Position::new(vec![-18.0, 9.0]).unwrap(),
    };
    let mut checked = 0;
    while state.x_hat.norm() > 1.0 {
        let out = fdsa_step(&state, &s, &est, &mut robot, &mut obj).unwrap();
        let step = out.a_k * rf_taxis::position::norm(&out.estimate.g_hat);
        if step < state.x_hat.norm() {
            let before = obj.eval_noiseless(&state.x_hat).unwrap();
            let after = obj.eval_noiseless(&out.next.x_hat).unwrap();
            assert!(after <= before, "k={} {before} -> {after}", state.k);
            checked += 1;
        }
        state = out.next;
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn two_point_line_fit_runs_like_central_differences() {
    let start = Position::new(vec![10.0, 10.0]).unwrap();
    let opts = RunOptions::new(30);
    let run = |est: &dyn GradientEstimator| -> RunRecord {
        let sensor = Sensor::new(pure_field(), NoiseSpec::noiseless(), NoiseStream::new(5, 1)).unwrap();
        let mut obj = Objective::seek(sensor);
        let mut robot = Robot::new(NoiseSpec::noiseless(), NoiseStream::new(5, 0)).unwrap();
        run_fdsa(&start, &schedule(), est, &mut robot, &mut obj, &opts).unwrap()
    };
    let cd = run(&EstimatorConfig::central_difference(1.0));
    let lf = run(&EstimatorConfig::line_fit(1.0, 2));
    for (a, b) in cd.rows.iter().zip(&lf.rows) {
        assert_eq!(a.x_hat, b.x_hat);
    }
}

const BRIDGE: &str = r#"
name = "bridge"
dimension = 2
objective = "bridge"
master_seed = 4
max_iter = 30
[start]
position_m = [4.0, 6.0]
[[nodes]]
source_m = [-5.0, 0.0]
gamma_pl = 3.0
[[nodes]]
source_m = [5.0, 0.0]
gamma_pl = 3.0
[noise]
sigma_meas_db = 2.0
[estimator]
kind = "central_difference"
[bridge]
oracle_resolution_m = 0.1
"#;

#[test]
fn bridge_runs_draw_two_noise_samples_per_evaluation() {
    let s = Scenario::from_toml_str(BRIDGE).unwrap();
    let sched = resolve_schedule(&s).unwrap();
    let (mut robot, mut obj, start) = build_run(&s, run_seed(4, 0)).unwrap();
    let opts = RunOptions {
        max_iter: 30,
        stop: Default::default(),
        optimum: None,
        detail: RecordDetail::Full,
    };
    let r = run_fdsa(&start, &sched, &s.config.estimator, &mut robot, &mut obj, &opts).unwrap();
    let evaluations: usize = r.rows.iter().filter_map(|row| row.step.as_ref()).map(|st| st.samples.len()).sum();
    assert_eq!(evaluations, 30 * 4);
    assert_eq!(obj.noise_draws(), 2 * evaluations as u64);
    assert_eq!(r.objective_offset_db, Some(120.0));
}

#[test]
fn stop_rules_end_runs_early() {
    let start = Position::new(vec![15.0, 0.0]).unwrap();
    let (mut robot, mut obj) = noisy(1);
    let mut opts = RunOptions::new(1000);
    opts.stop.h_min_m = Some(0.5);
    let r = run_fdsa(&start, &schedule(), &EstimatorConfig::default(), &mut robot, &mut obj, &opts).unwrap();
    // h_k = (k+1)^(-1/6) < 0.5 first at k = 64
    assert_eq!(r.iterations(), 64);
    assert!(matches!(r.termination, rf_taxis::Termination::StopRule { .. }));
}

#[test]
fn invalid_schedules_still_run_with_their_verdict() {
    let start = Position::new(vec![15.0, 0.0]).unwrap();
    let (mut robot, mut obj) = noisy(1);
    let s = GainSchedule {
        gamma_s: 0.0,
        ..schedule()
    };
    let r = run_fdsa(&start, &s, &EstimatorConfig::default(), &mut robot, &mut obj, &RunOptions::new(10)).unwrap();
    assert_eq!(r.iterations(), 10);
    assert!(!r.verdict.h_to_zero && !r.verdict.valid());
}
