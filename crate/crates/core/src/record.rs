//! Trajectories produced by optimizer runs.

use serde::{Deserialize, Serialize};

use crate::gradest::ProbeSample;
use crate::position::Position;
use crate::sa::{ScheduleVerdict, StopRules};

/// What the optimizer did at iteration `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepData {
    pub g_hat: Vec<f64>,
    /// Probe measurements; empty unless the run keeps full detail.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<ProbeSample>,
    pub commanded: Position,
    pub achieved: Position,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    pub a_k: f64,
    pub h_k: f64,
    pub x_hat: Position,
    /// Distance to the known optimum, when the scenario has one.
    pub dist: Option<f64>,
    /// Absent on the final row and on the row where a run failed.
    pub step: Option<StepData>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    MaxIter,
    StopRule { rule: String },
    Failure { k: usize, message: String },
}

/// How much per-iteration detail a run keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordDetail {
    /// Iterates, gradients and moves, plus every probe measurement.
    #[default]
    Full,
    /// Iterates, gradients and moves only.
    Trajectory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_hash: Option<String>,
    pub seed: Option<u64>,
    pub rows: Vec<IterationRow>,
    pub termination: Termination,
    pub verdict: ScheduleVerdict,
    pub stop_rules: StopRules,
    /// Offset added to bridge-objective measurements, if any.
    pub objective_offset_db: Option<f64>,
}

impl RunRecord {
    /// Number of completed iterations; `rows.len() == iterations() + 1`.
    pub fn iterations(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn failed(&self) -> bool {
        matches!(self.termination, Termination::Failure { .. })
    }

    pub fn final_position(&self) -> &Position {
        &self.rows.last().expect("records always hold x_0").x_hat
    }

    pub fn final_distance(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.dist)
    }

    /// Distance series indexed by `k`, if every row carries one.
    pub fn distances(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.dist).collect()
    }
}
