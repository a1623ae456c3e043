//! Run records: per-step metrics, checkpoint snapshots, and measurement
//! logs.
//!
//! Step labels run 1..=T: the row labeled `s` describes the state after `s`
//! loop iterations (estimates include all measurements taken up to model
//! time `s - 1`, and RMSE is computed against the field at that time).

use nalgebra::DVector;

use crate::consensus::CommGraph;
use crate::filter::FilterState;
use crate::kernel::PointSet;
use crate::nystrom::NystromBasis;
use crate::sim::wind::WindField;

/// Which estimator produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    /// Distributed Kalman tracking with consensus fusion.
    Distkp,
    /// Centralized filter ingesting every agent's measurements.
    Oracle,
    /// Distributed exponential-forgetting regression.
    Baseline,
}

impl RunKind {
    pub fn name(&self) -> &'static str {
        match self {
            RunKind::Distkp => "distkp",
            RunKind::Oracle => "oracle",
            RunKind::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    /// Grid RMSE vs ground truth, averaged over agents (the oracle has a
    /// single estimator).
    pub rmse: f64,
    /// Worst pairwise information-state distance across agents.
    pub disagreement: f64,
    /// Directed messages exchanged in this step's consensus round.
    pub messages: u64,
}

/// One measurement event.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub step: u64,
    pub agent: usize,
    pub position: Vec<f64>,
    pub value: f64,
}

/// Full network snapshot at a configured step.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    /// Agent positions when the step's measurements were taken.
    pub positions: Vec<Vec<f64>>,
    /// Per-agent recovered moment-form estimates (single entry for the
    /// oracle).
    pub estimates: Vec<FilterState>,
    pub graph: CommGraph,
    pub rmse_per_agent: Vec<f64>,
}

/// Everything a run produces. Wall-clock step timings are kept out of the
/// serialized artifacts so identical seeds yield identical files.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub kind: RunKind,
    /// Forgetting factor, for baseline runs.
    pub lambda: Option<f64>,
    pub seed: u64,
    pub basis: NystromBasis,
    pub eval_grid: PointSet,
    pub field: WindField,
    pub metrics: Vec<StepMetrics>,
    pub checkpoints: Vec<Checkpoint>,
    pub samples: Vec<SampleRecord>,
    pub final_states: Vec<FilterState>,
    pub step_micros: Vec<u64>,
    /// Scalars per exchanged message: the information vector plus the upper
    /// triangle of the information matrix.
    pub payload_scalars_per_message: u64,
    /// Steps whose communication graph was disconnected (warn policy).
    pub disconnected_steps: Vec<u64>,
}

impl RunLog {
    /// RMSE of the last recorded step.
    pub fn final_rmse(&self) -> f64 {
        self.metrics.last().map(|m| m.rmse).unwrap_or(f64::NAN)
    }

    /// Mean per-step wall time over a window of step indices (0-based).
    pub fn mean_step_micros(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.step_micros[range];
        slice.iter().sum::<u64>() as f64 / slice.len() as f64
    }

    pub fn checkpoint_at(&self, step: u64) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.step == step)
    }

    /// Ground truth over the evaluation grid at the measurement time behind
    /// step label `step`.
    pub fn truth_at_step(&self, step: u64) -> DVector<f64> {
        let t = step.saturating_sub(1);
        DVector::from_iterator(
            self.eval_grid.len(),
            self.eval_grid.iter().map(|p| self.field.eval(p, t)),
        )
    }
}
