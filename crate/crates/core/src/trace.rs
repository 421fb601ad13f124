//! Per-iteration records of the alternating optimizers.

use std::io::Write;

use crate::scenario::SystemConfig;

/// Smoothed objective around the two block updates of one MM iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockObjectives {
    pub w_before: f64,
    pub w_after: f64,
    /// `NaN` when the reflection block is not updated.
    pub phi_before: f64,
    pub phi_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub bound_objective: f64,
    pub true_wmsr: f64,
    /// Smoothing parameter used in this iteration (MM only).
    pub zeta: Option<f64>,
    /// Cumulative wall time in milliseconds.
    pub wall_ms: f64,
    pub blocks: Option<BlockObjectives>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub status: RunStatus,
    pub iterations: usize,
    pub total_ms: f64,
    pub warnings: Vec<String>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self {
            rows: Vec::new(),
            status: RunStatus::MaxIterations,
            iterations: 0,
            total_ms: 0.0,
            warnings: Vec::new(),
        }
    }

    pub const CSV_HEADER: &'static str = "iteration,bound_objective_nats,true_wmsr_nats,zeta,wall_ms";

    /// Write the trace as CSV. With `timing = false` the time column is written as 0.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER.split(','))?;
        for r in &self.rows {
            let zeta = r.zeta.map(|z| z.to_string()).unwrap_or_default();
            let wall = if timing { r.wall_ms } else { 0.0 };
            w.write_record([
                r.iteration.to_string(),
                r.bound_objective.to_string(),
                r.true_wmsr.to_string(),
                zeta,
                wall.to_string(),
            ])?;
        }
        w.flush()
    }
}

impl Default for RunTrace {
    fn default() -> Self {
        Self::new()
    }
}

/// Variations of the alternating loop used by the baselines.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep the reflection vector fixed at its initial value.
    pub freeze_phi: bool,
    /// Model used for the reported true WMSR; defaults to the optimization model.
    pub evaluation: Option<SystemConfig>,
}

/// Relative change used by the stopping rules.
pub fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}
