//! Lifespan monitors: doubling times, theoretical bounds, barrier margins,
//! evolution-inequality residuals and metric equivalence.
//!
//! Every monitor is a pure function of a finished trajectory.

mod barrier;
mod bounds;
mod doubling;
mod report;
mod residual;

pub use barrier::{barrier_margin, lambda_grid, partition_of_unity, BarrierResult, BarrierSpec};
pub use bounds::{
    calibrate, h_inf, proof_alpha, theoretical_lifespan_bounds, Bound, Calibration, CalibrationRun, HInf, LifespanBounds,
    LifespanConstants,
};
pub use doubling::{
    doubling_time, equivalence_factor, equivalence_factor_until, generalized_doubling_time,
    unboundedness_preserved, Binding, Condition, Equivalence, GeneralizedDoubling,
};
pub use report::{monitor_report, Margins, Measured, MonitorReport};
pub use residual::{evolution_residuals, write_residual_csv, ResidualOptions, ResidualReport, ResidualRow};
