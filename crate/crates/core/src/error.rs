use thiserror::Error;

use crate::flow::FlowTrajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive metric coefficient {field} = {value} at node {node}")]
    NonPositiveMetric {
        field: &'static str,
        node: usize,
        value: f64,
    },
    #[error("pole regularity violated at node {node}: {detail}")]
    PoleRegularityViolation { node: usize, detail: String },
    #[error("grid needs at least {required} nodes, got {got}")]
    GridTooSmall { required: usize, got: usize },
    #[error("grid is not uniform or not increasing near node {node}")]
    NonUniformGrid { node: usize },
    #[error("oracle mismatch for {quantity} at node {node}: fast {fast}, oracle {oracle}")]
    OracleMismatch {
        quantity: &'static str,
        node: usize,
        fast: f64,
        oracle: f64,
    },
    #[error("sample point too close to a chart singularity: {0}")]
    SingularChart(String),
    #[error("unsupported topology/curvature combination: {0}")]
    UnsupportedTopology(String),
    #[error("scale factor vanishes: extinction at t = {extinction_time}")]
    Extinction { extinction_time: f64 },

    #[error("curvature-scale ball at s = {center} leaves the domain at radius {radius}")]
    DomainTooSmall { center: f64, radius: f64 },
    #[error("cover does not reach point s = {uncovered}")]
    CoverageFailure { uncovered: f64 },
    #[error("cutoff radius {radius} is below rbar/sqrt(K) = {minimum}")]
    RadiusTooSmall { radius: f64, minimum: f64 },
    #[error("cannot separate inner and outer balls for the cutoff: {0}")]
    SeparationViolation(String),

    #[error("degenerate grid: minimum arclength spacing {0}")]
    DegenerateGrid(f64),
    #[error("blow-up at t = {time}: {reason}")]
    BlowupDetected {
        time: f64,
        reason: String,
        last_good: Box<FlowTrajectory>,
    },
    #[error("exhaustion run {index} failed: {source}")]
    ExhaustionRun {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory bookkeeping was not recorded against this cover")]
    CoverMismatch,
    #[error("snapshots too sparse: spacing {spacing} exceeds cap {cap}")]
    SnapshotsTooSparse { spacing: f64, cap: f64 },
    #[error("need at least {required} samples for the fit, got {got}")]
    InsufficientSamples { required: usize, got: usize },
    #[error("all samples fall below the fit floor")]
    AllBelowFloor,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical integration itself (blow-up, NaN, extinction).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::BlowupDetected { .. } | Error::Extinction { .. } => true,
            Error::ExhaustionRun { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
