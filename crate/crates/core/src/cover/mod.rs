//! Curvature scales, good covers of the base interval and the cutoff `χ`.

mod build;
mod cutoff;
mod profile;
mod transition;

pub use build::{
    build_cover, max_overlap, p_value, verify_cover, AssumptionReport, Ball, CoverParams, GoodCover,
    Hypothesis, ItemCheck, Recipe, Variant, Violation, HAT,
};
pub use cutoff::{
    ball_cutoff, build_chi, measured_constants, read_cover_json, split_balls, write_cover_json,
    BallCutoff, Cutoff, Regions,
};
pub use profile::{
    curvature_scale, CurvatureProfile, EdgeKind, SampledProfile, Sampler, ScaleOptions,
    SyntheticProfile, D2RIC, DRIC, RIC, RM,
};
pub use transition::{cutoff_transition, smooth_transition, Transition};
