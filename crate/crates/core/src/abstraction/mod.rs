//! Single-parameter PHY abstraction.
//!
//! Each available PER curve is cut at a target PER `β` into a step function.
//! The resulting SINR threshold is mapped through the Shannon bound and
//! paired with the configuration's effective throughput; a least-squares fit
//! over all curves of a scenario yields the implementation loss `α̂`. With
//! `α̂` the threshold of any other configuration follows in closed form.

mod beta;
mod curve;
mod fit;
pub mod synthetic;

pub use beta::{select_beta, BetaSelection, DEFAULT_BETAS};
pub use curve::{
    normalize_curve, pav_non_increasing, threshold_from_curve, CurveMeta, CurvePoint, NormalizeReport,
    PerCurve, StepFunction, ADJUSTMENT_WARN_PER,
};
pub use fit::{
    fit_alpha, fit_point_for_curve, rmse, shannon_throughput, sse, threshold_for_settings, AbstractionModel,
    AlphaFit, FitPoint,
};
