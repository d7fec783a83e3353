//! PHY abstraction and network-level simulation for direct vehicular links.
//!
//! A measured PER-vs-SINR curve is reduced to an SINR threshold, and the
//! thresholds of many configurations collapse onto one implementation loss
//! against the Shannon bound. [`engine`] runs 802.11p and LTE-V2X sidelink
//! highway scenarios under either reception model and reports PRR over
//! distance and inter-packet gaps.
//!
//! The analytic modules are generic over [`num::Real`]; the aliases below fix
//! the scalar for the common cases.

pub mod abstraction;
pub mod access;
pub mod channel;
pub mod engine;
pub mod error;
pub mod io;
pub mod metrics;
pub mod num;
pub mod scenario;
pub mod settings;

pub use error::{Error, Result};
pub use num::Real;

pub type PerCurveF64 = abstraction::PerCurve<f64>;
pub type PerCurveF32 = abstraction::PerCurve<f32>;
pub type StepFunctionF64 = abstraction::StepFunction<f64>;
pub type StepFunctionF32 = abstraction::StepFunction<f32>;
pub type AbstractionModelF64 = abstraction::AbstractionModel<f64>;
pub type AbstractionModelF32 = abstraction::AbstractionModel<f32>;
pub type TechnologySettingsF64 = settings::TechnologySettings<f64>;
pub type TechnologySettingsF32 = settings::TechnologySettings<f32>;
pub type PropagationConfigF64 = channel::PropagationConfig<f64>;
pub type PropagationConfigF32 = channel::PropagationConfig<f32>;
pub type PrrSeriesF64 = metrics::PrrSeries<f64>;
pub type PrrSeriesF32 = metrics::PrrSeries<f32>;
