//! Recovery of the jump-rate profile of an integer-marked compound Poisson
//! process from a single equidistantly binned trajectory.
//!
//! The counts `Z_l` observed in bins of width `h` are iid with characteristic
//! function `exp[h Σ ν_n (e^{inθ} − 1)]`. The rates `ν_n` are the Fourier
//! coefficients of `h⁻¹ log γ_h(θ)`, so they can be estimated by inverting the
//! logarithm of the empirical characteristic function, or equivalently from
//! the power-series logarithm of the count histogram.
//!
//! The numerical core (series algebra, model, ECF, estimation, covariance) is
//! generic over the floating point type through [`Scalar`]; the aliases at the
//! crate root fix it to `f64`, which is what the simulation and inference
//! layers use.

pub mod covariance;
pub mod ecf;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod model;
pub mod scalar;
pub mod series;
pub mod simulate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use covariance::CovKind;
pub use ecf::Correction;
pub use estimate::{GridSize, TailMode};
pub use inference::{PowerProfile, ScreeningRow, TestKind, TestResult, VmStatistics};
pub use simulate::RasterEvent;

pub type TruncSeries = series::TruncSeries<f64>;
pub type BivarSeries = series::BivarSeries<f64>;
pub type RateProfile = model::RateProfile<f64>;
pub type EstimatedProfile = model::EstimatedProfile<f64>;
pub type DiagnosticsReport = model::DiagnosticsReport<f64>;
pub type ValidityThresholds = model::ValidityThresholds<f64>;
pub type BinSeries = simulate::BinSeries<f64>;
pub type CoeffPoly = ecf::CoeffPoly<f64>;
pub type EcfLog = ecf::EcfLog<f64>;
pub type EstimationOptions = estimate::EstimationOptions<f64>;
pub type EstimateResult = estimate::EstimateResult<f64>;
pub type Reparameterized = estimate::Reparameterized<f64>;
pub type CovMatrix = covariance::CovMatrix<f64>;
pub type KernelSpec = covariance::KernelSpec<f64>;

/// Single precision variants of the main value types.
pub mod f32 {
    pub type TruncSeries = crate::series::TruncSeries<f32>;
    pub type RateProfile = crate::model::RateProfile<f32>;
    pub type BinSeries = crate::simulate::BinSeries<f32>;
    pub type CoeffPoly = crate::ecf::CoeffPoly<f32>;
    pub type EstimationOptions = crate::estimate::EstimationOptions<f32>;
    pub type EstimateResult = crate::estimate::EstimateResult<f32>;
    pub type CovMatrix = crate::covariance::CovMatrix<f32>;
    pub type KernelSpec = crate::covariance::KernelSpec<f32>;
}
