//! Temperature-dependent larval growth curves and hatching-time inference.
//!
//! Constant-temperature rearing data are smoothed per temperature
//! ([`smoother`]), aligned on common landmarks ([`registration`]) and blended
//! across temperature ([`field`]). The resulting growth model drives a growth
//! ODE under an arbitrary temperature record ([`dynamics`]), from which the
//! hatching time of larvae measured at a scene is estimated ([`inference`]).
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod data;
pub mod dynamics;
pub mod field;
pub mod inference;
pub mod interp;
pub mod json;
pub mod kernel;
pub mod registration;
pub mod scalar;
pub mod sim;
pub mod smoother;
pub mod synth;

use thiserror::Error;

pub use scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Smooth(#[from] smoother::SmoothError),
    #[error(transparent)]
    Registration(#[from] registration::RegistrationError),
    #[error(transparent)]
    Field(#[from] field::FieldError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Inference(#[from] inference::InferenceError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub type ExperimentalDataset64 = data::ExperimentalDataset<f64>;
pub type TemperatureProfile64 = data::TemperatureProfile<f64>;
pub type CaseObservation64 = data::CaseObservation<f64>;
pub type ConstantTempCurve64 = curve::ConstantTempCurve<f64>;
pub type GrowthField64 = field::GrowthField<f64>;
pub type HatchingEstimate64 = inference::HatchingEstimate<f64>;
pub type EstimateReport64 = inference::EstimateReport<f64>;
pub type SynthFamily64 = synth::SynthFamily<f64>;

pub type ExperimentalDataset32 = data::ExperimentalDataset<f32>;
pub type TemperatureProfile32 = data::TemperatureProfile<f32>;
pub type CaseObservation32 = data::CaseObservation<f32>;
pub type ConstantTempCurve32 = curve::ConstantTempCurve<f32>;
pub type GrowthField32 = field::GrowthField<f32>;
pub type HatchingEstimate32 = inference::HatchingEstimate<f32>;
pub type EstimateReport32 = inference::EstimateReport<f32>;
pub type SynthFamily32 = synth::SynthFamily<f32>;
