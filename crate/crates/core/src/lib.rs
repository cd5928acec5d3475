//! Guided-diffusion sampling over analytic concept worlds, with inference-time
//! bias avoidance and a statistical fairness evaluation harness.
//!
//! The math modules are generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the sampler, CLI and acceptance suite use.

pub mod diffusion;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod guidance;
pub mod sampler;
pub mod scalar;
pub mod stats;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Real;
pub use world::{builtin_world, builtin_worlds, AttributeScheme, BiasFocus, Condition};
pub use sampler::Mode;

pub type NoiseSchedule = diffusion::NoiseSchedule<f64>;
pub type LatentState = diffusion::LatentState<f64>;
pub type ConceptWorld = world::ConceptWorld<f64>;
pub type GaussianComponent = world::GaussianComponent<f64>;
pub type GuidanceConfig = guidance::GuidanceConfig<f64>;
pub type MomentumState = guidance::MomentumState<f64>;
pub type RunConfig = sampler::RunConfig<f64>;
pub type SampleRecord = sampler::SampleRecord<f64>;
