//! Numerical core for mean-field CKLS and distribution-dependent Vasicek
//! interest-rate models: parameter records, particle simulation, Gaussian
//! law flows, one-dimensional optimal transport and closed-form bounds.

pub mod bounds;
pub mod error;
pub mod gaussian_flow;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod particle;
pub mod quadrature;
pub mod rng;
pub mod yamada_watanabe;

pub use error::{Error, Result};
pub use gaussian_flow::{FlowTrajectory, GaussianState};
pub use metrics::EmpiricalMeasure;
pub use model::{CklsParams, MeasureFunctional, VasicekParams, VasicekRaw};
pub use particle::{InitialLaw, ParticleEnsemble, SimConfig};
