//! Geometric optics for diffractive obstacles: obstacle geometry, the
//! Hamiltonian flow of the wave symbol, reflected phases and Jacobians,
//! transport of oscillatory profiles, and synthesis and verification of the
//! assembled asymptotic field.

pub mod chart;
pub mod checks;
pub mod corrector;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod export;
pub mod expr;
pub mod flow;
pub mod grazing;
pub mod halfspace;
pub mod manifest;
pub mod obstacle;
pub mod phase;
pub mod pipeline;
pub mod picard;
pub mod profile;
pub mod rays;
pub mod reference;
pub mod scenario;
pub mod series;
pub mod source;
pub mod synthesis;

pub use error::{Error, Result};
