//! Vortex-type solutions of boundary reaction problems on planar domains.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod layer;
pub mod nonlinearity;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{BoundaryPoint, Domain, DomainSpec, ParamModel};
pub use nonlinearity::{builtin_nonlinearity, Nonlinearity};
