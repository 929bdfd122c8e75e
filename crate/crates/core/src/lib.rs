//! Numerical certification of the convex infimum-convolution property,
//! convex Poincaré inequalities and two-level concentration for symmetric
//! one-dimensional measures and their products.

pub mod cli;
pub mod concentration;
pub mod config;
pub mod convexfn;
pub mod error;
pub mod infconv;
pub mod measure;
pub mod par;
pub mod poincare;
pub mod quadrature;
pub mod report;
pub mod tau;

pub use convexfn::PLConvex;
pub use error::{Error, Result};
pub use infconv::{infconv_exact, Cost, EnvelopeFunction};
pub use measure::Measure1D;
pub use par::Execution;
