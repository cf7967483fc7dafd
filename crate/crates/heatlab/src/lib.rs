//! Numerical laboratory for heat flow on finite graph approximations of metric
//! measure Dirichlet spaces: reference and non-symmetric forms, cutoff functions,
//! propagators and kernels, and measured certificates for the functional
//! inequalities that govern them.

pub mod certify;
pub mod cutoff;
pub mod error;
pub mod experiment;
pub mod families;
pub mod forms;
pub mod harnack;
pub mod hke;
pub mod linalg;
pub mod propagator;
pub mod report;
pub mod space;

pub use error::{Error, Result};
pub use report::{CertReport, ReportBundle, Status};
