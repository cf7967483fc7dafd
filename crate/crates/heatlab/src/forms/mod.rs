//! Reference form, energy densities, the skew perturbation built from a harmonic
//! profile, and the structural assumption checks.

mod assumptions;
mod harmonic;
mod reference;
mod schedule;

pub use assumptions::{verify_assumption0, verify_skew_assumptions, SkewAssumptions, DAVIES_M};
pub use harmonic::{harmonic_profile, harmonic_profile_with, HarmonicProfile};
pub use reference::ReferenceForm;
pub use schedule::{decompose, skew_matrix, Decomposition, FormSchedule, ScheduleFile, Window, WindowRecord};
