//! Numerical toolkit for quantum measurement schemes with unsharp observables.
//!
//! The crate builds measurement schemes `⟨H_A, ρ_A, U, Z⟩` on finite
//! dimensional spaces, extracts the observable they measure, audits the
//! pointer mixture and pointer value definiteness conditions, and assigns
//! conditional post-measurement states to object and apparatus.

pub mod error;
pub mod exec;
pub mod models;
pub mod observables;
pub mod sampling;
pub mod scenario;
pub mod scheme;
pub mod tensor;
pub mod tolerance;

pub use error::{Error, Result};
pub use exec::Execution;
pub use tolerance::Tolerances;
