//! Discrete POV measures, states, and observable-level diagnostics.

mod coexist;
mod density;
mod povm;

pub use coexist::{
    coexistence_check, CoexistenceOptions, CoexistenceVerdict, Construction, JointPovm,
};
pub use density::DensityOperator;
pub use povm::{
    degree_of_reality, is_effect, moment_operator, outcome_distribution, outcome_probability,
    triviality_residual, validate_povm, validate_povm_tol, DiscretePOVM, Outcome,
    TrivialityReport, ValidationReport,
};
