//! Seeded generation of unitaries, states, POVMs and whole schemes, and the
//! batch audit built on them.

mod batch;
mod random;
pub mod rng;
mod schemes;

pub use batch::{
    batch_audit, summarize, write_audit_csv, write_manifest, BatchRow, BatchSummary, Ensemble,
    EnsembleMember,
};
pub use random::{haar_unitary, haar_unitary_from, random_density, random_density_from, random_povm};
pub use schemes::{random_scheme, smear_pointer, Family, PointerKind, SamplerSpec};
