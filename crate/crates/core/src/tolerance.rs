use serde::{Deserialize, Serialize};

/// Residual thresholds used across the crate.
///
/// `equality` bounds numerical identities (reconstructions, marginals,
/// unitarity). The remaining fields classify physical conditions in audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub equality: f64,
    /// Generic pass/fail threshold for physical conditions.
    pub classification: f64,
    pub pm: f64,
    pub pvd: f64,
    pub triviality: f64,
    /// Eigenvalues in `[-psd_clamp, 0)` count as zero.
    pub psd_clamp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            equality: 1e-9,
            classification: 1e-6,
            pm: 1e-8,
            pvd: 1e-8,
            triviality: 1e-6,
            psd_clamp: 1e-9,
        }
    }
}
