//! Measurement schemes and the pointer condition calculus.

mod audit;
mod conditions;

pub use audit::{insolubility_audit, AuditConfig, AuditReport};
pub use conditions::{
    apparatus_mixture_residual, conditional_gram, induced_observable, pm_residual,
    pointer_components, post_state, pr_residual, pvd_residual, CellConditional,
    ConditionalDecomposition, UNREAD_TRACE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{validate_povm_tol, DensityOperator, DiscretePOVM};
use crate::tensor::{ComplexMatrix, SpaceLayout};

/// Grouping of pointer outcomes into reading cells `X_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<(String, Vec<String>)>,
}

impl Partition {
    /// Checks that the cells exactly cover the outcomes of `z`.
    pub fn new(cells: Vec<(String, Vec<String>)>, z: &DiscretePOVM) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidPartition("no cells".into()));
        }
        for (i, (label, members)) in cells.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("cell `{label}` is empty")));
            }
            if cells[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::InvalidPartition(format!("duplicate cell `{label}`")));
            }
        }
        // Exact-cover check lives in coarse graining.
        z.coarse_grain(&cells)?;
        Ok(Self { cells })
    }

    /// One cell per pointer outcome, labelled like the outcome.
    pub fn finest(z: &DiscretePOVM) -> Self {
        Self {
            cells: z.labels().map(|l| (l.to_string(), vec![l.to_string()])).collect(),
        }
    }

    /// All outcomes in a single cell.
    pub fn single(z: &DiscretePOVM, label: &str) -> Self {
        Self {
            cells: vec![(label.to_string(), z.labels().map(String::from).collect())],
        }
    }

    pub fn cells(&self) -> &[(String, Vec<String>)] {
        &self.cells
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.cells.iter().map(|(l, _)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell effects `Z(X_i)`.
    pub fn coarse_grain(&self, z: &DiscretePOVM) -> Result<DiscretePOVM> {
        z.coarse_grain(&self.cells)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionCell {
    pub label: String,
    pub outcomes: Vec<String>,
}

/// Measurement scheme `⟨H_A, ρ_A, U, Z⟩`.
///
/// The first factor of `layout` is the object; every remaining factor belongs
/// to the apparatus, which may itself be composite.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScheme {
    layout: SpaceLayout,
    rho_a: DensityOperator,
    coupling: ComplexMatrix,
    pointer: DiscretePOVM,
}

impl MeasurementScheme {
    pub fn new(
        layout: SpaceLayout,
        rho_a: DensityOperator,
        coupling: ComplexMatrix,
        pointer: DiscretePOVM,
        tol: f64,
    ) -> Result<Self> {
        if layout.factors().len() < 2 {
            return Err(Error::InvalidScheme(
                "layout needs an object factor followed by apparatus factors".into(),
            ));
        }
        let d_a = layout.total_dim() / layout.factors()[0].1;
        if !rho_a.is_normalized() {
            return Err(Error::InvalidScheme("apparatus state must be normalized".into()));
        }
        for (what, found) in [("apparatus state", rho_a.dim()), ("pointer", pointer.dim())] {
            if found != d_a {
                return Err(Error::InvalidScheme(format!(
                    "{what} has dimension {found}, apparatus dimension is {d_a}"
                )));
            }
        }
        if coupling.dim() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: coupling.dim(),
            });
        }
        let unitarity = coupling.unitarity_residual();
        if unitarity > tol {
            return Err(Error::InvalidScheme(format!(
                "coupling is not unitary (residual {unitarity:e})"
            )));
        }
        let report = validate_povm_tol(&pointer, tol);
        if !report.valid {
            return Err(Error::InvalidScheme(format!(
                "pointer is not a valid POVM (completeness {:e}, positivity {:e})",
                report.completeness_residual, report.positivity_violation
            )));
        }
        Ok(Self {
            layout,
            rho_a,
            coupling,
            pointer,
        })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn object_label(&self) -> &str {
        &self.layout.factors()[0].0
    }

    pub fn apparatus_labels(&self) -> Vec<&str> {
        self.layout.labels().skip(1).collect()
    }

    pub fn object_dim(&self) -> usize {
        self.layout.factors()[0].1
    }

    pub fn apparatus_dim(&self) -> usize {
        self.layout.total_dim() / self.object_dim()
    }

    pub fn rho_a(&self) -> &DensityOperator {
        &self.rho_a
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    pub fn pointer(&self) -> &DiscretePOVM {
        &self.pointer
    }
}

/// Wire form of a scheme: `{layout, rho_A, U, Z, partition}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeDocument {
    pub layout: SpaceLayout,
    #[serde(rename = "rho_A")]
    pub rho_a: DensityOperator,
    #[serde(rename = "U")]
    pub coupling: ComplexMatrix,
    #[serde(rename = "Z")]
    pub pointer: DiscretePOVM,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<PartitionCell>>,
}

impl SchemeDocument {
    pub fn from_scheme(m: &MeasurementScheme, partition: &Partition) -> Self {
        Self {
            layout: m.layout.clone(),
            rho_a: m.rho_a.clone(),
            coupling: m.coupling.clone(),
            pointer: m.pointer.clone(),
            partition: Some(
                partition
                    .cells()
                    .iter()
                    .map(|(label, outcomes)| PartitionCell {
                        label: label.clone(),
                        outcomes: outcomes.clone(),
                    })
                    .collect(),
            ),
        }
    }

    /// Validated scheme plus its partition (finest when absent).
    pub fn into_scheme(self, tol: f64) -> Result<(MeasurementScheme, Partition)> {
        let m = MeasurementScheme::new(self.layout, self.rho_a, self.coupling, self.pointer, tol)?;
        let part = match self.partition {
            Some(cells) => Partition::new(
                cells.into_iter().map(|c| (c.label, c.outcomes)).collect(),
                m.pointer(),
            )?,
            None => Partition::finest(m.pointer()),
        };
        Ok((m, part))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::Outcome;

    fn sharp_pointer() -> DiscretePOVM {
        DiscretePOVM::new(vec![
            Outcome::new("0", ComplexMatrix::diagonal(&[1.0, 0.0])),
            Outcome::new("1", ComplexMatrix::diagonal(&[0.0, 1.0])),
        ])
        .unwrap()
    }

    fn trivial_scheme() -> MeasurementScheme {
        MeasurementScheme::new(
            SpaceLayout::new([("S", 2), ("A", 2)]).unwrap(),
            DensityOperator::new(ComplexMatrix::diagonal(&[1.0, 0.0])).unwrap(),
            ComplexMatrix::identity(4),
            sharp_pointer(),
            1e-9,
        )
        .unwrap()
    }

    #[test]
    fn partition_validation() {
        let z = sharp_pointer();
        assert!(Partition::new(vec![("a".into(), vec!["0".into()])], &z).is_err());
        assert!(Partition::new(
            vec![("a".into(), vec!["0".into(), "1".into()]), ("b".into(), vec!["1".into()])],
            &z
        )
        .is_err());
        assert!(Partition::new(vec![("a".into(), vec![])], &z).is_err());
        let p = Partition::new(vec![("a".into(), vec!["1".into(), "0".into()])], &z).unwrap();
        assert_eq!(p.cells()[0].1, vec!["1".to_string(), "0".to_string()]);
        assert_eq!(Partition::single(&z, "a").cells()[0].1.len(), 2);
        assert_eq!(Partition::finest(&z).len(), 2);
    }

    #[test]
    fn scheme_validation() {
        let layout = SpaceLayout::new([("S", 2), ("A", 2)]).unwrap();
        let rho = DensityOperator::new(ComplexMatrix::diagonal(&[1.0, 0.0])).unwrap();
        let not_unitary = ComplexMatrix::diagonal(&[1.0, 1.0, 1.0, 0.5]);
        assert!(MeasurementScheme::new(layout.clone(), rho.clone(), not_unitary, sharp_pointer(), 1e-9).is_err());
        assert!(MeasurementScheme::new(
            SpaceLayout::new([("S", 2), ("A", 3)]).unwrap(),
            rho.clone(),
            ComplexMatrix::identity(6),
            sharp_pointer(),
            1e-9
        )
        .is_err());
        assert!(MeasurementScheme::new(SpaceLayout::single("S", 4), rho, ComplexMatrix::identity(4), sharp_pointer(), 1e-9).is_err());
        let m = trivial_scheme();
        assert_eq!((m.object_dim(), m.apparatus_dim()), (2, 2));
        assert_eq!(m.apparatus_labels(), vec!["A"]);
    }

    #[test]
    fn document_round_trip() {
        let m = trivial_scheme();
        let part = Partition::finest(m.pointer());
        let doc = SchemeDocument::from_scheme(&m, &part);
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains(r#""rho_A""#) && json.contains(r#""U""#) && json.contains(r#""Z""#));
        let back: SchemeDocument = serde_json::from_str(&json).unwrap();
        let (m2, part2) = back.into_scheme(1e-9).unwrap();
        assert_eq!(m2, m);
        assert_eq!(part2, part);
    }
}
