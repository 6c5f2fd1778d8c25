use serde::Serialize;

use super::{MeasurementScheme, Partition};
use crate::error::{Error, Result};
use crate::observables::{DensityOperator, DiscretePOVM, Outcome};
use crate::tensor::{
    partial_trace, psd_sqrt, spanning_states, tensor_product, ComplexMatrix, SpaceLayout,
};

/// Cells whose reading probability is at most this are flagged unread.
pub const UNREAD_TRACE: f64 = 1e-12;

/// Bound on the probability reproducibility defect of an induced observable.
const PR_TOL: f64 = 1e-9;

/// `U (ρ ⊗ ρ_A) U†` for any operator `ρ` on the object.
fn evolve(m: &MeasurementScheme, rho: &ComplexMatrix) -> ComplexMatrix {
    tensor_product(rho, m.rho_a().matrix()).conjugate_by(m.coupling())
}

fn check_object_state(m: &MeasurementScheme, rho: &DensityOperator) -> Result<()> {
    if rho.dim() != m.object_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.object_dim(),
            found: rho.dim(),
        });
    }
    if !rho.is_normalized() {
        return Err(Error::InvalidState("object state must be normalized".into()));
    }
    Ok(())
}

/// Post-coupling state `ρ'_SA = U (ρ ⊗ ρ_A) U†`.
pub fn post_state(m: &MeasurementScheme, rho: &DensityOperator) -> Result<DensityOperator> {
    check_object_state(m, rho)?;
    DensityOperator::new(evolve(m, rho.matrix()).hermitian_part())
}

/// Per-cell pointer operators lifted to the compound space.
struct CellOperators {
    label: String,
    /// `I ⊗ Z(X_i)`
    lifted: ComplexMatrix,
    /// `I ⊗ Z(X_i)^{1/2}`
    root: ComplexMatrix,
}

fn cell_operators(object_dim: usize, z: &DiscretePOVM, part: &Partition) -> Result<Vec<CellOperators>> {
    let cells = part.coarse_grain(z)?;
    let id = ComplexMatrix::identity(object_dim);
    cells
        .outcomes()
        .iter()
        .map(|o| {
            Ok(CellOperators {
                label: o.label.clone(),
                lifted: tensor_product(&id, &o.effect),
                root: tensor_product(&id, &psd_sqrt(&o.effect)?),
            })
        })
        .collect()
}

fn sandwich(root: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    &(root * rho) * root
}

/// Measured observable fixed by probability reproducibility:
/// `E_i = tr_A[(I ⊗ ρ_A) U† (I ⊗ Z_i) U]`.
///
/// The result is checked against the defining condition on a spanning set of
/// object states before it is returned.
pub fn induced_observable(m: &MeasurementScheme) -> Result<DiscretePOVM> {
    let id_s = ComplexMatrix::identity(m.object_dim());
    let weight = tensor_product(&id_s, m.rho_a().matrix());
    let u = m.coupling();
    let u_dag = u.adjoint();
    let object = [m.object_label()];
    let outcomes = m
        .pointer()
        .outcomes()
        .iter()
        .map(|o| {
            let heis = &(&u_dag * &tensor_product(&id_s, &o.effect)) * u;
            let e = partial_trace(&(&weight * &heis), m.layout(), &object)?.hermitian_part();
            Ok(Outcome {
                label: o.label.clone(),
                value: o.value,
                effect: e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e = DiscretePOVM::new(outcomes)?;
    let residual = pr_residual(m, &e)?;
    if residual > PR_TOL {
        return Err(Error::Numeric(format!(
            "induced observable violates probability reproducibility by {residual:e}"
        )));
    }
    Ok(e)
}

/// `max |tr[E_i ρ] − tr[(I ⊗ Z_i) ρ'_SA]|` over a spanning set of object
/// states and all outcomes.
pub fn pr_residual(m: &MeasurementScheme, e: &DiscretePOVM) -> Result<f64> {
    if e.dim() != m.object_dim() || e.len() != m.pointer().len() {
        return Err(Error::DimensionMismatch {
            expected: m.object_dim(),
            found: e.dim(),
        });
    }
    let id_s = ComplexMatrix::identity(m.object_dim());
    let lifted: Vec<ComplexMatrix> = m
        .pointer()
        .effects()
        .map(|z| tensor_product(&id_s, z))
        .collect();
    let mut worst: f64 = 0.0;
    for rho in spanning_states(m.object_dim()) {
        let post = evolve(m, &rho);
        for (ei, zi) in e.effects().zip(&lifted) {
            let lhs = ei.trace_product(&rho).re;
            let rhs = zi.trace_product(&post).re;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Pointer-conditioned pieces of a compound state for one reading cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellConditional {
    pub label: String,
    pub probability: f64,
    /// `ρ'_SA(X_i) = (I ⊗ Z(X_i)^{1/2}) ρ'_SA (I ⊗ Z(X_i)^{1/2})`
    pub component: DensityOperator,
    /// `ρ'_S(X_i) = tr_A ρ'_SA(X_i)`
    pub object: DensityOperator,
    /// `ρ'_A(X_i) = tr_S ρ'_SA(X_i)`
    pub apparatus: DensityOperator,
    pub unread: bool,
}

/// Conditional states per reading, stored sub-normalized: each trace equals
/// the reading probability.
#[derive(Debug, Clone)]
pub struct ConditionalDecomposition {
    layout: SpaceLayout,
    cells: Vec<CellConditional>,
}

impl ConditionalDecomposition {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn cells(&self) -> &[CellConditional] {
        &self.cells
    }

    pub fn cell(&self, label: &str) -> Result<&CellConditional> {
        self.cells
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn probabilities(&self) -> Vec<(String, f64)> {
        self.cells.iter().map(|c| (c.label.clone(), c.probability)).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.cells.iter().map(|c| c.probability).sum()
    }

    pub fn object_conditionals(&self) -> Vec<&DensityOperator> {
        self.cells.iter().map(|c| &c.object).collect()
    }

    pub fn apparatus_conditionals(&self) -> Vec<&DensityOperator> {
        self.cells.iter().map(|c| &c.apparatus).collect()
    }

    /// Object state conditional on a reading, renormalized; `None` for
    /// unread cells.
    pub fn normalized_object(&self, label: &str) -> Result<Option<DensityOperator>> {
        Ok(self.cell(label)?.object.normalized(UNREAD_TRACE))
    }

    pub fn normalized_apparatus(&self, label: &str) -> Result<Option<DensityOperator>> {
        Ok(self.cell(label)?.apparatus.normalized(UNREAD_TRACE))
    }

    /// Component of a cell reduced to the listed factors (sub-normalized).
    pub fn reduced(&self, label: &str, keep: &[&str]) -> Result<DensityOperator> {
        let c = self.cell(label)?;
        DensityOperator::sub_normalized(partial_trace(c.component.matrix(), &self.layout, keep)?.hermitian_part())
    }

    /// `Σ_i ρ'_SA(X_i)`.
    pub fn component_sum(&self) -> ComplexMatrix {
        let n = self.layout.total_dim();
        self.cells
            .iter()
            .fold(ComplexMatrix::zeros(n), |acc, c| &acc + c.component.matrix())
    }
}

/// Splits a compound state along the pointer cells. The first factor of
/// `layout` is the object; the remaining factors carry the pointer `z`.
pub fn pointer_components(
    rho_sa: &DensityOperator,
    layout: &SpaceLayout,
    z: &DiscretePOVM,
    part: &Partition,
) -> Result<ConditionalDecomposition> {
    if rho_sa.dim() != layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.total_dim(),
            found: rho_sa.dim(),
        });
    }
    if !rho_sa.is_normalized() {
        return Err(Error::InvalidState("compound state must be normalized".into()));
    }
    let object_dim = layout.factors()[0].1;
    if layout.factors().len() < 2 || z.dim() * object_dim != layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.total_dim() / object_dim,
            found: z.dim(),
        });
    }
    let object = [layout.factors()[0].0.as_str()];
    let apparatus: Vec<&str> = layout.labels().skip(1).collect();
    let cells = cell_operators(object_dim, z, part)?
        .into_iter()
        .map(|ops| {
            let comp = sandwich(&ops.root, rho_sa.matrix()).hermitian_part();
            let probability = comp.trace().re.max(0.0);
            let object_m = partial_trace(&comp, layout, &object)?.hermitian_part();
            let apparatus_m = partial_trace(&comp, layout, &apparatus)?.hermitian_part();
            Ok(CellConditional {
                label: ops.label,
                probability,
                component: DensityOperator::sub_normalized(comp)?,
                object: DensityOperator::sub_normalized(object_m)?,
                apparatus: DensityOperator::sub_normalized(apparatus_m)?,
                unread: probability <= UNREAD_TRACE,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalDecomposition {
        layout: layout.clone(),
        cells,
    })
}

/// Pointer mixture defect `max_ρ ‖ρ'_SA − Σ_i ρ'_SA(X_i)‖_F`.
///
/// The defect is linear in the object state, so the maximum over a spanning
/// set of `d_S²` states vanishes exactly when the condition holds for all
/// states.
pub fn pm_residual(m: &MeasurementScheme, part: &Partition) -> Result<f64> {
    let cells = cell_operators(m.object_dim(), m.pointer(), part)?;
    let mut worst: f64 = 0.0;
    for rho in spanning_states(m.object_dim()) {
        let post = evolve(m, &rho);
        let mixed = cells.iter().fold(ComplexMatrix::zeros(post.dim()), |acc, c| {
            &acc + &sandwich(&c.root, &post)
        });
        worst = worst.max((&post - &mixed).frobenius_norm());
    }
    Ok(worst)
}

/// Pointer value definiteness defect
/// `max_{ρ,i} |tr[(I ⊗ Z(X_i)) ρ'_SA(X_i)] − tr ρ'_SA(X_i)|` over a spanning
/// set of object states.
pub fn pvd_residual(m: &MeasurementScheme, part: &Partition) -> Result<f64> {
    let cells = cell_operators(m.object_dim(), m.pointer(), part)?;
    let mut worst: f64 = 0.0;
    for rho in spanning_states(m.object_dim()) {
        let post = evolve(m, &rho);
        for c in &cells {
            let comp = sandwich(&c.root, &post);
            let repeat = c.lifted.trace_product(&comp).re;
            worst = worst.max((repeat - comp.trace().re).abs());
        }
    }
    Ok(worst)
}

/// `‖tr_S ρ'_SA − Σ_i ρ'_A(X_i)‖_F` for one input state.
pub fn apparatus_mixture_residual(
    m: &MeasurementScheme,
    rho: &DensityOperator,
    part: &Partition,
) -> Result<f64> {
    check_object_state(m, rho)?;
    let cells = cell_operators(m.object_dim(), m.pointer(), part)?;
    let post = evolve(m, rho.matrix());
    let apparatus = m.apparatus_labels();
    let reduced = partial_trace(&post, m.layout(), &apparatus)?;
    let mut mixture = ComplexMatrix::zeros(reduced.dim());
    for c in &cells {
        mixture = &mixture + &partial_trace(&sandwich(&c.root, &post), m.layout(), &apparatus)?;
    }
    Ok((&reduced - &mixture).frobenius_norm())
}

/// Overlap matrix `tr[ρ_i ρ_j]`. For PSD operators an off-diagonal entry is
/// zero exactly when the supports are orthogonal.
pub fn conditional_gram(states: &[&DensityOperator]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = states.first() {
        for s in states {
            if s.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: s.dim(),
                });
            }
        }
    }
    Ok(states
        .iter()
        .map(|a| {
            states
                .iter()
                .map(|b| a.matrix().trace_product(b.matrix()).re)
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{triviality_residual, validate_povm};
    use crate::tensor::{frobenius_distance, C64};

    fn sharp_qubit_pointer() -> DiscretePOVM {
        DiscretePOVM::new(vec![
            Outcome::new("0", ComplexMatrix::diagonal(&[1.0, 0.0])),
            Outcome::new("1", ComplexMatrix::diagonal(&[0.0, 1.0])),
        ])
        .unwrap()
    }

    fn layout() -> SpaceLayout {
        SpaceLayout::new([("S", 2), ("A", 2)]).unwrap()
    }

    fn ready() -> DensityOperator {
        DensityOperator::new(ComplexMatrix::diagonal(&[1.0, 0.0])).unwrap()
    }

    fn cnot() -> ComplexMatrix {
        let mut rows = vec![vec![0.0; 4]; 4];
        rows[0][0] = 1.0;
        rows[1][1] = 1.0;
        rows[2][3] = 1.0;
        rows[3][2] = 1.0;
        ComplexMatrix::from_real_rows(&rows).unwrap()
    }

    fn plus() -> DensityOperator {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::pure_from_amplitudes(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap()
    }

    #[test]
    fn identity_coupling_gives_product_state() {
        let m = MeasurementScheme::new(layout(), ready(), ComplexMatrix::identity(4), sharp_qubit_pointer(), 1e-9).unwrap();
        let rho = plus();
        let post = post_state(&m, &rho).unwrap();
        let expected = tensor_product(rho.matrix(), ready().matrix());
        assert!(frobenius_distance(post.matrix(), &expected).unwrap() < 1e-15);
        // Trivial coupling, sharp pointer, pointer eigenstate: PVD holds.
        assert!(pvd_residual(&m, &Partition::finest(m.pointer())).unwrap() < 1e-12);
    }

    #[test]
    fn von_neumann_coupling() {
        let m = MeasurementScheme::new(layout(), ready(), cnot(), sharp_qubit_pointer(), 1e-9).unwrap();
        let part = Partition::finest(m.pointer());
        let e = induced_observable(&m).unwrap();
        assert!(validate_povm(&e).sharp);
        assert!(frobenius_distance(e.effect("0").unwrap(), &ComplexMatrix::diagonal(&[1.0, 0.0])).unwrap() < 1e-12);
        assert!(apparatus_mixture_residual(&m, &plus(), &part).unwrap() < 1e-12);
        // Entangled output is not a pointer mixture.
        assert!(pm_residual(&m, &part).unwrap() > 0.1);
        assert!(pvd_residual(&m, &part).unwrap() < 1e-12);

        let post = post_state(&m, &plus()).unwrap();
        let dec = pointer_components(&post, m.layout(), m.pointer(), &part).unwrap();
        assert!((dec.total_probability() - 1.0).abs() < 1e-12);
        let gram = conditional_gram(&dec.object_conditionals()).unwrap();
        assert!(gram[0][1].abs() < 1e-12);
        assert!((gram[0][0] - 0.25).abs() < 1e-12);
        for c in dec.cells() {
            assert!((c.object.trace() - c.probability).abs() < 1e-12);
            assert!((c.apparatus.trace() - c.probability).abs() < 1e-12);
        }
    }

    #[test]
    fn block_diagonal_state_is_its_own_mixture() {
        let rho = DensityOperator::new(ComplexMatrix::diagonal(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let dec = pointer_components(&rho, &layout(), &sharp_qubit_pointer(), &Partition::finest(&sharp_qubit_pointer())).unwrap();
        assert!(frobenius_distance(&dec.component_sum(), rho.matrix()).unwrap() < 1e-15);
        assert!((dec.cell("0").unwrap().probability - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_cell_partition_has_no_mixture_defect() {
        let m = MeasurementScheme::new(layout(), ready(), cnot(), sharp_qubit_pointer(), 1e-9).unwrap();
        let part = Partition::single(m.pointer(), "all");
        assert!(pm_residual(&m, &part).unwrap() < 1e-12);
        let e = induced_observable(&m).unwrap();
        let cg = part.coarse_grain(&e).unwrap();
        assert!(triviality_residual(&cg).residual < 1e-12);
    }

    #[test]
    fn unsharp_pointer_breaks_definiteness() {
        // Z_1 = 0.8 P + 0.2 (I − P). With the identity coupling and the
        // apparatus in the P eigenstate, the cell-1 component has trace 0.8
        // and repeats with probability 0.64: defect 0.16.
        let z = DiscretePOVM::new(vec![
            Outcome::new("1", ComplexMatrix::diagonal(&[0.8, 0.2])),
            Outcome::new("2", ComplexMatrix::diagonal(&[0.2, 0.8])),
        ])
        .unwrap();
        let m = MeasurementScheme::new(layout(), ready(), ComplexMatrix::identity(4), z, 1e-9).unwrap();
        let pvd = pvd_residual(&m, &Partition::finest(m.pointer())).unwrap();
        assert!((pvd - 0.16).abs() < 1e-12, "{pvd}");
    }

    #[test]
    fn sub_normalized_conditionals_and_gram_errors() {
        let a = DensityOperator::sub_normalized(ComplexMatrix::diagonal(&[0.5, 0.0])).unwrap();
        let b = DensityOperator::sub_normalized(ComplexMatrix::diagonal(&[0.0, 0.5])).unwrap();
        let g = conditional_gram(&[&a, &b]).unwrap();
        assert_eq!(g[0][1], 0.0);
        assert_eq!(g[0][0], 0.25);
        let c = DensityOperator::maximally_mixed(3);
        assert!(conditional_gram(&[&a, &c]).is_err());
    }

    #[test]
    fn errors() {
        let m = MeasurementScheme::new(layout(), ready(), cnot(), sharp_qubit_pointer(), 1e-9).unwrap();
        assert!(post_state(&m, &DensityOperator::maximally_mixed(3)).is_err());
        let sub = DensityOperator::sub_normalized(ComplexMatrix::diagonal(&[0.5, 0.0])).unwrap();
        assert!(post_state(&m, &sub).is_err());
        let rho = DensityOperator::maximally_mixed(4);
        let bad = Partition::single(&DiscretePOVM::new(vec![Outcome::new("x", ComplexMatrix::identity(2))]).unwrap(), "c");
        assert!(pointer_components(&rho, m.layout(), m.pointer(), &bad).is_err());
    }
}
