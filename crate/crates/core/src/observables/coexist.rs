//! Joint measurability of two observables.
//!
//! A joint POVM `{G_ij}` for `A` and `B` satisfies `Σ_j G_ij = A_i`,
//! `Σ_i G_ij = B_j` and `G_ij ⪰ 0`. The search alternates exact projections
//! onto the affine marginal set and onto the PSD cone. When the two sets do
//! not meet, the residual of the last iterate yields a dual witness
//! `W_ij = X_i + Y_j ⪰ 0` with `Σ tr(A_i X_i) + Σ tr(B_j Y_j) < 0`; any such
//! witness proves infeasibility and bounds the positivity gap of every
//! candidate from below.

use serde::{Deserialize, Serialize};

use super::povm::{validate_povm_tol, DiscretePOVM, Outcome};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sampling::rng::{gaussian_hermitian, substream};
use crate::tensor::ComplexMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoexistenceOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// `infeasible` requires a certified positivity gap above this value.
    pub gap_threshold: f64,
    /// Marginal and positivity tolerance for an accepted joint POVM.
    pub tol: f64,
    /// Eigenvalue floor used by the cone projection; steers iterates into the
    /// interior when the feasible set has slack.
    pub margin: f64,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for CoexistenceOptions {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 4000,
            gap_threshold: 1e-3,
            tol: 1e-9,
            margin: 1e-7,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

/// Joint observable indexed by pairs of marginal outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPovm {
    pub a_labels: Vec<String>,
    pub b_labels: Vec<String>,
    /// `effects[i][j] = G_ij`.
    pub effects: Vec<Vec<ComplexMatrix>>,
}

impl JointPovm {
    pub fn marginal_a(&self) -> Vec<ComplexMatrix> {
        self.effects
            .iter()
            .map(|row| sum(row.iter(), row[0].dim()))
            .collect()
    }

    pub fn marginal_b(&self) -> Vec<ComplexMatrix> {
        let d = self.effects[0][0].dim();
        (0..self.b_labels.len())
            .map(|j| sum(self.effects.iter().map(|row| &row[j]), d))
            .collect()
    }

    /// Flattened POVM with outcome labels `"a|b"`.
    pub fn to_povm(&self) -> Result<DiscretePOVM> {
        let mut outcomes = Vec::new();
        for (i, a) in self.a_labels.iter().enumerate() {
            for (j, b) in self.b_labels.iter().enumerate() {
                outcomes.push(Outcome::new(format!("{a}|{b}"), self.effects[i][j].clone()));
            }
        }
        DiscretePOVM::new(outcomes)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.effects
            .iter()
            .flatten()
            .map(|g| g.min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest Frobenius deviation of the two marginals from the targets.
    pub fn marginal_residual(&self, a: &DiscretePOVM, b: &DiscretePOVM) -> f64 {
        let (ma, mb) = (self.marginal_a(), self.marginal_b());
        let ra = ma.iter().zip(a.effects()).map(|(m, e)| (m - e).frobenius_norm());
        let rb = mb.iter().zip(b.effects()).map(|(m, e)| (m - e).frobenius_norm());
        ra.chain(rb).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CoexistenceVerdict {
    Coexistent {
        construction: Construction,
        marginal_residual: f64,
        min_eigenvalue: f64,
        joint: JointPovm,
    },
    Infeasible {
        /// Certified lower bound on the positivity gap of any candidate.
        certified_gap: f64,
        best_gap: f64,
    },
    Inconclusive {
        certified_gap: f64,
        best_gap: f64,
    },
}

impl CoexistenceVerdict {
    pub fn is_coexistent(&self) -> bool {
        matches!(self, CoexistenceVerdict::Coexistent { .. })
    }

    pub fn joint(&self) -> Option<&JointPovm> {
        match self {
            CoexistenceVerdict::Coexistent { joint, .. } => Some(joint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    CommutingProduct,
    Search,
}

fn sum<'a>(ms: impl Iterator<Item = &'a ComplexMatrix>, d: usize) -> ComplexMatrix {
    ms.fold(ComplexMatrix::zeros(d), |acc, m| &acc + m)
}

type Blocks = Vec<Vec<ComplexMatrix>>;

struct Problem<'a> {
    a: Vec<&'a ComplexMatrix>,
    b: Vec<&'a ComplexMatrix>,
    d: usize,
}

impl Problem<'_> {
    fn na(&self) -> usize {
        self.a.len()
    }

    fn nb(&self) -> usize {
        self.b.len()
    }

    /// Orthogonal projection onto `{G : Σ_j G_ij = A_i, Σ_i G_ij = B_j}`.
    fn project_affine(&self, x: &Blocks) -> Blocks {
        let (na, nb) = (self.na() as f64, self.nb() as f64);
        let r: Vec<ComplexMatrix> = (0..self.na())
            .map(|i| self.a[i] - &sum(x[i].iter(), self.d))
            .collect();
        let c: Vec<ComplexMatrix> = (0..self.nb())
            .map(|j| self.b[j] - &sum(x.iter().map(|row| &row[j]), self.d))
            .collect();
        let s = sum(r.iter(), self.d);
        (0..self.na())
            .map(|i| {
                (0..self.nb())
                    .map(|j| {
                        let corr = &(&r[i].scale_real(1.0 / nb) + &c[j].scale_real(1.0 / na))
                            - &s.scale_real(1.0 / (na * nb));
                        (&x[i][j] + &corr).hermitian_part()
                    })
                    .collect()
            })
            .collect()
    }

    /// Farkas witness from the negative parts `N_ij` of an affine iterate.
    /// Returns a certified lower bound on the positivity gap, or 0.
    fn certificate(&self, neg: &Blocks) -> f64 {
        let (na, nb) = (self.na() as f64, self.nb() as f64);
        let r: Vec<ComplexMatrix> = neg.iter().map(|row| sum(row.iter(), self.d)).collect();
        let c: Vec<ComplexMatrix> = (0..self.nb())
            .map(|j| sum(neg.iter().map(|row| &row[j]), self.d))
            .collect();
        let s = sum(r.iter(), self.d);
        let x: Vec<ComplexMatrix> = r
            .iter()
            .map(|ri| &ri.scale_real(1.0 / nb) - &s.scale_real(1.0 / (na * nb)))
            .collect();
        let mut y: Vec<ComplexMatrix> = c.iter().map(|cj| cj.scale_real(1.0 / na)).collect();

        let mut min_eig = f64::INFINITY;
        for xi in &x {
            for yj in &y {
                min_eig = min_eig.min((xi + yj).min_eigenvalue());
            }
        }
        if min_eig < 0.0 {
            let shift = ComplexMatrix::identity(self.d).scale_real(-min_eig);
            y = y.iter().map(|yj| yj + &shift).collect();
        }

        let value: f64 = self
            .a
            .iter()
            .zip(&x)
            .map(|(a, xi)| a.trace_product(xi).re)
            .sum::<f64>()
            + self
                .b
                .iter()
                .zip(&y)
                .map(|(b, yj)| b.trace_product(yj).re)
                .sum::<f64>();
        let norm = x
            .iter()
            .flat_map(|xi| y.iter().map(move |yj| (xi + yj).frobenius_norm().powi(2)))
            .sum::<f64>()
            .sqrt();
        if value < 0.0 && norm > 0.0 {
            -value / norm
        } else {
            0.0
        }
    }
}

struct RestartOutcome {
    joint: Option<Blocks>,
    best_gap: f64,
    certified_gap: f64,
}

fn run_restart(p: &Problem<'_>, opts: &CoexistenceOptions, restart: usize) -> RestartOutcome {
    let mut rng = substream(opts.seed, restart as u64);
    let noise = if restart == 0 { 0.0 } else { 0.5 };
    let mut x: Blocks = (0..p.na())
        .map(|i| {
            (0..p.nb())
                .map(|j| {
                    let prod = (p.a[i] * p.b[j]).hermitian_part();
                    let h = gaussian_hermitian(p.d, &mut rng);
                    &prod + &h.scale_real(noise / (p.na() * p.nb()) as f64)
                })
                .collect()
        })
        .collect();

    let mut best_gap = f64::INFINITY;
    let mut certified_gap: f64 = 0.0;
    let mut stalled = 0usize;
    for it in 0..opts.max_iters {
        let g = p.project_affine(&x);
        let mut min_eig = f64::INFINITY;
        let mut neg_sq = 0.0;
        let mut next: Blocks = Vec::with_capacity(p.na());
        let mut neg: Blocks = Vec::with_capacity(p.na());
        for row in &g {
            let mut next_row = Vec::with_capacity(p.nb());
            let mut neg_row = Vec::with_capacity(p.nb());
            for block in row {
                let eig = block.eigh();
                min_eig = min_eig.min(eig.values[0]);
                neg_sq += eig.values.iter().map(|&l| l.min(0.0).powi(2)).sum::<f64>();
                next_row.push(block.hermitian_map(|l| l.max(opts.margin)));
                neg_row.push(block.hermitian_map(|l| (-l).max(0.0)));
            }
            next.push(next_row);
            neg.push(neg_row);
        }
        if min_eig >= -opts.tol {
            return RestartOutcome {
                joint: Some(g),
                best_gap: 0.0,
                certified_gap: 0.0,
            };
        }
        let gap = neg_sq.sqrt();
        if gap < best_gap * (1.0 - 1e-10) {
            stalled = 0;
        } else {
            stalled += 1;
        }
        best_gap = best_gap.min(gap);
        if it % 16 == 0 || stalled > 200 || it + 1 == opts.max_iters {
            certified_gap = certified_gap.max(p.certificate(&neg));
            if certified_gap > opts.gap_threshold || stalled > 200 {
                break;
            }
        }
        x = next;
    }
    RestartOutcome {
        joint: None,
        best_gap,
        certified_gap,
    }
}

/// Commuting pairs admit the product joint `G_ij = A_i B_j`.
fn commuting_product(a: &DiscretePOVM, b: &DiscretePOVM, tol: f64) -> Option<Blocks> {
    let commute = a
        .effects()
        .all(|ea| b.effects().all(|eb| ea.commutator(eb).frobenius_norm() <= tol));
    commute.then(|| {
        a.effects()
            .map(|ea| b.effects().map(|eb| (ea * eb).hermitian_part()).collect())
            .collect()
    })
}

/// Searches for a joint POVM of `a` and `b`.
///
/// Returns `Coexistent` only with a joint that has been verified against
/// both marginals and positivity at `opts.tol`. `Infeasible` is returned only
/// when a dual witness certifies a positivity gap above `opts.gap_threshold`.
pub fn coexistence_check(
    a: &DiscretePOVM,
    b: &DiscretePOVM,
    opts: &CoexistenceOptions,
) -> Result<CoexistenceVerdict> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    for p in [a, b] {
        let r = validate_povm_tol(p, opts.tol.max(1e-9));
        if !r.valid {
            return Err(Error::InvalidPovm(format!(
                "coexistence needs valid POVMs (completeness residual {:e}, positivity violation {:e})",
                r.completeness_residual, r.positivity_violation
            )));
        }
    }

    let finish = |blocks: Blocks, construction| -> Option<CoexistenceVerdict> {
        let joint = JointPovm {
            a_labels: a.labels().map(String::from).collect(),
            b_labels: b.labels().map(String::from).collect(),
            effects: blocks,
        };
        let marginal_residual = joint.marginal_residual(a, b);
        let min_eigenvalue = joint.min_eigenvalue();
        (marginal_residual <= opts.tol && min_eigenvalue >= -opts.tol).then_some(
            CoexistenceVerdict::Coexistent {
                construction,
                marginal_residual,
                min_eigenvalue,
                joint,
            },
        )
    };

    if let Some(blocks) = commuting_product(a, b, opts.tol) {
        if let Some(v) = finish(blocks, Construction::CommutingProduct) {
            return Ok(v);
        }
    }

    let problem = Problem {
        a: a.effects().collect(),
        b: b.effects().collect(),
        d: a.dim(),
    };
    let runs = opts
        .execution
        .map_indexed(opts.restarts.max(1), |r| run_restart(&problem, opts, r));

    for run in &runs {
        if let Some(blocks) = &run.joint {
            if let Some(v) = finish(blocks.clone(), Construction::Search) {
                return Ok(v);
            }
        }
    }
    let best_gap = runs.iter().map(|r| r.best_gap).fold(f64::INFINITY, f64::min);
    let certified_gap = runs.iter().map(|r| r.certified_gap).fold(0.0, f64::max);
    if certified_gap > opts.gap_threshold {
        Ok(CoexistenceVerdict::Infeasible {
            certified_gap,
            best_gap,
        })
    } else {
        Ok(CoexistenceVerdict::Inconclusive {
            certified_gap,
            best_gap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::validate_povm;
    use crate::tensor::{ComplexMatrix, C64};

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[1.0, -1.0])
    }

    fn smeared(sigma: &ComplexMatrix, strength: f64, tag: &str) -> DiscretePOVM {
        let i = ComplexMatrix::identity(2);
        DiscretePOVM::new(vec![
            Outcome::new(format!("{tag}+"), (&i + &sigma.scale_real(strength)).scale_real(0.5)),
            Outcome::new(format!("{tag}-"), (&i - &sigma.scale_real(strength)).scale_real(0.5)),
        ])
        .unwrap()
    }

    fn quick() -> CoexistenceOptions {
        CoexistenceOptions {
            restarts: 8,
            ..Default::default()
        }
    }

    #[test]
    fn commuting_pair_uses_products() {
        let p = ComplexMatrix::diagonal(&[1.0, 1.0, 0.0, 0.0]);
        let q = ComplexMatrix::diagonal(&[1.0, 0.0, 1.0, 0.0]);
        let i = ComplexMatrix::identity(4);
        let a = DiscretePOVM::new(vec![Outcome::new("p", p.clone()), Outcome::new("!p", &i - &p)]).unwrap();
        let b = DiscretePOVM::new(vec![Outcome::new("q", q.clone()), Outcome::new("!q", &i - &q)]).unwrap();
        let v = coexistence_check(&a, &b, &quick()).unwrap();
        match &v {
            CoexistenceVerdict::Coexistent { construction, joint, .. } => {
                assert_eq!(*construction, Construction::CommutingProduct);
                assert!(validate_povm(&joint.to_povm().unwrap()).valid);
            }
            other => panic!("expected coexistent, got {other:?}"),
        }
    }

    #[test]
    fn candidate_joint_for_smeared_pair_is_valid() {
        // Independent check of the closed-form candidate ¼(I ± ½σ_z ± ½σ_x).
        let i = ComplexMatrix::identity(2);
        let (z, x) = (pauli_z().scale_real(0.5), pauli_x().scale_real(0.5));
        let mut joint = Vec::new();
        for sz in [1.0, -1.0] {
            let mut row = Vec::new();
            for sx in [1.0, -1.0] {
                row.push((&(&i + &z.scale_real(sz)) + &x.scale_real(sx)).scale_real(0.25));
            }
            joint.push(row);
        }
        let j = JointPovm {
            a_labels: vec!["z+".into(), "z-".into()],
            b_labels: vec!["x+".into(), "x-".into()],
            effects: joint,
        };
        let expected_min = 0.25 * (1.0 - std::f64::consts::FRAC_1_SQRT_2);
        assert!((j.min_eigenvalue() - expected_min).abs() < 1e-12);
        let a = smeared(&pauli_z(), 0.5, "z");
        let b = smeared(&pauli_x(), 0.5, "x");
        assert!(j.marginal_residual(&a, &b) < 1e-15);
    }

    #[test]
    fn smeared_noncommuting_pair_is_coexistent() {
        let a = smeared(&pauli_z(), 0.5, "z");
        let b = smeared(&pauli_x(), 0.5, "x");
        let v = coexistence_check(&a, &b, &quick()).unwrap();
        let joint = v.joint().expect("coexistent");
        assert!(joint.marginal_residual(&a, &b) <= 1e-9);
        assert!(joint.min_eigenvalue() >= -1e-9);
    }

    #[test]
    fn sharp_noncommuting_pair_is_certified_infeasible() {
        let a = smeared(&pauli_z(), 1.0, "z");
        let b = smeared(&pauli_x(), 1.0, "x");
        let v = coexistence_check(&a, &b, &quick()).unwrap();
        assert!(matches!(v, CoexistenceVerdict::Infeasible { .. }), "{v:?}");
    }

    #[test]
    fn deterministic_and_execution_independent() {
        let a = smeared(&pauli_z(), 0.8, "z");
        let y = ComplexMatrix::from_rows(&[
            vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        ])
        .unwrap();
        let b = smeared(&y, 0.5, "y");
        let seq = coexistence_check(&a, &b, &CoexistenceOptions { execution: Execution::Sequential, ..quick() }).unwrap();
        let par = coexistence_check(&a, &b, &CoexistenceOptions { execution: Execution::Parallel, ..quick() }).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn dimension_mismatch() {
        let a = smeared(&pauli_z(), 0.5, "z");
        let b = DiscretePOVM::new(vec![Outcome::new("i", ComplexMatrix::identity(3))]).unwrap();
        assert!(matches!(coexistence_check(&a, &b, &quick()), Err(Error::DimensionMismatch { .. })));
    }
}
