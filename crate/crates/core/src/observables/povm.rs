use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use super::density::DensityOperator;
use crate::error::{Error, Result};
use crate::tensor::{frobenius_distance, ComplexMatrix, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub effect: ComplexMatrix,
}

impl Outcome {
    pub fn new(label: impl Into<String>, effect: ComplexMatrix) -> Self {
        Self {
            label: label.into(),
            value: None,
            effect,
        }
    }

    pub fn valued(label: impl Into<String>, value: f64, effect: ComplexMatrix) -> Self {
        Self {
            label: label.into(),
            value: Some(value),
            effect,
        }
    }
}

/// Finite family of labelled effects.
///
/// Construction only checks shape (equal dimensions, unique labels); whether
/// the effects are positive and sum to the identity is reported by
/// [`validate_povm`], so invalid families can still be inspected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretePOVM {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl DiscretePOVM {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        let first = outcomes
            .first()
            .ok_or_else(|| Error::InvalidPovm("no outcomes".into()))?;
        let dim = first.effect.dim();
        for (i, o) in outcomes.iter().enumerate() {
            if o.effect.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: o.effect.dim(),
                });
            }
            if outcomes[..i].iter().any(|p| p.label == o.label) {
                return Err(Error::DuplicateLabel(o.label.clone()));
            }
            if o.value.is_some_and(|v| !v.is_finite()) {
                return Err(Error::NonFinite("outcome value"));
            }
        }
        Ok(Self { dim, outcomes })
    }

    /// Like [`DiscretePOVM::new`] but rejects families that fail validation.
    pub fn new_validated(outcomes: Vec<Outcome>, tol: f64) -> Result<Self> {
        let p = Self::new(outcomes)?;
        let report = validate_povm_tol(&p, tol);
        if !report.valid {
            return Err(Error::InvalidPovm(format!(
                "positivity violation {:e}, completeness residual {:e}",
                report.positivity_violation, report.completeness_residual
            )));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|o| o.label.as_str())
    }

    pub fn effects(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.outcomes.iter().map(|o| &o.effect)
    }

    pub fn effect(&self, label: &str) -> Result<&ComplexMatrix> {
        self.outcomes
            .iter()
            .find(|o| o.label == label)
            .map(|o| &o.effect)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn effect_sum(&self) -> ComplexMatrix {
        self.effects()
            .fold(ComplexMatrix::zeros(self.dim), |acc, e| &acc + e)
    }

    /// Sums effects over groups of labels. Every label must appear in exactly
    /// one group; coarse-grained outcomes carry no values.
    pub fn coarse_grain(&self, cells: &[(String, Vec<String>)]) -> Result<DiscretePOVM> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, members) in cells {
            for m in members {
                self.effect(m)?;
                *seen.entry(m.as_str()).or_default() += 1;
            }
        }
        for label in self.labels() {
            match seen.get(label) {
                Some(1) => {}
                Some(_) => {
                    return Err(Error::InvalidPartition(format!(
                        "outcome `{label}` appears in more than one cell"
                    )))
                }
                None => {
                    return Err(Error::InvalidPartition(format!(
                        "outcome `{label}` is not covered"
                    )))
                }
            }
        }
        let outcomes = cells
            .iter()
            .map(|(cell, members)| {
                let mut e = ComplexMatrix::zeros(self.dim);
                for m in members {
                    e = &e + self.effect(m)?;
                }
                Ok(Outcome::new(cell.clone(), e))
            })
            .collect::<Result<Vec<_>>>()?;
        DiscretePOVM::new(outcomes)
    }

    /// Applies `E ↦ V E V†` to every effect.
    pub fn conjugate_by(&self, v: &ComplexMatrix) -> Result<DiscretePOVM> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(DiscretePOVM {
            dim: self.dim,
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome {
                    label: o.label.clone(),
                    value: o.value,
                    effect: o.effect.conjugate_by(v),
                })
                .collect(),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmRepr {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl<'de> Deserialize<'de> for DiscretePOVM {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PovmRepr::deserialize(deserializer)?;
        let p = DiscretePOVM::new(repr.outcomes).map_err(D::Error::custom)?;
        if p.dim != repr.dim {
            return Err(D::Error::custom(format!(
                "declared dim {} but effects have dim {}",
                repr.dim, p.dim
            )));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `max(0, −λ_min)` over all effects.
    pub positivity_violation: f64,
    pub hermiticity_residual: f64,
    /// `‖Σ E_i − I‖_F`.
    pub completeness_residual: f64,
    pub valid: bool,
    /// All effects are projections and pairwise orthogonal.
    pub sharp: bool,
}

pub fn validate_povm(p: &DiscretePOVM) -> ValidationReport {
    validate_povm_tol(p, DEFAULT_TOL)
}

pub fn validate_povm_tol(p: &DiscretePOVM, tol: f64) -> ValidationReport {
    let hermiticity_residual = p
        .effects()
        .map(|e| e.hermiticity_residual())
        .fold(0.0, f64::max);
    let positivity_violation = p
        .effects()
        .map(|e| (-e.min_eigenvalue()).max(0.0))
        .fold(0.0, f64::max);
    let completeness_residual = frobenius_distance(&p.effect_sum(), &ComplexMatrix::identity(p.dim))
        .expect("effects share the POVM dimension");
    let valid = hermiticity_residual <= tol && positivity_violation <= tol && completeness_residual <= tol;

    let effects: Vec<&ComplexMatrix> = p.effects().collect();
    let projections = effects.iter().all(|e| e.is_projection(tol));
    let orthogonal = effects.iter().enumerate().all(|(i, a)| {
        effects[i + 1..]
            .iter()
            .all(|b| (*a * *b).frobenius_norm() <= tol)
    });
    ValidationReport {
        positivity_violation,
        hermiticity_residual,
        completeness_residual,
        valid,
        sharp: valid && projections && orthogonal,
    }
}

fn check_state(p: &DiscretePOVM, rho: &DensityOperator) -> Result<()> {
    if rho.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: rho.dim(),
        });
    }
    if !rho.is_normalized() {
        return Err(Error::InvalidState("outcome probabilities need a normalized state".into()));
    }
    Ok(())
}

/// `tr[E_label ρ]`, clamped to `[0, 1]`.
pub fn outcome_probability(p: &DiscretePOVM, rho: &DensityOperator, label: &str) -> Result<f64> {
    check_state(p, rho)?;
    let e = p.effect(label)?;
    Ok(e.trace_product(rho.matrix()).re.clamp(0.0, 1.0))
}

/// Probabilities of all outcomes, in outcome order.
pub fn outcome_distribution(p: &DiscretePOVM, rho: &DensityOperator) -> Result<Vec<f64>> {
    check_state(p, rho)?;
    Ok(p
        .effects()
        .map(|e| e.trace_product(rho.matrix()).re.clamp(0.0, 1.0))
        .collect())
}

/// `E^(n) = Σ_i x_iⁿ E_i`.
pub fn moment_operator(p: &DiscretePOVM, n: u32) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::zeros(p.dim());
    for o in p.outcomes() {
        let x = o.value.ok_or_else(|| Error::MissingValue(o.label.clone()))?;
        acc = &acc + &o.effect.scale_real(x.powi(n as i32));
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialityReport {
    /// `max_i ‖E_i − λ_i I‖_F`.
    pub residual: f64,
    /// `λ_i = tr(E_i)/dim`, keyed by outcome label.
    pub lambda: BTreeMap<String, f64>,
}

pub fn triviality_residual(p: &DiscretePOVM) -> TrivialityReport {
    let d = p.dim() as f64;
    let mut lambda = BTreeMap::new();
    let mut residual: f64 = 0.0;
    for o in p.outcomes() {
        let l = o.effect.trace().re / d;
        let trivial = ComplexMatrix::identity(p.dim()).scale_real(l);
        residual = residual.max((&o.effect - &trivial).frobenius_norm());
        lambda.insert(o.label.clone(), l);
    }
    TrivialityReport { residual, lambda }
}

/// Checks `0 ≤ E ≤ I` within `tol`.
pub fn is_effect(e: &ComplexMatrix, tol: f64) -> bool {
    e.is_psd(tol) && (&ComplexMatrix::identity(e.dim()) - e).is_psd(tol)
}

/// `tr[ρ E]`: the weight an effect carries in a state.
pub fn degree_of_reality(effect: &ComplexMatrix, rho: &DensityOperator) -> Result<f64> {
    if effect.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: effect.dim(),
            found: rho.dim(),
        });
    }
    if !is_effect(effect, DEFAULT_TOL) {
        return Err(Error::NotAnEffect("spectrum outside [0, 1]".into()));
    }
    if !rho.is_normalized() {
        return Err(Error::InvalidState("degree of reality needs a normalized state".into()));
    }
    Ok(effect.trace_product(rho.matrix()).re.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[1.0, 0.0])
    }

    fn q() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[0.0, 1.0])
    }

    fn smeared() -> DiscretePOVM {
        DiscretePOVM::new(vec![
            Outcome::valued("+", 1.0, ComplexMatrix::diagonal(&[0.9, 0.1])),
            Outcome::valued("-", -1.0, ComplexMatrix::diagonal(&[0.1, 0.9])),
        ])
        .unwrap()
    }

    #[test]
    fn validate_sharp_unsharp_incomplete() {
        let sharp = DiscretePOVM::new(vec![Outcome::new("a", p()), Outcome::new("b", q())]).unwrap();
        let r = validate_povm(&sharp);
        assert!(r.valid && r.sharp);

        let r = validate_povm(&smeared());
        assert!(r.valid && !r.sharp);
        let e = smeared().outcomes()[0].effect.clone();
        assert!(e.idempotency_residual() > 1e-3);

        let doubled = DiscretePOVM::new(vec![Outcome::new("a", p()), Outcome::new("b", p())]).unwrap();
        let r = validate_povm(&doubled);
        assert!(!r.valid);
        assert!((r.completeness_residual - 2f64.sqrt()).abs() < 1e-15);
        assert!(DiscretePOVM::new_validated(vec![Outcome::new("a", p()), Outcome::new("b", p())], 1e-9).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(DiscretePOVM::new(vec![]).is_err());
        assert!(matches!(
            DiscretePOVM::new(vec![Outcome::new("a", p()), Outcome::new("a", q())]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(DiscretePOVM::new(vec![Outcome::new("a", p()), Outcome::new("b", ComplexMatrix::identity(3))]).is_err());
    }

    #[test]
    fn probabilities() {
        let sharp = DiscretePOVM::new(vec![Outcome::new("1", p()), Outcome::new("2", q())]).unwrap();
        let rho = DensityOperator::new(p()).unwrap();
        assert_eq!(outcome_probability(&sharp, &rho, "1").unwrap(), 1.0);
        let half = DensityOperator::maximally_mixed(2);
        assert!((outcome_probability(&smeared(), &half, "+").unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(outcome_probability(&sharp, &rho, "9"), Err(Error::UnknownLabel(_))));
        assert!(outcome_probability(&sharp, &DensityOperator::maximally_mixed(3), "1").is_err());
        let dist = outcome_distribution(&smeared(), &half).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments() {
        let m0 = moment_operator(&smeared(), 0).unwrap();
        assert!(frobenius_distance(&m0, &ComplexMatrix::identity(2)).unwrap() < 1e-15);
        let m1 = moment_operator(&smeared(), 1).unwrap();
        let m2 = moment_operator(&smeared(), 2).unwrap();
        assert!(frobenius_distance(&m1, &ComplexMatrix::diagonal(&[0.8, -0.8])).unwrap() < 1e-15);
        assert!(frobenius_distance(&m2, &ComplexMatrix::identity(2)).unwrap() < 1e-15);
        // Hand computation: I − diag(0.64, 0.64) has Frobenius norm 0.36·√2.
        let gap = frobenius_distance(&m2, &(&m1 * &m1)).unwrap();
        assert!((gap - 0.36 * 2f64.sqrt()).abs() < 1e-12);

        let sharp = DiscretePOVM::new(vec![
            Outcome::valued("+", 1.0, p()),
            Outcome::valued("-", -1.0, q()),
        ])
        .unwrap();
        let s1 = moment_operator(&sharp, 1).unwrap();
        let s2 = moment_operator(&sharp, 2).unwrap();
        assert!(frobenius_distance(&s2, &(&s1 * &s1)).unwrap() < 1e-15);

        let unvalued = DiscretePOVM::new(vec![Outcome::new("a", p()), Outcome::new("b", q())]).unwrap();
        assert!(matches!(moment_operator(&unvalued, 1), Err(Error::MissingValue(_))));
    }

    #[test]
    fn triviality() {
        let trivial = DiscretePOVM::new(vec![
            Outcome::new("a", ComplexMatrix::identity(2).scale_real(0.3)),
            Outcome::new("b", ComplexMatrix::identity(2).scale_real(0.7)),
        ])
        .unwrap();
        let r = triviality_residual(&trivial);
        assert!(r.residual < 1e-15);
        assert!((r.lambda["a"] - 0.3).abs() < 1e-15 && (r.lambda["b"] - 0.7).abs() < 1e-15);

        let sharp = DiscretePOVM::new(vec![Outcome::new("a", p()), Outcome::new("b", q())]).unwrap();
        assert!((triviality_residual(&sharp).residual - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((triviality_residual(&smeared()).residual - 0.4 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degree_of_reality_cases() {
        let rho = DensityOperator::new(ComplexMatrix::diagonal(&[0.9, 0.1])).unwrap();
        assert!((degree_of_reality(&ComplexMatrix::identity(2), &rho).unwrap() - 1.0).abs() < 1e-15);
        assert!((degree_of_reality(&p(), &rho).unwrap() - 0.9).abs() < 1e-15);
        let e1 = ComplexMatrix::diagonal(&[0.9, 0.1]);
        assert!((degree_of_reality(&e1, &rho).unwrap() - 0.82).abs() < 1e-15);
        assert!(matches!(
            degree_of_reality(&ComplexMatrix::diagonal(&[1.5, 0.0]), &rho),
            Err(Error::NotAnEffect(_))
        ));
    }

    #[test]
    fn coarse_graining() {
        let four = DiscretePOVM::new(
            (0..4)
                .map(|k| {
                    let mut d = [0.0; 4];
                    d[k] = 1.0;
                    Outcome::new(k.to_string(), ComplexMatrix::diagonal(&d))
                })
                .collect(),
        )
        .unwrap();
        let cells = vec![
            ("low".to_string(), vec!["0".to_string(), "1".to_string()]),
            ("high".to_string(), vec!["2".to_string(), "3".to_string()]),
        ];
        let cg = four.coarse_grain(&cells).unwrap();
        assert_eq!(cg.len(), 2);
        assert_eq!(cg.effect("low").unwrap(), &ComplexMatrix::diagonal(&[1.0, 1.0, 0.0, 0.0]));
        let missing = vec![("x".to_string(), vec!["0".to_string()])];
        assert!(matches!(four.coarse_grain(&missing), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn json_round_trip_keeps_values_optional() {
        let p = DiscretePOVM::new(vec![
            Outcome::valued("+", 1.0, ComplexMatrix::diagonal(&[1.0, 0.0])),
            Outcome::new("-", ComplexMatrix::diagonal(&[0.0, 1.0])),
        ])
        .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with(r#"{"dim":2,"outcomes":[{"label":"+","value":1.0,"effect""#));
        assert!(!s.contains(r#""label":"-","value""#));
        assert_eq!(serde_json::from_str::<DiscretePOVM>(&s).unwrap(), p);
        let bad = s.replace(r#""dim":2"#, r#""dim":3"#);
        assert!(serde_json::from_str::<DiscretePOVM>(&bad).is_err());
    }
}
