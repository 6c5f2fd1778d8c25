use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::random::{haar_unitary_from, random_density_from};
use super::rng::substream;
use crate::error::{Error, Result};
use crate::observables::{DensityOperator, DiscretePOVM, Outcome};
use crate::scheme::MeasurementScheme;
use crate::tensor::{tensor_product, ComplexMatrix, SpaceLayout, C64};

const CONTRACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointerKind {
    Sharp,
    /// Sharp pointer mixed toward the trivial one with weight `s`.
    Unsharp(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    HaarGeneric,
    ProductUnitary,
    PointerCommuting,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::HaarGeneric => "haar_generic",
            Family::ProductUnitary => "product_unitary",
            Family::PointerCommuting => "pointer_commuting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    #[serde(rename = "d_S")]
    pub d_s: usize,
    #[serde(rename = "d_A")]
    pub d_a: usize,
    pub n_outcomes: usize,
    pub pointer_kind: PointerKind,
    pub family: Family,
    #[serde(default)]
    pub seed: u64,
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_s < 2 || self.d_a < 2 {
            return Err(Error::InvalidParams(format!(
                "dimensions must be at least 2 (d_S = {}, d_A = {})",
                self.d_s, self.d_a
            )));
        }
        if self.n_outcomes == 0 || self.n_outcomes > self.d_a {
            return Err(Error::InvalidParams(format!(
                "n_outcomes {} outside 1..={}",
                self.n_outcomes, self.d_a
            )));
        }
        if let PointerKind::Unsharp(s) = self.pointer_kind {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidParams(format!("smearing {s} outside [0, 1]")));
            }
            if self.family == Family::PointerCommuting {
                return Err(Error::Unsupported(
                    "pointer_commuting requires a sharp pointer".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `Z_i ← (1 − s) Z_i + s tr(Z_i)/d · I`.
pub fn smear_pointer(z: &DiscretePOVM, s: f64) -> Result<DiscretePOVM> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParams(format!("smearing {s} outside [0, 1]")));
    }
    let d = z.dim();
    let id = ComplexMatrix::identity(d);
    DiscretePOVM::new(
        z.outcomes()
            .iter()
            .map(|o| {
                let flat = id.scale_real(s * o.effect.trace().re / d as f64);
                Outcome {
                    label: o.label.clone(),
                    value: o.value,
                    effect: &o.effect.scale_real(1.0 - s) + &flat,
                }
            })
            .collect(),
    )
}

/// Splits `0..d` into `n` contiguous groups whose sizes differ by at most one.
fn groups(d: usize, n: usize) -> Vec<std::ops::Range<usize>> {
    let (q, r) = (d / n, d % n);
    let mut start = 0;
    (0..n)
        .map(|i| {
            let len = q + usize::from(i < r);
            let g = start..start + len;
            start += len;
            g
        })
        .collect()
}

fn column_projector(w: &ComplexMatrix, cols: std::ops::Range<usize>) -> ComplexMatrix {
    let block = w.as_dmatrix().columns(cols.start, cols.len()).into_owned();
    ComplexMatrix::wrap(&block * block.adjoint())
}

/// Random diagonal probability vector, strictly positive.
fn random_weights(d: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random scheme from `spec`. Identical specs give bit-identical schemes.
///
/// The pointer is a Haar-rotated projective measurement grouped into
/// `n_outcomes` cells. Family contracts are checked before returning.
pub fn random_scheme(spec: &SamplerSpec) -> Result<MeasurementScheme> {
    spec.validate()?;
    let (d_s, d_a) = (spec.d_s, spec.d_a);
    let mut rng = substream(spec.seed, 0);
    let basis = haar_unitary_from(d_a, &mut rng);
    let cells = groups(d_a, spec.n_outcomes);
    let sharp = DiscretePOVM::new(
        cells
            .iter()
            .enumerate()
            .map(|(i, g)| Outcome::new(i.to_string(), column_projector(&basis, g.clone())))
            .collect(),
    )?;
    let pointer = match spec.pointer_kind {
        PointerKind::Sharp => sharp,
        PointerKind::Unsharp(s) => smear_pointer(&sharp, s)?,
    };

    let mut rng = substream(spec.seed, 1);
    let (rho_a, coupling) = match spec.family {
        Family::HaarGeneric => (
            random_density_from(d_a, d_a, &mut rng)?,
            haar_unitary_from(d_s * d_a, &mut rng),
        ),
        Family::ProductUnitary => {
            // ρ_A is drawn so that V_A ρ_A V_A† is diagonal in the pointer
            // basis; with a sharp pointer the scheme then objectifies.
            let weights = random_weights(d_a, &mut rng);
            let v_s = haar_unitary_from(d_s, &mut rng);
            let v_a = haar_unitary_from(d_a, &mut rng);
            let diag = ComplexMatrix::diagonal(&weights).conjugate_by(&basis);
            let rho = DensityOperator::new(diag.conjugate_by(&v_a.adjoint()).hermitian_part())?;
            (rho, tensor_product(&v_s, &v_a))
        }
        Family::PointerCommuting => {
            let weights = random_weights(d_a, &mut rng);
            let rho = DensityOperator::new(ComplexMatrix::diagonal(&weights).conjugate_by(&basis))?;
            let frame = tensor_product(&ComplexMatrix::identity(d_s), &basis);
            let mut blocks = DMatrix::<C64>::zeros(d_s * d_a, d_s * d_a);
            for g in &cells {
                let idx: Vec<usize> = (0..d_s).flat_map(|s| g.clone().map(move |k| s * d_a + k)).collect();
                let v = haar_unitary_from(idx.len(), &mut rng);
                for (r, &i) in idx.iter().enumerate() {
                    for (c, &j) in idx.iter().enumerate() {
                        blocks[(i, j)] = v.get(r, c);
                    }
                }
            }
            (rho, ComplexMatrix::wrap(blocks).conjugate_by(&frame))
        }
    };

    let layout = SpaceLayout::new([("S", d_s), ("A", d_a)])?;
    let scheme = MeasurementScheme::new(layout, rho_a, coupling, pointer, CONTRACT_TOL)?;
    if spec.family == Family::PointerCommuting {
        let id = ComplexMatrix::identity(d_s);
        for z in scheme.pointer().effects() {
            let c = scheme.coupling().commutator(&tensor_product(&id, z)).frobenius_norm();
            if c > CONTRACT_TOL {
                return Err(Error::Numeric(format!(
                    "pointer_commuting contract violated: commutator {c:e}"
                )));
            }
        }
    }
    Ok(scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::validate_povm;

    fn spec(family: Family, pointer_kind: PointerKind) -> SamplerSpec {
        SamplerSpec {
            d_s: 2,
            d_a: 4,
            n_outcomes: 3,
            pointer_kind,
            family,
            seed: 17,
        }
    }

    #[test]
    fn group_sizes() {
        let g = groups(5, 3);
        assert_eq!(g, vec![0..2, 2..4, 4..5]);
        assert_eq!(groups(4, 4).len(), 4);
    }

    #[test]
    fn spec_json_shape() {
        let s = spec(Family::HaarGeneric, PointerKind::Unsharp(0.25));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains(r#""d_S":2"#) && json.contains(r#""unsharp":0.25"#));
        let back: SamplerSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let sharp: SamplerSpec = serde_json::from_str(
            r#"{"d_S":2,"d_A":3,"n_outcomes":2,"pointer_kind":"sharp","family":"product_unitary"}"#,
        )
        .unwrap();
        assert_eq!(sharp.seed, 0);
    }

    #[test]
    fn validation() {
        let mut s = spec(Family::PointerCommuting, PointerKind::Unsharp(0.1));
        assert!(matches!(random_scheme(&s), Err(Error::Unsupported(_))));
        s.pointer_kind = PointerKind::Sharp;
        s.n_outcomes = 5;
        assert!(random_scheme(&s).is_err());
        s.n_outcomes = 2;
        s.d_s = 1;
        assert!(random_scheme(&s).is_err());
        let bad = spec(Family::HaarGeneric, PointerKind::Unsharp(1.5));
        assert!(random_scheme(&bad).is_err());
    }

    #[test]
    fn families_honour_contracts() {
        for family in [Family::HaarGeneric, Family::ProductUnitary, Family::PointerCommuting] {
            let s = spec(family, PointerKind::Sharp);
            let m = random_scheme(&s).unwrap();
            assert_eq!(m, random_scheme(&s).unwrap());
            assert!(validate_povm(m.pointer()).sharp);
            assert_eq!(m.pointer().len(), 3);
        }
        let m = random_scheme(&spec(Family::HaarGeneric, PointerKind::Unsharp(0.5))).unwrap();
        let report = validate_povm(m.pointer());
        assert!(report.valid && !report.sharp);
    }

    #[test]
    fn smearing_endpoints() {
        let z = DiscretePOVM::new(vec![
            Outcome::new("a", ComplexMatrix::diagonal(&[1.0, 0.0])),
            Outcome::new("b", ComplexMatrix::diagonal(&[0.0, 1.0])),
        ])
        .unwrap();
        assert_eq!(smear_pointer(&z, 0.0).unwrap(), z);
        let flat = smear_pointer(&z, 1.0).unwrap();
        assert_eq!(flat.effect("a").unwrap(), &ComplexMatrix::diagonal(&[0.5, 0.5]));
        assert!(smear_pointer(&z, -0.1).is_err());
    }
}
