//! POVM construction, validation and the JSON exchange format.
//!
//! Two-qubit POVMs are expressed in the logical basis `|00>, |01>, |10>, |11>`
//! (qubit 1 slow). For the gate model the logical qubit 1 is the polarisation
//! pair `{H, V}` and logical qubit 2 is `{D, A}`; the gate itself and its
//! success probabilities live in the physical `{H, V} x {H, V}` basis.

use std::io;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, ComplexMatrix};
use crate::state::DensityMatrix;

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const EIGENVALUE_TOL: f64 = 1e-10;
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// Outcome labels of the two-qubit polarisation analysis, in file order.
pub const ANALYSIS_LABELS: [&str; 4] = ["DD", "DA", "AD", "AA"];

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub label: String,
    pub element: ComplexMatrix,
}

/// An ordered, labeled set of measurement operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl Povm {
    /// Checks shapes and label uniqueness only; see [`validate_povm`] for the
    /// positivity and completeness checks.
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        let first = outcomes
            .first()
            .ok_or_else(|| invalid("POVM needs at least one outcome"))?;
        let dim = first.element.nrows();
        for o in &outcomes {
            if o.element.nrows() != dim || o.element.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: o.element.nrows().max(o.element.ncols()),
                });
            }
            if !linalg::is_finite(&o.element) {
                return Err(invalid(format!("element '{}' has non-finite entries", o.label)));
            }
        }
        for (i, o) in outcomes.iter().enumerate() {
            if outcomes[..i].iter().any(|p| p.label == o.label) {
                return Err(invalid(format!("duplicate outcome label '{}'", o.label)));
            }
        }
        Ok(Self { dim, outcomes })
    }

    pub fn from_elements<S: Into<String>>(items: impl IntoIterator<Item = (S, ComplexMatrix)>) -> Result<Self> {
        Self::new(
            items
                .into_iter()
                .map(|(label, element)| Outcome {
                    label: label.into(),
                    element,
                })
                .collect(),
        )
    }

    /// Like [`Povm::new`] but also requires [`validate_povm`] to pass.
    pub fn checked(outcomes: Vec<Outcome>) -> Result<Self> {
        let povm = Self::new(outcomes)?;
        let report = validate_povm(&povm);
        if !report.passed {
            return Err(invalid(format!("POVM fails validation: {report}")));
        }
        Ok(povm)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn labels(&self) -> Vec<&str> {
        self.outcomes.iter().map(|o| o.label.as_str()).collect()
    }

    pub fn element(&self, label: &str) -> Option<&ComplexMatrix> {
        self.outcomes.iter().find(|o| o.label == label).map(|o| &o.element)
    }

    pub fn map_elements(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Povm {
        Povm {
            dim: self.dim,
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome {
                    label: o.label.clone(),
                    element: f(&o.element),
                })
                .collect(),
        }
    }

    pub fn sum(&self) -> ComplexMatrix {
        self.outcomes
            .iter()
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, o| acc + &o.element)
    }

    /// Born-rule probabilities `Re Tr[rho Pi_k]`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        Ok(self
            .outcomes
            .iter()
            .map(|o| linalg::trace_product(rho.matrix(), &o.element).re)
            .collect())
    }
}

/// Projectors onto the Bell states, labeled by the polarisation analysis
/// outcome that identifies them after the controlled-sign gate:
/// `DD <-> Phi+`, `DA <-> Psi+`, `AD <-> Phi-`, `AA <-> Psi-`.
pub fn bell_povm() -> Povm {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let kets = [[s, 0.0, 0.0, s], [0.0, s, s, 0.0], [s, 0.0, 0.0, -s], [0.0, s, -s, 0.0]];
    Povm::from_elements(ANALYSIS_LABELS.iter().zip(kets.iter()).map(|(label, k)| {
        let v = DVector::from_iterator(4, k.iter().map(|&x| c(x, 0.0)));
        (*label, linalg::outer(&v))
    }))
    .expect("static Bell POVM")
}

/// Bloch angles `(theta, azimuth)` of the "+" outcome of a qubit basis.
pub fn qubit_basis(theta: f64, azimuth: f64) -> [DVector<Complex64>; 2] {
    let (h_sin, h_cos) = (0.5 * theta).sin_cos();
    let plus = DVector::from_vec(vec![c(h_cos, 0.0), Complex64::from_polar(h_sin, azimuth)]);
    let minus = DVector::from_vec(vec![Complex64::from_polar(-h_sin, -azimuth), c(h_cos, 0.0)]);
    [plus, minus]
}

/// Rank-1 projective measurement of a single qubit; outcomes `+`, `-`.
pub fn single_qubit_projective_povm(theta: f64, azimuth: f64) -> Povm {
    let [p, m] = qubit_basis(theta, azimuth);
    Povm::from_elements([("+", linalg::outer(&p)), ("-", linalg::outer(&m))]).expect("qubit basis")
}

/// Analysis angles of two independent single-qubit projective measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBasis {
    pub theta1: f64,
    pub azimuth1: f64,
    pub theta2: f64,
    pub azimuth2: f64,
}

/// Product of two qubit projective measurements; outcomes `++, +-, -+, --`.
pub fn product_projective_povm(basis: ProductBasis) -> Povm {
    let a = qubit_basis(basis.theta1, basis.azimuth1);
    let b = qubit_basis(basis.theta2, basis.azimuth2);
    let signs = ["+", "-"];
    let mut items = Vec::with_capacity(4);
    for (i, va) in a.iter().enumerate() {
        for (j, vb) in b.iter().enumerate() {
            let ket = va.kronecker(vb);
            items.push((format!("{}{}", signs[i], signs[j]), linalg::outer(&ket)));
        }
    }
    Povm::from_elements(items).expect("product basis")
}

/// Post-selected controlled-sign gate built from partially polarising beam
/// splitters with amplitude transmittivities `t_h`, `t_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateModel {
    pub t_h: f64,
    pub t_v: f64,
    /// Two-photon interference visibility in `[0, 1]`.
    pub visibility: f64,
    /// Adds the swapped-role beam splitter on each arm that balances the
    /// polarisation-dependent amplitudes.
    pub compensated: bool,
}

impl GateModel {
    /// `t_H = 1`, `t_V = 1/sqrt(3)`, compensated, unit visibility.
    pub fn ideal() -> Self {
        Self {
            t_h: 1.0,
            t_v: 1.0 / 3f64.sqrt(),
            visibility: 1.0,
            compensated: true,
        }
    }

    pub fn with_visibility(self, visibility: f64) -> Self {
        Self { visibility, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t_h", self.t_h), ("t_v", self.t_v)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {t}")));
            }
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(invalid(format!(
                "visibility must lie in [0, 1], got {}",
                self.visibility
            )));
        }
        Ok(())
    }

    fn reflectivity(t: f64) -> f64 {
        (1.0 - t * t).max(0.0).sqrt()
    }

    /// Coincidence amplitudes for `HH, HV, VH, VV` inputs.
    pub fn amplitudes(&self) -> [f64; 4] {
        let t = [self.t_h, self.t_v];
        let r = [Self::reflectivity(self.t_h), Self::reflectivity(self.t_v)];
        let mut out = [0.0; 4];
        for x1 in 0..2 {
            for x2 in 0..2 {
                let mut a = t[x1] * t[x2] - r[x1] * r[x2];
                if self.compensated {
                    // rotated beam splitter swaps the roles of H and V
                    a *= t[1 - x1] * t[1 - x2];
                }
                out[2 * x1 + x2] = a;
            }
        }
        out
    }
}

/// Conditional POVM of the gate plus `D/A` analysis, and the per-input
/// success probability of the post-selection.
#[derive(Debug, Clone)]
pub struct GateOutput {
    pub povm: Povm,
    /// Success probability for the physical inputs `HH, HV, VH, VV`.
    pub success_probability: [f64; 4],
    pub amplitudes: [f64; 4],
}

pub const PHYSICAL_BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

pub fn cs_gate_povm(model: &GateModel) -> Result<GateOutput> {
    model.validate()?;
    let amplitudes = model.amplitudes();
    let success = amplitudes.map(|a| a * a);
    if let Some(i) = success.iter().position(|&s| s <= 1e-15) {
        return Err(invalid(format!(
            "gate never succeeds on input {}; conditional POVM undefined",
            PHYSICAL_BASIS_LABELS[i]
        )));
    }
    // Post-selection renormalizes by S = G†G; the conditional gate
    // G S^{-1/2} carries only the signs of the amplitudes.
    let signs = DVector::from_iterator(4, amplitudes.iter().map(|&a| c(a.signum(), 0.0)));
    let gate = ComplexMatrix::from_diagonal(&signs);

    let analysis = qubit_basis(std::f64::consts::FRAC_PI_2, 0.0); // D, A
                                                                  // logical qubit 2 is {D, A}: W = I (x) Hadamard maps logical to physical
    let hadamard = {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
    };
    let w = linalg::kron(&linalg::identity(2), &hadamard);

    let v = model.visibility;
    let mut items = Vec::with_capacity(4);
    for (i, a1) in analysis.iter().enumerate() {
        for (j, a2) in analysis.iter().enumerate() {
            let projector = linalg::outer(&a1.kronecker(a2));
            let physical = gate.adjoint() * projector * &gate;
            let logical = w.adjoint() * physical * &w;
            let diag = ComplexMatrix::from_diagonal(&logical.diagonal());
            let element = linalg::hermitian_part(&(logical.scale(v) + diag.scale(1.0 - v)));
            items.push((ANALYSIS_LABELS[2 * i + j], element));
        }
    }
    Ok(GateOutput {
        povm: Povm::from_elements(items)?,
        success_probability: success,
        amplitudes,
    })
}

/// Structural diagnostics of a candidate POVM.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub max_hermiticity_violation: f64,
    pub min_eigenvalue: f64,
    pub completeness_residual: f64,
    pub passed: bool,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "hermiticity {:.3e}, min eigenvalue {:.3e}, completeness {:.3e} ({})",
            self.max_hermiticity_violation,
            self.min_eigenvalue,
            self.completeness_residual,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

pub fn validate_povm(povm: &Povm) -> ValidationReport {
    let mut herm = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    for o in povm.outcomes() {
        herm = herm.max(linalg::hermiticity_violation(&o.element));
        min_eig = min_eig.min(linalg::min_eigenvalue(&o.element));
    }
    let completeness = linalg::max_abs_diff(&povm.sum(), &linalg::identity(povm.dim()));
    ValidationReport {
        max_hermiticity_violation: herm,
        min_eigenvalue: min_eig,
        completeness_residual: completeness,
        passed: herm <= HERMITICITY_TOL && min_eig >= -EIGENVALUE_TOL && completeness <= COMPLETENESS_TOL,
    }
}

// ---------------------------------------------------------------------------
// JSON format

pub const LOGICAL_BASIS_NOTE: &str = "logical |00>,|01>,|10>,|11>; qubit1 slow";

#[derive(Debug, Serialize, Deserialize)]
struct PovmFile {
    dim: usize,
    basis: String,
    outcomes: Vec<OutcomeFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutcomeFile {
    label: String,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Writes every float with 17 significant digits so that parsing and
/// re-serializing reproduces the same text.
pub struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", format_f64(value))
    }
}

/// 17-significant-digit scientific representation (`-0` kept as `-0.0...`).
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    value.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn povm_to_json(povm: &Povm) -> String {
    let file = PovmFile {
        dim: povm.dim(),
        basis: LOGICAL_BASIS_NOTE.to_string(),
        outcomes: povm
            .outcomes()
            .iter()
            .map(|o| OutcomeFile {
                label: o.label.clone(),
                re: o.element.row_iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
                im: o.element.row_iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
            })
            .collect(),
    };
    to_json_string(&file).expect("POVM serialization cannot fail")
}

pub fn povm_from_json(text: &str) -> Result<Povm> {
    let file: PovmFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut outcomes = Vec::with_capacity(file.outcomes.len());
    for o in file.outcomes {
        let rows_ok = |m: &Vec<Vec<f64>>| m.len() == file.dim && m.iter().all(|r| r.len() == file.dim);
        if !rows_ok(&o.re) || !rows_ok(&o.im) {
            return Err(Error::Parse(format!(
                "outcome '{}' is not a {d}x{d} matrix",
                o.label,
                d = file.dim
            )));
        }
        let element = ComplexMatrix::from_fn(file.dim, file.dim, |i, j| c(o.re[i][j], o.im[i][j]));
        outcomes.push(Outcome {
            label: o.label,
            element,
        });
    }
    Povm::new(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::state::DensityMatrix;

    fn zero_one_diag(bits: &[bool]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_iterator(
            bits.len(),
            bits.iter().map(|&b| if b { ONE } else { ZERO }),
        ))
    }

    #[test]
    fn bell_projectors_are_orthogonal_rank_one() {
        let p = bell_povm();
        assert!(validate_povm(&p).passed);
        for (i, a) in p.outcomes().iter().enumerate() {
            assert!((linalg::trace(&a.element) - ONE).norm() < 1e-12);
            for (j, b) in p.outcomes().iter().enumerate() {
                let prod = &a.element * &b.element;
                if i == j {
                    assert!(linalg::max_abs_diff(&prod, &a.element) < 1e-12);
                } else {
                    assert!(prod.iter().all(|z| z.norm() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn bell_on_phi_plus_and_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi_plus = DVector::from_vec(vec![c(s, 0.0), ZERO, ZERO, c(s, 0.0)]);
        let p = bell_povm()
            .probabilities(&DensityMatrix::pure(&phi_plus).unwrap())
            .unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1..].iter().all(|x| x.abs() < 1e-12));
        let q = bell_povm().probabilities(&DensityMatrix::maximally_mixed(4)).unwrap();
        assert!(q.iter().all(|x| (x - 0.25).abs() < 1e-12));
    }

    /// Applies diag(1,1,1,-1) in the H/V basis to each D/A analysis product
    /// state and rewrites qubit 2 in the D/A basis.
    #[test]
    fn analysis_labels_map_to_bell_states() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = [s, s];
        let a = [s, -s];
        let cz = [1.0, 1.0, 1.0, -1.0];
        // H/V -> D/A change of basis for qubit 2 is the Hadamard
        let had = |v: [f64; 2]| [s * (v[0] + v[1]), s * (v[0] - v[1])];
        let bell = bell_povm();
        for (label, (q1, q2)) in ANALYSIS_LABELS.iter().zip([(d, d), (d, a), (a, d), (a, a)]) {
            let mut phys = [0.0; 4];
            for i in 0..2 {
                for j in 0..2 {
                    phys[2 * i + j] = q1[i] * q2[j] * cz[2 * i + j];
                }
            }
            let mut logical = [0.0; 4];
            for i in 0..2 {
                let row = had([phys[2 * i], phys[2 * i + 1]]);
                logical[2 * i] = row[0];
                logical[2 * i + 1] = row[1];
            }
            let ket = DVector::from_iterator(4, logical.iter().map(|&x| c(x, 0.0)));
            let p = linalg::trace_product(&linalg::outer(&ket), bell.element(label).unwrap()).re;
            assert!((p - 1.0).abs() < 1e-12, "{label} -> {p}");
        }
    }

    #[test]
    fn product_projective_examples() {
        let z = product_projective_povm(ProductBasis {
            theta1: 0.0,
            azimuth1: 0.0,
            theta2: 0.0,
            azimuth2: 0.0,
        });
        for (k, o) in z.outcomes().iter().enumerate() {
            let mut bits = [false; 4];
            bits[k] = true;
            assert!(linalg::max_abs_diff(&o.element, &zero_one_diag(&bits)) < 1e-15);
        }
        let x = product_projective_povm(ProductBasis {
            theta1: std::f64::consts::FRAC_PI_2,
            azimuth1: 0.0,
            theta2: std::f64::consts::FRAC_PI_2,
            azimuth2: 0.0,
        });
        let plus_plus = x.element("++").unwrap();
        assert!(plus_plus.iter().all(|z| (z - c(0.25, 0.0)).norm() < 1e-15));
        let minus_minus = x.element("--").unwrap();
        assert!((minus_minus[(0, 3)] - c(0.25, 0.0)).norm() < 1e-15);
        assert!((minus_minus[(0, 1)] - c(-0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ideal_gate_matches_bell() {
        let out = cs_gate_povm(&GateModel::ideal()).unwrap();
        for (a, b) in out.povm.outcomes().iter().zip(bell_povm().outcomes()) {
            assert_eq!(a.label, b.label);
            assert!(linalg::max_abs_diff(&a.element, &b.element) < 1e-10);
        }
        for s in out.success_probability {
            assert!((s - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn uncompensated_amplitudes() {
        let model = GateModel {
            compensated: false,
            ..GateModel::ideal()
        };
        let a = model.amplitudes();
        let r = 1.0 / 3f64.sqrt();
        let expected = [1.0, r, r, -1.0 / 3.0];
        for (x, y) in a.iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_visibility_is_diagonal() {
        let out = cs_gate_povm(&GateModel::ideal().with_visibility(0.0)).unwrap();
        for o in out.povm.outcomes() {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert_eq!(o.element[(i, j)], ZERO);
                    }
                }
            }
        }
        assert!(validate_povm(&out.povm).passed);
    }

    #[test]
    fn gate_rejects_bad_visibility_and_dead_inputs() {
        assert!(cs_gate_povm(&GateModel::ideal().with_visibility(1.3)).is_err());
        let dead = GateModel {
            t_h: std::f64::consts::FRAC_1_SQRT_2,
            t_v: std::f64::consts::FRAC_1_SQRT_2,
            visibility: 1.0,
            compensated: false,
        };
        assert!(cs_gate_povm(&dead).is_err());
    }

    #[test]
    fn validation_failures() {
        let scaled = bell_povm().map_elements(|e| e.scale(0.9));
        let r = validate_povm(&scaled);
        assert!(!r.passed);
        assert!((r.completeness_residual - 0.1).abs() < 1e-12);

        let mut outcomes = bell_povm().outcomes().to_vec();
        outcomes[0].element = &outcomes[0].element - linalg::identity(4).scale(0.01);
        let r = validate_povm(&Povm::new(outcomes).unwrap());
        assert!(!r.passed);
        assert!(r.min_eigenvalue < -0.009);
    }

    #[test]
    fn json_round_trip_is_textually_stable() {
        let out = cs_gate_povm(&GateModel::ideal().with_visibility(0.83)).unwrap();
        let text = povm_to_json(&out.povm);
        let back = povm_from_json(&text).unwrap();
        assert_eq!(back, out.povm);
        assert_eq!(povm_to_json(&back), text);
        assert!(text.contains("\"basis\":\"logical |00>,|01>,|10>,|11>; qubit1 slow\""));
    }

    #[test]
    fn json_rejects_ragged_matrices() {
        let bad = r#"{"dim":2,"basis":"x","outcomes":[{"label":"a","re":[[1.0]],"im":[[0.0]]}]}"#;
        assert!(matches!(povm_from_json(bad), Err(Error::Parse(_))));
    }
}
