//! Qubit probe states, rotations, dephasing and parameter derivatives.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, ComplexMatrix, ONE, ZERO};

pub const STRUCTURE_TOL: f64 = 1e-10;

/// Central finite-difference step for families without analytic derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(invalid("density matrix must be square and non-empty"));
        }
        if !linalg::is_finite(&matrix) {
            return Err(invalid("density matrix has non-finite entries"));
        }
        let herm = linalg::hermiticity_violation(&matrix);
        if herm > STRUCTURE_TOL {
            return Err(invalid(format!("not Hermitian (violation {herm:e})")));
        }
        let tr = linalg::trace(&matrix);
        if (tr - ONE).norm() > STRUCTURE_TOL {
            return Err(invalid(format!("trace {tr} differs from 1")));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < -STRUCTURE_TOL {
            return Err(invalid(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(matrix))
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self(matrix)
    }

    /// `|v><v|` for a normalized ket.
    pub fn pure(ket: &DVector<Complex64>) -> Result<Self> {
        let norm = ket.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > STRUCTURE_TOL {
            return Err(invalid(format!("ket norm {norm} differs from 1")));
        }
        Ok(Self(linalg::outer(ket)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(linalg::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.0, &self.0).re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(linalg::kron(&self.0, &other.0))
    }

    /// Bloch vector of a qubit state.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let m = &self.0;
        Some([2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re])
    }
}

pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    linalg::kron(a, b)
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

/// `(|0> + e^{i xi}|1>)/sqrt(2)`.
pub fn equatorial_ket(xi: f64) -> DVector<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_vec(vec![c(s, 0.0), Complex64::from_polar(s, xi)])
}

pub fn make_equatorial_state(xi: f64) -> Result<DensityMatrix> {
    finite("xi", xi)?;
    Ok(DensityMatrix::from_trusted(linalg::outer(&equatorial_ket(xi))))
}

/// `exp{i (phi_y sigma_y + phi_z sigma_z)}` in closed form.
pub fn rotation_unitary(phi_y: f64, phi_z: f64) -> Result<ComplexMatrix> {
    finite("phi_y", phi_y)?;
    finite("phi_z", phi_z)?;
    let theta = phi_y.hypot(phi_z);
    // sin(t)/t, series branch near the removable singularity
    let sinc = if theta < 1e-8 {
        1.0 - theta * theta / 6.0
    } else {
        theta.sin() / theta
    };
    let cos = theta.cos();
    // i * sinc * (phi_y sigma_y + phi_z sigma_z)
    let a = sinc * phi_y;
    let b = sinc * phi_z;
    Ok(ComplexMatrix::from_row_slice(
        2,
        2,
        &[c(cos, b), c(a, 0.0), c(-a, 0.0), c(cos, -b)],
    ))
}

/// Equatorial probe after a phase `phi` and Gaussian dephasing of strength
/// `delta`: off-diagonal `e^{-i(phi+xi) - delta^2}/2`.
pub fn dephased_phase_state(xi: f64, phi: f64, delta: f64) -> Result<DensityMatrix> {
    finite("xi", xi)?;
    finite("phi", phi)?;
    finite("delta", delta)?;
    if delta < 0.0 {
        return Err(invalid(format!("delta must be non-negative, got {delta}")));
    }
    Ok(DensityMatrix::from_trusted(dephased_matrix(xi + phi, delta)))
}

fn dephased_matrix(angle: f64, delta: f64) -> ComplexMatrix {
    let off = Complex64::from_polar(0.5 * (-delta * delta).exp(), -angle);
    ComplexMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), off, off.conj(), c(0.5, 0.0)])
}

fn two_phase_matrix(xi: f64, phi_y: f64, phi_z: f64) -> Result<ComplexMatrix> {
    let u = rotation_unitary(phi_y, phi_z)?;
    let ket = &u * equatorial_ket(xi);
    Ok(linalg::outer(&ket))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Parameters `(phi, delta)`.
    PhaseDephasing,
    /// Parameters `(phi_y, phi_z)`.
    TwoPhase,
}

impl ProbeKind {
    pub fn parameter_names(self) -> [&'static str; 2] {
        match self {
            ProbeKind::PhaseDephasing => ["phi", "delta"],
            ProbeKind::TwoPhase => ["phi_y", "phi_z"],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "phase-dephasing" => Ok(ProbeKind::PhaseDephasing),
            "two-phase" => Ok(ProbeKind::TwoPhase),
            other => Err(invalid(format!(
                "unknown probe family '{other}' (expected phase-dephasing or two-phase)"
            ))),
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeKind::PhaseDephasing => "phase-dephasing",
            ProbeKind::TwoPhase => "two-phase",
        })
    }
}

/// A parametrized family of `m`-copy product probes. Copy `c` starts in the
/// equatorial state with input phase `input_phases[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFamily {
    kind: ProbeKind,
    input_phases: Vec<f64>,
    fd_step: f64,
}

impl ProbeFamily {
    pub fn new(kind: ProbeKind, input_phases: Vec<f64>) -> Result<Self> {
        if input_phases.is_empty() {
            return Err(invalid("a probe needs at least one copy"));
        }
        for (i, &xi) in input_phases.iter().enumerate() {
            finite(&format!("xi{}", i + 1), xi)?;
        }
        Ok(Self {
            kind,
            input_phases,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    /// `copies` identical probes with input phase `xi`.
    pub fn identical(kind: ProbeKind, xi: f64, copies: usize) -> Result<Self> {
        Self::new(kind, vec![xi; copies])
    }

    pub fn with_fd_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("finite-difference step must be positive, got {h}")));
        }
        self.fd_step = h;
        Ok(self)
    }

    pub fn kind(&self) -> ProbeKind {
        self.kind
    }

    pub fn copies(&self) -> usize {
        self.input_phases.len()
    }

    pub fn input_phases(&self) -> &[f64] {
        &self.input_phases
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn parameter_names(&self) -> [&'static str; 2] {
        self.kind.parameter_names()
    }

    pub fn n_params(&self) -> usize {
        2
    }

    /// Named fixed inputs: `xi` for one copy, `xi1, xi2, ...` otherwise.
    pub fn fixed_params(&self) -> Vec<(String, f64)> {
        if self.copies() == 1 {
            vec![("xi".to_string(), self.input_phases[0])]
        } else {
            self.input_phases
                .iter()
                .enumerate()
                .map(|(i, &x)| (format!("xi{}", i + 1), x))
                .collect()
        }
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: params.len(),
            });
        }
        for (name, &p) in self.parameter_names().iter().zip(params) {
            finite(name, p)?;
        }
        if self.kind == ProbeKind::PhaseDephasing && params[1] < 0.0 {
            return Err(invalid(format!("delta must be non-negative, got {}", params[1])));
        }
        Ok(())
    }

    /// Single-copy state with input phase `xi` and its derivatives.
    pub fn single_copy(&self, xi: f64, params: &[f64]) -> Result<StateWithDerivatives> {
        self.check_params(params)?;
        let (state, derivatives) = match self.kind {
            ProbeKind::PhaseDephasing => {
                let (phi, delta) = (params[0], params[1]);
                let rho = dephased_matrix(xi + phi, delta);
                let off = rho[(0, 1)];
                // d/dphi multiplies the upper off-diagonal by -i, d/ddelta by -2 delta
                let d_phi_off = off * c(0.0, -1.0);
                let d_delta_off = off * (-2.0 * delta);
                let d_phi = ComplexMatrix::from_row_slice(2, 2, &[ZERO, d_phi_off, d_phi_off.conj(), ZERO]);
                let d_delta = ComplexMatrix::from_row_slice(2, 2, &[ZERO, d_delta_off, d_delta_off.conj(), ZERO]);
                (rho, vec![d_phi, d_delta])
            }
            ProbeKind::TwoPhase => {
                let rho = two_phase_matrix(xi, params[0], params[1])?;
                (rho, two_phase_derivatives(xi, params[0], params[1], self.fd_step)?)
            }
        };
        Ok(StateWithDerivatives {
            state: DensityMatrix::from_trusted(state),
            derivatives,
        })
    }
}

/// Central differences of `R rho0 R†` with respect to `(phi_y, phi_z)`.
pub fn two_phase_derivatives(xi: f64, phi_y: f64, phi_z: f64, h: f64) -> Result<Vec<ComplexMatrix>> {
    let dy = (two_phase_matrix(xi, phi_y + h, phi_z)? - two_phase_matrix(xi, phi_y - h, phi_z)?).scale(0.5 / h);
    let dz = (two_phase_matrix(xi, phi_y, phi_z + h)? - two_phase_matrix(xi, phi_y, phi_z - h)?).scale(0.5 / h);
    Ok(vec![linalg::hermitian_part(&dy), linalg::hermitian_part(&dz)])
}

/// Largest entrywise gap between derivatives taken with step `h` and `h/2`.
pub fn two_phase_step_consistency(xi: f64, phi_y: f64, phi_z: f64, h: f64) -> Result<f64> {
    let full = two_phase_derivatives(xi, phi_y, phi_z, h)?;
    let half = two_phase_derivatives(xi, phi_y, phi_z, 0.5 * h)?;
    Ok(full
        .iter()
        .zip(&half)
        .map(|(a, b)| linalg::max_abs_diff(a, b))
        .fold(0.0, f64::max))
}

/// A state together with one derivative per estimated parameter.
#[derive(Debug, Clone)]
pub struct StateWithDerivatives {
    pub state: DensityMatrix,
    pub derivatives: Vec<ComplexMatrix>,
}

impl StateWithDerivatives {
    pub fn new(state: DensityMatrix, derivatives: Vec<ComplexMatrix>) -> Result<Self> {
        for d in &derivatives {
            if d.nrows() != state.dim() || d.ncols() != state.dim() {
                return Err(Error::DimensionMismatch {
                    expected: state.dim(),
                    found: d.nrows(),
                });
            }
        }
        Ok(Self { state, derivatives })
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn n_params(&self) -> usize {
        self.derivatives.len()
    }

    /// Product rule for `self ⊗ other`.
    pub fn tensor(&self, other: &StateWithDerivatives) -> StateWithDerivatives {
        let a = self.state.matrix();
        let b = other.state.matrix();
        let derivatives = self
            .derivatives
            .iter()
            .zip(&other.derivatives)
            .map(|(da, db)| linalg::kron(da, b) + linalg::kron(a, db))
            .collect();
        StateWithDerivatives {
            state: self.state.tensor(&other.state),
            derivatives,
        }
    }
}

/// The `m`-copy product state of `family` at `params` with derivatives.
pub fn probe_with_derivatives(family: &ProbeFamily, params: &[f64]) -> Result<StateWithDerivatives> {
    let mut copies = family.input_phases().iter().map(|&xi| family.single_copy(xi, params));
    let mut acc = copies.next().expect("at least one copy")?;
    for next in copies {
        acc = acc.tensor(&next?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn equatorial_examples() {
        let plus = make_equatorial_state(0.0).unwrap();
        assert!(plus.matrix().iter().all(|z| close(*z, c(0.5, 0.0), 1e-15)));
        let minus = make_equatorial_state(PI).unwrap();
        assert!(close(minus.matrix()[(0, 0)], c(0.5, 0.0), 1e-15));
        assert!(close(minus.matrix()[(0, 1)], c(-0.5, 0.0), 1e-15));
        let y = make_equatorial_state(FRAC_PI_2).unwrap();
        // |psi><psi| with psi = (1, i)/sqrt2: row0,col1 = 1 * conj(i)/2
        assert!(close(y.matrix()[(0, 1)], c(0.0, -0.5), 1e-15));
        assert!(close(y.matrix()[(1, 0)], c(0.0, 0.5), 1e-15));
        assert!((y.purity() - 1.0).abs() < 1e-14);
        assert!(make_equatorial_state(f64::NAN).is_err());
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_unitary(0.0, 0.0).unwrap(), linalg::identity(2));
        let z = rotation_unitary(0.0, FRAC_PI_2).unwrap();
        assert!(close(z[(0, 0)], c(0.0, 1.0), 1e-15));
        assert!(close(z[(1, 1)], c(0.0, -1.0), 1e-15));
        assert!(z[(0, 1)].norm() < 1e-15);
        let y = rotation_unitary(FRAC_PI_2, 0.0).unwrap();
        // exp(i pi/2 sigma_y) = i sigma_y = [[0, 1], [-1, 0]]
        assert!(close(y[(0, 1)], c(1.0, 0.0), 1e-15));
        assert!(close(y[(1, 0)], c(-1.0, 0.0), 1e-15));
        assert!(y[(0, 0)].norm() < 1e-15);
        assert!(rotation_unitary(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn dephased_examples() {
        let rho = dephased_phase_state(0.0, 0.0, 0.0).unwrap();
        let plus = make_equatorial_state(0.0).unwrap();
        assert!(linalg::max_abs_diff(rho.matrix(), plus.matrix()) < 1e-15);
        let mixed = dephased_phase_state(0.3, 1.1, 6.0).unwrap();
        assert!(mixed.matrix()[(0, 1)].norm() < 1e-15);
        let r = dephased_phase_state(0.0, FRAC_PI_2, 1.0).unwrap();
        let off = r.matrix()[(0, 1)];
        assert!((off.norm() - 0.183_939_720_585_721_2).abs() < 1e-15);
        assert!((off.arg() + FRAC_PI_2).abs() < 1e-14);
        assert!(dephased_phase_state(0.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn phase_dephasing_delta_derivative() {
        let fam = ProbeFamily::identical(ProbeKind::PhaseDephasing, 0.0, 1).unwrap();
        let phi = 0.4;
        let swd = probe_with_derivatives(&fam, &[phi, 0.5]).unwrap();
        let expected = Complex64::from_polar(1.0, -phi) * (-2.0 * 0.5 * (-0.25f64).exp() / 2.0);
        assert!(close(swd.derivatives[1][(0, 1)], expected, 1e-15));
    }

    #[test]
    fn two_phase_origin_derivative_is_generator_commutator() {
        let fam = ProbeFamily::identical(ProbeKind::TwoPhase, 0.0, 1).unwrap();
        let swd = probe_with_derivatives(&fam, &[0.0, 0.0]).unwrap();
        let rho = swd.state.matrix();
        let sz = linalg::pauli_z();
        let expected = (&sz * rho - rho * &sz) * linalg::I;
        assert!(linalg::max_abs_diff(&swd.derivatives[1], &expected) < 1e-9);
        let sy = linalg::pauli_y();
        let expected_y = (&sy * rho - rho * &sy) * linalg::I;
        assert!(linalg::max_abs_diff(&swd.derivatives[0], &expected_y) < 1e-9);
    }

    #[test]
    fn two_copy_state_dimension_and_traceless_derivatives() {
        let fam = ProbeFamily::new(ProbeKind::PhaseDephasing, vec![0.0, 0.1]).unwrap();
        let swd = probe_with_derivatives(&fam, &[0.89, 0.3]).unwrap();
        assert_eq!(swd.dim(), 4);
        assert_eq!(swd.n_params(), 2);
        for d in &swd.derivatives {
            assert!(linalg::trace(d).norm() < 1e-9);
            assert!(linalg::hermiticity_violation(d) < 1e-10);
        }
        assert!(DensityMatrix::new(swd.state.matrix().clone()).is_ok());
    }

    #[test]
    fn parameter_count_checked() {
        let fam = ProbeFamily::identical(ProbeKind::TwoPhase, 0.0, 2).unwrap();
        assert!(matches!(
            probe_with_derivatives(&fam, &[0.1]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert_eq!(fam.fixed_params()[1].0, "xi2");
    }

    #[test]
    fn density_matrix_validation() {
        let bad = ComplexMatrix::from_row_slice(2, 2, &[c(1.2, 0.0), ZERO, ZERO, c(-0.2, 0.0)]);
        assert!(DensityMatrix::new(bad).is_err());
        let nonherm = ComplexMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), ZERO, c(0.5, 0.0)]);
        assert!(DensityMatrix::new(nonherm).is_err());
        assert!(DensityMatrix::new(linalg::identity(2).scale(0.5)).is_ok());
    }
}
