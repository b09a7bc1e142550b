//! Symmetric logarithmic derivatives, quantum and classical Fisher
//! information, the weak-commutativity quantity and the figure of merit
//! `kappa`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, ComplexMatrix, ZERO};
use crate::measurement::Povm;
use crate::state::StateWithDerivatives;

/// Relative support cutoff: eigenvalue pairs with `l_m + l_n` below this
/// fraction of the largest eigenvalue are treated as kernel.
pub const DEFAULT_SUPPORT_RTOL: f64 = 1e-12;
pub const DEFAULT_P_CUTOFF: f64 = 1e-12;
const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SldSet {
    pub operators: Vec<ComplexMatrix>,
    pub support_tolerance: f64,
}

/// SLDs solving `2 d_i rho = L_i rho + rho L_i` in the eigenbasis of `rho`.
/// Matrix elements across eigenvalue pairs whose sum falls below
/// `support_tolerance` are set to zero. `None` selects
/// `DEFAULT_SUPPORT_RTOL * lambda_max`.
pub fn sld_operators(swd: &StateWithDerivatives, support_tolerance: Option<f64>) -> Result<SldSet> {
    let rho = swd.state.matrix();
    let herm = linalg::hermiticity_violation(rho);
    if herm > 1e-9 {
        return Err(invalid(format!("state is not Hermitian (violation {herm:e})")));
    }
    for (i, d) in swd.derivatives.iter().enumerate() {
        if d.nrows() != rho.nrows() {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows(),
                found: d.nrows(),
            });
        }
        let h = linalg::hermiticity_violation(d);
        if h > 1e-9 {
            return Err(invalid(format!("derivative {i} is not Hermitian (violation {h:e})")));
        }
    }
    let (values, vectors) = linalg::hermitian_eigen(rho);
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let tol = support_tolerance.unwrap_or(DEFAULT_SUPPORT_RTOL * lambda_max);
    let dim = values.len();
    let operators = swd
        .derivatives
        .iter()
        .map(|d| {
            let in_eig = vectors.adjoint() * d * &vectors;
            let l = ComplexMatrix::from_fn(dim, dim, |m, n| {
                let denom = values[m] + values[n];
                if denom > tol {
                    in_eig[(m, n)] * (2.0 / denom)
                } else {
                    ZERO
                }
            });
            linalg::hermitian_part(&(&vectors * l * vectors.adjoint()))
        })
        .collect();
    Ok(SldSet {
        operators,
        support_tolerance: tol,
    })
}

/// Largest entrywise residual of `2 d_i rho - L_i rho - rho L_i` after
/// projecting onto the support of `rho`.
pub fn sld_residual(swd: &StateWithDerivatives, slds: &SldSet) -> f64 {
    let rho = swd.state.matrix();
    let (values, vectors) = linalg::hermitian_eigen(rho);
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let support: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] > DEFAULT_SUPPORT_RTOL.max(1e-10) * lambda_max)
        .collect();
    let mut worst = 0.0_f64;
    for (d, l) in swd.derivatives.iter().zip(&slds.operators) {
        let r = d.scale(2.0) - (l * rho + rho * l);
        let in_eig = vectors.adjoint() * r * &vectors;
        // any element touching the support must vanish
        for m in 0..values.len() {
            for n in 0..values.len() {
                if support.contains(&m) || support.contains(&n) {
                    worst = worst.max(in_eig[(m, n)].norm());
                }
            }
        }
    }
    worst
}

/// `H_ij = Re Tr[rho {L_i, L_j}] / 2`.
pub fn qfi_matrix(swd: &StateWithDerivatives, slds: &SldSet) -> DMatrix<f64> {
    let rho = swd.state.matrix();
    let n = slds.operators.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let li = &slds.operators[i];
            let lj = &slds.operators[j];
            let v = 0.5 * (linalg::trace_product(rho, &(li * lj + lj * li))).re;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// SLDs followed by the QFI matrix.
pub fn quantum_fisher(swd: &StateWithDerivatives) -> Result<DMatrix<f64>> {
    let slds = sld_operators(swd, None)?;
    Ok(qfi_matrix(swd, &slds))
}

/// `Tr[rho [L_i, L_j]] / i = 2 Im Tr[rho L_i L_j]`; zero is the
/// weak-commutativity condition for attaining the multiparameter quantum
/// Cramer-Rao bound.
pub fn weak_commutativity(swd: &StateWithDerivatives, slds: &SldSet, i: usize, j: usize) -> Result<f64> {
    let n = slds.operators.len();
    if i >= n || j >= n {
        return Err(invalid(format!(
            "parameter index out of range ({i}, {j}) for {n} parameters"
        )));
    }
    if i == j {
        return Ok(0.0);
    }
    let rho = swd.state.matrix();
    let li = &slds.operators[i];
    let lj = &slds.operators[j];
    let comm = li * lj - lj * li;
    Ok((linalg::trace_product(rho, &comm) * c(0.0, -1.0)).re)
}

/// Outcome probabilities and their parameter derivatives.
#[derive(Debug, Clone, Serialize)]
pub struct MeasurementData {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
    /// `derivatives[i][k] = d_i p(k)`.
    pub derivatives: Vec<Vec<f64>>,
}

pub fn measurement_probabilities(swd: &StateWithDerivatives, povm: &Povm) -> Result<MeasurementData> {
    if povm.dim() != swd.dim() {
        return Err(Error::DimensionMismatch {
            expected: swd.dim(),
            found: povm.dim(),
        });
    }
    let rho = swd.state.matrix();
    let mut probabilities = Vec::with_capacity(povm.len());
    for o in povm.outcomes() {
        let p = linalg::trace_product(rho, &o.element);
        debug_assert!(p.im.abs() < 1e-10, "complex probability {p}");
        probabilities.push(p.re);
    }
    let derivatives = swd
        .derivatives
        .iter()
        .map(|d| {
            povm.outcomes()
                .iter()
                .map(|o| linalg::trace_product(d, &o.element).re)
                .collect()
        })
        .collect();
    Ok(MeasurementData {
        labels: povm.labels().into_iter().map(String::from).collect(),
        probabilities,
        derivatives,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FisherReport {
    #[serde(serialize_with = "linalg::serialize_rows")]
    pub classical_fi: DMatrix<f64>,
    /// `1 / (F^-1)_jj`, or 0 for parameters touched by the null space of a
    /// singular `F`.
    pub effective_fi: Vec<f64>,
    pub singular: bool,
    pub dropped_outcomes: Vec<String>,
    /// A dropped outcome carried a non-vanishing derivative, so the true FI
    /// diverges at this point.
    pub boundary: bool,
}

/// Classical Fisher information `F_ij = sum_s d_i p(s) d_j p(s) / p(s)`.
pub fn classical_fi(data: &MeasurementData, p_cutoff: f64) -> Result<FisherReport> {
    let n = data.derivatives.len();
    let k = data.probabilities.len();
    if data.derivatives.iter().any(|row| row.len() != k) || data.labels.len() != k {
        return Err(invalid("probability and derivative tables have different lengths"));
    }
    if let Some(p) = data.probabilities.iter().find(|&&p| p < -1e-12 || !p.is_finite()) {
        return Err(invalid(format!("negative or non-finite probability {p:e}")));
    }
    let total: f64 = data.probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(invalid(format!("probabilities sum to {total}, expected 1")));
    }
    for (i, row) in data.derivatives.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if s.abs() > 1e-6 {
            return Err(invalid(format!(
                "derivatives of parameter {i} sum to {s:e}, expected 0"
            )));
        }
    }

    let mut f = DMatrix::zeros(n, n);
    let mut dropped = Vec::new();
    let mut boundary = false;
    for s in 0..k {
        let p = data.probabilities[s];
        if p < p_cutoff {
            dropped.push(data.labels[s].clone());
            if data.derivatives.iter().any(|row| row[s].abs() > 1e-9) {
                boundary = true;
            }
            continue;
        }
        for i in 0..n {
            for j in i..n {
                let v = data.derivatives[i][s] * data.derivatives[j][s] / p;
                f[(i, j)] += v;
                if i != j {
                    f[(j, i)] += v;
                }
            }
        }
    }
    let (effective_fi, singular) = effective_information(&f);
    Ok(FisherReport {
        classical_fi: f,
        effective_fi,
        singular,
        dropped_outcomes: dropped,
        boundary,
    })
}

/// Effective per-parameter information and the singularity flag.
pub fn effective_information(f: &DMatrix<f64>) -> (Vec<f64>, bool) {
    let n = f.nrows();
    let max_diag = (0..n).map(|i| f[(i, i)]).fold(0.0, f64::max);
    if max_diag <= 0.0 {
        return (vec![0.0; n], true);
    }
    let det = f.determinant();
    let singular = det.abs() < SINGULAR_RTOL * max_diag.powi(n as i32);
    if !singular {
        if let Some(inv) = f.clone().try_inverse() {
            return ((0..n).map(|j| 1.0 / inv[(j, j)]).collect(), false);
        }
    }
    // Parameters with a component along the null space have unbounded
    // variance; the rest use the pseudo-inverse restricted to the range.
    let eig = f.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut null: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&a| eig.eigenvalues[a] <= SINGULAR_RTOL * max_diag)
        .collect();
    if null.is_empty() {
        null.push(order[0]);
    }
    let range: Vec<usize> = order.iter().copied().filter(|a| !null.contains(a)).collect();
    let eff = (0..n)
        .map(|j| {
            let touches_null = null.iter().any(|&a| eig.eigenvectors[(j, a)].abs() > 1e-6);
            if touches_null {
                0.0
            } else {
                let pinv_jj: f64 = range
                    .iter()
                    .map(|&a| eig.eigenvectors[(j, a)].powi(2) / eig.eigenvalues[a])
                    .sum();
                1.0 / pinv_jj
            }
        })
        .collect();
    (eff, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// `(F_eff_jj / m) / H_jj`; `NaN` for excluded parameters.
    pub per_parameter: Vec<f64>,
    pub copies: usize,
    /// Parameters with `H_jj <= 0`, left out of the sum.
    pub excluded: Vec<usize>,
    pub partial: bool,
}

/// `kappa = sum_j (F_eff_jj / m) / H_jj` where `F` is the Fisher information
/// of a measurement on `m` jointly measured copies and `H` is always the
/// single-copy QFI.
pub fn kappa(report: &FisherReport, single_copy_qfi_diagonal: &[f64], copies: usize) -> Result<KappaResult> {
    if copies == 0 {
        return Err(invalid("copies must be positive"));
    }
    if single_copy_qfi_diagonal.len() != report.effective_fi.len() {
        return Err(Error::DimensionMismatch {
            expected: report.effective_fi.len(),
            found: single_copy_qfi_diagonal.len(),
        });
    }
    let m = copies as f64;
    let mut per_parameter = Vec::with_capacity(single_copy_qfi_diagonal.len());
    let mut excluded = Vec::new();
    for (j, (&feff, &h)) in report.effective_fi.iter().zip(single_copy_qfi_diagonal).enumerate() {
        if h > 0.0 && h.is_finite() {
            per_parameter.push(feff / m / h);
        } else {
            excluded.push(j);
            per_parameter.push(f64::NAN);
        }
    }
    let kappa = per_parameter.iter().filter(|x| !x.is_nan()).sum();
    Ok(KappaResult {
        kappa,
        per_parameter,
        copies,
        partial: !excluded.is_empty(),
        excluded,
    })
}
