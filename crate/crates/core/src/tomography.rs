//! Detector tomography: reference states, simulated coincidence counts,
//! constrained maximum-likelihood POVM reconstruction, element fidelity and
//! Monte Carlo error propagation.

use std::fmt;
use std::io;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, ComplexMatrix};
use crate::measurement::Povm;
use crate::par;
use crate::seed::derived_rng;
use crate::state::DensityMatrix;

/// Single-qubit polarisation reference states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
        Polarization::R,
        Polarization::L,
    ];

    pub fn ket(self) -> DVector<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            Polarization::H => (c(1.0, 0.0), c(0.0, 0.0)),
            Polarization::V => (c(0.0, 0.0), c(1.0, 0.0)),
            Polarization::D => (c(s, 0.0), c(s, 0.0)),
            Polarization::A => (c(s, 0.0), c(-s, 0.0)),
            Polarization::R => (c(s, 0.0), c(0.0, s)),
            Polarization::L => (c(s, 0.0), c(0.0, -s)),
        };
        DVector::from_vec(vec![a, b])
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "H" => Polarization::H,
            "V" => Polarization::V,
            "D" => Polarization::D,
            "A" => Polarization::A,
            "R" => Polarization::R,
            "L" => Polarization::L,
            other => return Err(Error::Parse(format!("unknown polarisation label '{other}'"))),
        })
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub type InputLabel = (Polarization, Polarization);

#[derive(Debug, Clone)]
pub struct ReferenceState {
    pub label: InputLabel,
    pub state: DensityMatrix,
}

/// The 36 product states `|a1>|a2>` with `a in {H, V, D, A, R, L}`.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pub states: Vec<ReferenceState>,
}

impl ReferenceSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.state.dim())
    }

    pub fn index_of(&self, label: InputLabel) -> Option<usize> {
        self.states.iter().position(|s| s.label == label)
    }

    /// Rank and condition number of the map from Hermitian operators to
    /// expectation values on the reference states.
    pub fn informational_rank(&self) -> (usize, f64) {
        let d = self.dim();
        let rows = self.states.len();
        // real coordinates of vec(rho): Re and Im parts
        let mut m = DMatrix::<f64>::zeros(rows, 2 * d * d);
        for (r, s) in self.states.iter().enumerate() {
            for (k, z) in s.state.matrix().iter().enumerate() {
                m[(r, k)] = z.re;
                m[(r, d * d + k)] = z.im;
            }
        }
        linalg::real_rank_and_condition(&m, 1e-10)
    }
}

pub fn reference_states() -> ReferenceSet {
    let mut states = Vec::with_capacity(36);
    for a in Polarization::ALL {
        for b in Polarization::ALL {
            let ket = a.ket().kronecker(&b.ket());
            states.push(ReferenceState {
                label: (a, b),
                state: DensityMatrix::from_trusted(linalg::outer(&ket)),
            });
        }
    }
    ReferenceSet { states }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub input: InputLabel,
    pub outcome: String,
    pub counts: u64,
}

/// Coincidence counts per (input state, outcome).
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    pub rows: Vec<CountRow>,
    /// Expected total counts per input setting.
    pub exposure: f64,
}

impl CountsTable {
    /// Outcome labels in first-appearance order.
    pub fn outcome_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for r in &self.rows {
            if !labels.contains(&r.outcome) {
                labels.push(r.outcome.clone());
            }
        }
        labels
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.counts).sum()
    }

    /// Dense `counts[input][outcome]` aligned with `refs`, checking that every
    /// pair appears exactly once.
    pub fn matrix(&self, refs: &ReferenceSet) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let labels = self.outcome_labels();
        let mut seen = vec![vec![false; labels.len()]; refs.len()];
        let mut counts = vec![vec![0.0; labels.len()]; refs.len()];
        for r in &self.rows {
            let j = refs
                .index_of(r.input)
                .ok_or_else(|| invalid(format!("input {}{} not in the reference set", r.input.0, r.input.1)))?;
            let k = labels.iter().position(|l| *l == r.outcome).expect("label collected");
            if seen[j][k] {
                return Err(invalid(format!(
                    "duplicate row for input {}{} outcome {}",
                    r.input.0, r.input.1, r.outcome
                )));
            }
            seen[j][k] = true;
            counts[j][k] = r.counts as f64;
        }
        for (j, row) in seen.iter().enumerate() {
            if let Some(k) = row.iter().position(|s| !s) {
                let (a, b) = refs.states[j].label;
                return Err(invalid(format!("missing row for input {a}{b} outcome {}", labels[k])));
            }
        }
        Ok((labels, counts))
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io_err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["input1", "input2", "outcome", "counts"])
            .map_err(io_err)?;
        for r in &self.rows {
            w.write_record([
                r.input.0.to_string(),
                r.input.1.to_string(),
                r.outcome.clone(),
                r.counts.to_string(),
            ])
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Parses the `input1,input2,outcome,counts` format. The exposure is
    /// estimated as the mean number of counts per input setting.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let expected = ["input1", "input2", "outcome", "counts"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!(
                "counts header must be {}, got '{}'",
                expected.join(","),
                headers
                    .iter()
                    .collect::<Vec<_>>()
                    .join(",")
                    .chars()
                    .take(60)
                    .collect::<String>()
            )));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim();
            let counts = field(3)
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("row {}: bad count '{}': {e}", line + 2, field(3))))?;
            rows.push(CountRow {
                input: (Polarization::parse(field(0))?, Polarization::parse(field(1))?),
                outcome: field(2).to_string(),
                counts,
            });
        }
        let mut inputs: Vec<InputLabel> = rows.iter().map(|r| r.input).collect();
        inputs.sort();
        inputs.dedup();
        let total: u64 = rows.iter().map(|r| r.counts).sum();
        let exposure = if inputs.is_empty() {
            0.0
        } else {
            total as f64 / inputs.len() as f64
        };
        Ok(Self { rows, exposure })
    }
}

fn poisson_draw<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Poisson counts with mean `exposure * p(k|j)`, deterministic in `seed`.
pub fn simulate_counts(povm: &Povm, refs: &ReferenceSet, exposure: f64, seed: u64) -> Result<CountsTable> {
    if !(exposure > 0.0 && exposure.is_finite()) {
        return Err(invalid(format!("exposure must be positive, got {exposure}")));
    }
    let mut rng = derived_rng(seed, 0);
    let mut rows = Vec::with_capacity(refs.len() * povm.len());
    for r in &refs.states {
        let probs = povm.probabilities(&r.state)?;
        for (o, p) in povm.outcomes().iter().zip(probs) {
            rows.push(CountRow {
                input: r.label,
                outcome: o.label.clone(),
                counts: poisson_draw(exposure * p.max(0.0), &mut rng),
            });
        }
    }
    Ok(CountsTable { rows, exposure })
}

/// Noise-free table with counts `round(exposure * p(k|j))`.
pub fn expected_counts(povm: &Povm, refs: &ReferenceSet, exposure: f64) -> Result<CountsTable> {
    let mut rows = Vec::with_capacity(refs.len() * povm.len());
    for r in &refs.states {
        let probs = povm.probabilities(&r.state)?;
        for (o, p) in povm.outcomes().iter().zip(probs) {
            rows.push(CountRow {
                input: r.label,
                outcome: o.label.clone(),
                counts: (exposure * p.max(0.0)).round() as u64,
            });
        }
    }
    Ok(CountsTable { rows, exposure })
}

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub max_iters: usize,
    /// Relative log-likelihood change that ends the iteration.
    pub tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-10,
        }
    }
}

const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub povm: Povm,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after every accepted iteration (first entry: start).
    pub log_likelihood_trace: Vec<f64>,
    /// Times an observed event had model probability below the floor.
    pub floored_events: usize,
}

struct MleProblem<'a> {
    rhos: Vec<&'a ComplexMatrix>,
    counts: Vec<Vec<f64>>,
    total: f64,
}

impl MleProblem<'_> {
    fn probabilities(&self, elements: &[ComplexMatrix]) -> Vec<Vec<f64>> {
        self.rhos
            .iter()
            .map(|rho| elements.iter().map(|e| linalg::trace_product(rho, e).re).collect())
            .collect()
    }

    fn log_likelihood(&self, probs: &[Vec<f64>]) -> f64 {
        let mut ll = 0.0;
        for (nj, pj) in self.counts.iter().zip(probs) {
            for (&n, &p) in nj.iter().zip(pj) {
                if n > 0.0 {
                    ll += n * p.max(P_FLOOR).ln();
                }
            }
        }
        ll
    }

    /// `R_k = sum_j (n_jk / p_jk) rho_j / N`.
    fn r_operators(&self, probs: &[Vec<f64>], k_len: usize, floored: &mut usize) -> Vec<ComplexMatrix> {
        let d = self.rhos[0].nrows();
        (0..k_len)
            .map(|k| {
                let mut r = ComplexMatrix::zeros(d, d);
                for (j, rho) in self.rhos.iter().enumerate() {
                    let n = self.counts[j][k];
                    if n > 0.0 {
                        let mut p = probs[j][k];
                        if p < P_FLOOR {
                            *floored += 1;
                            p = P_FLOOR;
                        }
                        r += rho.scale(n / p / self.total);
                    }
                }
                r
            })
            .collect()
    }
}

/// Maximum-likelihood POVM for the observed counts.
///
/// Iterates `Pi_k <- S^{-1/2} R_k Pi_k R_k S^{-1/2}` with
/// `S = sum_k R_k Pi_k R_k`, starting from `Pi_k = I/K`. Every iterate is a
/// valid POVM. A step that would lower the likelihood is retried with the
/// diluted operator `(I + eps R_k)/(1 + eps)` for shrinking `eps`, so the
/// accepted log-likelihood sequence never decreases.
pub fn mle_reconstruct(counts: &CountsTable, refs: &ReferenceSet, options: MleOptions) -> Result<Reconstruction> {
    let (rank, _) = refs.informational_rank();
    let d = refs.dim();
    if rank < d * d {
        return Err(invalid(format!(
            "reference set spans {rank} of {} operator dimensions",
            d * d
        )));
    }
    let (labels, table) = counts.matrix(refs)?;
    for (j, row) in table.iter().enumerate() {
        if row.iter().all(|&n| n == 0.0) {
            let (a, b) = refs.states[j].label;
            return Err(invalid(format!("input {a}{b} has no counts")));
        }
    }
    let total: f64 = table.iter().flatten().sum();
    let problem = MleProblem {
        rhos: refs.states.iter().map(|s| s.state.matrix()).collect(),
        counts: table,
        total,
    };
    let k_len = labels.len();
    let mut elements = vec![linalg::identity(d).scale(1.0 / k_len as f64); k_len];
    let mut probs = problem.probabilities(&elements);
    let mut ll = problem.log_likelihood(&probs);
    let mut trace = vec![ll];
    let mut floored = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        iterations += 1;
        let rs = problem.r_operators(&probs, k_len, &mut floored);
        let mut eps = f64::INFINITY;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = multiplicative_step(&elements, &rs, eps)?;
            let cprobs = problem.probabilities(&candidate);
            let cll = problem.log_likelihood(&cprobs);
            if cll >= ll {
                accepted = Some((candidate, cprobs, cll));
                break;
            }
            eps = if eps.is_infinite() { 1.0 } else { eps * 0.5 };
        }
        let Some((candidate, cprobs, cll)) = accepted else {
            // no ascent direction left at double precision
            converged = true;
            break;
        };
        let change = (cll - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        assert!(cll >= ll, "log-likelihood decreased");
        elements = candidate;
        probs = cprobs;
        ll = cll;
        trace.push(ll);
        if change < options.tol {
            converged = true;
            break;
        }
    }

    let povm = Povm::from_elements(labels.into_iter().zip(elements))?;
    Ok(Reconstruction {
        povm,
        converged,
        iterations,
        log_likelihood: ll,
        log_likelihood_trace: trace,
        floored_events: floored,
    })
}

/// One update; `eps = inf` is the undiluted `R_k Pi_k R_k` step.
fn multiplicative_step(elements: &[ComplexMatrix], rs: &[ComplexMatrix], eps: f64) -> Result<Vec<ComplexMatrix>> {
    let d = elements[0].nrows();
    let ops: Vec<ComplexMatrix> = if eps.is_infinite() {
        rs.to_vec()
    } else {
        rs.iter()
            .map(|r| (linalg::identity(d) + r.scale(eps)).scale(1.0 / (1.0 + eps)))
            .collect()
    };
    let updated: Vec<ComplexMatrix> = elements.iter().zip(&ops).map(|(pi, r)| r * pi * r).collect();
    let s = updated.iter().fold(ComplexMatrix::zeros(d, d), |acc, x| acc + x);
    let s_inv_half = linalg::inverse_sqrt(&s)?;
    Ok(updated
        .iter()
        .map(|x| linalg::hermitian_part(&(&s_inv_half * x * &s_inv_half)))
        .collect())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2 = ||sqrt(a) sqrt(b)||_1^2` of two POVM elements
/// after normalizing each to unit trace.
pub fn povm_fidelity(candidate: &ComplexMatrix, ideal: &ComplexMatrix) -> Result<f64> {
    if candidate.nrows() != ideal.nrows() {
        return Err(Error::DimensionMismatch {
            expected: ideal.nrows(),
            found: candidate.nrows(),
        });
    }
    let ta = linalg::trace(candidate).re;
    let tb = linalg::trace(ideal).re;
    if ta <= 1e-15 || tb <= 1e-15 {
        return Err(invalid("fidelity needs elements with positive trace"));
    }
    let a = linalg::hermitian_part(candidate).scale(1.0 / ta);
    let b = linalg::hermitian_part(ideal).scale(1.0 / tb);
    // trace norm of sqrt(a) sqrt(b); singular values avoid square roots of
    // near-zero eigenvalues for rank-deficient elements
    let product = linalg::psd_sqrt(&a) * linalg::psd_sqrt(&b);
    let norm: f64 = product.svd(false, false).singular_values.iter().sum();
    Ok((norm * norm).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct McSummary {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    pub failed: usize,
}

/// Resamples every count from a Poisson law with mean equal to the observed
/// count and re-evaluates `derived` on each synthetic table. Runs execute in
/// parallel with per-run seeds; the summary is bit-identical for a fixed
/// `seed`.
pub fn monte_carlo_uncertainty<F>(counts: &CountsTable, derived: F, runs: usize, seed: u64) -> Result<McSummary>
where
    F: Fn(&CountsTable) -> Result<f64> + Sync + Send,
{
    if runs < 2 {
        return Err(invalid("monte carlo needs at least two runs"));
    }
    let outcomes: Vec<Result<f64>> = par::map_indexed(runs, |run| {
        let mut rng = derived_rng(seed, run as u64);
        let table = CountsTable {
            rows: counts
                .rows
                .iter()
                .map(|r| CountRow {
                    counts: poisson_draw(r.counts as f64, &mut rng),
                    ..r.clone()
                })
                .collect(),
            exposure: counts.exposure,
        };
        derived(&table).and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(format!("derived quantity is {v}")))
            }
        })
    });
    let mut values = Vec::with_capacity(runs);
    let mut failed = 0;
    let mut last_error = String::new();
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(e) => {
                failed += 1;
                last_error = e.to_string();
            }
        }
    }
    if failed * 10 > runs || values.len() < 2 {
        return Err(Error::MonteCarlo {
            failed,
            runs,
            last_error,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McSummary {
        mean,
        std: var.sqrt(),
        runs,
        failed,
    })
}
