//! End-to-end estimation scenarios: optimizing `kappa` over probe and
//! measurement settings, scanning the dephasing strength, random collective
//! measurement search and the singular-QFI input phase of the two-phase
//! problem.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fisher::{self, FisherReport, KappaResult};
use crate::linalg::{self, c, ComplexMatrix};
use crate::measurement::{format_f64, product_projective_povm, Povm, ProductBasis};
use crate::nelder_mead;
use crate::par;
use crate::seed::derived_rng;
use crate::state::{probe_with_derivatives, ProbeFamily, ProbeKind};

pub const DEFAULT_GRID_POINTS_PER_DIM: usize = 17;
pub const DEFAULT_BUDGET: usize = 2000;

/// A named scalar input of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Phi,
    Delta,
    PhiY,
    PhiZ,
    /// Input phase shared by every copy.
    Xi,
    Xi1,
    Xi2,
    Theta1,
    Azimuth1,
    Theta2,
    Azimuth2,
}

impl Setting {
    pub const ALL: [Setting; 11] = [
        Setting::Phi,
        Setting::Delta,
        Setting::PhiY,
        Setting::PhiZ,
        Setting::Xi,
        Setting::Xi1,
        Setting::Xi2,
        Setting::Theta1,
        Setting::Azimuth1,
        Setting::Theta2,
        Setting::Azimuth2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Phi => "phi",
            Setting::Delta => "delta",
            Setting::PhiY => "phi_y",
            Setting::PhiZ => "phi_z",
            Setting::Xi => "xi",
            Setting::Xi1 => "xi1",
            Setting::Xi2 => "xi2",
            Setting::Theta1 => "theta1",
            Setting::Azimuth1 => "azimuth1",
            Setting::Theta2 => "theta2",
            Setting::Azimuth2 => "azimuth2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| invalid(format!("unknown setting '{s}'")))
    }

    /// Search interval and whether it wraps around.
    fn search_range(self) -> (f64, f64, bool) {
        match self {
            Setting::Delta => (0.0, 3.0, false),
            Setting::PhiY | Setting::PhiZ => (-PI / 2.0, PI / 2.0, false),
            _ => (0.0, TAU, true),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum MeasurementSpec {
    Fixed(Povm),
    /// Two independent qubit measurements with free Bloch angles.
    ProductProjective,
}

/// A probe family, a measurement and the split of settings into optimized
/// and fixed ones.
#[derive(Debug, Clone)]
pub struct Scenario {
    kind: ProbeKind,
    copies: usize,
    measurement: MeasurementSpec,
    free: Vec<Setting>,
    fixed: BTreeMap<Setting, f64>,
}

/// One evaluation of a scenario at fully specified settings.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub kappa: KappaResult,
    pub fisher: FisherReport,
    pub single_copy_qfi: Vec<f64>,
}

impl Scenario {
    pub fn new(
        kind: ProbeKind,
        measurement: MeasurementSpec,
        free: Vec<Setting>,
        fixed: impl IntoIterator<Item = (Setting, f64)>,
    ) -> Result<Self> {
        let copies = match &measurement {
            MeasurementSpec::Fixed(p) => match p.dim() {
                2 => 1,
                4 => 2,
                d => return Err(invalid(format!("measurement dimension {d} is not 2 or 4"))),
            },
            MeasurementSpec::ProductProjective => 2,
        };
        let fixed: BTreeMap<Setting, f64> = fixed.into_iter().collect();
        for s in &free {
            if fixed.contains_key(s) {
                return Err(invalid(format!("setting '{s}' is both free and fixed")));
            }
        }
        for (i, s) in free.iter().enumerate() {
            if free[..i].contains(s) {
                return Err(invalid(format!("setting '{s}' listed twice")));
            }
        }
        let scenario = Self {
            kind,
            copies,
            measurement,
            free,
            fixed,
        };
        let allowed = scenario.allowed_settings();
        for s in scenario.free.iter().chain(scenario.fixed.keys()) {
            if !allowed.contains(s) {
                return Err(invalid(format!("setting '{s}' does not apply to this scenario")));
            }
        }
        if scenario.has(Setting::Xi) && (scenario.has(Setting::Xi1) || scenario.has(Setting::Xi2)) {
            return Err(invalid("use either the shared 'xi' or per-copy 'xi1'/'xi2'"));
        }
        Ok(scenario)
    }

    /// Ideal-measurement helper: phase-dephasing probes on two copies with
    /// both input phases optimized and `phi = 0`.
    pub fn phase_dephasing_two_copy(povm: Povm) -> Result<Self> {
        Self::new(
            ProbeKind::PhaseDephasing,
            MeasurementSpec::Fixed(povm),
            vec![Setting::Xi1, Setting::Xi2],
            [(Setting::Phi, 0.0)],
        )
    }

    pub fn kind(&self) -> ProbeKind {
        self.kind
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn free(&self) -> &[Setting] {
        &self.free
    }

    pub fn fixed(&self) -> &BTreeMap<Setting, f64> {
        &self.fixed
    }

    pub fn measurement(&self) -> &MeasurementSpec {
        &self.measurement
    }

    fn has(&self, s: Setting) -> bool {
        self.free.contains(&s) || self.fixed.contains_key(&s)
    }

    fn parameter_settings(&self) -> [Setting; 2] {
        match self.kind {
            ProbeKind::PhaseDephasing => [Setting::Phi, Setting::Delta],
            ProbeKind::TwoPhase => [Setting::PhiY, Setting::PhiZ],
        }
    }

    fn allowed_settings(&self) -> Vec<Setting> {
        let mut v = self.parameter_settings().to_vec();
        v.push(Setting::Xi);
        if self.copies == 2 {
            v.extend([Setting::Xi1, Setting::Xi2]);
        }
        if matches!(self.measurement, MeasurementSpec::ProductProjective) {
            v.extend([Setting::Theta1, Setting::Azimuth1, Setting::Theta2, Setting::Azimuth2]);
        }
        v
    }

    fn required_settings(&self, values: &BTreeMap<Setting, f64>) -> Vec<Setting> {
        let mut v = self.parameter_settings().to_vec();
        let per_copy = values.contains_key(&Setting::Xi1) || values.contains_key(&Setting::Xi2);
        if self.copies == 2 && per_copy {
            v.extend([Setting::Xi1, Setting::Xi2]);
        } else {
            v.push(Setting::Xi);
        }
        if matches!(self.measurement, MeasurementSpec::ProductProjective) {
            v.extend([Setting::Theta1, Setting::Azimuth1, Setting::Theta2, Setting::Azimuth2]);
        }
        v
    }

    /// Evaluates `kappa` with every setting specified in `values`.
    pub fn evaluate(&self, values: &BTreeMap<Setting, f64>) -> Result<Evaluation> {
        let get = |s: Setting| {
            values
                .get(&s)
                .copied()
                .ok_or_else(|| invalid(format!("setting '{s}' has no value")))
        };
        for s in self.required_settings(values) {
            get(s)?;
        }
        let [p0, p1] = self.parameter_settings();
        let params = [get(p0)?, get(p1)?];
        let phases = if values.contains_key(&Setting::Xi1) || values.contains_key(&Setting::Xi2) {
            vec![get(Setting::Xi1)?, get(Setting::Xi2)?]
        } else {
            vec![get(Setting::Xi)?; self.copies]
        };
        let family = ProbeFamily::new(self.kind, phases)?;
        let swd = probe_with_derivatives(&family, &params)?;
        let povm_storage;
        let povm = match &self.measurement {
            MeasurementSpec::Fixed(p) => p,
            MeasurementSpec::ProductProjective => {
                povm_storage = product_projective_povm(ProductBasis {
                    theta1: get(Setting::Theta1)?,
                    azimuth1: get(Setting::Azimuth1)?,
                    theta2: get(Setting::Theta2)?,
                    azimuth2: get(Setting::Azimuth2)?,
                });
                &povm_storage
            }
        };
        let data = fisher::measurement_probabilities(&swd, povm)?;
        let report = fisher::classical_fi(&data, fisher::DEFAULT_P_CUTOFF)?;
        let h = mean_single_copy_qfi_diagonal(&family, &params)?;
        let kappa = fisher::kappa(&report, &h, self.copies)?;
        Ok(Evaluation {
            kappa,
            fisher: report,
            single_copy_qfi: h,
        })
    }
}

/// Single-copy QFI diagonal averaged over the copies of `family`. For
/// identical copies this is exactly the single-copy QFI.
pub fn mean_single_copy_qfi_diagonal(family: &ProbeFamily, params: &[f64]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &xi in family.input_phases() {
        if !distinct.contains(&xi) {
            distinct.push(xi);
        }
    }
    let mut acc = vec![0.0; family.n_params()];
    let mut weight = 0.0;
    for &xi in &distinct {
        let count = family.input_phases().iter().filter(|&&x| x == xi).count() as f64;
        let h = fisher::quantum_fisher(&family.single_copy(xi, params)?)?;
        for (j, a) in acc.iter_mut().enumerate() {
            *a += count * h[(j, j)];
        }
        weight += count;
    }
    Ok(acc.into_iter().map(|a| a / weight).collect())
}

/// Single-copy QFI matrix.
pub fn single_copy_qfi(kind: ProbeKind, xi: f64, params: &[f64]) -> Result<DMatrix<f64>> {
    let family = ProbeFamily::identical(kind, xi, 1)?;
    fisher::quantum_fisher(&family.single_copy(xi, params)?)
}

/// Weak-commutativity value of the single-copy probe.
pub fn single_copy_weak_commutativity(kind: ProbeKind, xi: f64, params: &[f64]) -> Result<f64> {
    let family = ProbeFamily::identical(kind, xi, 1)?;
    let swd = family.single_copy(xi, params)?;
    let slds = fisher::sld_operators(&swd, None)?;
    fisher::weak_commutativity(&swd, &slds, 0, 1)
}

/// Input phase in `[0, 2 pi)` at which the two SLDs of the two-phase probe
/// commute in expectation, located by bisection on the first sign change
/// of the weak-commutativity value.
pub fn critical_input_phase(phi_y: f64, phi_z: f64) -> Result<f64> {
    let f = |xi: f64| single_copy_weak_commutativity(ProbeKind::TwoPhase, xi, &[phi_y, phi_z]);
    let n = 256;
    let mut prev_x = 0.0;
    let mut prev_f = f(prev_x)?;
    if prev_f == 0.0 {
        return Ok(0.0);
    }
    for k in 1..=n {
        let x = TAU * k as f64 / n as f64;
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x % TAU);
        }
        if fx.signum() != prev_f.signum() {
            let (mut lo, mut hi, mut flo) = (prev_x, x, prev_f);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid)?;
                if fm == 0.0 {
                    return Ok(mid);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_f = fx;
    }
    Err(Error::Optimization(format!(
        "weak commutativity has no sign change in xi for (phi_y, phi_z) = ({phi_y}, {phi_z})"
    )))
}

/// Best `kappa` found and the settings that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Optimum {
    pub evaluation: Evaluation,
    pub settings: BTreeMap<Setting, f64>,
    pub evaluations: usize,
}

impl Optimum {
    pub fn kappa(&self) -> f64 {
        self.evaluation.kappa.kappa
    }
}

fn grid_points_per_dim(dims: usize, budget: usize) -> usize {
    if dims == 0 {
        return 1;
    }
    let grid_budget = (budget / 2).max(1);
    let mut g = DEFAULT_GRID_POINTS_PER_DIM;
    while g > 1 && g.pow(dims as u32) > grid_budget {
        g -= 1;
    }
    g
}

/// Grid coordinate `i` of `g` along dimension `dim`. Periodic axes get a
/// per-dimension offset so that coarse grids avoid aligned settings.
fn grid_coordinate(s: Setting, i: usize, g: usize, dim: usize) -> f64 {
    let (lo, hi, periodic) = s.search_range();
    if periodic {
        let offset = (0.5 + 0.381_966_011_250_105_1 * dim as f64).fract();
        lo + (hi - lo) * (i as f64 + offset) / g as f64
    } else if g == 1 {
        0.5 * (lo + hi)
    } else {
        lo + (hi - lo) * i as f64 / (g - 1) as f64
    }
}

fn normalize(s: Setting, x: f64) -> f64 {
    let (lo, hi, periodic) = s.search_range();
    if periodic {
        lo + (x - lo).rem_euclid(hi - lo)
    } else {
        x.clamp(lo, hi)
    }
}

/// Maximizes `kappa` over the free settings: a coarse grid (up to 17 points
/// per dimension, at most half the budget) followed by simplex refinement
/// from the best grid point. `at` supplies or overrides fixed values.
pub fn optimize_kappa(scenario: &Scenario, at: &[(Setting, f64)], budget: usize) -> Result<Optimum> {
    if budget == 0 {
        return Err(invalid("evaluation budget must be at least 1"));
    }
    let mut base = scenario.fixed.clone();
    for &(s, v) in at {
        if scenario.free.contains(&s) {
            return Err(invalid(format!(
                "setting '{s}' is free and cannot be fixed at call time"
            )));
        }
        base.insert(s, v);
    }
    let free = &scenario.free;
    let dims = free.len();
    let assign = |x: &[f64]| {
        let mut values = base.clone();
        for (s, &v) in free.iter().zip(x) {
            values.insert(*s, normalize(*s, v));
        }
        values
    };

    let g = grid_points_per_dim(dims, budget);
    let n_grid = g.pow(dims as u32).min(budget);
    let grid_point = |idx: usize| -> Vec<f64> {
        let mut rem = idx;
        free.iter()
            .enumerate()
            .map(|(dim, &s)| {
                let i = rem % g;
                rem /= g;
                grid_coordinate(s, i, g, dim)
            })
            .collect()
    };
    let results: Vec<Result<Evaluation>> = par::map_indexed(n_grid, |idx| scenario.evaluate(&assign(&grid_point(idx))));

    let mut best: Option<(Vec<f64>, Evaluation)> = None;
    let mut failures = 0;
    let mut last_error = None;
    let mut nonsingular = 0;
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => {
                if !e.fisher.singular {
                    nonsingular += 1;
                }
                if best.as_ref().is_none_or(|(_, b)| e.kappa.kappa > b.kappa.kappa) {
                    best = Some((grid_point(idx), e));
                }
            }
            Err(e) => {
                failures += 1;
                last_error = Some(e);
            }
        }
    }
    let Some((mut best_x, mut best_eval)) = best else {
        return Err(Error::Optimization(format!(
            "all {n_grid} grid evaluations failed; last error: {}",
            last_error.map_or_else(String::new, |e| e.to_string())
        )));
    };
    if nonsingular == 0 {
        return Err(Error::Optimization(format!(
            "Fisher information singular at all {n_grid} grid points ({failures} evaluation failures)"
        )));
    }

    let mut used = n_grid;
    let remaining = budget.saturating_sub(n_grid);
    if dims > 0 && remaining > 0 {
        let step: Vec<f64> = free
            .iter()
            .map(|&s| {
                let (lo, hi, _) = s.search_range();
                0.5 * (hi - lo) / g as f64
            })
            .collect();
        let objective = |x: &[f64]| match scenario.evaluate(&assign(x)) {
            Ok(e) => -e.kappa.kappa,
            Err(_) => f64::INFINITY,
        };
        let m = nelder_mead::minimize(objective, &best_x, &step, remaining, 1e-13);
        used += m.evaluations;
        if -m.value > best_eval.kappa.kappa {
            if let Ok(e) = scenario.evaluate(&assign(&m.x)) {
                best_x = m.x;
                best_eval = e;
            }
        }
    }
    let settings = assign(&best_x);
    Ok(Optimum {
        evaluation: best_eval,
        settings,
        evaluations: used,
    })
}

/// 40 logarithmically spaced dephasing strengths in `[0.02, 3]`.
pub fn default_delta_grid() -> Vec<f64> {
    log_grid(0.02, 3.0, 40)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `kappa` optimized independently at every grid value of a scanned
/// setting.
#[derive(Debug, Clone, Serialize)]
pub struct KappaCurve {
    pub scanned: Setting,
    pub parameter_names: [&'static str; 2],
    pub free: Vec<Setting>,
    pub grid: Vec<f64>,
    /// `NaN` for failed points.
    pub kappa_values: Vec<f64>,
    pub per_parameter: Vec<Vec<f64>>,
    pub best_settings: Vec<Vec<f64>>,
    pub failures: Vec<Option<String>>,
}

impl KappaCurve {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `delta,kappa,contrib_<p1>,contrib_<p2>,best_<setting>...` with 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut header = vec![self.scanned.name().to_string(), "kappa".to_string()];
        header.extend(self.parameter_names.iter().map(|p| format!("contrib_{p}")));
        header.extend(self.free.iter().map(|s| format!("best_{s}")));
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..self.grid.len() {
            let mut row = vec![format_f64(self.grid[i]), format_f64(self.kappa_values[i])];
            row.extend(self.per_parameter[i].iter().map(|&v| format_f64(v)));
            row.extend(self.best_settings[i].iter().map(|&v| format_f64(v)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs [`optimize_kappa`] at every value of `scanned` in `grid`.
pub fn kappa_scan(scenario: &Scenario, scanned: Setting, grid: &[f64], budget: usize) -> Result<KappaCurve> {
    if grid.is_empty() {
        return Err(invalid("scan grid is empty"));
    }
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(invalid("scan grid must be strictly monotone"));
    }
    if scenario.free.contains(&scanned) {
        return Err(invalid(format!("scanned setting '{scanned}' cannot also be free")));
    }
    let points = par::map_indexed(grid.len(), |i| optimize_kappa(scenario, &[(scanned, grid[i])], budget));
    let n = scenario.kind.parameter_names().len();
    let mut curve = KappaCurve {
        scanned,
        parameter_names: scenario.kind.parameter_names(),
        free: scenario.free.clone(),
        grid: grid.to_vec(),
        kappa_values: Vec::with_capacity(grid.len()),
        per_parameter: Vec::with_capacity(grid.len()),
        best_settings: Vec::with_capacity(grid.len()),
        failures: Vec::with_capacity(grid.len()),
    };
    for p in points {
        match p {
            Ok(opt) => {
                curve.kappa_values.push(opt.kappa());
                curve.per_parameter.push(opt.evaluation.kappa.per_parameter.clone());
                curve
                    .best_settings
                    .push(scenario.free.iter().map(|s| opt.settings[s]).collect());
                curve.failures.push(None);
            }
            Err(e) => {
                curve.kappa_values.push(f64::NAN);
                curve.per_parameter.push(vec![f64::NAN; n]);
                curve.best_settings.push(vec![f64::NAN; scenario.free.len()]);
                curve.failures.push(Some(e.to_string()));
            }
        }
    }
    Ok(curve)
}

/// Haar-distributed unitary from the QR decomposition of a complex Gaussian
/// matrix, with the phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(s * re, s * im)
    });
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DVector::from_iterator(
        dim,
        (0..dim).map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        }),
    );
    q * ComplexMatrix::from_diagonal(&phases)
}

/// Rank-1 projective measurement onto the columns of a unitary.
pub fn basis_povm(unitary: &ComplexMatrix) -> Povm {
    Povm::from_elements((0..unitary.ncols()).map(|k| {
        let col = unitary.column(k).into_owned();
        (format!("b{k}"), linalg::outer(&col))
    }))
    .expect("unitary columns")
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub trials: usize,
    pub seed: u64,
    /// `(phi_y, phi_z)` at which the measurement is assessed.
    pub at: (f64, f64),
    /// Evaluations per trial spent optimizing the input phase.
    pub budget_per_trial: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 0,
            at: (0.0, 0.0),
            budget_per_trial: 48,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub max_kappa: f64,
    pub argmax_trial: usize,
    pub argmax_xi: f64,
    /// Real and imaginary parts of the best measurement basis (columns).
    pub argmax_basis_re: Vec<Vec<f64>>,
    pub argmax_basis_im: Vec<Vec<f64>>,
    pub trials: usize,
    pub failed_trials: usize,
}

/// Random search over Haar-random projective measurements on two copies of
/// the two-phase probe, each combined with optimization of the shared input
/// phase. Deterministic in `options.seed`.
pub fn random_collective_search(options: SearchOptions) -> Result<SearchResult> {
    if options.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let (phi_y, phi_z) = options.at;
    let per_trial = par::map_indexed(options.trials, |t| {
        let mut rng = derived_rng(options.seed, t as u64);
        let u = haar_unitary(4, &mut rng);
        let scenario = Scenario::new(
            ProbeKind::TwoPhase,
            MeasurementSpec::Fixed(basis_povm(&u)),
            vec![Setting::Xi],
            [(Setting::PhiY, phi_y), (Setting::PhiZ, phi_z)],
        )
        .expect("static scenario");
        let r = optimize_kappa(&scenario, &[], options.budget_per_trial);
        (u, r.map(|o| (o.kappa(), o.settings[&Setting::Xi])))
    });
    let mut best: Option<(usize, f64, f64, ComplexMatrix)> = None;
    let mut failed = 0;
    for (t, (u, r)) in per_trial.into_iter().enumerate() {
        match r {
            Ok((k, xi)) => {
                if best.as_ref().is_none_or(|b| k > b.1) {
                    best = Some((t, k, xi, u));
                }
            }
            Err(_) => failed += 1,
        }
    }
    let Some((argmax_trial, max_kappa, argmax_xi, u)) = best else {
        return Ok(SearchResult {
            max_kappa: 0.0,
            argmax_trial: 0,
            argmax_xi: 0.0,
            argmax_basis_re: vec![],
            argmax_basis_im: vec![],
            trials: options.trials,
            failed_trials: failed,
        });
    };
    Ok(SearchResult {
        max_kappa,
        argmax_trial,
        argmax_xi,
        argmax_basis_re: u.row_iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
        argmax_basis_im: u.row_iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
        trials: options.trials,
        failed_trials: failed,
    })
}
