//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qmetro::fisher;
use qmetro::linalg::{self, c, ComplexMatrix};
use qmetro::measurement::{
    bell_povm, cs_gate_povm, povm_to_json, product_projective_povm, GateModel, Povm, ProductBasis,
};
use qmetro::scenario::{
    self, critical_input_phase, default_delta_grid, kappa_scan, optimize_kappa, random_collective_search,
    single_copy_qfi, single_copy_weak_commutativity, MeasurementSpec, Scenario, SearchOptions, Setting,
};
use qmetro::state::{ProbeFamily, ProbeKind};
use qmetro::tomography::{
    expected_counts, mle_reconstruct, monte_carlo_uncertainty, povm_fidelity, reference_states, simulate_counts,
    CountsTable, MleOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn qfi_closed_forms() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for delta in linspace(0.05, 3.0, 50) {
        let h = single_copy_qfi(ProbeKind::PhaseDephasing, 0.7, &[0.3, delta]).unwrap();
        let e = (-2.0 * delta * delta).exp();
        let phi = e;
        let dd = 4.0 * delta * delta * e / (1.0 - e);
        worst = worst.max(((h[(0, 0)] - phi) / phi).abs());
        worst = worst.max(((h[(1, 1)] - dd) / dd).abs());
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-6 && t < Duration::from_secs(1),
        format!("max relative error {worst:.2e}, {}", secs(t)),
    )
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn weak_commutativity() -> Outcome {
    let start = Instant::now();
    let mut worst_dephasing = 0.0_f64;
    for phi in linspace(0.0, TAU, 10) {
        for delta in linspace(0.05, 3.0, 10) {
            for xi in linspace(0.0, TAU, 10) {
                let v = single_copy_weak_commutativity(ProbeKind::PhaseDephasing, xi, &[phi, delta]).unwrap();
                worst_dephasing = worst_dephasing.max(v.abs());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut smallest_generic = f64::INFINITY;
    let mut accepted = 0;
    while accepted < 100 {
        let py = rng.random_range(-1.0..1.0);
        let pz = rng.random_range(-1.0..1.0);
        let xi = rng.random_range(0.0..TAU);
        let root = critical_input_phase(py, pz).unwrap();
        if circular_distance(xi, root) < 0.2 || circular_distance(xi, root + PI) < 0.2 {
            continue;
        }
        let v = single_copy_weak_commutativity(ProbeKind::TwoPhase, xi, &[py, pz]).unwrap();
        smallest_generic = smallest_generic.min(v.abs());
        accepted += 1;
    }

    let mut worst_det = 0.0_f64;
    for &(py, pz) in &[(0.0, 0.0), (0.3, -0.2), (-0.7, 0.4), (1.1, 0.9)] {
        let root = critical_input_phase(py, pz).unwrap();
        let h = single_copy_qfi(ProbeKind::TwoPhase, root, &[py, pz]).unwrap();
        worst_det = worst_det.max(h.determinant().abs());
    }
    let t = start.elapsed();
    outcome(
        worst_dephasing < 1e-8 && smallest_generic > 1e-3 && worst_det < 1e-8 && t < Duration::from_secs(5),
        format!(
            "dephasing max {worst_dephasing:.2e}, two-phase generic min {smallest_generic:.2e}, det H at root max {worst_det:.2e}, {}",
            secs(t)
        ),
    )
}

fn random_product_basis(rng: &mut ChaCha8Rng) -> ProductBasis {
    let mut polar = || (1.0 - 2.0 * rng.random::<f64>()).acos();
    let theta1 = polar();
    let theta2 = polar();
    ProductBasis {
        theta1,
        azimuth1: rng.random_range(0.0..TAU),
        theta2,
        azimuth2: rng.random_range(0.0..TAU),
    }
}

fn single_copy_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = Vec::new();
    for kind in [ProbeKind::PhaseDephasing, ProbeKind::TwoPhase] {
        for _ in 0..1000 {
            let basis = random_product_basis(&mut rng);
            let fixed = match kind {
                ProbeKind::PhaseDephasing => [
                    (Setting::Phi, rng.random_range(0.0..TAU)),
                    (Setting::Delta, rng.random_range(0.05..2.0)),
                ],
                ProbeKind::TwoPhase => [
                    (Setting::PhiY, rng.random_range(-1.0..1.0)),
                    (Setting::PhiZ, rng.random_range(-1.0..1.0)),
                ],
            };
            cases.push((kind, basis, fixed));
        }
    }
    let results: Vec<(ProbeKind, Option<f64>)> = cases
        .iter()
        .map(|(kind, basis, fixed)| {
            // two-phase probes share their input phase
            let inputs = match kind {
                ProbeKind::PhaseDephasing => vec![Setting::Xi1, Setting::Xi2],
                ProbeKind::TwoPhase => vec![Setting::Xi],
            };
            let s = Scenario::new(
                *kind,
                MeasurementSpec::Fixed(product_projective_povm(*basis)),
                inputs,
                fixed.iter().copied(),
            )
            .unwrap();
            (*kind, optimize_kappa(&s, &[], 200).ok().map(|o| o.kappa()))
        })
        .collect();
    let mut max = BTreeMap::new();
    let mut failed = 0;
    for (kind, k) in results {
        match k {
            Some(k) => {
                let e = max.entry(kind.to_string()).or_insert(f64::NEG_INFINITY);
                *e = f64::max(*e, k);
            }
            None => failed += 1,
        }
    }
    let overall = max.values().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        overall <= 1.0 + 1e-9 && max.len() == 2,
        format!("max kappa {max:?}, {failed} singular/failed, {}", secs(start.elapsed())),
    )
}

fn bell_advantage() -> Outcome {
    let start = Instant::now();
    let s = Scenario::phase_dephasing_two_copy(bell_povm()).unwrap();
    let curve = kappa_scan(&s, Setting::Delta, &default_delta_grid(), scenario::DEFAULT_BUDGET).unwrap();
    let failures = curve.failures.iter().filter(|f| f.is_some()).count();
    let max_all = curve.kappa_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_window = curve
        .grid
        .iter()
        .zip(&curve.kappa_values)
        .filter(|(d, _)| (0.2..=1.5).contains(*d))
        .map(|(_, k)| *k)
        .fold(f64::NEG_INFINITY, f64::max);
    let t = start.elapsed();
    outcome(
        failures == 0 && max_window > 1.05 && max_all <= 1.5 + 1e-6 && t < Duration::from_secs(60),
        format!(
            "max kappa in [0.2, 1.5] {max_window:.6}, overall {max_all:.9}, {failures} failures, {}",
            secs(t)
        ),
    )
}

fn collective_search() -> Outcome {
    let start = Instant::now();
    let r = random_collective_search(SearchOptions {
        trials: 10_000,
        seed: 5,
        ..SearchOptions::default()
    })
    .unwrap();
    let t = start.elapsed();
    outcome(
        r.max_kappa <= 1.0 + 1e-6 && r.failed_trials < r.trials && t < Duration::from_secs(600),
        format!(
            "max kappa {:.12} (trial {}), {} failed trials, {}",
            r.max_kappa,
            r.argmax_trial,
            r.failed_trials,
            secs(t)
        ),
    )
}

fn optimized_kappa_at(povm: Povm, delta: f64) -> f64 {
    let s = Scenario::phase_dephasing_two_copy(povm).unwrap();
    optimize_kappa(&s, &[(Setting::Delta, delta)], scenario::DEFAULT_BUDGET)
        .unwrap()
        .kappa()
}

fn gate_model() -> Outcome {
    let ideal = cs_gate_povm(&GateModel::ideal()).unwrap();
    let bell = bell_povm();
    let diff = bell
        .outcomes()
        .iter()
        .map(|o| linalg::max_abs_diff(ideal.povm.element(&o.label).unwrap(), &o.element))
        .fold(0.0, f64::max);
    let success = ideal
        .success_probability
        .iter()
        .map(|p| (p - 1.0 / 9.0).abs())
        .fold(0.0, f64::max);
    let noisy = cs_gate_povm(&GateModel::ideal().with_visibility(0.9)).unwrap();
    let k_ideal = optimized_kappa_at(bell, 0.05);
    let k_noisy = optimized_kappa_at(noisy.povm, 0.05);
    outcome(
        diff < 1e-10 && success < 1e-12 && k_ideal - k_noisy >= 0.1,
        format!(
            "ideal gate vs Bell {diff:.2e}, success deviation {success:.2e}, kappa(0.05) ideal {k_ideal:.4} vs v=0.9 {k_noisy:.4}"
        ),
    )
}

fn random_povm(rng: &mut ChaCha8Rng, dim: usize, outcomes: usize) -> Povm {
    let mats: Vec<ComplexMatrix> = (0..outcomes)
        .map(|_| {
            let a = ComplexMatrix::from_fn(dim, dim, |_, _| {
                c(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                )
            });
            &a * a.adjoint()
        })
        .collect();
    let s = mats.iter().fold(ComplexMatrix::zeros(dim, dim), |acc, m| acc + m);
    let w = linalg::inverse_sqrt(&s).unwrap();
    Povm::from_elements(
        mats.iter()
            .enumerate()
            .map(|(k, m)| (format!("o{k}"), linalg::hermitian_part(&(&w * m * &w)))),
    )
    .unwrap()
}

fn is_monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0])
}

fn tomography_round_trip() -> Outcome {
    let start = Instant::now();
    let refs = reference_states();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_distance = 0.0_f64;
    let mut monotone = true;
    let mut fidelities = Vec::new();
    for trial in 0..10 {
        let truth = random_povm(&mut rng, 4, 4);
        let exact = expected_counts(&truth, &refs, 1e9).unwrap();
        let rec = mle_reconstruct(
            &exact,
            &refs,
            MleOptions {
                max_iters: 20_000,
                tol: 1e-14,
            },
        )
        .unwrap();
        monotone &= is_monotone(&rec.log_likelihood_trace);
        for o in truth.outcomes() {
            let d = linalg::trace_distance(rec.povm.element(&o.label).unwrap(), &o.element);
            worst_distance = worst_distance.max(d);
        }

        let noisy = simulate_counts(&truth, &refs, 1e5, 100 + trial).unwrap();
        let rec = mle_reconstruct(&noisy, &refs, MleOptions::default()).unwrap();
        monotone &= is_monotone(&rec.log_likelihood_trace);
        for o in truth.outcomes() {
            fidelities.push(povm_fidelity(rec.povm.element(&o.label).unwrap(), &o.element).unwrap());
        }
    }
    let mean_fid = fidelities.iter().sum::<f64>() / fidelities.len() as f64;
    let t = start.elapsed();
    outcome(
        worst_distance < 1e-3 && mean_fid > 0.99 && monotone && t < Duration::from_secs(120),
        format!(
            "max trace distance {worst_distance:.2e}, mean fidelity {mean_fid:.5}, monotone {monotone}, {}",
            secs(t)
        ),
    )
}

fn derived_kappa(counts: &CountsTable) -> qmetro::Result<f64> {
    let refs = reference_states();
    let rec = mle_reconstruct(counts, &refs, MleOptions::default())?;
    let s = Scenario::new(
        ProbeKind::PhaseDephasing,
        MeasurementSpec::Fixed(rec.povm),
        vec![],
        [
            (Setting::Phi, 0.0),
            (Setting::Delta, 0.5),
            (Setting::Xi1, 0.4),
            (Setting::Xi2, 0.4),
        ],
    )?;
    Ok(s.evaluate(&s.fixed().clone())?.kappa.kappa)
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let refs = reference_states();
    let detector = cs_gate_povm(&GateModel::ideal().with_visibility(0.9)).unwrap().povm;
    let mut stds = Vec::new();
    let mut reproducible = true;
    for exposure in [1e4, 1e6] {
        let counts = simulate_counts(&detector, &refs, exposure, 11).unwrap();
        let a = monte_carlo_uncertainty(&counts, derived_kappa, 100, 13).unwrap();
        let b = monte_carlo_uncertainty(&counts, derived_kappa, 100, 13).unwrap();
        reproducible &= a.mean.to_bits() == b.mean.to_bits() && a.std.to_bits() == b.std.to_bits();
        stds.push(a.std);
    }
    let ratio = stds[0] / stds[1];
    outcome(
        reproducible && (5.0..=20.0).contains(&ratio),
        format!(
            "std {:.3e} at 1e4, {:.3e} at 1e6, ratio {ratio:.2} (expected 10), bit-identical {reproducible}, {}",
            stds[0],
            stds[1],
            secs(start.elapsed())
        ),
    )
}

fn artifacts(seed: u64) -> Vec<String> {
    let refs = reference_states();
    let gate = cs_gate_povm(&GateModel::ideal().with_visibility(0.95)).unwrap();
    let counts = simulate_counts(&gate.povm, &refs, 1e4, seed).unwrap();
    let s = Scenario::phase_dephasing_two_copy(gate.povm.clone()).unwrap();
    let curve = kappa_scan(&s, Setting::Delta, &scenario::log_grid(0.05, 2.0, 6), 300).unwrap();
    let search = random_collective_search(SearchOptions {
        trials: 64,
        seed,
        ..SearchOptions::default()
    })
    .unwrap();
    let mc = monte_carlo_uncertainty(&counts, derived_kappa, 20, seed).unwrap();
    let family = ProbeFamily::identical(ProbeKind::TwoPhase, 0.4, 1).unwrap();
    let swd = family.single_copy(0.4, &[0.2, -0.3]).unwrap();
    let h = fisher::quantum_fisher(&swd).unwrap();
    vec![
        povm_to_json(&gate.povm),
        counts.to_csv_string(),
        curve.to_csv(),
        serde_json::to_string(&search).unwrap(),
        serde_json::to_string(&mc).unwrap(),
        format!("{h:?}"),
    ]
}

fn determinism() -> Outcome {
    let a = artifacts(21);
    let b = artifacts(21);
    let same = a == b;
    let c = artifacts(22);
    outcome(same && a != c, format!("{} artifacts byte-identical {same}", a.len()))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("QFI closed forms", qfi_closed_forms),
        ("weak commutativity", weak_commutativity),
        ("single-copy bound", single_copy_bound),
        ("two-copy Bell advantage", bell_advantage),
        ("two-phase collective search", collective_search),
        ("gate model", gate_model),
        ("detector tomography round trip", tomography_round_trip),
        ("Monte Carlo uncertainty", monte_carlo),
        ("end-to-end determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let o = run();
        println!(
            "criterion {n} ({name}): {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
