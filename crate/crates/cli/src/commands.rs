//! Command implementations.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::PathBuf;

use qmetro::fisher::{self, sld_operators, sld_residual};
use qmetro::measurement::{bell_povm, cs_gate_povm, povm_from_json, povm_to_json, validate_povm, GateModel, Povm};
use qmetro::scenario::{
    self, critical_input_phase, kappa_scan, optimize_kappa, random_collective_search, single_copy_qfi,
    single_copy_weak_commutativity, MeasurementSpec, Scenario, SearchOptions, Setting,
};
use qmetro::state::{probe_with_derivatives, ProbeFamily, ProbeKind};
use qmetro::tomography::{
    mle_reconstruct, monte_carlo_uncertainty, povm_fidelity, reference_states, simulate_counts, CountsTable, MleOptions,
};
use serde::Serialize;
use serde_json::json;
use toml::Value;

use crate::config::{Command, RunConfig};
use crate::output::Outputs;
use crate::RunError;

/// Typed access to the parameters; every value read, including defaults,
/// is recorded for the manifest.
pub struct Params<'a> {
    map: &'a BTreeMap<String, Value>,
    resolved: RefCell<BTreeMap<String, Value>>,
}

impl<'a> Params<'a> {
    pub fn new(map: &'a BTreeMap<String, Value>) -> Self {
        Self {
            map,
            resolved: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn resolved(&self) -> BTreeMap<String, Value> {
        self.resolved.borrow().clone()
    }

    fn record(&self, key: &str, v: Value) {
        self.resolved.borrow_mut().insert(key.to_string(), v);
    }

    fn opt_f64(&self, key: &str) -> Option<f64> {
        let v = match self.map.get(key)? {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            _ => return None,
        };
        self.record(key, Value::Float(v));
        Some(v)
    }

    fn f64(&self, key: &str, default: f64) -> f64 {
        self.opt_f64(key).unwrap_or_else(|| {
            self.record(key, Value::Float(default));
            default
        })
    }

    fn usize(&self, key: &str, default: usize) -> usize {
        let v = match self.map.get(key) {
            Some(Value::Integer(i)) => *i as usize,
            _ => default,
        };
        self.record(key, Value::Integer(v as i64));
        v
    }

    fn bool(&self, key: &str, default: bool) -> bool {
        let v = match self.map.get(key) {
            Some(Value::Boolean(b)) => *b,
            _ => default,
        };
        self.record(key, Value::Boolean(v));
        v
    }

    fn string(&self, key: &str, default: &str) -> String {
        let v = match self.map.get(key) {
            Some(Value::String(s)) => s.clone(),
            _ => default.to_string(),
        };
        self.record(key, Value::String(v.clone()));
        v
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        match self.map.get(key) {
            Some(Value::String(s)) => {
                self.record(key, Value::String(s.clone()));
                Some(PathBuf::from(s))
            }
            _ => None,
        }
    }

    fn settings(&self, key: &str, default: Vec<Setting>) -> Vec<Setting> {
        let v = match self.map.get(key) {
            Some(Value::Array(items)) => items
                .iter()
                .filter_map(|i| i.as_str().and_then(|s| Setting::parse(s).ok()))
                .collect(),
            _ => default,
        };
        self.record(
            key,
            Value::Array(v.iter().map(|s| Value::String(s.name().to_string())).collect()),
        );
        v
    }
}

pub struct Report {
    pub notes: Vec<String>,
    pub summary: serde_json::Value,
}

fn kind(p: &Params) -> ProbeKind {
    match p.string("family", "phase-dephasing").as_str() {
        "two-phase" => ProbeKind::TwoPhase,
        _ => ProbeKind::PhaseDephasing,
    }
}

fn parameter_values(p: &Params, kind: ProbeKind) -> [f64; 2] {
    match kind {
        ProbeKind::PhaseDephasing => [p.f64("phi", 0.0), p.f64("delta", 0.5)],
        ProbeKind::TwoPhase => [p.f64("phi_y", 0.0), p.f64("phi_z", 0.0)],
    }
}

fn read_povm(path: &PathBuf) -> Result<Povm, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(format!("reading {}: {e}", path.display())))?;
    povm_from_json(&text).map_err(|e| RunError::runtime(format!("{}: {e}", path.display())))
}

fn gate_model(p: &Params) -> GateModel {
    let ideal = GateModel::ideal();
    GateModel {
        t_h: p.f64("t_h", ideal.t_h),
        t_v: p.f64("t_v", ideal.t_v),
        visibility: p.f64("visibility", ideal.visibility),
        compensated: p.bool("compensated", ideal.compensated),
    }
}

fn measurement(p: &Params, notes: &mut Vec<String>) -> Result<MeasurementSpec, RunError> {
    Ok(match p.string("measurement", "bell").as_str() {
        "gate" => {
            let out = cs_gate_povm(&gate_model(p)).map_err(RunError::runtime)?;
            MeasurementSpec::Fixed(out.povm)
        }
        "file" => MeasurementSpec::Fixed(read_povm(&p.path("povm").expect("validated"))?),
        "product" => MeasurementSpec::ProductProjective,
        _ => {
            notes.push("ideal curve: ideal Bell-state measurement on two copies".to_string());
            MeasurementSpec::Fixed(bell_povm())
        }
    })
}

fn fixed_povm(spec: &MeasurementSpec) -> Option<&Povm> {
    match spec {
        MeasurementSpec::Fixed(p) => Some(p),
        MeasurementSpec::ProductProjective => None,
    }
}

/// Builds a scenario from the parameters; `scanned` is left out of the
/// fixed settings.
fn scenario_from(p: &Params, scanned: Option<Setting>, notes: &mut Vec<String>) -> Result<Scenario, RunError> {
    let kind = kind(p);
    let spec = measurement(p, notes)?;
    let copies = fixed_povm(&spec).map_or(2, |q| if q.dim() == 2 { 1 } else { 2 });
    let mut default_free = match (kind, copies) {
        (_, 1) => vec![Setting::Xi],
        (ProbeKind::PhaseDephasing, _) => vec![Setting::Xi1, Setting::Xi2],
        (ProbeKind::TwoPhase, _) => vec![Setting::Xi],
    };
    if matches!(spec, MeasurementSpec::ProductProjective) {
        default_free.extend([Setting::Theta1, Setting::Azimuth1, Setting::Theta2, Setting::Azimuth2]);
    }
    let free = p.settings("free", default_free);
    let (a, b) = match kind {
        ProbeKind::PhaseDephasing => (Setting::Phi, Setting::Delta),
        ProbeKind::TwoPhase => (Setting::PhiY, Setting::PhiZ),
    };
    let [va, vb] = parameter_values(p, kind);
    let mut fixed = Vec::new();
    for (s, v) in [(a, va), (b, vb)] {
        if Some(s) != scanned && !free.contains(&s) {
            fixed.push((s, v));
        }
    }
    for s in [Setting::Xi, Setting::Xi1, Setting::Xi2] {
        if !free.contains(&s) {
            if let Some(v) = p.opt_f64(s.name()) {
                fixed.push((s, v));
            }
        }
    }
    Scenario::new(kind, spec, free, fixed).map_err(RunError::runtime)
}

pub fn run(config: &RunConfig, params: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    match config.command {
        Command::Qfi => qfi(params, out),
        Command::WeakComm => weak_comm(params, out),
        Command::KappaScan => kappa_scan_cmd(params, out),
        Command::Optimize => optimize(params, out),
        Command::Tomography => tomography(config, params, out),
        Command::SimulateCounts => simulate(config, params, out),
        Command::ConjectureSearch => conjecture(config, params, out),
        Command::GateModel => gate(params, out),
    }
}

fn qfi(p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let kind = kind(p);
    let params = parameter_values(p, kind);
    let copies = p.usize("copies", 1);
    let phases = if copies == 1 {
        vec![p.f64("xi", 0.0)]
    } else {
        vec![p.f64("xi1", 0.0), p.f64("xi2", 0.0)]
    };
    let family = ProbeFamily::new(kind, phases).map_err(RunError::runtime)?;
    let swd = probe_with_derivatives(&family, &params).map_err(RunError::runtime)?;
    let slds = sld_operators(&swd, None).map_err(RunError::runtime)?;
    let h = fisher::qfi_matrix(&swd, &slds);
    let wc = fisher::weak_commutativity(&swd, &slds, 0, 1).map_err(RunError::runtime)?;
    #[derive(Serialize)]
    struct QfiOut {
        family: String,
        parameter_names: [&'static str; 2],
        parameters: [f64; 2],
        input_phases: Vec<f64>,
        qfi: Vec<Vec<f64>>,
        determinant: f64,
        weak_commutativity: f64,
        sld_residual: f64,
    }
    let o = QfiOut {
        family: kind.to_string(),
        parameter_names: kind.parameter_names(),
        parameters: params,
        input_phases: family.input_phases().to_vec(),
        qfi: h.row_iter().map(|r| r.iter().copied().collect()).collect(),
        determinant: h.determinant(),
        weak_commutativity: wc,
        sld_residual: sld_residual(&swd, &slds),
    };
    out.write_json("qfi.json", &o)?;
    Ok(Report {
        notes: vec![],
        summary: json!({ "qfi": o.qfi, "weak_commutativity": wc }),
    })
}

fn weak_comm(p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let kind = kind(p);
    let params = parameter_values(p, kind);
    let n = p.usize("xi_points", 256);
    let mut csv = String::from("xi,weak_commutativity,det_qfi\n");
    let mut max_abs = 0.0_f64;
    for i in 0..n {
        let xi = TAU * i as f64 / n as f64;
        let wc = single_copy_weak_commutativity(kind, xi, &params).map_err(RunError::runtime)?;
        let det = single_copy_qfi(kind, xi, &params)
            .map_err(RunError::runtime)?
            .determinant();
        max_abs = max_abs.max(wc.abs());
        csv.push_str(&format!(
            "{},{},{}\n",
            qmetro::measurement::format_f64(xi),
            qmetro::measurement::format_f64(wc),
            qmetro::measurement::format_f64(det)
        ));
    }
    out.write("weak_comm.csv", &csv)?;
    let critical = match kind {
        ProbeKind::TwoPhase => {
            let xi = critical_input_phase(params[0], params[1]).map_err(RunError::runtime)?;
            let det = single_copy_qfi(kind, xi, &params)
                .map_err(RunError::runtime)?
                .determinant();
            Some((xi, det))
        }
        ProbeKind::PhaseDephasing => None,
    };
    let summary = json!({
        "family": kind.to_string(),
        "parameters": params,
        "max_abs_weak_commutativity": max_abs,
        "critical_xi": critical.map(|c| c.0),
        "det_qfi_at_critical_xi": critical.map(|c| c.1),
    });
    out.write_json("weak_comm.json", &summary)?;
    Ok(Report { notes: vec![], summary })
}

fn kappa_scan_cmd(p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let mut notes = Vec::new();
    let kind = kind(p);
    let default_scan = match kind {
        ProbeKind::PhaseDephasing => "delta",
        ProbeKind::TwoPhase => "phi_y",
    };
    let scanned = Setting::parse(&p.string("scan", default_scan)).map_err(RunError::runtime)?;
    let allowed = match kind {
        ProbeKind::PhaseDephasing => [Setting::Phi, Setting::Delta],
        ProbeKind::TwoPhase => [Setting::PhiY, Setting::PhiZ],
    };
    if !allowed.contains(&scanned) {
        return Err(RunError::runtime(format!(
            "cannot scan '{scanned}' for the {kind} family"
        )));
    }
    let scenario = scenario_from(p, Some(scanned), &mut notes)?;
    let (lo, hi, n, spacing) = if scanned == Setting::Delta {
        (
            p.f64("grid_min", 0.02),
            p.f64("grid_max", 3.0),
            p.usize("grid_points", 40),
            p.string("grid_spacing", "log"),
        )
    } else {
        (
            p.f64("grid_min", -PI / 2.0),
            p.f64("grid_max", PI / 2.0),
            p.usize("grid_points", 41),
            p.string("grid_spacing", "linear"),
        )
    };
    let grid = if spacing == "log" {
        if lo <= 0.0 || hi <= 0.0 {
            return Err(RunError::runtime("a log grid needs positive grid_min and grid_max"));
        }
        scenario::log_grid(lo, hi, n)
    } else if n == 1 {
        vec![lo]
    } else {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let budget = p.usize("budget", scenario::DEFAULT_BUDGET);
    let curve = kappa_scan(&scenario, scanned, &grid, budget).map_err(RunError::runtime)?;
    out.write("curve.csv", &curve.to_csv())?;
    let failures: Vec<(f64, &String)> = curve
        .grid
        .iter()
        .zip(&curve.failures)
        .filter_map(|(g, f)| f.as_ref().map(|e| (*g, e)))
        .collect();
    for (g, e) in &failures {
        notes.push(format!("{scanned} = {g}: {e}"));
    }
    let max = curve
        .kappa_values
        .iter()
        .copied()
        .filter(|k| k.is_finite())
        .fold(f64::NAN, f64::max);
    Ok(Report {
        notes,
        summary: json!({ "points": curve.len(), "failures": failures.len(), "max_kappa": max }),
    })
}

fn optimize(p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let mut notes = Vec::new();
    let scenario = scenario_from(p, None, &mut notes)?;
    let budget = p.usize("budget", scenario::DEFAULT_BUDGET);
    let opt = optimize_kappa(&scenario, &[], budget).map_err(RunError::runtime)?;
    if opt.evaluation.fisher.singular {
        notes.push("classical Fisher information is singular at the optimum".to_string());
    }
    out.write_json("optimum.json", &opt)?;
    Ok(Report {
        notes,
        summary: json!({ "kappa": opt.kappa(), "settings": opt.settings }),
    })
}

fn read_counts(path: &PathBuf) -> Result<CountsTable, RunError> {
    let f = fs::File::open(path).map_err(|e| RunError::io(format!("reading {}: {e}", path.display())))?;
    CountsTable::read_csv(f).map_err(|e| RunError::runtime(format!("{}: {e}", path.display())))
}

fn derived_kappa(povm: Povm, values: [(Setting, f64); 4]) -> qmetro::Result<f64> {
    let s = Scenario::new(ProbeKind::PhaseDephasing, MeasurementSpec::Fixed(povm), vec![], values)?;
    Ok(s.evaluate(&s.fixed().clone())?.kappa.kappa)
}

fn tomography(config: &RunConfig, p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let counts = read_counts(&p.path("counts").expect("validated"))?;
    let refs = reference_states();
    let options = MleOptions {
        max_iters: p.usize("max_iters", MleOptions::default().max_iters),
        tol: p.f64("tol", MleOptions::default().tol),
    };
    let rec = mle_reconstruct(&counts, &refs, options).map_err(RunError::runtime)?;
    out.write("povm.json", &(povm_to_json(&rec.povm) + "\n"))?;

    let mut notes = Vec::new();
    if !rec.converged {
        notes.push(format!(
            "MLE stopped after {} iterations without converging",
            rec.iterations
        ));
    }
    if rec.floored_events > 0 {
        notes.push(format!(
            "{} events had probabilities below the floor",
            rec.floored_events
        ));
    }
    let fidelities = match p.path("ideal") {
        Some(path) => {
            let ideal = read_povm(&path)?;
            let mut f = BTreeMap::new();
            for o in ideal.outcomes() {
                let Some(el) = rec.povm.element(&o.label) else {
                    return Err(RunError::runtime(format!(
                        "reconstruction has no outcome '{}'",
                        o.label
                    )));
                };
                f.insert(
                    o.label.clone(),
                    povm_fidelity(el, &o.element).map_err(RunError::runtime)?,
                );
            }
            Some(f)
        }
        None => None,
    };

    let values = [
        (Setting::Phi, p.f64("phi", 0.0)),
        (Setting::Delta, p.f64("delta", 0.5)),
        (Setting::Xi1, p.f64("xi1", 0.4)),
        (Setting::Xi2, p.f64("xi2", 0.4)),
    ];
    let kappa = if rec.povm.dim() == 4 {
        derived_kappa(rec.povm.clone(), values).ok()
    } else {
        None
    };
    let runs = p.usize("mc_runs", 0);
    let mc = if runs >= 2 {
        let f = |table: &CountsTable| {
            let r = mle_reconstruct(table, &refs, options)?;
            derived_kappa(r.povm, values)
        };
        Some(monte_carlo_uncertainty(&counts, f, runs, config.seed).map_err(RunError::runtime)?)
    } else {
        None
    };
    let summary = json!({
        "converged": rec.converged,
        "iterations": rec.iterations,
        "log_likelihood": rec.log_likelihood,
        "floored_events": rec.floored_events,
        "validation": validate_povm(&rec.povm),
        "fidelity": fidelities,
        "kappa": kappa,
        "kappa_monte_carlo": mc,
    });
    out.write_json("tomography.json", &summary)?;
    Ok(Report { notes, summary })
}

fn simulate(config: &RunConfig, p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let mut notes = Vec::new();
    let spec = measurement(p, &mut notes)?;
    let povm = fixed_povm(&spec).expect("validated").clone();
    let exposure = p.f64("exposure", 1e5);
    let refs = reference_states();
    if povm.dim() != refs.dim() {
        return Err(RunError::runtime(format!(
            "detector acts on dimension {}, reference states on {}",
            povm.dim(),
            refs.dim()
        )));
    }
    let counts = simulate_counts(&povm, &refs, exposure, config.seed).map_err(RunError::runtime)?;
    out.write("counts.csv", &counts.to_csv_string())?;
    out.write("detector.json", &(povm_to_json(&povm) + "\n"))?;
    Ok(Report {
        notes,
        summary: json!({ "rows": counts.rows.len(), "total_counts": counts.total() }),
    })
}

fn conjecture(config: &RunConfig, p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let options = SearchOptions {
        trials: p.usize("trials", SearchOptions::default().trials),
        seed: config.seed,
        at: (p.f64("phi_y", 0.0), p.f64("phi_z", 0.0)),
        budget_per_trial: p.usize("budget_per_trial", SearchOptions::default().budget_per_trial),
    };
    let r = random_collective_search(options).map_err(RunError::runtime)?;
    out.write_json("search.json", &r)?;
    let mut notes = Vec::new();
    if r.failed_trials > 0 {
        notes.push(format!(
            "{} trials had singular Fisher information everywhere",
            r.failed_trials
        ));
    }
    Ok(Report {
        notes,
        summary: json!({ "max_kappa": r.max_kappa, "trials": r.trials, "failed_trials": r.failed_trials }),
    })
}

fn gate(p: &Params, out: &mut Outputs) -> Result<Report, RunError> {
    let model = gate_model(p);
    let g = cs_gate_povm(&model).map_err(RunError::runtime)?;
    out.write("povm.json", &(povm_to_json(&g.povm) + "\n"))?;
    let summary = json!({
        "model": model,
        "amplitudes": g.amplitudes,
        "success_probability": g.success_probability,
        "validation": validate_povm(&g.povm),
    });
    out.write_json("gate.json", &summary)?;
    Ok(Report { notes: vec![], summary })
}
