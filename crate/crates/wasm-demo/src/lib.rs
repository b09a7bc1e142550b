//! Browser bindings for the qmetro workbench. Every function returns a
//! JSON string; failures come back as `{"error": "..."}`.

use std::f64::consts::TAU;

use qmetro::measurement::{bell_povm, cs_gate_povm, povm_to_json, validate_povm, GateModel, Povm};
use qmetro::scenario::{
    critical_input_phase, kappa_scan, log_grid, single_copy_qfi, single_copy_weak_commutativity, Scenario, Setting,
};
use qmetro::state::ProbeKind;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const BROWSER_BUDGET: usize = 300;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn gate(t_h: f64, t_v: f64, visibility: f64, compensated: bool) -> Result<qmetro::measurement::GateOutput, String> {
    cs_gate_povm(&GateModel {
        t_h,
        t_v,
        visibility,
        compensated,
    })
    .map_err(|e| e.to_string())
}

fn curve(povm: Povm, grid: &[f64]) -> Result<Vec<f64>, String> {
    let s = Scenario::phase_dephasing_two_copy(povm).map_err(|e| e.to_string())?;
    let c = kappa_scan(&s, Setting::Delta, grid, BROWSER_BUDGET).map_err(|e| e.to_string())?;
    Ok(c.kappa_values)
}

/// Optimized `kappa(delta)` for the ideal Bell measurement and for the
/// post-selected gate at the given visibility, on `points` log-spaced
/// dephasing strengths in `[0.02, 3]`.
#[wasm_bindgen]
pub fn kappa_curves(visibility: f64, t_v: f64, points: usize) -> String {
    respond((|| {
        if !(2..=200).contains(&points) {
            return Err("points must be between 2 and 200".to_string());
        }
        let grid = log_grid(0.02, 3.0, points);
        let g = gate(1.0, t_v, visibility, true)?;
        let ideal = curve(bell_povm(), &grid)?;
        let noisy = curve(g.povm, &grid)?;
        Ok(json!({ "delta": grid, "ideal": ideal, "gate": noisy }))
    })())
}

/// Weak-commutativity value and QFI determinant of the single-copy
/// two-phase probe as the input phase runs over `[0, 2 pi)`.
#[wasm_bindgen]
pub fn weak_commutativity_profile(phi_y: f64, phi_z: f64, points: usize) -> String {
    respond((|| {
        if !(8..=2000).contains(&points) {
            return Err("points must be between 8 and 2000".to_string());
        }
        let params = [phi_y, phi_z];
        let mut xi = Vec::with_capacity(points);
        let mut value = Vec::with_capacity(points);
        let mut det = Vec::with_capacity(points);
        for i in 0..points {
            let x = TAU * i as f64 / points as f64;
            xi.push(x);
            value.push(single_copy_weak_commutativity(ProbeKind::TwoPhase, x, &params).map_err(|e| e.to_string())?);
            det.push(
                single_copy_qfi(ProbeKind::TwoPhase, x, &params)
                    .map_err(|e| e.to_string())?
                    .determinant(),
            );
        }
        let critical = critical_input_phase(phi_y, phi_z).ok();
        Ok(json!({ "xi": xi, "value": value, "det_qfi": det, "critical_xi": critical }))
    })())
}

/// Conditional POVM of the post-selected controlled-sign analyzer.
#[wasm_bindgen]
pub fn gate_povm(t_h: f64, t_v: f64, visibility: f64, compensated: bool) -> String {
    respond((|| {
        let g = gate(t_h, t_v, visibility, compensated)?;
        let povm: Value = serde_json::from_str(&povm_to_json(&g.povm)).map_err(|e| e.to_string())?;
        Ok(json!({
            "povm": povm,
            "success_probability": g.success_probability,
            "amplitudes": g.amplitudes,
            "valid": validate_povm(&g.povm).passed,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn curves_show_visibility_drop() {
        let v = parse(&kappa_curves(0.9, 1.0 / 3f64.sqrt(), 12));
        let ideal = v["ideal"].as_array().unwrap();
        let gate = v["gate"].as_array().unwrap();
        assert_eq!(ideal.len(), 12);
        let i0 = ideal[0].as_f64().unwrap();
        assert!(i0 > 1.45 && i0 <= 1.5 + 1e-6);
        assert!(i0 - gate[0].as_f64().unwrap() > 0.1);
    }

    #[test]
    fn profile_has_a_root() {
        let v = parse(&weak_commutativity_profile(0.3, -0.2, 64));
        assert_eq!(v["value"].as_array().unwrap().len(), 64);
        assert!(v["critical_xi"].as_f64().is_some());
    }

    #[test]
    fn gate_and_errors() {
        let v = parse(&gate_povm(1.0, 1.0 / 3f64.sqrt(), 1.0, true));
        assert_eq!(v["valid"], true);
        assert!((v["success_probability"][0].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-12);
        assert!(parse(&gate_povm(1.0, 0.5, 1.4, true))["error"].is_string());
        assert!(parse(&kappa_curves(0.9, 0.5, 1))["error"].is_string());
    }
}
