//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors come back as `{"error": ...}`
//! so the page never has to catch a JS exception.

use qclimit::harness::{state_convergence, SweepPlan};
use qclimit::lorentz::{inverse_k_weak_norm, inverse_k_weak_norm_exact};
use qclimit::operators::form_eigenpairs;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Weak L^{3,inf} quasinorm of 1/|k| on the unit ball, sampled on an n^3 grid.
#[wasm_bindgen]
pub fn weak_norm(n: u32) -> String {
    respond((|| {
        if !(4..=96).contains(&n) {
            return Err(format!("grid size {n} outside 4..=96"));
        }
        let value = inverse_k_weak_norm(n as usize).map_err(|e| e.to_string())?;
        let exact = inverse_k_weak_norm_exact();
        Ok(json!({ "n": n, "value": value, "exact": exact, "relative_error": (value - exact).abs() / exact }))
    })())
}

/// One-dimensional Nelson plan around a Gaussian field profile.
pub fn demo_plan(excited: bool, amplitude: [f64; 2], width: f64, start: f64, points: usize, strength: f64) -> Result<SweepPlan, String> {
    if !(width > 0.0 && start > 0.0 && (2..=8).contains(&points) && strength >= 0.0) {
        return Err("need width > 0, eps > 0, 2..=8 points, strength >= 0".into());
    }
    let profile = json!([{ "amplitude": amplitude, "center": [0.0, 0.0, 0.0], "width": width }]);
    let family = if excited {
        json!({ "kind": "excited_coherent", "z0": profile, "g": [{ "amplitude": [0.4, -0.3], "center": [0.0, 0.0, 0.0], "width": width }] })
    } else {
        json!({ "kind": "coherent", "z0": profile })
    };
    let plan = json!({
        "epsilons": (0..points).map(|i| start * 0.5f64.powi(i as i32)).collect::<Vec<_>>(),
        "family": family,
        "basis": { "kind": "lattice", "dim": 1, "box_len": 16.0, "max_index": 5, "polarized": false },
        "coupling": { "kind": "nelson_scalar", "chi": { "kind": "one" }, "dispersion": { "kind": "massive", "mass": 1.0 } },
        "grid": { "dim": 1, "n": 64, "len": 16.0 },
        "u": { "kind": "harmonic", "strength": strength },
        "corpus": { "seed": 7, "count": 2 },
    });
    let plan: SweepPlan = serde_json::from_value(plan).map_err(|e| e.to_string())?;
    plan.validate().map_err(|e| e.to_string())?;
    Ok(plan)
}

/// Weyl-operator and moment errors along a halving eps sweep.
#[wasm_bindgen]
pub fn weyl_sweep(excited: bool, re: f64, im: f64, width: f64, start: f64, points: u32) -> String {
    respond((|| {
        let plan = demo_plan(excited, [re, im], width, start, points as usize, 1.0)?;
        let rep = state_convergence(&plan).map_err(|e| e.to_string())?;
        serde_json::to_value(&rep).map_err(|e| e.to_string())
    })())
}

/// Lowest eigenvalues of the effective particle operator at `eps` and in the limit.
#[wasm_bindgen]
pub fn spectrum(excited: bool, re: f64, im: f64, eps: f64, strength: f64, count: u32) -> String {
    respond((|| {
        if !(1..=8).contains(&count) {
            return Err("count must be in 1..=8".into());
        }
        let plan = demo_plan(excited, [re, im], 0.8, eps, 2, strength)?;
        let setup = plan.setup().map_err(|e| e.to_string())?;
        let levels = |f| -> Result<Vec<f64>, String> {
            let form = setup.form(&f).map_err(|e| e.to_string())?;
            Ok(form_eigenpairs(&form, count as usize).map_err(|e| e.to_string())?.iter().map(|p| p.value).collect())
        };
        let at_eps = levels(setup.fields_eps(eps).map_err(|e| e.to_string())?)?;
        let limit = levels(setup.fields_mu().map_err(|e| e.to_string())?)?;
        Ok(json!({ "epsilon": eps, "at_epsilon": at_eps, "limit": limit }))
    })())
}
