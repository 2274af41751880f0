//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain function in this crate so the
//! numbers can be checked natively.

use fqesr_core::config::RunConfig;
use fqesr_core::qubit::{qubit_freq, sensitivity, spins_per_flux, switching_probability, QubitParams};
use fqesr_core::spinsys::{crystal_transitions, linear_grid, FieldVector, FrequencyWindow};
use wasm_bindgen::prelude::*;

/// Direction in the D1-D2 plane, `angle_deg` measured from D2 toward D1.
pub fn field_direction(angle_deg: f64) -> [f64; 3] {
    let a = angle_deg.to_radians();
    [a.sin(), a.cos(), 0.0]
}

/// Transition lines of a built-in crystal over a field sweep, flattened as
/// `[B_mT, f_GHz, intensity, ...]`. The drive is along D1.
pub fn line_diagram(
    fixture: &str,
    b_max_mt: f64,
    angle_deg: f64,
    t_mk: f64,
    f_max_ghz: f64,
    steps: usize,
) -> Result<Vec<f64>, String> {
    let cfg = RunConfig::from_toml(&format!("[crystal]\nfixture = {fixture:?}\n"))
        .map_err(|e| e.to_string())?;
    let crystal = cfg.crystal().map_err(|e| e.to_string())?;
    let window = FrequencyWindow::new(0.0, f_max_ghz * 1e9).map_err(|e| e.to_string())?;
    if t_mk.is_nan() || t_mk <= 0.0 {
        return Err(format!("temperature must be > 0 mK, got {t_mk}"));
    }
    let mut out = Vec::new();
    for b_mt in linear_grid(b_max_mt / steps.max(1) as f64, b_max_mt, steps) {
        let field = FieldVector::new(b_mt * 1e-3, field_direction(angle_deg))
            .map_err(|e| e.to_string())?;
        let lists = crystal_transitions(&crystal, &field, t_mk * 1e-3, [1.0, 0.0, 0.0], window)
            .map_err(|e| e.to_string())?;
        for t in lists.iter().flat_map(|l| &l.entries) {
            out.extend([b_mt, t.frequency * 1e-9, t.intensity]);
        }
    }
    Ok(out)
}

fn qubit(delta_ghz: f64, ip_na: f64, gamma_mhz: f64, v: f64) -> Result<QubitParams, String> {
    QubitParams::new(delta_ghz * 1e9, ip_na * 1e-9, 0.0, gamma_mhz * 1e6, v, 1.0 - v)
        .map_err(|e| e.to_string())
}

/// Switching probability on a flux x drive-frequency grid, row-major with one
/// row per drive frequency. Flux is measured from the symmetry point in mΦ₀.
#[allow(clippy::too_many_arguments)]
pub fn switching_map(
    delta_ghz: f64,
    ip_na: f64,
    gamma_mhz: f64,
    v: f64,
    span_mphi0: f64,
    f_min_ghz: f64,
    f_max_ghz: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, String> {
    let q = qubit(delta_ghz, ip_na, gamma_mhz, v)?;
    let fluxes = linear_grid(-span_mphi0 / 2.0, span_mphi0 / 2.0, nx);
    let fq: Vec<f64> = fluxes.iter().map(|p| qubit_freq(&q, 0.5 + p * 1e-3)).collect();
    let mut out = Vec::with_capacity(nx * ny);
    for f in linear_grid(f_max_ghz * 1e9, f_min_ghz * 1e9, ny) {
        out.extend(fq.iter().map(|&fq| switching_probability(&q, f, fq)));
    }
    Ok(out)
}

/// Minimum detectable spin number at optimal bias.
pub fn min_spins(
    dp_sw: f64,
    delta_ghz: f64,
    ip_na: f64,
    gamma_mhz: f64,
    v: f64,
    n_spins: f64,
    phi_s: f64,
) -> Result<f64, String> {
    let q = qubit(delta_ghz, ip_na, gamma_mhz, v)?;
    if phi_s.is_nan() || phi_s <= 0.0 {
        return Err(format!("Phi_s must be > 0, got {phi_s}"));
    }
    Ok(sensitivity(dp_sw, &q, spins_per_flux(n_spins, phi_s)).n_min)
}

#[wasm_bindgen(js_name = lineDiagram)]
pub fn line_diagram_js(
    fixture: &str,
    b_max_mt: f64,
    angle_deg: f64,
    t_mk: f64,
    f_max_ghz: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    line_diagram(fixture, b_max_mt, angle_deg, t_mk, f_max_ghz, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = switchingMap)]
#[allow(clippy::too_many_arguments)]
pub fn switching_map_js(
    delta_ghz: f64,
    ip_na: f64,
    gamma_mhz: f64,
    v: f64,
    span_mphi0: f64,
    f_min_ghz: f64,
    f_max_ghz: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, JsError> {
    switching_map(delta_ghz, ip_na, gamma_mhz, v, span_mphi0, f_min_ghz, f_max_ghz, nx, ny)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = minSpins)]
pub fn min_spins_js(
    dp_sw: f64,
    delta_ghz: f64,
    ip_na: f64,
    gamma_mhz: f64,
    v: f64,
    n_spins: f64,
    phi_s: f64,
) -> Result<f64, JsError> {
    min_spins(dp_sw, delta_ghz, ip_na, gamma_mhz, v, n_spins, phi_s).map_err(|e| JsError::new(&e))
}
