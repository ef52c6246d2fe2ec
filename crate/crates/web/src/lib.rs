//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string. The plain functions in [`api`] do the
//! work and are what the native tests call.

use wasm_bindgen::prelude::*;

pub mod api;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// MTTDL and nines of an `(m + c, m)` array.
#[wasm_bindgen]
pub fn nines(m: usize, c: usize, lambda: f64, mu: f64, horizon: f64) -> Result<String, JsError> {
    js(api::nines(m, c, lambda, mu, horizon))
}

/// `R(t)` at `points` evenly spaced times in `[0, horizon]`.
#[wasm_bindgen]
pub fn reliability_curve(
    m: usize,
    c: usize,
    lambda: f64,
    mu: f64,
    horizon: f64,
    points: usize,
) -> Result<String, JsError> {
    js(api::reliability_curve(m, c, lambda, mu, horizon, points))
}

/// Bounds on the mean time to unavailability of a cold-storage array.
#[wasm_bindgen]
pub fn cold_bounds(n: usize, k: usize, lambda: f64, mu: f64, theta: f64) -> Result<String, JsError> {
    js(api::cold_bounds(n, k, lambda, mu, theta))
}
