//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every exported function is a thin wrapper over a plain Rust function in
//! [`demo`], which is what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js(e: gptt_audit::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `κ(z)` at `n` evenly spaced points of `[z_min, z_max]`.
#[wasm_bindgen(js_name = kappaCurve)]
pub fn kappa_curve(epsilon2: f64, z_min: f64, z_max: f64, n: u32) -> Result<Vec<f64>, JsError> {
    demo::kappa_curve(epsilon2, z_min, z_max, n as usize).map_err(js)
}

/// Quadrature log-ratio `ln V - ln V'` for each copy count in `copies`.
#[wasm_bindgen(js_name = violationCurve)]
pub fn violation_curve(epsilon1: f64, epsilon2: f64, copies: Vec<u32>) -> Result<Vec<f64>, JsError> {
    let copies: Vec<usize> = copies.into_iter().map(|t| t as usize).collect();
    demo::violation_curve(epsilon1, epsilon2, &copies).map_err(js)
}

/// `[P_D, P_D', frequency on D, frequency on D']` for the two-query
/// counterexample with `ε₂ = ∞`.
#[wasm_bindgen(js_name = hardViolation)]
pub fn hard_violation(epsilon1: f64, n_runs: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    demo::hard_violation(epsilon1, n_runs as u64, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub struct Reconstruction {
    inner: demo::ReconstructionView,
}

#[wasm_bindgen]
impl Reconstruction {
    #[wasm_bindgen(getter)]
    pub fn guesses(&self) -> Vec<u32> {
        self.inner.guesses.clone()
    }

    /// Block index of every cell, smallest counts first.
    #[wasm_bindgen(getter)]
    pub fn blocks(&self) -> Vec<u32> {
        self.inner.block_of.clone()
    }

    #[wasm_bindgen(getter, js_name = blockCount)]
    pub fn block_count(&self) -> u32 {
        self.inner.n_blocks
    }

    #[wasm_bindgen(getter, js_name = noisyThreshold)]
    pub fn noisy_threshold(&self) -> f64 {
        self.inner.noisy_threshold
    }

    #[wasm_bindgen(getter)]
    pub fn accuracy(&self) -> f64 {
        self.inner.overall_accuracy
    }
}

/// Runs the partition attack and the reconstruction on `counts`.
#[wasm_bindgen]
pub fn reconstruct(counts: Vec<u32>, epsilon: f64, delta: f64, split: f64, seed: u32) -> Result<Reconstruction, JsError> {
    let inner = demo::reconstruct(&counts, epsilon, delta, split, seed as u64).map_err(js)?;
    Ok(Reconstruction { inner })
}

/// Zipf-distributed counts, for seeding the explorer.
#[wasm_bindgen(js_name = zipfCounts)]
pub fn zipf_counts(domain: u32, total: u32, exponent: f64, seed: u32) -> Result<Vec<u32>, JsError> {
    demo::zipf_counts(domain as usize, total as u64, exponent, seed as u64).map_err(js)
}
