//! WebAssembly bindings behind `www/index.html`. Every export takes a small
//! explicit instance: a value per solution, prior weights per solution and
//! the index of the welfare mechanism's output.

use fwi_core::oracle::{build_p_opt, run_repeated, smix_lower_bound, v_p_opt, OracleInstance};
use fwi_core::{expected_value, seed, simple_mix_distribution, trim_weights, tv_distance, Algorithm, Distribution};
use fwi_core::{SolutionId, TabularValue};
use wasm_bindgen::prelude::*;

fn instance(values: &[f64], prior: &[f64], mechanism: usize, lambda: f64) -> Result<OracleInstance, String> {
    if values.len() != prior.len() {
        return Err(format!("{} values but {} prior weights", values.len(), prior.len()));
    }
    let values = TabularValue::new(values.to_vec()).map_err(|e| e.to_string())?;
    let prior = Distribution::from_weights(prior.iter().enumerate().map(|(i, w)| (SolutionId(i), *w)))
        .map_err(|e| e.to_string())?;
    OracleInstance::new(values, prior, SolutionId(mechanism), lambda, 0.0).map_err(|e| e.to_string())
}

fn grid(points: usize) -> impl Iterator<Item = f64> {
    let points = points.max(2);
    (0..points).map(move |k| k as f64 / (points - 1) as f64)
}

/// Exact curves over `points` evenly spaced alphas in `[0, 1]`, flattened
/// as `[alpha, V(Simple-Mix), V(optimal fair), guaranteed]` per alpha.
pub fn welfare_curve(values: &[f64], prior: &[f64], mechanism: usize, lambda: f64, points: usize) -> Result<Vec<f64>, String> {
    let inst = instance(values, prior, mechanism, lambda)?;
    let mut out = Vec::new();
    for alpha in grid(points) {
        let ps = simple_mix_distribution(inst.prior(), &inst.mechanism_output(), alpha).map_err(|e| e.to_string())?;
        let opt = v_p_opt(&build_p_opt(inst.prior(), inst.values(), alpha).map_err(|e| e.to_string())?, inst.values());
        out.extend([alpha, expected_value(&ps, inst.values()), opt, smix_lower_bound(lambda, alpha) * opt]);
    }
    Ok(out)
}

/// Monte Carlo epsilon-Mix over `points` alphas in `[0, 1)`, flattened as
/// `[alpha, mean welfare, TV to the prior]` per alpha.
pub fn epsilon_mix_curve(
    values: &[f64],
    prior: &[f64],
    mechanism: usize,
    epsilon: f64,
    runs: u32,
    seed_value: u64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let inst = instance(values, prior, mechanism, 1.0)?;
    let mut out = Vec::new();
    for (k, alpha) in grid(points + 1).take(points.max(1)).enumerate() {
        let fwi = inst.with_alpha(alpha).map_err(|e| e.to_string())?.to_fwi();
        let mut rng = seed::stream(seed_value, &[k as u64]);
        let law = run_repeated(Algorithm::EpsilonMix { epsilon, samples: None }, &fwi, u64::from(runs.max(1)), &mut rng)
            .map_err(|e| e.to_string())?;
        out.extend([alpha, law.mean(inst.values()), tv_distance(&law.to_distribution(), inst.prior())]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = welfareCurve)]
pub fn welfare_curve_js(values: &[f64], prior: &[f64], mechanism: usize, lambda: f64, points: usize) -> Result<Vec<f64>, JsError> {
    welfare_curve(values, prior, mechanism, lambda, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = epsilonMixCurve)]
pub fn epsilon_mix_curve_js(
    values: &[f64],
    prior: &[f64],
    mechanism: usize,
    epsilon: f64,
    runs: u32,
    seed: u32,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    epsilon_mix_curve(values, prior, mechanism, epsilon, runs, u64::from(seed), points).map_err(|e| JsError::new(&e))
}

/// Per-sample weights epsilon-Mix uses after trimming `alpha * s` mass.
#[wasm_bindgen(js_name = trimmedWeights)]
pub fn trimmed_weights(samples: usize, alpha: f64) -> Vec<f64> {
    trim_weights(samples, alpha.clamp(0.0, 1.0)).to_vec()
}
