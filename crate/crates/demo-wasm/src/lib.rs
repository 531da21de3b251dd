//! Browser bindings for the channel library.
//!
//! Each export has a plain counterpart returning `Result<_, String>` so the
//! logic can be tested natively; the wasm wrappers only convert errors.

use iokraus::channel::{BlochVector, QubitChannel};
use iokraus::classify::{self, GALLERY_NAMES};
use iokraus::decompose::{self, DECOMPOSE_TOL};
use iokraus::sampler::{self, SamplerConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest region the page may request in one call.
pub const MAX_REGION_COUNT: usize = 200_000;

fn channel_from(text: &str) -> Result<QubitChannel, String> {
    QubitChannel::from_json_str(text).map_err(|e| e.to_string())
}

/// Names accepted by [`gallery_json`], as a JSON array.
pub fn gallery_names_json() -> String {
    json!(GALLERY_NAMES).to_string()
}

/// Channel file for a gallery entry, pretty-printed for editing.
pub fn gallery_json(name: &str) -> Result<String, String> {
    let ch = classify::gallery(name).map_err(|e| e.to_string())?;
    serde_json::to_string_pretty(&ch.to_json()).map_err(|e| e.to_string())
}

/// Classification report of a channel file.
pub fn classify_json(channel: &str) -> Result<String, String> {
    let report = classify::report(&channel_from(channel)?);
    serde_json::to_string_pretty(&report).map_err(|e| e.to_string())
}

/// Incoherent Kraus decomposition of a channel file.
pub fn decompose_json(channel: &str) -> Result<String, String> {
    let sol = decompose::decompose_channel(&channel_from(channel)?, DECOMPOSE_TOL).map_err(|e| e.to_string())?;
    let out = json!({
        "branch": sol.branch,
        "dim": 2,
        "kraus": sol.kraus.to_json().kraus,
        "k": sol.k,
        "residuals": sol.residuals,
    });
    serde_json::to_string_pretty(&out).map_err(|e| e.to_string())
}

/// Output Bloch vectors of `count` sampled channels applied to `(x, y, z)`,
/// flattened as `[x0, y0, z0, x1, ...]`.
pub fn region_points(x: f64, y: f64, z: f64, seed: u64, count: usize) -> Result<Vec<f64>, String> {
    if count > MAX_REGION_COUNT {
        return Err(format!("count {count} exceeds {MAX_REGION_COUNT}"));
    }
    let initial = BlochVector::new(x, y, z).map_err(|e| e.to_string())?;
    let cfg = SamplerConfig::new(seed, count).map_err(|e| e.to_string())?;
    let region = sampler::achievable_region(&cfg, initial).map_err(|e| e.to_string())?;
    Ok(region.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = galleryNames)]
pub fn gallery_names() -> String {
    gallery_names_json()
}

#[wasm_bindgen(js_name = galleryChannel)]
pub fn gallery_channel(name: &str) -> Result<String, JsError> {
    js(gallery_json(name))
}

#[wasm_bindgen]
pub fn classify(channel: &str) -> Result<String, JsError> {
    js(classify_json(channel))
}

#[wasm_bindgen]
pub fn decompose(channel: &str) -> Result<String, JsError> {
    js(decompose_json(channel))
}

#[wasm_bindgen]
pub fn region(x: f64, y: f64, z: f64, seed: u32, count: u32) -> Result<Vec<f64>, JsError> {
    region_points(x, y, z, u64::from(seed), count as usize).map_err(|e| JsError::new(&e))
}
