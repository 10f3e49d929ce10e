//! wasm-bindgen wrappers around the in-memory report functions.
//!
//! Every export takes and returns strings so the page needs no glue beyond
//! `JSON.parse`. Errors come back as `{"error": ..., "exit_code": ...}`.

use varcalc::cli::{exit_code, source};
use wasm_bindgen::prelude::*;

fn wrap(r: varcalc::Result<String>) -> String {
    r.unwrap_or_else(|e| {
        let code = exit_code(&e);
        format!("{{\"error\": {:?}, \"exit_code\": {code}}}", e.to_string())
    })
}

fn parse_vec(s: &str) -> varcalc::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| varcalc::Error::InvalidArgument(format!("bad number {t:?}"))))
        .collect()
}

/// Growth battery for a problem file.
#[wasm_bindgen]
pub fn analyze(problem: &str) -> String {
    wrap(source::analyze(problem))
}

/// Exact second subderivative next to its sampling estimate along `w`
/// (comma separated). The estimate samples `w′` within `c·t` of `w`, so it
/// can sit above the exact value when the best `w′` is farther out.
#[wasm_bindgen]
pub fn second_subderivative(problem: &str, w: &str, c: f64) -> String {
    wrap(parse_vec(w).and_then(|w| {
        let exact = source::d2(problem, &w)?;
        let est = source::estimate_d2(problem, &w, Some(c))?;
        Ok(format!("{{\"exact\": {exact},\n\"estimate\": {est}}}"))
    }))
}

#[wasm_bindgen]
pub fn catalog_list() -> String {
    wrap(source::catalog_list())
}

#[wasm_bindgen]
pub fn catalog_run(id: &str) -> String {
    wrap(source::catalog_run(id))
}
