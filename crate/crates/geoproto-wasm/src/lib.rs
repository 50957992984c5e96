//! Browser bindings for the clustering pipeline.
//!
//! The `demo` module is plain Rust and carries the tests; the thin
//! `wasm-bindgen` wrappers below only exist on the wasm target.

pub mod demo;

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    fn lift(result: Result<String, String>) -> Result<String, JsError> {
        result.map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn cluster_scatter(params: &str) -> Result<String, JsError> {
        lift(crate::demo::cluster_scatter(params))
    }

    #[wasm_bindgen]
    pub fn gap_profile(params: &str) -> Result<String, JsError> {
        lift(crate::demo::gap_profile(params))
    }

    #[wasm_bindgen]
    pub fn experience_table(params: &str) -> Result<String, JsError> {
        lift(crate::demo::experience_table(params))
    }
}
