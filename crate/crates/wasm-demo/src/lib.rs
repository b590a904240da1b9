//! wasm-bindgen bindings for the browser demo. The heavy lifting lives in
//! [`demo`]; these wrappers marshal buffers and JSON strings across the
//! boundary. Build with `wasm-pack build --target web` (see the repository
//! README) and open `www/index.html`.

mod demo;

use std::str::FromStr;

use wasm_bindgen::prelude::*;

use beanscope_core::imaging::Channel;

/// A rendered snapshot plus segmentation results.
#[wasm_bindgen]
pub struct SnapshotView {
    width: u32,
    height: u32,
    rgba: Vec<u8>,
    meta_json: String,
}

#[wasm_bindgen]
impl SnapshotView {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    /// RGBA8 pixels, row-major, ready for `ImageData`.
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// JSON with expected/found region counts and both box sets.
    #[wasm_bindgen(getter)]
    pub fn meta(&self) -> String {
        self.meta_json.clone()
    }
}

/// Generate a synthetic snapshot and segment it at the given threshold.
#[wasm_bindgen]
pub fn render_snapshot(
    seed: u32,
    rows: u32,
    cols: u32,
    defective_percent: u32,
    threshold: u8,
) -> Result<SnapshotView, JsError> {
    let r = demo::snapshot_render(
        seed as u64,
        rows as usize,
        cols as usize,
        defective_percent as usize,
        threshold,
    )
    .map_err(|e| JsError::new(&e))?;
    Ok(SnapshotView {
        width: r.width as u32,
        height: r.height as u32,
        rgba: r.rgba,
        meta_json: r.meta_json,
    })
}

/// Per-channel grayscale distribution curves of `count` beans, as JSON.
#[wasm_bindgen]
pub fn distribution_curves(seed: u32, count: u32, defective: bool) -> Result<String, JsError> {
    demo::curves_json(seed as u64, count as usize, defective).map_err(|e| JsError::new(&e))
}

/// Train the single-channel (mean, std) model and return the scatter,
/// separatrix line, and test accuracy as JSON.
#[wasm_bindgen]
pub fn train_scatter(
    seed: u32,
    per_class: u32,
    ratio: f64,
    channel: &str,
    c: f64,
) -> Result<String, JsError> {
    let channel = Channel::from_str(channel).map_err(|e| JsError::new(&e.to_string()))?;
    demo::train_scatter_json(seed as u64, per_class as usize, ratio, channel, c)
        .map_err(|e| JsError::new(&e))
}
