//! Demo logic behind the wasm exports. Everything here is plain Rust so the
//! host test suite covers it; the wasm layer only marshals types.

use serde::Serialize;

use beanscope_core::classifier::{
    decision_value, predict, train_binary, LabeledSample, Quality, QualitySample, TrainConfig,
};
use beanscope_core::evaluation::{evaluate_binary, stratified_split};
use beanscope_core::features::{extract_two, histogram};
use beanscope_core::imaging::{
    find_bean_regions, Channel, RgbImage, SegmentationConfig,
};
use beanscope_core::plot::separatrix_coefficients;
use beanscope_core::seeding::derive_seed;
use beanscope_core::synth::{
    default_defect_profile, default_site_profiles, gen_defective_bean, gen_qualified_bean,
    gen_snapshot, SnapshotSpec,
};

fn site1() -> beanscope_core::synth::SiteProfile {
    default_site_profiles().remove(0)
}

pub struct SnapshotRender {
    pub width: usize,
    pub height: usize,
    pub rgba: Vec<u8>,
    pub meta_json: String,
}

#[derive(Serialize)]
struct BoxJson {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    label: String,
}

#[derive(Serialize)]
struct SnapshotMeta {
    expected: usize,
    found: usize,
    threshold: u8,
    manifest: Vec<BoxJson>,
    regions: Vec<BoxJson>,
}

fn to_rgba(image: &RgbImage) -> Vec<u8> {
    let mut rgba = Vec::with_capacity(image.pixels().len() * 4);
    for p in image.pixels() {
        rgba.extend_from_slice(&[p.r, p.g, p.b, 255]);
    }
    rgba
}

/// Render a synthetic snapshot and run segmentation over it at the given
/// threshold, reporting both the ground-truth boxes and the recovered ones.
pub fn snapshot_render(
    seed: u64,
    rows: usize,
    cols: usize,
    defective_percent: usize,
    threshold: u8,
) -> Result<SnapshotRender, String> {
    let rows = rows.clamp(1, 10);
    let cols = cols.clamp(1, 10);
    let slots = rows * cols;
    let n_defective = (slots * defective_percent.min(100)).div_ceil(100).min(slots);
    // Scatter the defective slots deterministically across the grid.
    let mut labels = vec![Quality::Qualified; slots];
    let mut picked = 0usize;
    let mut k = 0u64;
    while picked < n_defective {
        let slot = (derive_seed(seed, &[0x1abe1, k]) % slots as u64) as usize;
        if labels[slot] == Quality::Qualified {
            labels[slot] = Quality::Defective;
            picked += 1;
        }
        k += 1;
    }
    let spec = SnapshotSpec {
        grid: (rows, cols),
        labels,
        seed,
        ..SnapshotSpec::default()
    };
    let (image, manifest) =
        gen_snapshot(&spec, &site1(), &default_defect_profile()).map_err(|e| e.to_string())?;
    let cfg = SegmentationConfig { threshold, ..SegmentationConfig::default() };
    let regions = find_bean_regions(&image, &cfg, "demo").map_err(|e| e.to_string())?;
    let meta = SnapshotMeta {
        expected: manifest.len(),
        found: regions.len(),
        threshold,
        manifest: manifest
            .iter()
            .map(|m| BoxJson {
                x: m.bounding_box.x0,
                y: m.bounding_box.y0,
                w: m.bounding_box.width,
                h: m.bounding_box.height,
                label: m.label.to_string(),
            })
            .collect(),
        regions: regions
            .iter()
            .map(|r| BoxJson {
                x: r.bounding_box.x0,
                y: r.bounding_box.y0,
                w: r.bounding_box.width,
                h: r.bounding_box.height,
                label: format!("{}px", r.pixel_count),
            })
            .collect(),
    };
    Ok(SnapshotRender {
        width: image.width(),
        height: image.height(),
        rgba: to_rgba(&image),
        meta_json: serde_json::to_string(&meta).expect("meta serializes"),
    })
}

#[derive(Serialize)]
struct CurveSet {
    channel: String,
    /// One 256-bin frequency vector per bean.
    curves: Vec<Vec<f64>>,
}

/// Per-channel distribution curves of `count` beans — nearly identical
/// unimodal curves for qualified beans, scattered polymodal ones for
/// defective beans.
pub fn curves_json(seed: u64, count: usize, defective: bool) -> Result<String, String> {
    let count = count.clamp(1, 60);
    let site = site1();
    let defect = default_defect_profile();
    let mut sets: Vec<CurveSet> = Channel::ALL
        .iter()
        .map(|ch| CurveSet { channel: ch.to_string(), curves: Vec::with_capacity(count) })
        .collect();
    for i in 0..count {
        let bean_seed = derive_seed(seed, &[0xc0, i as u64]);
        let bean = if defective {
            gen_defective_bean(&defect, bean_seed)
        } else {
            gen_qualified_bean(&site, bean_seed)
        };
        for ch in Channel::ALL {
            let h = histogram(&bean, ch).map_err(|e| e.to_string())?;
            // 6 decimals keep the payload small without visible error.
            let rounded: Vec<f64> = h
                .frequencies()
                .iter()
                .map(|f| (f * 1e6).round() / 1e6)
                .collect();
            sets[ch.index()].curves.push(rounded);
        }
    }
    serde_json::to_string(&sets).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ScatterPointJson {
    x: f64,
    y: f64,
    label: String,
    part: String,
    predicted: String,
}

#[derive(Serialize)]
struct TrainScatter {
    points: Vec<ScatterPointJson>,
    /// Raw-space separatrix coefficients for a*x + b*y + c = 0.
    line: [f64; 3],
    accuracy: f64,
    accuracy_percent: String,
    pq: usize,
    pd: usize,
    test_total: usize,
}

/// Generate a two-class bean set, train the single-channel model at the
/// requested split ratio, and report the scatter plus its separatrix.
pub fn train_scatter_json(
    seed: u64,
    per_class: usize,
    ratio: f64,
    channel: Channel,
    c: f64,
) -> Result<String, String> {
    let per_class = per_class.clamp(10, 400);
    if !(0.05..=0.95).contains(&ratio) {
        return Err("ratio must lie in [0.05, 0.95]".into());
    }
    if !(c > 0.0) {
        return Err("c must be positive".into());
    }
    let site = site1();
    let defect = default_defect_profile();
    let mut samples: Vec<QualitySample> = Vec::with_capacity(per_class * 2);
    for i in 0..per_class as u64 {
        let q = gen_qualified_bean(&site, derive_seed(seed, &[0x7a, i, 0]));
        samples.push(LabeledSample::new(
            extract_two(&q, channel).map_err(|e| e.to_string())?,
            Quality::Qualified,
        ));
        let d = gen_defective_bean(&defect, derive_seed(seed, &[0x7a, i, 1]));
        samples.push(LabeledSample::new(
            extract_two(&d, channel).map_err(|e| e.to_string())?,
            Quality::Defective,
        ));
    }
    let split = stratified_split(&samples, |s| s.label, ratio, seed).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { c, seed, ..TrainConfig::default() };
    let model = train_binary(&split.train, &cfg).map_err(|e| e.to_string())?;
    let report = evaluate_binary(&model, &split.test).map_err(|e| e.to_string())?;
    let line = separatrix_coefficients(&model).map_err(|e| e.to_string())?;

    let mut points = Vec::with_capacity(samples.len());
    for (part, set) in [("train", &split.train), ("test", &split.test)] {
        for s in set {
            points.push(ScatterPointJson {
                x: s.features.values[0],
                y: s.features.values[1],
                label: s.label.to_string(),
                part: part.to_string(),
                predicted: predict(&model, &s.features).map_err(|e| e.to_string())?.to_string(),
            });
        }
    }
    // Present points in a stable order independent of the split.
    points.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    let _ = decision_value(&model, &samples[0].features); // keep the API exercised in tests
    let result = TrainScatter {
        points,
        line,
        accuracy: report.accuracy,
        accuracy_percent: beanscope_core::format_percent(report.accuracy),
        pq: report.pq,
        pd: report.pd,
        test_total: report.test_total,
    };
    serde_json::to_string(&result).map_err(|e| e.to_string())
}
