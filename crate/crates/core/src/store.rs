//! Stable on-disk formats: JSON model files and the CSV dialect shared by
//! every table the pipeline emits.
//!
//! CSV dialect: comma separator, `\n` line endings, no quoting; identifier
//! fields are restricted to `[A-Za-z0-9_.-]`. Writers are deterministic
//! (same value, same bytes); readers reject rather than repair.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    LabelMap, LinearModel, MulticlassModel, Quality, Standardization, TrainConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{ConfusionMatrix, SweepDetailRow, SweepRow};
use crate::features::{ChannelHistogram, FeatureScheme, FeatureVector};
use crate::imaging::BeanRegion;

pub const FORMAT_VERSION: u32 = 1;

/// Shortest decimal form that round-trips the exact f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Fixed scientific form with 17 significant digits; always round-trips.
pub fn fmt_f64_full(x: f64) -> String {
    format!("{x:.16e}")
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

fn check_identifier(s: &str, what: &str) -> Result<()> {
    if valid_identifier(s) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} `{s}` must match [A-Za-z0-9_.-]+"
        )))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Model files (JSON)

#[derive(Clone, Serialize, Deserialize)]
struct TrainConfigFile {
    c: f64,
    tolerance: f64,
    max_epochs: usize,
    seed: u64,
}

impl From<&TrainConfig> for TrainConfigFile {
    fn from(cfg: &TrainConfig) -> Self {
        TrainConfigFile {
            c: cfg.c,
            tolerance: cfg.tolerance,
            max_epochs: cfg.max_epochs,
            seed: cfg.seed,
        }
    }
}

impl From<TrainConfigFile> for TrainConfig {
    fn from(f: TrainConfigFile) -> Self {
        TrainConfig {
            c: f.c,
            tolerance: f.tolerance,
            max_epochs: f.max_epochs,
            seed: f.seed,
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct ModelPayload {
    scheme: String,
    weights: Vec<f64>,
    bias: f64,
    standardization: Standardization,
    label_map: LabelMap,
    train_config: TrainConfigFile,
    training_fingerprint: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    payload: ModelPayload,
}

#[derive(Serialize, Deserialize)]
struct MulticlassFile {
    format_version: u32,
    scheme: String,
    classes: Vec<String>,
    /// Pairwise models keyed "siteA|siteB" with siteA < siteB.
    pairwise: BTreeMap<String, ModelPayload>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u32>,
}

fn check_version(text: &str, path: &Path) -> Result<()> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    match probe.format_version {
        Some(FORMAT_VERSION) => Ok(()),
        Some(found) => Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found,
            expected: FORMAT_VERSION,
        }),
        None => Err(Error::MalformedFile {
            path: path.to_path_buf(),
            detail: "missing format_version".into(),
        }),
    }
}

fn model_to_payload(model: &LinearModel) -> ModelPayload {
    ModelPayload {
        scheme: model.scheme.to_string(),
        weights: model.weights.clone(),
        bias: model.bias,
        standardization: model.standardization.clone(),
        label_map: model.label_map.clone(),
        train_config: (&model.train_config).into(),
        training_fingerprint: model.training_fingerprint.clone(),
    }
}

fn payload_to_model(payload: ModelPayload, path: &Path) -> Result<LinearModel> {
    let scheme = FeatureScheme::from_str(&payload.scheme).map_err(|_| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: format!("unknown scheme `{}`", payload.scheme),
    })?;
    let mut model = LinearModel::new(
        scheme,
        payload.weights,
        payload.bias,
        payload.standardization,
        payload.label_map,
    )
    .map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    model.train_config = payload.train_config.into();
    model.training_fingerprint = payload.training_fingerprint;
    Ok(model)
}

pub fn save_model(model: &LinearModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        payload: model_to_payload(model),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<LinearModel> {
    let text = read_file(path)?;
    check_version(&text, path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    payload_to_model(file.payload, path)
}

pub fn save_multiclass(model: &MulticlassModel, path: &Path) -> Result<()> {
    let mut pairwise = BTreeMap::new();
    for pair in &model.pairwise {
        let key = format!("{}|{}", pair.label_map.neg, pair.label_map.pos);
        pairwise.insert(key, model_to_payload(pair));
    }
    let file = MulticlassFile {
        format_version: FORMAT_VERSION,
        scheme: model.scheme.to_string(),
        classes: model.classes.clone(),
        pairwise,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn load_multiclass(path: &Path) -> Result<MulticlassModel> {
    let text = read_file(path)?;
    check_version(&text, path)?;
    let file: MulticlassFile = serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let scheme = FeatureScheme::from_str(&file.scheme).map_err(|_| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: format!("unknown scheme `{}`", file.scheme),
    })?;
    let expected_pairs = file.classes.len() * file.classes.len().saturating_sub(1) / 2;
    if file.pairwise.len() != expected_pairs {
        return Err(Error::MalformedFile {
            path: path.to_path_buf(),
            detail: format!(
                "{} classes need {expected_pairs} pairwise models, found {}",
                file.classes.len(),
                file.pairwise.len()
            ),
        });
    }
    // Rebuild in canonical (i, j) order.
    let mut pairwise = Vec::with_capacity(expected_pairs);
    for i in 0..file.classes.len() {
        for j in i + 1..file.classes.len() {
            let key = format!("{}|{}", file.classes[i], file.classes[j]);
            let payload = file.pairwise.get(&key).ok_or_else(|| Error::MalformedFile {
                path: path.to_path_buf(),
                detail: format!("missing pairwise model `{key}`"),
            })?;
            pairwise.push(payload_to_model(payload.clone(), path)?);
        }
    }
    Ok(MulticlassModel {
        classes: file.classes,
        pairwise,
        scheme,
    })
}

// ---------------------------------------------------------------------------
// Site / defect profiles (JSON)

#[derive(Serialize, Deserialize)]
pub struct ProfilesFile {
    pub format_version: u32,
    pub sites: Vec<crate::synth::SiteProfile>,
    pub defect: crate::synth::DefectProfile,
}

pub fn save_profiles(file: &ProfilesFile, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file).expect("profiles serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn load_profiles(path: &Path) -> Result<ProfilesFile> {
    let text = read_file(path)?;
    check_version(&text, path)?;
    let file: ProfilesFile = serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    for site in &file.sites {
        site.validate()?;
    }
    file.defect.validate()?;
    Ok(file)
}

// ---------------------------------------------------------------------------
// Dataset manifest (CSV)

/// One bean's provenance inside a generated or segmented dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    pub file: String,
    pub region_index: usize,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    pub site: String,
    pub label: Quality,
}

impl ManifestRecord {
    /// Stable per-bean identifier derived from the source file and region.
    pub fn bean_id(&self) -> String {
        let stem = self.file.strip_suffix(".ppm").unwrap_or(&self.file);
        format!("{stem}_bean{}", self.region_index)
    }
}

const MANIFEST_COLUMNS: [&str; 8] = [
    "file", "region_index", "x0", "y0", "width", "height", "site", "label",
];

pub fn write_manifest_csv(records: &[ManifestRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&MANIFEST_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        check_identifier(&r.file, "manifest file")?;
        check_identifier(&r.site, "site")?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.file, r.region_index, r.x0, r.y0, r.width, r.height, r.site, r.label
        )
        .expect("string write");
    }
    write_file(path, out.as_bytes())
}

/// Split one CSV line; the dialect never quotes, so this is a plain split.
fn split_csv(line: &str) -> Vec<&str> {
    line.split(',').collect()
}

/// Header lookup that enforces required columns and ignores unknown ones.
struct HeaderIndex {
    positions: Vec<usize>,
}

impl HeaderIndex {
    fn new(header: &str, required: &[&str]) -> Result<Self> {
        let cells = split_csv(header);
        let mut positions = Vec::with_capacity(required.len());
        for name in required {
            let pos = cells
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::MissingColumn((*name).to_string()))?;
            positions.push(pos);
        }
        Ok(HeaderIndex { positions })
    }

    fn get<'a>(&self, cells: &[&'a str], col: usize, row: usize) -> Result<&'a str> {
        cells
            .get(self.positions[col])
            .copied()
            .ok_or_else(|| Error::MalformedRow {
                row,
                detail: "row has fewer cells than the header".into(),
            })
    }
}

fn parse_cell<T: FromStr>(cell: &str, row: usize, what: &str) -> Result<T> {
    cell.parse().map_err(|_| Error::MalformedRow {
        row,
        detail: format!("cannot parse {what} from `{cell}`"),
    })
}

pub fn read_manifest_csv(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: "empty manifest".into(),
    })?;
    let idx = HeaderIndex::new(header, &MANIFEST_COLUMNS)?;
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 2; // 1-based, counting the header
        let cells = split_csv(line);
        let label: Quality = Quality::from_str(idx.get(&cells, 7, row)?)
            .map_err(|e| Error::MalformedRow { row, detail: e.to_string() })?;
        records.push(ManifestRecord {
            file: idx.get(&cells, 0, row)?.to_string(),
            region_index: parse_cell(idx.get(&cells, 1, row)?, row, "region_index")?,
            x0: parse_cell(idx.get(&cells, 2, row)?, row, "x0")?,
            y0: parse_cell(idx.get(&cells, 3, row)?, row, "y0")?,
            width: parse_cell(idx.get(&cells, 4, row)?, row, "width")?,
            height: parse_cell(idx.get(&cells, 5, row)?, row, "height")?,
            site: idx.get(&cells, 6, row)?.to_string(),
            label,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Feature table (CSV)

/// One row of the feature table.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub features: FeatureVector,
    pub label: Quality,
    pub site: String,
}

pub fn write_features_csv(rows: &[FeatureRow], path: &Path) -> Result<()> {
    let scheme = rows
        .first()
        .ok_or_else(|| Error::InvalidInput("no feature rows to write".into()))?
        .features
        .scheme;
    let mut out = String::from("bean_id,scheme,label,site");
    for j in 0..scheme.dimension() {
        write!(out, ",v{j}").expect("string write");
    }
    out.push('\n');
    for r in rows {
        if r.features.scheme != scheme {
            return Err(Error::SchemeMismatch {
                expected: scheme.to_string(),
                got: r.features.scheme.to_string(),
            });
        }
        check_identifier(&r.features.bean_id, "bean_id")?;
        check_identifier(&r.site, "site")?;
        write!(out, "{},{},{},{}", r.features.bean_id, scheme, r.label, r.site)
            .expect("string write");
        for v in &r.features.values {
            out.push(',');
            out.push_str(&fmt_f64_full(*v));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: "empty feature table".into(),
    })?;
    let header_cells = split_csv(header);
    let idx = HeaderIndex::new(header, &["bean_id", "scheme", "label", "site"])?;
    // Value columns are the v0..vN suffix, in order.
    let value_cols: Vec<usize> = header_cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with('v') && c[1..].chars().all(|ch| ch.is_ascii_digit()))
        .map(|(i, _)| i)
        .collect();
    if value_cols.is_empty() {
        return Err(Error::MissingColumn("v0".into()));
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 2;
        let cells = split_csv(line);
        let scheme: FeatureScheme = FeatureScheme::from_str(idx.get(&cells, 1, row)?)
            .map_err(|e| Error::MalformedRow { row, detail: e.to_string() })?;
        if value_cols.len() != scheme.dimension() {
            return Err(Error::MalformedRow {
                row,
                detail: format!(
                    "scheme {scheme} needs {} value columns, header has {}",
                    scheme.dimension(),
                    value_cols.len()
                ),
            });
        }
        let mut values = Vec::with_capacity(value_cols.len());
        for &c in &value_cols {
            let cell = cells.get(c).copied().ok_or_else(|| Error::MalformedRow {
                row,
                detail: "row has fewer cells than the header".into(),
            })?;
            values.push(parse_cell::<f64>(cell, row, "feature value")?);
        }
        let label = Quality::from_str(idx.get(&cells, 2, row)?)
            .map_err(|e| Error::MalformedRow { row, detail: e.to_string() })?;
        let features = FeatureVector::new(scheme, values, idx.get(&cells, 0, row)?)
            .map_err(|e| Error::MalformedRow { row, detail: e.to_string() })?;
        rows.push(FeatureRow {
            features,
            label,
            site: idx.get(&cells, 3, row)?.to_string(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Histogram, report, sweep, confusion, regions, verdicts (CSV)

pub fn write_histogram_csv(histograms: &[ChannelHistogram], path: &Path) -> Result<()> {
    let mut out = String::from("channel,value,count,frequency\n");
    for h in histograms {
        for (v, &c) in h.counts.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                h.channel,
                v,
                c,
                fmt_f64(c as f64 / h.total as f64)
            )
            .expect("string write");
        }
    }
    write_file(path, out.as_bytes())
}

/// Inverse of [`write_histogram_csv`]: every histogram occupies 256
/// consecutive rows, so curves are recovered by value wraparound.
pub fn read_histogram_csv(path: &Path) -> Result<Vec<ChannelHistogram>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: "empty histogram table".into(),
    })?;
    let idx = HeaderIndex::new(header, &["channel", "value", "count"])?;
    let mut histograms: Vec<ChannelHistogram> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 2;
        let cells = split_csv(line);
        let channel = crate::imaging::Channel::from_str(idx.get(&cells, 0, row)?)
            .map_err(|e| Error::MalformedRow { row, detail: e.to_string() })?;
        let value: usize = parse_cell(idx.get(&cells, 1, row)?, row, "value")?;
        let count: u64 = parse_cell(idx.get(&cells, 2, row)?, row, "count")?;
        if value > 255 {
            return Err(Error::MalformedRow {
                row,
                detail: format!("grayscale value {value} out of range"),
            });
        }
        if value == 0 {
            histograms.push(ChannelHistogram {
                channel,
                counts: [0; 256],
                total: 0,
            });
        }
        let current = histograms.last_mut().ok_or_else(|| Error::MalformedRow {
            row,
            detail: "histogram rows must start at value 0".into(),
        })?;
        current.counts[value] = count;
        current.total += count;
    }
    if histograms.iter().any(|h| h.total == 0) {
        return Err(Error::MalformedFile {
            path: path.to_path_buf(),
            detail: "histogram with zero total".into(),
        });
    }
    Ok(histograms)
}

pub fn read_confusion_csv(path: &Path) -> Result<ConfusionMatrix> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: "empty confusion table".into(),
    })?;
    let header_cells = split_csv(header);
    if header_cells.first() != Some(&"true_label") {
        return Err(Error::MissingColumn("true_label".into()));
    }
    let classes: Vec<String> = header_cells[1..].iter().map(|c| c.to_string()).collect();
    let mut counts = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 2;
        let cells = split_csv(line);
        if cells.len() != classes.len() + 1 {
            return Err(Error::MalformedRow {
                row,
                detail: format!("expected {} cells, got {}", classes.len() + 1, cells.len()),
            });
        }
        let mut row_counts = Vec::with_capacity(classes.len());
        for cell in &cells[1..] {
            row_counts.push(parse_cell::<u64>(cell, row, "count")?);
        }
        counts.push(row_counts);
    }
    ConfusionMatrix::from_counts(classes, counts)
}

pub fn write_report_csv(rows: &[SweepDetailRow], path: &Path) -> Result<()> {
    let mut out = String::from("ratio,repeat,seed,train_size,test_size,pq,pd,accuracy\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.ratio),
            r.repeat,
            r.seed,
            r.train_size,
            r.test_size,
            r.pq,
            r.pd,
            fmt_f64(r.accuracy)
        )
        .expect("string write");
    }
    write_file(path, out.as_bytes())
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut out = String::from("ratio,accuracy,train_size,test_size,seed\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.ratio),
            fmt_f64(r.accuracy),
            r.train_size,
            r.test_size,
            r.seed
        )
        .expect("string write");
    }
    write_file(path, out.as_bytes())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::MalformedFile {
        path: path.to_path_buf(),
        detail: "empty sweep table".into(),
    })?;
    let idx = HeaderIndex::new(header, &["ratio", "accuracy", "train_size", "test_size", "seed"])?;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 2;
        let cells = split_csv(line);
        rows.push(SweepRow {
            ratio: parse_cell(idx.get(&cells, 0, row)?, row, "ratio")?,
            accuracy: parse_cell(idx.get(&cells, 1, row)?, row, "accuracy")?,
            train_size: parse_cell(idx.get(&cells, 2, row)?, row, "train_size")?,
            test_size: parse_cell(idx.get(&cells, 3, row)?, row, "test_size")?,
            seed: parse_cell(idx.get(&cells, 4, row)?, row, "seed")?,
        });
    }
    Ok(rows)
}

/// Header row of predicted labels, one row per true label.
pub fn write_confusion_csv(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("true_label");
    for c in &cm.classes {
        check_identifier(c, "class label")?;
        write!(out, ",{c}").expect("string write");
    }
    out.push('\n');
    for (i, c) in cm.classes.iter().enumerate() {
        write!(out, "{c}").expect("string write");
        for j in 0..cm.classes.len() {
            write!(out, ",{}", cm.counts[i][j]).expect("string write");
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_regions_csv(regions: &[BeanRegion], path: &Path) -> Result<()> {
    let mut out = String::from("file,region_index,x0,y0,width,height,pixel_count\n");
    for (i, r) in regions.iter().enumerate() {
        check_identifier(&r.source_image_id, "image id")?;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.source_image_id,
            i,
            r.bounding_box.x0,
            r.bounding_box.y0,
            r.bounding_box.width,
            r.bounding_box.height,
            r.pixel_count
        )
        .expect("string write");
    }
    write_file(path, out.as_bytes())
}

/// Per-bean verdict rows from `classify`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictRow {
    pub bean_id: String,
    pub decision_value: f64,
    pub verdict: Quality,
}

pub fn write_verdicts_csv(rows: &[VerdictRow], path: &Path) -> Result<()> {
    let mut out = String::from("bean_id,z,verdict\n");
    for r in rows {
        check_identifier(&r.bean_id, "bean_id")?;
        writeln!(out, "{},{},{}", r.bean_id, fmt_f64(r.decision_value), r.verdict)
            .expect("string write");
    }
    write_file(path, out.as_bytes())
}
