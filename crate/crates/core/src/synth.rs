//! Seeded synthetic bean snapshots.
//!
//! Qualified beans of one site draw every channel from a single truncated
//! normal, so their distribution curves are unimodal and nearly identical
//! across beans. Defective beans draw each channel from a per-bean Gaussian
//! mixture (>= 2 modes), so their curves are polymodal and mutually
//! dissimilar. Backgrounds stay strictly above the segmentation threshold,
//! bean pixels almost surely below it on at least one channel.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::Quality;
use crate::error::{Error, Result};
use crate::features::{histogram, ChannelHistogram};
use crate::imaging::{save_ppm, BoundingBox, Channel, Mask, MaskedBean, Pixel, RgbImage};
use crate::seeding::derive_seed;
use crate::store::{write_manifest_csv, ManifestRecord};

/// Inclusive pixel ranges for the ellipse semi-axes (semi-minor is the
/// horizontal axis; beans are taller than wide).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeanAxes {
    pub semi_major: (usize, usize),
    pub semi_minor: (usize, usize),
}

impl BeanAxes {
    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.semi_major, self.semi_minor] {
            if lo < 3 || lo > hi {
                return Err(Error::InvalidInput(format!(
                    "axis range ({lo}, {hi}) must satisfy 3 <= lo <= hi"
                )));
            }
        }
        Ok(())
    }

    fn max_extent(&self) -> (usize, usize) {
        (2 * self.semi_minor.1 + 1, 2 * self.semi_major.1 + 1)
    }
}

fn default_axes() -> BeanAxes {
    BeanAxes {
        semi_major: (21, 26),
        semi_minor: (16, 19),
    }
}

/// Color statistics shared by one growing site's qualified beans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub site_id: String,
    pub channel_means: [f64; 3],
    pub channel_stds: [f64; 3],
    pub bean_axes: BeanAxes,
}

impl SiteProfile {
    pub fn validate(&self) -> Result<()> {
        self.bean_axes.validate()?;
        for m in self.channel_means {
            if !(0.0..=255.0).contains(&m) {
                return Err(Error::InvalidInput(format!("channel mean {m} outside [0, 255]")));
            }
        }
        // At least one channel mean must sit comfortably below the
        // segmentation threshold so bean pixels never read as background.
        if !self.channel_means.iter().any(|&m| m <= 140.0) {
            return Err(Error::InvalidInput(
                "at least one channel mean must be <= 140".into(),
            ));
        }
        for s in self.channel_stds {
            if !(s > 0.0) {
                return Err(Error::InvalidInput(format!("channel std {s} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Mixture layout for defective beans' polymodal channel distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectProfile {
    /// Inclusive range for the per-bean mode count; at least 2.
    pub mode_count_range: (usize, usize),
    /// Per-channel interval the mode means are drawn from.
    pub mode_mean_ranges: [(f64, f64); 3],
    pub mode_std_range: (f64, f64),
    /// When true (default), each bean draws its own mixture; when false,
    /// every bean shares one mixture drawn from a fixed stream.
    pub per_bean_seed_mix: bool,
    pub bean_axes: BeanAxes,
}

impl DefectProfile {
    pub fn validate(&self) -> Result<()> {
        self.bean_axes.validate()?;
        let (lo, hi) = self.mode_count_range;
        if lo < 2 || lo > hi {
            return Err(Error::InvalidInput(format!(
                "mode count range ({lo}, {hi}) must satisfy 2 <= lo <= hi"
            )));
        }
        for (lo, hi) in self.mode_mean_ranges {
            if !(0.0 <= lo && lo < hi && hi <= 255.0) {
                return Err(Error::InvalidInput(format!(
                    "mode mean range ({lo}, {hi}) must be increasing within [0, 255]"
                )));
            }
        }
        let (slo, shi) = self.mode_std_range;
        if !(slo > 0.0 && slo <= shi) {
            return Err(Error::InvalidInput(format!(
                "mode std range ({slo}, {shi}) must satisfy 0 < lo <= hi"
            )));
        }
        Ok(())
    }
}

/// One Gaussian component of a channel mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub mean: f64,
    pub std: f64,
    pub weight: f64,
}

/// Weighted Gaussian mixture a channel's pixel values are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMixture {
    pub modes: Vec<GaussianMode>,
}

impl ChannelMixture {
    pub fn single(mean: f64, std: f64) -> Self {
        ChannelMixture {
            modes: vec![GaussianMode { mean, std, weight: 1.0 }],
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> u8 {
        let total: f64 = self.modes.iter().map(|m| m.weight).sum();
        let mut pick = rng.random_range(0.0..total);
        let mut chosen = &self.modes[self.modes.len() - 1];
        for m in &self.modes {
            if pick < m.weight {
                chosen = m;
                break;
            }
            pick -= m.weight;
        }
        sample_truncated(chosen.mean, chosen.std, rng)
    }
}

/// Truncated-normal sample in [0, 255], rounded to the nearest integer.
/// Rejection is astronomically rare for in-gamut parameters; a clamp backs
/// it up after 64 tries.
fn sample_truncated(mean: f64, std: f64, rng: &mut ChaCha12Rng) -> u8 {
    let dist = Normal::new(mean, std).expect("validated std");
    for _ in 0..64 {
        let v = dist.sample(rng);
        if (0.0..=255.0).contains(&v) {
            return v.round() as u8;
        }
    }
    dist.sample(rng).clamp(0.0, 255.0).round() as u8
}

/// Render an elliptical bean whose channels draw from the given mixtures.
pub fn gen_bean_from_mixtures(
    id: impl Into<String>,
    mixtures: &[ChannelMixture; 3],
    axes: &BeanAxes,
    seed: u64,
) -> MaskedBean {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ry = rng.random_range(axes.semi_major.0..=axes.semi_major.1);
    let rx = rng.random_range(axes.semi_minor.0..=axes.semi_minor.1);
    let (w, h) = (2 * rx + 1, 2 * ry + 1);
    let mut mask = Mask::new_false(w, h);
    let mut image = RgbImage::filled(w, h, Pixel::new(255, 255, 255));
    let (fx, fy) = (rx as f64 + 0.5, ry as f64 + 0.5);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - rx as f64;
            let dy = y as f64 - ry as f64;
            if (dx / fx).powi(2) + (dy / fy).powi(2) <= 1.0 {
                mask.set(x, y, true);
                image.set_pixel(
                    x,
                    y,
                    Pixel::new(
                        mixtures[0].sample(&mut rng),
                        mixtures[1].sample(&mut rng),
                        mixtures[2].sample(&mut rng),
                    ),
                );
            }
        }
    }
    MaskedBean {
        id: id.into(),
        image,
        mask,
    }
}

/// A qualified bean: unimodal channel distributions at the site's means.
pub fn gen_qualified_bean(profile: &SiteProfile, seed: u64) -> MaskedBean {
    let mixtures = [
        ChannelMixture::single(profile.channel_means[0], profile.channel_stds[0]),
        ChannelMixture::single(profile.channel_means[1], profile.channel_stds[1]),
        ChannelMixture::single(profile.channel_means[2], profile.channel_stds[2]),
    ];
    gen_bean_from_mixtures(
        format!("{}_q{seed:x}", profile.site_id),
        &mixtures,
        &profile.bean_axes,
        derive_seed(seed, &[0x51]),
    )
}

/// Draw the per-channel mixtures a defective bean samples from.
pub fn draw_defect_mixtures(profile: &DefectProfile, seed: u64) -> [ChannelMixture; 3] {
    let mix_seed = if profile.per_bean_seed_mix {
        derive_seed(seed, &[0xd1])
    } else {
        derive_seed(0, &[0xd1])
    };
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed);
    let k = rng.random_range(profile.mode_count_range.0..=profile.mode_count_range.1);
    let mut mixtures = Vec::with_capacity(3);
    for ch in 0..3 {
        let (lo, hi) = profile.mode_mean_ranges[ch];
        let modes = (0..k)
            .map(|_| GaussianMode {
                mean: rng.random_range(lo..hi),
                std: rng.random_range(profile.mode_std_range.0..profile.mode_std_range.1),
                weight: rng.random_range(0.5..1.5),
            })
            .collect();
        mixtures.push(ChannelMixture { modes });
    }
    [mixtures[0].clone(), mixtures[1].clone(), mixtures[2].clone()]
}

/// A defective bean: polymodal per-channel mixtures, dissimilar across
/// beans.
pub fn gen_defective_bean(profile: &DefectProfile, seed: u64) -> MaskedBean {
    let mixtures = draw_defect_mixtures(profile, seed);
    gen_bean_from_mixtures(
        format!("defect_{seed:x}"),
        &mixtures,
        &profile.bean_axes,
        derive_seed(seed, &[0xd2]),
    )
}

/// Layout of one synthetic snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSpec {
    /// (rows, cols) of bean placements.
    pub grid: (usize, usize),
    pub bean_spacing: usize,
    pub background_level: u8,
    pub background_noise: u8,
    /// One label per slot, row-major; may be shorter than the grid, in
    /// which case trailing slots stay empty.
    pub labels: Vec<Quality>,
    pub seed: u64,
    /// Optional fixed canvas size; when absent the canvas is derived from
    /// the grid.
    pub canvas: Option<(usize, usize)>,
}

impl Default for SnapshotSpec {
    fn default() -> Self {
        SnapshotSpec {
            grid: (8, 8),
            bean_spacing: 6,
            background_level: 250,
            background_noise: 3,
            labels: Vec::new(),
            seed: 0,
            canvas: None,
        }
    }
}

/// Ground truth for one placed bean.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotManifest {
    pub slot: usize,
    pub bounding_box: BoundingBox,
    pub label: Quality,
}

/// Render a snapshot: beans on noisy white paper, plus the ground-truth
/// manifest. Segmenting the output recovers exactly one region per placed
/// bean.
pub fn gen_snapshot(
    spec: &SnapshotSpec,
    site: &SiteProfile,
    defect: &DefectProfile,
) -> Result<(RgbImage, Vec<SlotManifest>)> {
    site.validate()?;
    defect.validate()?;
    let (rows, cols) = spec.grid;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("snapshot grid must be nonzero".into()));
    }
    if spec.labels.len() > rows * cols {
        return Err(Error::LayoutOverflow(format!(
            "{} labels exceed the {rows}x{cols} grid",
            spec.labels.len()
        )));
    }
    if spec.bean_spacing < 2 {
        return Err(Error::InvalidInput("bean_spacing must be >= 2".into()));
    }
    if u16::from(spec.background_level).saturating_sub(u16::from(spec.background_noise)) <= 163 {
        return Err(Error::InvalidInput(
            "background_level - background_noise must exceed 163".into(),
        ));
    }

    let (site_w, site_h) = site.bean_axes.max_extent();
    let (def_w, def_h) = defect.bean_axes.max_extent();
    let cell_w = site_w.max(def_w) + spec.bean_spacing;
    let cell_h = site_h.max(def_h) + spec.bean_spacing;
    let need_w = spec.bean_spacing + cols * cell_w;
    let need_h = spec.bean_spacing + rows * cell_h;
    let (canvas_w, canvas_h) = match spec.canvas {
        Some((w, h)) => {
            if w < need_w || h < need_h {
                return Err(Error::LayoutOverflow(format!(
                    "grid needs {need_w}x{need_h}, canvas is {w}x{h}"
                )));
            }
            (w, h)
        }
        None => (need_w, need_h),
    };

    // Noisy white paper.
    let mut rng_bg = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, &[0xb6]));
    let lo = spec.background_level - spec.background_noise;
    let hi = spec.background_level.saturating_add(spec.background_noise).min(255);
    let pixels: Vec<Pixel> = (0..canvas_w * canvas_h)
        .map(|_| {
            Pixel::new(
                rng_bg.random_range(lo..=hi),
                rng_bg.random_range(lo..=hi),
                rng_bg.random_range(lo..=hi),
            )
        })
        .collect();
    let mut canvas = RgbImage::new(canvas_w, canvas_h, pixels)?;

    let mut manifest = Vec::with_capacity(spec.labels.len());
    for (slot, &label) in spec.labels.iter().enumerate() {
        let (row, col) = (slot / cols, slot % cols);
        let bean_seed = derive_seed(spec.seed, &[1, slot as u64]);
        let bean = match label {
            Quality::Qualified => gen_qualified_bean(site, bean_seed),
            Quality::Defective => gen_defective_bean(defect, bean_seed),
        };
        // Center the bean in its cell.
        let cell_x0 = spec.bean_spacing + col * cell_w;
        let cell_y0 = spec.bean_spacing + row * cell_h;
        let x0 = cell_x0 + (cell_w - spec.bean_spacing - bean.image.width()) / 2;
        let y0 = cell_y0 + (cell_h - spec.bean_spacing - bean.image.height()) / 2;
        for y in 0..bean.image.height() {
            for x in 0..bean.image.width() {
                if bean.mask.get(x, y) {
                    canvas.set_pixel(x0 + x, y0 + y, bean.image.pixel(x, y));
                }
            }
        }
        manifest.push(SlotManifest {
            slot,
            bounding_box: BoundingBox {
                x0,
                y0,
                width: bean.image.width(),
                height: bean.image.height(),
            },
            label,
        });
    }
    Ok((canvas, manifest))
}

/// Requested bean counts for one site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteCounts {
    pub qualified: usize,
    pub defective: usize,
}

/// Generate a dataset on disk: one PPM per snapshot plus `manifest.csv`
/// binding each bean to (file, region, site, label). Returns the manifest
/// records in file order.
pub fn gen_dataset(
    out_dir: &Path,
    sites: &[(SiteProfile, SiteCounts)],
    defect: &DefectProfile,
    grid: (usize, usize),
    seed: u64,
) -> Result<Vec<ManifestRecord>> {
    if sites.is_empty() {
        return Err(Error::InvalidInput("no sites requested".into()));
    }
    let capacity = grid.0 * grid.1;
    if capacity == 0 {
        return Err(Error::InvalidInput("snapshot grid must be nonzero".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut records = Vec::new();
    for (site_idx, (site, counts)) in sites.iter().enumerate() {
        if counts.qualified + counts.defective == 0 {
            return Err(Error::InvalidInput(format!(
                "site `{}` requests zero beans",
                site.site_id
            )));
        }
        let mut labels = Vec::with_capacity(counts.qualified + counts.defective);
        labels.extend(std::iter::repeat(Quality::Qualified).take(counts.qualified));
        labels.extend(std::iter::repeat(Quality::Defective).take(counts.defective));

        for (chunk_idx, chunk) in labels.chunks(capacity).enumerate() {
            let spec = SnapshotSpec {
                grid,
                labels: chunk.to_vec(),
                seed: derive_seed(seed, &[site_idx as u64, chunk_idx as u64]),
                ..SnapshotSpec::default()
            };
            let (image, slots) = gen_snapshot(&spec, site, defect)?;
            let file = format!("{}_snap{chunk_idx:03}.ppm", site.site_id);
            save_ppm(&image, &out_dir.join(&file))?;
            for slot in slots {
                records.push(ManifestRecord {
                    file: file.clone(),
                    region_index: slot.slot,
                    x0: slot.bounding_box.x0,
                    y0: slot.bounding_box.y0,
                    width: slot.bounding_box.width,
                    height: slot.bounding_box.height,
                    site: site.site_id.clone(),
                    label: slot.label,
                });
            }
        }
    }
    write_manifest_csv(&records, &out_dir.join("manifest.csv"))?;
    Ok(records)
}

/// Four invented site profiles (three Arabica-like, one Robusta-like).
/// These are synthetic constants, not measurements.
pub fn default_site_profiles() -> Vec<SiteProfile> {
    let axes = default_axes();
    vec![
        SiteProfile {
            site_id: "default1".into(),
            channel_means: [115.0, 95.0, 70.0],
            channel_stds: [12.0, 11.0, 10.0],
            bean_axes: axes,
        },
        SiteProfile {
            site_id: "default2".into(),
            channel_means: [130.0, 112.0, 88.0],
            channel_stds: [11.0, 10.0, 9.0],
            bean_axes: axes,
        },
        SiteProfile {
            site_id: "default3".into(),
            channel_means: [100.0, 118.0, 92.0],
            channel_stds: [12.0, 10.0, 9.0],
            bean_axes: axes,
        },
        SiteProfile {
            site_id: "default4".into(),
            channel_means: [85.0, 75.0, 60.0],
            channel_stds: [14.0, 12.0, 11.0],
            bean_axes: axes,
        },
    ]
}

pub fn default_defect_profile() -> DefectProfile {
    DefectProfile {
        mode_count_range: (2, 4),
        mode_mean_ranges: [(40.0, 215.0), (40.0, 205.0), (30.0, 135.0)],
        mode_std_range: (4.0, 14.0),
        per_bean_seed_mix: true,
        bean_axes: default_axes(),
    }
}

/// Look up a built-in profile by site id.
pub fn builtin_site_profile(name: &str) -> Option<SiteProfile> {
    default_site_profiles().into_iter().find(|p| p.site_id == name)
}

/// Mass-overlap dissimilarity of two distribution curves: half the L1
/// distance between their frequency vectors, in [0, 1].
pub fn histogram_distance(a: &ChannelHistogram, b: &ChannelHistogram) -> f64 {
    let fa = a.frequencies();
    let fb = b.frequencies();
    0.5 * fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Mean pairwise red-channel distance over bean pairs produced by `gen`.
pub fn mean_pairwise_distance(mut gen: impl FnMut(u64) -> MaskedBean, pairs: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..pairs {
        let a = gen(derive_seed(0xabcd, &[k as u64, 0]));
        let b = gen(derive_seed(0xabcd, &[k as u64, 1]));
        let ha = histogram(&a, Channel::Red).expect("bean has pixels");
        let hb = histogram(&b, Channel::Red).expect("bean has pixels");
        total += histogram_distance(&ha, &hb);
    }
    total / pairs as f64
}
