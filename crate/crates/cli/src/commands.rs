//! Subcommand implementations.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use beanscope_core::classifier::{
    decision_value, predict, train_binary, train_multiclass, LabeledSample, Quality, QualitySample,
    SiteSample, TrainConfig,
};
use beanscope_core::error::{Error, Result};
use beanscope_core::evaluation::{
    evaluate_binary, confusion_matrix, ratio_sweep, stratified_split, SweepDetailRow,
};
use beanscope_core::features::{extract, histogram, FeatureScheme};
use beanscope_core::imaging::{
    crop_bean, find_bean_regions, load_image, save_ppm, Channel, Connectivity, Mask, MaskedBean,
    SegmentationConfig, is_background,
};
use beanscope_core::plot;
use beanscope_core::format_percent;
use beanscope_core::store;
use beanscope_core::synth;

use crate::{
    resolve_seed, ClassifyArgs, Command, EvalArgs, ExtractArgs, GenArgs, PlotArgs, SegmentArgs,
    SitesArgs, SweepArgs, TrainArgs,
};

pub fn dispatch(command: Command, stdout: &mut dyn Write, env_seed: Option<u64>) -> Result<()> {
    match command {
        Command::Gen(args) => gen(args, stdout, env_seed),
        Command::Segment(args) => segment(args, stdout),
        Command::Extract(args) => extract_cmd(args, stdout),
        Command::Train(args) => train(args, stdout, env_seed),
        Command::Classify(args) => classify(args, stdout),
        Command::Eval(args) => eval(args, stdout),
        Command::Sweep(args) => sweep(args, stdout, env_seed),
        Command::Sites(args) => sites(args, stdout, env_seed),
        Command::Plot(args) => plot_cmd(args, stdout),
    }
}

fn parse_grid(spec: &str) -> Result<(usize, usize)> {
    let (rows, cols) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidInput(format!("grid `{spec}` must look like 8x8")))?;
    let rows: usize = rows
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad grid rows in `{spec}`")))?;
    let cols: usize = cols
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad grid cols in `{spec}`")))?;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("grid must be nonzero".into()));
    }
    Ok((rows, cols))
}

fn resolve_site_profiles(spec: &str) -> Result<Vec<synth::SiteProfile>> {
    let mut profiles = Vec::new();
    for item in spec.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        if let Some(profile) = synth::builtin_site_profile(item) {
            profiles.push(profile);
        } else if Path::new(item).exists() {
            let file = store::load_profiles(Path::new(item))?;
            profiles.extend(file.sites);
        } else {
            return Err(Error::InvalidInput(format!(
                "`{item}` is neither a built-in profile (default1..default4) nor a profile file"
            )));
        }
    }
    if profiles.is_empty() {
        return Err(Error::InvalidInput("no site profiles given".into()));
    }
    Ok(profiles)
}

fn gen(args: GenArgs, stdout: &mut dyn Write, env_seed: Option<u64>) -> Result<()> {
    let seed = resolve_seed(args.seed, env_seed);
    let grid = parse_grid(&args.grid)?;
    let site_profiles = resolve_site_profiles(&args.site_profile)?;
    let defect = match &args.defect_profile {
        Some(path) => store::load_profiles(path)?.defect,
        None => synth::default_defect_profile(),
    };
    let counts = synth::SiteCounts {
        qualified: args.qualified,
        defective: args.defective,
    };
    let sites: Vec<(synth::SiteProfile, synth::SiteCounts)> =
        site_profiles.iter().cloned().map(|p| (p, counts)).collect();
    let records = synth::gen_dataset(&args.out, &sites, &defect, grid, seed)?;
    if let Some(path) = &args.emit_profiles {
        store::save_profiles(
            &store::ProfilesFile {
                format_version: store::FORMAT_VERSION,
                sites: site_profiles,
                defect,
            },
            path,
        )?;
    }
    writeln!(
        stdout,
        "wrote {} beans across {} site(s) to {}",
        records.len(),
        sites.len(),
        args.out.display()
    )
    .ok();
    Ok(())
}

fn segment(args: SegmentArgs, stdout: &mut dyn Write) -> Result<()> {
    let connectivity = match args.connectivity {
        4 => Connectivity::Four,
        8 => Connectivity::Eight,
        other => {
            return Err(Error::InvalidInput(format!(
                "connectivity must be 4 or 8, got {other}"
            )))
        }
    };
    let cfg = SegmentationConfig {
        threshold: args.threshold,
        min_region_pixels: args.min_pixels,
        max_region_pixels: args.max_pixels,
        connectivity,
    };
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::Io { path: args.out_dir.clone(), source: e })?;

    let mut all_regions = Vec::new();
    for image_path in &args.images {
        let image = load_image(image_path)?;
        let image_id = image_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("snapshot")
            .to_string();
        let regions = find_bean_regions(&image, &cfg, &image_id)?;
        for (i, region) in regions.iter().enumerate() {
            let bean = crop_bean(&image, region)?;
            save_ppm(&bean.image, &args.out_dir.join(format!("{image_id}_bean{i}.ppm")))?;
        }
        all_regions.extend(regions);
    }
    store::write_regions_csv(&all_regions, &args.out_dir.join("regions.csv"))?;
    writeln!(
        stdout,
        "segmented {} region(s) from {} image(s) into {}",
        all_regions.len(),
        args.images.len(),
        args.out_dir.display()
    )
    .ok();
    Ok(())
}

/// Rebuild a masked bean from a manifest record: crop the stated box and
/// mask every non-background pixel inside it.
fn bean_from_record(
    record: &store::ManifestRecord,
    image: &beanscope_core::imaging::RgbImage,
    threshold: u8,
) -> Result<MaskedBean> {
    let crop = image.crop(record.x0, record.y0, record.width, record.height)?;
    let mut mask = Mask::new_false(crop.width(), crop.height());
    for y in 0..crop.height() {
        for x in 0..crop.width() {
            if !is_background(crop.pixel(x, y), threshold) {
                mask.set(x, y, true);
            }
        }
    }
    Ok(MaskedBean {
        id: record.bean_id(),
        image: crop,
        mask,
    })
}

fn extract_cmd(args: ExtractArgs, stdout: &mut dyn Write) -> Result<()> {
    let scheme = FeatureScheme::from_str(&args.scheme)?;
    let records = store::read_manifest_csv(&args.manifest)?;
    if records.is_empty() {
        return Err(Error::InvalidInput("manifest has no rows".into()));
    }
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let mut image_cache: BTreeMap<String, beanscope_core::imaging::RgbImage> = BTreeMap::new();
    let mut rows = Vec::with_capacity(records.len());
    let mut histograms = Vec::new();
    for record in &records {
        if !image_cache.contains_key(&record.file) {
            let image = load_image(&base.join(&record.file))?;
            image_cache.insert(record.file.clone(), image);
        }
        let image = &image_cache[&record.file];
        let bean = bean_from_record(record, image, args.threshold)?;
        let features = extract(&bean, scheme)?;
        if args.histograms_out.is_some() {
            for ch in Channel::ALL {
                histograms.push(histogram(&bean, ch)?);
            }
        }
        rows.push(store::FeatureRow {
            features,
            label: record.label,
            site: record.site.clone(),
        });
    }
    store::write_features_csv(&rows, &args.out)?;
    if let Some(path) = &args.histograms_out {
        store::write_histogram_csv(&histograms, path)?;
    }
    writeln!(stdout, "extracted {} {} feature rows to {}", rows.len(), scheme, args.out.display())
        .ok();
    Ok(())
}

fn quality_samples(rows: &[store::FeatureRow]) -> Vec<QualitySample> {
    rows.iter()
        .map(|r| LabeledSample::new(r.features.clone(), r.label))
        .collect()
}

fn check_scheme(rows: &[store::FeatureRow], expected: FeatureScheme) -> Result<()> {
    match rows.first() {
        Some(first) if first.features.scheme != expected => Err(Error::SchemeMismatch {
            expected: expected.to_string(),
            got: first.features.scheme.to_string(),
        }),
        None => Err(Error::InvalidInput("feature table has no rows".into())),
        _ => Ok(()),
    }
}

fn train(args: TrainArgs, stdout: &mut dyn Write, env_seed: Option<u64>) -> Result<()> {
    let scheme = FeatureScheme::from_str(&args.scheme)?;
    let rows = store::read_features_csv(&args.features)?;
    check_scheme(&rows, scheme)?;
    let samples = quality_samples(&rows);
    let seed = resolve_seed(args.seed, env_seed);
    let split = stratified_split(&samples, |s| s.label, args.ratio, seed)?;
    let cfg = TrainConfig {
        c: args.c,
        tolerance: args.tolerance,
        max_epochs: args.max_epochs,
        seed,
    };
    let model = train_binary(&split.train, &cfg)?;
    store::save_model(&model, &args.out)?;
    let report = evaluate_binary(&model, &split.train)?;
    writeln!(
        stdout,
        "trained {} model on {} beans (training accuracy {}), saved to {}",
        scheme,
        split.train.len(),
        format_percent(report.accuracy),
        args.out.display()
    )
    .ok();
    Ok(())
}

fn classify(args: ClassifyArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = store::load_model(&args.model)?;
    let rows = store::read_features_csv(&args.features)?;
    check_scheme(&rows, model.scheme)?;
    let mut verdicts = Vec::with_capacity(rows.len());
    for r in &rows {
        let z = decision_value(&model, &r.features)?;
        verdicts.push(store::VerdictRow {
            bean_id: r.features.bean_id.clone(),
            decision_value: z,
            verdict: predict(&model, &r.features)?,
        });
    }
    store::write_verdicts_csv(&verdicts, &args.out)?;
    let qualified = verdicts.iter().filter(|v| v.verdict == Quality::Qualified).count();
    writeln!(
        stdout,
        "classified {} beans ({qualified} qualified, {} defective) to {}",
        verdicts.len(),
        verdicts.len() - qualified,
        args.out.display()
    )
    .ok();
    Ok(())
}

fn eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = store::load_model(&args.model)?;
    let rows = store::read_features_csv(&args.features)?;
    check_scheme(&rows, model.scheme)?;
    let samples = quality_samples(&rows);
    let ratio = args.ratio.unwrap_or(0.4);
    let seed = args.seed.unwrap_or(model.train_config.seed);
    let (report, train_size) = if args.all {
        (evaluate_binary(&model, &samples)?, 0)
    } else {
        // Reproduce the training split: same ratio and seed partition the
        // table identically, so the test side stays held out.
        let split = stratified_split(&samples, |s| s.label, ratio, seed)?;
        (evaluate_binary(&model, &split.test)?, split.train.len())
    };
    let detail = SweepDetailRow {
        ratio,
        repeat: 0,
        seed,
        train_size,
        test_size: report.test_total,
        pq: report.pq,
        pd: report.pd,
        accuracy: report.accuracy,
    };
    store::write_report_csv(&[detail], &args.out)?;
    writeln!(stdout, "accuracy: {}", format_percent(report.accuracy)).ok();
    Ok(())
}

/// Parse `start:end:step` into a strictly increasing grid. The bounds are
/// snapped to 1/10000 so the grid values print as clean decimals.
fn parse_ratio_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidInput(format!(
            "ratio grid `{spec}` must look like start:end:step"
        )));
    }
    let mut nums = [0i64; 3];
    for (i, p) in parts.iter().enumerate() {
        let v: f64 = p
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad number `{p}` in ratio grid")))?;
        nums[i] = (v * 10_000.0).round() as i64;
    }
    let [start, end, step] = nums;
    if step <= 0 || start <= 0 || end >= 10_000 || start > end {
        return Err(Error::InvalidInput(format!(
            "ratio grid `{spec}` must satisfy 0 < start <= end < 1 with positive step"
        )));
    }
    let mut out = Vec::new();
    let mut r = start;
    while r <= end {
        out.push(r as f64 / 10_000.0);
        r += step;
    }
    Ok(out)
}

fn sweep(args: SweepArgs, stdout: &mut dyn Write, env_seed: Option<u64>) -> Result<()> {
    let scheme = FeatureScheme::from_str(&args.scheme)?;
    let rows = store::read_features_csv(&args.features)?;
    check_scheme(&rows, scheme)?;
    let samples = quality_samples(&rows);
    let ratios = parse_ratio_grid(&args.ratios)?;
    let cfg = TrainConfig {
        c: args.c,
        seed: resolve_seed(args.seed, env_seed),
        ..TrainConfig::default()
    };
    let result = ratio_sweep(&samples, &ratios, &cfg, args.repeats)?;
    store::write_sweep_csv(&result.rows, &args.out)?;
    if let Some(path) = &args.detail {
        store::write_report_csv(&result.detail, path)?;
    }
    writeln!(
        stdout,
        "swept {} ratio(s) x {} repeat(s), wrote {}",
        result.rows.len(),
        args.repeats,
        args.out.display()
    )
    .ok();
    Ok(())
}

fn sites(args: SitesArgs, stdout: &mut dyn Write, env_seed: Option<u64>) -> Result<()> {
    let rows = store::read_features_csv(&args.features)?;
    let samples: Vec<SiteSample> = rows
        .iter()
        .filter(|r| args.include_defective || r.label == Quality::Qualified)
        .map(|r| LabeledSample::new(r.features.clone(), r.site.clone()))
        .collect();
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "no usable rows (site discrimination uses qualified beans unless --include-defective)"
                .into(),
        ));
    }
    let seed = resolve_seed(args.seed, env_seed);
    let split = stratified_split(&samples, |s| s.label.clone(), args.ratio, seed)?;
    let cfg = TrainConfig { c: args.c, seed, ..TrainConfig::default() };
    let model = train_multiclass(&split.train, &cfg)?;
    let cm = confusion_matrix(&model, &split.test)?;
    store::write_confusion_csv(&cm, &args.out)?;
    if let Some(path) = &args.model_out {
        store::save_multiclass(&model, path)?;
    }
    writeln!(
        stdout,
        "site discrimination over {} site(s): accuracy {}",
        model.classes.len(),
        format_percent(cm.accuracy())
    )
    .ok();
    Ok(())
}

fn plot_cmd(args: PlotArgs, stdout: &mut dyn Write) -> Result<()> {
    let svg = match args.kind.as_str() {
        "scatter" => {
            let rows = store::read_features_csv(&args.r#in)?;
            let first = rows
                .first()
                .ok_or_else(|| Error::InvalidInput("feature table has no rows".into()))?;
            let scheme = first.features.scheme;
            if scheme.dimension() != 2 {
                return Err(Error::InvalidInput(format!(
                    "scatter needs a 2-component scheme, feature table is {scheme}"
                )));
            }
            let points: Vec<plot::ScatterPoint> = rows
                .iter()
                .map(|r| plot::ScatterPoint {
                    x: r.features.values[0],
                    y: r.features.values[1],
                    qualified: r.label == Quality::Qualified,
                })
                .collect();
            let separatrix = match &args.model {
                Some(path) => {
                    let model = store::load_model(path)?;
                    if model.scheme != scheme {
                        return Err(Error::SchemeMismatch {
                            expected: scheme.to_string(),
                            got: model.scheme.to_string(),
                        });
                    }
                    Some(plot::separatrix_coefficients(&model)?)
                }
                None => None,
            };
            plot::scatter_svg(&points, separatrix, "mean", "standard deviation", "mean vs std")?
        }
        "curves" => {
            let mut histograms = store::read_histogram_csv(&args.r#in)?;
            if let Some(ch) = &args.channel {
                let channel = Channel::from_str(ch)?;
                histograms.retain(|h| h.channel == channel);
            }
            if histograms.is_empty() {
                return Err(Error::InvalidInput("no curves left to plot".into()));
            }
            plot::curves_svg(&histograms, "grayscale distribution curves")?
        }
        "sweep" => {
            let rows = store::read_sweep_csv(&args.r#in)?;
            plot::sweep_svg(&rows, "accuracy vs training ratio")?
        }
        "confusion" => {
            let cm = store::read_confusion_csv(&args.r#in)?;
            plot::confusion_svg(&cm, "site confusion matrix")?
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown plot kind `{other}` (scatter|curves|sweep|confusion)"
            )))
        }
    };
    std::fs::write(&args.out, svg.as_bytes())
        .map_err(|e| Error::Io { path: args.out.clone(), source: e })?;
    writeln!(stdout, "wrote {}", args.out.display()).ok();
    Ok(())
}
