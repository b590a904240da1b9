//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them).
//!
//! Criteria 1-4 pin published arithmetic bit-exactly; 5 checks solver
//! optimality against a brute-force grid; 6-9 are property checks on
//! seeded synthetic data; 10 checks byte-level reproducibility of the CLI.

use std::path::Path;
use std::sync::OnceLock;

use beanscope_cli::run_with_io;
use beanscope_core::classifier::{
    objective, train_binary, train_binary_traced, train_multiclass, LabeledSample, Quality,
    QualitySample, TrainConfig,
};
use beanscope_core::evaluation::{
    confusion_matrix, default_ratio_grid, evaluate_binary, ratio_sweep, stratified_split,
    ConfusionMatrix,
};
use beanscope_core::features::{
    extract_hist768, extract_six, extract_two, fit_gaussian_mle, ChannelHistogram, FeatureScheme,
    FeatureVector,
};
use beanscope_core::imaging::{is_background, Channel, Pixel};
use beanscope_core::seeding::derive_seed;
use beanscope_core::synth::{
    default_defect_profile, default_site_profiles, gen_defective_bean, gen_qualified_bean,
    BeanAxes, DefectProfile, SiteProfile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn pass(n: usize, name: &str) {
    println!("ACCEPTANCE {n} ({name}): PASS");
}

#[test]
fn acceptance_01_segmentation_fidelity() {
    // The two published worked pixels at threshold 163, bit-exact.
    assert!(!is_background(Pixel::new(120, 170, 85), 163), "(120,170,85) must be bean");
    assert!(is_background(Pixel::new(180, 170, 205), 163), "(180,170,205) must be background");
    pass(1, "segmentation fidelity");
}

#[test]
fn acceptance_02_confusion_matrix_arithmetic() {
    let cm = ConfusionMatrix::from_counts(
        vec!["site1".into(), "site2".into(), "site3".into()],
        vec![vec![114, 30, 10], vec![23, 500, 15], vec![8, 22, 128]],
    )
    .unwrap();
    assert_eq!(cm.trace(), 742);
    assert_eq!(cm.total(), 850);
    // Within 0.01 percentage point of 87.29%.
    assert!((cm.accuracy() * 100.0 - 87.29).abs() <= 0.01, "accuracy {}", cm.accuracy());
    assert_eq!(beanscope_core::format_percent(cm.accuracy()), "87.29%");
    pass(2, "confusion-matrix arithmetic");
}

fn toy_feature(x: f64, y: f64, id: &str) -> FeatureVector {
    FeatureVector::new(FeatureScheme::TwoChannel(Channel::Red), vec![x, y], id).unwrap()
}

#[test]
fn acceptance_03_split_sizes_and_default_grid() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let samples: Vec<QualitySample> = (0..600)
        .map(|i| {
            let q = if i < 300 { Quality::Qualified } else { Quality::Defective };
            LabeledSample::new(
                toy_feature(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), &format!("b{i}")),
                q,
            )
        })
        .collect();
    let split = stratified_split(&samples, |s| s.label, 0.4, 99).unwrap();
    let count = |set: &[QualitySample], q: Quality| set.iter().filter(|s| s.label == q).count();
    assert_eq!(count(&split.train, Quality::Qualified), 120);
    assert_eq!(count(&split.train, Quality::Defective), 120);
    assert_eq!(count(&split.test, Quality::Qualified), 180);
    assert_eq!(count(&split.test, Quality::Defective), 180);

    let grid = default_ratio_grid();
    assert_eq!(grid.len(), 19);
    assert_eq!(grid.first().copied(), Some(0.05));
    assert_eq!(grid.last().copied(), Some(0.95));
    pass(3, "split sizes and 19-row ratio grid");
}

#[test]
fn acceptance_04_mle_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    for trial in 0..1000 {
        // Random occupancy: between 1 and 4096 pixels spread over the bins.
        let pixels = rng.random_range(1..4096u32);
        let mut counts = [0u64; 256];
        for _ in 0..pixels {
            counts[rng.random_range(0..256usize)] += 1;
        }
        let h = ChannelHistogram { channel: Channel::Red, counts, total: pixels as u64 };
        let fit = fit_gaussian_mle(&h).unwrap();

        // Independent direct-summation oracle over the expanded values.
        let mut sum = 0.0f64;
        let mut n = 0.0f64;
        for (v, &c) in counts.iter().enumerate() {
            sum += (v * c as usize) as f64;
            n += c as f64;
        }
        let mean = sum / n;
        let mut sq = 0.0f64;
        for (v, &c) in counts.iter().enumerate() {
            sq += c as f64 * (v as f64 - mean) * (v as f64 - mean);
        }
        let std = (sq / n).sqrt();
        assert!((fit.mean - mean).abs() < 1e-9, "trial {trial}: mean {} vs {mean}", fit.mean);
        assert!((fit.std - std).abs() < 1e-9, "trial {trial}: std {} vs {std}", fit.std);
    }
    pass(4, "MLE matches direct-summation oracle over 1000 histograms");
}

// --- criterion 5: solver vs dense grid search ------------------------------

struct ToyInstance {
    /// Standardized coordinates, row-major 4x2.
    x: [[f64; 2]; 4],
    y: [f64; 4],
}

/// Hinge sum at a given bias for fixed per-sample scores.
fn hinge_sum(scores: &[f64], y: &[f64], b: f64) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| (1.0 - yi * (s - b)).max(0.0))
        .sum()
}

/// Minimum of the objective over the b lattice for fixed (w1, w2), exact by
/// convexity: the hinge sum is convex piecewise-linear in b, so the lattice
/// minimum sits at a lattice point inside the flat optimal interval or at
/// one of the two lattice points bracketing it.
fn best_b_on_lattice(scores: &[f64], y: &[f64], b_min: f64, steps: usize, step: f64) -> f64 {
    let mut breakpoints: Vec<f64> = scores.iter().zip(y).map(|(&s, &yi)| s - yi).collect();
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_neg = y.iter().filter(|&&v| v < 0.0).count();
    let lo = breakpoints[n_neg - 1];
    let hi = breakpoints[n_neg];
    let clamp_idx = |k: f64| -> usize { k.max(0.0).min(steps as f64) as usize };
    let k_lo = clamp_idx(((lo - b_min) / step).floor());
    let k_hi = clamp_idx(((hi - b_min) / step).ceil());
    let mut best = f64::INFINITY;
    for k in [k_lo, k_lo + 1, k_hi.saturating_sub(1), k_hi] {
        let k = k.min(steps);
        let b = b_min + k as f64 * step;
        best = best.min(hinge_sum(scores, y, b));
    }
    // A lattice point inside the flat interval, when one exists.
    let k_in = clamp_idx(((lo - b_min) / step).ceil());
    let b_in = b_min + k_in as f64 * step;
    if b_in <= hi {
        best = best.min(hinge_sum(scores, y, b_in));
    }
    best
}

/// Dense grid-search minimum of 0.5*||w||^2 + c*hinge over
/// (w1, w2, b) in [-5, 5]^3 at step 0.01.
fn grid_search_minimum(inst: &ToyInstance, c: f64) -> f64 {
    let step = 0.01;
    let steps = 1000usize; // 1001 lattice values per axis
    let lo = -5.0;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let w1 = lo + i as f64 * step;
        for j in 0..=steps {
            let w2 = lo + j as f64 * step;
            let reg = 0.5 * (w1 * w1 + w2 * w2);
            if reg >= best {
                continue; // the hinge term cannot be negative
            }
            let scores = [
                w1 * inst.x[0][0] + w2 * inst.x[0][1],
                w1 * inst.x[1][0] + w2 * inst.x[1][1],
                w1 * inst.x[2][0] + w2 * inst.x[2][1],
                w1 * inst.x[3][0] + w2 * inst.x[3][1],
            ];
            let hinge = best_b_on_lattice(&scores, &inst.y, lo, steps, step);
            best = best.min(reg + c * hinge);
        }
    }
    best
}

/// Literal triple-loop lattice scan, for cross-checking the fast oracle.
fn grid_search_literal(inst: &ToyInstance, c: f64, lo: f64, steps: usize, step: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let w1 = lo + i as f64 * step;
        for j in 0..=steps {
            let w2 = lo + j as f64 * step;
            let scores = [
                w1 * inst.x[0][0] + w2 * inst.x[0][1],
                w1 * inst.x[1][0] + w2 * inst.x[1][1],
                w1 * inst.x[2][0] + w2 * inst.x[2][1],
                w1 * inst.x[3][0] + w2 * inst.x[3][1],
            ];
            for k in 0..=steps {
                let b = lo + k as f64 * step;
                let obj = 0.5 * (w1 * w1 + w2 * w2) + c * hinge_sum(&scores, &inst.y, b);
                best = best.min(obj);
            }
        }
    }
    best
}

/// Random separable 4-point instance: two points per class on opposite
/// sides of a random line, margin at least 0.7, spread on both axes.
fn random_separable_instance(seed: u64) -> Vec<QualitySample> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let u = (theta.cos(), theta.sin());
    let v = (-theta.sin(), theta.cos());
    let offset: f64 = rng.random_range(-0.25..0.25);
    let mut samples = Vec::new();
    for (i, (side, t_sign)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        let along = offset + side * rng.random_range(0.35..0.65);
        let across = t_sign * rng.random_range(0.3..0.9);
        let x = u.0 * along + v.0 * across;
        let y = u.1 * along + v.1 * across;
        let label = if side > 0.0 { Quality::Defective } else { Quality::Qualified };
        samples.push(LabeledSample::new(toy_feature(x, y, &format!("p{i}")), label));
    }
    samples
}

#[test]
fn acceptance_05_svm_grid_search_optimality() {
    let c = 10.0;

    // Cross-check the convexity-folded oracle against a literal 3-D scan
    // on a coarser lattice first.
    {
        let samples = random_separable_instance(900);
        let inst = ToyInstance {
            x: [
                [samples[0].features.values[0], samples[0].features.values[1]],
                [samples[1].features.values[0], samples[1].features.values[1]],
                [samples[2].features.values[0], samples[2].features.values[1]],
                [samples[3].features.values[0], samples[3].features.values[1]],
            ],
            y: [1.0, 1.0, -1.0, -1.0],
        };
        let steps = 100usize;
        let step = 0.05;
        let lo = -2.5;
        let literal = grid_search_literal(&inst, c, lo, steps, step);
        let mut folded = f64::INFINITY;
        for i in 0..=steps {
            let w1 = lo + i as f64 * step;
            for j in 0..=steps {
                let w2 = lo + j as f64 * step;
                let scores = [
                    w1 * inst.x[0][0] + w2 * inst.x[0][1],
                    w1 * inst.x[1][0] + w2 * inst.x[1][1],
                    w1 * inst.x[2][0] + w2 * inst.x[2][1],
                    w1 * inst.x[3][0] + w2 * inst.x[3][1],
                ];
                let hinge = best_b_on_lattice(&scores, &inst.y, lo, steps, step);
                folded = folded.min(0.5 * (w1 * w1 + w2 * w2) + c * hinge);
            }
        }
        assert!(
            (literal - folded).abs() < 1e-12,
            "fold-over-b oracle disagrees with the literal scan: {literal} vs {folded}"
        );
    }

    for trial in 0..20u64 {
        let samples = random_separable_instance(1000 + trial);
        let cfg = TrainConfig {
            c,
            tolerance: 1e-6,
            max_epochs: 20_000,
            seed: trial,
        };
        let (model, trace) = train_binary_traced(&samples, &cfg).unwrap();
        assert!(trace.converged, "trial {trial} did not converge");
        for pair in trace.objective_per_epoch.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "trial {trial}: objective rose {pair:?}");
        }
        let trained_obj = objective(&model, &samples, c).unwrap();

        // Grid in the same standardized space the solver optimized.
        let std_pt = |s: &QualitySample| {
            [
                (s.features.values[0] - model.standardization.mean[0]) / model.standardization.scale[0],
                (s.features.values[1] - model.standardization.mean[1]) / model.standardization.scale[1],
            ]
        };
        let inst = ToyInstance {
            x: [
                std_pt(&samples[0]),
                std_pt(&samples[1]),
                std_pt(&samples[2]),
                std_pt(&samples[3]),
            ],
            y: [
                samples[0].label.sign(),
                samples[1].label.sign(),
                samples[2].label.sign(),
                samples[3].label.sign(),
            ],
        };
        let grid_min = grid_search_minimum(&inst, c);
        assert!(
            trained_obj <= grid_min * 1.01 + 1e-12,
            "trial {trial}: trained objective {trained_obj} exceeds grid minimum {grid_min} by >1%"
        );
    }
    pass(5, "SVM within 1% of grid-search optimum, monotone epochs, 20 instances");
}

// --- criteria 6-8: seeded synthetic site-1 analogue ------------------------

struct BeanBank {
    six: Vec<QualitySample>,
    two: [Vec<QualitySample>; 3],
}

fn bean_bank() -> &'static BeanBank {
    static BANK: OnceLock<BeanBank> = OnceLock::new();
    BANK.get_or_init(|| {
        let site = default_site_profiles().remove(0);
        let defect = default_defect_profile();
        let mut six = Vec::with_capacity(600);
        let mut two: [Vec<QualitySample>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for i in 0..300u64 {
            let q = gen_qualified_bean(&site, derive_seed(0x6e6e, &[i, 0]));
            let d = gen_defective_bean(&defect, derive_seed(0x6e6e, &[i, 1]));
            for (bean, label) in [(&q, Quality::Qualified), (&d, Quality::Defective)] {
                six.push(LabeledSample::new(extract_six(bean).unwrap(), label));
                for ch in Channel::ALL {
                    two[ch.index()]
                        .push(LabeledSample::new(extract_two(bean, ch).unwrap(), label));
                }
            }
        }
        BeanBank { six, two }
    })
}

#[test]
fn acceptance_06_end_to_end_scheme_accuracy() {
    let bank = bean_bank();
    let cfg = TrainConfig { seed: 616, ..TrainConfig::default() };

    let split = stratified_split(&bank.six, |s| s.label, 0.4, 616).unwrap();
    assert_eq!(split.train.len(), 240);
    assert_eq!(split.test.len(), 360);
    let model = train_binary(&split.train, &cfg).unwrap();
    let six_accuracy = evaluate_binary(&model, &split.test).unwrap().accuracy;
    assert!(six_accuracy >= 0.95, "six-stat accuracy {six_accuracy}");

    let mut channel_accuracies = Vec::new();
    for ch in Channel::ALL {
        let samples = &bank.two[ch.index()];
        let split = stratified_split(samples, |s| s.label, 0.4, 616).unwrap();
        let model = train_binary(&split.train, &cfg).unwrap();
        let acc = evaluate_binary(&model, &split.test).unwrap().accuracy;
        assert!(acc >= 0.85, "{ch} two-stat accuracy {acc}");
        channel_accuracies.push(acc);
    }
    pass(6, "scheme A >= 95%, every single-channel scheme B >= 85%");
}

#[test]
fn acceptance_07_ratio_insensitivity_of_scheme_a() {
    let bank = bean_bank();
    let cfg = TrainConfig { seed: 717, ..TrainConfig::default() };
    let sweep = ratio_sweep(&bank.six, &default_ratio_grid(), &cfg, 5).unwrap();
    assert_eq!(sweep.rows.len(), 19);
    let max = sweep.rows.iter().map(|r| r.accuracy).fold(f64::MIN, f64::max);
    let min = sweep.rows.iter().map(|r| r.accuracy).fold(f64::MAX, f64::min);
    assert!(
        max - min <= 0.06,
        "scheme-A spread {:.4} exceeds 6 percentage points (min {min}, max {max})",
        max - min
    );
    pass(7, "scheme-A accuracy spread <= 6 points across ratios 0.05-0.95");
}

/// Harder synthetic configuration for the high-dimensional scheme: smaller
/// beans (noisier histograms) and defect modes overlapping the qualified
/// band, so accuracy depends on how much training data is available.
fn hard_dataset() -> Vec<QualitySample> {
    let axes = BeanAxes { semi_major: (10, 13), semi_minor: (8, 10) };
    let site = SiteProfile {
        site_id: "hard".into(),
        channel_means: [115.0, 95.0, 70.0],
        channel_stds: [18.0, 16.0, 15.0],
        bean_axes: axes,
    };
    let defect = DefectProfile {
        mode_count_range: (3, 5),
        mode_mean_ranges: [(70.0, 160.0), (55.0, 140.0), (35.0, 110.0)],
        mode_std_range: (6.0, 18.0),
        per_bean_seed_mix: true,
        bean_axes: axes,
    };
    let mut samples = Vec::with_capacity(600);
    for i in 0..300u64 {
        let q = gen_qualified_bean(&site, derive_seed(0x8a8d, &[i, 0]));
        samples.push(LabeledSample::new(extract_hist768(&q).unwrap(), Quality::Qualified));
        let d = gen_defective_bean(&defect, derive_seed(0x8a8d, &[i, 1]));
        samples.push(LabeledSample::new(extract_hist768(&d).unwrap(), Quality::Defective));
    }
    samples
}

#[test]
fn acceptance_08_scheme_s_needs_more_training_data() {
    let samples = hard_dataset();
    let cfg = TrainConfig { seed: 818, ..TrainConfig::default() };
    let sweep = ratio_sweep(&samples, &[0.05, 0.40], &cfg, 5).unwrap();
    let at_005 = sweep.rows[0].accuracy;
    let at_040 = sweep.rows[1].accuracy;
    assert!(
        at_005 < at_040,
        "hist768 accuracy must rise with the training ratio: {at_005} at 0.05 vs {at_040} at 0.40"
    );
    pass(8, "scheme-S accuracy at ratio 0.05 strictly below ratio 0.40");
}

#[test]
fn acceptance_09_site_discrimination() {
    let profiles = default_site_profiles();
    let sites = &profiles[..3];
    // Pairwise max channel-mean separation is at least 15 gray levels.
    for a in 0..3 {
        for b in a + 1..3 {
            let sep = (0..3)
                .map(|c| (sites[a].channel_means[c] - sites[b].channel_means[c]).abs())
                .fold(f64::MIN, f64::max);
            assert!(sep >= 15.0, "sites {a}/{b} separated by only {sep}");
        }
    }
    let mut samples = Vec::new();
    for (si, site) in sites.iter().enumerate() {
        for i in 0..100u64 {
            let bean = gen_qualified_bean(site, derive_seed(0x919, &[si as u64, i]));
            samples.push(LabeledSample::new(
                extract_six(&bean).unwrap(),
                site.site_id.clone(),
            ));
        }
    }
    let split = stratified_split(&samples, |s| s.label.clone(), 0.4, 919).unwrap();
    let cfg = TrainConfig { seed: 919, ..TrainConfig::default() };
    let model = train_multiclass(&split.train, &cfg).unwrap();
    assert_eq!(model.pairwise.len(), 3);
    let cm = confusion_matrix(&model, &split.test).unwrap();
    assert!(cm.accuracy() >= 0.85, "multiclass accuracy {}", cm.accuracy());
    pass(9, "one-vs-one site discrimination >= 85% over three sites");
}

// --- criterion 10: byte-identical CLI reruns --------------------------------

fn run_cli(dir: &Path, args: &[&str]) {
    let mut argv = vec!["beanscope".to_string()];
    argv.extend(args.iter().map(|a| a.replace('@', dir.to_str().unwrap())));
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let code = run_with_io(&argv, &mut stdout, &mut stderr, None);
    assert_eq!(code, 0, "{args:?}: {}", String::from_utf8_lossy(&stderr));
}

/// One full pipeline into `root`, producing every artifact kind.
fn run_pipeline(root: &Path) {
    std::fs::create_dir_all(root).unwrap();
    run_cli(root, &[
        "gen", "--site-profile", "default1,default2", "--qualified", "24", "--defective", "24",
        "--grid", "5x5", "--seed", "1010", "--out", "@/ds", "--emit-profiles", "@/profiles.json",
    ]);
    run_cli(root, &[
        "extract", "--manifest", "@/ds/manifest.csv", "--scheme", "six", "--out", "@/six.csv",
    ]);
    run_cli(root, &[
        "extract", "--manifest", "@/ds/manifest.csv", "--scheme", "two-r", "--out", "@/two.csv",
        "--histograms-out", "@/hist.csv",
    ]);
    run_cli(root, &[
        "train", "--features", "@/six.csv", "--scheme", "six", "--ratio", "0.4", "--seed",
        "1010", "--out", "@/model.json",
    ]);
    run_cli(root, &[
        "train", "--features", "@/two.csv", "--scheme", "two-r", "--ratio", "0.4", "--seed",
        "1010", "--out", "@/model2.json",
    ]);
    run_cli(root, &[
        "eval", "--features", "@/six.csv", "--model", "@/model.json", "--ratio", "0.4", "--out",
        "@/report.csv",
    ]);
    run_cli(root, &[
        "classify", "--features", "@/six.csv", "--model", "@/model.json", "--out", "@/verdicts.csv",
    ]);
    run_cli(root, &[
        "sweep", "--features", "@/six.csv", "--scheme", "six", "--ratios", "0.2:0.8:0.2",
        "--repeats", "2", "--seed", "1010", "--out", "@/sweep.csv", "--detail", "@/detail.csv",
    ]);
    run_cli(root, &[
        "sites", "--features", "@/six.csv", "--ratio", "0.5", "--seed", "1010", "--out",
        "@/cm.csv", "--model-out", "@/sites.json",
    ]);
    run_cli(root, &["segment", "@/ds/default1_snap000.ppm", "--out-dir", "@/crops"]);
    run_cli(root, &[
        "plot", "--kind", "scatter", "--in", "@/two.csv", "--model", "@/model2.json", "--out",
        "@/fig_scatter.svg",
    ]);
    run_cli(root, &["plot", "--kind", "curves", "--in", "@/hist.csv", "--out", "@/fig_curves.svg"]);
    run_cli(root, &["plot", "--kind", "sweep", "--in", "@/sweep.csv", "--out", "@/fig_sweep.svg"]);
    run_cli(root, &["plot", "--kind", "confusion", "--in", "@/cm.csv", "--out", "@/fig_cm.svg"]);
}

fn collect_files(root: &Path, prefix: &Path, out: &mut Vec<String>) {
    for entry in std::fs::read_dir(root).unwrap() {
        let entry = entry.unwrap();
        let rel = prefix.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            collect_files(&entry.path(), &rel, out);
        } else {
            out.push(rel.to_str().unwrap().to_string());
        }
    }
}

#[test]
fn acceptance_10_cli_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_pipeline(&a);
    run_pipeline(&b);

    let mut files_a = Vec::new();
    collect_files(&a, Path::new(""), &mut files_a);
    files_a.sort();
    let mut files_b = Vec::new();
    collect_files(&b, Path::new(""), &mut files_b);
    files_b.sort();
    assert_eq!(files_a, files_b, "both runs produce the same file set");
    assert!(files_a.len() >= 20, "pipeline produced {} files", files_a.len());
    for rel in &files_a {
        let bytes_a = std::fs::read(a.join(rel)).unwrap();
        let bytes_b = std::fs::read(b.join(rel)).unwrap();
        assert_eq!(bytes_a, bytes_b, "file {rel} differs between reruns");
    }
    pass(10, "every CLI artifact byte-identical across reruns");
}
