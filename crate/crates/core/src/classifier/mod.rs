//! Linear soft-margin SVM models: the binary qualified/defective decision
//! z = w·x − b, and a one-vs-one wrapper for site discrimination.

mod solver;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureScheme, FeatureVector};
use crate::seeding::derive_seed;

/// Binary quality label. Encoded as y = −1 (qualified) / +1 (defective) so
/// that z < 0 means qualified with no sign flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Qualified,
    Defective,
}

impl Quality {
    pub fn sign(self) -> f64 {
        match self {
            Quality::Qualified => -1.0,
            Quality::Defective => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Qualified => "qualified",
            Quality::Defective => "defective",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qualified" => Ok(Quality::Qualified),
            "defective" => Ok(Quality::Defective),
            other => Err(Error::InvalidInput(format!("unknown label `{other}`"))),
        }
    }
}

/// A feature vector paired with its ground-truth label.
#[derive(Clone, Debug)]
pub struct LabeledSample<L> {
    pub features: FeatureVector,
    pub label: L,
}

impl<L> LabeledSample<L> {
    pub fn new(features: FeatureVector, label: L) -> Self {
        LabeledSample { features, label }
    }
}

pub type QualitySample = LabeledSample<Quality>;
pub type SiteSample = LabeledSample<String>;

/// Per-component shift/scale applied to raw features before the dot
/// product; computed from training data and stored with the model so the
/// external contract stays on raw features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Identity transform (tests and hand-built models).
    pub fn identity(dim: usize) -> Self {
        Standardization {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Train-set mean and divide-by-n std per component, with the scale
    /// floored at 1e-9 so constant components stay finite.
    pub fn fit(vectors: &[&FeatureVector]) -> Self {
        let dim = vectors[0].values.len();
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(&v.values) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut scale = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in scale.iter_mut().zip(&v.values).zip(&mean) {
                let d = x - m;
                *s += d * d;
            }
        }
        for s in &mut scale {
            *s = (*s / n).sqrt().max(1e-9);
        }
        Standardization { mean, scale }
    }

    pub fn apply(&self, values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            values
                .iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .map(|((x, m), s)| (x - m) / s),
        );
    }
}

/// Meaning of the decision sign: z < 0 predicts `neg`, z >= 0 predicts `pos`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub neg: String,
    pub pos: String,
}

impl LabelMap {
    pub fn quality() -> Self {
        LabelMap {
            neg: Quality::Qualified.as_str().to_string(),
            pos: Quality::Defective.as_str().to_string(),
        }
    }

    pub fn sites(neg: impl Into<String>, pos: impl Into<String>) -> Self {
        LabelMap {
            neg: neg.into(),
            pos: pos.into(),
        }
    }
}

/// Solver parameters. The penalty c and the convergence tolerance are
/// exposed because no published values exist for them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            tolerance: 1e-3,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidInput(format!("c must be > 0, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidInput("max_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// A trained linear decision function z = w·x̃ − b over standardized
/// features x̃.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub scheme: FeatureScheme,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardization,
    pub label_map: LabelMap,
    pub train_config: TrainConfig,
    /// Per-class sample counts of the training set that produced the model.
    pub training_fingerprint: BTreeMap<String, usize>,
}

impl LinearModel {
    pub fn new(
        scheme: FeatureScheme,
        weights: Vec<f64>,
        bias: f64,
        standardization: Standardization,
        label_map: LabelMap,
    ) -> Result<Self> {
        if weights.len() != scheme.dimension()
            || standardization.mean.len() != scheme.dimension()
            || standardization.scale.len() != scheme.dimension()
        {
            return Err(Error::InvalidInput(format!(
                "model arrays must have {} components",
                scheme.dimension()
            )));
        }
        if standardization.scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput("standardization scales must be > 0".into()));
        }
        Ok(LinearModel {
            scheme,
            weights,
            bias,
            standardization,
            label_map,
            train_config: TrainConfig::default(),
            training_fingerprint: BTreeMap::new(),
        })
    }

    fn check_scheme(&self, x: &FeatureVector) -> Result<()> {
        if x.scheme != self.scheme {
            return Err(Error::SchemeMismatch {
                expected: self.scheme.to_string(),
                got: x.scheme.to_string(),
            });
        }
        Ok(())
    }
}

/// z = Σ_j w_j · (x_j − μ_j)/s_j − b.
pub fn decision_value(model: &LinearModel, x: &FeatureVector) -> Result<f64> {
    model.check_scheme(x)?;
    let mut z = -model.bias;
    for ((w, v), (m, s)) in model
        .weights
        .iter()
        .zip(&x.values)
        .zip(model.standardization.mean.iter().zip(&model.standardization.scale))
    {
        z += w * (v - m) / s;
    }
    Ok(z)
}

/// Qualified iff z < 0; the boundary z = 0 classifies as defective.
pub fn predict(model: &LinearModel, x: &FeatureVector) -> Result<Quality> {
    let z = decision_value(model, x)?;
    Ok(if z < 0.0 { Quality::Qualified } else { Quality::Defective })
}

/// Label-map-aware prediction (used by the one-vs-one wrapper).
pub fn predict_label<'m>(model: &'m LinearModel, x: &FeatureVector) -> Result<&'m str> {
    let z = decision_value(model, x)?;
    Ok(if z < 0.0 { &model.label_map.neg } else { &model.label_map.pos })
}

/// Per-epoch diagnostics from a training run.
#[derive(Clone, Debug)]
pub struct TrainTrace {
    /// Primal objective of the incumbent model after each epoch
    /// (non-increasing by construction).
    pub objective_per_epoch: Vec<f64>,
    pub epochs_run: usize,
    pub converged: bool,
    pub kkt_gap: f64,
}

fn common_scheme<L>(samples: &[LabeledSample<L>]) -> Result<FeatureScheme> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("empty training set".into()))?
        .features
        .scheme;
    for s in samples {
        if s.features.scheme != first {
            return Err(Error::SchemeMismatch {
                expected: first.to_string(),
                got: s.features.scheme.to_string(),
            });
        }
    }
    Ok(first)
}

fn train_signed(
    samples: &[&FeatureVector],
    y: &[f64],
    scheme: FeatureScheme,
    label_map: LabelMap,
    fingerprint: BTreeMap<String, usize>,
    cfg: &TrainConfig,
) -> (LinearModel, TrainTrace) {
    let standardization = Standardization::fit(samples);
    let dim = scheme.dimension();
    let mut x = Vec::with_capacity(samples.len() * dim);
    let mut buf = Vec::with_capacity(dim);
    for s in samples {
        standardization.apply(&s.values, &mut buf);
        x.extend_from_slice(&buf);
    }
    let problem = solver::Problem { x: &x, y, dim };
    let outcome = solver::solve(
        &problem,
        &solver::SolveOptions {
            c: cfg.c,
            tolerance: cfg.tolerance,
            max_epochs: cfg.max_epochs,
            seed: cfg.seed,
        },
    );
    let model = LinearModel {
        scheme,
        weights: outcome.weights,
        bias: outcome.bias,
        standardization,
        label_map,
        train_config: cfg.clone(),
        training_fingerprint: fingerprint,
    };
    let trace = TrainTrace {
        objective_per_epoch: outcome.objective_trace,
        epochs_run: outcome.epochs_run,
        converged: outcome.converged,
        kkt_gap: outcome.kkt_gap,
    };
    (model, trace)
}

/// Train the binary qualified/defective model.
pub fn train_binary(samples: &[QualitySample], cfg: &TrainConfig) -> Result<LinearModel> {
    train_binary_traced(samples, cfg).map(|(m, _)| m)
}

/// Same as [`train_binary`] but returns per-epoch solver diagnostics.
pub fn train_binary_traced(
    samples: &[QualitySample],
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainTrace)> {
    cfg.validate()?;
    let scheme = common_scheme(samples)?;
    let n_qualified = samples.iter().filter(|s| s.label == Quality::Qualified).count();
    let n_defective = samples.len() - n_qualified;
    if n_qualified == 0 || n_defective == 0 {
        let only = if n_qualified == 0 { Quality::Defective } else { Quality::Qualified };
        return Err(Error::SingleClassTrainingSet(only.to_string()));
    }
    let vectors: Vec<&FeatureVector> = samples.iter().map(|s| &s.features).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.label.sign()).collect();
    let mut fingerprint = BTreeMap::new();
    fingerprint.insert(Quality::Qualified.as_str().to_string(), n_qualified);
    fingerprint.insert(Quality::Defective.as_str().to_string(), n_defective);
    Ok(train_signed(&vectors, &y, scheme, LabelMap::quality(), fingerprint, cfg))
}

/// The soft-margin training objective of a model on a sample set:
/// (1/2)·||w||^2 + c·Σ max(0, 1 − y_i z_i) over standardized features.
pub fn objective(model: &LinearModel, samples: &[QualitySample], c: f64) -> Result<f64> {
    let mut hinge = 0.0;
    for s in samples {
        let z = decision_value(model, &s.features)?;
        hinge += (1.0 - s.label.sign() * z).max(0.0);
    }
    let reg: f64 = 0.5 * model.weights.iter().map(|w| w * w).sum::<f64>();
    Ok(reg + c * hinge)
}

/// One-vs-one multiclass model over site labels.
#[derive(Clone, Debug)]
pub struct MulticlassModel {
    /// Sorted site labels.
    pub classes: Vec<String>,
    /// One model per unordered class pair, in (i, j) order with i < j;
    /// classes[i] maps to the negative sign, classes[j] to the positive.
    pub pairwise: Vec<LinearModel>,
    pub scheme: FeatureScheme,
}

/// Train one binary model per unordered pair of site labels, each on the
/// pair's samples only.
pub fn train_multiclass(samples: &[SiteSample], cfg: &TrainConfig) -> Result<MulticlassModel> {
    cfg.validate()?;
    let scheme = common_scheme(samples)?;
    let mut classes: Vec<String> = samples.iter().map(|s| s.label.clone()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::FewerThanTwoClasses(classes.len()));
    }

    let mut pairwise = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
    let mut pair_index = 0u64;
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            let mut vectors = Vec::new();
            let mut y = Vec::new();
            let mut count_neg = 0usize;
            let mut count_pos = 0usize;
            for s in samples {
                if s.label == classes[i] {
                    vectors.push(&s.features);
                    y.push(-1.0);
                    count_neg += 1;
                } else if s.label == classes[j] {
                    vectors.push(&s.features);
                    y.push(1.0);
                    count_pos += 1;
                }
            }
            debug_assert!(count_neg > 0 && count_pos > 0);
            let mut fingerprint = BTreeMap::new();
            fingerprint.insert(classes[i].clone(), count_neg);
            fingerprint.insert(classes[j].clone(), count_pos);
            let pair_cfg = TrainConfig {
                seed: derive_seed(cfg.seed, &[pair_index]),
                ..cfg.clone()
            };
            let (model, _) = train_signed(
                &vectors,
                &y,
                scheme,
                LabelMap::sites(classes[i].clone(), classes[j].clone()),
                fingerprint,
                &pair_cfg,
            );
            pairwise.push(model);
            pair_index += 1;
        }
    }
    Ok(MulticlassModel { classes, pairwise, scheme })
}

/// Majority vote over the pairwise models. Ties break toward the larger
/// summed |z| over the tied labels' pairwise models, then class order.
pub fn predict_site<'m>(model: &'m MulticlassModel, x: &FeatureVector) -> Result<&'m str> {
    if model.classes.len() < 2 || model.pairwise.is_empty() {
        return Err(Error::FewerThanTwoClasses(model.classes.len()));
    }
    let mut votes = vec![0usize; model.classes.len()];
    let mut magnitude = vec![0.0f64; model.classes.len()];
    for pair in &model.pairwise {
        let z = decision_value(pair, x)?;
        let winner = if z < 0.0 { &pair.label_map.neg } else { &pair.label_map.pos };
        // Classes are sorted, so membership lookup is a binary search.
        let wi = model
            .classes
            .binary_search(&winner.to_string())
            .map_err(|_| Error::InvalidInput(format!("label `{winner}` missing from class list")))?;
        votes[wi] += 1;
        let ni = model.classes.binary_search(&pair.label_map.neg).unwrap_or(wi);
        let pi = model.classes.binary_search(&pair.label_map.pos).unwrap_or(wi);
        magnitude[ni] += z.abs();
        magnitude[pi] += z.abs();
    }
    let mut best = 0usize;
    for i in 1..model.classes.len() {
        if votes[i] > votes[best]
            || (votes[i] == votes[best] && magnitude[i] > magnitude[best])
        {
            best = i;
        }
    }
    Ok(&model.classes[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureScheme;
    use crate::imaging::Channel;
    use rand::{Rng, SeedableRng};

    fn fv2(x: f64, y: f64) -> FeatureVector {
        FeatureVector::new(FeatureScheme::TwoChannel(Channel::Red), vec![x, y], "b").unwrap()
    }

    fn toy_model(weights: Vec<f64>, bias: f64) -> LinearModel {
        LinearModel::new(
            FeatureScheme::TwoChannel(Channel::Red),
            weights,
            bias,
            Standardization::identity(2),
            LabelMap::quality(),
        )
        .unwrap()
    }

    #[test]
    fn decision_value_of_axis_weight() {
        let model = toy_model(vec![1.0, 0.0], 0.0);
        assert_eq!(decision_value(&model, &fv2(-1.0, 7.0)).unwrap(), -1.0);
    }

    #[test]
    fn decision_value_of_zero_model() {
        let model = toy_model(vec![0.0, 0.0], 0.0);
        assert_eq!(decision_value(&model, &fv2(3.0, -4.0)).unwrap(), 0.0);
    }

    #[test]
    fn decision_value_matches_dot_product_oracle() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        for _ in 0..100 {
            let weights: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mean: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let scale: Vec<f64> = (0..6).map(|_| rng.random_range(0.5..2.0)).collect();
            let bias = rng.random_range(-1.0..1.0);
            let model = LinearModel::new(
                FeatureScheme::SixStat,
                weights.clone(),
                bias,
                Standardization { mean: mean.clone(), scale: scale.clone() },
                LabelMap::quality(),
            )
            .unwrap();
            let values: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = FeatureVector::new(FeatureScheme::SixStat, values.clone(), "b").unwrap();
            let mut expected = -bias;
            for j in 0..6 {
                expected += weights[j] * (values[j] - mean[j]) / scale[j];
            }
            assert!((decision_value(&model, &x).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_boundary_is_defective() {
        let model = toy_model(vec![1.0, 0.0], 0.0);
        assert_eq!(predict(&model, &fv2(-1.0, 0.0)).unwrap(), Quality::Qualified);
        assert_eq!(predict(&model, &fv2(0.0, 0.0)).unwrap(), Quality::Defective);
        assert_eq!(predict(&model, &fv2(1.0, 0.0)).unwrap(), Quality::Defective);
    }

    #[test]
    fn predict_invariant_under_positive_scaling() {
        let model = toy_model(vec![0.8, -1.3], 0.4);
        let scaled = toy_model(vec![0.8 * 3.7, -1.3 * 3.7], 0.4 * 3.7);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(10);
        for _ in 0..200 {
            let x = fv2(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            assert_eq!(predict(&model, &x).unwrap(), predict(&scaled, &x).unwrap());
        }
    }

    #[test]
    fn scheme_mismatch_is_reported() {
        let model = toy_model(vec![1.0, 0.0], 0.0);
        let x = FeatureVector::new(FeatureScheme::SixStat, vec![0.0; 6], "b").unwrap();
        assert!(matches!(
            decision_value(&model, &x),
            Err(Error::SchemeMismatch { .. })
        ));
    }

    fn qsample(x: f64, y: f64, label: Quality) -> QualitySample {
        LabeledSample::new(fv2(x, y), label)
    }

    #[test]
    fn train_rejects_single_class() {
        let samples = vec![
            qsample(0.0, 0.0, Quality::Qualified),
            qsample(1.0, 1.0, Quality::Qualified),
        ];
        assert!(matches!(
            train_binary(&samples, &TrainConfig::default()),
            Err(Error::SingleClassTrainingSet(_))
        ));
    }

    #[test]
    fn train_separable_one_dim_instance() {
        let samples: Vec<QualitySample> = vec![
            (-2.0, Quality::Qualified),
            (-1.0, Quality::Qualified),
            (1.0, Quality::Defective),
            (2.0, Quality::Defective),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, (x, q))| {
            LabeledSample::new(
                FeatureVector::new(FeatureScheme::TwoChannel(Channel::Red), vec![x, 0.0], format!("b{i}")).unwrap(),
                q,
            )
        })
        .collect();
        let cfg = TrainConfig { c: 10.0, tolerance: 1e-6, ..TrainConfig::default() };
        let model = train_binary(&samples, &cfg).unwrap();
        for s in &samples {
            assert_eq!(predict(&model, &s.features).unwrap(), s.label);
            let z = decision_value(&model, &s.features).unwrap();
            assert!(z * s.label.sign() > 0.0);
        }
        assert_eq!(model.training_fingerprint["qualified"], 2);
        assert_eq!(model.training_fingerprint["defective"], 2);
    }

    #[test]
    fn objective_of_zero_model_is_c_times_n() {
        let model = toy_model(vec![0.0, 0.0], 0.0);
        let samples: Vec<QualitySample> = (0..7)
            .map(|i| qsample(i as f64, -(i as f64), if i % 2 == 0 { Quality::Qualified } else { Quality::Defective }))
            .collect();
        let c = 2.5;
        assert!((objective(&model, &samples, c).unwrap() - c * 7.0).abs() < 1e-12);
    }

    #[test]
    fn objective_of_wide_margin_separator_is_pure_regularizer() {
        let model = toy_model(vec![2.0, 0.0], 0.0);
        // Margins y*z = 2 >= 1 on every sample: hinge sum is zero.
        let samples = vec![
            qsample(-1.0, 0.0, Quality::Qualified),
            qsample(1.0, 0.0, Quality::Defective),
        ];
        let expected = 0.5 * 4.0;
        assert!((objective(&model, &samples, 10.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_direct_summation_oracle() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        for _ in 0..50 {
            let weights: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let bias = rng.random_range(-1.0..1.0);
            let model = toy_model(weights.clone(), bias);
            let samples: Vec<QualitySample> = (0..9)
                .map(|i| {
                    qsample(
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                        if i % 2 == 0 { Quality::Qualified } else { Quality::Defective },
                    )
                })
                .collect();
            let c = rng.random_range(0.1..5.0);
            let mut expected = 0.5 * (weights[0] * weights[0] + weights[1] * weights[1]);
            for s in &samples {
                let z = weights[0] * s.features.values[0] + weights[1] * s.features.values[1] - bias;
                expected += c * (1.0 - s.label.sign() * z).max(0.0);
            }
            assert!((objective(&model, &samples, c).unwrap() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let samples: Vec<QualitySample> = (0..40)
            .map(|i| {
                let q = if i % 2 == 0 { Quality::Qualified } else { Quality::Defective };
                qsample(
                    rng.random_range(-2.0..2.0) + q.sign(),
                    rng.random_range(-2.0..2.0),
                    q,
                )
            })
            .collect();
        let cfg = TrainConfig { seed: 77, ..TrainConfig::default() };
        let a = train_binary(&samples, &cfg).unwrap();
        let b = train_binary(&samples, &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
        assert_eq!(a.standardization, b.standardization);
    }

    #[test]
    fn separable_sets_reach_full_training_accuracy_with_large_c() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(33);
        for trial in 0..5 {
            // Random separable set: project onto a random direction with a gap.
            let dir = (rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64));
            let norm = (dir.0 * dir.0 + dir.1 * dir.1).sqrt().max(0.1);
            let dir = (dir.0 / norm, dir.1 / norm);
            let samples: Vec<QualitySample> = (0..30)
                .map(|i| {
                    let q = if i % 2 == 0 { Quality::Qualified } else { Quality::Defective };
                    let along = q.sign() * rng.random_range(0.5..2.0);
                    let across = rng.random_range(-2.0..2.0);
                    qsample(
                        dir.0 * along - dir.1 * across,
                        dir.1 * along + dir.0 * across,
                        q,
                    )
                })
                .collect();
            let cfg = TrainConfig { c: 100.0, tolerance: 1e-5, max_epochs: 2000, seed: trial };
            let model = train_binary(&samples, &cfg).unwrap();
            for s in &samples {
                assert_eq!(predict(&model, &s.features).unwrap(), s.label, "trial {trial}");
            }
        }
    }

    #[test]
    fn per_epoch_objective_is_non_increasing() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(55);
        for trial in 0..10 {
            let samples: Vec<QualitySample> = (0..24)
                .map(|i| {
                    let q = if i % 2 == 0 { Quality::Qualified } else { Quality::Defective };
                    qsample(
                        rng.random_range(-2.0..2.0) + 0.8 * q.sign(),
                        rng.random_range(-2.0..2.0),
                        q,
                    )
                })
                .collect();
            let cfg = TrainConfig { seed: trial, ..TrainConfig::default() };
            let (_, trace) = train_binary_traced(&samples, &cfg).unwrap();
            for pair in trace.objective_per_epoch.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-9, "objective rose: {pair:?}");
            }
        }
    }

    #[test]
    fn standardization_consistency_at_accuracy_level() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(91);
        let make = |shift: f64, scale: f64, rng: &mut rand_chacha::ChaCha12Rng| -> (Vec<QualitySample>, Vec<QualitySample>) {
            let mut rng2 = rng.clone();
            let mut sample_set = |n: usize| -> Vec<QualitySample> {
                (0..n)
                    .map(|i| {
                        let q = if i % 2 == 0 { Quality::Qualified } else { Quality::Defective };
                        let x = rng2.random_range(-2.0..2.0f64) + 1.2 * q.sign();
                        let y = rng2.random_range(-2.0..2.0f64) - 0.5 * q.sign();
                        qsample(x * scale + shift, y * scale + shift, q)
                    })
                    .collect()
            };
            (sample_set(60), sample_set(40))
        };
        let (train_raw, test_raw) = make(0.0, 1.0, &mut rng);
        let (train_tx, test_tx) = make(10.0, 2.0, &mut rng);
        let cfg = TrainConfig { seed: 5, ..TrainConfig::default() };
        let m_raw = train_binary(&train_raw, &cfg).unwrap();
        let m_tx = train_binary(&train_tx, &cfg).unwrap();
        let acc = |m: &LinearModel, set: &[QualitySample]| {
            set.iter()
                .filter(|s| predict(m, &s.features).unwrap() == s.label)
                .count()
        };
        assert_eq!(acc(&m_raw, &test_raw), acc(&m_tx, &test_tx));
    }

    fn site_sample(x: f64, y: f64, site: &str) -> SiteSample {
        LabeledSample::new(fv2(x, y), site.to_string())
    }

    #[test]
    fn two_site_model_has_one_pair_and_matches_binary_route() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(123);
        let mut samples = Vec::new();
        for i in 0..30 {
            let site = if i % 2 == 0 { "alpha" } else { "beta" };
            let offset = if i % 2 == 0 { -1.5 } else { 1.5 };
            samples.push(site_sample(
                rng.random_range(-1.0..1.0) + offset,
                rng.random_range(-1.0..1.0),
                site,
            ));
        }
        let cfg = TrainConfig::default();
        let model = train_multiclass(&samples, &cfg).unwrap();
        assert_eq!(model.pairwise.len(), 1);
        assert_eq!(model.classes, vec!["alpha".to_string(), "beta".to_string()]);
        for s in &samples {
            let via_vote = predict_site(&model, &s.features).unwrap();
            let via_pair = predict_label(&model.pairwise[0], &s.features).unwrap();
            assert_eq!(via_vote, via_pair);
        }
    }

    #[test]
    fn three_sites_yield_three_pairwise_models() {
        let mut samples = Vec::new();
        for (k, (site, cx)) in [("s1", -3.0), ("s2", 0.0), ("s3", 3.0)].into_iter().enumerate() {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1000 + k as u64);
            for _ in 0..20 {
                samples.push(site_sample(
                    cx + rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    site,
                ));
            }
        }
        let model = train_multiclass(&samples, &TrainConfig::default()).unwrap();
        assert_eq!(model.pairwise.len(), 3);
        // Well separated: every pairwise model classifies its own classes.
        for s in &samples {
            assert_eq!(predict_site(&model, &s.features).unwrap(), s.label);
        }
    }

    #[test]
    fn vote_tally_matches_hand_enumeration() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(222);
        let mut samples = Vec::new();
        for (site, cx, cy) in [("a", -2.0, 0.0), ("b", 2.0, 0.0), ("c", 0.0, 2.5)] {
            for _ in 0..12 {
                samples.push(site_sample(
                    cx + rng.random_range(-0.8..0.8),
                    cy + rng.random_range(-0.8..0.8),
                    site,
                ));
            }
        }
        let model = train_multiclass(&samples, &TrainConfig::default()).unwrap();
        for _ in 0..50 {
            let x = fv2(rng.random_range(-3.0..3.0), rng.random_range(-1.0..3.5));
            // Hand tally: enumerate the three pairwise votes.
            let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
            let mut magnitude: BTreeMap<&str, f64> = BTreeMap::new();
            for pair in &model.pairwise {
                let z = decision_value(pair, &x).unwrap();
                let w = if z < 0.0 { pair.label_map.neg.as_str() } else { pair.label_map.pos.as_str() };
                *votes.entry(w).or_default() += 1;
                *magnitude.entry(pair.label_map.neg.as_str()).or_default() += z.abs();
                *magnitude.entry(pair.label_map.pos.as_str()).or_default() += z.abs();
            }
            let best = model
                .classes
                .iter()
                .max_by(|a, b| {
                    let va = votes.get(a.as_str()).copied().unwrap_or(0);
                    let vb = votes.get(b.as_str()).copied().unwrap_or(0);
                    va.cmp(&vb).then(
                        magnitude
                            .get(a.as_str())
                            .copied()
                            .unwrap_or(0.0)
                            .partial_cmp(&magnitude.get(b.as_str()).copied().unwrap_or(0.0))
                            .unwrap(),
                    )
                })
                .unwrap();
            assert_eq!(predict_site(&model, &x).unwrap(), best.as_str());
        }
    }

    #[test]
    fn multiclass_needs_two_classes() {
        let samples = vec![site_sample(0.0, 0.0, "only"), site_sample(1.0, 1.0, "only")];
        assert!(matches!(
            train_multiclass(&samples, &TrainConfig::default()),
            Err(Error::FewerThanTwoClasses(1))
        ));
    }
}
