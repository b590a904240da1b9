//! Dataset splitting, accuracy bookkeeping (PQ/PD), confusion matrices,
//! and the train-ratio robustness sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use std::collections::BTreeMap;

use crate::classifier::{
    predict, predict_site, train_binary, LabeledSample, LinearModel, MulticlassModel, Quality,
    QualitySample, TrainConfig,
};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// A stratified train/test partition. `ratio` is the fraction of the whole
/// set assigned to training.
#[derive(Clone, Debug)]
pub struct DatasetSplit<S> {
    pub train: Vec<S>,
    pub test: Vec<S>,
    pub ratio: f64,
    pub seed: u64,
}

/// Per class, a seeded shuffle assigns the first round(ratio * class_size)
/// samples to the training side. Classes are processed in sorted label
/// order; the result is deterministic given (input order, seed).
pub fn stratified_split<S, K>(
    samples: &[S],
    label_of: impl Fn(&S) -> K,
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit<S>>
where
    S: Clone,
    K: Ord + std::fmt::Display,
{
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut by_class: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_class.entry(label_of(s)).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty sample set".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut indices) in by_class {
        let class_size = indices.len();
        // round half up
        let n_train = (ratio * class_size as f64).round() as usize;
        if n_train == 0 || n_train >= class_size {
            return Err(Error::DegenerateSplit(format!(
                "ratio {ratio} leaves class `{label}` with {n_train} train / {} test samples",
                class_size - n_train.min(class_size)
            )));
        }
        indices.shuffle(&mut rng);
        for &i in &indices[..n_train] {
            train.push(samples[i].clone());
        }
        for &i in &indices[n_train..] {
            test.push(samples[i].clone());
        }
    }
    Ok(DatasetSplit { train, test, ratio, seed })
}

/// PQ/PD counts and the accuracy rate over a test set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvaluationReport {
    /// Qualified test beans predicted qualified.
    pub pq: usize,
    /// Defective test beans predicted defective.
    pub pd: usize,
    pub test_total: usize,
    /// (pq + pd) / test_total.
    pub accuracy: f64,
}

pub fn evaluate_binary(model: &LinearModel, test: &[QualitySample]) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut pq = 0usize;
    let mut pd = 0usize;
    for s in test {
        let predicted = predict(model, &s.features)?;
        match (s.label, predicted) {
            (Quality::Qualified, Quality::Qualified) => pq += 1,
            (Quality::Defective, Quality::Defective) => pd += 1,
            _ => {}
        }
    }
    Ok(EvaluationReport {
        pq,
        pd,
        test_total: test.len(),
        accuracy: (pq + pd) as f64 / test.len() as f64,
    })
}

/// True-class x predicted-class cross-tabulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// counts[i][j] = samples of true class i predicted as class j.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != classes.len() || counts.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::InvalidInput(format!(
                "confusion matrix must be {0}x{0}",
                classes.len()
            )));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// trace / total.
    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

/// Run the one-vs-one model over a labeled test set.
pub fn confusion_matrix(
    model: &MulticlassModel,
    test: &[LabeledSample<String>],
) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let classes = model.classes.clone();
    let index_of = |label: &str| -> Result<usize> {
        classes
            .binary_search_by(|c| c.as_str().cmp(label))
            .map_err(|_| Error::InvalidInput(format!("test label `{label}` unknown to the model")))
    };
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for s in test {
        let ti = index_of(&s.label)?;
        let predicted = predict_site(model, &s.features)?;
        let pi = index_of(predicted)?;
        counts[ti][pi] += 1;
    }
    ConfusionMatrix::from_counts(classes, counts)
}

/// One aggregated sweep row: mean accuracy over the repeats of one ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub ratio: f64,
    pub accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Per-ratio base seed the repeat seeds derive from.
    pub seed: u64,
}

/// One split/train/evaluate run inside a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepDetailRow {
    pub ratio: f64,
    pub repeat: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub pq: usize,
    pub pd: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub detail: Vec<SweepDetailRow>,
}

/// The canonical 19-point ratio grid 0.05, 0.10, ..., 0.95.
pub fn default_ratio_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// For each ratio, run `repeats` seeded split -> train -> evaluate rounds
/// and record the mean accuracy. Seeds derive deterministically from
/// (cfg.seed, ratio index, repeat index).
pub fn ratio_sweep(
    samples: &[QualitySample],
    ratios: &[f64],
    cfg: &TrainConfig,
    repeats: usize,
) -> Result<SweepResult> {
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be >= 1".into()));
    }
    if ratios.is_empty() {
        return Err(Error::InvalidInput("ratio grid is empty".into()));
    }
    for pair in ratios.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::InvalidInput(format!(
                "ratios must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }

    let mut rows = Vec::with_capacity(ratios.len());
    let mut detail = Vec::with_capacity(ratios.len() * repeats);
    for (ri, &ratio) in ratios.iter().enumerate() {
        let ratio_seed = derive_seed(cfg.seed, &[ri as u64]);
        let mut acc_sum = 0.0;
        let mut train_size = 0;
        let mut test_size = 0;
        for rep in 0..repeats {
            let run_seed = derive_seed(ratio_seed, &[rep as u64]);
            let split = stratified_split(samples, |s| s.label, ratio, run_seed)
                .map_err(|e| match e {
                    Error::DegenerateSplit(d) => {
                        Error::DegenerateSplit(format!("at ratio {ratio}: {d}"))
                    }
                    other => other,
                })?;
            let run_cfg = TrainConfig { seed: run_seed, ..cfg.clone() };
            let model = train_binary(&split.train, &run_cfg)?;
            let report = evaluate_binary(&model, &split.test)?;
            acc_sum += report.accuracy;
            train_size = split.train.len();
            test_size = split.test.len();
            detail.push(SweepDetailRow {
                ratio,
                repeat: rep,
                seed: run_seed,
                train_size,
                test_size,
                pq: report.pq,
                pd: report.pd,
                accuracy: report.accuracy,
            });
        }
        rows.push(SweepRow {
            ratio,
            accuracy: acc_sum / repeats as f64,
            train_size,
            test_size,
            seed: ratio_seed,
        });
    }
    Ok(SweepResult { rows, detail })
}
