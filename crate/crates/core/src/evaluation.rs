//! Binary classification scoring and k-fold cross-validation.
//!
//! Class 1 is the positive class ("passed"), class 0 the negative one.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::trainer::{self, Trainer};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Actual positives, `tp + fn`.
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    /// Actual negatives, `tn + fp`.
    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.tp + rhs.tp, self.fp + rhs.fp, self.fn_ + rhs.fn_, self.tn + rhs.tn)
    }
}

pub fn confusion_matrix(predicted: &[usize], actual: &[usize]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            what: "predicted labels",
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            (bad, 0 | 1) | (_, bad) => return Err(Error::NonBinaryLabel(bad)),
        }
    }
    Ok(cm)
}

/// Rates derived from a confusion matrix. `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Sensitivity, specificity, PPV, NPV and accuracy. `auc` is left unset.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(MetricsReport {
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_),
        specificity: ratio(cm.tn, cm.tn + cm.fp),
        ppv: ratio(cm.tp, cm.tp + cm.fp),
        npv: ratio(cm.tn, cm.tn + cm.fn_),
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        auc: None,
    })
}

/// Area under the ROC curve via average ranks (Mann-Whitney U), ties
/// counting one half. `None` unless both classes are present.
pub fn auc(scores: &[f64], actual: &[usize]) -> Result<Option<f64>> {
    if scores.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            what: "scores",
            expected: actual.len(),
            actual: scores.len(),
        });
    }
    if let Some(&bad) = actual.iter().find(|&&l| l > 1) {
        return Err(Error::NonBinaryLabel(bad));
    }
    let n_pos = actual.iter().filter(|&&l| l == 1).count();
    let n_neg = actual.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum_pos += mean_rank * order[i..=j].iter().filter(|&&k| actual[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(Some(u / (n_pos * n_neg) as f64))
}

/// Drops everything past `decimals` places, the way tabulated results are
/// usually reported (0.9487 → 0.94).
pub fn truncate_decimals(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    // nudge so that values like 0.29 (= 28.999…/100) are not cut a unit short
    (x * scale + 1e-9).floor() / scale
}

/// Truncated to `decimals` places; undefined renders as `n/a`.
pub fn format_metric(x: Option<f64>, decimals: u32) -> String {
    match x {
        Some(v) => format!("{:.*}", decimals as usize, truncate_decimals(v, decimals)),
        None => "n/a".to_string(),
    }
}

/// Fold index for every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub membership: Vec<usize>,
}

impl FoldAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.membership {
            sizes[f] += 1;
        }
        sizes
    }

    /// Sample indices in fold `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&i| self.membership[i] == fold).collect()
    }

    /// Sample indices outside fold `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&i| self.membership[i] != fold).collect()
    }
}

/// Splits `sample_count` samples into `k` folds of `⌊n/k⌋`, with the last
/// `n mod k` folds taking one extra. Without an rng folds are contiguous
/// runs in sample order; with one, samples are shuffled first.
pub fn kfold_splits<R: Rng + ?Sized>(sample_count: usize, k: usize, rng: Option<&mut R>) -> Result<FoldAssignment> {
    if k == 0 || k > sample_count {
        return Err(Error::Config(format!(
            "cannot split {sample_count} samples into {k} folds"
        )));
    }
    let base = sample_count / k;
    let larger = sample_count % k;
    let mut order: Vec<usize> = (0..sample_count).collect();
    if let Some(rng) = rng {
        order.shuffle(rng);
    }
    let mut membership = vec![0; sample_count];
    let mut pos = 0;
    for fold in 0..k {
        let size = if fold >= k - larger { base + 1 } else { base };
        for &i in &order[pos..pos + size] {
            membership[i] = fold;
        }
        pos += size;
    }
    Ok(FoldAssignment { k, membership })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossValidationConfig {
    pub folds: usize,
    /// Shuffle before assigning folds; contiguous folds otherwise.
    pub shuffle: bool,
    /// Train folds concurrently. Results do not depend on this.
    pub parallel: bool,
}

impl Default for CrossValidationConfig {
    fn default() -> Self {
        Self { folds: 5, shuffle: false, parallel: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    /// 1-based.
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub train_mse: f64,
    pub train_rate: f64,
    pub test_mse: f64,
    pub test_rate: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub train_curve: crate::fdo::ConvergenceCurve,
}

/// Means of the per-fold MSE and classification-rate columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageRow {
    pub train_mse: f64,
    pub train_rate: f64,
    pub test_mse: f64,
    pub test_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidationReport {
    pub folds: Vec<FoldReport>,
    pub average: AverageRow,
    /// Mean of each metric over the folds where it is defined.
    pub average_metrics: MetricsReport,
    pub class_success: PerClassSuccess,
}

/// Trains on every fold complement and scores the held-out fold.
///
/// Each training portion is min-max scaled on its own ranges and the test
/// fold reuses them. Fold seeds are drawn from `rng` in fold order.
pub fn cross_validate<R: Rng + ?Sized>(
    data: &LabeledDataset,
    cv: &CrossValidationConfig,
    trainer: &Trainer,
    rng: &mut R,
) -> Result<CrossValidationReport> {
    let assignment = if cv.shuffle {
        kfold_splits(data.len(), cv.folds, Some(&mut *rng))?
    } else {
        kfold_splits::<R>(data.len(), cv.folds, None)?
    };
    for fold in 0..cv.folds {
        let train_labels: Vec<usize> = assignment.train_indices(fold).iter().map(|&i| data.labels()[i]).collect();
        if !(train_labels.contains(&0) && train_labels.contains(&1)) {
            return Err(Error::DegenerateFold { fold: fold + 1 });
        }
    }
    let seeds: Vec<u64> = (0..cv.folds).map(|_| rng.random()).collect();
    let run = |fold: usize| run_fold(data, &assignment, fold, trainer, seeds[fold]);
    let folds: Vec<FoldReport> = if cv.parallel {
        (0..cv.folds).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..cv.folds).map(run).collect::<Result<_>>()?
    };

    let k = folds.len() as f64;
    let mean = |f: fn(&FoldReport) -> f64| folds.iter().map(f).sum::<f64>() / k;
    let average = AverageRow {
        train_mse: mean(|r| r.train_mse),
        train_rate: mean(|r| r.train_rate),
        test_mse: mean(|r| r.test_mse),
        test_rate: mean(|r| r.test_rate),
    };
    let defined_mean = |f: fn(&MetricsReport) -> Option<f64>| {
        let vals: Vec<f64> = folds.iter().filter_map(|r| f(&r.metrics)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let average_metrics = MetricsReport {
        sensitivity: defined_mean(|m| m.sensitivity),
        specificity: defined_mean(|m| m.specificity),
        ppv: defined_mean(|m| m.ppv),
        npv: defined_mean(|m| m.npv),
        accuracy: defined_mean(|m| m.accuracy),
        auc: defined_mean(|m| m.auc),
    };
    let cms: Vec<ConfusionMatrix> = folds.iter().map(|r| r.confusion).collect();
    Ok(CrossValidationReport {
        class_success: per_class_success(&cms),
        folds,
        average,
        average_metrics,
    })
}

fn run_fold(
    data: &LabeledDataset,
    assignment: &FoldAssignment,
    fold: usize,
    trainer: &Trainer,
    seed: u64,
) -> Result<FoldReport> {
    let train = data.subset(&assignment.train_indices(fold)).min_max_normalize();
    let ranges = train
        .normalization()
        .map(<[_]>::to_vec)
        .unwrap_or_else(|| train.column_ranges());
    let test = data.subset(&assignment.test_indices(fold)).normalize_with(&ranges)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = trainer.train(&train, &mut rng)?;
    let threshold = trainer.threshold();

    let outputs = trainer::predict_outputs(&model.params, &test)?;
    let predicted: Vec<usize> = outputs.iter().map(|y| crate::mlp::predict_class(y, threshold)).collect();
    let confusion = confusion_matrix(&predicted, test.labels())?;
    let scores: Vec<f64> = outputs.iter().map(|y| y[y.len().min(2) - 1]).collect();
    let mut metrics = metrics(&confusion)?;
    metrics.auc = auc(&scores, test.labels())?;

    Ok(FoldReport {
        fold: fold + 1,
        train_size: train.len(),
        test_size: test.len(),
        train_mse: model.train_mse,
        train_rate: trainer::classification_rate(&model.params, &train, threshold)?,
        test_mse: trainer::mse_fitness(&model.params, &test)?,
        test_rate: metrics.accuracy.unwrap_or(0.0),
        confusion,
        metrics,
        train_curve: model.curve,
    })
}

/// Correct / total for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassTally {
    pub correct: usize,
    pub total: usize,
}

impl ClassTally {
    pub fn rate(&self) -> Option<f64> {
        ratio(self.correct, self.total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassSuccess {
    pub passed: ClassTally,
    pub failed: ClassTally,
}

impl ClassSuccess {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        Self {
            passed: ClassTally { correct: cm.tp, total: cm.positives() },
            failed: ClassTally { correct: cm.tn, total: cm.negatives() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerClassSuccess {
    pub folds: Vec<ClassSuccess>,
    /// Correct and total summed over folds; its rates are the pooled rates.
    pub totals: ClassSuccess,
    /// Unweighted mean of per-fold rates (passed, failed).
    pub mean_fold_rates: (Option<f64>, Option<f64>),
}

/// Per-class success rates for each fold plus totals.
pub fn per_class_success(matrices: &[ConfusionMatrix]) -> PerClassSuccess {
    let folds: Vec<ClassSuccess> = matrices.iter().map(ClassSuccess::from_confusion).collect();
    let totals = matrices
        .iter()
        .fold(ConfusionMatrix::default(), |acc, cm| acc + *cm);
    let mean_rate = |f: fn(&ClassSuccess) -> Option<f64>| {
        let v: Vec<f64> = folds.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    PerClassSuccess {
        mean_fold_rates: (mean_rate(|c| c.passed.rate()), mean_rate(|c| c.failed.rate())),
        totals: ClassSuccess::from_confusion(&totals),
        folds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_counts() {
        // 39 actual passes (37 right), 18 actual fails (all right)
        let mut actual = vec![1; 39];
        actual.extend(vec![0; 18]);
        let mut predicted = vec![1; 37];
        predicted.extend(vec![0; 2]);
        predicted.extend(vec![0; 18]);
        assert_eq!(confusion_matrix(&predicted, &actual).unwrap(), ConfusionMatrix::new(37, 0, 2, 18));

        assert_eq!(confusion_matrix(&[1; 5], &[1; 5]).unwrap(), ConfusionMatrix::new(5, 0, 0, 0));
        let cm = confusion_matrix(&[0, 1, 1, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(confusion_matrix(&[1], &[1, 0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(confusion_matrix(&[2], &[1]), Err(Error::NonBinaryLabel(2))));
        assert!(matches!(confusion_matrix(&[1], &[3]), Err(Error::NonBinaryLabel(3))));
    }

    #[test]
    fn first_fold_metrics() {
        let m = metrics(&ConfusionMatrix::new(37, 0, 2, 18)).unwrap();
        assert!((m.sensitivity.unwrap() - 37.0 / 39.0).abs() < 1e-15);
        assert_eq!(format_metric(m.sensitivity, 2), "0.94");
        assert_eq!(format_metric(m.specificity, 2), "1.00");
        assert_eq!(format_metric(m.ppv, 2), "1.00");
        assert_eq!(format_metric(m.npv, 2), "0.90");
        assert_eq!(format_metric(m.accuracy, 2), "0.96");
    }

    #[test]
    fn perfect_and_degenerate_metrics() {
        let m = metrics(&ConfusionMatrix::new(5, 0, 0, 5)).unwrap();
        for v in [m.sensitivity, m.specificity, m.ppv, m.npv, m.accuracy] {
            assert_eq!(v, Some(1.0));
        }
        let m = metrics(&ConfusionMatrix::new(0, 0, 5, 5)).unwrap();
        assert_eq!(m.sensitivity, Some(0.0));
        assert_eq!(m.npv, Some(0.5));
        assert_eq!(m.ppv, None);
        assert_eq!(format_metric(m.ppv, 2), "n/a");
        assert!(metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_decimals(0.9487, 2), 0.94);
        assert_eq!(truncate_decimals(0.29, 2), 0.29);
        assert_eq!(truncate_decimals(0.9, 2), 0.9);
        assert_eq!(truncate_decimals(1.0, 2), 1.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[1.0, 1.0, 0.0, 0.0], &[1, 1, 0, 0]).unwrap(), Some(1.0));
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 1, 0]).unwrap(), Some(0.5));
        assert_eq!(auc(&[0.1, 0.9], &[1, 1]).unwrap(), None);
        assert!(auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn fold_sizes() {
        let none = None::<&mut ChaCha8Rng>;
        assert_eq!(kfold_splits(287, 5, none).unwrap().sizes(), vec![57, 57, 57, 58, 58]);
        assert_eq!(kfold_splits::<ChaCha8Rng>(10, 5, None).unwrap().sizes(), vec![2; 5]);
        assert_eq!(kfold_splits::<ChaCha8Rng>(7, 3, None).unwrap().sizes(), vec![2, 2, 3]);
        assert!(kfold_splits::<ChaCha8Rng>(3, 4, None).is_err());
        assert!(kfold_splits::<ChaCha8Rng>(3, 0, None).is_err());
    }

    #[test]
    fn sequential_folds_are_contiguous() {
        let a = kfold_splits::<ChaCha8Rng>(7, 3, None).unwrap();
        assert_eq!(a.membership, vec![0, 0, 1, 1, 2, 2, 2]);
        assert_eq!(a.test_indices(1), vec![2, 3]);
        assert_eq!(a.train_indices(1), vec![0, 1, 4, 5, 6]);
    }

    #[test]
    fn class_success_first_fold() {
        // 37 of 37 passes right, 18 of 20 fails right
        let s = ClassSuccess::from_confusion(&ConfusionMatrix::new(37, 2, 0, 18));
        assert_eq!(format!("{:.2}", 100.0 * s.passed.rate().unwrap()), "100.00");
        assert_eq!(format!("{:.2}", 100.0 * s.failed.rate().unwrap()), "90.00");
        let s = ClassSuccess::from_confusion(&ConfusionMatrix::new(4, 0, 0, 3));
        assert_eq!((s.passed.rate(), s.failed.rate()), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn class_success_totals_over_five_folds() {
        // (passed correct, passed total, failed correct, failed total) per fold
        let table = [(37, 37, 18, 20), (35, 37, 19, 20), (37, 37, 18, 20), (35, 36, 18, 22), (34, 36, 20, 22)];
        let cms: Vec<ConfusionMatrix> = table
            .iter()
            .map(|&(pc, pt, fc, ft)| ConfusionMatrix::new(pc, ft - fc, pt - pc, fc))
            .collect();
        let s = per_class_success(&cms);
        let sum = |f: fn(&(usize, usize, usize, usize)) -> usize| table.iter().map(f).sum::<usize>();
        assert_eq!(s.totals.passed, ClassTally { correct: sum(|r| r.0), total: sum(|r| r.1) });
        assert_eq!(s.totals.failed, ClassTally { correct: sum(|r| r.2), total: sum(|r| r.3) });
        assert_eq!((s.totals.passed.correct, s.totals.passed.total), (178, 183));
        assert_eq!((s.totals.failed.correct, s.totals.failed.total), (93, 104));
        assert_eq!(format!("{:.2}", 100.0 * s.totals.passed.rate().unwrap()), "97.27");
        assert_eq!(format_metric(s.totals.passed.rate().map(|r| r * 100.0), 2), "97.26");
        assert_eq!(format_metric(s.totals.failed.rate().map(|r| r * 100.0), 2), "89.42");
        assert_eq!(format!("{:.2}", 100.0 * s.folds[3].passed.rate().unwrap()), "97.22");
    }

    fn brute_force_auc(scores: &[f64], labels: &[usize]) -> Option<f64> {
        let mut wins = 0.0;
        let mut pairs = 0usize;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        (pairs > 0).then(|| wins / pairs as f64)
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise(
            data in proptest::collection::vec((0u8..6, 0usize..2), 1..50)
        ) {
            // coarse scores force plenty of ties
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<usize> = data.iter().map(|(_, l)| *l).collect();
            let got = auc(&scores, &labels).unwrap();
            match (got, brute_force_auc(&scores, &labels)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn accuracy_identity(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
            let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
            prop_assume!(cm.total() > 0);
            let m = metrics(&cm).unwrap();
            for v in [m.sensitivity, m.specificity, m.ppv, m.npv, m.accuracy].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let (p, n) = (cm.positives() as f64, cm.negatives() as f64);
            let weighted = m.sensitivity.unwrap_or(0.0) * p + m.specificity.unwrap_or(0.0) * n;
            prop_assert!((m.accuracy.unwrap() - weighted / (p + n)).abs() < 1e-12);
            prop_assert_eq!(m.ppv.is_none(), tp + fp == 0);
            prop_assert_eq!(m.npv.is_none(), tn + fn_ == 0);
        }

        #[test]
        fn folds_partition(n in 1usize..300, k in 1usize..20, seed in any::<u64>(), shuffle in any::<bool>()) {
            prop_assume!(k <= n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = if shuffle { kfold_splits(n, k, Some(&mut rng)).unwrap() } else { kfold_splits::<ChaCha8Rng>(n, k, None).unwrap() };
            let sizes = a.sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
            let mut seen = vec![0; n];
            for f in 0..k {
                for i in a.test_indices(f) {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
