//! Labeled tabular data: CSV ingestion, min-max scaling, column selection,
//! hold-out splitting and synthetic two-class generation.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Observed range of one feature column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    /// Constant columns map to 0.
    pub fn apply(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (x - self.min) / span
        } else {
            0.0
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        self.min + y * (self.max - self.min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    column_names: Vec<String>,
    label_name: String,
    /// Ranges used to scale the features, when they have been scaled.
    normalization: Option<Vec<ColumnRange>>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        column_names: Vec<String>,
        label_name: impl Into<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: features.len(),
                actual: labels.len(),
            });
        }
        if column_names.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        for row in &features {
            if row.len() != column_names.len() {
                return Err(Error::DimensionMismatch {
                    what: "feature row",
                    expected: column_names.len(),
                    actual: row.len(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            column_names,
            label_name: label_name.into(),
            normalization: None,
        })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn normalization(&self) -> Option<&[ColumnRange]> {
        self.normalization.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    /// Number of distinct classes, i.e. `max label + 1`.
    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Samples per class label `0..class_count()`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    /// Rows at `indices`, in that order. Normalization state carries over.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            label_name: self.label_name.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Observed per-column ranges.
    pub fn column_ranges(&self) -> Vec<ColumnRange> {
        (0..self.n_features())
            .map(|c| {
                let (min, max) = self
                    .features
                    .iter()
                    .map(|r| r[c])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                ColumnRange { min, max }
            })
            .collect()
    }

    /// Scales every column to [0, 1] using its own min and max.
    ///
    /// Already-scaled data is returned unchanged.
    pub fn min_max_normalize(&self) -> Self {
        if self.is_normalized() || self.is_empty() {
            return self.clone();
        }
        let ranges = self.column_ranges();
        self.scaled(ranges)
    }

    /// Scales with ranges fitted elsewhere, e.g. on a training split. Values
    /// outside the fitted range land outside [0, 1].
    pub fn normalize_with(&self, ranges: &[ColumnRange]) -> Result<Self> {
        if ranges.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "normalization ranges",
                expected: self.n_features(),
                actual: ranges.len(),
            });
        }
        if self.is_normalized() {
            return Ok(self.clone());
        }
        Ok(self.scaled(ranges.to_vec()))
    }

    fn scaled(&self, ranges: Vec<ColumnRange>) -> Self {
        let features = self
            .features
            .iter()
            .map(|row| row.iter().zip(&ranges).map(|(x, r)| r.apply(*x)).collect())
            .collect();
        Self {
            features,
            labels: self.labels.clone(),
            column_names: self.column_names.clone(),
            label_name: self.label_name.clone(),
            normalization: Some(ranges),
        }
    }

    /// Keeps the named columns in the order given.
    pub fn select_features<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        let idx = keep
            .iter()
            .map(|name| {
                let name = name.as_ref();
                self.column_names
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::UnknownColumn(name.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            features: self
                .features
                .iter()
                .map(|row| idx.iter().map(|&c| row[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            column_names: idx.iter().map(|&c| self.column_names[c].clone()).collect(),
            label_name: self.label_name.clone(),
            normalization: self
                .normalization
                .as_ref()
                .map(|r| idx.iter().map(|&c| r[c]).collect()),
        })
    }

    /// Shuffled split with `round(train_fraction * n)` training rows.
    pub fn holdout_split<R: Rng + ?Sized>(&self, train_fraction: f64, rng: &mut R) -> Result<(Self, Self)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {train_fraction} must lie strictly between 0 and 1"
            )));
        }
        let n = self.len();
        let n_train = (train_fraction * n as f64).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::Degenerate(format!(
                "splitting {n} samples at {train_fraction} leaves one side empty"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Ok((self.subset(&order[..n_train]), self.subset(&order[n_train..])))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.column_names.iter().map(String::as_str).collect();
        header.push(&self.label_name);
        w.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// Reads a headed, comma-separated file with a binary (0/1) label column.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column)
}

pub fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::UnknownColumn(label_column.to_string()))?;
    let column_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let mut values = Vec::with_capacity(column_names.len());
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                labels.push(match cell {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    _ => {
                        return Err(Error::Label {
                            row,
                            value: cell.to_string(),
                        })
                    }
                });
                continue;
            }
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                row,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        features.push(values);
    }
    LabeledDataset::new(features, labels, column_names, label_column)
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub features: usize,
    /// Distance between the two class means.
    pub class_separation: f64,
    /// Fraction of samples in class 1.
    pub class_balance: f64,
}

impl SyntheticSpec {
    pub fn positives(&self) -> usize {
        (self.class_balance * self.samples as f64).round() as usize
    }
}

/// Two unit-variance Gaussian clouds whose means sit `class_separation`
/// apart along a random unit direction. Rows come out shuffled.
pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<LabeledDataset> {
    if spec.features == 0 {
        return Err(Error::Degenerate("synthetic data needs at least one feature".into()));
    }
    if !(spec.class_separation.is_finite() && spec.class_separation >= 0.0) {
        return Err(Error::Degenerate(format!(
            "class separation {} must be finite and non-negative",
            spec.class_separation
        )));
    }
    if !(0.0..=1.0).contains(&spec.class_balance) {
        return Err(Error::Degenerate(format!(
            "class balance {} outside [0, 1]",
            spec.class_balance
        )));
    }
    let positives = spec.positives();
    if positives == 0 || positives >= spec.samples {
        return Err(Error::Degenerate(format!(
            "{} samples at balance {} leave a class empty",
            spec.samples, spec.class_balance
        )));
    }

    let direction = loop {
        let v: Vec<f64> = (0..spec.features).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            break v.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let half = spec.class_separation / 2.0;

    let mut labels: Vec<usize> = (0..spec.samples).map(|i| usize::from(i < positives)).collect();
    labels.shuffle(rng);
    let features = labels
        .iter()
        .map(|&l| {
            let sign = if l == 1 { half } else { -half };
            direction
                .iter()
                .map(|u| sign * u + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let names = (1..=spec.features).map(|i| format!("f{i}")).collect();
    LabeledDataset::new(features, labels, names, "label")
}

/// The four-row exclusive-or table.
pub fn xor() -> LabeledDataset {
    LabeledDataset::new(
        vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        vec![0, 1, 1, 0],
        vec!["x1".into(), "x2".into()],
        "label",
    )
    .expect("static table is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn column(data: &LabeledDataset, c: usize) -> Vec<f64> {
        data.features().iter().map(|r| r[c]).collect()
    }

    #[test]
    fn reads_simple_csv() {
        let d = read_csv("a,b,label\n1,2,0\n3,4,1\n5,6,1\n".as_bytes(), "label").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.column_names(), ["a", "b"]);
        assert_eq!(d.labels(), [0, 1, 1]);
        assert_eq!(d.features()[2], vec![5.0, 6.0]);
    }

    #[test]
    fn label_column_may_sit_anywhere() {
        let d = read_csv("label,a\n1,0.5\n0,0.25\n".as_bytes(), "label").unwrap();
        assert_eq!(d.column_names(), ["a"]);
        assert_eq!(d.labels(), [1, 0]);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let err = read_csv("a,b,label\n1,2,0\n3,abc,1\n".as_bytes(), "label").unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_csv("a,label\n,0\n".as_bytes(), "label").is_err());
    }

    #[test]
    fn non_binary_label_rejected() {
        let err = read_csv("a,label\n1,2\n".as_bytes(), "label").unwrap_err();
        assert!(matches!(err, Error::Label { row: 1, .. }));
    }

    #[test]
    fn missing_file_and_label_column() {
        assert!(matches!(load_csv("/nonexistent/x.csv", "label"), Err(Error::Io { .. })));
        assert!(matches!(
            read_csv("a,b\n1,2\n".as_bytes(), "label"),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = generate_synthetic(
            &SyntheticSpec { samples: 40, features: 3, class_separation: 2.0, class_balance: 0.5 },
            &mut rng(8),
        )
        .unwrap();
        let text = d.to_csv_string().unwrap();
        let back = read_csv(text.as_bytes(), "label").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn min_max_examples() {
        let d = LabeledDataset::new(
            vec![vec![0.0, 7.0], vec![5.0, 7.0], vec![10.0, 7.0]],
            vec![0, 1, 0],
            vec!["x".into(), "c".into()],
            "label",
        )
        .unwrap();
        let n = d.min_max_normalize();
        assert_eq!(column(&n, 0), vec![0.0, 0.5, 1.0]);
        assert_eq!(column(&n, 1), vec![0.0, 0.0, 0.0]);
        assert_eq!(n.normalization().unwrap()[0], ColumnRange { min: 0.0, max: 10.0 });
        assert_eq!(n.min_max_normalize(), n);
    }

    #[test]
    fn normalize_with_foreign_ranges() {
        let d = LabeledDataset::new(vec![vec![20.0]], vec![1], vec!["x".into()], "label").unwrap();
        let n = d.normalize_with(&[ColumnRange { min: 0.0, max: 10.0 }]).unwrap();
        assert_eq!(n.features()[0], vec![2.0]);
        assert!(d.normalize_with(&[]).is_err());
    }

    #[test]
    fn select_features_cases() {
        let d = read_csv("a,b,c,label\n1,2,3,0\n".as_bytes(), "label").unwrap();
        assert_eq!(d.select_features(&["a", "b", "c"]).unwrap(), d);
        let s = d.select_features(&["c", "a"]).unwrap();
        assert_eq!(s.column_names(), ["c", "a"]);
        assert_eq!(s.features()[0], vec![3.0, 1.0]);
        assert!(matches!(d.select_features::<&str>(&[]), Err(Error::EmptyFeatureSet)));
        assert!(matches!(d.select_features(&["z"]), Err(Error::UnknownColumn(_))));

        let names: Vec<String> = (1..=20).map(|i| format!("f{i}")).collect();
        let wide = LabeledDataset::new(vec![vec![0.0; 20]], vec![0], names.clone(), "label").unwrap();
        assert_eq!(wide.select_features(&names[..18]).unwrap().n_features(), 18);
    }

    #[test]
    fn holdout_sizes() {
        let spec = SyntheticSpec { samples: 287, features: 2, class_separation: 1.0, class_balance: 0.5 };
        let d = generate_synthetic(&spec, &mut rng(1)).unwrap();
        let (tr, te) = d.holdout_split(0.8, &mut rng(2)).unwrap();
        assert_eq!((tr.len(), te.len()), (230, 57));

        let spec = SyntheticSpec { samples: 10, ..spec };
        let d = generate_synthetic(&spec, &mut rng(1)).unwrap();
        let (tr, te) = d.holdout_split(0.5, &mut rng(2)).unwrap();
        assert_eq!((tr.len(), te.len()), (5, 5));
        assert!(d.holdout_split(0.01, &mut rng(2)).is_err());
        assert!(d.holdout_split(1.0, &mut rng(2)).is_err());
    }

    #[test]
    fn synthetic_class_counts() {
        let spec = SyntheticSpec {
            samples: 287,
            features: 18,
            class_separation: 6.0,
            class_balance: 183.0 / 287.0,
        };
        let d = generate_synthetic(&spec, &mut rng(3)).unwrap();
        assert_eq!(d.class_counts(), vec![104, 183]);
        assert_eq!(d.n_features(), 18);
    }

    #[test]
    fn synthetic_means_are_separated() {
        let spec = SyntheticSpec { samples: 4000, features: 3, class_separation: 4.0, class_balance: 0.5 };
        let d = generate_synthetic(&spec, &mut rng(4)).unwrap();
        let mut sums = [vec![0.0; 3], vec![0.0; 3]];
        for (row, &l) in d.features().iter().zip(d.labels()) {
            for (s, x) in sums[l].iter_mut().zip(row) {
                *s += x;
            }
        }
        let dist: f64 = (0..3)
            .map(|c| (sums[1][c] / 2000.0 - sums[0][c] / 2000.0).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((dist - 4.0).abs() < 0.15, "mean distance {dist}");
    }

    #[test]
    fn synthetic_degenerate_specs() {
        let ok = SyntheticSpec { samples: 10, features: 2, class_separation: 1.0, class_balance: 0.5 };
        assert!(generate_synthetic(&SyntheticSpec { features: 0, ..ok.clone() }, &mut rng(0)).is_err());
        assert!(generate_synthetic(&SyntheticSpec { class_balance: 0.0, ..ok.clone() }, &mut rng(0)).is_err());
        assert!(generate_synthetic(&SyntheticSpec { class_separation: -1.0, ..ok }, &mut rng(0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn normalization_bounded_idempotent_invertible(
            rows in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 1..30)
        ) {
            let labels = vec![0; rows.len()];
            let d = LabeledDataset::new(rows, labels, vec!["a".into(), "b".into(), "c".into()], "label").unwrap();
            let n = d.min_max_normalize();
            prop_assert!(n.features().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(&n.min_max_normalize(), &n);
            let ranges = n.normalization().unwrap();
            for (raw, scaled) in d.features().iter().zip(n.features()) {
                for c in 0..3 {
                    if ranges[c].max > ranges[c].min {
                        prop_assert!((ranges[c].invert(scaled[c]) - raw[c]).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn holdout_partitions_rows(n in 2usize..60, frac in 0.1f64..0.9, seed in any::<u64>()) {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
            let d = LabeledDataset::new(rows, vec![0; n], vec!["i".into()], "label").unwrap();
            if let Ok((a, b)) = d.holdout_split(frac, &mut rng(seed)) {
                let mut all: Vec<f64> = a.features().iter().chain(b.features()).map(|r| r[0]).collect();
                all.sort_by(f64::total_cmp);
                prop_assert_eq!(all, (0..n).map(|i| i as f64).collect::<Vec<_>>());
                let (a2, _) = d.holdout_split(frac, &mut rng(seed)).unwrap();
                prop_assert_eq!(a2, a);
            }
        }
    }
}
