//! Euclidean k-nearest-neighbour classification with stratified k-fold
//! cross-validation.
//!
//! Tie rules are fixed so results never depend on evaluation order:
//! neighbours at equal distance are taken in training-row order, and a vote
//! tie goes to the tied class whose nearest neighbour is closest, then to the
//! class that comes first in the label list.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub features: Vec<f64>,
    /// Index into [`Dataset::labels`].
    pub label: usize,
    pub velocity: f64,
    pub trial: u32,
}

/// Labeled feature rows. Label indices refer to `labels`, whose order is
/// also the row/column order of every confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(invalid("a dataset needs at least one feature"));
        }
        Ok(Dataset {
            feature_names,
            labels,
            rows: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Row) -> Result<()> {
        if row.features.len() != self.dim() {
            return Err(invalid(format!(
                "feature vector has {} entries, dataset expects {}",
                row.features.len(),
                self.dim()
            )));
        }
        if row.features.iter().any(|v| !v.is_finite()) {
            return Err(invalid("feature vectors must be finite"));
        }
        if row.label >= self.labels.len() {
            return Err(invalid(format!("label index {} out of range", row.label)));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Adds a row by label name, registering unseen labels at the end.
    pub fn push_named(&mut self, label: &str, features: Vec<f64>, velocity: f64, trial: u32) -> Result<()> {
        let idx = match self.labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                self.labels.push(label.to_string());
                self.labels.len() - 1
            }
        };
        self.push(Row {
            features,
            label: idx,
            velocity,
            trial,
        })
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            labels: self.labels.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.features.clone()).collect()
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Distinct velocities in first-appearance order.
    pub fn velocities(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|v| same_velocity(*v, r.velocity)) {
                out.push(r.velocity);
            }
        }
        out
    }
}

pub(crate) fn same_velocity(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Predicts the label of `query` from `train_x` / `train_y`.
pub fn knn_predict(train_x: &[Vec<f64>], train_y: &[usize], query: &[f64], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    if train_x.is_empty() || train_x.len() != train_y.len() {
        return Err(invalid("training set is empty or mislabeled"));
    }
    if k > train_x.len() {
        return Err(invalid(format!("k = {k} exceeds the {} training rows", train_x.len())));
    }
    if train_x.iter().any(|r| r.len() != query.len()) {
        return Err(invalid("query and training dimensions differ"));
    }
    let mut order: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, r)| (squared_distance(r, query), i))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, by_distance);
        order.truncate(k);
    }
    order.sort_unstable_by(by_distance);

    // (votes, nearest squared distance) per label seen among the neighbours.
    let mut tally: Vec<(usize, usize, f64)> = Vec::new();
    for &(d, i) in &order {
        let label = train_y[i];
        match tally.iter_mut().find(|t| t.0 == label) {
            Some(t) => t.1 += 1,
            None => tally.push((label, 1, d)),
        }
    }
    let best = tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
        .expect("k >= 1 neighbours");
    Ok(best.0)
}

/// Per-feature z-scoring with statistics from a training set. Constant
/// features are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| invalid("cannot standardize zero rows"))?;
        let n = rows.len() as f64;
        let dim = first.len();
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut sd {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Ok(Standardizer { mean, sd })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.correct() as f64 / t as f64
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "true\\predicted,{}", self.labels.join(","))?;
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(out, "{l},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Standardizes (optionally) on the training rows, then classifies every
/// test row.
pub fn evaluate_split(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    test_x: &[Vec<f64>],
    test_y: &[usize],
    k: usize,
    standardize: bool,
    confusion: &mut ConfusionMatrix,
) -> Result<()> {
    let (train_x, test_x) = if standardize {
        let s = Standardizer::fit(train_x)?;
        (s.transform_all(train_x), s.transform_all(test_x))
    } else {
        (train_x.to_vec(), test_x.to_vec())
    };
    for (q, &truth) in test_x.iter().zip(test_y) {
        confusion.record(truth, knn_predict(&train_x, train_y, q, k)?);
    }
    Ok(())
}

/// Stratified fold assignment: each label's rows are shuffled and dealt
/// round-robin, the dealer position carrying over from one label to the
/// next.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(invalid("cross-validation needs at least two folds"));
    }
    let num_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); num_labels];
    for (i, &l) in labels.iter().enumerate() {
        by_label[l].push(i);
    }
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut dealer = 0usize;
    for (l, rows) in by_label.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < folds {
            return Err(Error::InsufficientData(format!(
                "label {l} has {} rows, fewer than {folds} folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            assignment[r] = dealer % folds;
            dealer += 1;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub folds: usize,
    pub seed: u64,
    pub standardized: bool,
    pub accuracy: f64,
    pub per_fold: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

/// Cross-validation where features may depend on the training fold (e.g. a
/// quantizer fitted on training rows only). `featurize(train, test)` returns
/// the feature rows for those two index sets, in order.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate_with<F>(
    labels: &[usize],
    label_names: &[String],
    k: usize,
    folds: usize,
    seed: u64,
    standardize: bool,
    mut featurize: F,
) -> Result<CvResult>
where
    F: FnMut(&[usize], &[usize]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
{
    let assignment = stratified_folds(labels, folds, seed)?;
    let mut confusion = ConfusionMatrix::new(label_names.to_vec());
    let mut per_fold = Vec::with_capacity(folds);
    for f in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
        let (train_x, test_x) = featurize(&train, &test)?;
        let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let test_y: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let mut fold_cm = ConfusionMatrix::new(label_names.to_vec());
        evaluate_split(&train_x, &train_y, &test_x, &test_y, k, standardize, &mut fold_cm)?;
        per_fold.push(fold_cm.accuracy());
        confusion.merge(&fold_cm);
    }
    Ok(CvResult {
        k,
        folds,
        seed,
        standardized: standardize,
        accuracy: confusion.accuracy(),
        per_fold,
        confusion,
    })
}

/// Cross-validation over precomputed features.
pub fn cross_validate(data: &Dataset, k: usize, folds: usize, seed: u64, standardize: bool) -> Result<CvResult> {
    let pick = |idx: &[usize]| idx.iter().map(|&i| data.rows[i].features.clone()).collect::<Vec<_>>();
    cross_validate_with(
        &data.label_indices(),
        &data.labels,
        k,
        folds,
        seed,
        standardize,
        |train, test| Ok((pick(train), pick(test))),
    )
}

/// Rows at `test_velocity` versus everything else.
pub fn split_by_velocity(data: &Dataset, test_velocity: f64) -> Result<(Dataset, Dataset)> {
    let velocities = data.velocities();
    if !velocities.iter().any(|&v| same_velocity(v, test_velocity)) {
        return Err(invalid(format!(
            "test velocity {test_velocity} does not occur in the data"
        )));
    }
    if velocities.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "training needs two velocities besides {test_velocity}; found {velocities:?}"
        )));
    }
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| same_velocity(data.rows[i].velocity, test_velocity));
    Ok((data.subset(&train), data.subset(&test)))
}

/// Serialized classification result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub approach: String,
    pub velocity_policy: String,
    pub k: usize,
    pub folds: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub per_fold: Vec<f64>,
    pub labels: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub standardized: bool,
}

impl ClassificationReport {
    pub fn from_cv(approach: &str, velocity_policy: &str, r: &CvResult) -> Self {
        ClassificationReport {
            approach: approach.to_string(),
            velocity_policy: velocity_policy.to_string(),
            k: r.k,
            folds: r.folds,
            seed: r.seed,
            accuracy: r.accuracy,
            per_fold: r.per_fold.clone(),
            labels: r.confusion.labels.clone(),
            confusion: r.confusion.counts.clone(),
            standardized: r.standardized,
        }
    }
}

/// Columns of a feature CSV that are metadata rather than features.
const META_COLUMNS: [&str; 6] = ["label", "velocity", "trial", "taxel", "mode", "defined_flags"];

/// Reads a feature CSV (`label,velocity,trial,...` followed by numeric
/// feature columns). Label order is first appearance.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(lc), Some(vc), Some(tc)) = (col("label"), col("velocity"), col("trial")) else {
        return Err(Error::Parse {
            line: 1,
            message: "feature CSV needs label, velocity and trial columns".into(),
        });
    };
    let feat_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| !META_COLUMNS.contains(&&headers[i]))
        .collect();
    let names = feat_cols.iter().map(|&i| headers[i].to_string()).collect();
    let mut data = Dataset::new(names, Vec::new())?;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric `{}` in column `{}`", &rec[i], &headers[i]),
            })
        };
        let features = feat_cols.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
        let trial = num(tc)? as u32;
        data.push_named(&rec[lc], features, num(vc)?, trial)?;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_nearest_neighbour_returns_exact_match() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]];
        let y = vec![0, 1, 2];
        assert_eq!(knn_predict(&x, &y, &[1.0, 1.0], 1).unwrap(), 1);
    }

    #[test]
    fn majority_beats_proximity() {
        let x = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 0.0],
            vec![-0.5, 0.0],
        ];
        let y = vec![0, 0, 0, 1, 1];
        assert_eq!(knn_predict(&x, &y, &[0.0, 0.0], 5).unwrap(), 0);
    }

    #[test]
    fn vote_tie_goes_to_nearest_class_then_label_order() {
        let x = vec![vec![2.0], vec![1.0], vec![-2.0], vec![-3.0]];
        let y = vec![0, 1, 0, 1];
        // Two votes each; label 1 has the nearest member (distance 1).
        assert_eq!(knn_predict(&x, &y, &[0.0], 4).unwrap(), 1);
        // Equal nearest distance: label order decides.
        let x = vec![vec![1.0], vec![-1.0]];
        assert_eq!(knn_predict(&x, &[1, 0], &[0.0], 2).unwrap(), 0);
    }

    #[test]
    fn distance_ties_use_row_order() {
        let x = vec![vec![1.0], vec![-1.0], vec![1.0]];
        assert_eq!(knn_predict(&x, &[2, 1, 0], &[0.0], 1).unwrap(), 2);
    }

    #[test]
    fn knn_errors() {
        let x = vec![vec![1.0]];
        assert!(knn_predict(&x, &[0], &[0.0], 2).is_err());
        assert!(knn_predict(&x, &[0], &[0.0], 0).is_err());
        assert!(knn_predict(&x, &[0], &[0.0, 1.0], 1).is_err());
    }

    fn separable(per_class: usize) -> Dataset {
        let mut d = Dataset::new(vec!["f0".into(), "f1".into()], Vec::new()).unwrap();
        for c in 0..4 {
            for t in 0..per_class {
                let jitter = t as f64 * 0.01;
                d.push_named(
                    &format!("c{c}"),
                    vec![100.0 * c as f64 + jitter, 50.0 * c as f64 - jitter],
                    5.0,
                    t as u32,
                )
                .unwrap();
            }
        }
        d
    }

    #[test]
    fn separable_classes_score_perfectly() {
        let r = cross_validate(&separable(10), 5, 5, 1, true).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion.total(), 40);
        assert_eq!(r.per_fold.len(), 5);
    }

    #[test]
    fn folds_are_stratified_and_reproducible() {
        let labels: Vec<usize> = (0..43).map(|i| i % 3).collect();
        let a = stratified_folds(&labels, 5, 9).unwrap();
        assert_eq!(a, stratified_folds(&labels, 5, 9).unwrap());
        for l in 0..3 {
            let per: Vec<usize> = (0..5)
                .map(|f| (0..43).filter(|&i| labels[i] == l && a[i] == f).count())
                .collect();
            let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
            assert!(hi - lo <= 1, "{per:?}");
        }
        assert!(stratified_folds(&[0, 0, 1], 2, 0).is_err());
        assert!(stratified_folds(&labels, 1, 0).is_err());
    }

    #[test]
    fn velocity_split_partitions() {
        let mut d = Dataset::new(vec!["f".into()], Vec::new()).unwrap();
        for (i, v) in [5.0, 10.0, 15.0, 5.0, 10.0, 15.0].into_iter().enumerate() {
            d.push_named("a", vec![i as f64], v, i as u32).unwrap();
        }
        let (train, test) = split_by_velocity(&d, 5.0).unwrap();
        assert_eq!(train.len() + test.len(), d.len());
        assert!(test.rows.iter().all(|r| r.velocity == 5.0));
        assert!(train.rows.iter().all(|r| r.velocity != 5.0));
        assert!(split_by_velocity(&d, 20.0).is_err());
        let two = d.subset(&[0, 1]);
        assert!(split_by_velocity(&two, 5.0).is_err());
    }

    #[test]
    fn feature_csv_skips_metadata_columns() {
        let csv = "label,velocity,trial,taxel,msr,cv_isi,fano,defined_flags\n\
                   rug,5,0,5,10.5,0.3,1.2,111\n\
                   tile,5,1,5,20,0,0,100\n";
        let d = read_feature_csv(csv.as_bytes()).unwrap();
        assert_eq!(d.feature_names, vec!["msr", "cv_isi", "fano"]);
        assert_eq!(d.labels, vec!["rug", "tile"]);
        assert_eq!(d.rows[1].features, vec![20.0, 0.0, 0.0]);
        let bad = "label,velocity,trial,msr\nrug,5,0,abc\n";
        assert!(matches!(
            read_feature_csv(bad.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn standardizer_handles_constant_features() {
        let s = Standardizer::fit(&[vec![1.0, 3.0], vec![1.0, 5.0]]).unwrap();
        assert_eq!(s.transform(&[1.0, 5.0]), vec![0.0, 1.0]);
    }
}
