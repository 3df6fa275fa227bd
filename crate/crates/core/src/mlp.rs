//! Readout classifier: a small in-repo multi-layer perceptron trained on
//! decoded feature vectors (rectifier hidden layer, softmax output,
//! mini-batch gradient descent on cross-entropy). Feature dimensions are
//! tiny here, so no learning framework is warranted.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpHyperParams {
    pub n_hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpHyperParams {
    fn default() -> Self {
        MlpHyperParams {
            n_hidden: 32,
            lr: 0.05,
            epochs: 300,
            batch: 16,
            seed: 0,
        }
    }
}

/// Two-layer perceptron with per-feature standardization fitted on the
/// training set.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub feat_mean: Array1<f64>,
    pub feat_std: Array1<f64>,
    /// Sorted class labels; softmax outputs index into this.
    pub classes: Vec<u32>,
    pub hyperparams: MlpHyperParams,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Gradients of the mean batch loss with respect to every parameter.
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Classification accuracy report, serialized as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub coding: String,
    pub accuracy: f64,
    /// Rows are true classes, columns predictions, both in `classes` order.
    pub confusion: Vec<Vec<usize>>,
    pub classes: Vec<u32>,
    /// Split seed, echoed by the pipeline.
    pub seed: u64,
    pub hyperparams: MlpHyperParams,
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps = logits.mapv(|z| (z - max).exp());
    let sum = exps.sum();
    exps / sum
}

fn log_sum_exp(logits: &Array1<f64>) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + logits.mapv(|z| (z - max).exp()).sum().ln()
}

impl MlpModel {
    fn standardize(&self, x: ArrayView1<f64>) -> Array1<f64> {
        (&x - &self.feat_mean) / &self.feat_std
    }

    fn logits(&self, x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let xn = self.standardize(x);
        let z1 = self.w1.t().dot(&xn) + &self.b1;
        let h = z1.mapv(|z| z.max(0.0));
        let z2 = self.w2.t().dot(&h) + &self.b2;
        (h, z2)
    }

    /// Class probabilities for one raw (unstandardized) feature vector.
    pub fn predict_proba(&self, x: &[f64]) -> Array1<f64> {
        let (_, z2) = self.logits(ArrayView1::from(x));
        softmax(&z2)
    }

    /// Index into `classes` of the argmax probability (ties to the
    /// lowest index).
    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.predict_proba(x);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        best
    }

    /// Mean cross-entropy over a batch of (raw features, class index).
    pub fn batch_loss(&self, xs: &[&[f64]], ys: &[usize]) -> f64 {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let (_, z2) = self.logits(ArrayView1::from(*x));
            total += log_sum_exp(&z2) - z2[y];
        }
        total / xs.len() as f64
    }

    /// Analytic gradients of [`batch_loss`] by backpropagation.
    pub fn batch_gradients(&self, xs: &[&[f64]], ys: &[usize]) -> MlpGradients {
        let mut g = MlpGradients {
            w1: Array2::zeros(self.w1.dim()),
            b1: Array1::zeros(self.b1.len()),
            w2: Array2::zeros(self.w2.dim()),
            b2: Array1::zeros(self.b2.len()),
        };
        let scale = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let xn = self.standardize(ArrayView1::from(*x));
            let z1 = self.w1.t().dot(&xn) + &self.b1;
            let h = z1.mapv(|z| z.max(0.0));
            let z2 = self.w2.t().dot(&h) + &self.b2;
            let mut dz2 = softmax(&z2);
            dz2[y] -= 1.0;

            // dL/dw2[j,k] = h[j] * dz2[k]
            for (j, &hj) in h.iter().enumerate() {
                for (k, &d) in dz2.iter().enumerate() {
                    g.w2[[j, k]] += scale * hj * d;
                }
            }
            g.b2.scaled_add(scale, &dz2);

            let dh = self.w2.dot(&dz2);
            let dz1: Array1<f64> = dh
                .iter()
                .zip(z1.iter())
                .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
                .collect();
            for (i, &xi) in xn.iter().enumerate() {
                for (j, &d) in dz1.iter().enumerate() {
                    g.w1[[i, j]] += scale * xi * d;
                }
            }
            g.b1.scaled_add(scale, &dz1);
        }
        g
    }
}

fn class_index(classes: &[u32], label: u32) -> Result<usize> {
    classes
        .binary_search(&label)
        .map_err(|_| Error::Config(format!("label {label} not among trained classes {classes:?}")))
}

fn check_consistent_features(features: &[FeatureVector]) -> Result<usize> {
    let n_in = features[0].values.len();
    if n_in == 0 {
        return Err(Error::Config("feature vectors must be non-empty".into()));
    }
    for f in features {
        if f.values.len() != n_in {
            return Err(Error::ShapeMismatch(format!(
                "feature length {} vs {}",
                f.values.len(),
                n_in
            )));
        }
    }
    Ok(n_in)
}

/// Class-proportional train/test split, deterministic in `seed`.
///
/// Per-class test counts are `round(n_class * test_fraction)` clamped so
/// both sides keep at least one sample; classes with fewer than two
/// samples are rejected.
pub fn split_stratified(
    features: &[FeatureVector],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, f) in features.iter().enumerate() {
        by_class.entry(f.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx = vec![false; features.len()];
    for (class, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(Error::Config(format!(
                "class {class} has {} sample(s); need at least 2 to split",
                idx.len()
            )));
        }
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize)
            .clamp(1, idx.len() - 1);
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            test_idx[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, f) in features.iter().enumerate() {
        if test_idx[i] {
            test.push(f.clone());
        } else {
            train.push(f.clone());
        }
    }
    Ok((train, test))
}

/// Train the readout MLP by seeded mini-batch gradient descent on
/// cross-entropy. The per-epoch mean loss is recorded; a non-finite loss
/// aborts with a divergence error naming the epoch.
pub fn train_mlp(train: &[FeatureVector], hp: &MlpHyperParams) -> Result<MlpModel> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if hp.batch == 0 || hp.n_hidden == 0 {
        return Err(Error::Config("batch and n_hidden must be >= 1".into()));
    }
    let n_in = check_consistent_features(train)?;
    let mut classes: Vec<u32> = train.iter().map(|f| f.label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Config(
            "training set must contain at least two classes".into(),
        ));
    }
    let n_classes = classes.len();

    // Per-feature standardization fitted on the training set.
    let mut mean = Array1::zeros(n_in);
    for f in train {
        mean += &ArrayView1::from(f.values.as_slice());
    }
    mean /= train.len() as f64;
    let mut var = Array1::<f64>::zeros(n_in);
    for f in train {
        let d = &ArrayView1::from(f.values.as_slice()) - &mean;
        var += &d.mapv(|v| v * v);
    }
    var /= train.len() as f64;
    let std = var.mapv(|v| if v.sqrt() < 1e-12 { 1.0 } else { v.sqrt() });

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    const INIT_SCALE: f64 = 0.1;
    let mut model = MlpModel {
        w1: Array2::from_shape_fn((n_in, hp.n_hidden), |_| {
            rng.random_range(-INIT_SCALE..=INIT_SCALE)
        }),
        b1: Array1::zeros(hp.n_hidden),
        w2: Array2::from_shape_fn((hp.n_hidden, n_classes), |_| {
            rng.random_range(-INIT_SCALE..=INIT_SCALE)
        }),
        b2: Array1::zeros(n_classes),
        feat_mean: mean,
        feat_std: std,
        classes: classes.clone(),
        hyperparams: *hp,
        loss_curve: Vec::with_capacity(hp.epochs),
    };

    let targets: Vec<usize> = train
        .iter()
        .map(|f| class_index(&classes, f.label))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hp.batch) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| train[i].values.as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            epoch_loss += model.batch_loss(&xs, &ys);
            batches += 1;
            let g = model.batch_gradients(&xs, &ys);
            model.w1.scaled_add(-hp.lr, &g.w1);
            model.b1.scaled_add(-hp.lr, &g.b1);
            model.w2.scaled_add(-hp.lr, &g.w2);
            model.b2.scaled_add(-hp.lr, &g.b2);
        }
        let loss = epoch_loss / batches as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        model.loss_curve.push(loss);
    }
    Ok(model)
}

/// Accuracy and confusion matrix of `model` on a held-out set.
pub fn evaluate(model: &MlpModel, test: &[FeatureVector]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let n_in = check_consistent_features(test)?;
    if n_in != model.w1.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "test features have {} dims, model expects {}",
            n_in,
            model.w1.nrows()
        )));
    }
    let n_classes = model.classes.len();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut correct = 0usize;
    for f in test {
        let truth = class_index(&model.classes, f.label)?;
        let pred = model.predict(&f.values);
        confusion[truth][pred] += 1;
        if truth == pred {
            correct += 1;
        }
    }
    Ok(EvalReport {
        coding: test[0].coding.as_str().to_string(),
        accuracy: correct as f64 / test.len() as f64,
        confusion,
        classes: model.classes.clone(),
        seed: 0,
        hyperparams: model.hyperparams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::Coding;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;

    fn feature(label: u32, values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            coding: Coding::Rate,
            values,
            trial_ref: 0,
            label,
        }
    }

    /// 50/50/50 samples of three linearly separable rate prototypes with
    /// mild deterministic jitter.
    fn separable_set() -> Vec<FeatureVector> {
        let mut rng = StdRng::seed_from_u64(1);
        let mut out = Vec::new();
        for (label, hot) in [(0u32, 0usize), (1, 3), (2, 7)] {
            for _ in 0..50 {
                let mut v = vec![0.0; 10];
                v[hot] = 5.0 + rng.random_range(-0.5..0.5);
                v[(hot + 1) % 10] = rng.random_range(0.0..0.5);
                out.push(feature(label, v));
            }
        }
        out
    }

    #[test]
    fn split_preserves_class_proportions() {
        let features = separable_set();
        let (train, test) = split_stratified(&features, 0.2, 7).unwrap();
        assert_eq!(train.len(), 120);
        assert_eq!(test.len(), 30);
        for class in 0..3u32 {
            assert_eq!(train.iter().filter(|f| f.label == class).count(), 40);
            assert_eq!(test.iter().filter(|f| f.label == class).count(), 10);
        }
    }

    #[test]
    fn split_is_deterministic_and_partitions_input() {
        let features = separable_set();
        let (tr1, te1) = split_stratified(&features, 0.2, 9).unwrap();
        let (tr2, te2) = split_stratified(&features, 0.2, 9).unwrap();
        assert_eq!(tr1.len(), tr2.len());
        assert!(tr1.iter().zip(&tr2).all(|(a, b)| a == b));
        assert!(te1.iter().zip(&te2).all(|(a, b)| a == b));
        // Union = input, disjoint: every input appears exactly once.
        let mut seen = vec![0usize; features.len()];
        for f in tr1.iter().chain(te1.iter()) {
            // Features here are pairwise distinct, so match by value.
            let idx = features.iter().position(|g| g == f).unwrap();
            seen[idx] += 1;
        }
        assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn split_rejects_tiny_classes() {
        let features = vec![
            feature(0, vec![1.0]),
            feature(0, vec![2.0]),
            feature(1, vec![3.0]),
        ];
        assert!(split_stratified(&features, 0.5, 0).is_err());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let features = separable_set();
        assert!(split_stratified(&features, 0.0, 0).is_err());
        assert!(split_stratified(&features, 1.0, 0).is_err());
    }

    #[test]
    fn separable_toy_reaches_perfect_train_accuracy() {
        // Independent oracle first: a multinomial logistic regression
        // (single linear layer, full-batch gradient descent) separates
        // this set perfectly, so a hidden-layer MLP must too.
        let features = separable_set();
        let oracle_acc = logistic_regression_accuracy(&features);
        assert_eq!(oracle_acc, 1.0, "oracle says the set is separable");

        let hp = MlpHyperParams {
            epochs: 200,
            ..MlpHyperParams::default()
        };
        let model = train_mlp(&features, &hp).unwrap();
        let report = evaluate(&model, &features).unwrap();
        assert_eq!(report.accuracy, 1.0);
        // Loss decreased along the way.
        assert!(model.loss_curve.last().unwrap() < &model.loss_curve[0]);
    }

    /// Test-side oracle: plain softmax regression on standardized inputs.
    fn logistic_regression_accuracy(features: &[FeatureVector]) -> f64 {
        let n_in = features[0].values.len();
        let classes: Vec<u32> = {
            let mut c: Vec<u32> = features.iter().map(|f| f.label).collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        let n_c = classes.len();
        let mut w = vec![vec![0.0f64; n_in]; n_c];
        let mut b = vec![0.0f64; n_c];
        for _ in 0..500 {
            let mut gw = vec![vec![0.0f64; n_in]; n_c];
            let mut gb = vec![0.0f64; n_c];
            for f in features {
                let y = classes.binary_search(&f.label).unwrap();
                let logits: Vec<f64> = (0..n_c)
                    .map(|k| {
                        b[k] + w[k]
                            .iter()
                            .zip(&f.values)
                            .map(|(wk, x)| wk * x)
                            .sum::<f64>()
                    })
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                for k in 0..n_c {
                    let p = exps[k] / sum - if k == y { 1.0 } else { 0.0 };
                    for (g, x) in gw[k].iter_mut().zip(&f.values) {
                        *g += p * x;
                    }
                    gb[k] += p;
                }
            }
            let lr = 0.01 / features.len() as f64;
            for k in 0..n_c {
                for (wk, g) in w[k].iter_mut().zip(&gw[k]) {
                    *wk -= lr * g;
                }
                b[k] -= lr * gb[k];
            }
        }
        let correct = features
            .iter()
            .filter(|f| {
                let y = classes.binary_search(&f.label).unwrap();
                let logits: Vec<f64> = (0..n_c)
                    .map(|k| {
                        b[k] + w[k]
                            .iter()
                            .zip(&f.values)
                            .map(|(wk, x)| wk * x)
                            .sum::<f64>()
                    })
                    .collect();
                let best = (0..n_c).fold(0, |acc, k| if logits[k] > logits[acc] { k } else { acc });
                best == y
            })
            .count();
        correct as f64 / features.len() as f64
    }

    #[test]
    fn zero_epochs_gives_near_uniform_softmax() {
        let features = separable_set();
        let hp = MlpHyperParams {
            epochs: 0,
            ..MlpHyperParams::default()
        };
        let model = train_mlp(&features, &hp).unwrap();
        assert!(model.loss_curve.is_empty());
        let p = model.predict_proba(&features[0].values);
        assert_relative_eq!(p.sum(), 1.0, epsilon = 1e-6);
        for &prob in p.iter() {
            assert!((prob - 1.0 / 3.0).abs() < 0.15, "softmax far from uniform: {p}");
        }
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let features = separable_set();
        let hp = MlpHyperParams {
            n_hidden: 8,
            epochs: 0,
            seed: 3,
            ..MlpHyperParams::default()
        };
        let model = train_mlp(&features, &hp).unwrap();
        let xs: Vec<&[f64]> = features[..5].iter().map(|f| f.values.as_slice()).collect();
        let ys = vec![0usize, 0, 0, 0, 0];
        let analytic = model.batch_gradients(&xs, &ys);

        let eps = 1e-5;
        let check = |analytic_g: f64, perturb: &mut dyn FnMut(&mut MlpModel, f64)| {
            let mut plus = model.clone();
            perturb(&mut plus, eps);
            let mut minus = model.clone();
            perturb(&mut minus, -eps);
            let numeric = (plus.batch_loss(&xs, &ys) - minus.batch_loss(&xs, &ys)) / (2.0 * eps);
            let denom = analytic_g.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic_g - numeric).abs() / denom;
            assert!(
                rel <= 1e-4,
                "gradient mismatch: analytic {analytic_g}, numeric {numeric}, rel {rel}"
            );
        };

        for i in [0usize, 3, 9] {
            for j in [0usize, 5] {
                check(analytic.w1[[i, j]], &mut |m, d| m.w1[[i, j]] += d);
            }
        }
        for j in 0..8 {
            check(analytic.b1[j], &mut |m, d| m.b1[j] += d);
            for k in 0..3 {
                check(analytic.w2[[j, k]], &mut |m, d| m.w2[[j, k]] += d);
            }
        }
        for k in 0..3 {
            check(analytic.b2[k], &mut |m, d| m.b2[k] += d);
        }
    }

    #[test]
    fn perfect_predictor_yields_diagonal_confusion() {
        let features = separable_set();
        let model = train_mlp(&features, &MlpHyperParams::default()).unwrap();
        let report = evaluate(&model, &features).unwrap();
        assert_eq!(report.accuracy, 1.0);
        for (i, row) in report.confusion.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                assert_eq!(n, if i == j { 50 } else { 0 });
            }
        }
    }

    #[test]
    fn accuracy_equals_confusion_trace_over_total() {
        // Even a deliberately under-trained model satisfies the identity.
        let features = separable_set();
        let hp = MlpHyperParams {
            epochs: 1,
            ..MlpHyperParams::default()
        };
        let model = train_mlp(&features, &hp).unwrap();
        let report = evaluate(&model, &features).unwrap();
        let trace: usize = (0..3).map(|i| report.confusion[i][i]).sum();
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, features.len());
        assert_relative_eq!(report.accuracy, trace as f64 / total as f64);
        // Row sums are the per-class test counts.
        for row in &report.confusion {
            assert_eq!(row.iter().sum::<usize>(), 50);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let features = separable_set();
        let hp = MlpHyperParams {
            epochs: 20,
            ..MlpHyperParams::default()
        };
        let a = train_mlp(&features, &hp).unwrap();
        let b = train_mlp(&features, &hp).unwrap();
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.loss_curve, b.loss_curve);
    }

    #[test]
    fn evaluate_rejects_feature_length_mismatch() {
        let features = separable_set();
        let model = train_mlp(&features, &MlpHyperParams { epochs: 1, ..Default::default() }).unwrap();
        let bad = vec![feature(0, vec![1.0, 2.0])];
        assert!(matches!(
            evaluate(&model, &bad),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn chance_level_for_uninformative_features() {
        // Identical features for every class: accuracy near 1/3 on a
        // balanced set (prediction collapses to a single class).
        let mut features = Vec::new();
        for label in 0..3u32 {
            for _ in 0..30 {
                features.push(feature(label, vec![1.0; 10]));
            }
        }
        let model = train_mlp(&features, &MlpHyperParams { epochs: 50, ..Default::default() }).unwrap();
        let report = evaluate(&model, &features).unwrap();
        assert!((report.accuracy - 1.0 / 3.0).abs() < 1e-9);
    }
}
