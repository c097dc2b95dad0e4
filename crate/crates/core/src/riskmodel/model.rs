use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::features::FeatureVector;
use super::labeling::LabeledWindow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub learning_rate: f64,
    /// Full passes over the training set.
    pub epochs: usize,
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 500, l2: 1e-3 }
    }
}

/// Logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub params: TrainParams,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-feature mean and population standard deviation; constant features
/// get scale 1.
pub fn standardization(rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, |r| r.len());
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for r in rows {
        for (m, x) in means.iter_mut().zip(r.iter()) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut scales = vec![0.0; d];
    for r in rows {
        for ((s, x), m) in scales.iter_mut().zip(r.iter()).zip(&means) {
            *s += (x - m).powi(2);
        }
    }
    for s in &mut scales {
        let sd = (*s / n).sqrt();
        *s = if sd > 1e-12 && sd.is_finite() { sd } else { 1.0 };
    }
    (means, scales)
}

impl RiskModel {
    pub fn feature_len(&self) -> usize {
        self.weights.len()
    }

    pub fn standardize(&self, features: &[f64]) -> Vec<f64> {
        features.iter().zip(&self.means).zip(&self.scales).map(|((x, m), s)| (x - m) / s).collect()
    }

    fn logit_standardized(&self, z: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }

    /// Serializes as five lines: metadata, means, scales, weights, bias.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "equilivest-risk-model features={} learning_rate={} epochs={} l2={}",
            self.feature_len(),
            p.learning_rate,
            p.epochs,
            p.l2
        );
        let _ = writeln!(out, "{}", join(&self.means));
        let _ = writeln!(out, "{}", join(&self.scales));
        let _ = writeln!(out, "{}", join(&self.weights));
        let _ = writeln!(out, "{}", self.bias);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next =
            |line: usize| lines.next().ok_or(Error::Parse { line, reason: "unexpected end of model".into() });
        let header = next(1)?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("equilivest-risk-model") {
            return Err(Error::Parse { line: 1, reason: "missing model header".into() });
        }
        let mut n = None;
        let mut params = TrainParams::default();
        for kv in fields {
            let (k, v) = kv.split_once('=').ok_or(Error::Parse { line: 1, reason: format!("bad field `{kv}`") })?;
            let bad = || Error::Parse { line: 1, reason: format!("bad value for `{k}`") };
            match k {
                "features" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                "learning_rate" => params.learning_rate = v.parse().map_err(|_| bad())?,
                "epochs" => params.epochs = v.parse().map_err(|_| bad())?,
                "l2" => params.l2 = v.parse().map_err(|_| bad())?,
                _ => return Err(Error::Parse { line: 1, reason: format!("unknown field `{k}`") }),
            }
        }
        let n = n.ok_or(Error::Parse { line: 1, reason: "missing feature count".into() })?;
        let mut vector = |line: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = next(line)?
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| Error::Parse { line, reason: format!("bad number `{x}`") }))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(Error::Parse { line, reason: format!("expected {n} values, got {}", v.len()) });
            }
            Ok(v)
        };
        let means = vector(2)?;
        let scales = vector(3)?;
        let weights = vector(4)?;
        let bias_line = next(5)?;
        let bias = bias_line.trim().parse().map_err(|_| Error::Parse { line: 5, reason: "bad bias".into() })?;
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Parse { line: 3, reason: "scales must be positive".into() });
        }
        Ok(Self { weights, bias, means, scales, params })
    }
}

/// Mean cross-entropy plus `l2 / 2 * |w|²` on standardized rows.
fn loss(model: &RiskModel, z: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = z.len() as f64;
    let ce: f64 = z
        .iter()
        .zip(y)
        .map(|(row, &t)| {
            let s = model.logit_standardized(row);
            // log(1 + e^s) - t s, evaluated stably
            s.max(0.0) + (-s.abs()).exp().ln_1p() - t * s
        })
        .sum::<f64>()
        / n;
    ce + 0.5 * model.params.l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Full-batch gradient descent from zero weights. Returns the model and the
/// loss before each epoch followed by the final loss.
pub fn train_with_history(data: &[LabeledWindow], params: &TrainParams) -> Result<(RiskModel, Vec<f64>)> {
    let Some(first) = data.first() else {
        return Err(Error::DegenerateTraining("empty training set"));
    };
    let d = first.features.len();
    if let Some(bad) = data.iter().find(|w| w.features.len() != d) {
        return Err(Error::Shape { expected: d, actual: bad.features.len() });
    }
    let positives = data.iter().filter(|w| w.label == 1).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::DegenerateTraining("training data must contain both classes"));
    }
    let rows: Vec<&[f64]> = data.iter().map(|w| w.features.as_slice()).collect();
    let (means, scales) = standardization(&rows);
    let mut model = RiskModel { weights: vec![0.0; d], bias: 0.0, means, scales, params: *params };
    let z: Vec<Vec<f64>> = rows.iter().map(|r| model.standardize(r)).collect();
    let y: Vec<f64> = data.iter().map(|w| f64::from(w.label)).collect();
    let n = z.len() as f64;

    let mut history = Vec::with_capacity(params.epochs + 1);
    let mut grad = vec![0.0; d];
    for _ in 0..params.epochs {
        history.push(loss(&model, &z, &y));
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &t) in z.iter().zip(&y) {
            let err = sigmoid(model.logit_standardized(row)) - t;
            grad_b += err;
            for (g, x) in grad.iter_mut().zip(row) {
                *g += err * x;
            }
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= params.learning_rate * (g / n + params.l2 * *w);
        }
        model.bias -= params.learning_rate * grad_b / n;
    }
    history.push(loss(&model, &z, &y));
    Ok((model, history))
}

pub fn train(data: &[LabeledWindow], params: &TrainParams) -> Result<RiskModel> {
    train_with_history(data, params).map(|(m, _)| m)
}

pub fn predict(model: &RiskModel, features: &FeatureVector) -> Result<f64> {
    if features.len() != model.feature_len() {
        return Err(Error::Shape { expected: model.feature_len(), actual: features.len() });
    }
    Ok(sigmoid(model.logit_standardized(&model.standardize(features.as_slice()))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub threshold: f64,
    /// NaN when the set has no positives.
    pub sensitivity: f64,
    /// NaN when the set has no negatives.
    pub specificity: f64,
    pub accuracy: f64,
    /// Mean lead time over true positives; `None` without any.
    pub mean_lead_time_ms: Option<f64>,
}

/// Metrics at every threshold; a window is flagged when risk ≥ threshold.
pub fn evaluate(model: &RiskModel, test: &[LabeledWindow], thresholds: &[f64]) -> Result<Vec<Metrics>> {
    if test.is_empty() {
        return Err(Error::Evaluation("empty test set"));
    }
    let scored: Vec<(f64, &LabeledWindow)> =
        test.iter().map(|w| predict(model, &w.features).map(|r| (r, w))).collect::<Result<_>>()?;
    Ok(thresholds.iter().map(|&th| metrics_at(&scored, th)).collect())
}

/// Metrics for externally scored windows.
pub fn metrics_at(scored: &[(f64, &LabeledWindow)], threshold: f64) -> Metrics {
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    let mut lead = 0.0;
    for &(risk, w) in scored {
        match (risk >= threshold, w.label == 1) {
            (true, true) => {
                tp += 1;
                lead += w.lead_time_ms;
            }
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { f64::NAN } else { a as f64 / (a + b) as f64 };
    Metrics {
        threshold,
        sensitivity: ratio(tp, fneg),
        specificity: ratio(tn, fp),
        accuracy: (tp + tn) as f64 / scored.len().max(1) as f64,
        mean_lead_time_ms: (tp > 0).then(|| lead / tp as f64),
    }
}

/// Evenly spaced thresholds `0, 1/steps, …, 1`.
pub fn threshold_sweep(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::simulator::XorShift64Star;

    fn lw(features: Vec<f64>, label: u8) -> LabeledWindow {
        LabeledWindow {
            features: FeatureVector(features),
            label,
            lead_time_ms: if label == 1 { 100.0 } else { 0.0 },
            end_ms: 0,
        }
    }

    /// Positives shifted by +5 standard units on feature 0.
    fn separable(n: usize, seed: u64) -> Vec<LabeledWindow> {
        let mut rng = XorShift64Star::new(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let shift = if label == 1 { 5.0 } else { 0.0 };
                lw(vec![rng.gaussian(0.3) + shift, rng.normal(), rng.normal()], label)
            })
            .collect()
    }

    #[test]
    fn separable_set_is_learned() {
        let data = separable(200, 1);
        let model = train(&data, &TrainParams::default()).unwrap();
        let m = evaluate(&model, &data, &[0.5]).unwrap()[0];
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.sensitivity, 1.0);
        assert_eq!(m.specificity, 1.0);
        assert_eq!(m.mean_lead_time_ms, Some(100.0));
    }

    #[test]
    fn duplicated_data_same_boundary() {
        let data = separable(100, 2);
        let doubled: Vec<_> = data.iter().flat_map(|w| [w.clone(), w.clone()]).collect();
        let p = TrainParams { epochs: 200, ..Default::default() };
        let a = train(&data, &p).unwrap();
        let b = train(&doubled, &p).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!((a.bias - b.bias).abs() < 1e-9);
    }

    #[test]
    fn zero_epochs_predicts_half() {
        let data = separable(20, 3);
        let model = train(&data, &TrainParams { epochs: 0, ..Default::default() }).unwrap();
        assert!(model.weights.iter().all(|w| *w == 0.0));
        for w in &data {
            assert_eq!(predict(&model, &w.features).unwrap(), 0.5);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let one_class = vec![lw(vec![1.0], 0), lw(vec![2.0], 0)];
        assert!(matches!(train(&one_class, &TrainParams::default()), Err(Error::DegenerateTraining(_))));
        assert!(train(&[], &TrainParams::default()).is_err());
        let ragged = vec![lw(vec![1.0], 0), lw(vec![2.0, 3.0], 1)];
        assert!(matches!(train(&ragged, &TrainParams::default()), Err(Error::Shape { .. })));
        let model = train(&separable(10, 0), &TrainParams::default()).unwrap();
        assert!(matches!(predict(&model, &FeatureVector(vec![1.0])), Err(Error::Shape { expected: 3, actual: 1 })));
        assert!(matches!(evaluate(&model, &[], &[0.5]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn standardized_training_features() {
        let data = separable(300, 4);
        let model = train(&data, &TrainParams { epochs: 1, ..Default::default() }).unwrap();
        let z: Vec<Vec<f64>> = data.iter().map(|w| model.standardize(w.features.as_slice())).collect();
        for j in 0..3 {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_non_increasing() {
        let mut data = separable(200, 5);
        // overlap the classes so the loss does not collapse to 0 immediately
        for w in data.iter_mut().step_by(7) {
            w.label = 1 - w.label;
        }
        let (_, history) = train_with_history(&data, &TrainParams::default()).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn constant_predictor_has_no_sensitivity() {
        let data = separable(20, 6);
        let model = train(&data, &TrainParams { epochs: 0, ..Default::default() }).unwrap();
        let m = evaluate(&model, &data, &[0.6]).unwrap()[0];
        assert_eq!(m.sensitivity, 0.0);
        assert_eq!(m.specificity, 1.0);
        assert_eq!(m.mean_lead_time_ms, None);
    }

    #[test]
    fn text_round_trip() {
        let model = train(&separable(50, 7), &TrainParams::default()).unwrap();
        let back = RiskModel::from_text(&model.to_text()).unwrap();
        assert_eq!(back, model);
        assert!(RiskModel::from_text("nope\n").is_err());
        let truncated: String = model.to_text().lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(RiskModel::from_text(&truncated), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn sweep_endpoints() {
        let s = threshold_sweep(4);
        assert_eq!(s, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    static FITTED: std::sync::LazyLock<RiskModel> =
        std::sync::LazyLock::new(|| train(&separable(40, 8), &TrainParams::default()).unwrap());

    proptest! {
        #[test]
        fn risk_in_unit_interval(xs in proptest::collection::vec(-1e6f64..1e6, 3)) {
            let r = predict(&FITTED, &FeatureVector(xs)).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn monotone_in_positive_weight_feature(base in proptest::collection::vec(-10.0f64..10.0, 3), bump in 0.0f64..5.0) {
            let model = &*FITTED;
            for j in 0..3 {
                if model.weights[j] > 0.0 {
                    let mut hi = base.clone();
                    hi[j] += bump;
                    let a = predict(model, &FeatureVector(base.clone())).unwrap();
                    let b = predict(model, &FeatureVector(hi)).unwrap();
                    prop_assert!(b >= a);
                }
            }
        }
    }
}
