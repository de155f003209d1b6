//! Bag-of-words logistic regression over titles.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

const EPOCHS: usize = 50;
const LEARNING_RATE: f64 = 0.1;
const L2: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleClassifierModel {
    pub vocabulary: BTreeMap<String, usize>,
    /// One weight per vocabulary entry, then the bias.
    pub weights: Vec<f64>,
    /// SHA-256 over the training examples and seed.
    pub trained_on: String,
}

/// Lowercased alphanumeric word tokens.
pub fn tokenize_title(title: &str) -> Vec<String> {
    title
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn fingerprint(labeled: &[(String, bool)], seed: u64) -> String {
    let mut h = Sha256::new();
    for (title, label) in labeled {
        h.update(title.as_bytes());
        h.update([0, u8::from(*label)]);
    }
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())
}

/// Sparse word-count features: (vocabulary index, count), sorted by index.
fn features(vocabulary: &BTreeMap<String, usize>, title: &str) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in tokenize_title(title) {
        if let Some(&i) = vocabulary.get(&tok) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    counts.into_iter().collect()
}

impl TitleClassifierModel {
    fn bias(&self) -> f64 {
        *self.weights.last().expect("bias weight")
    }

    fn linear(&self, x: &[(usize, f64)]) -> f64 {
        x.iter().map(|(i, c)| self.weights[*i] * c).sum::<f64>() + self.bias()
    }
}

fn mean_loss(model: &TitleClassifierModel, data: &[(Vec<(usize, f64)>, f64)]) -> f64 {
    let n = data.len() as f64;
    let log_loss: f64 = data
        .iter()
        .map(|(x, y)| {
            let p = sigmoid(model.linear(x)).clamp(1e-15, 1.0 - 1e-15);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n;
    let reg: f64 = model.weights[..model.weights.len() - 1].iter().map(|w| w * w).sum::<f64>() * L2 / 2.0;
    log_loss + reg
}

/// Train and also return the regularized mean training loss after each epoch.
pub fn train_title_baseline_with_history(labeled: &[(String, bool)], seed: u64) -> Result<(TitleClassifierModel, Vec<f64>), GatewayError> {
    let positives = labeled.iter().filter(|(_, l)| *l).count();
    let negatives = labeled.len() - positives;
    if positives < 2 || negatives < 2 {
        return Err(GatewayError::DegenerateDataset(format!(
            "need at least 2 examples per class, got {positives} relevant / {negatives} irrelevant"
        )));
    }

    let mut vocabulary = BTreeMap::new();
    let mut tokens: Vec<String> = labeled.iter().flat_map(|(t, _)| tokenize_title(t)).collect();
    tokens.sort();
    tokens.dedup();
    for (i, tok) in tokens.into_iter().enumerate() {
        vocabulary.insert(tok, i);
    }
    if vocabulary.is_empty() {
        return Err(GatewayError::DegenerateDataset("no tokens in training titles".into()));
    }

    let dim = vocabulary.len();
    let data: Vec<(Vec<(usize, f64)>, f64)> = labeled
        .iter()
        .map(|(t, l)| (features(&vocabulary, t), if *l { 1.0 } else { 0.0 }))
        .collect();

    let mut model = TitleClassifierModel { vocabulary, weights: vec![0.0; dim + 1], trained_on: fingerprint(labeled, seed) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(EPOCHS);

    for _ in 0..EPOCHS {
        order.shuffle(&mut rng);
        for &k in &order {
            let (x, y) = &data[k];
            let err = sigmoid(model.linear(x)) - y;
            // L2 decay applies to feature weights, not the bias
            let decay = 1.0 - LEARNING_RATE * L2;
            for w in &mut model.weights[..dim] {
                *w *= decay;
            }
            for (i, c) in x {
                model.weights[*i] -= LEARNING_RATE * err * c;
            }
            model.weights[dim] -= LEARNING_RATE * err;
        }
        history.push(mean_loss(&model, &data));
    }
    debug_assert!(model.weights.iter().all(|w| w.is_finite()));
    Ok((model, history))
}

/// Fit the baseline with fixed hyperparameters (50 epochs, learning rate
/// 0.1, L2 1e-4) and seeded per-epoch shuffling.
pub fn train_title_baseline(labeled: &[(String, bool)], seed: u64) -> Result<TitleClassifierModel, GatewayError> {
    train_title_baseline_with_history(labeled, seed).map(|(m, _)| m)
}

/// Probability that `title` is relevant, strictly inside (0, 1).
/// Unknown tokens contribute nothing.
pub fn predict_title(model: &TitleClassifierModel, title: &str) -> f64 {
    let x = features(&model.vocabulary, title);
    sigmoid(model.linear(&x)).clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}
