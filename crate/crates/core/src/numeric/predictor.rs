//! One-hidden-layer perceptron deciding whether the next step scores.
//!
//! The network math is generic over the float type so the same code can be
//! checked in `f64` against finite differences and trained in `f32`.

use std::path::Path;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Action, GameId};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::numeric::features::{feature_len, featurize};

/// Parameters stored flat as `[w1 (hidden x input, row-major) | b1 | w2 | b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub input: usize,
    pub hidden: usize,
    pub params: Vec<T>,
}

impl<T: Float> Mlp<T> {
    pub fn param_count(input: usize, hidden: usize) -> usize {
        hidden * input + 2 * hidden + 1
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { input, hidden, params: vec![T::zero(); Self::param_count(input, hidden)] }
    }

    fn split(&self) -> (&[T], &[T], &[T], T) {
        let (w1, rest) = self.params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        (w1, b1, w2, b2[0])
    }

    /// Hidden activations (after the rectifier) into `h`; returns the logit.
    fn forward_into(&self, x: &[T], h: &mut [T]) -> T {
        let (w1, b1, w2, b2) = self.split();
        let mut z = b2;
        for j in 0..self.hidden {
            let row = &w1[j * self.input..(j + 1) * self.input];
            let mut a = b1[j];
            for (&w, &xi) in row.iter().zip(x) {
                a = a + w * xi;
            }
            h[j] = a.max(T::zero());
            z = z + w2[j] * h[j];
        }
        z
    }

    pub fn logit(&self, x: &[T]) -> T {
        let mut h = vec![T::zero(); self.hidden];
        self.forward_into(x, &mut h)
    }

    /// Mean binary cross-entropy on logits over the batch.
    pub fn loss(&self, xs: &[&[T]], ys: &[T]) -> T {
        let mut h = vec![T::zero(); self.hidden];
        let total = xs
            .iter()
            .zip(ys)
            .fold(T::zero(), |acc, (x, &y)| acc + bce_with_logits(self.forward_into(x, &mut h), y));
        total / T::from(xs.len()).unwrap()
    }

    /// Loss and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, xs: &[&[T]], ys: &[T]) -> (T, Vec<T>) {
        let mut grad = vec![T::zero(); self.params.len()];
        let (_, _, w2, _) = self.split();
        let n = T::from(xs.len()).unwrap();
        let mut h = vec![T::zero(); self.hidden];
        let mut loss = T::zero();
        let (hi, inp) = (self.hidden, self.input);
        let (off_b1, off_w2, off_b2) = (hi * inp, hi * inp + hi, hi * inp + 2 * hi);
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.forward_into(x, &mut h);
            loss = loss + bce_with_logits(z, y);
            let dz = (sigmoid(z) - y) / n;
            grad[off_b2] = grad[off_b2] + dz;
            for j in 0..hi {
                grad[off_w2 + j] = grad[off_w2 + j] + dz * h[j];
                if h[j] > T::zero() {
                    let dh = dz * w2[j];
                    grad[off_b1 + j] = grad[off_b1 + j] + dh;
                    let g = &mut grad[j * inp..(j + 1) * inp];
                    for (gi, &xi) in g.iter_mut().zip(x.iter()) {
                        *gi = *gi + dh * xi;
                    }
                }
            }
        }
        (loss / n, grad)
    }
}

pub fn sigmoid<T: Float>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn bce_with_logits<T: Float>(z: T, y: T) -> T {
    z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p()
}

/// One labeled transition: features of frame n-1 with action n-1, and
/// whether step n scored.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f32>,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight of the logic loss in a joint objective. Recorded only; there
    /// is no joint objective here.
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { hidden: 128, epochs: 10, learning_rate: 1e-3, batch_size: 64, seed: 0, lambda: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub train_samples: usize,
    /// Mean training loss of each epoch.
    pub loss_curve: Vec<f64>,
    pub held_out_samples: usize,
    pub held_out_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventPredictorModel {
    pub game: GameId,
    pub net: Mlp<f32>,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    game: GameId,
    input_dim: usize,
    hidden: usize,
    action_dim: usize,
    param_count: usize,
    weights: String,
    layout: String,
    meta: TrainingMeta,
}

impl EventPredictorModel {
    pub fn input_dim(&self) -> usize {
        self.net.input
    }

    pub fn logit_features(&self, features: &[f32]) -> Result<f32> {
        if features.len() != self.net.input {
            return Err(Error::DimensionMismatch { expected: self.net.input, got: features.len() });
        }
        Ok(self.net.logit(features))
    }

    pub fn probability_features(&self, features: &[f32]) -> Result<f64> {
        Ok(sigmoid(self.logit_features(features)? as f64))
    }

    /// Fraction of samples whose thresholded prediction equals the label.
    pub fn accuracy(&self, samples: &[Sample]) -> Result<f64> {
        if samples.is_empty() {
            return Ok(1.0);
        }
        let mut right = 0usize;
        for s in samples {
            right += ((self.logit_features(&s.features)? > 0.0) == s.label) as usize;
        }
        Ok(right as f64 / samples.len() as f64)
    }

    /// Writes `model.json` and the little-endian f32 blob `weights.bin`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let manifest = Manifest {
            game: self.game,
            input_dim: self.net.input,
            hidden: self.net.hidden,
            action_dim: self.net.input - crate::numeric::features::POOL.pow(2),
            param_count: self.net.params.len(),
            weights: "weights.bin".into(),
            layout: "w1[hidden][input], b1[hidden], w2[hidden], b2".into(),
            meta: self.meta.clone(),
        };
        std::fs::write(dir.join("model.json"), serde_json::to_string_pretty(&manifest)?)?;
        let blob: Vec<u8> = self.net.params.iter().flat_map(|w| w.to_le_bytes()).collect();
        std::fs::write(dir.join("weights.bin"), blob)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: Manifest = serde_json::from_slice(&std::fs::read(dir.join("model.json"))?)?;
        let blob = std::fs::read(dir.join(&m.weights))?;
        let expected = Mlp::<f32>::param_count(m.input_dim, m.hidden);
        if m.param_count != expected || blob.len() != expected * 4 {
            return Err(Error::DimensionMismatch { expected: expected * 4, got: blob.len() });
        }
        if m.input_dim != feature_len(m.game) {
            return Err(Error::DimensionMismatch { expected: feature_len(m.game), got: m.input_dim });
        }
        let params =
            blob.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Self { game: m.game, net: Mlp { input: m.input_dim, hidden: m.hidden, params }, meta: m.meta })
    }
}

/// Probability that `action` taken on `frame` triggers an event.
pub fn predict_event(model: &EventPredictorModel, frame: &Frame, action: Action) -> Result<f64> {
    model.probability_features(&featurize(model.game, frame, action)?)
}

/// Trains with mini-batch Adam on binary cross-entropy. Deterministic given
/// `config.seed`. `held_out` is only scored.
pub fn train_event_predictor(
    game: GameId,
    train: &[Sample],
    held_out: &[Sample],
    config: &TrainConfig,
) -> Result<EventPredictorModel> {
    let input = feature_len(game);
    if let Some(s) = train.iter().chain(held_out).find(|s| s.features.len() != input) {
        return Err(Error::DimensionMismatch { expected: input, got: s.features.len() });
    }
    let positives = train.iter().filter(|s| s.label).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::DegenerateDataset(format!(
            "{positives} positive of {} samples; both classes are required",
            train.len()
        )));
    }
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::InvalidConfig("batch size and hidden width must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Mlp::<f32>::zeros(input, config.hidden);
    let a1 = (6.0 / input as f32).sqrt();
    let a2 = (6.0 / config.hidden as f32).sqrt();
    let n_w1 = config.hidden * input;
    for (i, p) in net.params.iter_mut().enumerate() {
        if i < n_w1 {
            *p = rng.random_range(-a1..a1);
        } else if (n_w1 + config.hidden..n_w1 + 2 * config.hidden).contains(&i) {
            *p = rng.random_range(-a2..a2);
        }
    }

    let (beta1, beta2, eps) = (0.9f32, 0.999f32, 1e-8f32);
    let lr = config.learning_rate as f32;
    let mut m = vec![0.0f32; net.params.len()];
    let mut v = vec![0.0f32; net.params.len()];
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f32]> = batch.iter().map(|&i| train[i].features.as_slice()).collect();
            let ys: Vec<f32> = batch.iter().map(|&i| train[i].label as u8 as f32).collect();
            let (loss, grad) = net.loss_and_grad(&xs, &ys);
            epoch_loss += loss as f64 * batch.len() as f64;
            t += 1;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for i in 0..net.params.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                net.params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        loss_curve.push(epoch_loss / train.len() as f64);
    }

    let mut model = EventPredictorModel {
        game,
        net,
        meta: TrainingMeta {
            config: config.clone(),
            train_samples: train.len(),
            loss_curve,
            held_out_samples: held_out.len(),
            held_out_accuracy: None,
        },
    };
    if !held_out.is_empty() {
        model.meta.held_out_accuracy = Some(model.accuracy(held_out)?);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = feature_len(GameId::Traveler);
        (0..n)
            .map(|_| {
                let mut f: Vec<f32> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
                let label = rng.random_bool(0.5);
                f[..32].fill(if label { 1.0 } else { 0.0 });
                Sample { features: f, label }
            })
            .collect()
    }

    #[test]
    fn zero_logit_is_even_odds() {
        assert_eq!(sigmoid(0.0f64), 0.5);
    }

    #[test]
    fn separable_set_is_learned_exactly() {
        let cfg = TrainConfig { epochs: 20, hidden: 16, learning_rate: 1e-2, ..TrainConfig::default() };
        let model =
            train_event_predictor(GameId::Traveler, &separable(400, 1), &separable(200, 2), &cfg)
                .unwrap();
        assert_eq!(model.meta.held_out_accuracy, Some(1.0));
    }

    #[test]
    fn single_class_is_degenerate() {
        let mut data = separable(20, 3);
        data.iter_mut().for_each(|s| s.label = false);
        let r = train_event_predictor(GameId::Traveler, &data, &[], &TrainConfig::default());
        assert!(matches!(r, Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (input, hidden) = (12, 7);
        let net = Mlp::<f64> {
            input,
            hidden,
            params: (0..Mlp::<f64>::param_count(input, hidden))
                .map(|_| rng.random_range(-0.8..0.8))
                .collect(),
        };
        let xs: Vec<Vec<f64>> =
            (0..5).map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..5).map(|i| (i % 2) as f64).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let (_, grad) = net.loss_and_grad(&refs, &ys);
        let h = 1e-5;
        for i in 0..net.params.len() {
            let mut p = net.clone();
            p.params[i] += h;
            let up = p.loss(&refs, &ys);
            p.params[i] -= 2.0 * h;
            let down = p.loss(&refs, &ys);
            let numeric = (up - down) / (2.0 * h);
            let denom = grad[i].abs().max(numeric.abs()).max(1e-6);
            assert!((grad[i] - numeric).abs() / denom < 1e-4, "param {i}");
        }
    }

    #[test]
    fn save_load_is_bit_exact() {
        let cfg = TrainConfig { epochs: 1, hidden: 8, ..TrainConfig::default() };
        let model =
            train_event_predictor(GameId::Traveler, &separable(64, 4), &[], &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        assert_eq!(EventPredictorModel::load(dir.path()).unwrap(), model);
    }

    #[test]
    fn wrong_feature_length_is_rejected() {
        let cfg = TrainConfig { epochs: 1, hidden: 4, ..TrainConfig::default() };
        let model =
            train_event_predictor(GameId::Traveler, &separable(32, 5), &[], &cfg).unwrap();
        assert!(matches!(
            model.probability_features(&[0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
