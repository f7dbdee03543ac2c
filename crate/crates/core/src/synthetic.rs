//! Seeded toy image data and a small MLP trainer, used to build
//! desk-scale benchmark fixtures.
//!
//! Images are `size x size x 1` on a gray (0.5) noisy background with one
//! bright stroke whose orientation is the class: 0 horizontal, 1 vertical,
//! 2 diagonal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::data::{Dataset, Shape};
use crate::error::{Error, Result};
use crate::model::{softmax, Activation, DenseLayer, Model};
use crate::seed::{self, Stage};

pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternConfig {
    pub size: usize,
    /// Background std around 0.5.
    pub noise: f64,
    pub stroke: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            size: 16,
            noise: 0.1,
            stroke: 0.95,
        }
    }
}

fn pattern_image(cfg: &PatternConfig, class: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = cfg.size;
    let mut img: Vec<f64> = (0..s * s)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (0.5 + cfg.noise * z).clamp(0.0, 1.0)
        })
        .collect();
    let len = rng.random_range(s / 2..=s * 3 / 4);
    let mut paint = |r: usize, c: usize| {
        if r < s && c < s {
            img[r * s + c] = cfg.stroke;
        }
    };
    match class {
        0 => {
            let r = rng.random_range(0..s - 1);
            let c0 = rng.random_range(0..=s - len);
            for c in c0..c0 + len {
                paint(r, c);
                paint(r + 1, c);
            }
        }
        1 => {
            let c = rng.random_range(0..s - 1);
            let r0 = rng.random_range(0..=s - len);
            for r in r0..r0 + len {
                paint(r, c);
                paint(r, c + 1);
            }
        }
        _ => {
            let r0 = rng.random_range(0..=s - len);
            let c0 = rng.random_range(0..=s - len);
            for t in 0..len {
                paint(r0 + t, c0 + t);
                paint(r0 + t, c0 + t + 1);
            }
        }
    }
    img
}

/// `n` labelled images, classes cycling `0, 1, 2, ...`. Different `stream`
/// values give disjoint samples for the same seed (e.g. train vs test).
pub fn pattern_dataset(cfg: &PatternConfig, n: usize, seed: u64, stream: u64) -> Result<Dataset> {
    if cfg.size < 4 {
        return Err(Error::InvalidConfig("pattern images need size >= 4".into()));
    }
    let mut rng = seed::stream(seed, Stage::SyntheticData, stream);
    let labels: Vec<usize> = (0..n).map(|i| i % NUM_CLASSES).collect();
    let inputs = labels.iter().map(|&c| pattern_image(cfg, c, &mut rng)).collect();
    Dataset::new(inputs, Some(Shape::new(cfg.size, cfg.size, 1)?), Some(labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 15,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, slot: usize, params: &mut [f64], grads: &[f64], lr: f64) {
        let b1t = 1.0 - Self::BETA1.powi(self.t);
        let b2t = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m[slot].iter_mut())
            .zip(self.v[slot].iter_mut())
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / b1t) / ((*v / b2t).sqrt() + Self::EPS);
        }
    }
}

/// Relu MLP with the given hidden widths, trained with softmax
/// cross-entropy and Adam on mini-batches.
pub fn train_mlp(dataset: &Dataset, num_classes: usize, cfg: &TrainConfig) -> Result<Model> {
    dataset.validate()?;
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("training needs labels".into()))?;
    if labels.iter().any(|&l| l >= num_classes) {
        return Err(Error::InvalidInput("label out of range".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }

    let mut rng = seed::stream(cfg.seed, Stage::Training, 0);
    let mut dims = vec![dataset.dim()];
    dims.extend(&cfg.hidden);
    dims.push(num_classes);
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new(-limit, limit).expect("finite limit");
            let weights = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            let act = if l + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            DenseLayer::new(fan_in, fan_out, weights, vec![0.0; fan_out], act)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = Model::new(dataset.dim(), layers)?;

    let sizes: Vec<(usize, usize)> = model.layers().iter().map(|l| (l.weights().len(), l.bias().len())).collect();
    let zeros = || sizes.iter().flat_map(|&(w, b)| [vec![0.0; w], vec![0.0; b]]).collect::<Vec<_>>();
    let mut adam = Adam {
        m: zeros(),
        v: zeros(),
        t: 0,
    };

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = zeros();
            for &idx in batch {
                accumulate_gradients(&model, &dataset.inputs[idx], labels[idx], &mut grads)?;
            }
            let scale = 1.0 / batch.len() as f64;
            adam.t += 1;
            for (l, layer) in model.layers_mut().iter_mut().enumerate() {
                let gw: Vec<f64> = grads[2 * l].iter().map(|g| g * scale).collect();
                let gb: Vec<f64> = grads[2 * l + 1].iter().map(|g| g * scale).collect();
                adam.step(2 * l, layer.weights_mut(), &gw, cfg.learning_rate);
                adam.step(2 * l + 1, layer.bias_mut(), &gb, cfg.learning_rate);
            }
        }
    }
    Ok(model)
}

fn accumulate_gradients(model: &Model, x: &[f64], label: usize, grads: &mut [Vec<f64>]) -> Result<()> {
    let trace = model.trace(x)?;
    // d(cross-entropy)/d(logits) = softmax - onehot
    let mut delta = softmax(&trace.logits);
    delta[label] -= 1.0;
    for (l, layer) in model.layers().iter().enumerate().rev() {
        let act = layer.activation();
        let dz: Vec<f64> = delta
            .iter()
            .zip(&trace.pre[l])
            .map(|(d, &z)| d * act.derivative(z))
            .collect();
        let input = &trace.inputs[l];
        for (o, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads[2 * l + 1][o] += g;
            for (gw, a) in grads[2 * l][o * layer.in_dim()..(o + 1) * layer.in_dim()].iter_mut().zip(input) {
                *gw += g * a;
            }
        }
        if l > 0 {
            let mut prev = vec![0.0; layer.in_dim()];
            for (o, &g) in dz.iter().enumerate() {
                for (p, w) in prev.iter_mut().zip(layer.row(o)) {
                    *p += g * w;
                }
            }
            delta = prev;
        }
    }
    Ok(())
}

/// Fraction of labelled inputs classified correctly.
pub fn accuracy(model: &Model, dataset: &Dataset) -> Result<f64> {
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("accuracy needs labels".into()))?;
    let mut correct = 0usize;
    for (x, &y) in dataset.inputs.iter().zip(labels) {
        if model.predict_class(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_seeded_and_shaped() {
        let cfg = PatternConfig::default();
        let a = pattern_dataset(&cfg, 6, 3, 0).unwrap();
        assert_eq!(a, pattern_dataset(&cfg, 6, 3, 0).unwrap());
        assert_ne!(a.inputs, pattern_dataset(&cfg, 6, 3, 1).unwrap().inputs);
        assert_eq!(a.shape, Some(Shape::new(16, 16, 1).unwrap()));
        assert_eq!(a.labels, Some(vec![0, 1, 2, 0, 1, 2]));
        assert!(a.inputs.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn weight_gradients_match_finite_differences() {
        let cfg = PatternConfig {
            size: 4,
            ..PatternConfig::default()
        };
        let ds = pattern_dataset(&cfg, 3, 1, 0).unwrap();
        let tc = TrainConfig {
            hidden: vec![5],
            epochs: 0,
            ..TrainConfig::default()
        };
        let model = train_mlp(&ds, 3, &tc).unwrap();
        let (x, y) = (&ds.inputs[1], 1);
        let loss = |m: &Model| -softmax(&m.forward(x).unwrap())[y].ln();
        let mut grads: Vec<Vec<f64>> = model
            .layers()
            .iter()
            .flat_map(|l| [vec![0.0; l.weights().len()], vec![0.0; l.bias().len()]])
            .collect();
        accumulate_gradients(&model, x, y, &mut grads).unwrap();
        for l in 0..2 {
            for k in [0, 3] {
                let mut up = model.clone();
                up.layers_mut()[l].weights_mut()[k] += 1e-6;
                let mut down = model.clone();
                down.layers_mut()[l].weights_mut()[k] -= 1e-6;
                let fd = (loss(&up) - loss(&down)) / 2e-6;
                assert!((fd - grads[2 * l][k]).abs() < 1e-6, "layer {l} weight {k}: {fd} vs {}", grads[2 * l][k]);
            }
        }
    }
}
