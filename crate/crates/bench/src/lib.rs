//! Seeded fixtures shared by the benchmarks.

use invex_core::data::Shape;
use invex_core::lp::{LinearProgram, Row};
use invex_core::model::{Activation, DenseLayer, Model};
use invex_core::seed::{self, Stage};

/// Relu MLP with Gaussian weights scaled by `1/sqrt(fan_in)`.
pub fn mlp(input_dim: usize, hidden: &[usize], classes: usize, seed: u64) -> Model {
    let mut rng = seed::stream(seed, Stage::Training, 0);
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(classes);
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let sigma = 1.0 / (w[0] as f64).sqrt();
            let weights = seed::gaussian_noises(&mut rng, 1, w[0] * w[1], sigma).remove(0);
            let bias = seed::gaussian_noises(&mut rng, 1, w[1], 0.1).remove(0);
            let act = if l + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            DenseLayer::new(w[0], w[1], weights, bias, act).expect("consistent sizes")
        })
        .collect();
    Model::new(input_dim, layers).expect("consistent sizes")
}

/// Pixel values around 0.5 for an image of `shape`.
pub fn image(shape: Shape, seed: u64) -> Vec<f64> {
    let mut rng = seed::stream(seed, Stage::SyntheticData, 0);
    seed::gaussian_noises(&mut rng, 1, shape.len(), 0.2)
        .remove(0)
        .into_iter()
        .map(|v| (0.5 + v).clamp(0.0, 1.0))
        .collect()
}

/// Dense LP with `rows` constraints over `vars` variables in `[0, 1]`,
/// feasible at the origin.
pub fn dense_lp(vars: usize, rows: usize, seed: u64) -> LinearProgram {
    let mut rng = seed::stream(seed, Stage::SyntheticData, 1);
    let coeffs = seed::gaussian_noises(&mut rng, rows, vars, 1.0);
    let rhs = seed::gaussian_noises(&mut rng, 1, rows, 1.0).remove(0);
    LinearProgram {
        objective: vec![1.0; vars],
        var_lower: vec![0.0; vars],
        var_upper: vec![1.0; vars],
        rows: coeffs
            .into_iter()
            .zip(rhs)
            .map(|(a, b)| Row::new(a, b.abs() + 0.1))
            .collect(),
    }
}
