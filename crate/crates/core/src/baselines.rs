//! Reference attribution methods: gradient saliency, SmoothGrad,
//! integrated gradients, occlusion, and seeded random scores.
//!
//! All of them explain the predicted class `c = argmax f(x)` on logits.

use rand::Rng;

use crate::data::Shape;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scores::AttributionMap;
use crate::seed::{self, Stage};

/// `|grad f_c(x)|`.
pub fn gradient_saliency(model: &Model, x: &[f64], shape: Option<Shape>) -> Result<AttributionMap> {
    let c = model.predict_class(x)?;
    let g = model.gradient(x, c)?;
    Ok(AttributionMap::new("gradient", g.into_iter().map(f64::abs).collect(), shape))
}

/// Mean of `|grad f_c(x + n)|` over `num_noises` Gaussian draws.
pub fn smoothgrad(
    model: &Model,
    x: &[f64],
    num_noises: usize,
    sigma: f64,
    seed: u64,
    shape: Option<Shape>,
) -> Result<AttributionMap> {
    if num_noises == 0 {
        return Err(Error::InvalidConfig("smoothgrad needs at least one noise sample".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("smoothgrad sigma must be >= 0, got {sigma}")));
    }
    let c = model.predict_class(x)?;
    let mut rng = seed::stream(seed, Stage::SmoothGrad, 0);
    let noises = seed::gaussian_noises(&mut rng, num_noises, x.len(), sigma);
    let mut acc = vec![0.0; x.len()];
    for n in &noises {
        let xn: Vec<f64> = x.iter().zip(n).map(|(a, b)| a + b).collect();
        for (a, g) in acc.iter_mut().zip(model.gradient(&xn, c)?) {
            *a += g.abs();
        }
    }
    let scale = num_noises as f64;
    Ok(AttributionMap::new(
        "smoothgrad",
        acc.into_iter().map(|a| a / scale).collect(),
        shape,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedGradients {
    pub map: AttributionMap,
    /// `|sum(attr) - (f_c(x) - f_c(baseline))|`.
    pub completeness_error: f64,
}

/// `(x - x0) * mean_k grad f_c(x0 + a_k (x - x0))` on the midpoint grid
/// `a_k = (k + 1/2) / steps`.
pub fn integrated_gradients(
    model: &Model,
    x: &[f64],
    baseline: &[f64],
    steps: usize,
    shape: Option<Shape>,
) -> Result<IntegratedGradients> {
    if steps == 0 {
        return Err(Error::InvalidConfig("integrated gradients needs steps >= 1".into()));
    }
    if baseline.len() != x.len() {
        return Err(Error::Dimension {
            what: "integrated gradients baseline",
            expected: x.len(),
            got: baseline.len(),
        });
    }
    let c = model.predict_class(x)?;
    let diff: Vec<f64> = x.iter().zip(baseline).map(|(a, b)| a - b).collect();
    let mut acc = vec![0.0; x.len()];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        let point: Vec<f64> = baseline.iter().zip(&diff).map(|(b, d)| b + alpha * d).collect();
        for (a, g) in acc.iter_mut().zip(model.gradient(&point, c)?) {
            *a += g;
        }
    }
    let attr: Vec<f64> = acc
        .iter()
        .zip(&diff)
        .map(|(a, d)| d * a / steps as f64)
        .collect();
    let gap = model.forward(x)?[c] - model.forward(baseline)?[c];
    let completeness_error = (attr.iter().sum::<f64>() - gap).abs();
    Ok(IntegratedGradients {
        map: AttributionMap::new("intgrad", attr, shape),
        completeness_error,
    })
}

/// Occluding tile extent `(height, width, channels)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// `f_c(x) - f_c(x with the tile set to mask_value)`, copied to every
/// feature of the tile. Tiles do not overlap; edge tiles are truncated.
/// Without shape metadata the input is treated as a `[1, d, 1]` strip.
pub fn occlusion(
    model: &Model,
    x: &[f64],
    shape: Option<Shape>,
    mask: MaskShape,
    mask_value: f64,
) -> Result<AttributionMap> {
    let grid = match shape {
        Some(s) => s,
        None => Shape::new(1, x.len(), 1)?,
    };
    grid.check_len(x.len())?;
    if mask.height == 0 || mask.width == 0 || mask.channels == 0 {
        return Err(Error::InvalidConfig("occlusion mask extent must be positive".into()));
    }
    if mask.height > grid.height || mask.width > grid.width || mask.channels > grid.channels {
        return Err(Error::InvalidConfig(format!(
            "occlusion mask {}x{}x{} exceeds input shape {}x{}x{}",
            mask.height, mask.width, mask.channels, grid.height, grid.width, grid.channels
        )));
    }
    let c = model.predict_class(x)?;
    let reference = model.forward(x)?[c];
    let mut scores = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for r0 in (0..grid.height).step_by(mask.height) {
        for c0 in (0..grid.width).step_by(mask.width) {
            for ch0 in (0..grid.channels).step_by(mask.channels) {
                let tile: Vec<usize> = (r0..(r0 + mask.height).min(grid.height))
                    .flat_map(|r| {
                        (c0..(c0 + mask.width).min(grid.width)).flat_map(move |col| {
                            (ch0..(ch0 + mask.channels).min(grid.channels)).map(move |ch| grid.index(r, col, ch))
                        })
                    })
                    .collect();
                for &i in &tile {
                    probe[i] = mask_value;
                }
                let drop = reference - model.forward(&probe)?[c];
                for &i in &tile {
                    probe[i] = x[i];
                    scores[i] = drop;
                }
            }
        }
    }
    Ok(AttributionMap::new("occlusion", scores, shape))
}

/// Uniform `[0, 1)` scores from the stream `(seed, index)`.
pub fn random_scores(dim: usize, seed: u64, index: u64, shape: Option<Shape>) -> AttributionMap {
    let mut rng = seed::stream(seed, Stage::RandomScores, index);
    AttributionMap::new("random", (0..dim).map(|_| rng.random::<f64>()).collect(), shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, DenseLayer};

    fn linear() -> Model {
        Model::linear(
            vec![vec![0.5, -2.0, 1.0, 0.0], vec![-1.0, 0.25, 3.0, -0.5]],
            vec![0.0, 0.1],
        )
        .unwrap()
    }

    fn constant() -> Model {
        Model::linear(vec![vec![0.0; 4], vec![0.0; 4]], vec![1.0, 0.0]).unwrap()
    }

    fn mlp() -> Model {
        let h = DenseLayer::from_rows(
            vec![vec![0.4, -0.3, 0.8, 0.1], vec![-0.6, 0.5, 0.2, 0.7], vec![0.3, 0.3, -0.4, 0.9]],
            vec![0.05, -0.1, 0.2],
            Activation::Tanh,
        )
        .unwrap();
        let o = DenseLayer::from_rows(
            vec![vec![1.0, -0.5, 0.7], vec![-0.8, 1.2, 0.4]],
            vec![0.0, 0.0],
            Activation::Identity,
        )
        .unwrap();
        Model::new(4, vec![h, o]).unwrap()
    }

    const X: [f64; 4] = [0.2, -0.4, 0.9, 0.5];

    #[test]
    fn gradient_of_linear_and_constant() {
        let m = linear();
        let c = m.predict_class(&X).unwrap();
        let row = m.layers()[0].row(c);
        let map = gradient_saliency(&m, &X, None).unwrap();
        assert_eq!(map.per_feature, row.iter().map(|w| w.abs()).collect::<Vec<_>>());
        assert_eq!(gradient_saliency(&constant(), &X, None).unwrap().per_feature, vec![0.0; 4]);
    }

    #[test]
    fn gradient_of_mlp_matches_finite_differences() {
        let m = mlp();
        let c = m.predict_class(&X).unwrap();
        let fd = m.finite_difference_gradient(&X, c, 1e-5).unwrap();
        let map = gradient_saliency(&m, &X, None).unwrap();
        for (a, b) in map.per_feature.iter().zip(&fd) {
            assert!((a - b.abs()).abs() < 1e-5);
        }
    }

    #[test]
    fn smoothgrad_degenerate_cases() {
        let m = mlp();
        let plain = gradient_saliency(&m, &X, None).unwrap().per_feature;
        assert_eq!(smoothgrad(&m, &X, 1, 0.0, 3, None).unwrap().per_feature, plain);
        let lin = linear();
        let sg = smoothgrad(&lin, &X, 5, 0.3, 3, None).unwrap();
        assert_eq!(sg.per_feature, gradient_saliency(&lin, &X, None).unwrap().per_feature);
        assert!(smoothgrad(&m, &X, 0, 0.1, 3, None).is_err());
    }

    #[test]
    fn smoothgrad_matches_direct_loop() {
        let m = mlp();
        let (n, sigma, seed_value) = (6, 0.2, 99);
        let sg = smoothgrad(&m, &X, n, sigma, seed_value, None).unwrap();
        // independent recomputation over the same seeded noises
        let mut rng = seed::stream(seed_value, Stage::SmoothGrad, 0);
        let noises = seed::gaussian_noises(&mut rng, n, 4, sigma);
        let c = m.predict_class(&X).unwrap();
        for i in 0..4 {
            let mut total = 0.0;
            for noise in &noises {
                let mut p = X;
                for (a, b) in p.iter_mut().zip(noise) {
                    *a += b;
                }
                total += m.finite_difference_gradient(&p, c, 1e-6).unwrap()[i].abs();
            }
            assert!((sg.per_feature[i] - total / n as f64).abs() < 1e-6);
        }
        assert_eq!(sg, smoothgrad(&m, &X, n, sigma, seed_value, None).unwrap());
    }

    #[test]
    fn integrated_gradients_cases() {
        let lin = linear();
        let base = [0.1, 0.0, -0.2, 0.3];
        let c = lin.predict_class(&X).unwrap();
        let row = lin.layers()[0].row(c);
        for steps in [1, 7] {
            let ig = integrated_gradients(&lin, &X, &base, steps, None).unwrap();
            for i in 0..4 {
                assert!((ig.map.per_feature[i] - (X[i] - base[i]) * row[i]).abs() < 1e-12);
            }
        }
        let same = integrated_gradients(&mlp(), &X, &X, 16, None).unwrap();
        assert!(same.map.per_feature.iter().all(|&a| a == 0.0));

        let ig = integrated_gradients(&mlp(), &X, &[0.0; 4], 512, None).unwrap();
        assert!(ig.completeness_error < 1e-3, "{}", ig.completeness_error);
        assert!(integrated_gradients(&mlp(), &X, &[0.0; 3], 4, None).is_err());
        assert!(integrated_gradients(&mlp(), &X, &[0.0; 4], 0, None).is_err());
    }

    #[test]
    fn occlusion_cases() {
        let single = MaskShape {
            height: 1,
            width: 1,
            channels: 1,
        };
        assert_eq!(occlusion(&constant(), &X, None, single, 0.5).unwrap().per_feature, vec![0.0; 4]);

        let lin = linear();
        let c = lin.predict_class(&X).unwrap();
        let row = lin.layers()[0].row(c);
        let map = occlusion(&lin, &X, None, single, 0.5).unwrap();
        for i in 0..4 {
            assert!((map.per_feature[i] - row[i] * (X[i] - 0.5)).abs() < 1e-12);
        }

        let shape = Shape::new(2, 2, 1).unwrap();
        let whole = MaskShape {
            height: 2,
            width: 2,
            channels: 1,
        };
        let map = occlusion(&lin, &X, Some(shape), whole, 0.5).unwrap();
        let expected = lin.forward(&X).unwrap()[c] - lin.forward(&[0.5; 4]).unwrap()[c];
        assert!(map.per_feature.iter().all(|&s| (s - expected).abs() < 1e-12));

        let too_big = MaskShape {
            height: 3,
            width: 1,
            channels: 1,
        };
        assert!(occlusion(&lin, &X, Some(shape), too_big, 0.5).is_err());
    }

    #[test]
    fn random_scores_are_seeded() {
        let a = random_scores(10, 1, 0, None);
        assert_eq!(a, random_scores(10, 1, 0, None));
        assert_ne!(a, random_scores(10, 1, 1, None));
        assert!(a.per_feature.iter().all(|&s| (0.0..1.0).contains(&s)));
    }
}
