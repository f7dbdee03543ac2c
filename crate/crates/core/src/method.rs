//! Attribution methods as interchangeable score providers.

use crate::baselines::{self, MaskShape};
use crate::data::Shape;
use crate::error::{Error, Result};
use crate::explain::{self, ExplainConfig};
use crate::model::Model;
use crate::partition::PartitionSpec;
use crate::scores::AttributionMap;
use crate::seed::{self, Stage};

/// Per-input context handed to a provider.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext {
    /// Position in the dataset.
    pub index: usize,
    /// Run seed; providers derive their own per-input streams from it.
    pub seed: u64,
    pub shape: Option<Shape>,
}

pub trait ScoreProvider: Sync {
    fn name(&self) -> &str;

    fn scores(&self, model: &Model, x: &[f64], ctx: &ScoreContext) -> Result<AttributionMap>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Maximally invariant box perturbation scores.
    Invariant {
        partition: PartitionSpec,
        config: ExplainConfig,
    },
    Gradient,
    SmoothGrad {
        num_noises: usize,
        sigma: f64,
    },
    IntegratedGradients {
        steps: usize,
        /// Constant baseline point `x0 = value * 1`.
        baseline_value: f64,
    },
    Occlusion {
        height: usize,
        width: usize,
        /// `None` occludes all channels at once.
        channels: Option<usize>,
        mask_value: f64,
    },
    Random,
    /// Precomputed maps, one per dataset input, in order.
    External { name: String, maps: Vec<AttributionMap> },
}

impl Method {
    pub fn tag(&self) -> &str {
        match self {
            Method::Invariant { .. } => "invariant",
            Method::Gradient => "gradient",
            Method::SmoothGrad { .. } => "smoothgrad",
            Method::IntegratedGradients { .. } => "intgrad",
            Method::Occlusion { .. } => "occlusion",
            Method::Random => "random",
            Method::External { name, .. } => name,
        }
    }

    /// Per-input seed keyed on the input's content.
    fn input_seed(seed: u64, stage: Stage, x: &[f64]) -> u64 {
        seed::derive(seed, stage, seed::content_key(x))
    }
}

impl ScoreProvider for Method {
    fn name(&self) -> &str {
        self.tag()
    }

    fn scores(&self, model: &Model, x: &[f64], ctx: &ScoreContext) -> Result<AttributionMap> {
        let shape = ctx.shape;
        match self {
            Method::Invariant { partition, config } => {
                let partition = partition.resolve(x.len(), shape)?;
                let mut config = config.clone();
                config.smoothing.seed = Self::input_seed(ctx.seed, Stage::Smoothing, x);
                let e = explain::explain(model, x, &partition, &config, shape)?;
                Ok(e.scores.to_attribution())
            }
            Method::Gradient => baselines::gradient_saliency(model, x, shape),
            Method::SmoothGrad { num_noises, sigma } => baselines::smoothgrad(
                model,
                x,
                *num_noises,
                *sigma,
                Self::input_seed(ctx.seed, Stage::SmoothGrad, x),
                shape,
            ),
            Method::IntegratedGradients { steps, baseline_value } => {
                let baseline = vec![*baseline_value; x.len()];
                Ok(baselines::integrated_gradients(model, x, &baseline, *steps, shape)?.map)
            }
            Method::Occlusion {
                height,
                width,
                channels,
                mask_value,
            } => {
                let grid = shape.unwrap_or(Shape::new(1, x.len(), 1)?);
                let mask = MaskShape {
                    height: (*height).min(grid.height),
                    width: (*width).min(grid.width),
                    channels: channels.unwrap_or(grid.channels).min(grid.channels),
                };
                baselines::occlusion(model, x, shape, mask, *mask_value)
            }
            Method::Random => Ok(baselines::random_scores(
                x.len(),
                ctx.seed,
                seed::content_key(x),
                shape,
            )),
            Method::External { maps, name } => {
                let map = maps.get(ctx.index).ok_or_else(|| {
                    Error::InvalidInput(format!("score file {name} has no entry for input {}", ctx.index))
                })?;
                map.validate(x.len())?;
                Ok(map.clone())
            }
        }
    }
}
