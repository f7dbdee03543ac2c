//! Quantile-masking benchmark.
//!
//! For each input and threshold `tau`, the features scoring strictly below
//! the input's own `tau`-th percentile score are replaced by a mask value,
//! and we record whether the predicted class changes. Lower change ratios
//! mean the high-scoring features carry the decision.
//!
//! Percentiles use linear interpolation between order statistics (position
//! `tau / 100 * (d - 1)` in the sorted scores). Features tied with the
//! threshold are kept.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::method::{ScoreContext, ScoreProvider};
use crate::model::Model;
use crate::scores::AttributionMap;

pub const DEFAULT_MASK_VALUE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub mask_value: f64,
    pub taus: Vec<f64>,
}

impl MaskSpec {
    pub fn new(mask_value: f64, taus: Vec<f64>) -> Result<Self> {
        let spec = Self { mask_value, taus };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mask_value.is_finite() {
            return Err(Error::InvalidConfig("mask value must be finite".into()));
        }
        if self.taus.is_empty() {
            return Err(Error::InvalidConfig("tau grid is empty".into()));
        }
        if self.taus.iter().any(|t| !(0.0..=100.0).contains(t)) {
            return Err(Error::InvalidConfig("tau values must lie in [0, 100]".into()));
        }
        if self.taus.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("tau grid must be sorted".into()));
        }
        Ok(())
    }

    /// `0, step, 2 step, ..., 100`.
    pub fn uniform_grid(step: f64) -> Vec<f64> {
        let n = (100.0 / step).round() as usize;
        (0..=n).map(|i| (i as f64 * step).min(100.0)).collect()
    }
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            mask_value: DEFAULT_MASK_VALUE,
            taus: Self::uniform_grid(10.0),
        }
    }
}

/// The `tau`-th percentile with linear interpolation between order statistics.
pub fn percentile(scores: &[f64], tau: f64) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, tau)
}

fn percentile_sorted(sorted: &[f64], tau: f64) -> f64 {
    let pos = tau / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// `x` with every feature scoring strictly below the `tau` percentile set to
/// `mask_value`.
pub fn mask_input(x: &[f64], scores: &AttributionMap, tau: f64, mask_value: f64) -> Result<Vec<f64>> {
    scores.validate(x.len())?;
    if !(0.0..=100.0).contains(&tau) {
        return Err(Error::InvalidConfig(format!("tau {tau} outside [0, 100]")));
    }
    let threshold = percentile(&scores.per_feature, tau);
    Ok(x.iter()
        .zip(&scores.per_feature)
        .map(|(&xi, &s)| if s < threshold { mask_value } else { xi })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    pub method: String,
    pub taus: Vec<f64>,
    pub change_ratios: Vec<f64>,
}

/// Predictions for one input: unmasked, then one per tau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub index: usize,
    pub original_class: usize,
    pub masked_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub curve: EvalCurve,
    pub images: Vec<ImageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    /// Worker threads; 1 runs inline.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: 0, jobs: 1 }
    }
}

fn evaluate_one(
    model: &Model,
    dataset: &Dataset,
    provider: &dyn ScoreProvider,
    spec: &MaskSpec,
    opts: &RunOptions,
    index: usize,
) -> Result<ImageRecord> {
    let x = &dataset.inputs[index];
    let ctx = ScoreContext {
        index,
        seed: opts.seed,
        shape: dataset.shape,
    };
    let original_class = model.predict_class(x)?;
    let scores = provider.scores(model, x, &ctx)?;
    scores.validate(x.len())?;
    let masked_classes = spec
        .taus
        .iter()
        .map(|&tau| model.predict_class(&mask_input(x, &scores, tau, spec.mask_value)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageRecord {
        index,
        original_class,
        masked_classes,
    })
}

/// Runs `f` over `0..n`, in parallel when `jobs > 1`, returning results in
/// index order. The first failure by index is reported.
fn run_indexed<T, F>(n: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let wrap = |i: usize| {
        f(i).map_err(|e| Error::AtInput {
            index: i,
            source: Box::new(e),
        })
    };
    if jobs <= 1 {
        return (0..n).map(wrap).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(wrap).collect());
    results.into_iter().collect()
}

/// Fraction of inputs whose predicted class changes, per tau.
pub fn change_ratio_curve(
    model: &Model,
    dataset: &Dataset,
    provider: &dyn ScoreProvider,
    spec: &MaskSpec,
    opts: &RunOptions,
) -> Result<EvalRun> {
    dataset.validate()?;
    spec.validate()?;
    if dataset.dim() != model.input_dim() {
        return Err(Error::Dimension {
            what: "dataset inputs",
            expected: model.input_dim(),
            got: dataset.dim(),
        });
    }
    let images = run_indexed(dataset.len(), opts.jobs, |i| {
        evaluate_one(model, dataset, provider, spec, opts, i)
    })?;
    let n = images.len() as f64;
    let change_ratios = (0..spec.taus.len())
        .map(|t| {
            let changed = images
                .iter()
                .filter(|r| r.masked_classes[t] != r.original_class)
                .count();
            changed as f64 / n
        })
        .collect();
    Ok(EvalRun {
        curve: EvalCurve {
            method: provider.name().to_owned(),
            taus: spec.taus.clone(),
            change_ratios,
        },
        images,
    })
}

/// One run per provider over the same dataset and masks.
pub fn compare_methods(
    model: &Model,
    dataset: &Dataset,
    providers: &[&dyn ScoreProvider],
    spec: &MaskSpec,
    opts: &RunOptions,
) -> Result<Vec<EvalRun>> {
    if providers.is_empty() {
        return Err(Error::InvalidConfig("no methods to compare".into()));
    }
    providers
        .iter()
        .map(|p| change_ratio_curve(model, dataset, *p, spec, opts))
        .collect()
}

/// Long-format `method,tau,change_ratio` CSV.
pub fn curves_to_csv<'a>(curves: impl IntoIterator<Item = &'a EvalCurve>) -> String {
    let mut out = String::from("method,tau,change_ratio\n");
    for curve in curves {
        for (tau, ratio) in curve.taus.iter().zip(&curve.change_ratios) {
            writeln!(out, "{},{},{}", curve.method, tau, ratio).expect("write to string");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::Method;

    fn map(scores: &[f64]) -> AttributionMap {
        AttributionMap::new("test", scores.to_vec(), None)
    }

    #[test]
    fn percentile_interpolates() {
        let s = [0.4, 0.1, 0.3, 0.2];
        assert!((percentile(&s, 50.0) - 0.25).abs() < 1e-15);
        assert_eq!(percentile(&s, 0.0), 0.1);
        assert_eq!(percentile(&s, 100.0), 0.4);
        assert!((percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 10.0) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn masking_rules() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let scores = map(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(mask_input(&x, &scores, 0.0, 0.5).unwrap(), x.to_vec());
        assert_eq!(mask_input(&x, &scores, 50.0, 0.5).unwrap(), vec![0.5, 0.5, 3.0, 4.0]);
        assert_eq!(mask_input(&x, &scores, 100.0, 0.5).unwrap(), vec![0.5, 0.5, 0.5, 4.0]);
        // ties at the threshold survive
        let flat = map(&[0.2; 4]);
        assert_eq!(mask_input(&x, &flat, 70.0, 0.5).unwrap(), x.to_vec());
        assert!(mask_input(&x, &map(&[0.1]), 10.0, 0.5).is_err());
        assert!(mask_input(&x, &scores, 101.0, 0.5).is_err());
    }

    #[test]
    fn masking_is_idempotent() {
        let x = [0.9, 0.1, 0.4, 0.7, 0.3];
        let scores = map(&[3.0, 1.0, 2.0, 5.0, 4.0]);
        let once = mask_input(&x, &scores, 40.0, 0.5).unwrap();
        assert_eq!(mask_input(&once, &scores, 40.0, 0.5).unwrap(), once);
    }

    #[test]
    fn spec_validation() {
        assert!(MaskSpec::new(0.5, vec![10.0, 0.0]).is_err());
        assert!(MaskSpec::new(0.5, vec![0.0, 120.0]).is_err());
        assert!(MaskSpec::new(0.5, vec![]).is_err());
        assert_eq!(MaskSpec::uniform_grid(25.0), vec![0.0, 25.0, 50.0, 75.0, 100.0]);
    }

    #[test]
    fn constant_model_never_changes() {
        let model = Model::linear(vec![vec![0.0; 3], vec![0.0; 3]], vec![1.0, 0.0]).unwrap();
        let ds = Dataset::new(vec![vec![0.1, 0.2, 0.3], vec![0.9, 0.8, 0.7]], None, None).unwrap();
        let spec = MaskSpec::default();
        let run = change_ratio_curve(&model, &ds, &Method::Random, &spec, &RunOptions::default()).unwrap();
        assert!(run.curve.change_ratios.iter().all(|&r| r == 0.0));
        assert_eq!(run.images.len(), 2);
    }

    #[test]
    fn empty_dataset_and_no_methods() {
        let model = Model::linear(vec![vec![1.0], vec![0.0]], vec![0.0, 0.0]).unwrap();
        let empty = Dataset {
            shape: None,
            inputs: vec![],
            labels: None,
        };
        let spec = MaskSpec::default();
        assert!(matches!(
            change_ratio_curve(&model, &empty, &Method::Gradient, &spec, &RunOptions::default()),
            Err(Error::EmptyDataset)
        ));
        let ds = Dataset::new(vec![vec![1.0]], None, None).unwrap();
        assert!(compare_methods(&model, &ds, &[], &spec, &RunOptions::default()).is_err());
    }

    #[test]
    fn csv_layout() {
        let curve = EvalCurve {
            method: "gradient".into(),
            taus: vec![0.0, 50.0],
            change_ratios: vec![0.0, 0.25],
        };
        assert_eq!(curves_to_csv([&curve]), "method,tau,change_ratio\ngradient,0,0\ngradient,50,0.25\n");
    }
}
