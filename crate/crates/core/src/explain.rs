//! Maximally invariant box perturbations.
//!
//! For a classifier `f` and an input `x` predicted as class `c`, we look for
//! the largest box `R(u, v) = [-u_1, v_1] x ... x [-u_d, v_d]` such that the
//! prediction stays `c` for every `r` in the box. The class comparison
//! `f_c(x + r) >= f_j(x + r)` is linearized around `x`:
//!
//! ```text
//! g_j >= h_j . r,   g_j = f_c(x) - f_j(x),   h_j = grad f_j(x) - grad f_c(x)
//! ```
//!
//! and the worst `r` in the box (`v_i` where `h_ji >= 0`, `-u_i` otherwise)
//! turns the infinitely many constraints into one linear row per `j != c`:
//!
//! ```text
//! maximize    sum_m (u_m + v_m) - lambda * w
//! subject to  0 <= u_m, v_m <= delta,  w >= 0
//!             sum_m (h+_jm v_m - h-_jm u_m) - w <= g_j     for all j != c
//! ```
//!
//! where features are tied in groups `m` (`h+_jm` / `h-_jm` are the sums of the
//! positive / negative entries of `h_j` over group `m`), and `w` is only
//! present in soft mode. Smoothing adds the same kind of rows linearized at
//! noisy anchors `x + n`.
//!
//! A feature's score is `2 delta - u_m - v_m`: large when its group admits
//! little perturbation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Shape;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Row, Status};
use crate::model::{argmax, Model, OutputLayer};
use crate::partition::FeaturePartition;
use crate::scores::AttributionMap;
use crate::seed::{self, Stage};

/// Default box half-width bound.
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_NUM_NOISES: usize = 9;
pub const DEFAULT_SIGMA: f64 = 0.05;
pub const DEFAULT_PATCH: usize = 8;

/// `2 M 1e-4` for `M` groups.
pub fn default_lambda(num_groups: usize) -> f64 {
    2.0 * num_groups as f64 * 1e-4
}

/// One linear row `g >= h . r` of the invariance condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedConstraint {
    pub g: f64,
    pub h: Vec<f64>,
    pub source_class: usize,
    /// Index of the smoothing noise the row was linearized at; `None` for `x`.
    pub noise_tag: Option<usize>,
}

impl LinearizedConstraint {
    /// `h . r` at the box corner that maximizes it.
    pub fn worst_case(&self, bounds: &PerturbationBox, partition: &FeaturePartition) -> f64 {
        self.h
            .iter()
            .zip(bounds.worst_corner(&self.h, partition))
            .map(|(h, r)| h * r)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingForm {
    /// `g^n + h^n . n`, the exact rearrangement of the expansion at `x + n`.
    #[default]
    Rederived,
    /// `g^n + h . n` with `h` the gradient difference at `x`.
    Literal,
}

impl FromStr for SmoothingForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rederived" => Ok(Self::Rederived),
            "literal" => Ok(Self::Literal),
            other => Err(Error::InvalidConfig(format!(
                "unknown smoothing form {other:?}, expected rederived|literal"
            ))),
        }
    }
}

impl fmt::Display for SmoothingForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rederived => "rederived",
            Self::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub num_noises: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl SmoothingConfig {
    pub fn none() -> Self {
        Self {
            num_noises: 0,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("smoothing sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// The noise vectors, reproducible from `seed`.
    pub fn noises(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = seed::stream(self.seed, Stage::Smoothing, 0);
        seed::gaussian_noises(&mut rng, self.num_noises, dim, self.sigma)
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            num_noises: DEFAULT_NUM_NOISES,
            sigma: DEFAULT_SIGMA,
            seed: 0,
        }
    }
}

/// Rows linearized at `anchor` for predicted class `c`: `(g, h)` per `j != c`.
fn linearize_at(
    model: &Model,
    anchor: &[f64],
    c: usize,
    output: OutputLayer,
) -> Result<Vec<(usize, f64, Vec<f64>)>> {
    let (y, grads) = model.outputs_and_gradients(anchor, output)?;
    Ok((0..y.len())
        .filter(|&j| j != c)
        .map(|j| {
            let h = grads[j].iter().zip(&grads[c]).map(|(a, b)| a - b).collect();
            (j, y[c] - y[j], h)
        })
        .collect())
}

/// Predicted class and one constraint per other class, linearized at `x`.
pub fn build_base_constraints(
    model: &Model,
    x: &[f64],
    output: OutputLayer,
) -> Result<(usize, Vec<LinearizedConstraint>)> {
    let k = model.num_classes();
    if k < 2 {
        return Err(Error::NothingToConstrain(k));
    }
    let c = argmax(&model.outputs(x, output)?);
    let rows = linearize_at(model, x, c, output)?
        .into_iter()
        .map(|(j, g, h)| LinearizedConstraint {
            g,
            h,
            source_class: j,
            noise_tag: None,
        })
        .collect();
    Ok((c, rows))
}

/// Rows linearized at `x + n` for each given noise `n`, keeping class `c`
/// from the unperturbed input.
pub fn build_constraints_for_noises(
    model: &Model,
    x: &[f64],
    c: usize,
    noises: &[Vec<f64>],
    output: OutputLayer,
    form: SmoothingForm,
) -> Result<Vec<LinearizedConstraint>> {
    if model.num_classes() < 2 {
        return Err(Error::NothingToConstrain(model.num_classes()));
    }
    let base = match form {
        SmoothingForm::Literal if !noises.is_empty() => Some(linearize_at(model, x, c, output)?),
        _ => None,
    };
    let mut rows = Vec::with_capacity(noises.len() * (model.num_classes() - 1));
    for (tag, n) in noises.iter().enumerate() {
        if n.len() != x.len() {
            return Err(Error::Dimension {
                what: "smoothing noise",
                expected: x.len(),
                got: n.len(),
            });
        }
        let anchor: Vec<f64> = x.iter().zip(n).map(|(a, b)| a + b).collect();
        for (idx, (j, g_n, h_n)) in linearize_at(model, &anchor, c, output)?.into_iter().enumerate() {
            let shift_h = match &base {
                Some(base) => &base[idx].2,
                None => &h_n,
            };
            let shift: f64 = shift_h.iter().zip(n).map(|(a, b)| a * b).sum();
            rows.push(LinearizedConstraint {
                g: g_n + shift,
                h: h_n,
                source_class: j,
                noise_tag: Some(tag),
            });
        }
    }
    Ok(rows)
}

/// Smoothing rows for the noises drawn from `cfg`.
pub fn build_smoothed_constraints(
    model: &Model,
    x: &[f64],
    cfg: &SmoothingConfig,
    output: OutputLayer,
    form: SmoothingForm,
) -> Result<Vec<LinearizedConstraint>> {
    cfg.validate()?;
    if model.num_classes() < 2 {
        return Err(Error::NothingToConstrain(model.num_classes()));
    }
    let c = argmax(&model.outputs(x, output)?);
    build_constraints_for_noises(model, x, c, &cfg.noises(x.len()), output, form)
}

/// Per-group `(h+_m, h-_m)`: sums of the nonnegative and negative entries.
pub fn aggregate_by_partition(
    constraint: &LinearizedConstraint,
    partition: &FeaturePartition,
) -> Result<Vec<(f64, f64)>> {
    partition.check_dim(constraint.h.len())?;
    let mut out = vec![(0.0, 0.0); partition.num_groups()];
    for (i, &h) in constraint.h.iter().enumerate() {
        let slot = &mut out[partition.group_of(i)];
        if h >= 0.0 {
            slot.0 += h;
        } else {
            slot.1 += h;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationProblem {
    pub constraints: Vec<LinearizedConstraint>,
    pub partition: FeaturePartition,
    pub delta: f64,
    pub lambda: f64,
    pub soft: bool,
}

impl PerturbationProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        for c in &self.constraints {
            self.partition.check_dim(c.h.len())?;
        }
        Ok(())
    }

    /// Variable layout `(u_1..u_M, v_1..v_M[, w])`.
    pub fn num_vars(&self) -> usize {
        2 * self.partition.num_groups() + usize::from(self.soft)
    }
}

pub fn assemble_lp(problem: &PerturbationProblem) -> Result<LinearProgram> {
    problem.validate()?;
    let groups = problem.partition.num_groups();
    let n = problem.num_vars();

    let mut objective = vec![1.0; n];
    let mut var_upper = vec![problem.delta; n];
    if problem.soft {
        objective[n - 1] = -problem.lambda;
        var_upper[n - 1] = f64::INFINITY;
    }

    let rows = problem
        .constraints
        .iter()
        .map(|c| {
            let mut coeffs = vec![0.0; n];
            for (m, (pos, neg)) in aggregate_by_partition(c, &problem.partition)?.into_iter().enumerate() {
                coeffs[m] = -neg;
                coeffs[groups + m] = pos;
            }
            if problem.soft {
                coeffs[n - 1] = -1.0;
            }
            Ok(Row::new(coeffs, c.g))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LinearProgram {
        objective,
        var_lower: vec![0.0; n],
        var_upper,
        rows,
    })
}

/// Solved box: feature `i` in group `m` may move within `[-u_m, v_m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBox {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: f64,
    pub objective: f64,
}

impl PerturbationBox {
    /// `sum_m (u_m + v_m)`.
    pub fn size(&self) -> f64 {
        self.u.iter().chain(&self.v).sum()
    }

    /// Per-feature lower and upper perturbation limits `(-u, v)`.
    pub fn feature_bounds(&self, partition: &FeaturePartition) -> (Vec<f64>, Vec<f64>) {
        let lo = partition.broadcast(&self.u).into_iter().map(|u| -u).collect();
        (lo, partition.broadcast(&self.v))
    }

    /// Box vertex maximizing `h . r`.
    pub fn worst_corner(&self, h: &[f64], partition: &FeaturePartition) -> Vec<f64> {
        h.iter()
            .enumerate()
            .map(|(i, &hi)| {
                let m = partition.group_of(i);
                if hi >= 0.0 {
                    self.v[m]
                } else {
                    -self.u[m]
                }
            })
            .collect()
    }
}

pub fn solve_problem(problem: &PerturbationProblem) -> Result<PerturbationBox> {
    let program = assemble_lp(problem)?;
    let solution = lp::solve(&program)?;
    match solution.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Err(Error::Infeasible {
                rows: problem.constraints.len(),
                negative_rows: problem.constraints.iter().filter(|c| c.g < 0.0).count(),
            })
        }
        Status::Unbounded => return Err(Error::Unbounded),
    }
    let m = problem.partition.num_groups();
    let z = solution.values;
    Ok(PerturbationBox {
        u: z[..m].to_vec(),
        v: z[m..2 * m].to_vec(),
        w: if problem.soft { z[2 * m] } else { 0.0 },
        objective: solution.objective_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap {
    pub per_group: Vec<f64>,
    pub per_feature: Vec<f64>,
    pub shape: Option<Shape>,
    pub delta: f64,
}

impl ScoreMap {
    /// `2 delta - u_m - v_m`, clamped into `[0, 2 delta]` against round-off.
    pub fn from_box(bounds: &PerturbationBox, partition: &FeaturePartition, delta: f64, shape: Option<Shape>) -> Self {
        let per_group: Vec<f64> = bounds
            .u
            .iter()
            .zip(&bounds.v)
            .map(|(u, v)| (2.0 * delta - u - v).clamp(0.0, 2.0 * delta))
            .collect();
        Self {
            per_feature: partition.broadcast(&per_group),
            per_group,
            shape,
            delta,
        }
    }

    pub fn to_attribution(&self) -> AttributionMap {
        AttributionMap {
            method: "invariant".into(),
            shape: self.shape,
            per_feature: self.per_feature.clone(),
            per_group: Some(self.per_group.clone()),
            delta: Some(self.delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    pub delta: f64,
    /// `None` picks [`default_lambda`] for the partition in use.
    pub lambda: Option<f64>,
    pub soft: bool,
    pub smoothing: SmoothingConfig,
    pub output: OutputLayer,
    pub smoothing_form: SmoothingForm,
}

impl ExplainConfig {
    /// Hard constraints, no smoothing.
    pub fn hard(delta: f64) -> Self {
        Self {
            delta,
            lambda: None,
            soft: false,
            smoothing: SmoothingConfig::none(),
            output: OutputLayer::Logits,
            smoothing_form: SmoothingForm::Rederived,
        }
    }

    pub fn lambda_for(&self, partition: &FeaturePartition) -> f64 {
        self.lambda.unwrap_or_else(|| default_lambda(partition.num_groups()))
    }
}

impl Default for ExplainConfig {
    /// Soft constraints, `delta = 0.1`, 9 noises with `sigma = 0.05`.
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            lambda: None,
            soft: true,
            smoothing: SmoothingConfig::default(),
            output: OutputLayer::Logits,
            smoothing_form: SmoothingForm::Rederived,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub predicted_class: usize,
    pub problem: PerturbationProblem,
    pub bounds: PerturbationBox,
    pub scores: ScoreMap,
}

/// Builds, solves and scores the perturbation LP for `x`.
pub fn explain(
    model: &Model,
    x: &[f64],
    partition: &FeaturePartition,
    cfg: &ExplainConfig,
    shape: Option<Shape>,
) -> Result<Explanation> {
    partition.check_dim(x.len())?;
    cfg.smoothing.validate()?;
    let (c, mut constraints) = build_base_constraints(model, x, cfg.output)?;
    let noises = cfg.smoothing.noises(x.len());
    constraints.extend(build_constraints_for_noises(
        model,
        x,
        c,
        &noises,
        cfg.output,
        cfg.smoothing_form,
    )?);
    let problem = PerturbationProblem {
        constraints,
        partition: partition.clone(),
        delta: cfg.delta,
        lambda: cfg.lambda_for(partition),
        soft: cfg.soft,
    };
    let bounds = solve_problem(&problem)?;
    let scores = ScoreMap::from_box(&bounds, partition, cfg.delta, shape);
    Ok(Explanation {
        predicted_class: c,
        problem,
        bounds,
        scores,
    })
}
