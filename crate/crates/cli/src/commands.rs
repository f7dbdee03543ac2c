//! Subcommand implementations. Each one validates its configuration and
//! loads its inputs before computing anything, and writes files only once
//! every result is in hand.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use invex_core::data::{Dataset, InputPoint, Shape};
use invex_core::eval::{compare_methods, curves_to_csv, EvalRun, MaskSpec, RunOptions};
use invex_core::explain::{ExplainConfig, SmoothingConfig, DEFAULT_PATCH};
use invex_core::lp::{self, LinearProgram, LpSolution, Status};
use invex_core::method::{Method, ScoreContext, ScoreProvider};
use invex_core::partition::PartitionSpec;
use invex_core::scores::{load_score_list, AttributionMap};
use invex_core::synthetic::{self, PatternConfig, TrainConfig};
use invex_core::Model;

use crate::args::{Cli, Command, EvaluateArgs, ExplainArgs, MakeToyArgs, MethodArgs, SolveLpArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] invex_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("linear program is {0:?}")]
    NotOptimal(Status),
}

impl CliError {
    /// 1 for usage and configuration problems, 2 for everything that goes
    /// wrong once the configuration is accepted.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(invex_core::Error::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

pub const METHOD_NAMES: [&str; 6] = ["invariant", "gradient", "smoothgrad", "intgrad", "occlusion", "random"];

impl MethodArgs {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return usage(format!("--delta must be positive, got {}", self.delta));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return usage(format!("--lambda must be >= 0, got {l}"));
            }
        }
        for (flag, v) in [("--smooth-sigma", self.smooth_sigma), ("--sg-sigma", self.sg_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return usage(format!("{flag} must be >= 0, got {v}"));
            }
        }
        for (flag, v) in [("--mask-value", self.mask_value), ("--ig-baseline", self.ig_baseline)] {
            if !v.is_finite() {
                return usage(format!("{flag} must be finite"));
            }
        }
        if self.sg_n == 0 {
            return usage("--sg-n must be at least 1");
        }
        if self.ig_steps == 0 {
            return usage("--ig-steps must be at least 1");
        }
        Ok(())
    }

    /// The grouping to use for inputs of this shape.
    pub fn patch_for(&self, shape: Option<Shape>) -> CliResult<PartitionSpec> {
        let spec = self.patch.unwrap_or(match shape {
            Some(_) => PartitionSpec::Patches {
                height: DEFAULT_PATCH,
                width: DEFAULT_PATCH,
            },
            None => PartitionSpec::Singletons,
        });
        if matches!(spec, PartitionSpec::Patches { .. }) && shape.is_none() {
            return usage(format!("--patch {spec} needs inputs with shape metadata; use --patch none"));
        }
        Ok(spec)
    }

    pub fn explain_config(&self) -> ExplainConfig {
        ExplainConfig {
            delta: self.delta,
            lambda: self.lambda,
            soft: !self.hard,
            smoothing: SmoothingConfig {
                num_noises: self.smooth_n,
                sigma: self.smooth_sigma,
                seed: self.seed,
            },
            output: self.output_layer,
            smoothing_form: self.smoothing_form,
        }
    }

    pub fn method(&self, name: &str, shape: Option<Shape>) -> CliResult<Method> {
        Ok(match name {
            "invariant" => Method::Invariant {
                partition: self.patch_for(shape)?,
                config: self.explain_config(),
            },
            "gradient" => Method::Gradient,
            "smoothgrad" => Method::SmoothGrad {
                num_noises: self.sg_n,
                sigma: self.sg_sigma,
            },
            "intgrad" => Method::IntegratedGradients {
                steps: self.ig_steps,
                baseline_value: self.ig_baseline,
            },
            "occlusion" => {
                let tile = match self.occlusion {
                    Some(spec) => spec,
                    None => self.patch_for(shape)?,
                };
                let (height, width) = match tile {
                    PartitionSpec::Patches { height, width } => (height, width),
                    PartitionSpec::Singletons => (1, 1),
                };
                Method::Occlusion {
                    height,
                    width,
                    channels: None,
                    mask_value: self.mask_value,
                }
            }
            "random" => Method::Random,
            other => {
                return usage(format!(
                    "unknown method {other:?}, expected one of {}",
                    METHOD_NAMES.join(", ")
                ))
            }
        })
    }
}

fn check_model_dim(model: &Model, dim: usize) -> CliResult<()> {
    if model.input_dim() != dim {
        return Err(invex_core::Error::Dimension {
            what: "input",
            expected: model.input_dim(),
            got: dim,
        }
        .into());
    }
    Ok(())
}

fn load_model(path: &Path) -> CliResult<Model> {
    Ok(Model::from_json(&fs::read_to_string(path).map_err(invex_core::Error::from)?)?)
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainOutcome {
    pub predicted_class: usize,
    pub map: AttributionMap,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
}

pub fn cmd_explain(args: &ExplainArgs) -> CliResult<ExplainOutcome> {
    args.opts.validate()?;
    let json_path = args.output.clone();
    let csv_path = json_path.with_extension("csv");
    if csv_path == json_path {
        return usage("--output must not end in .csv; the CSV is written next to the JSON");
    }
    let model = load_model(&args.model)?;
    let input = InputPoint::load(&args.input)?;
    check_model_dim(&model, input.dim())?;
    let method = args.opts.method(&args.method, input.shape)?;
    if let Method::Invariant { partition, .. } = &method {
        partition.resolve(input.dim(), input.shape)?;
    }

    let ctx = ScoreContext {
        index: 0,
        seed: args.opts.seed,
        shape: input.shape,
    };
    let map = method.scores(&model, &input, &ctx)?;
    let predicted_class = model.predict_class(&input)?;
    let json = map.to_json()?;
    let csv = map.to_csv()?;
    write_file(&json_path, json.as_bytes())?;
    write_file(&csv_path, csv.as_bytes())?;
    Ok(ExplainOutcome {
        predicted_class,
        map,
        json_path,
        csv_path,
    })
}

/// `START:STOP:STEP` (inclusive) or a comma-separated list.
pub fn parse_tau_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("bad --tau-grid {text:?}, expected START:STOP:STEP or a comma list"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0 && start <= stop && start.is_finite() && stop.is_finite()) {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| start + i as f64 * step).collect());
    }
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn parse_external(entry: &str, dataset: &Dataset) -> CliResult<Method> {
    let Some((name, path)) = entry.split_once('=') else {
        return usage(format!("bad --scores {entry:?}, expected NAME=PATH"));
    };
    if name.is_empty() || name.contains(',') {
        return usage(format!("bad score name {name:?}"));
    }
    let maps = load_score_list(Path::new(path))?;
    if maps.len() != dataset.len() {
        return usage(format!(
            "score file {path} has {} maps for {} inputs",
            maps.len(),
            dataset.len()
        ));
    }
    for map in &maps {
        map.validate(dataset.dim())?;
    }
    Ok(Method::External {
        name: name.to_owned(),
        maps,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<Vec<EvalRun>> {
    args.opts.validate()?;
    if args.jobs == 0 {
        return usage("--jobs must be at least 1");
    }
    let spec = MaskSpec::new(args.opts.mask_value, parse_tau_grid(&args.tau_grid)?)?;
    let names: Vec<&str> = args.method.iter().map(|m| m.trim()).filter(|m| !m.is_empty()).collect();
    if names.is_empty() && args.scores.is_empty() {
        return usage("no methods given");
    }
    let model = load_model(&args.model)?;
    let dataset = Dataset::load(&args.dataset)?;
    check_model_dim(&model, dataset.dim())?;
    let mut methods = names
        .iter()
        .map(|name| args.opts.method(name, dataset.shape))
        .collect::<CliResult<Vec<_>>>()?;
    for entry in &args.scores {
        methods.push(parse_external(entry, &dataset)?);
    }
    for m in &methods {
        if let Method::Invariant { partition, .. } = m {
            partition.resolve(dataset.dim(), dataset.shape)?;
        }
    }

    let providers: Vec<&dyn ScoreProvider> = methods.iter().map(|m| m as &dyn ScoreProvider).collect();
    let opts = RunOptions {
        seed: args.opts.seed,
        jobs: args.jobs,
    };
    let runs = compare_methods(&model, &dataset, &providers, &spec, &opts)?;
    let csv = curves_to_csv(runs.iter().map(|r| &r.curve));
    write_file(&args.output, csv.as_bytes())?;
    Ok(runs)
}

pub fn cmd_solve_lp(args: &SolveLpArgs) -> CliResult<LpSolution> {
    let text = fs::read_to_string(&args.path).map_err(invex_core::Error::from)?;
    let program: LinearProgram = serde_json::from_str(&text).map_err(invex_core::Error::from)?;
    program.validate()?;
    Ok(lp::solve(&program)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub files: Vec<PathBuf>,
}

pub fn cmd_make_toy(args: &MakeToyArgs) -> CliResult<ToyReport> {
    if args.train == 0 || args.test == 0 {
        return usage("--train and --test must be positive");
    }
    let cfg = PatternConfig::default();
    let train = synthetic::pattern_dataset(&cfg, args.train, args.seed, 0)?;
    let test = synthetic::pattern_dataset(&cfg, args.test, args.seed, 1)?;
    let model = synthetic::train_mlp(
        &train,
        synthetic::NUM_CLASSES,
        &TrainConfig {
            epochs: args.epochs,
            seed: args.seed,
            ..TrainConfig::default()
        },
    )?;
    let report_acc = (synthetic::accuracy(&model, &train)?, synthetic::accuracy(&model, &test)?);
    fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Write {
        path: args.out_dir.clone(),
        source,
    })?;
    let files = vec![
        (args.out_dir.join("model.json"), model.to_json()?),
        (args.out_dir.join("train.json"), train.to_json()?),
        (args.out_dir.join("test.json"), test.to_json()?),
    ];
    for (path, text) in &files {
        write_file(path, text.as_bytes())?;
    }
    Ok(ToyReport {
        train_accuracy: report_acc.0,
        test_accuracy: report_acc.1,
        files: files.into_iter().map(|(p, _)| p).collect(),
    })
}

/// Runs a parsed command, reporting progress on `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Core(e.into());
    match cli.command {
        Command::Explain(args) => {
            let o = cmd_explain(&args)?;
            writeln!(
                out,
                "class {}: wrote {} and {}",
                o.predicted_class,
                o.json_path.display(),
                o.csv_path.display()
            )
            .map_err(io)?;
        }
        Command::Evaluate(args) => {
            let runs = cmd_evaluate(&args)?;
            for run in &runs {
                let ratios: Vec<String> = run.curve.change_ratios.iter().map(|r| format!("{r:.3}")).collect();
                writeln!(out, "{}: {}", run.curve.method, ratios.join(" ")).map_err(io)?;
            }
            writeln!(out, "wrote {}", args.output.display()).map_err(io)?;
        }
        Command::SolveLp(args) => {
            let sol = cmd_solve_lp(&args)?;
            let json = serde_json::to_string_pretty(&sol).map_err(invex_core::Error::from)?;
            writeln!(out, "{json}").map_err(io)?;
            if sol.status != Status::Optimal {
                return Err(CliError::NotOptimal(sol.status));
            }
        }
        Command::MakeToy(args) => {
            let r = cmd_make_toy(&args)?;
            writeln!(
                out,
                "train accuracy {:.3}, test accuracy {:.3}",
                r.train_accuracy, r.test_accuracy
            )
            .map_err(io)?;
            for f in &r.files {
                writeln!(out, "wrote {}", f.display()).map_err(io)?;
            }
        }
    }
    Ok(())
}
