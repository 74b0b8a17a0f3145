//! Command-line workflows: fit, predict, classify, evaluate, posterior and
//! simulate.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{LoadedConfig, RunConfig};
use crate::error::{Error, Result};
use crate::estimation::{fit_logistic, fit_mle, logistic_predict, FitResult, LogisticFit};
use crate::evaluation::{evaluate, EvaluationReport};
use crate::inference::{classify_top_responders, precision_recall_points, PredictionRecord};
use crate::io::{self, Metadata};
use crate::model::{ModelParams, PopulationParams, ResponseModel, UserRecord};
use crate::simulator::{generate_population, simulate_responses};

#[derive(Debug, Parser)]
#[command(name = "feedresponse", version, about = "Fit and apply the feed response model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config; default ".").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed (overrides `seed` in the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Stochastic,
    Logistic,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Stochastic => "stochastic",
            ModelKind::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit model parameters (and the logistic baseline) to a users file.
    Fit {
        #[arg(long)]
        users: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Predict response counts for every user.
    Predict {
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_enum, default_value = "stochastic")]
        model: ModelKind,
        /// Also write the full response distribution of every user.
        #[arg(long)]
        distributions: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Label predicted and observed top responders.
    Classify {
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_enum, default_value = "stochastic")]
        model: ModelKind,
        #[arg(long)]
        fraction: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare one or two prediction files against the observations.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        fraction: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Prior and posterior topic interest of one user on a grid.
    Posterior {
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        user_id: String,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic users file and its hidden truth.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
}

/// Contents of `params.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub metadata: BTreeMap<String, String>,
    pub population: PopulationParams,
    pub model: ModelParams,
    #[serde(default)]
    pub fit: Option<FitResult>,
    #[serde(default)]
    pub logistic: Option<LogisticFit>,
    #[serde(default)]
    pub logistic_error: Option<String>,
}

pub fn read_params(path: &Path) -> Result<ParamsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let params: ParamsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    params.model.validate().map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(params)
}

struct Context {
    config: RunConfig,
    sha256: String,
    seed: u64,
    out_dir: PathBuf,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let LoadedConfig { config, sha256 } = RunConfig::load(common.config.as_deref())?;
        let seed = common.seed.or(config.seed).unwrap_or(1);
        let out_dir = common
            .out_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::File {
            path: out_dir.clone(),
            message: e.to_string(),
        })?;
        Ok(Self {
            config,
            sha256,
            seed,
            out_dir,
        })
    }

    fn metadata(&self) -> Metadata {
        Metadata::new(&self.sha256, self.seed)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn require_population(&self) -> Result<PopulationParams> {
        self.config
            .population
            .clone()
            .ok_or_else(|| Error::Config("a [population] section is required for this command".into()))
    }

    /// Population from the config, falling back to the params file.
    fn population_or(&self, params: &ParamsFile) -> PopulationParams {
        self.config.population.clone().unwrap_or_else(|| params.population.clone())
    }
}

fn population_metadata(meta: Metadata, pop: &PopulationParams) -> Metadata {
    meta.with("advocate_id", &pop.advocate_id)
        .with("advocate_post_count", pop.advocate_post_count)
        .with("typical_friend_rate", pop.typical_friend_rate)
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 2 for input or configuration errors, 1 otherwise.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { users, common } => cmd_fit(&users, &common),
        Command::Predict {
            users,
            params,
            model,
            distributions,
            common,
        } => cmd_predict(&users, &params, model, distributions, &common),
        Command::Classify {
            users,
            params,
            model,
            fraction,
            common,
        } => cmd_classify(&users, &params, model, fraction, &common),
        Command::Evaluate {
            predictions,
            compare,
            fraction,
            common,
        } => cmd_evaluate(&predictions, compare.as_deref(), fraction, &common),
        Command::Posterior {
            users,
            params,
            user_id,
            common,
        } => cmd_posterior(&users, &params, &user_id, &common),
        Command::Simulate { common } => cmd_simulate(&common),
    }
}

pub fn cmd_fit(users_path: &Path, common: &Common) -> Result<()> {
    let ctx = Context::new(common)?;
    let pop = ctx.require_population()?;
    let users = io::read_users(users_path, Some(&pop))?;
    let fit = fit_mle(&users, &pop, &ctx.config.fit)?;
    let (logistic, logistic_error) = match fit_logistic(&users, &pop) {
        Ok(l) => (Some(l), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let meta = population_metadata(ctx.metadata(), &pop)
        .with("users_file", users_path.display())
        .with("interval_method", &fit.interval_method);
    let params = ParamsFile {
        metadata: meta.to_map(),
        population: pop.clone(),
        model: fit.params,
        fit: Some(fit.clone()),
        logistic,
        logistic_error,
    };
    io::write_json(&ctx.path("params.json"), &params)?;

    let model = ResponseModel::new(&pop, &fit.params)?;
    let law = model.surfing_law();
    io::write_table(
        &ctx.path("surfing.csv"),
        &meta,
        &["newer_posts", "p_view"],
        (0..=law.support_max()).map(|l| vec![l.to_string(), law.p_view(l).to_string()]),
    )?;
    io::write_table(
        &ctx.path("visibility.csv"),
        &meta,
        &["user_id", "rho", "p_visible"],
        users.iter().map(|u| {
            let r = model.rates(u);
            vec![u.user_id.clone(), r.rho.to_string(), r.p_visible.to_string()]
        }),
    )?;

    println!(
        "fitted views_per_post = {}, p_act = {} (log-likelihood {}, {} users, {} excluded)",
        fit.params.views_per_post,
        fit.params.p_act,
        fit.log_likelihood,
        fit.users_used,
        fit.excluded_users.len()
    );
    for ci in &fit.confidence_intervals {
        println!("  {}: {} [{}, {}]", ci.name, ci.estimate, ci.low, ci.high);
    }
    if !fit.converged {
        return Err(Error::NotConverged(format!(
            "gradient norm {} after {} evaluations; best point written to {}",
            fit.gradient_norm,
            fit.evaluations,
            ctx.path("params.json").display()
        )));
    }
    Ok(())
}

fn predictions_for(
    users: &[UserRecord],
    params: &ParamsFile,
    pop: &PopulationParams,
    kind: ModelKind,
) -> Result<Vec<PredictionRecord>> {
    match kind {
        ModelKind::Stochastic => ResponseModel::new(pop, &params.model)?.predict_all(users),
        ModelKind::Logistic => {
            let fit = params.logistic.as_ref().ok_or_else(|| {
                Error::invalid(format!(
                    "params file has no logistic fit{}",
                    params
                        .logistic_error
                        .as_ref()
                        .map(|e| format!(" ({e})"))
                        .unwrap_or_default()
                ))
            })?;
            let n = pop.advocate_post_count as f64;
            Ok(users
                .iter()
                .map(|u| {
                    let pred = logistic_predict(u, fit, pop);
                    let p = pred.expected_responses / n;
                    PredictionRecord::new(
                        u.user_id.clone(),
                        pred.expected_responses,
                        (n * p * (1.0 - p)).max(0.0).sqrt(),
                        u.responses,
                    )
                })
                .collect())
        }
    }
}

pub fn cmd_predict(
    users_path: &Path,
    params_path: &Path,
    kind: ModelKind,
    distributions: bool,
    common: &Common,
) -> Result<()> {
    let ctx = Context::new(common)?;
    let params = read_params(params_path)?;
    let pop = ctx.population_or(&params);
    let users = io::read_users(users_path, Some(&pop))?;
    let predictions = predictions_for(&users, &params, &pop, kind)?;
    let meta = population_metadata(ctx.metadata(), &pop)
        .with("model", kind.name())
        .with("params_file", params_path.display());
    let out = ctx.path(&format!("predictions_{}.csv", kind.name()));
    io::write_predictions(&out, &meta, &predictions)?;
    if distributions {
        if kind != ModelKind::Stochastic {
            return Err(Error::invalid("response distributions are only available for the stochastic model"));
        }
        let model = ResponseModel::new(&pop, &params.model)?;
        let mut rows = Vec::new();
        for u in &users {
            let dist = model.response_distribution(u)?;
            for (k, p) in dist.pmf.iter().enumerate() {
                rows.push(vec![u.user_id.clone(), k.to_string(), p.to_string()]);
            }
        }
        io::write_table(
            &ctx.path("distributions.csv"),
            &meta,
            &["user_id", "responses", "probability"],
            rows,
        )?;
    }
    println!("wrote {} predictions to {}", predictions.len(), out.display());
    Ok(())
}

pub fn cmd_classify(
    users_path: &Path,
    params_path: &Path,
    kind: ModelKind,
    fraction: Option<f64>,
    common: &Common,
) -> Result<()> {
    let ctx = Context::new(common)?;
    let params = read_params(params_path)?;
    let pop = ctx.population_or(&params);
    let users = io::read_users(users_path, Some(&pop))?;
    let fraction = fraction.unwrap_or(ctx.config.evaluation.fraction);
    let predictions = predictions_for(&users, &params, &pop, kind)?;
    let c = classify_top_responders(&predictions, &pop, fraction)?;
    let fisher = crate::evaluation::fisher_exact(c.confusion.table());
    let meta = population_metadata(ctx.metadata(), &pop)
        .with("model", kind.name())
        .with("fraction", fraction)
        .with("label_rule", &c.label_rule);
    io::write_table(
        &ctx.path(&format!("classification_{}.csv", kind.name())),
        &meta,
        &["user_id", "predicted_top", "actual_top"],
        c.labels.iter().map(|l| {
            vec![
                l.user_id.clone(),
                l.predicted_top.to_string(),
                l.actual_top.to_string(),
            ]
        }),
    )?;
    #[derive(Serialize)]
    struct Summary<'a> {
        metadata: BTreeMap<String, String>,
        classification: &'a crate::inference::Classification,
        fisher_p: f64,
        fisher_zero_margin: bool,
    }
    io::write_json(
        &ctx.path(&format!("classification_{}.json", kind.name())),
        &Summary {
            metadata: meta.to_map(),
            classification: &c,
            fisher_p: fisher.p_value,
            fisher_zero_margin: fisher.zero_margin,
        },
    )?;
    println!(
        "precision {} recall {} error {} (Fisher p = {})",
        c.precision, c.recall, c.error_fraction, fisher.p_value
    );
    Ok(())
}

fn model_name(path: &Path, meta: &Metadata) -> String {
    meta.get("model").map(str::to_string).unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    })
}

fn check_same_users(a: &[PredictionRecord], b: &[PredictionRecord]) -> Result<()> {
    let sa: BTreeSet<&str> = a.iter().map(|p| p.user_id.as_str()).collect();
    let sb: BTreeSet<&str> = b.iter().map(|p| p.user_id.as_str()).collect();
    let diff: Vec<&str> = sa.symmetric_difference(&sb).copied().collect();
    if diff.is_empty() && sa.len() == a.len() && sb.len() == b.len() {
        Ok(())
    } else if diff.is_empty() {
        Err(Error::invalid("prediction files contain duplicate user ids"))
    } else {
        Err(Error::invalid(format!(
            "prediction files cover different users; symmetric difference: {}",
            diff.join(", ")
        )))
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn cmd_evaluate(
    first_path: &Path,
    second_path: Option<&Path>,
    fraction: Option<f64>,
    common: &Common,
) -> Result<()> {
    let ctx = Context::new(common)?;
    let mut eval_config = ctx.config.evaluation.clone();
    eval_config.seed = ctx.seed;
    if let Some(f) = fraction {
        eval_config.fraction = f;
    }
    eval_config.validate()?;

    let first = io::read_predictions(first_path)?;
    let first_meta = io::read_metadata(first_path)?;
    let pop = match &ctx.config.population {
        Some(p) => p.clone(),
        None => {
            let posts = first_meta
                .get("advocate_post_count")
                .and_then(|v| v.parse::<u64>().ok())
                .ok_or_else(|| {
                    Error::Config(format!(
                        "{} has no advocate_post_count metadata; add a [population] section",
                        first_path.display()
                    ))
                })?;
            let rate = first_meta
                .get("typical_friend_rate")
                .and_then(|v| v.parse::<f64>().ok())
                .unwrap_or(1.0);
            PopulationParams::new(first_meta.get("advocate_id").unwrap_or("advocate"), posts, rate)?
        }
    };
    let mut name_a = model_name(first_path, &first_meta);

    let mut models: Vec<(String, Vec<PredictionRecord>)> = Vec::new();
    if let Some(path) = second_path {
        let second = io::read_predictions(path)?;
        check_same_users(&first, &second)?;
        let mut name_b = model_name(path, &io::read_metadata(path)?);
        if name_a == name_b {
            name_a = model_name(first_path, &Metadata::default());
            name_b = model_name(path, &Metadata::default());
        }
        models.push((name_a, first));
        models.push((name_b, second));
    } else {
        models.push((name_a, first));
    }

    let mut reports: Vec<EvaluationReport> = Vec::new();
    for (i, (name, preds)) in models.iter().enumerate() {
        let other = models
            .iter()
            .enumerate()
            .find(|(j, _)| *j != i)
            .map(|(_, (n, p))| (n.as_str(), p.as_slice()));
        reports.push(evaluate(name, preds, &pop, other, &eval_config)?);
    }

    let meta = population_metadata(ctx.metadata(), &pop).with("fraction", eval_config.fraction);
    for (name, preds) in &models {
        let points = precision_recall_points(preds, &pop, eval_config.fraction)?;
        io::write_table(
            &ctx.path(&format!("pr_curve_{}.csv", sanitize(name))),
            &meta.clone().with("model", name),
            &["k", "recall", "precision"],
            points
                .iter()
                .map(|p| vec![p.k.to_string(), p.recall.to_string(), p.precision.to_string()]),
        )?;
    }
    #[derive(Serialize)]
    struct ReportFile<'a> {
        metadata: BTreeMap<String, String>,
        reports: &'a [EvaluationReport],
    }
    io::write_json(
        &ctx.path("report.json"),
        &ReportFile {
            metadata: meta.to_map(),
            reports: &reports,
        },
    )?;
    for r in &reports {
        match &r.spearman_prediction.result {
            Some(s) => println!("{}: spearman {} (p = {})", r.model_name, s.rho, s.p_value),
            None => println!("{}: spearman undefined", r.model_name),
        }
    }
    Ok(())
}

pub fn cmd_posterior(users_path: &Path, params_path: &Path, user_id: &str, common: &Common) -> Result<()> {
    let ctx = Context::new(common)?;
    let params = read_params(params_path)?;
    let pop = ctx.population_or(&params);
    let users = io::read_users(users_path, Some(&pop))?;
    let user = users
        .iter()
        .find(|u| u.user_id == user_id)
        .ok_or_else(|| Error::invalid(format!("user {user_id} not found in {}", users_path.display())))?;
    let model = ResponseModel::new(&pop, &params.model)?;
    let post = model.posterior_interest(user, ctx.config.posterior.grid_size)?;
    let meta = population_metadata(ctx.metadata(), &pop)
        .with("user_id", user_id)
        .with("response_scale", post.response_scale)
        .with("prior_mean", post.prior_mean)
        .with("posterior_mean", post.posterior_mean);
    let out = ctx.path(&format!("posterior_{}.csv", sanitize(user_id)));
    io::write_table(
        &out,
        &meta,
        &["p_topic", "prior", "posterior"],
        post.grid
            .iter()
            .zip(&post.prior_density)
            .zip(&post.posterior_density)
            .map(|((p, a), b)| vec![p.to_string(), a.to_string(), b.to_string()]),
    )?;
    println!(
        "prior mean {} posterior mean {} -> {}",
        post.prior_mean,
        post.posterior_mean,
        out.display()
    );
    Ok(())
}

pub fn cmd_simulate(common: &Common) -> Result<()> {
    let ctx = Context::new(common)?;
    let mut sim = ctx.config.simulation.clone();
    sim.seed = ctx.seed;
    let params = ctx.config.model.unwrap_or_default();
    let mut generated = generate_population(&sim)?;
    let trace = simulate_responses(&generated.users, &generated.true_p_topic, &params, &generated.pop, ctx.seed)?;
    trace.apply(&mut generated.users);
    let meta = population_metadata(ctx.metadata(), &generated.pop)
        .with("mu", params.mu)
        .with("lambda", params.lambda)
        .with("views_per_post", params.views_per_post)
        .with("p_act", params.p_act);
    io::write_users(&ctx.path("users.csv"), &meta, &generated.users)?;
    io::write_truth(&ctx.path("truth.csv"), &meta, &trace.records)?;
    println!("simulated {} users into {}", generated.users.len(), ctx.out_dir.display());
    Ok(())
}
