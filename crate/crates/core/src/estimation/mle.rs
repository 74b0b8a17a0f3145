//! Maximum-likelihood fit of the global model parameters.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::{self, Bounds, Minimum, Tolerances};
use crate::error::{Error, Result};
use crate::model::{ln_likelihood_factor, ModelParams, PopulationParams, Stance, SurfingLaw, UserRecord};

/// Which parameters the fit adjusts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParameters {
    /// `views_per_post` and `p_act`; the surfing law stays at `mu`, `lambda`.
    ViewsAndAct,
    /// `mu`, `views_per_post` and `p_act`, with `lambda` tied to `mu`.
    SurfingViewsAndAct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub free: FreeParameters,
    /// Surfing parameters held fixed under [`FreeParameters::ViewsAndAct`].
    pub mu: f64,
    pub lambda: f64,
    /// Multi-start grids; the best grid point seeds the local search.
    pub views_grid: Vec<f64>,
    pub p_act_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub objective_tolerance: f64,
    pub parameter_tolerance: f64,
    pub gradient_tolerance: f64,
    pub max_evaluations: usize,
    /// Log-likelihood drop defining the profile interval (chi2_1(0.95) / 2).
    pub profile_drop: f64,
    pub compute_intervals: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            free: FreeParameters::ViewsAndAct,
            mu: 14.0,
            lambda: 14.0,
            views_grid: vec![5.0, 20.0, 80.0, 320.0],
            p_act_grid: vec![0.03, 0.1, 0.3, 0.7],
            mu_grid: vec![5.0, 14.0, 40.0],
            objective_tolerance: 1e-8,
            parameter_tolerance: 1e-6,
            gradient_tolerance: 1e-3,
            max_evaluations: 4000,
            profile_drop: 1.92,
            compute_intervals: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("fit.{name} must be positive, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("lambda", self.lambda)?;
        positive("objective_tolerance", self.objective_tolerance)?;
        positive("parameter_tolerance", self.parameter_tolerance)?;
        positive("gradient_tolerance", self.gradient_tolerance)?;
        positive("profile_drop", self.profile_drop)?;
        for v in self.views_grid.iter().chain(&self.mu_grid) {
            positive("grid value", *v)?;
        }
        if self.p_act_grid.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::Config("fit.p_act_grid values must lie in (0, 1)".into()));
        }
        if self.views_grid.is_empty() || self.p_act_grid.is_empty() {
            return Err(Error::Config("fit grids must not be empty".into()));
        }
        if self.free == FreeParameters::SurfingViewsAndAct && self.mu_grid.is_empty() {
            return Err(Error::Config("fit.mu_grid must not be empty".into()));
        }
        if self.max_evaluations < 10 {
            return Err(Error::Config("fit.max_evaluations is too small".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// No posting activity, so no visit rate and no visibility.
    ZeroPostingRate,
    /// Labeled opponent with recorded responses: zero likelihood.
    OpponentWithResponses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub user_id: String,
    pub reason: ExclusionReason,
}

/// How one end of a confidence interval was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    /// Profile log-likelihood drop.
    Profile,
    /// Observed-information (curvature) interval, used when the profile ran
    /// into a parameter bound before dropping far enough.
    Curvature,
    /// The estimate itself sits on the parameter's natural boundary.
    Boundary,
    /// Profile never dropped far enough and no curvature estimate exists; the
    /// reported end is the search bound.
    Unbounded,
    /// Parameter was not fitted.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    pub name: String,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub low_method: BoundMethod,
    pub high_method: BoundMethod,
}

impl ParameterInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.low <= value && value <= self.high
    }
}

/// A probed multi-start grid point, in natural parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProbe {
    pub params: ModelParams,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub free: FreeParameters,
    pub confidence_intervals: Vec<ParameterInterval>,
    pub interval_method: String,
    pub log_likelihood: f64,
    pub converged: bool,
    pub gradient_norm: f64,
    /// `p_act` was driven to its lower boundary and set to exactly 0.
    pub p_act_at_boundary: bool,
    pub evaluations: usize,
    pub users_used: usize,
    pub excluded_users: Vec<Exclusion>,
    pub grid: Vec<GridProbe>,
}

impl FitResult {
    pub fn interval(&self, name: &str) -> Option<&ParameterInterval> {
        self.confidence_intervals.iter().find(|i| i.name == name)
    }
}

const LN_VIEWS: (f64, f64) = (-6.907_755_278_982_137, 13.815_510_557_964_274); // ln 1e-3, ln 1e6
const LOGIT_ACT: (f64, f64) = (-40.0, 40.0);
const LN_MU: (f64, f64) = (-0.693_147_180_559_945_3, 6.907_755_278_982_137); // ln 0.5, ln 1e3

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
struct UserTerm {
    /// receive rate / posting rate, so rho = rho_base / views_per_post.
    rho_base: f64,
    active: bool,
    m: u64,
    n: u64,
    responses: u64,
}

/// Negative log-likelihood over transformed coordinates:
/// `[ln V, logit p_act]` or `[ln mu, ln V, logit p_act]`.
pub(crate) struct Objective {
    terms: Vec<UserTerm>,
    posts: u64,
    free: FreeParameters,
    mu: f64,
    lambda: f64,
    fixed_law: Option<SurfingLaw>,
}

impl Objective {
    fn new(users: &[&UserRecord], pop: &PopulationParams, config: &FitConfig) -> Result<Self> {
        let terms = users
            .iter()
            .map(|u| UserTerm {
                rho_base: crate::model::receive_rate(u.friend_count, pop.typical_friend_rate)
                    / u.posting_rate,
                active: u.stance != Stance::Opponent,
                m: u.topic_posts,
                n: u.total_posts,
                responses: u.responses,
            })
            .collect();
        let fixed_law = match config.free {
            FreeParameters::ViewsAndAct => Some(SurfingLaw::new(config.mu, config.lambda)?),
            FreeParameters::SurfingViewsAndAct => None,
        };
        Ok(Self {
            terms,
            posts: pop.advocate_post_count,
            free: config.free,
            mu: config.mu,
            lambda: config.lambda,
            fixed_law,
        })
    }

    fn dim(&self) -> usize {
        match self.free {
            FreeParameters::ViewsAndAct => 2,
            FreeParameters::SurfingViewsAndAct => 3,
        }
    }

    fn bounds(&self) -> Bounds {
        match self.free {
            FreeParameters::ViewsAndAct => Bounds {
                lo: vec![LN_VIEWS.0, LOGIT_ACT.0],
                hi: vec![LN_VIEWS.1, LOGIT_ACT.1],
            },
            FreeParameters::SurfingViewsAndAct => Bounds {
                lo: vec![LN_MU.0, LN_VIEWS.0, LOGIT_ACT.0],
                hi: vec![LN_MU.1, LN_VIEWS.1, LOGIT_ACT.1],
            },
        }
    }

    fn params_at(&self, x: &[f64]) -> ModelParams {
        match self.free {
            FreeParameters::ViewsAndAct => ModelParams {
                mu: self.mu,
                lambda: self.lambda,
                views_per_post: x[0].exp(),
                p_act: logistic(x[1]),
            },
            FreeParameters::SurfingViewsAndAct => ModelParams {
                mu: x[0].exp(),
                lambda: x[0].exp(),
                views_per_post: x[1].exp(),
                p_act: logistic(x[2]),
            },
        }
    }

    fn coords_of(&self, p: &ModelParams) -> Vec<f64> {
        match self.free {
            FreeParameters::ViewsAndAct => vec![p.views_per_post.ln(), logit(p.p_act)],
            FreeParameters::SurfingViewsAndAct => {
                vec![p.mu.ln(), p.views_per_post.ln(), logit(p.p_act)]
            }
        }
    }

    fn coord_names(&self) -> &'static [&'static str] {
        match self.free {
            FreeParameters::ViewsAndAct => &["views_per_post", "p_act"],
            FreeParameters::SurfingViewsAndAct => &["mu", "views_per_post", "p_act"],
        }
    }

    fn log_likelihood_of(&self, params: &ModelParams) -> f64 {
        let built;
        let law = match &self.fixed_law {
            Some(law) => law,
            None => match SurfingLaw::new(params.mu, params.lambda) {
                Ok(l) => {
                    built = l;
                    &built
                }
                Err(_) => return f64::NEG_INFINITY,
            },
        };
        let terms: Vec<f64> = self
            .terms
            .par_iter()
            .map(|t| {
                let a = if t.active {
                    (law.p_visible_for_rho(t.rho_base / params.views_per_post) * params.p_act)
                        .clamp(0.0, 1.0)
                } else {
                    0.0
                };
                ln_likelihood_factor(t.responses, t.m, t.n, self.posts, a).unwrap_or(f64::NEG_INFINITY)
            })
            .collect();
        terms.iter().sum()
    }

    pub(crate) fn neg_ll(&self, x: &[f64]) -> f64 {
        -self.log_likelihood_of(&self.params_at(x))
    }
}

struct Prepared {
    included: Vec<UserRecord>,
    excluded: Vec<Exclusion>,
}

fn prepare(users: &[UserRecord], pop: &PopulationParams) -> Result<Prepared> {
    pop.validate()?;
    let mut included = Vec::with_capacity(users.len());
    let mut excluded = Vec::new();
    for u in users {
        u.validate(Some(pop))?;
        let reason = if u.posting_rate <= 0.0 {
            Some(ExclusionReason::ZeroPostingRate)
        } else if u.stance == Stance::Opponent && u.responses > 0 {
            Some(ExclusionReason::OpponentWithResponses)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                warn!("excluding user {} from the likelihood: {:?}", u.user_id, reason);
                excluded.push(Exclusion {
                    user_id: u.user_id.clone(),
                    reason,
                });
            }
            None => included.push(u.clone()),
        }
    }
    if included.is_empty() {
        return Err(Error::EmptyPopulation {
            excluded: excluded.len(),
        });
    }
    Ok(Prepared { included, excluded })
}

fn grid_points(objective: &Objective, config: &FitConfig) -> Vec<ModelParams> {
    let mut out = Vec::new();
    let mus: Vec<f64> = match config.free {
        FreeParameters::ViewsAndAct => vec![config.mu],
        FreeParameters::SurfingViewsAndAct => config.mu_grid.clone(),
    };
    for &mu in &mus {
        for &v in &config.views_grid {
            for &p in &config.p_act_grid {
                let (mu, lambda) = match objective.free {
                    FreeParameters::ViewsAndAct => (config.mu, config.lambda),
                    FreeParameters::SurfingViewsAndAct => (mu, mu),
                };
                out.push(ModelParams {
                    mu,
                    lambda,
                    views_per_post: v,
                    p_act: p,
                });
            }
        }
    }
    out
}

/// Maximizes the summed log-likelihood over the free parameters.
///
/// Users with zero posting rate and opponents with responses are excluded
/// (and listed in the result). The search runs Nelder-Mead in log/logit
/// coordinates from the best point of a fixed grid, then polishes with
/// guarded Newton steps; nothing is random. Non-convergence is reported via
/// `converged = false` with the best point found.
pub fn fit_mle(users: &[UserRecord], pop: &PopulationParams, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let prepared = prepare(users, pop)?;
    if prepared.included.len() < 10 {
        return Err(Error::invalid(format!(
            "maximum-likelihood fit needs at least 10 usable users, got {}",
            prepared.included.len()
        )));
    }
    let refs: Vec<&UserRecord> = prepared.included.iter().collect();
    let objective = Objective::new(&refs, pop, config)?;
    let bounds = objective.bounds();

    let grid: Vec<GridProbe> = grid_points(&objective, config)
        .into_iter()
        .map(|params| GridProbe {
            log_likelihood: objective.log_likelihood_of(&params),
            params,
        })
        .collect();
    let start = grid
        .iter()
        .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood))
        .expect("grid is nonempty");
    let x0 = objective.coords_of(&start.params);

    let mut f = |x: &[f64]| objective.neg_ll(x);
    let tol = Tolerances {
        f_tol: config.objective_tolerance,
        x_tol: config.parameter_tolerance,
        max_evaluations: config.max_evaluations,
    };
    let nm = optimize::nelder_mead(&mut f, &x0, 0.5, &bounds, tol);
    let nm_converged = nm.converged;
    let mut best = optimize::newton_polish(&mut f, nm, &bounds, 8);
    let evaluations = best.evaluations + grid.len();

    let grad = optimize::gradient(&mut f, &best.x, 1e-5, &bounds);
    let act_index = objective.dim() - 1;
    let act_at_lower = best.x[act_index] <= bounds.lo[act_index] + 1e-6
        || logistic(best.x[act_index]) < 1e-10;
    // Coordinates pinned at a bound only need the gradient to point outward.
    let gradient_norm = grad
        .iter()
        .enumerate()
        .filter(|(i, g)| {
            let at_lo = best.x[*i] <= bounds.lo[*i] + 1e-6;
            let at_hi = best.x[*i] >= bounds.hi[*i] - 1e-6;
            !((at_lo && **g > 0.0) || (at_hi && **g < 0.0) || (*i == act_index && act_at_lower))
        })
        .map(|(_, g)| g * g)
        .sum::<f64>()
        .sqrt();
    let converged = nm_converged && gradient_norm < config.gradient_tolerance;

    let mut params = objective.params_at(&best.x);
    if act_at_lower {
        params.p_act = 0.0;
        best.f = -objective.log_likelihood_of(&params);
        warn!("p_act estimate is at its lower boundary 0");
    }
    info!(
        "fit: V = {:.4}, p_act = {:.5}, mu = {:.3}, log-likelihood = {:.6}, converged = {}",
        params.views_per_post, params.p_act, params.mu, -best.f, converged
    );

    let mut result = FitResult {
        params,
        free: config.free,
        confidence_intervals: Vec::new(),
        interval_method: String::new(),
        log_likelihood: -best.f,
        converged,
        gradient_norm,
        p_act_at_boundary: act_at_lower,
        evaluations,
        users_used: prepared.included.len(),
        excluded_users: prepared.excluded,
        grid,
    };
    if converged && config.compute_intervals {
        result.confidence_intervals = intervals_for(&objective, &result, &best, config)?;
        result.interval_method = format!(
            "profile likelihood (drop {}), curvature fallback at search bounds",
            config.profile_drop
        );
    }
    Ok(result)
}

/// 95% intervals for every parameter of a converged fit: profile likelihood
/// with a drop of `config.profile_drop`, falling back to the observed
/// information where the profile reaches a search bound first.
pub fn confidence_intervals(
    users: &[UserRecord],
    pop: &PopulationParams,
    fit: &FitResult,
    config: &FitConfig,
) -> Result<Vec<ParameterInterval>> {
    if !fit.converged {
        return Err(Error::invalid("confidence intervals need a converged fit"));
    }
    let config = FitConfig {
        free: fit.free,
        mu: fit.params.mu,
        lambda: fit.params.lambda,
        ..config.clone()
    };
    config.validate()?;
    let prepared = prepare(users, pop)?;
    let refs: Vec<&UserRecord> = prepared.included.iter().collect();
    let objective = Objective::new(&refs, pop, &config)?;
    let mut x = objective.coords_of(&fit.params);
    if fit.p_act_at_boundary {
        let i = objective.dim() - 1;
        x[i] = objective.bounds().lo[i];
    }
    let f = objective.neg_ll(&x);
    let best = Minimum {
        x,
        f,
        evaluations: 0,
        converged: true,
    };
    intervals_for(&objective, fit, &best, &config)
}

fn natural(name: &str, coord: f64) -> f64 {
    match name {
        "p_act" => logistic(coord),
        _ => coord.exp(),
    }
}

fn intervals_for(
    objective: &Objective,
    fit: &FitResult,
    best: &Minimum,
    config: &FitConfig,
) -> Result<Vec<ParameterInterval>> {
    let bounds = objective.bounds();
    let dim = objective.dim();
    let mut f = |x: &[f64]| objective.neg_ll(x);

    // Standard errors in transformed coordinates from the observed information.
    let se: Vec<Option<f64>> = {
        let interior = (0..dim).all(|i| !bounds.at_bound(&best.x, i, 1e-2));
        let cov = if interior {
            optimize::hessian(&mut f, &best.x, 1e-3).try_inverse()
        } else {
            None
        };
        (0..dim)
            .map(|i| {
                cov.as_ref()
                    .map(|c| c[(i, i)])
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .map(f64::sqrt)
            })
            .collect()
    };

    let names = objective.coord_names();
    let target = best.f + config.profile_drop;
    let mut out = Vec::new();
    for j in 0..dim {
        let others: Vec<usize> = (0..dim).filter(|&i| i != j).collect();
        let sub_bounds = bounds.subset(&others);
        let mut nuisance: Vec<f64>;
        let profile = |t: f64, nuisance: &mut Vec<f64>| -> f64 {
            if others.is_empty() {
                return objective.neg_ll(&[t]);
            }
            let mut g = |z: &[f64]| {
                let mut x = vec![0.0; dim];
                x[j] = t;
                for (k, &i) in others.iter().enumerate() {
                    x[i] = z[k];
                }
                objective.neg_ll(&x)
            };
            let tol = Tolerances {
                f_tol: 1e-9,
                x_tol: 1e-5,
                max_evaluations: 600,
            };
            let m = optimize::nelder_mead(&mut g, nuisance, 0.1, &sub_bounds, tol);
            *nuisance = m.x;
            m.f
        };

        let mut ends = [(0.0, BoundMethod::Profile); 2];
        for (side, dir) in [(0usize, -1.0f64), (1usize, 1.0f64)] {
            let limit = if dir < 0.0 { bounds.lo[j] } else { bounds.hi[j] };
            let name = names[j];
            if (best.x[j] - limit).abs() < 1e-6 {
                let value = if name == "p_act" && dir < 0.0 { 0.0 } else { natural(name, limit) };
                ends[side] = (value, BoundMethod::Boundary);
                continue;
            }
            nuisance = others.iter().map(|&i| best.x[i]).collect();
            let mut step = se[j].map(|s| 2.0 * s).unwrap_or(0.1).max(1e-3);
            let mut inside = best.x[j];
            let mut outside = None;
            loop {
                let t = (inside + dir * step).clamp(bounds.lo[j], bounds.hi[j]);
                let v = profile(t, &mut nuisance);
                if v >= target {
                    outside = Some(t);
                    break;
                }
                inside = t;
                if t == limit {
                    break;
                }
                step *= 2.0;
            }
            ends[side] = match outside {
                Some(mut out_t) => {
                    let mut in_t = inside;
                    while (out_t - in_t).abs() > 1e-5 {
                        let mid = 0.5 * (in_t + out_t);
                        if profile(mid, &mut nuisance) >= target {
                            out_t = mid;
                        } else {
                            in_t = mid;
                        }
                    }
                    (natural(name, 0.5 * (in_t + out_t)), BoundMethod::Profile)
                }
                None => match se[j] {
                    Some(s) => {
                        let t = (best.x[j] + dir * 1.959_963_984_540_054 * s).clamp(bounds.lo[j], bounds.hi[j]);
                        (natural(name, t), BoundMethod::Curvature)
                    }
                    None => (natural(name, limit), BoundMethod::Unbounded),
                },
            };
        }
        let estimate = match names[j] {
            "p_act" => fit.params.p_act,
            "views_per_post" => fit.params.views_per_post,
            _ => fit.params.mu,
        };
        let interval = ParameterInterval {
            name: names[j].to_string(),
            estimate,
            low: ends[0].0.min(estimate),
            high: ends[1].0.max(estimate),
            low_method: ends[0].1,
            high_method: ends[1].1,
        };
        if names[j] == "mu" {
            out.push(ParameterInterval {
                name: "lambda".into(),
                estimate: fit.params.lambda,
                ..interval.clone()
            });
        }
        out.push(interval);
    }
    if fit.free == FreeParameters::ViewsAndAct {
        for (name, v) in [("mu", fit.params.mu), ("lambda", fit.params.lambda)] {
            out.push(ParameterInterval {
                name: name.into(),
                estimate: v,
                low: v,
                high: v,
                low_method: BoundMethod::Fixed,
                high_method: BoundMethod::Fixed,
            });
        }
    }
    let order = ["mu", "lambda", "views_per_post", "p_act"];
    out.sort_by_key(|i| order.iter().position(|n| *n == i.name));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_population, simulate_responses, PopulationConfig};

    fn synthetic(users: usize, seed: u64, truth: &ModelParams) -> (Vec<UserRecord>, PopulationParams) {
        let config = PopulationConfig {
            user_count: users,
            advocate_post_count: 200,
            seed,
            ..PopulationConfig::default()
        };
        let mut g = generate_population(&config).unwrap();
        let trace = simulate_responses(&g.users, &g.true_p_topic, truth, &g.pop, seed + 100).unwrap();
        trace.apply(&mut g.users);
        (g.users, g.pop)
    }

    #[test]
    fn recovers_act_probability_and_beats_grid() {
        let truth = ModelParams::default();
        let (users, pop) = synthetic(300, 4, &truth);
        let fit = fit_mle(&users, &pop, &FitConfig::default()).unwrap();
        assert!(fit.converged, "gradient {}", fit.gradient_norm);
        for probe in &fit.grid {
            assert!(fit.log_likelihood >= probe.log_likelihood);
        }
        let ci = fit.interval("p_act").unwrap();
        assert!(ci.low <= ci.estimate && ci.estimate <= ci.high);
        assert!(ci.contains(truth.p_act), "{ci:?}");
        assert_eq!(fit.interval("mu").unwrap().low_method, BoundMethod::Fixed);
        let ll = crate::model::log_likelihood(
            &users
                .iter()
                .filter(|u| !(u.stance == Stance::Opponent && u.responses > 0))
                .cloned()
                .collect::<Vec<_>>(),
            &pop,
            &fit.params,
        )
        .unwrap();
        assert!((ll - fit.log_likelihood).abs() < 1e-8);
    }

    #[test]
    fn silent_population_hits_zero_boundary() {
        let truth = ModelParams {
            p_act: 0.0,
            ..ModelParams::default()
        };
        let (users, pop) = synthetic(40, 8, &truth);
        let fit = fit_mle(&users, &pop, &FitConfig::default()).unwrap();
        assert!(fit.p_act_at_boundary);
        assert_eq!(fit.params.p_act, 0.0);
        let ci = fit.interval("p_act").unwrap();
        assert_eq!(ci.low, 0.0);
        assert_eq!(ci.low_method, BoundMethod::Boundary);
    }

    #[test]
    fn excludes_silent_users_and_mislabeled_opponents() {
        let (mut users, pop) = synthetic(30, 2, &ModelParams::default());
        users[0].posting_rate = 0.0;
        users[1].stance = Stance::Opponent;
        users[1].responses = 3;
        let config = FitConfig {
            compute_intervals: false,
            ..FitConfig::default()
        };
        let fit = fit_mle(&users, &pop, &config).unwrap();
        assert_eq!(fit.excluded_users.len(), 2);
        assert_eq!(fit.excluded_users[0].reason, ExclusionReason::ZeroPostingRate);
        assert_eq!(fit.excluded_users[1].reason, ExclusionReason::OpponentWithResponses);
        assert_eq!(fit.users_used, 28);
    }

    #[test]
    fn too_few_or_no_users_is_an_error() {
        let (mut users, pop) = synthetic(12, 3, &ModelParams::default());
        for u in &mut users {
            u.posting_rate = 0.0;
        }
        assert!(matches!(
            fit_mle(&users, &pop, &FitConfig::default()),
            Err(Error::EmptyPopulation { excluded: 12 })
        ));
        let (users, pop) = synthetic(5, 3, &ModelParams::default());
        assert!(fit_mle(&users, &pop, &FitConfig::default()).is_err());
    }

    #[test]
    fn invariant_to_order_and_duplication() {
        let (users, pop) = synthetic(120, 6, &ModelParams::default());
        let config = FitConfig {
            compute_intervals: false,
            ..FitConfig::default()
        };
        let base = fit_mle(&users, &pop, &config).unwrap();
        let mut reversed = users.clone();
        reversed.reverse();
        let rev = fit_mle(&reversed, &pop, &config).unwrap();
        let mut doubled = users.clone();
        doubled.extend(users.iter().cloned().map(|mut u| {
            u.user_id.push_str("-copy");
            u
        }));
        let dup = fit_mle(&doubled, &pop, &config).unwrap();
        for other in [&rev, &dup] {
            assert!((other.params.p_act - base.params.p_act).abs() < 1e-4 * base.params.p_act);
            assert!(
                (other.params.views_per_post - base.params.views_per_post).abs()
                    < 1e-3 * base.params.views_per_post
            );
        }
        assert!((dup.log_likelihood - 2.0 * base.log_likelihood).abs() < 1e-6 * base.log_likelihood.abs());
    }
}
