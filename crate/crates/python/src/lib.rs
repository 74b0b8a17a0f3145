//! Python bindings for the feedresponse model.

use feedresponse::estimation::{self, FitConfig, FreeParameters};
use feedresponse::{evaluation, inference, model, simulator};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: feedresponse::Error) -> PyErr {
    match err {
        feedresponse::Error::Domain(_) | feedresponse::Error::InvalidInput(_) => PyValueError::new_err(err.to_string()),
        e if e.is_input_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Surfing law and visibility parameters.
#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: feedresponse::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (mu=14.0, lambda_=14.0, views_per_post=38.0, p_act=0.12))]
    fn new(mu: f64, lambda_: f64, views_per_post: f64, p_act: f64) -> PyResult<Self> {
        let inner = feedresponse::ModelParams::new(mu, lambda_, views_per_post, p_act).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn views_per_post(&self) -> f64 {
        self.inner.views_per_post
    }

    #[getter]
    fn p_act(&self) -> f64 {
        self.inner.p_act
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(mu={}, lambda_={}, views_per_post={}, p_act={})",
            p.mu, p.lambda, p.views_per_post, p.p_act
        )
    }
}

/// The advocate and the population-wide friend posting rate.
#[pyclass(name = "PopulationParams", from_py_object)]
#[derive(Clone)]
struct PyPopulationParams {
    inner: feedresponse::PopulationParams,
}

#[pymethods]
impl PyPopulationParams {
    #[new]
    #[pyo3(signature = (advocate_id, advocate_post_count, typical_friend_rate=1.61))]
    fn new(advocate_id: &str, advocate_post_count: u64, typical_friend_rate: f64) -> PyResult<Self> {
        let inner = feedresponse::PopulationParams::new(advocate_id, advocate_post_count, typical_friend_rate)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn advocate_id(&self) -> String {
        self.inner.advocate_id.clone()
    }

    #[getter]
    fn advocate_post_count(&self) -> u64 {
        self.inner.advocate_post_count
    }

    #[getter]
    fn typical_friend_rate(&self) -> f64 {
        self.inner.typical_friend_rate
    }

    fn __repr__(&self) -> String {
        format!(
            "PopulationParams(advocate_id={:?}, advocate_post_count={}, typical_friend_rate={})",
            self.inner.advocate_id, self.inner.advocate_post_count, self.inner.typical_friend_rate
        )
    }
}

/// One user's observed activity.
#[pyclass(name = "UserRecord", from_py_object)]
#[derive(Clone)]
struct PyUserRecord {
    inner: feedresponse::UserRecord,
}

#[pymethods]
impl PyUserRecord {
    #[new]
    #[pyo3(signature = (user_id, posting_rate, friend_count, stance, topic_posts, total_posts, responses=0))]
    fn new(
        user_id: String,
        posting_rate: f64,
        friend_count: u64,
        stance: &str,
        topic_posts: u64,
        total_posts: u64,
        responses: u64,
    ) -> PyResult<Self> {
        let stance = stance.parse().map_err(to_py)?;
        let inner = feedresponse::UserRecord {
            user_id,
            posting_rate,
            friend_count,
            stance,
            topic_posts,
            total_posts,
            responses,
        };
        inner.validate(None).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn user_id(&self) -> String {
        self.inner.user_id.clone()
    }

    #[getter]
    fn posting_rate(&self) -> f64 {
        self.inner.posting_rate
    }

    #[getter]
    fn friend_count(&self) -> u64 {
        self.inner.friend_count
    }

    #[getter]
    fn stance(&self) -> &'static str {
        self.inner.stance.as_str()
    }

    #[getter]
    fn topic_posts(&self) -> u64 {
        self.inner.topic_posts
    }

    #[getter]
    fn total_posts(&self) -> u64 {
        self.inner.total_posts
    }

    #[getter]
    fn responses(&self) -> u64 {
        self.inner.responses
    }

    fn __repr__(&self) -> String {
        format!("UserRecord({:?}, responses={})", self.inner.user_id, self.inner.responses)
    }
}

fn unwrap_users(users: Vec<PyUserRecord>) -> Vec<feedresponse::UserRecord> {
    users.into_iter().map(|u| u.inner).collect()
}

/// Response model bound to a population and a parameter set.
#[pyclass(name = "ResponseModel")]
struct PyResponseModel {
    inner: feedresponse::ResponseModel,
}

#[pymethods]
impl PyResponseModel {
    #[new]
    fn new(pop: &PyPopulationParams, params: &PyModelParams) -> PyResult<Self> {
        let inner = feedresponse::ResponseModel::new(&pop.inner, &params.inner).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Probability that one advocate post gets a response, for a user with
    /// full topic interest.
    fn response_scale(&self, user: &PyUserRecord) -> f64 {
        self.inner.response_scale(&user.inner)
    }

    fn response_pmf(&self, responses: u64, user: &PyUserRecord) -> PyResult<f64> {
        self.inner.response_pmf(responses, &user.inner).map_err(to_py)
    }

    /// Full pmf over 0..=N responses.
    fn response_distribution(&self, user: &PyUserRecord) -> PyResult<Vec<f64>> {
        Ok(self.inner.response_distribution(&user.inner).map_err(to_py)?.pmf)
    }

    fn log_likelihood(&self, users: Vec<PyUserRecord>) -> PyResult<f64> {
        self.inner.log_likelihood(&unwrap_users(users)).map_err(to_py)
    }

    /// `(user_id, predicted_mean, predicted_std, observed)` for every user.
    fn predict(&self, users: Vec<PyUserRecord>) -> PyResult<Vec<(String, f64, f64, u64)>> {
        let preds = self.inner.predict_all(&unwrap_users(users)).map_err(to_py)?;
        Ok(preds
            .into_iter()
            .map(|p| (p.user_id, p.predicted_mean, p.predicted_std, p.observed))
            .collect())
    }

    /// Posterior topic interest on a grid: `(grid, prior, posterior)`.
    #[pyo3(signature = (user, grid_size=1001))]
    fn posterior_interest(&self, user: &PyUserRecord, grid_size: usize) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let post = self.inner.posterior_interest(&user.inner, grid_size).map_err(to_py)?;
        Ok((post.grid, post.prior_density, post.posterior_density))
    }
}

#[pyfunction]
fn marginal_response_pmf(responses: u64, m: u64, n: u64, posts: u64, a: f64) -> PyResult<f64> {
    model::marginal_response_pmf(responses, m, n, posts, a).map_err(to_py)
}

#[pyfunction]
fn list_position_pmf(newer_posts: u64, rho: f64) -> PyResult<f64> {
    model::list_position_pmf(newer_posts, rho).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (m_items, mu, lambda_))]
fn surfing_stop_pmf(m_items: u64, mu: f64, lambda_: f64) -> PyResult<f64> {
    model::surfing_stop_pmf(m_items, mu, lambda_).map_err(to_py)
}

/// Maximum-likelihood fit. Returns a dict with the fitted `params`, the
/// log-likelihood, convergence flag and confidence intervals.
#[pyfunction]
#[pyo3(signature = (users, pop, fit_surfing=false, mu=14.0, lambda_=14.0, compute_intervals=true))]
fn fit_mle<'py>(
    py: Python<'py>,
    users: Vec<PyUserRecord>,
    pop: &PyPopulationParams,
    fit_surfing: bool,
    mu: f64,
    lambda_: f64,
    compute_intervals: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let config = FitConfig {
        free: if fit_surfing {
            FreeParameters::SurfingViewsAndAct
        } else {
            FreeParameters::ViewsAndAct
        },
        mu,
        lambda: lambda_,
        compute_intervals,
        ..FitConfig::default()
    };
    let users = unwrap_users(users);
    let fit = py
        .detach(|| estimation::fit_mle(&users, &pop.inner, &config))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("params", PyModelParams { inner: fit.params })?;
    out.set_item("log_likelihood", fit.log_likelihood)?;
    out.set_item("converged", fit.converged)?;
    out.set_item("users_used", fit.users_used)?;
    out.set_item("excluded", fit.excluded_users.len())?;
    let intervals = PyDict::new(py);
    for ci in &fit.confidence_intervals {
        intervals.set_item(&ci.name, (ci.low, ci.high))?;
    }
    out.set_item("intervals", intervals)?;
    Ok(out)
}

/// Logistic baseline on log posting rate: `(beta0, beta1, se0, se1)`.
#[pyfunction]
fn fit_logistic(users: Vec<PyUserRecord>, pop: &PyPopulationParams) -> PyResult<(f64, f64, f64, f64)> {
    let fit = estimation::fit_logistic(&unwrap_users(users), &pop.inner).map_err(to_py)?;
    Ok((fit.beta0, fit.beta1, fit.standard_errors[0], fit.standard_errors[1]))
}

fn records(preds: Vec<(String, f64, f64, u64)>) -> Vec<inference::PredictionRecord> {
    preds
        .into_iter()
        .map(|(id, mean, std, observed)| inference::PredictionRecord::new(id, mean, std, observed))
        .collect()
}

/// Top-responder classification from `ResponseModel.predict` output.
#[pyfunction]
#[pyo3(signature = (predictions, pop, fraction=0.25))]
fn classify_top_responders<'py>(
    py: Python<'py>,
    predictions: Vec<(String, f64, f64, u64)>,
    pop: &PyPopulationParams,
    fraction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = inference::classify_top_responders(&records(predictions), &pop.inner, fraction).map_err(to_py)?;
    let fisher = evaluation::fisher_exact(c.confusion.table());
    let out = PyDict::new(py);
    out.set_item("precision", c.precision)?;
    out.set_item("recall", c.recall)?;
    out.set_item("error_fraction", c.error_fraction)?;
    out.set_item("predicted_count", c.predicted_count)?;
    out.set_item("actual_count", c.actual_count)?;
    out.set_item("confusion", c.confusion.table())?;
    out.set_item("fisher_p", fisher.p_value)?;
    let predicted: Vec<String> = c
        .labels
        .iter()
        .filter(|l| l.predicted_top)
        .map(|l| l.user_id.clone())
        .collect();
    out.set_item("predicted_top", predicted)?;
    Ok(out)
}

/// Spearman correlation with mid-ranks: `(rho, p_value)`.
#[pyfunction]
fn spearman_rho(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = evaluation::spearman_rho(&x, &y).map_err(to_py)?;
    Ok((r.rho, r.p_value))
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`.
#[pyfunction]
fn fisher_exact(table: [[u64; 2]; 2]) -> f64 {
    evaluation::fisher_exact(table).p_value
}

/// Synthetic population with simulated responses: `(users, pop)`.
#[pyfunction]
#[pyo3(signature = (user_count=500, advocate_post_count=400, seed=1, params=None))]
fn simulate(
    py: Python<'_>,
    user_count: usize,
    advocate_post_count: u64,
    seed: u64,
    params: Option<PyModelParams>,
) -> PyResult<(Vec<PyUserRecord>, PyPopulationParams)> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    let config = simulator::PopulationConfig {
        user_count,
        advocate_post_count,
        seed,
        ..simulator::PopulationConfig::default()
    };
    let (users, pop) = py
        .detach(|| -> feedresponse::Result<_> {
            let mut g = simulator::generate_population(&config)?;
            simulator::simulate_responses(&g.users, &g.true_p_topic, &params, &g.pop, seed)?.apply(&mut g.users);
            Ok((g.users, g.pop))
        })
        .map_err(to_py)?;
    Ok((
        users.into_iter().map(|inner| PyUserRecord { inner }).collect(),
        PyPopulationParams { inner: pop },
    ))
}

#[pymodule]
fn pyfeedresponse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyPopulationParams>()?;
    m.add_class::<PyUserRecord>()?;
    m.add_class::<PyResponseModel>()?;
    m.add_function(wrap_pyfunction!(marginal_response_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(list_position_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(surfing_stop_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mle, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(classify_top_responders, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_exact, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
