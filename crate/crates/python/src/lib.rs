//! Python bindings: specs, analysis, builtin SUTs and test campaigns.

use std::sync::Mutex;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use otsynth_core::analysis::{self, summary_json, InputGraph};
use otsynth_core::bundled::load_spec;
use otsynth_core::game::Game;
use otsynth_core::sut::{Sut, SutSource};
use otsynth_core::testers::{self, run_campaign, Algorithm, RewardMode, TestContext, TesterConfig};
use otsynth_core::{specfile, CompletionPolicy, Machine, SpecFile};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

/// A requirement automaton with its named objectives.
#[pyclass(name = "Spec", module = "otsynth")]
struct PySpec {
    inner: SpecFile,
}

#[pymethods]
impl PySpec {
    /// Loads a bundled spec by name or a spec file from disk.
    #[staticmethod]
    fn load(name_or_path: &str) -> PyResult<Self> {
        load_spec(name_or_path)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Parses spec text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        specfile::parse_spec(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Returns a completed copy; `policy` is `to-error` or `self-loop`.
    #[pyo3(signature = (policy = "to-error"))]
    fn complete(&self, policy: &str) -> PyResult<Self> {
        let policy: CompletionPolicy = policy.parse().map_err(value_err)?;
        let automaton = self.inner.automaton.complete(policy).map_err(value_err)?;
        Ok(Self {
            inner: SpecFile {
                automaton,
                objectives: self.inner.objectives.clone(),
            },
        })
    }

    /// Completeness, determinism and absorbing-error report.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let report = serde_json::to_value(self.inner.automaton.validate()).map_err(value_err)?;
        to_py(py, &report)
    }

    #[getter]
    fn inputs(&self) -> Vec<String> {
        self.inner.automaton.alphabet().inputs().to_vec()
    }

    #[getter]
    fn outputs(&self) -> Vec<String> {
        self.inner.automaton.alphabet().outputs().to_vec()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner
            .automaton
            .states()
            .iter()
            .map(|s| s.name.clone())
            .collect()
    }

    #[getter]
    fn objectives(&self) -> Vec<String> {
        self.inner
            .objectives
            .iter()
            .map(|o| o.name.clone())
            .collect()
    }

    /// Spec text in the file format.
    fn to_text(&self) -> String {
        specfile::serialize_spec(&self.inner)
    }

    /// Runs a trace of valuation bit strings; returns `(end_state, fails)`.
    fn run_trace(&self, trace: Vec<String>) -> PyResult<(String, bool)> {
        let a = &self.inner.automaton;
        let vals = trace
            .iter()
            .map(|b| a.alphabet().parse_valuation_bits(b))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        let (end, fails) = a.run_trace(&vals).map_err(value_err)?;
        Ok((a.name(end).to_string(), fails))
    }

    /// Coreachability and reward layers, plus the greedy game when `game` is set.
    #[pyo3(signature = (objective, game = false))]
    fn analyze<'py>(
        &self,
        py: Python<'py>,
        objective: &str,
        game: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let obj = self.inner.objective(objective).map_err(value_err)?;
        let m = Machine::new(&self.inner.automaton).map_err(value_err)?;
        let mut out = summary_json(&m, &obj.states);
        if game {
            let graph = InputGraph::new(&m);
            out["game"] = Game::new(&graph, &obj.states)
                .greedy(m.initial())
                .to_json(&m);
        }
        to_py(py, &out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Spec(states={}, objectives={:?})",
            self.inner.automaton.states().len(),
            self.objectives()
        )
    }
}

/// An in-process builtin SUT session.
#[pyclass(name = "Sut", module = "otsynth")]
struct PySut {
    inner: Mutex<Box<dyn Sut>>,
}

impl PySut {
    fn session(&self) -> std::sync::MutexGuard<'_, Box<dyn Sut>> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[pymethods]
impl PySut {
    /// Opens a builtin SUT such as `builtin:passageway-bug`.
    #[new]
    fn new(uri: &str) -> PyResult<Self> {
        let source = SutSource::parse(uri).map_err(value_err)?;
        let inner = source.open_builtin().map_err(value_err)?;
        Ok(Self {
            inner: Mutex::new(inner),
        })
    }

    #[getter]
    fn inputs(&self) -> Vec<String> {
        self.session().alphabet().inputs().to_vec()
    }

    #[getter]
    fn outputs(&self) -> Vec<String> {
        self.session().alphabet().outputs().to_vec()
    }

    fn reset(&self) -> PyResult<()> {
        self.session()
            .reset()
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Applies an input bit string and returns the output bit string.
    fn step(&self, bits: &str) -> PyResult<String> {
        let mut sut = self.session();
        let a = sut.alphabet().clone();
        let input = a.parse_input_bits(bits).map_err(value_err)?;
        let out = sut
            .step(input)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(a.output_bits(out))
    }
}

/// Runs a campaign and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (
    spec, objective, sut, algorithm, *, k = 250, runs = 3000, attempts = 10, epsilon = 0.25,
    gamma = 0.99, m = 30, c = testers::DEFAULT_UCT_C, reward = "discounted", seed = 0,
    continue_after_error = false, greedy_rollout = true, jobs = 1
))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    spec: &PySpec,
    objective: &str,
    sut: &str,
    algorithm: &str,
    k: usize,
    runs: usize,
    attempts: usize,
    epsilon: f64,
    gamma: f64,
    m: u64,
    c: f64,
    reward: &str,
    seed: u64,
    continue_after_error: bool,
    greedy_rollout: bool,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = TesterConfig {
        algorithm: algorithm.parse::<Algorithm>().map_err(value_err)?,
        k,
        runs,
        attempts,
        epsilon,
        gamma,
        m,
        c,
        reward: reward.parse::<RewardMode>().map_err(value_err)?,
        seed,
        continue_after_error,
        greedy_rollout,
    };
    let obj = spec.inner.objective(objective).map_err(value_err)?;
    let ctx = TestContext::new(&spec.inner.automaton, obj).map_err(value_err)?;
    let source = SutSource::parse(sut).map_err(value_err)?;
    let label = spec
        .inner
        .automaton
        .name(spec.inner.automaton.initial())
        .to_string();
    let report = py
        .detach(|| run_campaign(&ctx, &source, &[cfg], jobs, false, (&label, objective)))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &serde_json::to_value(&report).map_err(value_err)?)
}

/// `r_last · Σ γ^i r_i` over an already padded reward sequence.
#[pyfunction]
fn discounted_reward(rewards: Vec<u32>, gamma: f64) -> PyResult<f64> {
    if rewards.is_empty() {
        return Err(PyValueError::new_err("empty reward sequence"));
    }
    Ok(analysis::discounted_reward(&rewards, gamma))
}

#[pyfunction]
fn uct_score(mean: f64, n: f64, n_i: u64, c: f64) -> f64 {
    testers::uct_score(mean, n, n_i, c)
}

#[pymodule]
fn otsynth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PySut>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(discounted_reward, m)?)?;
    m.add_function(wrap_pyfunction!(uct_score, m)?)?;
    m.add("ALGORITHMS", Algorithm::ALL.map(|a| a.name()).to_vec())?;
    Ok(())
}
