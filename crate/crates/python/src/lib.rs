//! Python bindings for `headsynergy`.
//!
//! Heads cross the boundary as `"layer.head"` strings and coalitions as
//! lists of such strings, matching the CSV outputs.

use std::collections::HashMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use headsynergy as hs;
use headsynergy::{Coalition, HeadId, SelectionMode, SignConvention};

create_exception!(
    headsynergy,
    GuardError,
    PyException,
    "A combinatorial size limit would be exceeded."
);
create_exception!(
    headsynergy,
    InvariantError,
    PyException,
    "A mathematical invariant was violated."
);

fn to_py(e: hs::Error) -> PyErr {
    match e {
        hs::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        hs::Error::Guard(_) => GuardError::new_err(e.to_string()),
        hs::Error::Invariant(_) => InvariantError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for hs::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse_heads(heads: &[String]) -> PyResult<Vec<HeadId>> {
    heads.iter().map(|h| h.parse::<HeadId>().py_err()).collect()
}

fn parse_coalition(heads: &[String]) -> PyResult<Coalition> {
    Coalition::new(parse_heads(heads)?).py_err()
}

fn members(c: &Coalition) -> Vec<String> {
    c.members().iter().map(HeadId::to_string).collect()
}

fn parse_convention(s: &str) -> PyResult<SignConvention> {
    s.parse().py_err()
}

fn parse_mode(s: &str) -> PyResult<SelectionMode> {
    match s {
        "per_layer_ceil" => Ok(SelectionMode::PerLayerCeil),
        "global_floor" => Ok(SelectionMode::GlobalFloor),
        other => Err(PyValueError::new_err(format!(
            "mode must be per_layer_ceil or global_floor, got {other:?}"
        ))),
    }
}

/// Argmax traces for every head of a model.
#[pyclass(name = "TraceSet", module = "headsynergy", frozen)]
struct PyTraceSet(hs::TraceSet);

#[pymethods]
impl PyTraceSet {
    /// Loads and validates an HTRC v1 JSONL file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTraceSet(hs::load_traces(path).py_err()?))
    }

    /// Synthetic traces from compact generators, e.g. `"uniform:4x3,constant,xor"`.
    #[staticmethod]
    #[pyo3(signature = (generators, samples, layers = 1, seed = 0, exact = false))]
    fn synth(
        generators: &str,
        samples: usize,
        layers: u32,
        seed: u64,
        exact: bool,
    ) -> PyResult<Self> {
        let gens = hs::SynthSpec::parse_generators(generators).py_err()?;
        let spec = hs::SynthSpec::new(samples, gens)
            .with_layers(layers)
            .exact(exact);
        Ok(PyTraceSet(hs::synth_traces(&spec, seed).py_err()?))
    }

    /// One symbol per sample; `columns[layer * heads_per_layer + head][sample]`.
    #[staticmethod]
    #[pyo3(signature = (columns, layers = 1, model = "python"))]
    fn from_columns(columns: Vec<Vec<u32>>, layers: u32, model: &str) -> PyResult<Self> {
        if layers == 0 || !columns.len().is_multiple_of(layers as usize) {
            return Err(PyValueError::new_err(
                "column count must be a multiple of layers",
            ));
        }
        let hpl = (columns.len() / layers as usize) as u32;
        Ok(PyTraceSet(
            hs::TraceSet::from_symbol_columns(model, layers, hpl, &columns).py_err()?,
        ))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        hs::write_traces(&self.0, path).py_err()
    }

    #[getter]
    fn model(&self) -> String {
        self.0.header().model_name.clone()
    }

    #[getter]
    fn num_layers(&self) -> u32 {
        self.0.header().num_layers
    }

    #[getter]
    fn heads_per_layer(&self) -> u32 {
        self.0.header().heads_per_layer
    }

    /// Effective sample count (token positions in token mode).
    #[getter]
    fn num_samples(&self) -> usize {
        self.0.num_samples()
    }

    #[getter]
    fn digest(&self) -> Option<String> {
        self.0.source_digest().map(str::to_owned)
    }

    fn layer_heads(&self, layer: u32) -> PyResult<Vec<String>> {
        Ok(self
            .0
            .layer_heads(layer)
            .py_err()?
            .iter()
            .map(HeadId::to_string)
            .collect())
    }

    /// H(coalition) in bits.
    fn joint_entropy(&self, heads: Vec<String>) -> PyResult<f64> {
        hs::joint_entropy(&self.0, &parse_coalition(&heads)?).py_err()
    }

    /// E(C) = H(C) for every coalition of the given heads up to `max_order`.
    #[pyo3(signature = (heads, max_order = None))]
    fn energy_table(
        &self,
        heads: Vec<String>,
        max_order: Option<usize>,
    ) -> PyResult<PyEnergyTable> {
        let heads = parse_heads(&heads)?;
        let k = max_order.unwrap_or(heads.len());
        Ok(PyEnergyTable(
            hs::build_energy_table(&self.0, &heads, k).py_err()?,
        ))
    }

    fn __repr__(&self) -> String {
        let h = self.0.header();
        format!(
            "TraceSet(model={:?}, layers={}, heads_per_layer={}, samples={})",
            h.model_name,
            h.num_layers,
            h.heads_per_layer,
            self.0.num_samples()
        )
    }
}

/// Coalition energies E(C).
#[pyclass(name = "EnergyTable", module = "headsynergy", frozen)]
struct PyEnergyTable(hs::EnergyTable);

#[pymethods]
impl PyEnergyTable {
    /// Builds a table from `{"0.1;0.2": value, ...}`; every coalition up to
    /// `max_order` must be present (the empty one may be omitted).
    #[staticmethod]
    #[pyo3(signature = (heads, entries, max_order = None))]
    fn from_entries(
        heads: Vec<String>,
        entries: HashMap<String, f64>,
        max_order: Option<usize>,
    ) -> PyResult<Self> {
        let universe = hs::Universe::new(parse_heads(&heads)?).py_err()?;
        let k = max_order.unwrap_or(universe.len());
        let parsed = entries
            .iter()
            .map(|(c, v)| Ok((c.parse::<Coalition>().py_err()?, *v)))
            .collect::<PyResult<HashMap<_, _>>>()?;
        Ok(PyEnergyTable(
            hs::EnergyTable::from_entries(universe, k, &parsed).py_err()?,
        ))
    }

    #[getter]
    fn heads(&self) -> Vec<String> {
        self.0
            .universe()
            .heads()
            .iter()
            .map(HeadId::to_string)
            .collect()
    }

    #[getter]
    fn max_order(&self) -> usize {
        self.0.max_order()
    }

    fn get(&self, coalition: Vec<String>) -> PyResult<f64> {
        self.0.get(&parse_coalition(&coalition)?).py_err()
    }

    fn items(&self) -> Vec<(Vec<String>, f64)> {
        self.0.iter().map(|(c, v)| (members(&c), v)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Harsanyi dividends.
#[pyclass(name = "DividendTable", module = "headsynergy", frozen)]
struct PyDividendTable(hs::DividendTable);

#[pymethods]
impl PyDividendTable {
    #[getter]
    fn convention(&self) -> String {
        self.0.convention().to_string()
    }

    fn get(&self, coalition: Vec<String>) -> PyResult<f64> {
        self.0.get(&parse_coalition(&coalition)?).py_err()
    }

    fn items(&self) -> Vec<(Vec<String>, f64)> {
        self.0.iter().map(|(c, v)| (members(&c), v)).collect()
    }

    fn of_order(&self, order: usize) -> Vec<(Vec<String>, f64)> {
        self.0
            .of_order(order)
            .map(|(c, v)| (members(&c), v))
            .collect()
    }

    /// E(C) rebuilt from RAW dividends.
    fn reconstruct(&self, coalition: Vec<String>) -> PyResult<f64> {
        hs::reconstruct_energy(&self.0, &parse_coalition(&coalition)?).py_err()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

fn score_dict(s: &hs::ScoreTable) -> HashMap<String, f64> {
    s.iter().map(|(h, v)| (h.to_string(), v)).collect()
}

#[pyfunction]
#[pyo3(signature = (energies, convention = "paper"))]
fn mobius_dividends(energies: &PyEnergyTable, convention: &str) -> PyResult<PyDividendTable> {
    let conv = parse_convention(convention)?;
    Ok(PyDividendTable(
        hs::mobius_dividends(&energies.0, conv).py_err()?,
    ))
}

/// η_i = Σ_{B∋i} Δ(B)/|B|.
#[pyfunction]
#[pyo3(signature = (dividends, allow_truncated = false))]
fn full_shapley(
    dividends: &PyDividendTable,
    allow_truncated: bool,
) -> PyResult<HashMap<String, f64>> {
    Ok(score_dict(
        &hs::full_shapley(&dividends.0, allow_truncated).py_err()?,
    ))
}

/// φ_i = Δ({i}) + ½ Σ_j Δ({i,j}).
#[pyfunction]
fn truncated_shapley(dividends: &PyDividendTable) -> PyResult<HashMap<String, f64>> {
    Ok(score_dict(&hs::truncated_shapley(&dividends.0).py_err()?))
}

/// Shapley values by enumerating all orderings (at most 10 heads).
#[pyfunction]
fn shapley_oracle(energies: &PyEnergyTable) -> PyResult<HashMap<String, f64>> {
    Ok(score_dict(
        &hs::permutation_shapley_oracle(&energies.0).py_err()?,
    ))
}

fn mask_dict<'py>(py: Python<'py>, m: &hs::PruneMask) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("model", &m.model_name)?;
    d.set_item("rate", m.rate)?;
    d.set_item("mode", m.mode.to_string())?;
    d.set_item("method", m.method.to_string())?;
    d.set_item("seed", m.seed)?;
    let pruned: Vec<String> = m.pruned.iter().map(HeadId::to_string).collect();
    d.set_item("pruned", pruned)?;
    Ok(d)
}

/// Lowest-score heads under `mode`; `scores` must cover every head of the model.
#[pyfunction]
#[pyo3(signature = (scores, layers, heads_per_layer, rate, mode = "per_layer_ceil"))]
fn select_heads<'py>(
    py: Python<'py>,
    scores: HashMap<String, f64>,
    layers: u32,
    heads_per_layer: u32,
    rate: f64,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let parsed = scores
        .iter()
        .map(|(h, v)| Ok((h.parse::<HeadId>().py_err()?, *v)))
        .collect::<PyResult<Vec<_>>>()?;
    let table =
        hs::ScoreTable::from_scores(parsed, hs::ScoreKind::TruncatedPhi, SignConvention::Paper)
            .py_err()?;
    let geom = hs::ModelGeometry::new("python", layers, heads_per_layer);
    let mask = hs::select_heads(&table, &geom, rate, parse_mode(mode)?).py_err()?;
    mask_dict(py, &mask)
}

#[pyfunction]
#[pyo3(signature = (layers, heads_per_layer, rate, seed, mode = "per_layer_ceil"))]
fn random_mask<'py>(
    py: Python<'py>,
    layers: u32,
    heads_per_layer: u32,
    rate: f64,
    seed: u64,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let geom = hs::ModelGeometry::new("python", layers, heads_per_layer);
    let mask = hs::random_mask(&geom, rate, parse_mode(mode)?, seed).py_err()?;
    mask_dict(py, &mask)
}

/// Exact Gibbs distribution over coalitions with an optimality audit.
#[pyfunction]
#[pyo3(signature = (energies, beta = 1.0, trials = 1000, seed = 0, top = 10))]
fn gibbs<'py>(
    py: Python<'py>,
    energies: &PyEnergyTable,
    beta: f64,
    trials: usize,
    seed: u64,
    top: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let model = hs::gibbs_distribution(&energies.0, beta).py_err()?;
    let audit = hs::gibbs_optimality_audit(&model, trials, seed);
    let d = PyDict::new(py);
    d.set_item("beta", beta)?;
    d.set_item("log_partition", model.log_partition())?;
    d.set_item("free_energy", model.free_energy())?;
    let tops: Vec<(Vec<String>, f64, f64)> = model
        .top_coalitions(top)
        .into_iter()
        .map(|w| (w.members, w.energy, w.probability))
        .collect();
    d.set_item("top_coalitions", tops)?;
    d.set_item("optimality_trials", audit.trials)?;
    d.set_item("violations", audit.violations)?;
    d.set_item("min_gap", audit.min_gap)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "headsynergy")]
fn headsynergy_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTraceSet>()?;
    m.add_class::<PyEnergyTable>()?;
    m.add_class::<PyDividendTable>()?;
    m.add_function(wrap_pyfunction!(mobius_dividends, m)?)?;
    m.add_function(wrap_pyfunction!(full_shapley, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_shapley, m)?)?;
    m.add_function(wrap_pyfunction!(shapley_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(select_heads, m)?)?;
    m.add_function(wrap_pyfunction!(random_mask, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs, m)?)?;
    m.add("GuardError", m.py().get_type::<GuardError>())?;
    m.add("InvariantError", m.py().get_type::<InvariantError>())?;
    Ok(())
}
