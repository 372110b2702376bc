//! Python bindings: thin wrappers over the core partition types, the
//! simulator, the exact generator, and the verification checks.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use nestfrag::export::{self, RunConfig};
use nestfrag::mass::{validate_mass, FragmentationParams};
use nestfrag::paintbox;
use nestfrag::rng::RngHandle;
use nestfrag::simulator::{run, RunOptions};
use nestfrag::verify::{self, VerdictReport};

fn err(e: nestfrag::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A set partition of {1, ..., n} in canonical least-element block order.
#[pyclass(frozen, eq)]
#[derive(PartialEq)]
struct Partition {
    inner: nestfrag::partitions::Partition,
}

#[pymethods]
impl Partition {
    /// Parse from text such as "1,3|2".
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Partition {
            inner: text.parse().map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn num_blocks(&self) -> usize {
        self.inner.num_blocks()
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        self.inner.blocks()
    }

    fn restrict(&self, n: usize) -> PyResult<Partition> {
        Ok(Partition {
            inner: self.inner.restrict(n).map_err(err)?,
        })
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Partition(\"{}\")", self.inner)
    }
}

/// A nested pair "zeta ; xi" with zeta refining xi.
#[pyclass(frozen, eq)]
#[derive(PartialEq)]
struct NestedPartition {
    inner: nestfrag::partitions::NestedPartition,
}

#[pymethods]
impl NestedPartition {
    /// Parse from text such as "1,3|2 ; 1,2,3".
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(NestedPartition {
            inner: text.parse().map_err(err)?,
        })
    }

    #[staticmethod]
    fn coarsest(n: usize) -> NestedPartition {
        NestedPartition {
            inner: nestfrag::partitions::NestedPartition::coarsest(n),
        }
    }

    #[staticmethod]
    fn finest(n: usize) -> NestedPartition {
        NestedPartition {
            inner: nestfrag::partitions::NestedPartition::finest(n),
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn zeta(&self) -> Partition {
        Partition {
            inner: self.inner.zeta().clone(),
        }
    }

    #[getter]
    fn xi(&self) -> Partition {
        Partition {
            inner: self.inner.xi().clone(),
        }
    }

    fn restrict(&self, n: usize) -> PyResult<NestedPartition> {
        Ok(NestedPartition {
            inner: self.inner.restrict(n).map_err(err)?,
        })
    }

    /// 1 / (length of the common canonical prefix), 0 for equal states.
    fn distance(&self, other: &NestedPartition) -> PyResult<f64> {
        self.inner.distance(&other.inner).map_err(err)
    }

    /// Refinement order: true when self is a refinement of other.
    fn leq(&self, other: &NestedPartition) -> PyResult<bool> {
        self.inner.nested_leq(&other.inner).map_err(err)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("NestedPartition(\"{}\")", self.inner)
    }
}

/// Erosion coefficients plus finite dislocation measures.
#[pyclass(frozen)]
struct Params {
    inner: FragmentationParams,
}

#[pymethods]
impl Params {
    /// Parse the same JSON document the CLI accepts.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Params> {
        Ok(Params {
            inner: serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        })
    }

    #[staticmethod]
    fn mixed_fixture() -> Params {
        Params {
            inner: nestfrag::fixtures::mixed(),
        }
    }

    #[staticmethod]
    fn binary_fixture() -> Params {
        Params {
            inner: nestfrag::fixtures::binary(),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(c_out={}, c_in1={}, c_in2={}, nu_out atoms={}, nu_in atoms={})",
            self.inner.c_out,
            self.inner.c_in1,
            self.inner.c_in2,
            self.inner.nu_out.len(),
            self.inner.nu_in.len()
        )
    }
}

/// One finished run of the jump process.
#[pyclass(frozen)]
struct Trajectory {
    config: RunConfig,
    traj: nestfrag::simulator::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn seed(&self) -> u64 {
        self.traj.seed
    }

    #[getter]
    fn end_time(&self) -> f64 {
        self.traj.end_time
    }

    #[getter]
    fn initial(&self) -> NestedPartition {
        NestedPartition {
            inner: self.traj.initial.clone(),
        }
    }

    fn final_state(&self) -> NestedPartition {
        NestedPartition {
            inner: self.traj.final_state().clone(),
        }
    }

    /// Events as dicts with keys t, mech, atom, block, state, null.
    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let out = PyList::empty(py);
        for ev in &self.traj.events {
            let d = PyDict::new(py);
            d.set_item("t", ev.t)?;
            d.set_item("mech", ev.mechanism.label())?;
            d.set_item("atom", ev.mechanism.atom())?;
            d.set_item("block", ev.block.clone())?;
            d.set_item("state", ev.state.to_string())?;
            d.set_item("null", ev.null)?;
            out.append(d)?;
        }
        Ok(out)
    }

    fn __len__(&self) -> usize {
        self.traj.events.len()
    }

    fn to_jsonl(&self) -> PyResult<String> {
        export::trajectory_to_jsonl(&self.config, &self.traj).map_err(err)
    }

    fn species_newick(&self) -> PyResult<String> {
        Ok(export::export_trees(&self.traj).map_err(err)?.species)
    }

    fn gene_newick(&self) -> PyResult<String> {
        Ok(export::export_trees(&self.traj).map_err(err)?.gene)
    }

    fn leaf_map_json(&self) -> PyResult<String> {
        Ok(export::export_trees(&self.traj).map_err(err)?.map_json)
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(seed={}, events={}, end_time={})",
            self.traj.seed,
            self.traj.events.len(),
            self.traj.end_time
        )
    }
}

/// Run the process from the coarsest state on [n] (or an explicit initial
/// state) until the horizon or an event cap.
#[pyfunction]
#[pyo3(signature = (params, n=None, initial=None, horizon=None, max_events=None, seed=0, log_null=false))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    params: &Params,
    n: Option<usize>,
    initial: Option<&str>,
    horizon: Option<f64>,
    max_events: Option<u64>,
    seed: u64,
    log_null: bool,
) -> PyResult<Trajectory> {
    let initial = match (initial, n) {
        (Some(text), _) => text.parse().map_err(err)?,
        (None, Some(n)) => nestfrag::partitions::NestedPartition::coarsest(n),
        (None, None) => return Err(PyValueError::new_err("need n or initial")),
    };
    if horizon.is_none() && max_events.is_none() {
        return Err(PyValueError::new_err("need horizon or max_events"));
    }
    let opts = RunOptions {
        horizon: horizon.unwrap_or(f64::INFINITY),
        max_events,
        log_null,
    };
    let traj = run(&params.inner, &initial, &opts, seed).map_err(err)?;
    Ok(Trajectory {
        config: RunConfig::new(&params.inner, &initial, &opts, seed),
        traj,
    })
}

/// Exact generator row out of a state: list of (target text, rate).
#[pyfunction]
fn generator_row(params: &Params, state: &str) -> PyResult<Vec<(String, f64)>> {
    let from: nestfrag::partitions::NestedPartition = state.parse().map_err(err)?;
    let row = nestfrag::rates::generator_row(&from, &params.inner).map_err(err)?;
    Ok(row
        .into_iter()
        .map(|t| (t.to.to_string(), t.rate))
        .collect())
}

/// All nested pairs on [n] as text, in canonical enumeration order.
#[pyfunction]
fn enumerate_nested(n: usize) -> PyResult<Vec<String>> {
    Ok(nestfrag::partitions::enumerate_nested(n)
        .map_err(err)?
        .into_iter()
        .map(|p| p.to_string())
        .collect())
}

/// Paintbox draw: partition of [n] from the mass partition s.
#[pyfunction]
fn sample_univariate(s: Vec<f64>, n: usize, seed: u64) -> PyResult<Partition> {
    let mass = validate_mass(&s).map_err(err)?;
    let mut rng = RngHandle::new(seed);
    Ok(Partition {
        inner: paintbox::sample_univariate(&mass, n, &mut rng),
    })
}

fn report_to_dict<'py>(py: Python<'py>, report: &VerdictReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &report.name)?;
    d.set_item("verdict", report.verdict.to_string())?;
    d.set_item("summary", &report.summary)?;
    d.set_item("details", report.details.clone())?;
    d.set_item("passed", report.passed())?;
    Ok(d)
}

/// Run one verification check by name: "exchangeability", "consistency",
/// "empirical", "binary" or "lln". Returns a report dict.
#[pyfunction]
#[pyo3(signature = (params, name, n=3, m=None, jumps=100_000, samples=100_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn check<'py>(
    py: Python<'py>,
    params: &Params,
    name: &str,
    n: usize,
    m: Option<usize>,
    jumps: u64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let report = match name {
        "exchangeability" => verify::check_exchangeability(n, p, 1e-10),
        "consistency" => verify::check_projective_consistency(m.unwrap_or(n + 1), n, p, 1e-9),
        "empirical" => verify::check_empirical(n, p, jumps, seed),
        "binary" => verify::check_binary_agreement(n, p, 1e-10),
        "lln" => verify::check_paintbox_lln(p, samples, seed),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown check {other:?}; expected exchangeability, consistency, empirical, binary or lln"
            )))
        }
    }
    .map_err(err)?;
    report_to_dict(py, &report)
}

#[pymodule]
fn nestfrag_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Partition>()?;
    m.add_class::<NestedPartition>()?;
    m.add_class::<Params>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(generator_row, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_nested, m)?)?;
    m.add_function(wrap_pyfunction!(sample_univariate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
