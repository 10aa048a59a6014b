//! Python bindings: traces, dependency graphs, partitioning, mapping and the
//! cost-model simulator, driven in-process from Python.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use netos_core::depgraph::{build_depgraph_with, DepGraph, WeightRule};
use netos_core::error::Error as CoreError;
use netos_core::mapper::{map_processes, CostParams, MeshTopology};
use netos_core::mlgraph::{assemble, derive_process_graph};
use netos_core::partitioner::{
    brute_force_partition as brute_partition_rs, compute_quality, format_partition,
    greedy_partition_best_of, parse_partition, PartitionState, QualityBreakdown,
};
use netos_core::pipeline::{run_pipeline_on_trace, RunConfig, TraceSource};
use netos_core::simkernel::{
    run_microbenchmark as run_microbenchmark_rs, simulate, sweep as sweep_rs, MappingPolicy,
    SimConfig, SimResult,
};
use netos_core::trace::{emit_trace, generate_trace, parse_trace, Trace as CoreTrace, TracePattern};

fn core_err(e: CoreError) -> PyErr {
    match e {
        CoreError::Io(_) | CoreError::Stage { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn weight_rule(unit_weights: bool) -> WeightRule {
    if unit_weights {
        WeightRule::Unit
    } else {
        WeightRule::ConsumerLatency
    }
}

fn quality_dict<'py>(py: Python<'py>, q: &QualityBreakdown) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("w_seq", q.w_seq)?;
    d.set_item("w_par", q.w_par)?;
    d.set_item("w_c", q.w_c)?;
    d.set_item("n", q.n)?;
    d.set_item("t_scaled", q.t_scaled)?;
    d.set_item("t", q.t())?;
    d.set_item("total_w", q.total_w)?;
    Ok(d)
}

fn sim_dict<'py>(py: Python<'py>, r: &SimResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("makespan", r.makespan)?;
    d.set_item("msg_cycles", r.total_msg_cycles)?;
    d.set_item("block_cycles", r.total_block_cycles)?;
    d.set_item("msg_count", r.msg_count)?;
    d.set_item("per_core_busy", r.per_core_busy.clone())?;
    Ok(d)
}

/// A dynamic instruction trace.
#[pyclass(name = "Trace")]
struct PyTrace {
    inner: CoreTrace,
}

#[pymethods]
impl PyTrace {
    /// Generate a synthetic trace: pattern is one of "chain", "diamond",
    /// "fan", "mapreduce", "random-dag".
    #[staticmethod]
    #[pyo3(signature = (pattern, size, seed=0))]
    fn generate(pattern: &str, size: usize, seed: u64) -> PyResult<Self> {
        let pattern: TracePattern = pattern.parse().map_err(core_err)?;
        Ok(PyTrace {
            inner: generate_trace(pattern, size, seed).map_err(core_err)?,
        })
    }

    /// Parse the line-oriented trace format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyTrace {
            inner: parse_trace(text).map_err(core_err)?,
        })
    }

    fn to_text(&self) -> String {
        emit_trace(&self.inner)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Build the dependency graph (register def-use, optionally store-to-load).
    #[pyo3(signature = (mem_deps=false, unit_weights=false))]
    fn dep_graph(&self, mem_deps: bool, unit_weights: bool) -> PyDepGraph {
        PyDepGraph {
            inner: build_depgraph_with(&self.inner, mem_deps, weight_rule(unit_weights)),
        }
    }

    fn __repr__(&self) -> String {
        format!("Trace(name='{}', records={})", self.inner.name, self.inner.len())
    }
}

/// The weighted application-layer dependency graph.
#[pyclass(name = "DepGraph")]
struct PyDepGraph {
    inner: DepGraph,
}

#[pymethods]
impl PyDepGraph {
    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn total_weight(&self) -> u64 {
        self.inner.total_weight()
    }

    /// Edges as (src, dst, weight) tuples.
    fn edges(&self) -> Vec<(usize, usize, u64)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.src, e.dst, e.weight))
            .collect()
    }

    fn to_dot(&self) -> String {
        self.inner.to_dot()
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn __repr__(&self) -> String {
        format!(
            "DepGraph(nodes={}, edges={})",
            self.inner.node_count(),
            self.inner.edges().len()
        )
    }
}

/// A node-to-clusters mapping; overlapping membership allowed.
#[pyclass(name = "Partition")]
struct PyPartition {
    inner: PartitionState,
}

#[pymethods]
impl PyPartition {
    /// Parse the `C <cluster> : <node>,...` file format.
    #[staticmethod]
    fn parse(text: &str, node_count: usize) -> PyResult<Self> {
        Ok(PyPartition {
            inner: parse_partition(text, node_count).map_err(core_err)?,
        })
    }

    fn clusters(&self) -> std::collections::BTreeMap<u32, Vec<usize>> {
        self.inner
            .cluster_ids()
            .map(|c| {
                (
                    c,
                    self.inner
                        .members(c)
                        .map(|m| m.iter().copied().collect())
                        .unwrap_or_default(),
                )
            })
            .collect()
    }

    #[getter]
    fn cluster_count(&self) -> usize {
        self.inner.cluster_count()
    }

    #[getter]
    fn overlap_node_count(&self) -> usize {
        self.inner.overlap_node_count()
    }

    fn to_text(&self) -> String {
        format_partition(&self.inner)
    }

    /// Evaluate the quality function on this partition.
    fn quality<'py>(
        &self,
        py: Python<'py>,
        dep: &PyDepGraph,
        n: u32,
    ) -> PyResult<Bound<'py, PyDict>> {
        let q = compute_quality(&dep.inner, &self.inner, n).map_err(core_err)?;
        quality_dict(py, &q)
    }

    fn __repr__(&self) -> String {
        format!(
            "Partition(clusters={}, overlap_nodes={})",
            self.inner.cluster_count(),
            self.inner.overlap_node_count()
        )
    }
}

/// Minimize the quality function with the hierarchical greedy optimizer.
#[pyfunction]
#[pyo3(signature = (dep, n, seed=0, overlap=true, restarts=1))]
fn greedy_partition<'py>(
    py: Python<'py>,
    dep: &PyDepGraph,
    n: u32,
    seed: u64,
    overlap: bool,
    restarts: u32,
) -> PyResult<(PyPartition, Bound<'py, PyDict>)> {
    let (state, q) = greedy_partition_best_of(&dep.inner, n, seed, restarts.max(1), overlap)
        .map_err(core_err)?;
    Ok((PyPartition { inner: state }, quality_dict(py, &q)?))
}

/// Exhaustive non-overlapping optimum; refuses graphs above max_nodes.
#[pyfunction]
#[pyo3(signature = (dep, n, max_nodes=8))]
fn brute_force_partition<'py>(
    py: Python<'py>,
    dep: &PyDepGraph,
    n: u32,
    max_nodes: usize,
) -> PyResult<(PyPartition, Bound<'py, PyDict>)> {
    let (state, q) = brute_partition_rs(&dep.inner, n, max_nodes).map_err(core_err)?;
    Ok((PyPartition { inner: state }, quality_dict(py, &q)?))
}

/// Partition, map onto a W x H mesh, simulate, and return the scores.
#[pyfunction]
#[pyo3(signature = (trace, n, width, height, seed=0, overlap=true, restarts=1, mem_deps=false,
                    hop_cost=1, block_cost=64, msg_bytes=1, cap=2, page_log2=12))]
#[allow(clippy::too_many_arguments)]
fn partition_map_simulate<'py>(
    py: Python<'py>,
    trace: &PyTrace,
    n: u32,
    width: u32,
    height: u32,
    seed: u64,
    overlap: bool,
    restarts: u32,
    mem_deps: bool,
    hop_cost: u64,
    block_cost: u64,
    msg_bytes: u64,
    cap: u32,
    page_log2: u8,
) -> PyResult<Bound<'py, PyDict>> {
    let dep = build_depgraph_with(&trace.inner, mem_deps, WeightRule::ConsumerLatency);
    let (state, q) =
        greedy_partition_best_of(&dep, n, seed, restarts.max(1), overlap).map_err(core_err)?;
    let pg = derive_process_graph(&dep, &state).map_err(core_err)?;
    let mlg = assemble(&dep, &state, page_log2).map_err(core_err)?;
    let mesh = MeshTopology::new(width, height).map_err(core_err)?;
    let params = CostParams {
        hop_cost,
        block_op_cost: block_cost,
        msg_byte_size: msg_bytes,
        colocation_cap: cap,
    };
    let assignment = map_processes(&pg, &mlg, &mesh, &params).map_err(core_err)?;
    let config = SimConfig {
        mesh,
        params,
        policy: MappingPolicy::Netos,
        seed,
    };
    let sim = simulate(&pg, &mlg, &assignment, &config).map_err(core_err)?;

    let out = PyDict::new(py);
    out.set_item("quality", quality_dict(py, &q)?)?;
    out.set_item("partition", PyPartition { inner: state })?;
    out.set_item(
        "placement",
        assignment
            .placement
            .iter()
            .map(|c| (c.x, c.y))
            .collect::<Vec<_>>(),
    )?;
    out.set_item("simulation", sim_dict(py, &sim)?)?;
    Ok(out)
}

/// One message-microbenchmark instance under a mapping policy.
#[pyfunction]
#[pyo3(signature = (pairs, msg_kib, width, height, policy="netos", seed=0,
                    hop_cost=1, block_cost=64, msg_bytes=1, cap=2))]
#[allow(clippy::too_many_arguments)]
fn run_microbenchmark<'py>(
    py: Python<'py>,
    pairs: u32,
    msg_kib: u32,
    width: u32,
    height: u32,
    policy: &str,
    seed: u64,
    hop_cost: u64,
    block_cost: u64,
    msg_bytes: u64,
    cap: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let config = SimConfig {
        mesh: MeshTopology::new(width, height).map_err(core_err)?,
        params: CostParams {
            hop_cost,
            block_op_cost: block_cost,
            msg_byte_size: msg_bytes,
            colocation_cap: cap,
        },
        policy: policy.parse().map_err(core_err)?,
        seed,
    };
    let r = run_microbenchmark_rs(pairs, msg_kib, &config).map_err(core_err)?;
    sim_dict(py, &r)
}

/// Microbenchmark sweep over pairs x message sizes x core counts x policies,
/// returned as the CSV text.
#[pyfunction]
#[pyo3(signature = (pairs, msg_kib, cores, policies, seed=0,
                    hop_cost=1, block_cost=64, msg_bytes=1, cap=2))]
#[allow(clippy::too_many_arguments)]
fn sweep_csv(
    pairs: Vec<u32>,
    msg_kib: Vec<u32>,
    cores: Vec<u32>,
    policies: Vec<String>,
    seed: u64,
    hop_cost: u64,
    block_cost: u64,
    msg_bytes: u64,
    cap: u32,
) -> PyResult<String> {
    let policies: Vec<MappingPolicy> = policies
        .iter()
        .map(|s| s.parse().map_err(core_err))
        .collect::<PyResult<_>>()?;
    let params = CostParams {
        hop_cost,
        block_op_cost: block_cost,
        msg_byte_size: msg_bytes,
        colocation_cap: cap,
    };
    let table = sweep_rs(&pairs, &msg_kib, &cores, &policies, &params, seed).map_err(core_err)?;
    Ok(table.to_csv())
}

/// Run the whole pipeline on a generated or textual trace and return the
/// report as a JSON string.
#[pyfunction]
#[pyo3(signature = (gen=None, trace_text=None, cores=None, overlap=false, restarts=1,
                    mem_deps=false, mesh="4x4", policy="netos", seed=0, page_log2=12))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    gen: Option<&str>,
    trace_text: Option<&str>,
    cores: Option<u32>,
    overlap: bool,
    restarts: u32,
    mem_deps: bool,
    mesh: &str,
    policy: &str,
    seed: u64,
    page_log2: u8,
) -> PyResult<String> {
    let (source, trace) = match (gen, trace_text) {
        (Some(spec), None) => {
            let source = TraceSource::parse_generator_spec(spec).map_err(core_err)?;
            let trace = source.load().map_err(core_err)?;
            (source, trace)
        }
        (None, Some(text)) => {
            let trace = parse_trace(text).map_err(core_err)?;
            let source = TraceSource::File("<inline>".into());
            (source, trace)
        }
        _ => {
            return Err(PyValueError::new_err(
                "exactly one of gen and trace_text is required",
            ))
        }
    };
    let (w, h) = mesh
        .split_once('x')
        .ok_or_else(|| PyValueError::new_err("mesh must look like '<W>x<H>'"))?;
    let mesh = MeshTopology::new(
        w.parse().map_err(|_| PyValueError::new_err("bad mesh width"))?,
        h.parse().map_err(|_| PyValueError::new_err("bad mesh height"))?,
    )
    .map_err(core_err)?;
    let cfg = RunConfig {
        source,
        include_mem_deps: mem_deps,
        weight_rule: WeightRule::ConsumerLatency,
        cores_n: cores,
        allow_overlap: overlap,
        restarts,
        mesh,
        params: CostParams::default(),
        policy: policy.parse().map_err(core_err)?,
        seed,
        page_size_log2: page_log2,
    };
    let (report, _) = run_pipeline_on_trace(trace, &cfg).map_err(core_err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn netos_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyDepGraph>()?;
    m.add_class::<PyPartition>()?;
    m.add_function(wrap_pyfunction!(greedy_partition, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_partition, m)?)?;
    m.add_function(wrap_pyfunction!(partition_map_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_microbenchmark, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
