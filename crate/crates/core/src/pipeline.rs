//! End-to-end run: trace to dependency graph to partition to multi-layer
//! graph to mapping to simulation, with a reproducible report and the on-disk
//! artifacts for each stage.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::depgraph::{build_depgraph_with, DepGraph, WeightRule};
use crate::error::{Error, Result};
use crate::mapper::{
    assign_frame_residency, format_mapping, map_processes, CostParams, MappingAssignment,
    MeshTopology,
};
use crate::mlgraph::{assemble, derive_process_graph, MultiLayerGraph, ProcessGraph};
use crate::partitioner::{
    compute_quality, format_partition, greedy_partition_best_of, PartitionState, QualityBreakdown,
};
use crate::simkernel::{map_with_policy, simulate, MappingPolicy, SimConfig, SimResult};
use crate::trace::{emit_trace, generate_trace, parse_trace, Trace, TracePattern};

#[derive(Debug, Clone)]
pub enum TraceSource {
    File(PathBuf),
    Generated {
        pattern: TracePattern,
        size: usize,
        seed: u64,
    },
}

impl TraceSource {
    /// Parse the CLI form `<pattern>:<size>:<seed>`.
    pub fn parse_generator_spec(spec: &str) -> Result<TraceSource> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "generator spec '{spec}' must look like <pattern>:<size>:<seed>"
            )));
        }
        let pattern: TracePattern = parts[0].parse()?;
        let size: usize = parts[1]
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad generator size '{}'", parts[1])))?;
        let seed: u64 = parts[2]
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad generator seed '{}'", parts[2])))?;
        Ok(TraceSource::Generated {
            pattern,
            size,
            seed,
        })
    }

    pub fn describe(&self) -> String {
        match self {
            TraceSource::File(p) => format!("file:{}", p.display()),
            TraceSource::Generated {
                pattern,
                size,
                seed,
            } => format!("gen:{}:{}:{}", pattern.name(), size, seed),
        }
    }

    /// Load or generate the trace. A missing or unreadable file is a
    /// configuration error, reported with the offending path.
    pub fn load(&self) -> Result<Trace> {
        match self {
            TraceSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::InvalidArgument(format!(
                        "cannot read trace file {}: {e}",
                        path.display()
                    ))
                })?;
                parse_trace(&text)
            }
            TraceSource::Generated {
                pattern,
                size,
                seed,
            } => generate_trace(*pattern, *size, *seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: TraceSource,
    pub include_mem_deps: bool,
    pub weight_rule: WeightRule,
    /// Core count N in the objective; defaults to the mesh size.
    pub cores_n: Option<u32>,
    pub allow_overlap: bool,
    pub restarts: u32,
    pub mesh: MeshTopology,
    pub params: CostParams,
    pub policy: MappingPolicy,
    pub seed: u64,
    pub page_size_log2: u8,
}

impl RunConfig {
    pub fn effective_n(&self) -> u32 {
        self.cores_n.unwrap_or(self.mesh.core_count() as u32)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub source: String,
    pub include_mem_deps: bool,
    pub cores_n: u32,
    pub allow_overlap: bool,
    pub restarts: u32,
    pub mesh: String,
    pub hop_cost: u64,
    pub block_op_cost: u64,
    pub msg_byte_size: u64,
    pub colocation_cap: u32,
    pub policy: String,
    pub seed: u64,
    pub page_size_log2: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub count: usize,
    pub sizes: Vec<usize>,
    pub overlap_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcessSummary {
    pub processes: usize,
    pub msg_edge_count: usize,
    pub total_msg_volume: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MappingEntry {
    pub process: u32,
    pub x: u32,
    pub y: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub input_digest: String,
    pub trace_name: String,
    pub record_count: usize,
    pub quality: QualityBreakdown,
    pub clusters: ClusterSummary,
    pub process_graph: ProcessSummary,
    pub mapping: Vec<MappingEntry>,
    pub makespan: u64,
    pub msg_cycles: u64,
    pub block_cycles: u64,
    pub msg_count: usize,
    pub config: ConfigEcho,
}

/// Everything a run produced, for callers that want the intermediate stages.
pub struct RunArtifacts {
    pub trace: Trace,
    pub dep: DepGraph,
    pub partition: PartitionState,
    pub quality: QualityBreakdown,
    pub process_graph: ProcessGraph,
    pub mlg: MultiLayerGraph,
    pub assignment: MappingAssignment,
    pub sim: SimResult,
}

/// Canonical digest of a trace: SHA-256 over its emitted text form.
pub fn trace_digest(trace: &Trace) -> String {
    let mut hasher = Sha256::new();
    hasher.update(emit_trace(trace).as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run every stage on an already-loaded trace.
pub fn run_pipeline_on_trace(trace: Trace, cfg: &RunConfig) -> Result<(RunReport, RunArtifacts)> {
    let n = cfg.effective_n();
    if n == 0 {
        return Err(Error::InvalidArgument("core count N must be >= 1".into()));
    }

    let dep = build_depgraph_with(&trace, cfg.include_mem_deps, cfg.weight_rule);

    let (partition, _) =
        greedy_partition_best_of(&dep, n, cfg.seed, cfg.restarts.max(1), cfg.allow_overlap)
            .map_err(|e| e.in_stage("partition"))?;
    let quality = compute_quality(&dep, &partition, n).map_err(|e| e.in_stage("partition"))?;

    let process_graph =
        derive_process_graph(&dep, &partition).map_err(|e| e.in_stage("process-graph"))?;
    let mut mlg =
        assemble(&dep, &partition, cfg.page_size_log2).map_err(|e| e.in_stage("assemble"))?;

    let sim_config = SimConfig {
        mesh: cfg.mesh,
        params: cfg.params,
        policy: cfg.policy,
        seed: cfg.seed,
    };
    let assignment = match cfg.policy {
        MappingPolicy::Netos => map_processes(&process_graph, &mlg, &cfg.mesh, &cfg.params),
        _ => map_with_policy(&process_graph, &mlg, &sim_config),
    }
    .map_err(|e| e.in_stage("map"))?;
    assign_frame_residency(&mut mlg, &assignment, &cfg.mesh);

    let sim = simulate(&process_graph, &mlg, &assignment, &sim_config)
        .map_err(|e| e.in_stage("simulate"))?;

    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        input_digest: trace_digest(&trace),
        trace_name: trace.name.clone(),
        record_count: trace.len(),
        quality,
        clusters: ClusterSummary {
            count: partition.cluster_count(),
            sizes: partition.cluster_sizes(),
            overlap_nodes: partition.overlap_node_count(),
        },
        process_graph: ProcessSummary {
            processes: process_graph.process_count,
            msg_edge_count: process_graph.msg_edges.len(),
            total_msg_volume: process_graph.msg_edges.iter().map(|e| e.volume).sum(),
        },
        mapping: assignment
            .placement
            .iter()
            .enumerate()
            .map(|(p, core)| MappingEntry {
                process: p as u32,
                x: core.x,
                y: core.y,
            })
            .collect(),
        makespan: sim.makespan,
        msg_cycles: sim.total_msg_cycles,
        block_cycles: sim.total_block_cycles,
        msg_count: sim.msg_count,
        config: ConfigEcho {
            source: cfg.source.describe(),
            include_mem_deps: cfg.include_mem_deps,
            cores_n: n,
            allow_overlap: cfg.allow_overlap,
            restarts: cfg.restarts.max(1),
            mesh: format!("{}x{}", cfg.mesh.width(), cfg.mesh.height()),
            hop_cost: cfg.params.hop_cost,
            block_op_cost: cfg.params.block_op_cost,
            msg_byte_size: cfg.params.msg_byte_size,
            colocation_cap: cfg.params.colocation_cap,
            policy: cfg.policy.name().to_string(),
            seed: cfg.seed,
            page_size_log2: cfg.page_size_log2,
        },
    };

    Ok((
        report,
        RunArtifacts {
            trace,
            dep,
            partition,
            quality,
            process_graph,
            mlg,
            assignment,
            sim,
        },
    ))
}

/// Load the trace and run every stage.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(RunReport, RunArtifacts)> {
    let trace = cfg.source.load()?;
    run_pipeline_on_trace(trace, cfg)
}

/// Human-readable report: nested key/value sections, deterministic order.
pub fn render_report_text(report: &RunReport) -> String {
    let mut out = String::new();
    let q = &report.quality;
    out.push_str("run-report\n");
    out.push_str(&format!("  tool_version: {}\n", report.tool_version));
    out.push_str(&format!("  timestamp_unix: {}\n", report.timestamp_unix));
    out.push_str(&format!("  input_digest: {}\n", report.input_digest));
    out.push_str(&format!("  trace_name: {}\n", report.trace_name));
    out.push_str(&format!("  record_count: {}\n", report.record_count));
    out.push_str("  quality:\n");
    out.push_str(&format!("    w_seq: {}\n", q.w_seq));
    out.push_str(&format!("    w_par: {}\n", q.w_par));
    out.push_str(&format!("    w_c: {}\n", q.w_c));
    out.push_str(&format!("    n: {}\n", q.n));
    out.push_str(&format!("    t_scaled: {}\n", q.t_scaled));
    out.push_str(&format!("    t: {}\n", q.t()));
    out.push_str(&format!("    total_w: {}\n", q.total_w));
    out.push_str("  clusters:\n");
    out.push_str(&format!("    count: {}\n", report.clusters.count));
    out.push_str(&format!(
        "    sizes: {}\n",
        report
            .clusters
            .sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.push_str(&format!(
        "    overlap_nodes: {}\n",
        report.clusters.overlap_nodes
    ));
    out.push_str("  process_graph:\n");
    out.push_str(&format!(
        "    processes: {}\n",
        report.process_graph.processes
    ));
    out.push_str(&format!(
        "    msg_edges: {}\n",
        report.process_graph.msg_edge_count
    ));
    out.push_str(&format!(
        "    total_msg_volume: {}\n",
        report.process_graph.total_msg_volume
    ));
    out.push_str("  mapping:\n");
    for m in &report.mapping {
        out.push_str(&format!("    p{} -> ({},{})\n", m.process, m.x, m.y));
    }
    out.push_str("  simulation:\n");
    out.push_str(&format!("    makespan: {}\n", report.makespan));
    out.push_str(&format!("    msg_cycles: {}\n", report.msg_cycles));
    out.push_str(&format!("    block_cycles: {}\n", report.block_cycles));
    out.push_str(&format!("    msg_count: {}\n", report.msg_count));
    out.push_str("  config:\n");
    let c = &report.config;
    out.push_str(&format!("    source: {}\n", c.source));
    out.push_str(&format!("    include_mem_deps: {}\n", c.include_mem_deps));
    out.push_str(&format!("    cores_n: {}\n", c.cores_n));
    out.push_str(&format!("    allow_overlap: {}\n", c.allow_overlap));
    out.push_str(&format!("    restarts: {}\n", c.restarts));
    out.push_str(&format!("    mesh: {}\n", c.mesh));
    out.push_str(&format!("    hop_cost: {}\n", c.hop_cost));
    out.push_str(&format!("    block_op_cost: {}\n", c.block_op_cost));
    out.push_str(&format!("    msg_byte_size: {}\n", c.msg_byte_size));
    out.push_str(&format!("    colocation_cap: {}\n", c.colocation_cap));
    out.push_str(&format!("    policy: {}\n", c.policy));
    out.push_str(&format!("    seed: {}\n", c.seed));
    out.push_str(&format!("    page_size_log2: {}\n", c.page_size_log2));
    out
}

/// Write the report and the stage artifacts into a directory. On any write
/// failure the files created so far are removed.
pub fn write_artifacts(dir: &Path, report: &RunReport, artifacts: &RunArtifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let write = |name: &str, contents: String, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };

    let result = (|| -> Result<()> {
        write("report.txt", render_report_text(report), &mut written)?;
        let json = serde_json::to_string_pretty(report)
            .map_err(|e| Error::Structure(format!("report serialization: {e}")))?;
        write("report.json", json + "\n", &mut written)?;
        write(
            "partition.txt",
            format_partition(&artifacts.partition),
            &mut written,
        )?;
        write(
            "mapping.txt",
            format_mapping(&artifacts.assignment),
            &mut written,
        )?;
        write("depgraph.dot", artifacts.dep.to_dot(), &mut written)?;
        write("depgraph.edges", artifacts.dep.to_edge_list(), &mut written)?;
        write("mlgraph.dot", artifacts.mlg.to_dot(), &mut written)?;
        Ok(())
    })();

    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}
