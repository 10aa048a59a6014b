//! Cost-model simulator. Execution is level-synchronous over process depths:
//! a level costs its maximum per-core compute plus all message and block-
//! operation cycles attributed to it, and the makespan is the sum over levels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mapper::{map_processes, Core, CostParams, MappingAssignment, MeshTopology};
use crate::mlgraph::{MsgEdge, MultiLayerGraph, ProcessGraph};

/// How processes are assigned to cores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MappingPolicy {
    /// The affinity-aware greedy mapper.
    Netos,
    /// Process i on core i mod cores.
    RoundRobin,
    /// Uniform core per process, drawn from the run seed.
    Random,
}

impl MappingPolicy {
    pub fn name(self) -> &'static str {
        match self {
            MappingPolicy::Netos => "netos",
            MappingPolicy::RoundRobin => "roundrobin",
            MappingPolicy::Random => "random",
        }
    }

    pub const ALL: [MappingPolicy; 3] = [
        MappingPolicy::Netos,
        MappingPolicy::RoundRobin,
        MappingPolicy::Random,
    ];
}

impl FromStr for MappingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "netos" => Ok(MappingPolicy::Netos),
            "roundrobin" => Ok(MappingPolicy::RoundRobin),
            "random" => Ok(MappingPolicy::Random),
            other => Err(Error::InvalidArgument(format!(
                "unknown policy '{other}' (expected netos, roundrobin or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub mesh: MeshTopology,
    pub params: CostParams,
    pub policy: MappingPolicy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimResult {
    pub makespan: u64,
    pub per_core_busy: Vec<u64>,
    pub total_msg_cycles: u64,
    pub total_block_cycles: u64,
    pub msg_count: usize,
}

/// Map a process graph with the configured policy.
pub fn map_with_policy(
    pg: &ProcessGraph,
    mlg: &MultiLayerGraph,
    config: &SimConfig,
) -> Result<MappingAssignment> {
    match config.policy {
        MappingPolicy::Netos => map_processes(pg, mlg, &config.mesh, &config.params),
        MappingPolicy::RoundRobin => {
            let cores: Vec<Core> = config.mesh.cores().collect();
            let placement = (0..pg.process_count)
                .map(|p| cores[p % cores.len()])
                .collect();
            MappingAssignment::from_placement(placement, pg, &config.mesh)
        }
        MappingPolicy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let cores: Vec<Core> = config.mesh.cores().collect();
            let placement = (0..pg.process_count)
                .map(|_| cores[rng.random_range(0..cores.len())])
                .collect();
            MappingAssignment::from_placement(placement, pg, &config.mesh)
        }
    }
}

/// Score a mapped process graph.
///
/// Message edges charge `volume * msg_byte_size * hop_cost * hop` at the level
/// of their downstream endpoint (co-located edges cost nothing, as the hop is
/// zero); a pair of frame-sharing processes split across cores charges
/// `shared frames * block_op_cost` at the later of its two levels.
pub fn simulate(
    pg: &ProcessGraph,
    mlg: &MultiLayerGraph,
    assignment: &MappingAssignment,
    config: &SimConfig,
) -> Result<SimResult> {
    if assignment.placement.len() != pg.process_count {
        return Err(Error::Structure(format!(
            "assignment maps {} processes, graph has {}",
            assignment.placement.len(),
            pg.process_count
        )));
    }
    for (p, &core) in assignment.placement.iter().enumerate() {
        if !config.mesh.contains(core) {
            return Err(Error::Structure(format!(
                "process {p} mapped outside the mesh at ({},{})",
                core.x, core.y
            )));
        }
    }

    let params = &config.params;
    let mesh = &config.mesh;
    let mut levels: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for p in 0..pg.process_count {
        levels.entry(pg.process_depth[p]).or_default().push(p);
    }

    // Per-level message cycles, attributed to the later endpoint's level.
    let mut msg_at: BTreeMap<u64, u64> = BTreeMap::new();
    let mut msg_count = 0usize;
    for e in &pg.msg_edges {
        if e.volume == 0 {
            continue;
        }
        msg_count += 1;
        let hop = mesh.hop(
            assignment.placement[e.src as usize],
            assignment.placement[e.dst as usize],
        );
        let cycles = e.volume * params.msg_byte_size * params.hop_cost * hop;
        let level = pg.process_depth[e.src as usize].max(pg.process_depth[e.dst as usize]);
        *msg_at.entry(level).or_insert(0) += cycles;
    }

    // Per-level block cycles for frame-sharing pairs split across cores.
    let mut block_at: BTreeMap<u64, u64> = BTreeMap::new();
    for p in 0..pg.process_count {
        for q in (p + 1)..pg.process_count {
            if assignment.placement[p] == assignment.placement[q] {
                continue;
            }
            let shared = mlg.shared_frame_count(p as u32, q as u32);
            if shared == 0 {
                continue;
            }
            let level = pg.process_depth[p].max(pg.process_depth[q]);
            *block_at.entry(level).or_insert(0) += shared * params.block_op_cost;
        }
    }

    let mut makespan = 0u64;
    let mut total_msg_cycles = 0u64;
    let mut total_block_cycles = 0u64;
    let mut per_core_busy = vec![0u64; mesh.core_count()];
    let mut all_levels: BTreeMap<u64, ()> = BTreeMap::new();
    for &l in levels.keys().chain(msg_at.keys()).chain(block_at.keys()) {
        all_levels.insert(l, ());
    }

    for &level in all_levels.keys() {
        let mut core_compute: BTreeMap<usize, u64> = BTreeMap::new();
        if let Some(procs) = levels.get(&level) {
            for &p in procs {
                let idx = mesh.core_index(assignment.placement[p]);
                *core_compute.entry(idx).or_insert(0) += pg.process_load[p];
                per_core_busy[idx] += pg.process_load[p];
            }
        }
        let compute = core_compute.values().copied().max().unwrap_or(0);
        let msg = msg_at.get(&level).copied().unwrap_or(0);
        let block = block_at.get(&level).copied().unwrap_or(0);
        makespan += compute + msg + block;
        total_msg_cycles += msg;
        total_block_cycles += block;
    }

    Ok(SimResult {
        makespan,
        per_core_busy,
        total_msg_cycles,
        total_block_cycles,
        msg_count,
    })
}

/// Fixed per-process compute used by the message microbenchmark.
pub const MICROBENCH_PROCESS_LOAD: u64 = 1024;

/// Build the pair-exchange workload: `2 * pairs` processes at depth 0, one
/// message edge per pair carrying `msg_kib * 1024` bytes of volume.
pub fn microbenchmark_workload(pairs: u32, msg_kib: u32) -> (ProcessGraph, MultiLayerGraph) {
    let count = 2 * pairs as usize;
    let msg_edges = (0..pairs)
        .map(|k| MsgEdge {
            src: 2 * k,
            dst: 2 * k + 1,
            volume: msg_kib as u64 * 1024,
        })
        .collect();
    let pg = ProcessGraph {
        process_count: count,
        msg_edges,
        process_load: vec![MICROBENCH_PROCESS_LOAD; count],
        process_depth: vec![0; count],
    };
    let mlg = MultiLayerGraph::processes_only(count);
    (pg, mlg)
}

/// Map and score one microbenchmark instance under the configured policy.
pub fn run_microbenchmark(pairs: u32, msg_kib: u32, config: &SimConfig) -> Result<SimResult> {
    if pairs == 0 || msg_kib == 0 {
        return Err(Error::InvalidArgument(
            "pairs and msg_kib must be >= 1".into(),
        ));
    }
    let capacity = config.mesh.core_count() as u64 * config.params.colocation_cap as u64;
    if 2 * pairs as u64 > capacity {
        return Err(Error::Refused(format!(
            "{} processes exceed mesh capacity {} ({} cores x cap {})",
            2 * pairs,
            capacity,
            config.mesh.core_count(),
            config.params.colocation_cap
        )));
    }
    let (pg, mlg) = microbenchmark_workload(pairs, msg_kib);
    let assignment = map_with_policy(&pg, &mlg, config)?;
    simulate(&pg, &mlg, &assignment, config)
}

/// One evaluated sweep combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub policy: MappingPolicy,
    pub cores_x: u32,
    pub cores_y: u32,
    pub pairs: u32,
    pub msg_kib: u32,
    pub seed: u64,
    pub result: SimResult,
}

/// A combination the microbenchmark refused, kept out of the CSV body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepFailure {
    pub policy: MappingPolicy,
    pub cores: u32,
    pub pairs: u32,
    pub msg_kib: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

pub const SWEEP_CSV_HEADER: &str =
    "policy,cores_x,cores_y,pairs,msg_kib,seed,makespan,msg_cycles,block_cycles";

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.policy.name(),
                r.cores_x,
                r.cores_y,
                r.pairs,
                r.msg_kib,
                r.seed,
                r.result.makespan,
                r.result.total_msg_cycles,
                r.result.total_block_cycles
            );
        }
        out
    }
}

/// Factor a core count into mesh dimensions: the tallest height not exceeding
/// the square root, width = cores / height.
pub fn mesh_for_cores(cores: u32) -> Result<MeshTopology> {
    if cores == 0 {
        return Err(Error::InvalidArgument("core count must be >= 1".into()));
    }
    let mut height = 1;
    for h in 1..=cores {
        if h * h > cores {
            break;
        }
        if cores.is_multiple_of(h) {
            height = h;
        }
    }
    MeshTopology::new(cores / height, height)
}

/// Evaluate the Cartesian product of policies x cores x pairs x message
/// sizes. Rows appear in that nesting order; refused combinations are
/// recorded as failures instead of rows.
pub fn sweep(
    pairs_range: &[u32],
    msg_range: &[u32],
    cores_range: &[u32],
    policies: &[MappingPolicy],
    params: &CostParams,
    seed: u64,
) -> Result<SweepTable> {
    if pairs_range.is_empty() || msg_range.is_empty() || cores_range.is_empty() || policies.is_empty()
    {
        return Err(Error::InvalidArgument(
            "sweep ranges must be non-empty".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &policy in policies {
        for &cores in cores_range {
            let mesh = mesh_for_cores(cores)?;
            let config = SimConfig {
                mesh,
                params: *params,
                policy,
                seed,
            };
            for &pairs in pairs_range {
                for &msg_kib in msg_range {
                    match run_microbenchmark(pairs, msg_kib, &config) {
                        Ok(result) => rows.push(SweepRow {
                            policy,
                            cores_x: mesh.width(),
                            cores_y: mesh.height(),
                            pairs,
                            msg_kib,
                            seed,
                            result,
                        }),
                        Err(Error::Refused(reason)) => failures.push(SweepFailure {
                            policy,
                            cores,
                            pairs,
                            msg_kib,
                            reason,
                        }),
                        Err(other) => return Err(other),
                    }
                }
            }
        }
    }
    Ok(SweepTable { rows, failures })
}
