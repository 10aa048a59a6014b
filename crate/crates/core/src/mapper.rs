//! Greedy placement of processes onto a mesh of cores, one visit per process:
//! frame-sharing processes are co-located when the pairwise estimate favors
//! it, communicating processes land next to their peers, and independent
//! processes are pushed to distant regions of the mesh.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlgraph::{FrameId, MultiLayerGraph, ProcessGraph, ProcessId};

/// A core position on the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Core {
    pub x: u32,
    pub y: u32,
}

impl PartialOrd for Core {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Core {
    /// Row-major order; (0,0) is the lowest core id.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

/// A rectangular mesh with Manhattan hop distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeshTopology {
    width: u32,
    height: u32,
}

impl MeshTopology {
    pub fn new(width: u32, height: u32) -> Result<MeshTopology> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "mesh dimensions must be >= 1".into(),
            ));
        }
        Ok(MeshTopology { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn core_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn diameter(&self) -> u64 {
        (self.width - 1) as u64 + (self.height - 1) as u64
    }

    pub fn hop(&self, a: Core, b: Core) -> u64 {
        (a.x.abs_diff(b.x) + a.y.abs_diff(b.y)) as u64
    }

    pub fn contains(&self, c: Core) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn core_index(&self, c: Core) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    /// Cores in row-major (ascending id) order.
    pub fn cores(&self) -> impl Iterator<Item = Core> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Core { x, y }))
    }
}

/// Cost-model coefficients shared by the mapper and the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostParams {
    /// Cycles per byte per hop of message traffic.
    pub hop_cost: u64,
    /// Cycles per shared frame when the sharing processes sit on
    /// different cores.
    pub block_op_cost: u64,
    /// Bytes represented by one unit of message volume.
    pub msg_byte_size: u64,
    /// Processes a core may hold before co-location stops being considered.
    pub colocation_cap: u32,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            hop_cost: 1,
            block_op_cost: 64,
            msg_byte_size: 1,
            colocation_cap: 2,
        }
    }
}

/// A total placement of processes onto cores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingAssignment {
    /// Core per process id.
    pub placement: Vec<Core>,
    /// Summed process load per core index.
    pub core_load: Vec<u64>,
    /// Process-visit iterations performed while mapping.
    pub visits: usize,
}

impl MappingAssignment {
    /// Rebuild an assignment from an explicit placement, recomputing loads.
    pub fn from_placement(
        placement: Vec<Core>,
        pg: &ProcessGraph,
        mesh: &MeshTopology,
    ) -> Result<MappingAssignment> {
        if placement.len() != pg.process_count {
            return Err(Error::Structure(format!(
                "placement covers {} processes, graph has {}",
                placement.len(),
                pg.process_count
            )));
        }
        let mut core_load = vec![0u64; mesh.core_count()];
        for (p, &core) in placement.iter().enumerate() {
            if !mesh.contains(core) {
                return Err(Error::Structure(format!(
                    "process {p} placed on out-of-bounds core ({},{})",
                    core.x, core.y
                )));
            }
            core_load[mesh.core_index(core)] += pg.process_load[p];
        }
        Ok(MappingAssignment {
            placement,
            core_load,
            visits: placement_visits(pg),
        })
    }
}

fn placement_visits(pg: &ProcessGraph) -> usize {
    pg.process_count
}

/// Estimated completion cycles for a pair, co-located (loads serialize, no
/// communication) or separate (loads overlap, messages pay one hop and every
/// shared frame pays a block operation).
pub fn estimate_pair(
    p: ProcessId,
    q: ProcessId,
    colocated: bool,
    pg: &ProcessGraph,
    mlg: &MultiLayerGraph,
    params: &CostParams,
) -> u64 {
    let lp = pg.process_load[p as usize];
    let lq = pg.process_load[q as usize];
    if colocated {
        lp + lq
    } else {
        let comm = pg.volume_between(p, q) * params.msg_byte_size * params.hop_cost;
        let block = mlg.shared_frame_count(p, q) * params.block_op_cost;
        lp.max(lq) + comm + block
    }
}

/// Place every process on a core, visiting each process exactly once in ready
/// order (ascending depth, descending load, ascending id).
pub fn map_processes(
    pg: &ProcessGraph,
    mlg: &MultiLayerGraph,
    mesh: &MeshTopology,
    params: &CostParams,
) -> Result<MappingAssignment> {
    if pg.process_count == 0 {
        return Err(Error::InvalidArgument("no processes to map".into()));
    }
    if params.colocation_cap == 0 {
        return Err(Error::InvalidArgument("colocation_cap must be >= 1".into()));
    }

    let mut order: Vec<ProcessId> = (0..pg.process_count as ProcessId).collect();
    order.sort_by_key(|&p| {
        (
            pg.process_depth[p as usize],
            std::cmp::Reverse(pg.process_load[p as usize]),
            p,
        )
    });

    // Symmetric pair volumes for the communication rule.
    let mut volumes: BTreeMap<(ProcessId, ProcessId), u64> = BTreeMap::new();
    for e in &pg.msg_edges {
        let key = (e.src.min(e.dst), e.src.max(e.dst));
        *volumes.entry(key).or_insert(0) += e.volume;
    }
    let pair_volume = |a: ProcessId, b: ProcessId| -> u64 {
        volumes.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    };

    let mut placement: Vec<Option<Core>> = vec![None; pg.process_count];
    let mut core_load = vec![0u64; mesh.core_count()];
    let mut core_procs = vec![0u32; mesh.core_count()];
    let mut placed: Vec<ProcessId> = Vec::new();
    let mut visits = 0usize;

    for &p in &order {
        visits += 1;

        // Rule 1: co-locate with the heaviest frame-sharing peer when the
        // pairwise estimate does not lose and the peer's core has room.
        let sharer = placed
            .iter()
            .map(|&q| (mlg.shared_frame_count(p, q), q))
            .filter(|&(count, _)| count > 0)
            .max_by_key(|&(count, q)| (count, std::cmp::Reverse(q)))
            .map(|(_, q)| q);
        if let Some(q) = sharer {
            let target = placement[q as usize].expect("peer already placed");
            let colocated = estimate_pair(p, q, true, pg, mlg, params);
            let separate = estimate_pair(p, q, false, pg, mlg, params);
            if colocated <= separate && core_procs[mesh.core_index(target)] < params.colocation_cap
            {
                place(p, target, pg, mesh, &mut placement, &mut core_load, &mut core_procs);
                placed.push(p);
                continue;
            }
        }

        let communicates = placed.iter().any(|&q| pair_volume(p, q) > 0);
        let chosen = if communicates {
            // Rule 2: among least-loaded cores, minimize volume-weighted hops
            // to already-placed peers.
            let min_load = mesh
                .cores()
                .map(|c| core_load[mesh.core_index(c)])
                .min()
                .expect("mesh non-empty");
            mesh.cores()
                .filter(|&c| core_load[mesh.core_index(c)] == min_load)
                .min_by_key(|&c| {
                    let comm: u64 = placed
                        .iter()
                        .map(|&q| {
                            pair_volume(p, q)
                                * mesh.hop(c, placement[q as usize].expect("placed"))
                        })
                        .sum();
                    (comm, c)
                })
                .expect("mesh non-empty")
        } else {
            // Rule 3: maximize the minimum hop distance to occupied cores.
            let occupied: Vec<Core> = mesh
                .cores()
                .filter(|&c| core_procs[mesh.core_index(c)] > 0)
                .collect();
            mesh.cores()
                .max_by_key(|&c| {
                    let min_hop = occupied
                        .iter()
                        .map(|&o| mesh.hop(c, o))
                        .min()
                        .unwrap_or(u64::MAX);
                    (
                        min_hop,
                        std::cmp::Reverse(core_load[mesh.core_index(c)]),
                        std::cmp::Reverse(c),
                    )
                })
                .expect("mesh non-empty")
        };
        place(p, chosen, pg, mesh, &mut placement, &mut core_load, &mut core_procs);
        placed.push(p);
    }

    let placement: Vec<Core> = placement
        .into_iter()
        .map(|c| c.expect("every process placed"))
        .collect();
    Ok(MappingAssignment {
        placement,
        core_load,
        visits,
    })
}

fn place(
    p: ProcessId,
    core: Core,
    pg: &ProcessGraph,
    mesh: &MeshTopology,
    placement: &mut [Option<Core>],
    core_load: &mut [u64],
    core_procs: &mut [u32],
) {
    placement[p as usize] = Some(core);
    core_load[mesh.core_index(core)] += pg.process_load[p as usize];
    core_procs[mesh.core_index(core)] += 1;
}

/// Populate frame-to-core residency: each frame lands on the core of the
/// process accessing it most (ties to the lowest process id).
pub fn assign_frame_residency(mlg: &mut MultiLayerGraph, assignment: &MappingAssignment, mesh: &MeshTopology) {
    let mut best: BTreeMap<FrameId, (u64, ProcessId)> = BTreeMap::new();
    for (&(p, f), &count) in &mlg.frame_links {
        let entry = best.entry(f).or_insert((count, p));
        if count > entry.0 {
            *entry = (count, p);
        }
    }
    mlg.core_residency = best
        .into_iter()
        .map(|(f, (_, p))| (f, mesh.core_index(assignment.placement[p as usize])))
        .collect();
}

/// Text form: one `M <process> -> (<x>,<y>)` line per process.
pub fn format_mapping(assignment: &MappingAssignment) -> String {
    let mut out = String::new();
    for (p, core) in assignment.placement.iter().enumerate() {
        let _ = writeln!(out, "M {p} -> ({},{})", core.x, core.y);
    }
    out
}

/// Parse the mapping format back into a placement vector.
pub fn parse_mapping(text: &str, process_count: usize) -> Result<Vec<Core>> {
    let mut placement: Vec<Option<Core>> = vec![None; process_count];
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Parse {
            line: lineno,
            reason,
        };
        let rest = line
            .strip_prefix("M ")
            .ok_or_else(|| err("expected 'M <process> -> (<x>,<y>)'".into()))?;
        let (pid_part, core_part) = rest
            .split_once(" -> ")
            .ok_or_else(|| err("missing ' -> ' separator".into()))?;
        let p: usize = pid_part
            .trim()
            .parse()
            .map_err(|_| err(format!("bad process id '{pid_part}'")))?;
        let coords = core_part
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| err("core must look like (<x>,<y>)".into()))?;
        let (xs, ys) = coords
            .split_once(',')
            .ok_or_else(|| err("core must look like (<x>,<y>)".into()))?;
        let x: u32 = xs.trim().parse().map_err(|_| err(format!("bad x '{xs}'")))?;
        let y: u32 = ys.trim().parse().map_err(|_| err(format!("bad y '{ys}'")))?;
        if p >= process_count {
            return Err(Error::Structure(format!(
                "mapping references process {p}, graph has {process_count}"
            )));
        }
        placement[p] = Some(Core { x, y });
    }
    placement
        .into_iter()
        .enumerate()
        .map(|(p, c)| c.ok_or_else(|| Error::Structure(format!("process {p} is unmapped"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlgraph::MsgEdge;

    fn pg(loads: &[u64], edges: &[(u32, u32, u64)]) -> ProcessGraph {
        ProcessGraph {
            process_count: loads.len(),
            msg_edges: edges
                .iter()
                .map(|&(src, dst, volume)| MsgEdge { src, dst, volume })
                .collect(),
            process_load: loads.to_vec(),
            process_depth: vec![0; loads.len()],
        }
    }

    #[test]
    fn lone_process_takes_origin() {
        let pg = pg(&[100], &[]);
        let mlg = MultiLayerGraph::processes_only(1);
        let mesh = MeshTopology::new(2, 2).unwrap();
        let a = map_processes(&pg, &mlg, &mesh, &CostParams::default()).unwrap();
        assert_eq!(a.placement[0], Core { x: 0, y: 0 });
        assert_eq!(a.visits, 1);
    }

    #[test]
    fn communicating_pair_lands_adjacent() {
        let pg = pg(&[100, 100], &[(0, 1, 5)]);
        let mlg = MultiLayerGraph::processes_only(2);
        let mesh = MeshTopology::new(2, 2).unwrap();
        let a = map_processes(&pg, &mlg, &mesh, &CostParams::default()).unwrap();
        assert_eq!(mesh.hop(a.placement[0], a.placement[1]), 1);
    }

    #[test]
    fn independent_pair_spreads_to_diameter() {
        let pg = pg(&[100, 100], &[]);
        let mlg = MultiLayerGraph::processes_only(2);
        let mesh = MeshTopology::new(4, 4).unwrap();
        let a = map_processes(&pg, &mlg, &mesh, &CostParams::default()).unwrap();
        assert_eq!(mesh.hop(a.placement[0], a.placement[1]), 6);
    }

    #[test]
    fn estimate_pair_examples() {
        let mlg = MultiLayerGraph::processes_only(2);
        let params = CostParams::default();
        let g = pg(&[100, 100], &[]);
        assert_eq!(estimate_pair(0, 1, true, &g, &mlg, &params), 200);
        assert_eq!(estimate_pair(0, 1, false, &g, &mlg, &params), 100);

        let mut sharing = MultiLayerGraph::processes_only(2);
        for f in 0..10u64 {
            sharing.frame_links.insert((0, f), 1);
            sharing.frame_links.insert((1, f), 1);
        }
        let params = CostParams {
            block_op_cost: 20,
            ..CostParams::default()
        };
        assert_eq!(estimate_pair(0, 1, false, &g, &sharing, &params), 300);
        assert_eq!(estimate_pair(0, 1, true, &g, &sharing, &params), 200);

        let idle = pg(&[0, 0], &[]);
        assert!(estimate_pair(0, 1, true, &idle, &mlg, &params) <= estimate_pair(0, 1, false, &idle, &mlg, &params));
    }

    #[test]
    fn sharing_processes_colocate() {
        let g = pg(&[100, 100], &[]);
        let mut mlg = MultiLayerGraph::processes_only(2);
        for f in 0..10u64 {
            mlg.frame_links.insert((0, f), 1);
            mlg.frame_links.insert((1, f), 1);
        }
        let mesh = MeshTopology::new(2, 2).unwrap();
        let params = CostParams {
            block_op_cost: 20,
            ..CostParams::default()
        };
        let a = map_processes(&g, &mlg, &mesh, &params).unwrap();
        assert_eq!(a.placement[0], a.placement[1]);
    }

    #[test]
    fn colocation_cap_limits_stacking() {
        let g = pg(&[100, 100, 100], &[]);
        let mut mlg = MultiLayerGraph::processes_only(3);
        for p in 0..3u32 {
            for f in 0..10u64 {
                mlg.frame_links.insert((p, f), 1);
            }
        }
        let mesh = MeshTopology::new(2, 2).unwrap();
        let params = CostParams {
            block_op_cost: 1000,
            ..CostParams::default()
        };
        let a = map_processes(&g, &mlg, &mesh, &params).unwrap();
        let mut counts = BTreeMap::new();
        for c in &a.placement {
            *counts.entry(*c).or_insert(0u32) += 1;
        }
        assert!(counts.values().all(|&n| n <= 2), "{:?}", a.placement);
    }

    #[test]
    fn deterministic_mapping_with_one_visit_per_process() {
        let g = pg(&[5, 9, 9, 3], &[(0, 1, 2), (2, 3, 4)]);
        let mlg = MultiLayerGraph::processes_only(4);
        let mesh = MeshTopology::new(4, 4).unwrap();
        let a = map_processes(&g, &mlg, &mesh, &CostParams::default()).unwrap();
        let b = map_processes(&g, &mlg, &mesh, &CostParams::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.visits, 4);
        assert!(a.placement.iter().all(|&c| mesh.contains(c)));
    }

    #[test]
    fn mapping_file_roundtrip() {
        let g = pg(&[1, 2], &[]);
        let mlg = MultiLayerGraph::processes_only(2);
        let mesh = MeshTopology::new(3, 1).unwrap();
        let a = map_processes(&g, &mlg, &mesh, &CostParams::default()).unwrap();
        let text = format_mapping(&a);
        let placement = parse_mapping(&text, 2).unwrap();
        assert_eq!(placement, a.placement);
        let rebuilt = MappingAssignment::from_placement(placement, &g, &mesh).unwrap();
        assert_eq!(rebuilt.core_load, a.core_load);
    }

    #[test]
    fn empty_process_graph_rejected() {
        let g = pg(&[], &[]);
        let mlg = MultiLayerGraph::processes_only(0);
        let mesh = MeshTopology::new(2, 2).unwrap();
        assert!(map_processes(&g, &mlg, &mesh, &CostParams::default()).is_err());
    }
}
