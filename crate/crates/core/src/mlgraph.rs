//! The four-layer interconnected graph: instructions (layer 0), processes
//! (layer 1), physical frames (layer 2) and cores (layer 3), plus the
//! derivation of layers 1 and 2 from the dependency graph and a partition.
//!
//! Process ids are the ranks of cluster ids in ascending order; for a
//! canonicalized partition they coincide with the cluster ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::depgraph::DepGraph;
use crate::error::{Error, Result};
use crate::partitioner::{compute_depths, ClusterId, PartitionState};

pub type ProcessId = u32;
pub type FrameId = u64;

/// A message edge between processes; volume aggregates the weights of the
/// crossing dependency edges it stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MsgEdge {
    pub src: ProcessId,
    pub dst: ProcessId,
    pub volume: u64,
}

/// Layer 1: processes with their loads, depths and message edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessGraph {
    pub process_count: usize,
    pub msg_edges: Vec<MsgEdge>,
    /// Per-process work: summed weight of its internal dependency edges.
    pub process_load: Vec<u64>,
    /// Per-process depth in the quotient DAG.
    pub process_depth: Vec<u64>,
}

impl ProcessGraph {
    /// Total message volume between a pair, both directions.
    pub fn volume_between(&self, p: ProcessId, q: ProcessId) -> u64 {
        self.msg_edges
            .iter()
            .filter(|e| (e.src == p && e.dst == q) || (e.src == q && e.dst == p))
            .map(|e| e.volume)
            .sum()
    }
}

/// The assembled multi-layer graph. Frame-to-core residency (layer 2 to 3)
/// stays empty until a mapping exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiLayerGraph {
    pub instruction_count: usize,
    pub process_count: usize,
    /// Hosting processes per instruction (ascending; replicated instructions
    /// list every host).
    pub membership: Vec<Vec<ProcessId>>,
    /// Frame ids present in the trace, ascending.
    pub frames: Vec<FrameId>,
    /// Access counts per (process, frame) link.
    pub frame_links: BTreeMap<(ProcessId, FrameId), u64>,
    /// Copy of the process-interaction edges.
    pub msg_edges: Vec<MsgEdge>,
    pub page_size_log2: u8,
    /// Frame residency after mapping: frame id to core index.
    pub core_residency: BTreeMap<FrameId, usize>,
}

impl MultiLayerGraph {
    /// A graph with `process_count` processes and no instruction or frame
    /// layers; used by synthetic workloads that start at the process level.
    pub fn processes_only(process_count: usize) -> MultiLayerGraph {
        MultiLayerGraph {
            instruction_count: 0,
            process_count,
            membership: Vec::new(),
            frames: Vec::new(),
            frame_links: BTreeMap::new(),
            msg_edges: Vec::new(),
            page_size_log2: 12,
            core_residency: BTreeMap::new(),
        }
    }

    fn check_process(&self, p: ProcessId) -> Result<()> {
        if (p as usize) < self.process_count {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "unknown process id {p} (have {})",
                self.process_count
            )))
        }
    }

    /// Frames accessed by a process.
    pub fn frames_of(&self, p: ProcessId) -> BTreeSet<FrameId> {
        self.frame_links
            .range((p, FrameId::MIN)..=(p, FrameId::MAX))
            .map(|(&(_, f), _)| f)
            .collect()
    }

    /// Frames accessed by both processes.
    pub fn shared_frames(&self, p: ProcessId, q: ProcessId) -> Result<BTreeSet<FrameId>> {
        self.check_process(p)?;
        self.check_process(q)?;
        if p == q {
            return Err(Error::InvalidArgument(
                "shared_frames requires two distinct processes".into(),
            ));
        }
        Ok(self
            .frames_of(p)
            .intersection(&self.frames_of(q))
            .copied()
            .collect())
    }

    pub fn shared_frame_count(&self, p: ProcessId, q: ProcessId) -> u64 {
        if p == q {
            return 0;
        }
        self.frames_of(p).intersection(&self.frames_of(q)).count() as u64
    }

    /// DOT rendering with one subgraph per layer and dashed inter-layer links.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph mlgraph {\n");
        out.push_str("  subgraph cluster_layer0 {\n    label=\"instructions\";\n");
        for i in 0..self.instruction_count {
            let _ = writeln!(out, "    i{i};");
        }
        out.push_str("  }\n");
        out.push_str("  subgraph cluster_layer1 {\n    label=\"processes\";\n");
        for p in 0..self.process_count {
            let _ = writeln!(out, "    p{p};");
        }
        for e in &self.msg_edges {
            let _ = writeln!(out, "    p{} -> p{} [label=\"{}\"];", e.src, e.dst, e.volume);
        }
        out.push_str("  }\n");
        out.push_str("  subgraph cluster_layer2 {\n    label=\"frames\";\n");
        for f in &self.frames {
            let _ = writeln!(out, "    f0x{f:x};");
        }
        out.push_str("  }\n");
        out.push_str("  subgraph cluster_layer3 {\n    label=\"cores\";\n");
        let cores: BTreeSet<usize> = self.core_residency.values().copied().collect();
        for c in &cores {
            let _ = writeln!(out, "    c{c};");
        }
        out.push_str("  }\n");
        for (i, hosts) in self.membership.iter().enumerate() {
            for p in hosts {
                let _ = writeln!(out, "  i{i} -> p{p} [style=dashed];");
            }
        }
        for (&(p, f), w) in &self.frame_links {
            let _ = writeln!(out, "  p{p} -> f0x{f:x} [style=dashed,label=\"{w}\"];");
        }
        for (&f, &c) in &self.core_residency {
            let _ = writeln!(out, "  f0x{f:x} -> c{c} [style=dashed];");
        }
        out.push_str("}\n");
        out
    }
}

/// Rank map from live cluster ids to dense process ids.
fn process_ranks(partition: &PartitionState) -> BTreeMap<ClusterId, ProcessId> {
    partition
        .cluster_ids()
        .enumerate()
        .map(|(rank, c)| (c, rank as ProcessId))
        .collect()
}

/// Derive the process-interaction layer from the partition: message volume
/// between two processes is the summed weight of dependency edges whose
/// endpoints share no hosting cluster, attributed to every hosting pair.
pub fn derive_process_graph(dep: &DepGraph, partition: &PartitionState) -> Result<ProcessGraph> {
    if partition.node_count() != dep.node_count() {
        return Err(Error::Structure(format!(
            "partition covers {} nodes, graph has {}",
            partition.node_count(),
            dep.node_count()
        )));
    }
    let ranks = process_ranks(partition);
    let process_count = ranks.len();

    let mut volumes: BTreeMap<(ProcessId, ProcessId), u64> = BTreeMap::new();
    let mut load = vec![0u64; process_count];
    for e in dep.edges() {
        let src_hosts = partition.clusters_of(e.src);
        let dst_hosts = partition.clusters_of(e.dst);
        if partition.share_cluster(e.src, e.dst) {
            for c in src_hosts.intersection(dst_hosts) {
                load[ranks[c] as usize] += e.weight;
            }
        } else {
            for cu in src_hosts {
                for cv in dst_hosts {
                    if cu != cv {
                        *volumes.entry((ranks[cu], ranks[cv])).or_insert(0) += e.weight;
                    }
                }
            }
        }
    }

    let depths = compute_depths(dep, partition);
    let mut process_depth = vec![0u64; process_count];
    for (c, d) in depths {
        process_depth[ranks[&c] as usize] = d;
    }

    let msg_edges = volumes
        .into_iter()
        .map(|((src, dst), volume)| MsgEdge { src, dst, volume })
        .collect();

    Ok(ProcessGraph {
        process_count,
        msg_edges,
        process_load: load,
        process_depth,
    })
}

/// Assemble the full multi-layer graph from the dependency graph, a covering
/// partition and the frame granularity.
pub fn assemble(
    dep: &DepGraph,
    partition: &PartitionState,
    page_size_log2: u8,
) -> Result<MultiLayerGraph> {
    if page_size_log2 >= 64 {
        return Err(Error::InvalidArgument(
            "page_size_log2 must be below 64".into(),
        ));
    }
    let pg = derive_process_graph(dep, partition)?;
    let ranks = process_ranks(partition);

    let mut membership = Vec::with_capacity(dep.node_count());
    for node in 0..dep.node_count() {
        let hosts: Vec<ProcessId> = partition
            .clusters_of(node)
            .iter()
            .map(|c| ranks[c])
            .collect();
        membership.push(hosts);
    }

    let mut frame_links: BTreeMap<(ProcessId, FrameId), u64> = BTreeMap::new();
    let mut frames: BTreeSet<FrameId> = BTreeSet::new();
    for (node, hosts) in membership.iter().enumerate() {
        if let Some(addr) = dep.mem(node) {
            let frame = addr >> page_size_log2;
            frames.insert(frame);
            for &p in hosts {
                *frame_links.entry((p, frame)).or_insert(0) += 1;
            }
        }
    }

    Ok(MultiLayerGraph {
        instruction_count: dep.node_count(),
        process_count: pg.process_count,
        membership,
        frames: frames.into_iter().collect(),
        frame_links,
        msg_edges: pg.msg_edges.clone(),
        page_size_log2,
        core_residency: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::build_depgraph;
    use crate::partitioner::compute_quality;
    use crate::trace::{generate_trace, parse_trace, TracePattern};

    fn diamond_dep() -> DepGraph {
        build_depgraph(&generate_trace(TracePattern::Diamond, 4, 0).unwrap(), false)
    }

    fn overlap_partition() -> PartitionState {
        let mut clusters = BTreeMap::new();
        clusters.insert(0, BTreeSet::from([0usize, 1, 3]));
        clusters.insert(1, BTreeSet::from([0usize, 2, 3]));
        PartitionState::from_clusters(4, clusters).unwrap()
    }

    #[test]
    fn overlapping_diamond_has_no_messages() {
        let dep = diamond_dep();
        let mlg = assemble(&dep, &overlap_partition(), 12).unwrap();
        assert!(mlg.msg_edges.is_empty());
        assert!(mlg.frames.is_empty());
        assert_eq!(mlg.membership[0], vec![0, 1]); // root replicated
    }

    #[test]
    fn single_cluster_links_every_instruction() {
        let dep = diamond_dep();
        let mlg = assemble(&dep, &PartitionState::single_cluster(4), 12).unwrap();
        assert_eq!(mlg.process_count, 1);
        assert!(mlg.msg_edges.is_empty());
        assert!(mlg.membership.iter().all(|hosts| hosts == &vec![0]));
    }

    #[test]
    fn same_page_shares_a_frame() {
        let text = "I idx=0 bb=0 op=st dst=- src=r0 mem=0x1000 lat=1\n\
                    I idx=1 bb=0 op=ld dst=r1 src=- mem=0x1004 lat=1\n";
        let dep = build_depgraph(&parse_trace(text).unwrap(), false);
        let mlg = assemble(&dep, &PartitionState::single_cluster(2), 12).unwrap();
        assert_eq!(mlg.frames, vec![0x1]);
        assert_eq!(mlg.frame_links[&(0, 0x1)], 2);
    }

    #[test]
    fn chain_split_has_one_message() {
        let dep = build_depgraph(&generate_trace(TracePattern::Chain, 4, 0).unwrap(), false);
        let s = PartitionState::from_assignment(&[0, 0, 1, 1]);
        let pg = derive_process_graph(&dep, &s).unwrap();
        assert_eq!(
            pg.msg_edges,
            vec![MsgEdge { src: 0, dst: 1, volume: 1 }]
        );
        assert_eq!(pg.process_load, vec![1, 1]);
        assert_eq!(pg.process_depth, vec![0, 1]);
    }

    #[test]
    fn singleton_diamond_messages() {
        let dep = diamond_dep();
        let pg = derive_process_graph(&dep, &PartitionState::singletons(4)).unwrap();
        let got: Vec<(u32, u32, u64)> = pg
            .msg_edges
            .iter()
            .map(|e| (e.src, e.dst, e.volume))
            .collect();
        assert_eq!(got, vec![(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)]);
    }

    #[test]
    fn all_in_one_cluster_no_messages() {
        let dep = diamond_dep();
        let pg = derive_process_graph(&dep, &PartitionState::single_cluster(4)).unwrap();
        assert!(pg.msg_edges.is_empty());
        assert_eq!(pg.process_load, vec![4]);
    }

    #[test]
    fn shared_frames_examples() {
        let mut mlg = MultiLayerGraph::processes_only(3);
        mlg.frame_links.insert((0, 1), 1);
        mlg.frame_links.insert((0, 2), 1);
        mlg.frame_links.insert((1, 2), 1);
        mlg.frame_links.insert((1, 3), 1);
        assert_eq!(
            mlg.shared_frames(0, 1).unwrap(),
            BTreeSet::from([2u64])
        );
        assert!(mlg.shared_frames(0, 2).unwrap().is_empty());
        assert!(mlg.shared_frames(0, 7).is_err());
        assert!(mlg.shared_frames(1, 1).is_err());
    }

    #[test]
    fn assemble_rejects_partial_coverage() {
        let dep = diamond_dep();
        let s = PartitionState::from_assignment(&[0, 0, 1]); // only 3 nodes
        assert!(assemble(&dep, &s, 12).is_err());
    }

    #[test]
    fn cut_volume_matches_half_wc_for_disjoint_partitions() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for seed in 0..30u64 {
            let size = rng.random_range(2..40);
            let t = generate_trace(TracePattern::RandomDag, size, seed).unwrap();
            let dep = build_depgraph(&t, false);
            let k = rng.random_range(1..=size as u32);
            let assign: Vec<u32> = (0..size).map(|_| rng.random_range(0..k)).collect();
            let s = PartitionState::from_assignment(&assign);
            let pg = derive_process_graph(&dep, &s).unwrap();
            let q = compute_quality(&dep, &s, 2).unwrap();
            let total_volume: u64 = pg.msg_edges.iter().map(|e| e.volume).sum();
            assert_eq!(q.w_c, 2 * total_volume, "seed {seed}");
        }
    }
}
