//! Dependency analysis over a dynamic trace: the basic-block map and the
//! weighted application-layer graph induced by register def-use pairs
//! (last-writer rule) and, optionally, store-to-load pairs on exact addresses.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::Trace;

/// Instruction indices grouped by basic block, trace order preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlockMap {
    pub entries: BTreeMap<u32, Vec<usize>>,
}

pub fn build_bb_map(trace: &Trace) -> BasicBlockMap {
    let mut entries: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for r in &trace.records {
        entries.entry(r.bb).or_default().push(r.index);
    }
    BasicBlockMap { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: u64,
}

/// How the weight of a dependency edge is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightRule {
    /// Weight = latency of the consuming instruction.
    #[default]
    ConsumerLatency,
    /// Every dependency weighs 1.
    Unit,
}

/// The application-layer graph: one node per dynamic instruction, one weighted
/// edge per producer/consumer dependency. Edges always point forward in trace
/// order, so the graph is a DAG; parallel dependencies between the same pair
/// are merged by summing their weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepGraph {
    node_latency: Vec<u64>,
    node_mem: Vec<Option<u64>>,
    edges: Vec<DepEdge>,
}

impl DepGraph {
    /// Assemble a graph from parts, enforcing the DAG and uniqueness
    /// invariants. Used by the builder and by tests that construct fixtures.
    pub fn from_parts(
        node_latency: Vec<u64>,
        node_mem: Vec<Option<u64>>,
        edge_weights: BTreeMap<(usize, usize), u64>,
    ) -> Result<DepGraph> {
        let n = node_latency.len();
        if node_mem.len() != n {
            return Err(Error::Structure(
                "node_mem and node_latency length mismatch".into(),
            ));
        }
        let mut edges = Vec::with_capacity(edge_weights.len());
        for ((src, dst), weight) in edge_weights {
            if src >= dst {
                return Err(Error::Structure(format!(
                    "edge ({src} -> {dst}) does not point forward in trace order"
                )));
            }
            if dst >= n {
                return Err(Error::Structure(format!(
                    "edge ({src} -> {dst}) references a node outside 0..{n}"
                )));
            }
            if weight == 0 {
                return Err(Error::Structure(format!(
                    "edge ({src} -> {dst}) has zero weight"
                )));
            }
            edges.push(DepEdge { src, dst, weight });
        }
        Ok(DepGraph {
            node_latency,
            node_mem,
            edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_latency.len()
    }

    pub fn edges(&self) -> &[DepEdge] {
        &self.edges
    }

    pub fn latency(&self, node: usize) -> u64 {
        self.node_latency[node]
    }

    pub fn mem(&self, node: usize) -> Option<u64> {
        self.node_mem[node]
    }

    /// Sum of all edge weights.
    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Neighbor sets ignoring direction, for cluster-move candidate discovery.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            adj[e.src].push(e.dst);
            adj[e.dst].push(e.src);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Edge-list text form: `NODES <n>` header, then one `E <src> <dst> <w>`
    /// per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NODES {}", self.node_count());
        for e in &self.edges {
            let _ = writeln!(out, "E {} {} {}", e.src, e.dst, e.weight);
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph depgraph {\n");
        for i in 0..self.node_count() {
            let _ = writeln!(out, "  n{i} [label=\"{i} (lat {})\"];", self.node_latency[i]);
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.src, e.dst, e.weight);
        }
        out.push_str("}\n");
        out
    }
}

fn is_store(op: &str) -> bool {
    op.starts_with("st")
}

fn is_load(op: &str) -> bool {
    op.starts_with("ld")
}

/// Build the dependency graph with the default consumer-latency weights.
pub fn build_depgraph(trace: &Trace, include_mem_deps: bool) -> DepGraph {
    build_depgraph_with(trace, include_mem_deps, WeightRule::default())
}

/// Build the dependency graph with an explicit weight rule.
///
/// For every source register of record `j`, an edge is added from the most
/// recent earlier writer of that register (a register read before any write is
/// a live-in and yields no edge). With `include_mem_deps`, a load additionally
/// depends on the most recent store to the same byte address.
pub fn build_depgraph_with(trace: &Trace, include_mem_deps: bool, rule: WeightRule) -> DepGraph {
    let n = trace.records.len();
    let mut node_latency = Vec::with_capacity(n);
    let mut node_mem = Vec::with_capacity(n);
    let mut edge_weights: BTreeMap<(usize, usize), u64> = BTreeMap::new();

    let mut last_writer: HashMap<&str, usize> = HashMap::new();
    let mut last_store: HashMap<u64, usize> = HashMap::new();

    for r in &trace.records {
        let j = r.index;
        let w = match rule {
            WeightRule::ConsumerLatency => r.lat,
            WeightRule::Unit => 1,
        };
        for src in &r.srcs {
            if let Some(&i) = last_writer.get(src.as_str()) {
                *edge_weights.entry((i, j)).or_insert(0) += w;
            }
        }
        if include_mem_deps {
            if let Some(addr) = r.mem {
                if is_load(&r.opcode) {
                    if let Some(&i) = last_store.get(&addr) {
                        *edge_weights.entry((i, j)).or_insert(0) += w;
                    }
                }
                if is_store(&r.opcode) {
                    last_store.insert(addr, j);
                }
            }
        }
        if let Some(dst) = &r.dst {
            last_writer.insert(dst.as_str(), j);
        }
        node_latency.push(r.lat);
        node_mem.push(r.mem);
    }

    DepGraph::from_parts(node_latency, node_mem, edge_weights)
        .expect("trace-derived edges satisfy the DAG invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::trace::{generate_trace, parse_trace, TracePattern};
    use proptest::prelude::*;

    fn trace_of(lines: &[&str]) -> Trace {
        let body: String = lines
            .iter()
            .enumerate()
            .map(|(i, l)| format!("I idx={i} {l}\n"))
            .collect();
        parse_trace(&body).unwrap()
    }

    #[test]
    fn bb_map_partitions_in_order() {
        let t = trace_of(&[
            "bb=0 op=add dst=r1 src=- mem=- lat=1",
            "bb=0 op=add dst=r2 src=- mem=- lat=1",
            "bb=1 op=add dst=r3 src=- mem=- lat=1",
        ]);
        let m = build_bb_map(&t);
        assert_eq!(m.entries[&0], vec![0, 1]);
        assert_eq!(m.entries[&1], vec![2]);
    }

    #[test]
    fn bb_map_empty_and_single_block() {
        assert!(build_bb_map(&parse_trace("").unwrap()).entries.is_empty());
        let t = trace_of(&[
            "bb=7 op=add dst=r1 src=- mem=- lat=1",
            "bb=7 op=add dst=r2 src=- mem=- lat=1",
        ]);
        let m = build_bb_map(&t);
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[&7], vec![0, 1]);
    }

    #[test]
    fn def_use_edge() {
        let t = trace_of(&[
            "bb=0 op=mov dst=r1 src=- mem=- lat=1",
            "bb=0 op=add dst=r2 src=r1 mem=- lat=1",
        ]);
        let g = build_depgraph(&t, false);
        assert_eq!(g.edges(), &[DepEdge { src: 0, dst: 1, weight: 1 }]);
    }

    #[test]
    fn last_writer_wins() {
        let t = trace_of(&[
            "bb=0 op=mov dst=r1 src=- mem=- lat=1",
            "bb=0 op=mov dst=r1 src=- mem=- lat=1",
            "bb=0 op=add dst=r2 src=r1 mem=- lat=1",
        ]);
        let g = build_depgraph(&t, false);
        assert_eq!(g.edges(), &[DepEdge { src: 1, dst: 2, weight: 1 }]);
    }

    #[test]
    fn diamond_edges_match_hand_enumeration() {
        let t = generate_trace(TracePattern::Diamond, 4, 0).unwrap();
        let g = build_depgraph(&t, false);
        let got: Vec<(usize, usize, u64)> =
            g.edges().iter().map(|e| (e.src, e.dst, e.weight)).collect();
        assert_eq!(got, vec![(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)]);
        assert_eq!(oracle::brute_force_dep_edges(&t, false, WeightRule::ConsumerLatency),
            g.edges().iter().map(|e| ((e.src, e.dst), e.weight)).collect());
    }

    #[test]
    fn live_in_registers_yield_no_edge() {
        let t = trace_of(&["bb=0 op=add dst=r2 src=r1 mem=- lat=1"]);
        let g = build_depgraph(&t, false);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn duplicate_sources_merge_by_summing() {
        let t = trace_of(&[
            "bb=0 op=mov dst=r1 src=- mem=- lat=1",
            "bb=0 op=add dst=r2 src=r1,r1 mem=- lat=3",
        ]);
        let g = build_depgraph(&t, false);
        assert_eq!(g.edges(), &[DepEdge { src: 0, dst: 1, weight: 6 }]);
    }

    #[test]
    fn store_load_dependency() {
        let t = trace_of(&[
            "bb=0 op=st dst=- src=r1 mem=0x1000 lat=1",
            "bb=0 op=st dst=- src=r2 mem=0x1000 lat=1",
            "bb=0 op=ld dst=r3 src=- mem=0x1000 lat=2",
            "bb=0 op=ld dst=r4 src=- mem=0x2000 lat=2",
        ]);
        let with_mem = build_depgraph(&t, true);
        assert_eq!(with_mem.edges(), &[DepEdge { src: 1, dst: 2, weight: 2 }]);
        let without = build_depgraph(&t, false);
        assert!(without.edges().is_empty());
    }

    #[test]
    fn unit_weight_rule() {
        let t = trace_of(&[
            "bb=0 op=mov dst=r1 src=- mem=- lat=9",
            "bb=0 op=add dst=r2 src=r1 mem=- lat=9",
        ]);
        let g = build_depgraph_with(&t, false, WeightRule::Unit);
        assert_eq!(g.edges()[0].weight, 1);
    }

    #[test]
    fn edge_list_format() {
        let t = generate_trace(TracePattern::Chain, 3, 0).unwrap();
        let g = build_depgraph(&t, false);
        assert_eq!(g.to_edge_list(), "NODES 3\nE 0 1 1\nE 1 2 1\n");
    }

    #[test]
    fn from_parts_rejects_backward_edge() {
        let mut edges = BTreeMap::new();
        edges.insert((1usize, 1usize), 1u64);
        assert!(DepGraph::from_parts(vec![1, 1], vec![None, None], edges).is_err());
    }

    proptest! {
        #[test]
        fn streaming_matches_quadratic_oracle(size in 1usize..60, seed in 0u64..500, mem_deps in any::<bool>()) {
            let t = generate_trace(TracePattern::RandomDag, size, seed).unwrap();
            let g = build_depgraph(&t, mem_deps);
            let got: BTreeMap<(usize, usize), u64> =
                g.edges().iter().map(|e| ((e.src, e.dst), e.weight)).collect();
            prop_assert_eq!(got, oracle::brute_force_dep_edges(&t, mem_deps, WeightRule::ConsumerLatency));
        }
    }

    proptest! {
        #[test]
        fn weight_conservation(size in 1usize..60, seed in 0u64..500) {
            let t = generate_trace(TracePattern::RandomDag, size, seed).unwrap();
            let g = build_depgraph(&t, true);
            // Under the consumer-latency rule, each matched dependency of j
            // contributes lat(j), so total weight = sum of lat(j) * dep count.
            let oracle_edges = oracle::brute_force_dep_edges(&t, true, WeightRule::Unit);
            let expected: u64 = oracle_edges
                .iter()
                .map(|(&(_, j), &multiplicity)| multiplicity * t.records[j].lat)
                .sum();
            prop_assert_eq!(g.total_weight(), expected);
        }
    }
}
