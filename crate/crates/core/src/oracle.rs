//! Independent reference implementations used to cross-check the production
//! paths in tests and the validation command. Each oracle deliberately takes
//! a different route than the code it checks: quadratic scans instead of
//! streaming maps, relaxation instead of SCC condensation, exhaustive
//! enumeration instead of greedy search.

use std::collections::BTreeMap;

use crate::depgraph::{DepGraph, WeightRule};
use crate::error::{Error, Result};
use crate::mapper::{Core, MappingAssignment, MeshTopology};
use crate::mlgraph::{MultiLayerGraph, ProcessGraph};
use crate::partitioner::{compute_quality, ClusterId, PartitionState};
use crate::simkernel::{simulate, SimConfig};
use crate::trace::Trace;

/// Quadratic def-use scan: for every record and every source register, walk
/// backwards to the nearest writer; likewise for loads against stores on the
/// same address. Returns the merged (src, dst) -> weight map.
pub fn brute_force_dep_edges(
    trace: &Trace,
    include_mem_deps: bool,
    rule: WeightRule,
) -> BTreeMap<(usize, usize), u64> {
    let recs = &trace.records;
    let mut edges: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for j in 0..recs.len() {
        let w = match rule {
            WeightRule::ConsumerLatency => recs[j].lat,
            WeightRule::Unit => 1,
        };
        for src in &recs[j].srcs {
            for i in (0..j).rev() {
                if recs[i].dst.as_ref() == Some(src) {
                    *edges.entry((i, j)).or_insert(0) += w;
                    break;
                }
            }
        }
        if include_mem_deps && recs[j].opcode.starts_with("ld") {
            if let Some(addr) = recs[j].mem {
                for i in (0..j).rev() {
                    if recs[i].opcode.starts_with("st") && recs[i].mem == Some(addr) {
                        *edges.entry((i, j)).or_insert(0) += w;
                        break;
                    }
                }
            }
        }
    }
    edges
}

/// Cluster depths by repeated relaxation over the raw quotient edges (no SCC
/// pass, so only valid for acyclic quotients, which every non-overlapping
/// partition of a DAG produces).
pub fn relaxation_depths(dep: &DepGraph, s: &PartitionState) -> BTreeMap<ClusterId, u64> {
    let ids: Vec<ClusterId> = s.cluster_ids().collect();
    let mut qedges: Vec<(ClusterId, ClusterId)> = Vec::new();
    for e in dep.edges() {
        if s.share_cluster(e.src, e.dst) {
            continue;
        }
        for &cu in s.clusters_of(e.src) {
            for &cv in s.clusters_of(e.dst) {
                if cu != cv {
                    qedges.push((cu, cv));
                }
            }
        }
    }
    let mut depth: BTreeMap<ClusterId, u64> = ids.iter().map(|&c| (c, 0)).collect();
    // |C| rounds of Bellman-Ford-style longest-path relaxation.
    for _ in 0..ids.len() {
        let mut changed = false;
        for &(u, v) in &qedges {
            let candidate = depth[&u] + 1;
            if candidate > depth[&v] {
                depth.insert(v, candidate);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    depth
}

/// Exhaustive search over all partitions and all sets of single-node
/// replications on top of each, returning the minimal objective. Exponential
/// twice over; guarded by an evaluation budget.
pub fn exhaustive_overlap_optimum(dep: &DepGraph, n: u32, max_nodes: usize) -> Result<u64> {
    let nodes = dep.node_count();
    if nodes > max_nodes || nodes > 5 {
        return Err(Error::Refused(format!(
            "overlap enumeration is limited to min(5, {max_nodes}) nodes"
        )));
    }
    if nodes == 0 {
        return Ok(0);
    }

    let mut best = u64::MAX;
    let mut rgs: Vec<ClusterId> = vec![0; nodes];
    enumerate_rgs(&mut rgs, 1, 0, &mut |assign| {
        let base = PartitionState::from_assignment(assign);
        let clusters: Vec<ClusterId> = base.cluster_ids().collect();
        // All (node, foreign cluster) replication options for this partition.
        let mut options: Vec<(usize, ClusterId)> = Vec::new();
        for node in 0..nodes {
            for &c in &clusters {
                if !base.clusters_of(node).contains(&c) {
                    options.push((node, c));
                }
            }
        }
        for mask in 0u64..(1u64 << options.len()) {
            let mut state = base.clone();
            for (bit, &(node, c)) in options.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    state.replicate(node, c);
                }
            }
            let q = compute_quality(dep, &state, n).expect("covering state");
            best = best.min(q.t_scaled);
        }
    });
    Ok(best)
}

fn enumerate_rgs(
    rgs: &mut Vec<ClusterId>,
    pos: usize,
    max_used: ClusterId,
    visit: &mut impl FnMut(&[ClusterId]),
) {
    if pos == rgs.len() {
        visit(rgs);
        return;
    }
    for c in 0..=max_used + 1 {
        rgs[pos] = c;
        enumerate_rgs(rgs, pos + 1, max_used.max(c), visit);
    }
}

/// Exhaustively place every process on every core and return the minimal
/// simulated makespan with one placement achieving it.
pub fn exhaustive_placement(
    pg: &ProcessGraph,
    mlg: &MultiLayerGraph,
    config: &SimConfig,
) -> Result<(u64, Vec<Core>)> {
    let cores: Vec<Core> = config.mesh.cores().collect();
    let p = pg.process_count;
    if p == 0 {
        return Err(Error::InvalidArgument("no processes".into()));
    }
    let states = (cores.len() as u128).checked_pow(p as u32);
    if states.is_none_or(|s| s > 1_000_000) {
        return Err(Error::Refused(
            "placement enumeration exceeds 1e6 states".into(),
        ));
    }

    let mut best: Option<(u64, Vec<Core>)> = None;
    let mut choice = vec![0usize; p];
    loop {
        let placement: Vec<Core> = choice.iter().map(|&i| cores[i]).collect();
        let assignment = MappingAssignment::from_placement(placement.clone(), pg, &config.mesh)?;
        let r = simulate(pg, mlg, &assignment, config)?;
        if best.as_ref().is_none_or(|(m, _)| r.makespan < *m) {
            best = Some((r.makespan, placement));
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == p {
                let (m, pl) = best.expect("at least one placement");
                return Ok((m, pl));
            }
            choice[pos] += 1;
            if choice[pos] < cores.len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// The largest minimum pairwise hop distance achievable for `k` processes on
/// the mesh, by exhaustive placement. Used to check the spreading rule.
pub fn max_min_pairwise_hop(mesh: &MeshTopology, k: usize) -> Result<u64> {
    let cores: Vec<Core> = mesh.cores().collect();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two processes".into()));
    }
    let states = (cores.len() as u128).checked_pow(k as u32);
    if states.is_none_or(|s| s > 1_000_000) {
        return Err(Error::Refused(
            "placement enumeration exceeds 1e6 states".into(),
        ));
    }
    let mut best = 0u64;
    let mut choice = vec![0usize; k];
    loop {
        let mut min_hop = u64::MAX;
        for a in 0..k {
            for b in (a + 1)..k {
                min_hop = min_hop.min(mesh.hop(cores[choice[a]], cores[choice[b]]));
            }
        }
        best = best.max(min_hop);
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(best);
            }
            choice[pos] += 1;
            if choice[pos] < cores.len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::build_depgraph;
    use crate::partitioner::{brute_force_partition, greedy_partition_best_of};
    use crate::trace::{generate_trace, TracePattern};

    #[test]
    fn overlap_enumeration_confirms_diamond_optimum() {
        let dep = build_depgraph(&generate_trace(TracePattern::Diamond, 4, 0).unwrap(), false);
        let best = exhaustive_overlap_optimum(&dep, 4, 5).unwrap();
        assert_eq!(best, 4); // T = 1: strictly below the disjoint optimum
        let (_, disjoint) = brute_force_partition(&dep, 4, 8).unwrap();
        assert!(best < disjoint.t_scaled);
        let (_, greedy) = greedy_partition_best_of(&dep, 4, 0, 8, true).unwrap();
        assert_eq!(greedy.t_scaled, best);
    }

    #[test]
    fn max_min_hop_on_4x4_is_diameter_for_two() {
        let mesh = MeshTopology::new(4, 4).unwrap();
        assert_eq!(max_min_pairwise_hop(&mesh, 2).unwrap(), 6);
    }
}
