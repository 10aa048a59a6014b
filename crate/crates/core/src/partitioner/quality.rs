//! Evaluation of the quality function on a partition state: per-cluster work
//! and cut weights, cluster depths in the quotient DAG, and the exact scaled
//! objective.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::depgraph::DepGraph;
use crate::error::{Error, Result};
use crate::partitioner::{ClusterId, PartitionState};

/// Per-cluster quantities entering the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClusterStats {
    /// W_u: summed weight of edges with both endpoints hosted by the cluster.
    pub intra_weight: u64,
    /// S_u: summed weight of crossing edges adjacent to the cluster.
    pub cut_weight: u64,
    /// d_u: longest-path level in the quotient DAG of crossing edges.
    pub depth: u64,
}

/// The objective decomposition. `t_scaled = n * w_seq + w_par + w_c` holds
/// exactly; `t()` divides back out for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QualityBreakdown {
    pub w_seq: u64,
    pub w_par: u64,
    pub w_c: u64,
    pub n: u32,
    pub t_scaled: u64,
    pub total_w: u64,
}

impl QualityBreakdown {
    pub fn t(&self) -> f64 {
        self.t_scaled as f64 / self.n as f64
    }
}

/// Quotient-graph edges between clusters induced by crossing layer-0 edges.
/// An edge crosses when its endpoints share no hosting cluster; it then links
/// every hosting cluster of the source to every hosting cluster of the
/// destination.
fn quotient_edges(dep: &DepGraph, s: &PartitionState) -> BTreeMap<(ClusterId, ClusterId), u64> {
    let mut q = BTreeMap::new();
    for e in dep.edges() {
        if s.share_cluster(e.src, e.dst) {
            continue;
        }
        for &cu in s.clusters_of(e.src) {
            for &cv in s.clusters_of(e.dst) {
                if cu != cv {
                    *q.entry((cu, cv)).or_insert(0) += e.weight;
                }
            }
        }
    }
    q
}

/// Strongly connected components over the cluster quotient graph, returned as
/// a component index per cluster. Iterative Tarjan; overlap can in principle
/// induce cycles even though the underlying graph is acyclic.
fn condense(
    ids: &[ClusterId],
    adj: &BTreeMap<ClusterId, Vec<ClusterId>>,
) -> BTreeMap<ClusterId, usize> {
    let index_of: BTreeMap<ClusterId, usize> = ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = ids.len();
    let mut order = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next_order = 0usize;
    let mut comp_count = 0usize;

    for start in 0..n {
        if order[start] != usize::MAX {
            continue;
        }
        // Explicit DFS stack of (node, next-child position).
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&(v, child)) = call.last() {
            if order[v] == usize::MAX {
                order[v] = next_order;
                low[v] = next_order;
                next_order += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let succs = adj.get(&ids[v]).map(Vec::as_slice).unwrap_or(&[]);
            if child < succs.len() {
                call.last_mut().expect("frame present").1 += 1;
                let w = index_of[&succs[child]];
                if order[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(order[w]);
                }
            } else {
                if low[v] == order[v] {
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp[w] = comp_count;
                        if w == v {
                            break;
                        }
                    }
                    comp_count += 1;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }

    ids.iter()
        .enumerate()
        .map(|(i, &c)| (c, comp[i]))
        .collect()
}

/// Cluster depths: longest-path levels from in-degree-0 components in the
/// condensed quotient DAG. Clusters untouched by crossing edges sit at 0.
pub fn compute_depths(dep: &DepGraph, s: &PartitionState) -> BTreeMap<ClusterId, u64> {
    depth_and_component(dep, s)
        .into_iter()
        .map(|(c, (d, _))| (c, d))
        .collect()
}

/// Depth plus the strongly-connected component each cluster belongs to in the
/// quotient graph. Clusters sharing a component are mutually dependent and
/// can never execute in parallel.
fn depth_and_component(dep: &DepGraph, s: &PartitionState) -> BTreeMap<ClusterId, (u64, usize)> {
    let ids: Vec<ClusterId> = s.cluster_ids().collect();
    let q = quotient_edges(dep, s);

    let mut adj: BTreeMap<ClusterId, Vec<ClusterId>> = BTreeMap::new();
    for &(u, v) in q.keys() {
        adj.entry(u).or_default().push(v);
    }
    let comp_of = condense(&ids, &adj);
    let comp_count = comp_of.values().copied().max().map_or(0, |m| m + 1);

    // Longest path over the condensation via Kahn ordering.
    let mut cadj: Vec<Vec<usize>> = vec![Vec::new(); comp_count];
    let mut indeg = vec![0usize; comp_count];
    for &(u, v) in q.keys() {
        let (cu, cv) = (comp_of[&u], comp_of[&v]);
        if cu != cv {
            cadj[cu].push(cv);
        }
    }
    for list in &mut cadj {
        list.sort_unstable();
        list.dedup();
    }
    for list in &cadj {
        for &v in list {
            indeg[v] += 1;
        }
    }
    let mut depth = vec![0u64; comp_count];
    let mut ready: Vec<usize> = (0..comp_count).filter(|&c| indeg[c] == 0).collect();
    while let Some(c) = ready.pop() {
        for &v in &cadj[c] {
            depth[v] = depth[v].max(depth[c] + 1);
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(v);
            }
        }
    }

    ids.iter()
        .map(|&c| {
            let comp = comp_of[&c];
            (c, (depth[comp], comp))
        })
        .collect()
}

fn accumulate_weights(
    dep: &DepGraph,
    s: &PartitionState,
) -> (BTreeMap<ClusterId, u64>, BTreeMap<ClusterId, u64>) {
    let mut intra: BTreeMap<ClusterId, u64> = s.cluster_ids().map(|c| (c, 0)).collect();
    let mut cut: BTreeMap<ClusterId, u64> = s.cluster_ids().map(|c| (c, 0)).collect();
    for e in dep.edges() {
        let src_hosts = s.clusters_of(e.src);
        let dst_hosts = s.clusters_of(e.dst);
        if s.share_cluster(e.src, e.dst) {
            for c in src_hosts.intersection(dst_hosts) {
                *intra.get_mut(c).expect("live cluster") += e.weight;
            }
        } else {
            for c in src_hosts.union(dst_hosts) {
                *cut.get_mut(c).expect("live cluster") += e.weight;
            }
        }
    }
    (intra, cut)
}

/// W_u, S_u and d_u for every live cluster.
pub fn cluster_stats(dep: &DepGraph, s: &PartitionState) -> BTreeMap<ClusterId, ClusterStats> {
    let meta = depth_and_component(dep, s);
    let (intra, cut) = accumulate_weights(dep, s);
    meta.into_iter()
        .map(|(c, (depth, _))| {
            (
                c,
                ClusterStats {
                    intra_weight: intra[&c],
                    cut_weight: cut[&c],
                    depth,
                },
            )
        })
        .collect()
}

/// Evaluate the objective for a state. A cluster's work counts as parallel
/// when another cluster sits at the same depth in a different strongly
/// connected component of the quotient graph (mutually dependent clusters
/// serialize on each other and stay sequential); otherwise it is sequential.
pub fn compute_quality(dep: &DepGraph, s: &PartitionState, n: u32) -> Result<QualityBreakdown> {
    if n == 0 {
        return Err(Error::InvalidArgument("core count N must be >= 1".into()));
    }
    if s.node_count() != dep.node_count() {
        return Err(Error::Structure(format!(
            "partition covers {} nodes, graph has {}",
            s.node_count(),
            dep.node_count()
        )));
    }

    let meta = depth_and_component(dep, s);
    let (intra, cut) = accumulate_weights(dep, s);

    // Distinct quotient components present at each depth.
    let mut components_at: BTreeMap<u64, std::collections::BTreeSet<usize>> = BTreeMap::new();
    for &(depth, comp) in meta.values() {
        components_at.entry(depth).or_default().insert(comp);
    }

    let mut w_seq = 0u64;
    let mut w_par = 0u64;
    let mut w_c = 0u64;
    for (c, &(depth, comp)) in &meta {
        let parallel = components_at[&depth].iter().any(|&other| other != comp);
        if parallel {
            w_par += intra[c];
        } else {
            w_seq += intra[c];
        }
        w_c += cut[c];
    }

    Ok(QualityBreakdown {
        w_seq,
        w_par,
        w_c,
        n,
        t_scaled: n as u64 * w_seq + w_par + w_c,
        total_w: dep.total_weight(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::build_depgraph;
    use crate::oracle;
    use crate::trace::{generate_trace, TracePattern};
    use std::collections::BTreeSet;

    fn diamond() -> DepGraph {
        build_depgraph(&generate_trace(TracePattern::Diamond, 4, 0).unwrap(), false)
    }

    fn chain4() -> DepGraph {
        build_depgraph(&generate_trace(TracePattern::Chain, 4, 0).unwrap(), false)
    }

    #[test]
    fn chain_split_depths() {
        let dep = chain4();
        let s = PartitionState::from_assignment(&[0, 0, 1, 1]);
        let d = compute_depths(&dep, &s);
        assert_eq!(d[&0], 0);
        assert_eq!(d[&1], 1);
        assert_eq!(d, oracle::relaxation_depths(&dep, &s));
    }

    #[test]
    fn diamond_singleton_depths() {
        let dep = diamond();
        let s = PartitionState::singletons(4);
        let d = compute_depths(&dep, &s);
        assert_eq!(
            d.values().copied().collect::<Vec<_>>(),
            vec![0, 1, 1, 2]
        );
        assert_eq!(d, oracle::relaxation_depths(&dep, &s));
    }

    #[test]
    fn lone_cluster_depth_zero() {
        let dep = diamond();
        let s = PartitionState::single_cluster(4);
        let d = compute_depths(&dep, &s);
        assert_eq!(d.len(), 1);
        assert_eq!(d[&0], 0);
    }

    #[test]
    fn single_cluster_quality_is_total_weight() {
        let dep = diamond();
        let q = compute_quality(&dep, &PartitionState::single_cluster(4), 4).unwrap();
        assert_eq!(q.w_seq, dep.total_weight());
        assert_eq!(q.w_par, 0);
        assert_eq!(q.w_c, 0);
        assert_eq!(q.t_scaled, 4 * dep.total_weight());
    }

    #[test]
    fn diamond_singletons_quality() {
        let dep = diamond();
        let q = compute_quality(&dep, &PartitionState::singletons(4), 4).unwrap();
        assert_eq!((q.w_seq, q.w_par, q.w_c), (0, 0, 8));
        assert_eq!(q.t_scaled, 8);
        assert!((q.t() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diamond_overlap_quality() {
        let dep = diamond();
        let mut clusters = BTreeMap::new();
        clusters.insert(0, BTreeSet::from([0usize, 1, 3]));
        clusters.insert(1, BTreeSet::from([0usize, 2, 3]));
        let s = PartitionState::from_clusters(4, clusters).unwrap();
        let q = compute_quality(&dep, &s, 4).unwrap();
        assert_eq!((q.w_seq, q.w_par, q.w_c), (0, 4, 0));
        assert_eq!(q.t_scaled, 4);
        assert!((q.t() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn n_zero_rejected() {
        let dep = diamond();
        assert!(compute_quality(&dep, &PartitionState::singletons(4), 0).is_err());
    }

    #[test]
    fn identity_and_decomposition_on_random_states() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for seed in 0..40u64 {
            let size = rng.random_range(2..40);
            let t = generate_trace(TracePattern::RandomDag, size, seed).unwrap();
            let dep = build_depgraph(&t, false);
            let k = rng.random_range(1..=size as u32);
            let assign: Vec<u32> = (0..size).map(|_| rng.random_range(0..k)).collect();
            let mut s = PartitionState::from_assignment(&assign);
            // Sprinkle a few replications to exercise the overlapping path.
            for _ in 0..3 {
                let node = rng.random_range(0..size);
                let c = assign[rng.random_range(0..size)];
                s.replicate(node, c);
            }
            for n in [1u32, 2, 4, 7] {
                let q = compute_quality(&dep, &s, n).unwrap();
                assert_eq!(q.t_scaled, n as u64 * q.w_seq + q.w_par + q.w_c);
                let stats = cluster_stats(&dep, &s);
                let sum_wu: u64 = stats.values().map(|st| st.intra_weight).sum();
                assert_eq!(q.w_seq + q.w_par, sum_wu);
            }
        }
    }
}
