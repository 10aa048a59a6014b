//! Exhaustive non-overlapping oracle: enumerate every set partition of the
//! node set and keep the objective minimizer. Exponential (Bell numbers), so
//! it refuses graphs above a caller-supplied node limit.

use crate::depgraph::DepGraph;
use crate::error::{Error, Result};
use crate::partitioner::{compute_quality, ClusterId, PartitionState, QualityBreakdown};

/// Default node limit for the exhaustive search (Bell(8) = 4140 states).
pub const DEFAULT_ORACLE_LIMIT: usize = 8;

/// Enumerate all set partitions (restricted-growth strings in lexicographic
/// order) and return a minimizer of the objective. Ties break toward fewer
/// clusters, then toward the lexicographically smallest membership string.
pub fn brute_force_partition(
    dep: &DepGraph,
    n: u32,
    max_nodes: usize,
) -> Result<(PartitionState, QualityBreakdown)> {
    let nodes = dep.node_count();
    if nodes > max_nodes {
        return Err(Error::Refused(format!(
            "graph has {nodes} nodes; exhaustive search is limited to {max_nodes}"
        )));
    }
    if nodes == 0 {
        let state = PartitionState::from_assignment(&[]);
        let q = compute_quality(dep, &state, n)?;
        return Ok((state, q));
    }

    let mut rgs: Vec<ClusterId> = vec![0; nodes];
    let mut best: Option<(Vec<ClusterId>, usize, QualityBreakdown)> = None;

    // Depth-first over restricted-growth strings: position i may use any
    // cluster id up to one past the running maximum.
    fn walk(
        pos: usize,
        max_used: ClusterId,
        rgs: &mut Vec<ClusterId>,
        dep: &DepGraph,
        n: u32,
        best: &mut Option<(Vec<ClusterId>, usize, QualityBreakdown)>,
    ) -> Result<()> {
        if pos == rgs.len() {
            let state = PartitionState::from_assignment(rgs);
            let q = compute_quality(dep, &state, n)?;
            let k = state.cluster_count();
            let replace = match best {
                None => true,
                Some((_, bk, bq)) => {
                    q.t_scaled < bq.t_scaled || (q.t_scaled == bq.t_scaled && k < *bk)
                }
            };
            if replace {
                *best = Some((rgs.clone(), k, q));
            }
            return Ok(());
        }
        for c in 0..=max_used + 1 {
            rgs[pos] = c;
            walk(pos + 1, max_used.max(c), rgs, dep, n, best)?;
        }
        Ok(())
    }

    // Node 0 is pinned to cluster 0; successors range over 0..=max+1.
    rgs[0] = 0;
    walk(1, 0, &mut rgs, dep, n, &mut best)?;

    let (assign, _, q) = best.expect("at least the single-cluster partition");
    Ok((PartitionState::from_assignment(&assign), q))
}
