//! Partitioning of the application layer into (possibly overlapping) clusters
//! by minimizing the quality function
//!
//! ```text
//! T = W_seq + W_par / N + W_c / N
//! ```
//!
//! where `W_seq` is work in clusters alone at their depth, `W_par` is work in
//! clusters sharing a depth with another cluster, `W_c` is the cut weight
//! adjacent to all clusters, and `N` is the number of available cores. All
//! comparisons use the exact integer `T_scaled = N*W_seq + W_par + W_c`.

mod brute;
mod greedy;
mod quality;

pub use brute::{brute_force_partition, DEFAULT_ORACLE_LIMIT};
pub use greedy::{greedy_partition, greedy_partition_best_of};
pub use quality::{cluster_stats, compute_depths, compute_quality, ClusterStats, QualityBreakdown};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type ClusterId = u32;

/// A mapping from nodes to one or more clusters. Every node belongs to at
/// least one cluster; a node hosted by several clusters is replicated
/// (overlap). Every referenced cluster is live and non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionState {
    node_clusters: Vec<BTreeSet<ClusterId>>,
    clusters: BTreeMap<ClusterId, BTreeSet<usize>>,
}

impl PartitionState {
    /// Each node in its own cluster, cluster id = node index.
    pub fn singletons(node_count: usize) -> PartitionState {
        let mut node_clusters = Vec::with_capacity(node_count);
        let mut clusters = BTreeMap::new();
        for i in 0..node_count {
            let c = i as ClusterId;
            node_clusters.push(BTreeSet::from([c]));
            clusters.insert(c, BTreeSet::from([i]));
        }
        PartitionState {
            node_clusters,
            clusters,
        }
    }

    /// All nodes in one cluster (id 0). Empty state for zero nodes.
    pub fn single_cluster(node_count: usize) -> PartitionState {
        if node_count == 0 {
            return PartitionState {
                node_clusters: vec![],
                clusters: BTreeMap::new(),
            };
        }
        PartitionState {
            node_clusters: vec![BTreeSet::from([0]); node_count],
            clusters: BTreeMap::from([(0, (0..node_count).collect())]),
        }
    }

    /// Non-overlapping state from a per-node cluster assignment.
    pub fn from_assignment(assign: &[ClusterId]) -> PartitionState {
        let mut node_clusters = Vec::with_capacity(assign.len());
        let mut clusters: BTreeMap<ClusterId, BTreeSet<usize>> = BTreeMap::new();
        for (node, &c) in assign.iter().enumerate() {
            node_clusters.push(BTreeSet::from([c]));
            clusters.entry(c).or_default().insert(node);
        }
        PartitionState {
            node_clusters,
            clusters,
        }
    }

    /// General constructor from explicit cluster contents. Checks coverage of
    /// `0..node_count` and that no cluster is empty.
    pub fn from_clusters(
        node_count: usize,
        cluster_members: BTreeMap<ClusterId, BTreeSet<usize>>,
    ) -> Result<PartitionState> {
        let mut node_clusters = vec![BTreeSet::new(); node_count];
        for (&c, members) in &cluster_members {
            if members.is_empty() {
                return Err(Error::Structure(format!("cluster {c} is empty")));
            }
            for &n in members {
                if n >= node_count {
                    return Err(Error::Structure(format!(
                        "cluster {c} references node {n} outside 0..{node_count}"
                    )));
                }
                node_clusters[n].insert(c);
            }
        }
        if let Some(n) = node_clusters.iter().position(|s| s.is_empty()) {
            return Err(Error::Structure(format!("node {n} belongs to no cluster")));
        }
        Ok(PartitionState {
            node_clusters,
            clusters: cluster_members,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_clusters.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_ids(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.clusters.keys().copied()
    }

    pub fn members(&self, cluster: ClusterId) -> Option<&BTreeSet<usize>> {
        self.clusters.get(&cluster)
    }

    pub fn clusters_of(&self, node: usize) -> &BTreeSet<ClusterId> {
        &self.node_clusters[node]
    }

    /// Whether two nodes share at least one hosting cluster.
    pub fn share_cluster(&self, a: usize, b: usize) -> bool {
        let (small, large) = if self.node_clusters[a].len() <= self.node_clusters[b].len() {
            (&self.node_clusters[a], &self.node_clusters[b])
        } else {
            (&self.node_clusters[b], &self.node_clusters[a])
        };
        small.iter().any(|c| large.contains(c))
    }

    /// Number of nodes hosted by more than one cluster.
    pub fn overlap_node_count(&self) -> usize {
        self.node_clusters.iter().filter(|s| s.len() > 1).count()
    }

    pub fn is_overlapping(&self) -> bool {
        self.overlap_node_count() > 0
    }

    /// Add `node` to `cluster` (replication). No-op if already a member.
    pub fn replicate(&mut self, node: usize, cluster: ClusterId) {
        if self.node_clusters[node].insert(cluster) {
            self.clusters.entry(cluster).or_default().insert(node);
        }
    }

    /// Undo a replication; refuses to remove the node's last membership.
    pub fn remove_membership(&mut self, node: usize, cluster: ClusterId) -> Result<()> {
        if self.node_clusters[node].len() <= 1 {
            return Err(Error::Structure(format!(
                "node {node} would be left uncovered"
            )));
        }
        self.node_clusters[node].remove(&cluster);
        if let Some(members) = self.clusters.get_mut(&cluster) {
            members.remove(&node);
            if members.is_empty() {
                self.clusters.remove(&cluster);
            }
        }
        Ok(())
    }

    /// Renumber clusters densely as 0..k-1 in ascending order of their
    /// current ids. Process ids derived downstream equal these ranks.
    pub fn canonicalized(&self) -> PartitionState {
        let remap: BTreeMap<ClusterId, ClusterId> = self
            .clusters
            .keys()
            .enumerate()
            .map(|(rank, &c)| (c, rank as ClusterId))
            .collect();
        let clusters = self
            .clusters
            .iter()
            .map(|(c, members)| (remap[c], members.clone()))
            .collect();
        let node_clusters = self
            .node_clusters
            .iter()
            .map(|set| set.iter().map(|c| remap[c]).collect())
            .collect();
        PartitionState {
            node_clusters,
            clusters,
        }
    }

    /// Sizes of clusters in ascending cluster-id order.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.values().map(|m| m.len()).collect()
    }
}

/// Text form: one `C <cluster_id> : <node>[,<node>]*` line per cluster.
pub fn format_partition(state: &PartitionState) -> String {
    let mut out = String::new();
    for (c, members) in &state.clusters {
        let nodes: Vec<String> = members.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "C {c} : {}", nodes.join(","));
    }
    out
}

/// Parse the partition file format back into a state covering
/// `0..expected_nodes`.
pub fn parse_partition(text: &str, expected_nodes: usize) -> Result<PartitionState> {
    let mut cluster_members: BTreeMap<ClusterId, BTreeSet<usize>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rest = line.strip_prefix("C ").ok_or_else(|| Error::Parse {
            line: lineno,
            reason: "expected 'C <cluster> : <node>[,<node>]*'".into(),
        })?;
        let (id_part, nodes_part) = rest.split_once(" : ").ok_or_else(|| Error::Parse {
            line: lineno,
            reason: "missing ' : ' separator".into(),
        })?;
        let c: ClusterId = id_part.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("bad cluster id '{id_part}'"),
        })?;
        let members = cluster_members.entry(c).or_default();
        for tok in nodes_part.split(',') {
            let n: usize = tok.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad node id '{tok}'"),
            })?;
            members.insert(n);
        }
    }
    PartitionState::from_clusters(expected_nodes, cluster_members)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_and_single_cluster_shapes() {
        let s = PartitionState::singletons(3);
        assert_eq!(s.cluster_count(), 3);
        assert_eq!(s.clusters_of(2).iter().copied().collect::<Vec<_>>(), vec![2]);
        let one = PartitionState::single_cluster(3);
        assert_eq!(one.cluster_count(), 1);
        assert!(!one.is_overlapping());
    }

    #[test]
    fn replication_and_removal() {
        let mut s = PartitionState::from_assignment(&[0, 0, 1]);
        s.replicate(2, 0);
        assert!(s.is_overlapping());
        assert_eq!(s.overlap_node_count(), 1);
        s.remove_membership(2, 0).unwrap();
        assert!(!s.is_overlapping());
        assert!(s.remove_membership(2, 1).is_err());
    }

    #[test]
    fn from_clusters_requires_coverage() {
        let mut m = BTreeMap::new();
        m.insert(0, BTreeSet::from([0usize]));
        assert!(PartitionState::from_clusters(2, m).is_err());
    }

    #[test]
    fn partition_file_roundtrip() {
        let mut s = PartitionState::from_assignment(&[0, 0, 1, 1]);
        s.replicate(2, 0);
        let text = format_partition(&s);
        assert_eq!(text, "C 0 : 0,1,2\nC 1 : 2,3\n");
        let back = parse_partition(&text, 4).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn canonicalize_renumbers_densely() {
        let mut m = BTreeMap::new();
        m.insert(5, BTreeSet::from([0usize]));
        m.insert(9, BTreeSet::from([1usize]));
        let s = PartitionState::from_clusters(2, m).unwrap();
        let c = s.canonicalized();
        assert_eq!(c.cluster_ids().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(c.clusters_of(1).iter().copied().collect::<Vec<_>>(), vec![1]);
    }
}
