//! Cluster layout, the replication ring, and reroute planning.
//!
//! All functions here are pure: they take immutable snapshots and produce
//! new plan values. The control plane adopts a plan atomically; nothing in
//! this module holds state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("node {0} outside cluster bounds ({1} instances x {2} stages)")]
    NodeOutOfBounds(NodeId, u32, u32),
    #[error("cluster needs at least 2 instances, got {0}")]
    TooFewInstances(u32),
    #[error("cluster needs at least 1 stage, got {0}")]
    NoStages(u32),
    #[error("missing endpoint for node {0}")]
    MissingEndpoint(NodeId),
    #[error("unexpected endpoint for node {0} outside cluster bounds")]
    UnknownEndpoint(NodeId),
    #[error("kv_capacity_blocks must be >= 1")]
    NoKvCapacity,
    #[error("empty cluster")]
    EmptyCluster,
    #[error("malformed node id {0:?}, expected \"instance:stage\"")]
    BadNodeId(String),
}

/// One serving node, addressed by its (instance, stage) coordinate within
/// the load-balancing group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub instance: u32,
    pub stage: u32,
}

impl NodeId {
    pub fn new(instance: u32, stage: u32) -> Self {
        Self { instance, stage }
    }
}

impl fmt::Display for NodeId {
    // "i:s" is the canonical form, also used as JSON map key.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.instance, self.stage)
    }
}

impl FromStr for NodeId {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (i, st) = s
            .split_once(':')
            .ok_or_else(|| TopologyError::BadNodeId(s.to_string()))?;
        let instance = i
            .parse()
            .map_err(|_| TopologyError::BadNodeId(s.to_string()))?;
        let stage = st
            .parse()
            .map_err(|_| TopologyError::BadNodeId(s.to_string()))?;
        Ok(Self { instance, stage })
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Static description of the load-balancing group: `instances` pipeline
/// replicas, each `stages` deep, plus per-node endpoints and KV budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub instances: u32,
    pub stages: u32,
    pub block_size_tokens: u32,
    pub kv_capacity_blocks: u32,
    #[serde(default)]
    pub endpoints: BTreeMap<NodeId, String>,
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.instances < 2 {
            return Err(TopologyError::TooFewInstances(self.instances));
        }
        if self.stages < 1 {
            return Err(TopologyError::NoStages(self.stages));
        }
        if self.kv_capacity_blocks < 1 {
            return Err(TopologyError::NoKvCapacity);
        }
        for node in self.all_nodes() {
            if !self.endpoints.contains_key(&node) {
                return Err(TopologyError::MissingEndpoint(node));
            }
        }
        for node in self.endpoints.keys() {
            if !self.contains(*node) {
                return Err(TopologyError::UnknownEndpoint(*node));
            }
        }
        Ok(())
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.instance < self.instances && node.stage < self.stages
    }

    pub fn all_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.instances)
            .flat_map(move |i| (0..self.stages).map(move |s| NodeId::new(i, s)))
    }

    pub fn endpoint(&self, node: NodeId) -> Result<&str, TopologyError> {
        self.endpoints
            .get(&node)
            .map(String::as_str)
            .ok_or(TopologyError::MissingEndpoint(node))
    }

    /// The full path of instance `i`: one node per stage, stages ascending.
    pub fn instance_path(&self, instance: u32) -> Vec<NodeId> {
        (0..self.stages).map(|s| NodeId::new(instance, s)).collect()
    }
}

/// An ordered route through one node per stage. Requests assigned to this
/// pipeline traverse `path` in stage order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub path: Vec<NodeId>,
    pub epoch: u64,
    pub home_instance: u32,
}

impl PipelineSpec {
    pub fn for_instance(spec: &ClusterSpec, instance: u32, epoch: u64) -> Self {
        Self {
            path: spec.instance_path(instance),
            epoch,
            home_instance: instance,
        }
    }

    pub fn validate(&self) -> bool {
        self.path
            .iter()
            .enumerate()
            .all(|(k, n)| n.stage == k as u32)
    }

    pub fn stage_node(&self, stage: u32) -> Option<NodeId> {
        self.path.get(stage as usize).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.path.contains(&node)
    }
}

/// Where each node ships its completed KV blocks, after excluding failed
/// nodes and reroute donors from the ring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    /// source -> target, same stage, different instance.
    pub targets: BTreeMap<NodeId, NodeId>,
    /// Nodes failed or currently absorbing rerouted traffic. They neither
    /// send nor receive replicas.
    pub excluded: BTreeSet<NodeId>,
    /// Healthy nodes with no healthy same-stage peer: replication disabled,
    /// not an error.
    pub disabled: BTreeSet<NodeId>,
}

impl ReplicationPlan {
    pub fn target_of(&self, node: NodeId) -> Option<NodeId> {
        self.targets.get(&node).copied()
    }
}

/// Next node around the same-stage ring: instance + 1 mod I, stage fixed.
pub fn ring_successor(node: NodeId, spec: &ClusterSpec) -> Result<NodeId, TopologyError> {
    if !spec.contains(node) {
        return Err(TopologyError::NodeOutOfBounds(
            node,
            spec.instances,
            spec.stages,
        ));
    }
    Ok(NodeId::new(
        (node.instance + 1) % spec.instances,
        node.stage,
    ))
}

/// Walk the ring from `node` until a node outside `excluded` is found.
/// Returns `None` when the walk comes back around (no healthy peer).
fn ring_walk(
    node: NodeId,
    spec: &ClusterSpec,
    excluded: &BTreeSet<NodeId>,
) -> Result<Option<NodeId>, TopologyError> {
    let mut cur = ring_successor(node, spec)?;
    while cur != node {
        if !excluded.contains(&cur) {
            return Ok(Some(cur));
        }
        cur = ring_successor(cur, spec)?;
    }
    Ok(None)
}

/// Compute replication targets for every node outside `excluded`.
///
/// Each source maps to the first non-excluded node reached by repeated
/// `ring_successor`. Sources whose walk finds no peer are marked disabled.
pub fn plan_replication_targets(
    spec: &ClusterSpec,
    excluded: &BTreeSet<NodeId>,
) -> Result<ReplicationPlan, TopologyError> {
    if spec.instances == 0 || spec.stages == 0 {
        return Err(TopologyError::EmptyCluster);
    }
    for node in excluded {
        if !spec.contains(*node) {
            return Err(TopologyError::NodeOutOfBounds(
                *node,
                spec.instances,
                spec.stages,
            ));
        }
    }
    let mut targets = BTreeMap::new();
    let mut disabled = BTreeSet::new();
    for node in spec.all_nodes() {
        if excluded.contains(&node) {
            continue;
        }
        match ring_walk(node, spec, excluded)? {
            Some(target) => {
                targets.insert(node, target);
            }
            None => {
                disabled.insert(node);
            }
        }
    }
    Ok(ReplicationPlan {
        targets,
        excluded: excluded.clone(),
        disabled,
    })
}

/// Outcome of rerouting one pipeline around the current failed set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RerouteOutcome {
    /// No failed node on the path.
    Unchanged,
    /// Failed nodes replaced by donors; epoch advanced by one.
    Rerouted {
        /// (failed node, donor that replaces it) per affected stage.
        substitutions: Vec<(NodeId, NodeId)>,
    },
    /// Some stage has no healthy same-stage node anywhere.
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReroutedPipeline {
    pub pipeline: PipelineSpec,
    pub outcome: RerouteOutcome,
}

/// Rewrite every pipeline that crosses a failed node, substituting each
/// failed stage with the first healthy node found by the ring walk.
///
/// Donors are chosen by the same walk replication uses, so the donor already
/// holds the failed node's replicated blocks. Pipelines without failures are
/// returned unchanged; pipelines with an unrecoverable stage come back as
/// [`RerouteOutcome::Offline`] with their path untouched.
pub fn plan_reroute(
    spec: &ClusterSpec,
    failed: &BTreeSet<NodeId>,
    healthy_pipelines: &[PipelineSpec],
) -> Result<Vec<ReroutedPipeline>, TopologyError> {
    for node in failed {
        if !spec.contains(*node) {
            return Err(TopologyError::NodeOutOfBounds(
                *node,
                spec.instances,
                spec.stages,
            ));
        }
    }
    let mut out = Vec::with_capacity(healthy_pipelines.len());
    for pipeline in healthy_pipelines {
        let hit: Vec<NodeId> = pipeline
            .path
            .iter()
            .copied()
            .filter(|n| failed.contains(n))
            .collect();
        if hit.is_empty() {
            out.push(ReroutedPipeline {
                pipeline: pipeline.clone(),
                outcome: RerouteOutcome::Unchanged,
            });
            continue;
        }
        let mut new_path = pipeline.path.clone();
        let mut substitutions = Vec::new();
        let mut offline = false;
        for failed_node in &hit {
            match ring_walk(*failed_node, spec, failed)? {
                Some(donor) => {
                    new_path[failed_node.stage as usize] = donor;
                    substitutions.push((*failed_node, donor));
                }
                None => {
                    offline = true;
                    break;
                }
            }
        }
        if offline {
            out.push(ReroutedPipeline {
                pipeline: pipeline.clone(),
                outcome: RerouteOutcome::Offline,
            });
        } else {
            out.push(ReroutedPipeline {
                pipeline: PipelineSpec {
                    path: new_path,
                    epoch: pipeline.epoch + 1,
                    home_instance: pipeline.home_instance,
                },
                outcome: RerouteOutcome::Rerouted { substitutions },
            });
        }
    }
    Ok(out)
}
