//! Desk-scale fault-tolerant pipeline-parallel serving fabric.
//!
//! A load-balancing group of pipeline replicas serves a deterministic mock
//! model across one OS process per (instance, stage) node. The fabric keeps
//! serving through single-node failures by rerouting the damaged pipeline
//! through a healthy same-stage node from another instance, re-forming the
//! inter-node communicator at runtime, and resuming in-progress requests
//! from background-replicated KV blocks instead of retrying them.
//!
//! Module map:
//! - [`topology`]: cluster layout, replication ring, reroute planning
//! - [`model`]: deterministic mock model (token function, digests)
//! - [`kv`]: paged KV block store with replica eviction
//! - [`protocol`]: newline-delimited JSON wire protocol
//! - [`store`]: coordination store (linearizable CAS, leases, locks)
//! - [`bootstrap`]: decoupled communicator formation and reconfiguration
//! - [`replication`]: background ring replication with a distributed lock
//! - [`failure`]: heartbeat failure detection and fault schedules
//! - [`gateway`]: load balancer and failure-mode policy engine
//! - [`workload`]: Poisson arrivals and synthetic traces
//! - [`metrics`]: TTFT/TPOT/latency derivation, percentiles, rolling windows
//! - [`node`]: the per-node runtime tying engine, bootstrap and replication

pub mod bootstrap;
pub mod config;
pub mod engine;
pub mod failure;
pub mod gateway;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod node;
pub mod protocol;
pub mod replication;
pub mod store;
pub mod topology;
pub mod workload;
