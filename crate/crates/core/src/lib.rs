//! Certificateless pseudonym authentication for federated learning.
//!
//! * [`group`]: prime-order curve arithmetic and hashing
//! * [`clpa`]: pseudonym issuance, partial/full key generation, signing,
//!   verification and conditional tracing
//! * [`fl`]: a small federated regression task with FedAvg
//! * [`sim`]: deterministic discrete-event simulation with adversaries
//! * [`bench`]: certificate-based baseline, latency measurement and the
//!   communication cost model

pub mod bench;
pub mod codec;
pub mod clpa;
pub mod fl;
pub mod group;
pub mod latency;
pub mod sim;
