//! Proof-off-path mempool propagation.
//!
//! Submitters attach a compact signed attestation to each object, relays
//! admit and forward on attestation checks alone, and a builder proves the
//! validity of its whole included set with one aggregated proof. The crate
//! provides the protocol roles, a deterministic network simulator that
//! accounts every byte on every link, closed-form bandwidth and compute
//! models, and adversarial campaigns against the relay path.

pub mod admission;
pub mod analytics;
pub mod attestation;
pub mod crypto;
pub mod games;
pub mod netsim;
pub mod report;
pub mod roles;
pub mod scenario;
