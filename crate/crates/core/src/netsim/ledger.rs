//! Per-node and per-link byte accounting plus verification-cost counters.
//!
//! Bytes are booked once per delivered message, on both the sender's
//! outbound and the receiver's inbound side, so totals are conserved by
//! construction.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::attestation::Envelope;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Relay(usize),
    Submitter(u64),
    Adversary,
}

impl Endpoint {
    pub fn is_relay(&self) -> bool {
        matches!(self, Endpoint::Relay(_))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Relay(i) => write!(f, "relay-{i}"),
            Endpoint::Submitter(i) => write!(f, "submitter-{i}"),
            Endpoint::Adversary => f.write_str("adversary"),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug)]
pub enum Message {
    Envelope {
        envelope: Envelope,
        /// Proof bytes attached in proof-carrying mode, else 0.
        proof_bytes: u64,
    },
    TickProof {
        size: u64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CategoryBytes {
    pub object: u64,
    pub attestation: u64,
    pub proof: u64,
}

impl CategoryBytes {
    pub fn total(&self) -> u64 {
        self.object + self.attestation + self.proof
    }

    fn add(&mut self, o: &CategoryBytes) {
        self.object += o.object;
        self.attestation += o.attestation;
        self.proof += o.proof;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NodeTraffic {
    pub inbound: CategoryBytes,
    pub outbound: CategoryBytes,
    pub light_checks: u64,
    pub heavy_checks: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LinkTraffic {
    pub envelopes: u64,
    pub tick_proofs: u64,
    pub bytes: CategoryBytes,
    /// Signature share of the attestation bytes.
    pub signature_bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrafficLedger {
    pub nodes: BTreeMap<Endpoint, NodeTraffic>,
    pub links: BTreeMap<(Endpoint, Endpoint), LinkTraffic>,
    /// Aggregated proofs published by builders; never relay traffic.
    pub builder_proof_bytes: u64,
    pub blocks_published: u64,
}

impl TrafficLedger {
    pub fn record_delivery(&mut self, from: Endpoint, to: Endpoint, msg: &Message) {
        let (bytes, sig, envelopes, tick_proofs) = match msg {
            Message::Envelope {
                envelope,
                proof_bytes,
            } => (
                CategoryBytes {
                    object: envelope.object_wire_bytes(),
                    attestation: envelope.attestation_wire_bytes(),
                    proof: *proof_bytes,
                },
                envelope.attestation.len() as u64,
                1,
                0,
            ),
            Message::TickProof { size } => (
                CategoryBytes {
                    proof: *size,
                    ..Default::default()
                },
                0,
                0,
                1,
            ),
        };
        self.nodes.entry(from).or_default().outbound.add(&bytes);
        self.nodes.entry(to).or_default().inbound.add(&bytes);
        let link = self.links.entry((from, to)).or_default();
        link.bytes.add(&bytes);
        link.signature_bytes += sig;
        link.envelopes += envelopes;
        link.tick_proofs += tick_proofs;
    }

    pub fn charge_light(&mut self, node: Endpoint, n: u64) {
        if n > 0 {
            self.nodes.entry(node).or_default().light_checks += n;
        }
    }

    pub fn charge_heavy(&mut self, node: Endpoint, n: u64) {
        if n > 0 {
            self.nodes.entry(node).or_default().heavy_checks += n;
        }
    }

    pub fn record_block(&mut self, proof_size: u64) {
        self.builder_proof_bytes += proof_size;
        self.blocks_published += 1;
    }

    pub fn node(&self, e: Endpoint) -> NodeTraffic {
        self.nodes.get(&e).copied().unwrap_or_default()
    }

    pub fn link(&self, from: Endpoint, to: Endpoint) -> LinkTraffic {
        self.links.get(&(from, to)).copied().unwrap_or_default()
    }

    pub fn total_outbound(&self) -> CategoryBytes {
        let mut t = CategoryBytes::default();
        for n in self.nodes.values() {
            t.add(&n.outbound);
        }
        t
    }

    pub fn total_inbound(&self) -> CategoryBytes {
        let mut t = CategoryBytes::default();
        for n in self.nodes.values() {
            t.add(&n.inbound);
        }
        t
    }

    /// Proof bytes carried on relay-to-relay links.
    pub fn relay_link_proof_bytes(&self) -> u64 {
        self.links
            .iter()
            .filter(|((a, b), _)| a.is_relay() && b.is_relay())
            .map(|(_, l)| l.bytes.proof)
            .sum()
    }

    /// Proof bytes on every link, including submitter uplinks.
    pub fn all_link_proof_bytes(&self) -> u64 {
        self.links.values().map(|l| l.bytes.proof).sum()
    }

    pub fn light_checks(&self) -> u64 {
        self.nodes.values().map(|n| n.light_checks).sum()
    }

    pub fn heavy_checks(&self) -> u64 {
        self.nodes.values().map(|n| n.heavy_checks).sum()
    }

    /// Flattened `(node, category, direction, bytes)` rows for tabular export.
    pub fn flat_rows(&self) -> Vec<(String, &'static str, &'static str, u64)> {
        let mut rows = Vec::new();
        for (e, n) in &self.nodes {
            for (dir, b) in [("in", &n.inbound), ("out", &n.outbound)] {
                for (cat, v) in [
                    ("object", b.object),
                    ("attestation", b.attestation),
                    ("proof", b.proof),
                ] {
                    rows.push((e.to_string(), cat, dir, v));
                }
            }
        }
        rows
    }
}

#[derive(Serialize)]
struct NodeRow<'a> {
    node: Endpoint,
    #[serde(flatten)]
    traffic: &'a NodeTraffic,
}

#[derive(Serialize)]
struct LinkRow<'a> {
    from: Endpoint,
    to: Endpoint,
    #[serde(flatten)]
    traffic: &'a LinkTraffic,
}

#[derive(Serialize)]
struct LedgerView<'a> {
    nodes: Vec<NodeRow<'a>>,
    links: Vec<LinkRow<'a>>,
    total_outbound: CategoryBytes,
    total_inbound: CategoryBytes,
    relay_link_proof_bytes: u64,
    builder_proof_bytes: u64,
    blocks_published: u64,
    light_checks: u64,
    heavy_checks: u64,
}

impl Serialize for TrafficLedger {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LedgerView {
            nodes: self
                .nodes
                .iter()
                .map(|(node, traffic)| NodeRow {
                    node: *node,
                    traffic,
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|((from, to), traffic)| LinkRow {
                    from: *from,
                    to: *to,
                    traffic,
                })
                .collect(),
            total_outbound: self.total_outbound(),
            total_inbound: self.total_inbound(),
            relay_link_proof_bytes: self.relay_link_proof_bytes(),
            builder_proof_bytes: self.builder_proof_bytes,
            blocks_published: self.blocks_published,
            light_checks: self.light_checks(),
            heavy_checks: self.heavy_checks(),
        }
        .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attestation::{make_envelope, Domain, Nonce};
    use crate::crypto::{keygen, Profile};

    fn env() -> Envelope {
        let kp = keygen(&[1; 32], Profile::hybrid_performance().scheme).unwrap();
        make_envelope(
            &kp.secret,
            &kp.public,
            vec![0; 100],
            &Domain::new(b"d".to_vec()).unwrap(),
            Nonce([0; 16]),
        )
    }

    #[test]
    fn envelope_delivery_books_categories() {
        let mut l = TrafficLedger::default();
        let m = Message::Envelope {
            envelope: env(),
            proof_bytes: 0,
        };
        l.record_delivery(Endpoint::Submitter(0), Endpoint::Relay(0), &m);
        let link = l.link(Endpoint::Submitter(0), Endpoint::Relay(0));
        assert_eq!(link.bytes.object, 104);
        assert_eq!(link.bytes.attestation, 16 + 32 + 64);
        assert_eq!(link.signature_bytes, 64);
        assert_eq!(link.envelopes, 1);
        assert_eq!(l.relay_link_proof_bytes(), 0);
    }

    #[test]
    fn conservation_and_relay_proof_totals() {
        let mut l = TrafficLedger::default();
        l.record_delivery(
            Endpoint::Submitter(0),
            Endpoint::Relay(0),
            &Message::Envelope {
                envelope: env(),
                proof_bytes: 7,
            },
        );
        l.record_delivery(
            Endpoint::Relay(0),
            Endpoint::Relay(1),
            &Message::TickProof { size: 131_072 },
        );
        assert_eq!(l.total_inbound(), l.total_outbound());
        assert_eq!(l.relay_link_proof_bytes(), 131_072);
        assert_eq!(l.all_link_proof_bytes(), 131_079);
        assert_eq!(l.node(Endpoint::Relay(0)).outbound.proof, 131_072);
        assert_eq!(l.flat_rows().len(), 3 * 6);
    }
}
