//! Deterministic discrete-event network simulator.
//!
//! A run is a single-threaded loop over a priority queue keyed by
//! `(tick, destination relay, enqueue sequence)`. Each tick first performs
//! housekeeping (epoch rollover, tick proofs, injections, metadata
//! updates), then delivers every message due at that tick, then lets the
//! builders cut a block when the block interval elapses. Messages take
//! `hop_delay` ticks per hop. Once the submission window closes, no new
//! tick proofs are produced and the queue drains.
//!
//! Verification cost is charged per mode: light checks for attestation
//! verifications in AR-ACE mode, heavy checks for every received tick
//! proof in recursive mode, and heavy checks for every envelope whose
//! attached proof is verified in proof-carrying mode.

pub mod adversary;
pub mod ledger;
pub mod topology;
pub mod trace;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use num_rational::Ratio;
use serde::{Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::admission::{
    AdmissionFault, AdmissionState, AdmitContext, AdmitDecision, DropReason, MetaOutcome,
    MetadataAuthority, Tick,
};
use crate::crypto::{keygen, Digest32, PublicKey, SignatureScheme};
use crate::roles::{consensus_check, Builder, ConsensusVerdict, RelayLocalState, SelectionPolicy, Source, ValidityOracle};
use crate::scenario::{PropagationMode, SimScenario};

pub use adversary::{honest_workload, inject_adversary, AdversaryPlan, Injection, InjectionKind, Workload};
pub use ledger::{CategoryBytes, Endpoint, LinkTraffic, Message, NodeTraffic, TrafficLedger};
pub use topology::{build_topology, Topology, TopologyError};
pub use trace::{TraceRecord, TRACE_SCHEMA_VERSION};

/// Hard stop for draining after the last injection, in ticks.
const DRAIN_LIMIT: u64 = 100_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// 32-byte key seed for `(run seed, role label, index)`.
pub fn derive_seed(seed: u64, label: &[u8], index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"arace/sim-key/v1");
    h.update(seed.to_be_bytes());
    h.update((label.len() as u32).to_be_bytes());
    h.update(label);
    h.update(index.to_be_bytes());
    h.finalize().into()
}

/// Exact rate in bytes per second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rate(pub Ratio<u128>);

impl Rate {
    pub fn approx(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View {
            exact: String,
            approx: f64,
        }
        View {
            exact: self.0.to_string(),
            approx: self.approx(),
        }
        .serialize(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeProofRate {
    pub relay: usize,
    pub outbound: Rate,
    pub inbound: Rate,
    pub combined: Rate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AdmissionTallies {
    pub accepted: u64,
    pub duplicates: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    pub signature_checks: u64,
}

impl AdmissionTallies {
    pub fn decisions(&self) -> u64 {
        self.accepted + self.dropped.values().sum::<u64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockRecord {
    pub relay: usize,
    pub height: u64,
    pub tick: Tick,
    pub included: usize,
    pub invalid_included: usize,
    pub dropped_invalid: usize,
    pub verdict: ConsensusVerdict,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BlockSummary {
    pub produced: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub included_objects: u64,
    /// Oracle-invalid objects inside accepted blocks.
    pub invalid_in_accepted: u64,
    pub invalid_dropped_by_builder: u64,
    pub records: Vec<BlockRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PoolSummary {
    /// (relay, object) pool insertions of oracle-invalid objects.
    pub invalid_pool_entries: u64,
    pub distinct_invalid_pooled: u64,
    pub honest_objects: u64,
    /// Honest objects that reached a builder-attached relay pool.
    pub honest_at_builder: u64,
    /// Worst honest submit-to-builder-pool latency, in ticks.
    pub max_builder_latency: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct KindTally {
    pub injected: u64,
    pub accepted: u64,
    pub dropped: BTreeMap<DropReason, u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetaSummary {
    pub applied: u64,
    pub rejected: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologySummary {
    pub nodes: usize,
    pub degree: usize,
    pub diameter: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub mode: PropagationMode,
    pub seed: u64,
    pub topology: TopologySummary,
    pub window_seconds: String,
    pub ticks_executed: u64,
    pub ledger: TrafficLedger,
    pub proof_rates: Vec<NodeProofRate>,
    pub admission: AdmissionTallies,
    pub blocks: BlockSummary,
    pub pools: PoolSummary,
    pub latency_histogram: BTreeMap<u64, u64>,
    pub injections: BTreeMap<InjectionKind, KindTally>,
    pub metadata: MetaSummary,
    pub trace_records: u64,
}

impl SimReport {
    pub fn proof_rate(&self, relay: usize) -> Option<&NodeProofRate> {
        self.proof_rates.iter().find(|r| r.relay == relay)
    }
}

#[derive(Debug)]
pub struct SimOutput {
    pub report: SimReport,
    pub trace: Vec<TraceRecord>,
    /// Final relay states, for inspection.
    pub relays: Vec<RelayLocalState>,
    pub oracle: ValidityOracle,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Deliberate admission defect installed on every relay.
    pub fault: Option<AdmissionFault>,
}

struct Queued {
    tick: Tick,
    node: usize,
    seq: u64,
    from: Endpoint,
    msg: Message,
    first_seen: Tick,
    origin: InjectionKind,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.tick, self.node, self.seq).cmp(&(o.tick, o.node, o.seq))
    }
}

struct Engine<'a> {
    sc: &'a SimScenario,
    topology: Topology,
    relays: Vec<RelayLocalState>,
    builders: Vec<(usize, Builder)>,
    oracle: ValidityOracle,
    queue: BinaryHeap<Reverse<Queued>>,
    seq: u64,
    ledger: TrafficLedger,
    trace: Vec<TraceRecord>,
    tallies: AdmissionTallies,
    kinds: BTreeMap<InjectionKind, KindTally>,
    blocks: BlockSummary,
    meta: MetaSummary,
    latency: BTreeMap<u64, u64>,
    invalid_pool_entries: u64,
    invalid_pooled: BTreeSet<Digest32>,
    honest: BTreeMap<Digest32, Tick>,
    builder_arrival: BTreeMap<Digest32, Tick>,
}

/// Run a scenario to completion.
pub fn run(sc: &SimScenario) -> Result<SimOutput, SimError> {
    run_with(sc, RunOptions::default())
}

pub fn run_with(sc: &SimScenario, opts: RunOptions) -> Result<SimOutput, SimError> {
    let topology = build_topology(sc.topology.nodes, sc.topology.degree, sc.seed)?;
    let workload = honest_workload(sc, &topology);
    let honest_keys: Vec<PublicKey> = workload
        .submitters
        .iter()
        .map(|s| s.keys.public.clone())
        .collect();
    let plan = inject_adversary(sc, &topology, &workload.injections, &honest_keys);

    let authority = keygen(&derive_seed(sc.seed, b"authority", 0), SignatureScheme::ed25519())
        .expect("ed25519 keygen");
    let eligible: Vec<PublicKey> = honest_keys.iter().chain(&plan.eligible_keys).cloned().collect();
    let relays: Vec<RelayLocalState> = (0..topology.nodes)
        .map(|i| {
            let adm = AdmissionState::new(sc.admission.clone(), sc.profile, eligible.iter().cloned())
                .with_authority(MetadataAuthority {
                    scheme: SignatureScheme::ed25519(),
                    public_key: authority.public.clone(),
                })
                .with_fault(opts.fault);
            RelayLocalState::new(i, topology.peers(i).to_vec(), adm)
        })
        .collect();

    let policy = SelectionPolicy {
        capacity: sc.builder.capacity,
        ttl_ticks: sc.admission.ttl_ticks,
        require_eligible: sc.builder.require_eligible,
    };
    let builders = sc
        .builder
        .attach
        .iter()
        .map(|&r| (r, Builder::new(policy.clone(), sc.proof_size)))
        .collect();

    let oracle: ValidityOracle = workload
        .objects
        .iter()
        .chain(&plan.objects)
        .cloned()
        .collect();
    let honest = workload
        .injections
        .iter()
        .map(|i| (i.envelope.obj_hash(), i.tick))
        .collect();

    let mut injections = workload.injections;
    injections.extend(plan.injections);
    injections.sort_by_key(|i| i.tick);

    let mut eng = Engine {
        sc,
        topology,
        relays,
        builders,
        oracle,
        queue: BinaryHeap::new(),
        seq: 0,
        ledger: TrafficLedger::default(),
        trace: Vec::new(),
        tallies: AdmissionTallies::default(),
        kinds: BTreeMap::new(),
        blocks: BlockSummary::default(),
        meta: MetaSummary::default(),
        latency: BTreeMap::new(),
        invalid_pool_entries: 0,
        invalid_pooled: BTreeSet::new(),
        honest,
        builder_arrival: BTreeMap::new(),
    };
    eng.trace.push(TraceRecord::Header {
        schema_version: TRACE_SCHEMA_VERSION,
        scenario: sc.name.clone(),
        seed: sc.seed,
        relays: sc.topology.nodes,
        quota_limit: sc.admission.quota_limit,
        nonce_retention_epochs: sc.admission.nonce_retention_epochs,
        epoch_ticks: sc.timing.epoch_ticks,
    });
    let ticks = eng.execute(injections, plan.meta_updates);
    Ok(eng.finish(ticks))
}

impl Engine<'_> {
    fn enqueue(&mut self, tick: Tick, node: usize, from: Endpoint, msg: Message, first_seen: Tick, origin: InjectionKind) {
        self.seq += 1;
        self.queue.push(Reverse(Queued {
            tick,
            node,
            seq: self.seq,
            from,
            msg,
            first_seen,
            origin,
        }));
    }

    fn proof_bytes_per_envelope(&self) -> u64 {
        match self.sc.mode {
            PropagationMode::ProofCarrying => self.sc.proof_size,
            _ => 0,
        }
    }

    /// Main loop; returns the number of ticks executed.
    fn execute(
        &mut self,
        injections: Vec<Injection>,
        mut meta: Vec<(Tick, crate::admission::EligibilityUpdate)>,
    ) -> Tick {
        let run_ticks = self.sc.timing.run_ticks;
        let hop = self.sc.topology.hop_delay;
        meta.sort_by_key(|(t, _)| *t);
        let mut injections = injections.into_iter().peekable();
        let mut meta = meta.into_iter().peekable();
        let last_event = injections
            .clone()
            .map(|i| i.tick)
            .chain(meta.clone().map(|(t, _)| t))
            .max()
            .unwrap_or(0);
        let mut tick: Tick = 0;
        loop {
            let pending = injections.peek().is_some() || meta.peek().is_some();
            if tick >= run_ticks && !pending && self.queue.is_empty() {
                break;
            }
            if tick > run_ticks.max(last_event) + DRAIN_LIMIT {
                break;
            }
            self.rollover(tick);
            if tick < run_ticks && self.sc.mode == PropagationMode::RecursiveTick {
                self.send_tick_proofs(tick);
            }
            while let Some(inj) = injections.next_if(|i| i.tick == tick) {
                self.kinds.entry(inj.kind).or_default().injected += 1;
                let msg = Message::Envelope {
                    envelope: inj.envelope,
                    proof_bytes: self.proof_bytes_per_envelope(),
                };
                self.enqueue(tick + hop, inj.to, inj.from, msg, tick, inj.kind);
            }
            while let Some((_, update)) = meta.next_if(|(t, _)| *t == tick) {
                for r in 0..self.relays.len() {
                    let outcome = self.relays[r].admission.load_eligibility(&update);
                    match outcome {
                        MetaOutcome::Applied => self.meta.applied += 1,
                        MetaOutcome::Rejected(_) => self.meta.rejected += 1,
                    }
                    self.trace.push(TraceRecord::Meta {
                        tick,
                        relay: r,
                        outcome,
                    });
                }
            }
            while self.queue.peek().is_some_and(|q| q.0.tick == tick) {
                let Reverse(q) = self.queue.pop().expect("peeked");
                self.deliver(q);
            }
            if (tick + 1).is_multiple_of(self.sc.builder.block_interval) {
                self.build_blocks(tick);
            }
            tick += 1;
        }
        self.build_blocks(tick);
        tick
    }

    fn rollover(&mut self, tick: Tick) {
        let epoch = tick / self.sc.timing.epoch_ticks;
        for r in &mut self.relays {
            if epoch > r.admission.epoch() {
                r.admission.advance_to(epoch);
                self.trace.push(TraceRecord::Rollover {
                    tick,
                    relay: r.id,
                    epoch,
                });
            }
        }
    }

    fn send_tick_proofs(&mut self, tick: Tick) {
        let hop = self.sc.topology.hop_delay;
        for r in 0..self.relays.len() {
            if !self.sc.tick_proof_always && self.relays[r].pool.is_empty() {
                continue;
            }
            for p in self.topology.peers(r).to_vec() {
                let msg = Message::TickProof {
                    size: self.sc.proof_size,
                };
                self.enqueue(tick + hop, p, Endpoint::Relay(r), msg, tick, InjectionKind::Honest);
            }
        }
    }

    fn deliver(&mut self, q: Queued) {
        let to = Endpoint::Relay(q.node);
        self.ledger.record_delivery(q.from, to, &q.msg);
        let envelope = match q.msg {
            Message::TickProof { .. } => {
                self.ledger.charge_heavy(to, 1);
                return;
            }
            Message::Envelope { envelope, .. } => envelope,
        };
        let source = match q.from {
            Endpoint::Relay(p) => Source::Peer(p),
            _ => Source::External,
        };
        let ctx = AdmitContext {
            tick: q.tick,
            first_seen: q.first_seen,
        };
        let relay = &mut self.relays[q.node];
        let checks_before = relay.admission.signature_checks();
        let outcome = relay.relay_on_receive(&envelope, source, &self.sc.domain, ctx);
        let checks = relay.admission.signature_checks() - checks_before;
        self.tallies.signature_checks += checks;
        match self.sc.mode {
            PropagationMode::ArAce => self.ledger.charge_light(to, checks),
            PropagationMode::ProofCarrying => self.ledger.charge_heavy(to, checks),
            PropagationMode::RecursiveTick => {}
        }

        let h = envelope.obj_hash();
        let Some(decision) = outcome.decision else {
            self.tallies.duplicates += 1;
            return;
        };
        let pk = &envelope.attester_pk;
        self.trace.push(TraceRecord::Decision {
            tick: q.tick,
            epoch: self.relays[q.node].admission.epoch(),
            relay: q.node,
            pk: pk.fingerprint(),
            nonce: envelope.nonce.to_hex(),
            obj_hash: h,
            decision,
            quota_used: self.relays[q.node].admission.quota_used(pk),
        });
        let kind = self.kinds.entry(q.origin).or_default();
        match decision {
            AdmitDecision::Accept => {
                self.tallies.accepted += 1;
                kind.accepted += 1;
                *self.latency.entry(q.tick - q.first_seen).or_default() += 1;
                if !self.oracle.is_valid(&h) {
                    self.invalid_pool_entries += 1;
                    self.invalid_pooled.insert(h);
                }
                if self.sc.builder.attach.contains(&q.node) {
                    if let Some(&submitted) = self.honest.get(&h) {
                        self.builder_arrival
                            .entry(h)
                            .or_insert(q.tick - submitted);
                    }
                }
            }
            AdmitDecision::Drop(reason) => {
                *self.tallies.dropped.entry(reason).or_default() += 1;
                *kind.dropped.entry(reason).or_default() += 1;
            }
        }
        let hop = self.sc.topology.hop_delay;
        let proof_bytes = self.proof_bytes_per_envelope();
        for (peer, env) in outcome.forwards {
            let msg = Message::Envelope {
                envelope: env,
                proof_bytes,
            };
            self.enqueue(q.tick + hop, peer, Endpoint::Relay(q.node), msg, q.first_seen, q.origin);
        }
    }

    fn build_blocks(&mut self, tick: Tick) {
        for (relay, builder) in &mut self.builders {
            let adm = &self.relays[*relay].admission;
            let eligible = builder.policy.require_eligible.then(|| adm.eligible());
            let Some(out) = builder.build_block(self.relays[*relay].pool.values(), &self.oracle, tick, eligible) else {
                continue;
            };
            let verdict = consensus_check(&out.block, &self.oracle);
            let invalid_included = out
                .block
                .included
                .iter()
                .filter(|o| !self.oracle.is_valid(&o.obj_hash))
                .count();
            self.ledger.record_block(out.block.proof.size_bytes);
            let b = &mut self.blocks;
            b.produced += 1;
            b.invalid_dropped_by_builder += out.dropped_invalid.len() as u64;
            if verdict == ConsensusVerdict::Accept {
                b.accepted += 1;
                b.included_objects += out.block.included.len() as u64;
                b.invalid_in_accepted += invalid_included as u64;
            } else {
                b.rejected += 1;
            }
            b.records.push(BlockRecord {
                relay: *relay,
                height: out.block.height,
                tick,
                included: out.block.included.len(),
                invalid_included,
                dropped_invalid: out.dropped_invalid.len(),
                verdict: verdict.clone(),
            });
            self.trace.push(TraceRecord::Block {
                tick,
                relay: *relay,
                height: out.block.height,
                included: out.block.included.len(),
                verdict,
            });
        }
    }

    fn finish(self, ticks: Tick) -> SimOutput {
        let window = self.sc.timing.window_seconds();
        let rate = |bytes: u64| Rate(Ratio::from_integer(bytes as u128) / window);
        let proof_rates = (0..self.relays.len())
            .map(|r| {
                let n = self.ledger.node(Endpoint::Relay(r));
                NodeProofRate {
                    relay: r,
                    outbound: rate(n.outbound.proof),
                    inbound: rate(n.inbound.proof),
                    combined: rate(n.outbound.proof + n.inbound.proof),
                }
            })
            .collect();
        let report = SimReport {
            scenario: self.sc.name.clone(),
            mode: self.sc.mode,
            seed: self.sc.seed,
            topology: TopologySummary {
                nodes: self.topology.nodes,
                degree: self.topology.degree,
                diameter: self.topology.diameter(),
            },
            window_seconds: window.to_string(),
            ticks_executed: ticks,
            proof_rates,
            admission: self.tallies,
            blocks: self.blocks,
            pools: PoolSummary {
                invalid_pool_entries: self.invalid_pool_entries,
                distinct_invalid_pooled: self.invalid_pooled.len() as u64,
                honest_objects: self.sc.workload.objects,
                honest_at_builder: self.builder_arrival.len() as u64,
                max_builder_latency: self.builder_arrival.values().copied().max(),
            },
            latency_histogram: self.latency,
            injections: self.kinds,
            metadata: self.meta,
            trace_records: self.trace.len() as u64,
            ledger: self.ledger,
        };
        SimOutput {
            report,
            trace: self.trace,
            relays: self.relays,
            oracle: self.oracle,
        }
    }
}
