//! Submitter, relay and builder behaviour, the aggregated-proof model and
//! the consensus acceptance check.
//!
//! Relays never look at object validity. The builder asks the validity
//! oracle (harness-side ground truth) through [`aggregate_prove`], and
//! consensus cross-checks the published block against the same oracle.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::admission::{AdmissionState, AdmitContext, AdmitDecision, Tick};
use crate::attestation::{make_envelope, Domain, Envelope, Nonce};
use crate::crypto::{hash_object, Digest32, KeyPair, PublicKey};

/// Modelled size of one aggregated proof: 128 KiB.
pub const DEFAULT_PROOF_SIZE: u64 = 131_072;

pub type PeerId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MempoolObject {
    pub payload: Vec<u8>,
    /// Ground truth for the validity predicate; never consulted by relays.
    pub valid: bool,
    pub obj_hash: Digest32,
}

impl MempoolObject {
    pub fn new(payload: Vec<u8>, valid: bool) -> Self {
        Self {
            obj_hash: hash_object(&payload),
            payload,
            valid,
        }
    }
}

/// Harness-side validity predicate. Unknown objects are invalid.
#[derive(Clone, Debug, Default)]
pub struct ValidityOracle {
    verdicts: BTreeMap<Digest32, bool>,
}

impl ValidityOracle {
    pub fn register(&mut self, obj: &MempoolObject) {
        self.verdicts.insert(obj.obj_hash, obj.valid);
    }

    pub fn is_valid(&self, h: &Digest32) -> bool {
        self.verdicts.get(h).copied().unwrap_or(false)
    }

    pub fn object_for(&self, payload: &[u8]) -> MempoolObject {
        let h = hash_object(payload);
        MempoolObject {
            payload: payload.to_vec(),
            valid: self.is_valid(&h),
            obj_hash: h,
        }
    }
}

impl FromIterator<MempoolObject> for ValidityOracle {
    fn from_iter<I: IntoIterator<Item = MempoolObject>>(iter: I) -> Self {
        let mut o = ValidityOracle::default();
        for obj in iter {
            o.register(&obj);
        }
        o
    }
}

#[derive(Debug)]
pub struct Submitter {
    pub id: u64,
    pub keys: KeyPair,
    pub entry_relays: Vec<PeerId>,
    run_seed: u64,
    counter: u64,
}

/// An envelope leaving a submitter towards its entry relays.
#[derive(Clone, Debug)]
pub struct SubmitEvent {
    pub envelope: Envelope,
    pub targets: Vec<PeerId>,
}

impl Submitter {
    pub fn new(id: u64, keys: KeyPair, entry_relays: Vec<PeerId>, run_seed: u64) -> Self {
        Self {
            id,
            keys,
            entry_relays,
            run_seed,
            counter: 0,
        }
    }

    pub fn next_nonce(&mut self) -> Nonce {
        let n = Nonce::from_counter(self.run_seed, self.id, self.counter);
        self.counter += 1;
        n
    }

    pub fn submit(&mut self, object: &MempoolObject, domain: &Domain) -> SubmitEvent {
        let nonce = self.next_nonce();
        SubmitEvent {
            envelope: make_envelope(
                &self.keys.secret,
                &self.keys.public,
                object.payload.clone(),
                domain,
                nonce,
            ),
            targets: self.entry_relays.clone(),
        }
    }
}

/// Where an envelope arrived from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Peer(PeerId),
    /// A submitter or adversary outside the relay graph.
    External,
}

#[derive(Clone, Debug)]
pub struct PoolEntry {
    pub envelope: Envelope,
    pub obj_hash: Digest32,
    pub arrival_tick: Tick,
    pub first_seen: Tick,
}

#[derive(Clone, Debug, Default)]
pub struct RelayOutcome {
    /// `None` when the object was already pooled and admission was skipped.
    pub decision: Option<AdmitDecision>,
    pub forwards: Vec<(PeerId, Envelope)>,
}

#[derive(Clone, Debug)]
pub struct RelayLocalState {
    pub id: PeerId,
    pub peers: Vec<PeerId>,
    pub admission: AdmissionState,
    pub pool: BTreeMap<Digest32, PoolEntry>,
    pub served: BTreeMap<Digest32, BTreeSet<PeerId>>,
}

impl RelayLocalState {
    pub fn new(id: PeerId, peers: Vec<PeerId>, admission: AdmissionState) -> Self {
        Self {
            id,
            peers,
            admission,
            pool: BTreeMap::new(),
            served: BTreeMap::new(),
        }
    }

    /// Handle one received envelope and return what to forward.
    pub fn relay_on_receive(
        &mut self,
        env: &Envelope,
        from: Source,
        domain: &Domain,
        ctx: AdmitContext,
    ) -> RelayOutcome {
        let h = env.obj_hash();
        if let Some(entry) = self.pool.get(&h) {
            let pooled = entry.envelope.clone();
            let forwards = self.serve(h, from, &pooled);
            return RelayOutcome {
                decision: None,
                forwards,
            };
        }
        let decision = self.admission.admit(env, domain, ctx);
        if !decision.is_accept() {
            return RelayOutcome {
                decision: Some(decision),
                forwards: Vec::new(),
            };
        }
        self.pool.insert(
            h,
            PoolEntry {
                envelope: env.clone(),
                obj_hash: h,
                arrival_tick: ctx.tick,
                first_seen: ctx.first_seen,
            },
        );
        let forwards = self.serve(h, from, env);
        RelayOutcome {
            decision: Some(decision),
            forwards,
        }
    }

    fn serve(&mut self, h: Digest32, from: Source, env: &Envelope) -> Vec<(PeerId, Envelope)> {
        let served = self.served.entry(h).or_default();
        if let Source::Peer(p) = from {
            if self.peers.contains(&p) {
                served.insert(p);
            }
        }
        let mut out = Vec::new();
        for &p in &self.peers {
            if served.insert(p) {
                out.push((p, env.clone()));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub capacity: usize,
    pub ttl_ticks: u64,
    /// Re-check attester eligibility at inclusion time.
    pub require_eligible: bool,
}

/// Pick up to `capacity` pooled objects in arrival order, ties broken by
/// ascending object hash. Entries past their TTL are skipped, as are
/// ineligible attesters when the policy asks for it.
pub fn builder_select<'a>(
    pool: impl IntoIterator<Item = &'a PoolEntry>,
    policy: &SelectionPolicy,
    now: Tick,
    eligible: Option<&BTreeSet<PublicKey>>,
) -> Vec<&'a PoolEntry> {
    let mut candidates: Vec<&PoolEntry> = pool
        .into_iter()
        .filter(|e| now.saturating_sub(e.first_seen) <= policy.ttl_ticks)
        .filter(|e| {
            !policy.require_eligible
                || eligible.is_some_and(|set| set.contains(&e.envelope.attester_pk))
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.arrival_tick
            .cmp(&b.arrival_tick)
            .then_with(|| a.obj_hash.cmp(&b.obj_hash))
    });
    candidates.truncate(policy.capacity);
    candidates
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedProof {
    pub object_hashes: Vec<Digest32>,
    pub size_bytes: u64,
    pub well_formed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProveFailure {
    /// Objects that fail the validity predicate, in inclusion order.
    pub offending: Vec<Digest32>,
}

/// Model of one aggregated validity proof over `objects`. Well-formed iff
/// every object satisfies the predicate; the empty set proves vacuously.
pub fn aggregate_prove(
    objects: &[MempoolObject],
    oracle: &ValidityOracle,
    proof_size: u64,
) -> Result<AggregatedProof, ProveFailure> {
    let offending: Vec<Digest32> = objects
        .iter()
        .map(|o| o.obj_hash)
        .filter(|h| !oracle.is_valid(h))
        .collect();
    if !offending.is_empty() {
        return Err(ProveFailure { offending });
    }
    Ok(AggregatedProof {
        object_hashes: objects.iter().map(|o| o.obj_hash).collect(),
        size_bytes: proof_size,
        well_formed: true,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub tick: Tick,
    pub included: Vec<MempoolObject>,
    pub proof: AggregatedProof,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "verdict", content = "detail")]
pub enum ConsensusVerdict {
    Accept,
    Reject(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    ProofNotWellFormed,
    ProofSetMismatch,
    InvalidObject(Digest32),
}

/// Consensus acceptance: the proof must be well-formed, bind exactly the
/// included hashes in order, and (cross-check) every included object must
/// satisfy the oracle.
pub fn consensus_check(block: &Block, oracle: &ValidityOracle) -> ConsensusVerdict {
    if !block.proof.well_formed {
        return ConsensusVerdict::Reject(RejectReason::ProofNotWellFormed);
    }
    let hashes: Vec<Digest32> = block
        .included
        .iter()
        .map(|o| hash_object(&o.payload))
        .collect();
    if hashes != block.proof.object_hashes {
        return ConsensusVerdict::Reject(RejectReason::ProofSetMismatch);
    }
    if let Some(bad) = hashes.iter().find(|h| !oracle.is_valid(h)) {
        return ConsensusVerdict::Reject(RejectReason::InvalidObject(*bad));
    }
    ConsensusVerdict::Accept
}

#[derive(Clone, Debug)]
pub struct BuildOutcome {
    pub block: Block,
    /// Invalid objects removed before the successful proof.
    pub dropped_invalid: Vec<Digest32>,
    pub attempts: u32,
}

/// Block builder with a drop-invalid-and-reprove-once loop.
#[derive(Clone, Debug)]
pub struct Builder {
    pub policy: SelectionPolicy,
    pub proof_size: u64,
    height: u64,
    /// Objects already included or rejected; never reselected.
    settled: BTreeSet<Digest32>,
}

impl Builder {
    pub fn new(policy: SelectionPolicy, proof_size: u64) -> Self {
        Self {
            policy,
            proof_size,
            height: 0,
            settled: BTreeSet::new(),
        }
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    /// Build one block from `pool`. Returns `None` when nothing is left to
    /// include or the retry also fails.
    pub fn build_block<'a>(
        &mut self,
        pool: impl IntoIterator<Item = &'a PoolEntry>,
        oracle: &ValidityOracle,
        now: Tick,
        eligible: Option<&BTreeSet<PublicKey>>,
    ) -> Option<BuildOutcome> {
        let fresh = pool.into_iter().filter(|e| !self.settled.contains(&e.obj_hash));
        let mut selected: Vec<MempoolObject> = builder_select(fresh, &self.policy, now, eligible)
            .into_iter()
            .map(|e| oracle.object_for(&e.envelope.object))
            .collect();
        if selected.is_empty() {
            return None;
        }
        let mut dropped = Vec::new();
        for attempt in 1..=2 {
            match aggregate_prove(&selected, oracle, self.proof_size) {
                Ok(proof) => {
                    self.settled.extend(proof.object_hashes.iter().copied());
                    let block = Block {
                        height: self.height,
                        tick: now,
                        included: selected,
                        proof,
                    };
                    self.height += 1;
                    return Some(BuildOutcome {
                        block,
                        dropped_invalid: dropped,
                        attempts: attempt,
                    });
                }
                Err(fail) => {
                    self.settled.extend(fail.offending.iter().copied());
                    selected.retain(|o| !fail.offending.contains(&o.obj_hash));
                    dropped.extend(fail.offending);
                    if selected.is_empty() {
                        return None;
                    }
                }
            }
        }
        None
    }
}
