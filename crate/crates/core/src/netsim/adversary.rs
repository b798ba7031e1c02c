//! Honest workload generation and adversarial injection streams.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::admission::{EligibilityUpdate, Tick};
use crate::attestation::{make_envelope, Envelope, Nonce};
use crate::crypto::{keygen, KeyPair, PublicKey, Signature, SignatureScheme};
use crate::roles::{MempoolObject, Submitter};
use crate::scenario::SimScenario;

use super::ledger::Endpoint;
use super::topology::Topology;
use super::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InjectionKind {
    Honest,
    Forged,
    Replay,
    OverQuota,
    MutateObject,
    MutateNonce,
    MutateKey,
    MutateAttestation,
    Ineligible,
    InvalidObject,
}

impl InjectionKind {
    pub fn is_mutation(&self) -> bool {
        matches!(
            self,
            InjectionKind::MutateObject
                | InjectionKind::MutateNonce
                | InjectionKind::MutateKey
                | InjectionKind::MutateAttestation
        )
    }
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InjectionKind::Honest => "honest",
            InjectionKind::Forged => "forged",
            InjectionKind::Replay => "replay",
            InjectionKind::OverQuota => "over-quota",
            InjectionKind::MutateObject => "mutate-object",
            InjectionKind::MutateNonce => "mutate-nonce",
            InjectionKind::MutateKey => "mutate-key",
            InjectionKind::MutateAttestation => "mutate-attestation",
            InjectionKind::Ineligible => "ineligible",
            InjectionKind::InvalidObject => "invalid-object",
        })
    }
}

impl Serialize for InjectionKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// One envelope entering the relay graph at `tick`.
#[derive(Clone, Debug)]
pub struct Injection {
    pub tick: Tick,
    pub from: Endpoint,
    pub to: usize,
    pub envelope: Envelope,
    pub kind: InjectionKind,
}

#[derive(Debug)]
pub struct Workload {
    pub objects: Vec<MempoolObject>,
    pub submitters: Vec<Submitter>,
    pub injections: Vec<Injection>,
}

fn object_payload(seed: u64, tag: &[u8], index: u64, size: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut p = vec![0u8; size];
    let head = [tag, &index.to_be_bytes(), &seed.to_be_bytes()].concat();
    let n = head.len().min(size);
    p[..n].copy_from_slice(&head[..n]);
    rng.fill_bytes(&mut p[n..]);
    // Index bytes must survive truncation so payloads stay distinct.
    if size < head.len() {
        p[..8].copy_from_slice(&index.to_be_bytes());
    }
    p
}

/// Honest submitters, their objects (with the invalid fraction marked) and
/// the submission schedule.
pub fn honest_workload(sc: &SimScenario, topology: &Topology) -> Workload {
    let w = &sc.workload;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x05EE_D0B1_EC75);
    let mut submitters: Vec<Submitter> = (0..w.submitters)
        .map(|s| {
            let keys = keygen(&derive_seed(sc.seed, b"submitter", s), sc.profile.scheme)
                .expect("profile validated");
            let entry = (0..w.entry_fanout)
                .map(|j| (s as usize + j) % topology.nodes)
                .collect();
            Submitter::new(s, keys, entry, sc.seed)
        })
        .collect();

    let mut invalid = vec![false; w.objects as usize];
    let mut order: Vec<usize> = (0..w.objects as usize).collect();
    order.shuffle(&mut rng);
    for &i in order.iter().take(w.invalid_count() as usize) {
        invalid[i] = true;
    }

    let mut objects = Vec::with_capacity(w.objects as usize);
    let mut injections = Vec::new();
    for j in 0..w.objects {
        let obj = MempoolObject::new(
            object_payload(sc.seed, b"obj", j, w.object_size, &mut rng),
            !invalid[j as usize],
        );
        let s = (j % w.submitters) as usize;
        let tick = w.start_tick + j / w.submit_per_tick;
        let ev = submitters[s].submit(&obj, &sc.domain);
        for to in ev.targets {
            injections.push(Injection {
                tick,
                from: Endpoint::Submitter(s as u64),
                to,
                envelope: ev.envelope.clone(),
                kind: InjectionKind::Honest,
            });
        }
        objects.push(obj);
    }
    Workload {
        objects,
        submitters,
        injections,
    }
}

#[derive(Debug, Default)]
pub struct AdversaryPlan {
    pub injections: Vec<Injection>,
    /// Non-authority eligibility updates broadcast to every relay.
    pub meta_updates: Vec<(Tick, EligibilityUpdate)>,
    /// Adversary keys that are legitimately eligible.
    pub eligible_keys: Vec<PublicKey>,
    /// Adversary objects to register with the validity oracle.
    pub objects: Vec<MempoolObject>,
}

fn spread(start: Tick, span: u64, i: u64, count: u64) -> Tick {
    start + (i * span) / count.max(1)
}

/// Build the adversarial event stream for a scenario. `honest` is the
/// captured honest traffic the adversary may replay or mutate;
/// `honest_keys` are the eligible honest attester keys.
pub fn inject_adversary(
    sc: &SimScenario,
    topology: &Topology,
    honest: &[Injection],
    honest_keys: &[PublicKey],
) -> AdversaryPlan {
    let a = &sc.adversary;
    let mut plan = AdversaryPlan::default();
    if !a.is_active() {
        return plan;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0xAD7E_5A21);
    let scheme = sc.profile.scheme;
    let key = |label: &[u8], i: u64| keygen(&derive_seed(sc.seed, label, i), scheme).expect("valid");
    let quota_key = key(b"adv-quota", 0);
    let invalid_key = key(b"adv-invalid", 0);
    plan.eligible_keys = vec![quota_key.public.clone(), invalid_key.public.clone()];
    let k = topology.nodes;
    let mut adv_counter = 0u64;
    let mut fresh = |kp: &KeyPair, valid: bool, rng: &mut ChaCha8Rng, plan: &mut AdversaryPlan| {
        let obj = MempoolObject::new(
            object_payload(sc.seed, b"adv", adv_counter, sc.workload.object_size, rng),
            valid,
        );
        let env = make_envelope(
            &kp.secret,
            &kp.public,
            obj.payload.clone(),
            &sc.domain,
            Nonce::from_counter(sc.seed, u64::MAX - 1, adv_counter),
        );
        adv_counter += 1;
        plan.objects.push(obj);
        env
    };
    let push = |plan: &mut AdversaryPlan, tick, from, to, envelope, kind| {
        plan.injections.push(Injection {
            tick,
            from,
            to,
            envelope,
            kind,
        });
    };

    for i in 0..a.forged {
        let mut env = fresh(&quota_key, true, &mut rng, &mut plan);
        if !honest_keys.is_empty() {
            env.attester_pk = honest_keys[rng.gen_range(0..honest_keys.len())].clone();
        }
        let mut sig = vec![0u8; env.attestation.len()];
        rng.fill_bytes(&mut sig);
        env.attestation = Signature(sig);
        let to = rng.gen_range(0..k);
        let t = spread(a.start_tick, a.span_ticks, i, a.forged);
        push(&mut plan, t, Endpoint::Adversary, to, env, InjectionKind::Forged);
    }

    for i in 0..a.replays {
        let victim = &honest[rng.gen_range(0..honest.len())];
        let to = rng.gen_range(0..k);
        let t = spread(a.start_tick, a.span_ticks, i, a.replays).max(victim.tick);
        push(&mut plan, t, Endpoint::Adversary, to, victim.envelope.clone(), InjectionKind::Replay);
    }

    let burst_entry = rng.gen_range(0..k);
    for _ in 0..a.over_quota_burst {
        let env = fresh(&quota_key, true, &mut rng, &mut plan);
        push(&mut plan, a.start_tick, Endpoint::Adversary, burst_entry, env, InjectionKind::OverQuota);
    }

    for i in 0..a.mutations {
        let victim = &honest[rng.gen_range(0..honest.len())];
        let mut env = victim.envelope.clone();
        let kind = match i % 4 {
            0 => {
                let at = rng.gen_range(0..env.object.len());
                env.object[at] ^= rng.gen_range(1..=255u8);
                InjectionKind::MutateObject
            }
            1 => {
                env.nonce.0[rng.gen_range(0..16)] ^= rng.gen_range(1..=255u8);
                InjectionKind::MutateNonce
            }
            2 => {
                let others: Vec<&PublicKey> = honest_keys
                    .iter()
                    .chain(&plan.eligible_keys)
                    .filter(|pk| **pk != env.attester_pk)
                    .collect();
                env.attester_pk = others[rng.gen_range(0..others.len())].clone();
                InjectionKind::MutateKey
            }
            _ => {
                let at = rng.gen_range(0..env.attestation.len());
                env.attestation.0[at] ^= 1 << rng.gen_range(0..8);
                InjectionKind::MutateAttestation
            }
        };
        let to = rng.gen_range(0..k);
        let from = match topology.peers(to) {
            [] => Endpoint::Adversary,
            peers => Endpoint::Relay(peers[rng.gen_range(0..peers.len())]),
        };
        let t = spread(a.start_tick, a.span_ticks, i, a.mutations).max(victim.tick);
        push(&mut plan, t, from, to, env, kind);
    }

    for i in 0..a.ineligible {
        let outsider = key(b"adv-outsider", i % 8);
        let env = fresh(&outsider, true, &mut rng, &mut plan);
        let to = rng.gen_range(0..k);
        let t = spread(a.start_tick, a.span_ticks, i, a.ineligible);
        push(&mut plan, t, Endpoint::Adversary, to, env, InjectionKind::Ineligible);
    }

    for i in 0..a.invalid_objects {
        let env = fresh(&invalid_key, false, &mut rng, &mut plan);
        let to = rng.gen_range(0..k);
        let t = spread(a.start_tick, a.span_ticks, i, a.invalid_objects);
        push(&mut plan, t, Endpoint::Adversary, to, env, InjectionKind::InvalidObject);
    }

    let rogue = keygen(&derive_seed(sc.seed, b"adv-meta", 0), SignatureScheme::ed25519())
        .expect("ed25519");
    for i in 0..a.forged_metadata {
        let outsiders: Vec<PublicKey> = (0..8).map(|j| key(b"adv-outsider", j).public).collect();
        let t = spread(a.start_tick, a.span_ticks, i, a.forged_metadata);
        plan.meta_updates
            .push((t, EligibilityUpdate::signed(&rogue, u64::MAX - i, outsiders, vec![])));
    }

    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attestation::verify_envelope;
    use crate::netsim::topology::build_topology;

    fn scenario(extra: &str) -> SimScenario {
        SimScenario::from_toml(&format!(
            r#"
            seed = 5
            mode = "ar-ace"
            [topology]
            nodes = 6
            degree = 2
            [timing]
            tick_interval = 0.5
            run_ticks = 40
            [workload]
            objects = 20
            submitters = 3
            invalid_fraction = 0.3
            {extra}
            "#
        ))
        .unwrap()
    }

    #[test]
    fn honest_workload_marks_exact_invalid_count() {
        let sc = scenario("");
        let topo = build_topology(6, 2, sc.seed).unwrap();
        let w = honest_workload(&sc, &topo);
        assert_eq!(w.objects.len(), 20);
        assert_eq!(w.objects.iter().filter(|o| !o.valid).count(), 6);
        assert_eq!(w.injections.len(), 20);
        for inj in &w.injections {
            assert!(verify_envelope(&inj.envelope, &sc.domain, &sc.profile));
        }
        let distinct: std::collections::BTreeSet<_> =
            w.objects.iter().map(|o| o.obj_hash).collect();
        assert_eq!(distinct.len(), 20);
    }

    #[test]
    fn adversary_plan_counts_and_breakage() {
        let sc = scenario(
            "[adversary]\nforged = 5\nreplays = 4\nover_quota_burst = 7\nmutations = 8\nineligible = 3\ninvalid_objects = 2\nforged_metadata = 1",
        );
        let topo = build_topology(6, 2, sc.seed).unwrap();
        let w = honest_workload(&sc, &topo);
        let keys: Vec<PublicKey> = w.submitters.iter().map(|s| s.keys.public.clone()).collect();
        let plan = inject_adversary(&sc, &topo, &w.injections, &keys);
        let count = |k: InjectionKind| plan.injections.iter().filter(|i| i.kind == k).count();
        assert_eq!(count(InjectionKind::Forged), 5);
        assert_eq!(count(InjectionKind::Replay), 4);
        assert_eq!(count(InjectionKind::OverQuota), 7);
        assert_eq!(plan.injections.iter().filter(|i| i.kind.is_mutation()).count(), 8);
        assert_eq!(count(InjectionKind::Ineligible), 3);
        assert_eq!(count(InjectionKind::InvalidObject), 2);
        assert_eq!(plan.meta_updates.len(), 1);
        for inj in &plan.injections {
            let ok = verify_envelope(&inj.envelope, &sc.domain, &sc.profile);
            match inj.kind {
                InjectionKind::Forged => assert!(!ok),
                k if k.is_mutation() => {
                    assert!(!ok, "{k}");
                    assert!(matches!(inj.from, Endpoint::Relay(_)));
                }
                _ => assert!(ok, "{}", inj.kind),
            }
        }
    }

    #[test]
    fn inactive_adversary_plans_nothing() {
        let sc = scenario("");
        let topo = build_topology(6, 2, sc.seed).unwrap();
        let plan = inject_adversary(&sc, &topo, &[], &[]);
        assert!(plan.injections.is_empty() && plan.meta_updates.is_empty());
    }
}
