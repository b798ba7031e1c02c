//! Adversarial campaigns against the relay path.
//!
//! Each game runs many independent trials. A trial derives all of its
//! randomness from `(campaign seed, trial index)`, so any success can be
//! re-run from its [`Witness`] alone. Success counts are empirical
//! stand-ins for the advantage terms; zero successes is the expected
//! outcome for a correct build.
//!
//! Every campaign accepts an optional [`AdmissionFault`] so the detectors
//! can be shown to fire against a deliberately broken relay.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admission::{
    AdmissionFault, AdmissionParams, AdmissionState, AdmitContext, AdmitDecision, EligibilityUpdate, Epoch,
    MetaOutcome, MetadataAuthority,
};
use crate::attestation::{make_envelope, Domain, Envelope, Nonce};
use crate::crypto::{hash_object, keygen, KeyPair, Profile, PublicKey, Signature, SignatureScheme};
use crate::netsim::{self, derive_seed, RunOptions, TraceRecord};
use crate::roles::{aggregate_prove, consensus_check, Block, ConsensusVerdict, MempoolObject, ValidityOracle};
use crate::scenario::{SimScenario, MAX_SEED};

pub use crate::netsim::trace::TraceError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Game {
    Forge,
    Replay,
    Admit,
    StateConformance,
    NetMutation,
    InclusionSafety,
}

impl Game {
    pub const ALL: [Game; 6] = [
        Game::Forge,
        Game::Replay,
        Game::Admit,
        Game::StateConformance,
        Game::NetMutation,
        Game::InclusionSafety,
    ];

    fn label(&self) -> &'static [u8] {
        match self {
            Game::Forge => b"game-forge",
            Game::Replay => b"game-replay",
            Game::Admit => b"game-admit",
            Game::StateConformance => b"game-state",
            Game::NetMutation => b"game-net",
            Game::InclusionSafety => b"game-inclusion",
        }
    }
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Game::Forge => "forge",
            Game::Replay => "replay",
            Game::Admit => "admit",
            Game::StateConformance => "state-conformance",
            Game::NetMutation => "net-mutation",
            Game::InclusionSafety => "inclusion-safety",
        })
    }
}

/// Which term of the admission-bypass decomposition a success falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BypassClass {
    /// Eligibility metadata was subverted.
    Meta,
    /// Quota, nonce or denylist state was subverted.
    State,
    /// An in-flight modification was accepted.
    Net,
}

/// Everything needed to re-run one successful trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub game: Game,
    pub seed: u64,
    pub trial: u64,
    pub fault: Option<AdmissionFault>,
    pub detail: String,
    /// Scenario document for simulation-backed campaigns.
    pub scenario: Option<String>,
}

impl Witness {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("witness serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameOutcome {
    pub game: Game,
    pub trials: u64,
    pub successes: u64,
    /// Individual attack attempts across all trials.
    pub attempts: u64,
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub classes: BTreeMap<BypassClass, u64>,
    /// Campaign-specific counters, e.g. excluded queried replays.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub counters: BTreeMap<String, u64>,
    /// Fields an in-flight attacker can change without failing verification.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unsigned_fields: Vec<String>,
}

impl GameOutcome {
    pub fn passed(&self) -> bool {
        self.successes == 0
    }
}

#[derive(Clone, Debug)]
pub struct GameConfig {
    pub profile: Profile,
    pub fault: Option<AdmissionFault>,
    /// Admission parameters for the unit-level games. The quota is kept
    /// small so bursts stay cheap.
    pub admission: AdmissionParams,
    /// Successful-trial witnesses kept per campaign.
    pub max_witnesses: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            profile: Profile::hybrid_performance(),
            fault: None,
            admission: AdmissionParams {
                quota_limit: 4,
                ..AdmissionParams::default()
            },
            max_witnesses: 8,
        }
    }
}

#[derive(Debug, Default)]
struct TrialResult {
    attempts: u64,
    success: Option<String>,
    class: Option<BypassClass>,
    counters: BTreeMap<&'static str, u64>,
}

impl TrialResult {
    fn attempt(&mut self, accepted: bool, what: impl FnOnce() -> String) {
        self.attempts += 1;
        if accepted && self.success.is_none() {
            self.success = Some(what());
        }
    }

    fn attempt_class(&mut self, accepted: bool, class: BypassClass, what: impl FnOnce() -> String) {
        if accepted && self.success.is_none() {
            self.class = Some(class);
        }
        self.attempt(accepted, what);
    }

    fn count(&mut self, key: &'static str) {
        *self.counters.entry(key).or_default() += 1;
    }
}

fn trial_rng(game: Game, seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(seed, game.label(), trial))
}

fn game_domain() -> Domain {
    Domain::new(b"arace-game".to_vec()).expect("static label")
}

fn trial_key(rng: &mut ChaCha8Rng, cfg: &GameConfig) -> KeyPair {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    keygen(&seed, cfg.profile.scheme).expect("profile scheme is valid")
}

fn random_object(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut o = vec![0u8; rng.gen_range(8..128)];
    rng.fill_bytes(&mut o);
    o
}

fn random_nonce(rng: &mut ChaCha8Rng) -> Nonce {
    let mut n = [0u8; 16];
    rng.fill_bytes(&mut n);
    Nonce(n)
}

fn relay(cfg: &GameConfig, eligible: impl IntoIterator<Item = PublicKey>) -> AdmissionState {
    AdmissionState::new(cfg.admission.clone(), cfg.profile, eligible).with_fault(cfg.fault)
}

fn accepts(relay: &mut AdmissionState, env: &Envelope, domain: &Domain, tick: u64) -> bool {
    relay.admit(env, domain, AdmitContext::at(tick)).is_accept()
}

fn run_trials(
    game: Game,
    trials: u64,
    seed: u64,
    cfg: &GameConfig,
    trial: impl Fn(u64) -> TrialResult + Sync,
) -> GameOutcome {
    let results: Vec<(u64, TrialResult)> = (0..trials).into_par_iter().map(|t| (t, trial(t))).collect();
    let mut out = GameOutcome {
        game,
        trials,
        successes: 0,
        attempts: 0,
        witnesses: Vec::new(),
        classes: BTreeMap::new(),
        counters: BTreeMap::new(),
        unsigned_fields: Vec::new(),
    };
    for (t, r) in results {
        out.attempts += r.attempts;
        for (k, v) in r.counters {
            *out.counters.entry(k.to_string()).or_default() += v;
        }
        if let Some(detail) = r.success {
            out.successes += 1;
            if let Some(c) = r.class {
                *out.classes.entry(c).or_default() += 1;
            }
            if out.witnesses.len() < cfg.max_witnesses {
                out.witnesses.push(Witness {
                    game,
                    seed,
                    trial: t,
                    fault: cfg.fault,
                    detail,
                    scenario: None,
                });
            }
        }
    }
    out
}

/// Forgery: the adversary may query a signing oracle on chosen objects up
/// to `oracle_budget` times per trial, then submits random signatures,
/// bit-flipped oracle outputs and spliced signatures under the victim key.
/// Verbatim oracle outputs are queried by definition and are excluded.
pub fn run_forge_game(trials: u64, seed: u64, oracle_budget: u32, cfg: &GameConfig) -> GameOutcome {
    run_trials(Game::Forge, trials, seed, cfg, |t| forge_trial(seed, t, oracle_budget, cfg))
}

fn forge_trial(seed: u64, trial: u64, budget: u32, cfg: &GameConfig) -> TrialResult {
    let mut rng = trial_rng(Game::Forge, seed, trial);
    let domain = game_domain();
    let victim = trial_key(&mut rng, cfg);
    let mut r = TrialResult::default();
    let queried: Vec<Envelope> = (0..budget.max(1))
        .map(|_| {
            let obj = random_object(&mut rng);
            let nonce = random_nonce(&mut rng);
            make_envelope(&victim.secret, &victim.public, obj, &domain, nonce)
        })
        .collect();
    let is_queried = |e: &Envelope| {
        queried
            .iter()
            .any(|q| q.obj_hash() == e.obj_hash() && q.nonce == e.nonce && q.attestation == e.attestation)
    };
    let submit = |env: Envelope, what: &str, r: &mut TrialResult| {
        if is_queried(&env) {
            r.count("excluded-queried");
            return;
        }
        let mut relay = relay(cfg, [victim.public.clone()]);
        let ok = accepts(&mut relay, &env, &domain, 0);
        r.attempt(ok, || format!("{what} accepted under victim key"));
    };

    // Random signature on a fresh message.
    let mut sig = vec![0u8; cfg.profile.signature_size()];
    rng.fill_bytes(&mut sig);
    let fresh = Envelope {
        object: random_object(&mut rng),
        attestation: Signature(sig),
        attester_pk: victim.public.clone(),
        nonce: random_nonce(&mut rng),
    };
    submit(fresh, "random signature", &mut r);

    // Bit-flip mauling of an oracle output, either in the signature or in
    // a signed field.
    let mut mauled = queried[rng.gen_range(0..queried.len())].clone();
    match rng.gen_range(0..3) {
        0 => {
            let at = rng.gen_range(0..mauled.attestation.len());
            mauled.attestation.0[at] ^= 1 << rng.gen_range(0..8);
        }
        1 => {
            let at = rng.gen_range(0..mauled.object.len());
            mauled.object[at] ^= 1 << rng.gen_range(0..8);
        }
        _ => {
            mauled.nonce.0[rng.gen_range(0..16)] ^= 1 << rng.gen_range(0..8);
        }
    }
    submit(mauled, "bit-flipped oracle output", &mut r);

    // Signature from one query spliced onto a fresh object.
    let mut spliced = queried[rng.gen_range(0..queried.len())].clone();
    spliced.object = random_object(&mut rng);
    submit(spliced, "spliced signature", &mut r);

    // Verbatim oracle output: a replay of a queried message, not a forgery.
    submit(queried[0].clone(), "verbatim oracle output", &mut r);
    r
}

/// Replay: reuse of captured attestations on a different object, nonce or
/// domain, plus verbatim resends within the retention window.
pub fn run_replay_game(trials: u64, seed: u64, cfg: &GameConfig) -> GameOutcome {
    run_trials(Game::Replay, trials, seed, cfg, |t| replay_trial(seed, t, cfg))
}

fn replay_trial(seed: u64, trial: u64, cfg: &GameConfig) -> TrialResult {
    let mut rng = trial_rng(Game::Replay, seed, trial);
    let domain = game_domain();
    let other_domain = Domain::new(format!("arace-other-{}", trial % 7).into_bytes()).expect("short label");
    let honest = trial_key(&mut rng, cfg);
    let mut r = TrialResult::default();
    let captured = make_envelope(
        &honest.secret,
        &honest.public,
        random_object(&mut rng),
        &domain,
        random_nonce(&mut rng),
    );
    let mut node = relay(cfg, [honest.public.clone()]);
    assert!(
        cfg.fault.is_some() || accepts(&mut node, &captured, &domain, 0),
        "honest envelope must be admitted"
    );
    if cfg.fault.is_some() {
        node.admit(&captured, &domain, AdmitContext::at(0));
    }

    let mut other_object = captured.clone();
    other_object.object = random_object(&mut rng);
    let ok = accepts(&mut node, &other_object, &domain, 1);
    r.attempt(ok, || "attestation reused on a different object".into());

    let mut other_nonce = captured.clone();
    other_nonce.nonce = random_nonce(&mut rng);
    let ok = accepts(&mut node, &other_nonce, &domain, 1);
    r.attempt(ok, || "attestation reused under a fresh nonce".into());

    let mut foreign = relay(cfg, [honest.public.clone()]);
    let ok = accepts(&mut foreign, &captured, &other_domain, 1);
    r.attempt(ok, || "envelope accepted on a different domain".into());

    let ok = accepts(&mut node, &captured, &domain, 2);
    r.attempt(ok, || "identical envelope accepted twice".into());

    // Still inside the retention window after one rollover.
    if cfg.admission.nonce_retention_epochs > 1 {
        node.advance_to(node.epoch() + 1);
        let ok = accepts(&mut node, &captured, &domain, 3);
        r.attempt(ok, || "identical envelope accepted after rollover within retention".into());
    }
    r
}

fn authority_key(seed: u64, trial: u64) -> KeyPair {
    keygen(&derive_seed(seed, b"game-authority", trial), SignatureScheme::ed25519()).expect("ed25519")
}

/// Admission bypass: ineligible floods, quota bursts, denylisted keys,
/// forged and stale eligibility metadata. Successes are classified by the
/// subverted component.
pub fn run_admit_game(trials: u64, seed: u64, cfg: &GameConfig) -> GameOutcome {
    run_trials(Game::Admit, trials, seed, cfg, |t| admit_trial(seed, t, cfg))
}

fn admit_trial(seed: u64, trial: u64, cfg: &GameConfig) -> TrialResult {
    use BypassClass::*;
    let mut rng = trial_rng(Game::Admit, seed, trial);
    let domain = game_domain();
    let eligible = trial_key(&mut rng, cfg);
    let outsider = trial_key(&mut rng, cfg);
    let authority = authority_key(seed, trial);
    let rogue = trial_key(&mut rng, &GameConfig {
        profile: Profile::hybrid_performance(),
        ..cfg.clone()
    });
    let q = cfg.admission.quota_limit;
    let mut r = TrialResult::default();
    let mut node = relay(cfg, [eligible.public.clone()]).with_authority(MetadataAuthority {
        scheme: SignatureScheme::ed25519(),
        public_key: authority.public.clone(),
    });
    let mut counter = 0u64;
    let mut envelope = |kp: &KeyPair, rng: &mut ChaCha8Rng| {
        counter += 1;
        make_envelope(
            &kp.secret,
            &kp.public,
            random_object(rng),
            &domain,
            Nonce::from_counter(seed, trial, counter),
        )
    };
    let mut tick = 0;

    // Ineligible key with valid signatures.
    for _ in 0..3 {
        let env = envelope(&outsider, &mut rng);
        let ok = accepts(&mut node, &env, &domain, tick);
        r.attempt_class(ok, Meta, || "ineligible key admitted".into());
    }

    // 10Q burst from the eligible key in one epoch: exactly Q accepts.
    let mut accepted = 0u32;
    for i in 0..10 * q {
        let env = envelope(&eligible, &mut rng);
        if accepts(&mut node, &env, &domain, tick) {
            accepted += 1;
        }
        let over = accepted > q;
        r.attempt_class(over, State, || format!("accept {accepted} of burst exceeds quota {q} at message {i}"));
    }
    if accepted == q {
        r.count("burst-exact-quota");
    }

    // The burst struck the key into the denylist; quotas reset next epoch.
    if node.is_denylisted(&eligible.public) {
        r.count("burst-denylisted");
        let expiry = node.denylist_expiry(&eligible.public).unwrap_or(0);
        let epoch = node.epoch() + 1;
        if epoch < expiry {
            node.advance_to(epoch);
            tick += 1;
            let env = envelope(&eligible, &mut rng);
            let ok = accepts(&mut node, &env, &domain, tick);
            r.attempt_class(ok, State, || format!("denylisted key admitted in epoch {epoch}"));
        }
    }

    // Forged metadata naming the outsider eligible.
    let forged = EligibilityUpdate::signed(&rogue, 1_000 + trial, vec![outsider.public.clone()], vec![]);
    let applied = node.load_eligibility(&forged) == MetaOutcome::Applied;
    r.attempt_class(applied, Meta, || "forged eligibility update applied".into());
    let env = envelope(&outsider, &mut rng);
    let ok = accepts(&mut node, &env, &domain, tick);
    r.attempt_class(ok, Meta, || "outsider admitted after forged metadata".into());

    // Authority adds then removes the outsider; the adversary replays the
    // older update.
    let add = EligibilityUpdate::signed(
        &authority,
        1,
        vec![eligible.public.clone(), outsider.public.clone()],
        vec![],
    );
    let remove = EligibilityUpdate::signed(&authority, 2, vec![eligible.public.clone()], vec![]);
    node.load_eligibility(&add);
    node.load_eligibility(&remove);
    let stale = node.load_eligibility(&add) == MetaOutcome::Applied;
    r.attempt_class(stale, Meta, || "stale eligibility update re-applied".into());
    let env = envelope(&outsider, &mut rng);
    let ok = accepts(&mut node, &env, &domain, tick);
    r.attempt_class(ok, Meta, || "removed key admitted after stale metadata replay".into());
    r
}

/// In-flight mutation of a valid envelope between two relays: object,
/// nonce and key substitution, attestation bit flips, and raw byte flips
/// of the wire frame.
pub fn run_net_mutation_game(trials: u64, seed: u64, cfg: &GameConfig) -> GameOutcome {
    let mut out = run_trials(Game::NetMutation, trials, seed, cfg, |t| net_trial(seed, t, cfg));
    out.unsigned_fields = vec![
        "epoch tag: not carried on the wire; relays use their local epoch".into(),
        "length prefix: framing only; altering it corrupts the decoded object".into(),
    ];
    out
}

fn net_trial(seed: u64, trial: u64, cfg: &GameConfig) -> TrialResult {
    use BypassClass::Net;
    let mut rng = trial_rng(Game::NetMutation, seed, trial);
    let domain = game_domain();
    let a = trial_key(&mut rng, cfg);
    let b = trial_key(&mut rng, cfg);
    let original = make_envelope(&a.secret, &a.public, random_object(&mut rng), &domain, random_nonce(&mut rng));
    let other = make_envelope(&b.secret, &b.public, random_object(&mut rng), &domain, random_nonce(&mut rng));
    let mut r = TrialResult::default();
    let check = |env: Envelope, what: String, r: &mut TrialResult| {
        let mut node = relay(cfg, [a.public.clone(), b.public.clone()]);
        let ok = accepts(&mut node, &env, &domain, 0);
        r.attempt_class(ok, Net, || what);
    };

    let mut m = original.clone();
    m.object = other.object.clone();
    check(m, "object substitution".into(), &mut r);

    let mut m = original.clone();
    m.nonce = other.nonce;
    check(m, "nonce substitution".into(), &mut r);

    let mut m = original.clone();
    m.attester_pk = b.public.clone();
    check(m, "key substitution to another eligible key".into(), &mut r);

    let mut m = original.clone();
    m.attestation = other.attestation.clone();
    check(m, "attestation substitution".into(), &mut r);

    let mut m = original.clone();
    let at = rng.gen_range(0..m.attestation.len());
    m.attestation.0[at] ^= 1 << rng.gen_range(0..8);
    check(m, format!("attestation bit flip at byte {at}"), &mut r);

    let mut frame = original.encode_wire();
    let at = rng.gen_range(0..frame.len());
    frame[at] ^= rng.gen_range(1..=255u8);
    match Envelope::decode_wire(&frame, &cfg.profile) {
        Ok(decoded) if decoded != original => check(decoded, format!("wire byte {at} flipped"), &mut r),
        Ok(_) => r.count("frame-flip-no-change"),
        Err(_) => r.count("frame-flip-undecodable"),
    }
    r
}

/// Kind of divergence between a decision trace and the reference admission
/// model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    QuotaOverflow,
    DoubleNonceAccept,
    MissedEpochReset,
    QuotaCounterMismatch,
    EpochMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 1-based record index in the trace.
    pub record: usize,
    pub relay: usize,
    pub detail: String,
}

#[derive(Default)]
struct RelayModel {
    epoch: Epoch,
    rolled: bool,
    quota: BTreeMap<String, u32>,
    nonces: BTreeMap<(String, String), Epoch>,
}

/// Replay a decision trace against a reference model of the admission
/// state machine and list every divergence.
pub fn check_state_conformance(trace: &[TraceRecord]) -> Result<Vec<Violation>, TraceError> {
    let Some(TraceRecord::Header {
        quota_limit,
        nonce_retention_epochs,
        ..
    }) = trace.first()
    else {
        return Err(TraceError {
            line: 1,
            message: "trace must start with a header record".into(),
        });
    };
    let (q, keep) = (*quota_limit, *nonce_retention_epochs);
    let mut relays: BTreeMap<usize, RelayModel> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, rec) in trace.iter().enumerate().skip(1) {
        let mut flag = |kind, relay, detail: String| {
            out.push(Violation {
                kind,
                record: i + 1,
                relay,
                detail,
            })
        };
        match rec {
            TraceRecord::Header { .. } => {
                return Err(TraceError {
                    line: i + 1,
                    message: "second header record".into(),
                })
            }
            TraceRecord::Rollover { relay, epoch, .. } => {
                let m = relays.entry(*relay).or_default();
                m.epoch = *epoch;
                m.rolled = true;
                m.quota.clear();
                m.nonces.retain(|_, e| *e + keep > *epoch);
            }
            TraceRecord::Decision {
                relay,
                epoch,
                pk,
                nonce,
                decision,
                quota_used,
                ..
            } => {
                let m = relays.entry(*relay).or_default();
                if *epoch != m.epoch {
                    flag(
                        ViolationKind::EpochMismatch,
                        *relay,
                        format!("decision in epoch {epoch}, model at {}", m.epoch),
                    );
                }
                if *decision == AdmitDecision::Accept {
                    let used = m.quota.entry(pk.clone()).or_default();
                    *used += 1;
                    if *used > q {
                        flag(
                            ViolationKind::QuotaOverflow,
                            *relay,
                            format!("key {pk} accepted {used} times against quota {q}"),
                        );
                    }
                    let key = (pk.clone(), nonce.clone());
                    if let Some(e) = m.nonces.get(&key) {
                        flag(
                            ViolationKind::DoubleNonceAccept,
                            *relay,
                            format!("nonce {nonce} of key {pk} accepted again (first in epoch {e})"),
                        );
                    }
                    m.nonces.insert(key, m.epoch);
                }
                let model = m.quota.get(pk).copied().unwrap_or(0);
                if *quota_used != model {
                    let kind = if m.rolled && *quota_used > model {
                        ViolationKind::MissedEpochReset
                    } else {
                        ViolationKind::QuotaCounterMismatch
                    };
                    flag(kind, *relay, format!("key {pk} counter {quota_used}, model {model}"));
                }
            }
            TraceRecord::Meta { .. } | TraceRecord::Block { .. } => {}
        }
    }
    Ok(out)
}

/// Adversarial scenario used by the simulation-backed campaigns.
pub fn campaign_scenario(seed: u64, invalid_fraction: f64) -> SimScenario {
    SimScenario::from_toml(&format!(
        r#"
name = "campaign"
seed = {seed}
mode = "ar-ace"
[topology]
nodes = 8
degree = 3
[timing]
tick_interval = 0.5
run_ticks = 48
epoch_ticks = 12
[workload]
objects = 96
submitters = 4
submit_per_tick = 2
invalid_fraction = {invalid_fraction}
[admission]
quota_limit = 8
[adversary]
forged = 8
replays = 12
over_quota_burst = 24
mutations = 8
ineligible = 6
invalid_objects = 6
forged_metadata = 1
span_ticks = 40
[builder]
block_interval = 6
"#
    ))
    .expect("campaign scenario is valid")
}

/// Witness detail if the run broke the property, plus its counters.
type RunVerdict = (Option<String>, BTreeMap<&'static str, u64>);

fn campaign(
    game: Game,
    runs: u64,
    seed: u64,
    cfg: &GameConfig,
    run: impl Fn(&SimScenario) -> RunVerdict + Sync,
    invalid_fraction: f64,
) -> GameOutcome {
    let results: Vec<_> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let run_seed = u64::from_be_bytes(derive_seed(seed, game.label(), i)[..8].try_into().expect("8 bytes"));
            let sc = campaign_scenario(run_seed & MAX_SEED, invalid_fraction);
            let (fail, counters) = run(&sc);
            (i, sc, fail, counters)
        })
        .collect();
    let mut out = GameOutcome {
        game,
        trials: runs,
        successes: 0,
        attempts: runs,
        witnesses: Vec::new(),
        classes: BTreeMap::new(),
        counters: BTreeMap::new(),
        unsigned_fields: Vec::new(),
    };
    for (i, sc, fail, counters) in results {
        for (k, v) in counters {
            *out.counters.entry(k.to_string()).or_default() += v;
        }
        if let Some(detail) = fail {
            out.successes += 1;
            if out.witnesses.len() < cfg.max_witnesses {
                out.witnesses.push(Witness {
                    game,
                    seed,
                    trial: i,
                    fault: cfg.fault,
                    detail,
                    scenario: Some(sc.to_toml()),
                });
            }
        }
    }
    out
}

fn state_run(sc: &SimScenario, fault: Option<AdmissionFault>) -> RunVerdict {
    let out = netsim::run_with(sc, RunOptions { fault }).expect("campaign topology is feasible");
    let violations = check_state_conformance(&out.trace).expect("engine emits a header");
    let mut counters = BTreeMap::new();
    counters.insert("decisions", out.report.admission.decisions());
    counters.insert("violations", violations.len() as u64);
    let fail = violations
        .first()
        .map(|v| format!("{} violations, first {:?} at record {}: {}", violations.len(), v.kind, v.record, v.detail));
    (fail, counters)
}

/// Run `runs` adversarial simulations and check each trace for
/// conformance. A success is a run with at least one violation.
pub fn run_state_conformance_campaign(runs: u64, seed: u64, cfg: &GameConfig) -> GameOutcome {
    campaign(Game::StateConformance, runs, seed, cfg, |sc| state_run(sc, cfg.fault), 0.0)
}

fn inclusion_run(sc: &SimScenario, fault: Option<AdmissionFault>) -> RunVerdict {
    let out = netsim::run_with(sc, RunOptions { fault }).expect("campaign topology is feasible");
    let b = &out.report.blocks;
    let mut counters = BTreeMap::new();
    counters.insert("blocks-accepted", b.accepted);
    counters.insert("invalid-pool-entries", out.report.pools.invalid_pool_entries);
    counters.insert("invalid-dropped-by-builder", b.invalid_dropped_by_builder);
    if b.invalid_in_accepted > 0 {
        return (Some(format!("{} invalid objects finalized", b.invalid_in_accepted)), counters);
    }
    // Adversarial builder: force an invalid pooled object into a block and
    // claim the proof is well formed.
    let invalid: Vec<MempoolObject> = out
        .relays
        .iter()
        .flat_map(|r| r.pool.values())
        .map(|e| out.oracle.object_for(&e.envelope.object))
        .filter(|o| !o.valid)
        .take(3)
        .collect();
    if !invalid.is_empty() {
        let mut proof = aggregate_prove(&[], &out.oracle, sc.proof_size).expect("empty set proves");
        proof.object_hashes = invalid.iter().map(|o| o.obj_hash).collect();
        proof.well_formed = true;
        let block = Block {
            height: u64::MAX,
            tick: 0,
            included: invalid,
            proof,
        };
        counters.insert("forged-blocks", 1);
        if consensus_check(&block, &out.oracle) == ConsensusVerdict::Accept {
            return (Some("forged well-formed block accepted".into()), counters);
        }
    }
    (None, counters)
}

/// Seeded runs with a 30% invalid-object workload plus adversarial
/// invalid-object injection. A success is any accepted block containing an
/// oracle-invalid object.
pub fn run_inclusion_safety_campaign(runs: u64, seed: u64, cfg: &GameConfig) -> GameOutcome {
    campaign(Game::InclusionSafety, runs, seed, cfg, |sc| inclusion_run(sc, cfg.fault), 0.3)
}

/// Re-run the trial a witness points at and report whether it still
/// succeeds.
pub fn replay_witness(w: &Witness, cfg: &GameConfig, oracle_budget: u32) -> bool {
    let cfg = GameConfig {
        fault: w.fault,
        ..cfg.clone()
    };
    let sim = |run: fn(&SimScenario, Option<AdmissionFault>) -> RunVerdict| {
        let sc = w
            .scenario
            .as_deref()
            .and_then(|s| SimScenario::from_toml(s).ok());
        sc.is_some_and(|sc| run(&sc, w.fault).0.is_some())
    };
    match w.game {
        Game::Forge => forge_trial(w.seed, w.trial, oracle_budget, &cfg).success.is_some(),
        Game::Replay => replay_trial(w.seed, w.trial, &cfg).success.is_some(),
        Game::Admit => admit_trial(w.seed, w.trial, &cfg).success.is_some(),
        Game::NetMutation => net_trial(w.seed, w.trial, &cfg).success.is_some(),
        Game::StateConformance => sim(state_run),
        Game::InclusionSafety => sim(inclusion_run),
    }
}

/// Trial counts for a full campaign run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrialCounts {
    pub forge: u64,
    pub replay: u64,
    pub admit: u64,
    pub net_mutation: u64,
    pub state_runs: u64,
    pub inclusion_runs: u64,
    pub oracle_budget: u32,
}

impl Default for TrialCounts {
    fn default() -> Self {
        Self {
            forge: 100_000,
            replay: 10_000,
            admit: 10_000,
            net_mutation: 10_000,
            state_runs: 100,
            inclusion_runs: 50,
            oracle_budget: 4,
        }
    }
}

impl TrialCounts {
    /// Same count for every unit-level game; campaign run counts unchanged.
    pub fn uniform(trials: u64) -> Self {
        Self {
            forge: trials,
            replay: trials,
            admit: trials,
            net_mutation: trials,
            ..Self::default()
        }
    }
}

pub fn run_all(counts: &TrialCounts, seed: u64, cfg: &GameConfig) -> Vec<GameOutcome> {
    vec![
        run_forge_game(counts.forge, seed, counts.oracle_budget, cfg),
        run_replay_game(counts.replay, seed, cfg),
        run_admit_game(counts.admit, seed, cfg),
        run_state_conformance_campaign(counts.state_runs, seed, cfg),
        run_net_mutation_game(counts.net_mutation, seed, cfg),
        run_inclusion_safety_campaign(counts.inclusion_runs, seed, cfg),
    ]
}

/// Hand-built block with a forged well-formed flag over an invalid object.
pub fn forged_block_control(proof_size: u64) -> ConsensusVerdict {
    let bad = MempoolObject::new(b"not valid".to_vec(), false);
    let oracle: ValidityOracle = [bad.clone()].into_iter().collect();
    let mut proof = aggregate_prove(&[], &oracle, proof_size).expect("empty set proves");
    proof.object_hashes = vec![hash_object(&bad.payload)];
    proof.well_formed = true;
    consensus_check(
        &Block {
            height: 0,
            tick: 0,
            included: vec![bad],
            proof,
        },
        &oracle,
    )
}
