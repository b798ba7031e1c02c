//! Scenario configuration.
//!
//! Scenarios are TOML documents with one section per subsystem. Parsing
//! and validation are separate steps: a document that is not valid TOML
//! or carries unknown keys is a [`ConfigError::Parse`]; a document that
//! parses but is missing a required field or holds an out-of-range value
//! is a [`ConfigError::Validation`] listing every offending field.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{AdmissionParams, DropReason};
use crate::attestation::Domain;
use crate::crypto::{Profile, ProfileKind, FULL_PQC_PUBLIC_KEY_SIZE, FULL_PQC_SIGNATURE_SIZE};
use crate::roles::DEFAULT_PROOF_SIZE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationMode {
    /// Every envelope carries its own validity proof on every hop.
    ProofCarrying,
    /// Every relay sends one recursive proof to each peer every tick.
    RecursiveTick,
    /// Attestation-only relay path; proofs stay at the builder.
    ArAce,
}

impl PropagationMode {
    pub const ALL: [PropagationMode; 3] = [
        PropagationMode::ProofCarrying,
        PropagationMode::RecursiveTick,
        PropagationMode::ArAce,
    ];
}

impl fmt::Display for PropagationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropagationMode::ProofCarrying => "proof-carrying",
            PropagationMode::RecursiveTick => "recursive-tick",
            PropagationMode::ArAce => "ar-ace",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub nodes: usize,
    pub degree: usize,
    /// Ticks per hop.
    pub hop_delay: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingParams {
    /// Tick length in microseconds.
    pub tick_interval_us: u64,
    pub run_ticks: u64,
    pub epoch_ticks: u64,
}

impl TimingParams {
    /// Tick length in seconds, exact.
    pub fn tick_seconds(&self) -> Ratio<u128> {
        Ratio::new(self.tick_interval_us as u128, 1_000_000)
    }

    /// Length of the submission window in seconds, exact.
    pub fn window_seconds(&self) -> Ratio<u128> {
        self.tick_seconds() * Ratio::from_integer(self.run_ticks as u128)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub objects: u64,
    pub object_size: usize,
    pub submitters: u64,
    pub submit_per_tick: u64,
    pub start_tick: u64,
    /// Entry relays per submitter.
    pub entry_fanout: usize,
    pub invalid_fraction: f64,
}

impl WorkloadParams {
    /// Number of honest objects marked invalid.
    pub fn invalid_count(&self) -> u64 {
        (self.objects as f64 * self.invalid_fraction).round() as u64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryParams {
    /// Random-signature envelopes under eligible honest keys.
    pub forged: u64,
    /// Re-injections of captured honest envelopes.
    pub replays: u64,
    /// Envelopes from one eligible adversary key, all in one tick.
    pub over_quota_burst: u64,
    /// Captured envelopes with one field altered, injected on relay links.
    pub mutations: u64,
    /// Valid-signature envelopes from keys outside the eligible set.
    pub ineligible: u64,
    /// Valid-attestation envelopes over invalid objects.
    pub invalid_objects: u64,
    /// Eligibility updates signed by a non-authority key.
    pub forged_metadata: u64,
    pub start_tick: u64,
    /// Ticks over which non-burst injections are spread.
    pub span_ticks: u64,
}

impl AdversaryParams {
    pub fn is_active(&self) -> bool {
        self.forged
            + self.replays
            + self.over_quota_burst
            + self.mutations
            + self.ineligible
            + self.invalid_objects
            + self.forged_metadata
            > 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuilderParams {
    /// Relays whose pools feed a builder.
    pub attach: Vec<usize>,
    pub block_interval: u64,
    pub capacity: usize,
    pub require_eligible: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostParams {
    /// Cost units per light attestation check.
    pub light: u64,
    /// Cost units per heavy proof check.
    pub heavy: u64,
}

/// Inputs for the compute-envelope comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeSection {
    pub objects: u64,
    pub ticks: u64,
    pub light: u64,
    pub heavy: u64,
    pub relays: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub name: String,
    pub seed: u64,
    pub mode: PropagationMode,
    pub domain: Domain,
    pub proof_size: u64,
    pub topology: TopologyParams,
    pub timing: TimingParams,
    pub profile: Profile,
    pub workload: WorkloadParams,
    pub admission: AdmissionParams,
    pub adversary: AdversaryParams,
    pub builder: BuilderParams,
    pub costs: CostParams,
    /// RecursiveTick: send tick proofs even when the pool is empty.
    pub tick_proof_always: bool,
    pub envelope: Option<EnvelopeSection>,
}

/// Largest seed a scenario document can hold (TOML integers are signed).
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
}

impl ConfigError {
    pub fn fields(&self) -> Vec<&str> {
        match self {
            ConfigError::Parse(_) => Vec::new(),
            ConfigError::Validation(v) => v.iter().map(|e| e.field.as_str()).collect(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    seed: Option<u64>,
    mode: Option<PropagationMode>,
    domain: Option<String>,
    proof_size: Option<u64>,
    #[serde(default)]
    topology: RawTopology,
    #[serde(default)]
    timing: RawTiming,
    #[serde(default)]
    profile: RawProfile,
    #[serde(default)]
    workload: RawWorkload,
    #[serde(default)]
    admission: RawAdmission,
    #[serde(default)]
    adversary: RawAdversary,
    #[serde(default)]
    builder: RawBuilder,
    #[serde(default)]
    recursive: RawRecursive,
    #[serde(default)]
    costs: RawCosts,
    envelope: Option<RawEnvelope>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    nodes: Option<usize>,
    degree: Option<usize>,
    hop_delay: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTiming {
    /// Seconds.
    tick_interval: Option<f64>,
    run_ticks: Option<u64>,
    epoch_ticks: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: Option<ProfileKind>,
    public_key_size: Option<usize>,
    signature_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    objects: Option<u64>,
    object_size: Option<usize>,
    submitters: Option<u64>,
    submit_per_tick: Option<u64>,
    start_tick: Option<u64>,
    entry_fanout: Option<usize>,
    invalid_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdmission {
    quota_limit: Option<u32>,
    violation_threshold: Option<u32>,
    denylist_epochs: Option<u64>,
    nonce_retention_epochs: Option<u64>,
    ttl_ticks: Option<u64>,
    strike_on: Option<Vec<DropReason>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdversary {
    forged: Option<u64>,
    replays: Option<u64>,
    over_quota_burst: Option<u64>,
    mutations: Option<u64>,
    ineligible: Option<u64>,
    invalid_objects: Option<u64>,
    forged_metadata: Option<u64>,
    start_tick: Option<u64>,
    span_ticks: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBuilder {
    attach: Option<Vec<usize>>,
    block_interval: Option<u64>,
    capacity: Option<usize>,
    require_eligible: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecursive {
    always_send: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCosts {
    light: Option<u64>,
    heavy: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    objects: Option<u64>,
    ticks: Option<u64>,
    light: Option<u64>,
    heavy: Option<u64>,
    relays: Option<u64>,
}

struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn require<T>(&mut self, field: &str, v: Option<T>) -> Option<T> {
        if v.is_none() {
            self.fail(field, "required field is missing");
        }
        v
    }

    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn positive(&mut self, field: &str, v: u64) {
        if v == 0 {
            self.fail(field, "must be > 0");
        }
    }
}

impl SimScenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        raw.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seed > MAX_SEED {
            return Err(ConfigError::Validation(vec![FieldError {
                field: "seed".into(),
                message: format!("must be at most {MAX_SEED}"),
            }]));
        }
        // Round-trip through the raw form so both paths share one checker.
        Self::from_toml(&self.to_toml()).map(|_| ())
    }

    /// Render back to the TOML configuration format.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(format!("name = {:?}", self.name));
        line(format!("seed = {}", self.seed));
        line(format!("mode = \"{}\"", self.mode));
        line(format!("domain = {:?}", String::from(self.domain.clone())));
        line(format!("proof_size = {}", self.proof_size));
        line("\n[topology]".into());
        line(format!("nodes = {}", self.topology.nodes));
        line(format!("degree = {}", self.topology.degree));
        line(format!("hop_delay = {}", self.topology.hop_delay));
        line("\n[timing]".into());
        line(format!(
            "tick_interval = {:?}",
            self.timing.tick_interval_us as f64 / 1e6
        ));
        line(format!("run_ticks = {}", self.timing.run_ticks));
        line(format!("epoch_ticks = {}", self.timing.epoch_ticks));
        line("\n[profile]".into());
        let kind = match self.profile.kind {
            ProfileKind::HybridPerformance => "hybrid-performance",
            ProfileKind::FullPqc => "full-pqc",
        };
        line(format!("kind = \"{kind}\""));
        if self.profile.kind == ProfileKind::FullPqc {
            line(format!("public_key_size = {}", self.profile.public_key_size()));
            line(format!("signature_size = {}", self.profile.signature_size()));
        }
        let w = &self.workload;
        line("\n[workload]".into());
        line(format!("objects = {}", w.objects));
        line(format!("object_size = {}", w.object_size));
        line(format!("submitters = {}", w.submitters));
        line(format!("submit_per_tick = {}", w.submit_per_tick));
        line(format!("start_tick = {}", w.start_tick));
        line(format!("entry_fanout = {}", w.entry_fanout));
        line(format!("invalid_fraction = {:?}", w.invalid_fraction));
        let a = &self.admission;
        line("\n[admission]".into());
        line(format!("quota_limit = {}", a.quota_limit));
        line(format!("violation_threshold = {}", a.violation_threshold));
        line(format!("denylist_epochs = {}", a.denylist_epochs));
        line(format!("nonce_retention_epochs = {}", a.nonce_retention_epochs));
        line(format!("ttl_ticks = {}", a.ttl_ticks));
        let strikes: Vec<String> = a
            .strike_on
            .iter()
            .map(|r| serde_json::to_string(r).expect("enum serializes"))
            .collect();
        line(format!("strike_on = [{}]", strikes.join(", ")));
        let x = &self.adversary;
        line("\n[adversary]".into());
        line(format!("forged = {}", x.forged));
        line(format!("replays = {}", x.replays));
        line(format!("over_quota_burst = {}", x.over_quota_burst));
        line(format!("mutations = {}", x.mutations));
        line(format!("ineligible = {}", x.ineligible));
        line(format!("invalid_objects = {}", x.invalid_objects));
        line(format!("forged_metadata = {}", x.forged_metadata));
        line(format!("start_tick = {}", x.start_tick));
        line(format!("span_ticks = {}", x.span_ticks));
        let b = &self.builder;
        line("\n[builder]".into());
        line(format!("attach = {:?}", b.attach));
        line(format!("block_interval = {}", b.block_interval));
        line(format!("capacity = {}", b.capacity));
        line(format!("require_eligible = {}", b.require_eligible));
        line("\n[recursive]".into());
        line(format!("always_send = {}", self.tick_proof_always));
        line("\n[costs]".into());
        line(format!("light = {}", self.costs.light));
        line(format!("heavy = {}", self.costs.heavy));
        if let Some(e) = &self.envelope {
            line("\n[envelope]".into());
            line(format!("objects = {}", e.objects));
            line(format!("ticks = {}", e.ticks));
            line(format!("light = {}", e.light));
            line(format!("heavy = {}", e.heavy));
            line(format!("relays = {}", e.relays));
        }
        out
    }
}

impl RawScenario {
    fn validate(self) -> Result<SimScenario, ConfigError> {
        let mut c = Checker { errors: Vec::new() };
        let seed = c.require("seed", self.seed);
        let mode = c.require("mode", self.mode);
        let nodes = c.require("topology.nodes", self.topology.nodes);
        let degree = c.require("topology.degree", self.topology.degree);
        let tick = c.require("timing.tick_interval", self.timing.tick_interval);
        let run_ticks = c.require("timing.run_ticks", self.timing.run_ticks);

        let domain = match Domain::new(self.domain.unwrap_or_else(|| "arace-sim".into()).into_bytes()) {
            Ok(d) => Some(d),
            Err(e) => {
                c.fail("domain", e.to_string());
                None
            }
        };
        let proof_size = self.proof_size.unwrap_or(DEFAULT_PROOF_SIZE);
        c.positive("proof_size", proof_size);

        if let (Some(k), Some(d)) = (nodes, degree) {
            if k == 0 {
                c.fail("topology.nodes", "must be > 0");
            }
            if k > 0 && d >= k {
                c.fail("topology.degree", format!("degree {d} must be < nodes {k}"));
            }
            if (k * d) % 2 != 0 {
                c.fail("topology.degree", format!("nodes*degree = {} must be even", k * d));
            }
            if k > 1 && d == 0 {
                c.fail("topology.degree", "degree 0 cannot connect more than one node");
            }
        }
        let hop_delay = self.topology.hop_delay.unwrap_or(1);
        c.positive("topology.hop_delay", hop_delay);

        let mut tick_interval_us = 0;
        if let Some(t) = tick {
            let us = (t * 1e6).round();
            if !t.is_finite() || t <= 0.0 || us < 1.0 {
                c.fail("timing.tick_interval", "must be a positive number of seconds");
            } else if ((t * 1e6) - us).abs() > 1e-6 {
                c.fail("timing.tick_interval", "must be a whole number of microseconds");
            } else {
                tick_interval_us = us as u64;
            }
        }
        if let Some(r) = run_ticks {
            c.positive("timing.run_ticks", r);
        }
        let epoch_ticks = self.timing.epoch_ticks.unwrap_or(run_ticks.unwrap_or(1).max(1));
        c.positive("timing.epoch_ticks", epoch_ticks);

        let kind = self.profile.kind.unwrap_or(ProfileKind::HybridPerformance);
        let profile = match kind {
            ProfileKind::HybridPerformance => {
                if self.profile.public_key_size.is_some_and(|s| s != 32)
                    || self.profile.signature_size.is_some_and(|s| s != 64)
                {
                    c.fail(
                        "profile",
                        "hybrid-performance uses fixed 32-byte keys and 64-byte signatures",
                    );
                }
                Profile::hybrid_performance()
            }
            ProfileKind::FullPqc => Profile::full_pqc_with_sizes(
                self.profile.public_key_size.unwrap_or(FULL_PQC_PUBLIC_KEY_SIZE),
                self.profile.signature_size.unwrap_or(FULL_PQC_SIGNATURE_SIZE),
            ),
        };
        if let Err(e) = profile.scheme.validate() {
            c.fail("profile", e.to_string());
        }

        let w = self.workload;
        let workload = WorkloadParams {
            objects: w.objects.unwrap_or(0),
            object_size: w.object_size.unwrap_or(256),
            submitters: w.submitters.unwrap_or(1),
            submit_per_tick: w.submit_per_tick.unwrap_or(1),
            start_tick: w.start_tick.unwrap_or(0),
            entry_fanout: w.entry_fanout.unwrap_or(1),
            invalid_fraction: w.invalid_fraction.unwrap_or(0.0),
        };
        if workload.object_size < 8 {
            c.fail("workload.object_size", "must be >= 8 bytes");
        }
        c.positive("workload.submitters", workload.submitters);
        c.positive("workload.submit_per_tick", workload.submit_per_tick);
        if workload.entry_fanout == 0 || nodes.is_some_and(|k| workload.entry_fanout > k) {
            c.fail("workload.entry_fanout", "must be in 1..=nodes");
        }
        if !(0.0..=1.0).contains(&workload.invalid_fraction) {
            c.fail("workload.invalid_fraction", "must be within [0, 1]");
        }

        let defaults = AdmissionParams::default();
        let a = self.admission;
        let admission = AdmissionParams {
            quota_limit: a.quota_limit.unwrap_or(defaults.quota_limit),
            violation_threshold: a.violation_threshold.unwrap_or(defaults.violation_threshold),
            denylist_epochs: a.denylist_epochs.unwrap_or(defaults.denylist_epochs),
            nonce_retention_epochs: a
                .nonce_retention_epochs
                .unwrap_or(defaults.nonce_retention_epochs),
            ttl_ticks: a.ttl_ticks.unwrap_or(defaults.ttl_ticks),
            strike_on: a
                .strike_on
                .map(|v| v.into_iter().collect::<BTreeSet<_>>())
                .unwrap_or(defaults.strike_on),
        };
        if admission.violation_threshold == 0 {
            c.fail("admission.violation_threshold", "must be > 0");
        }
        if admission.nonce_retention_epochs == 0 {
            c.fail("admission.nonce_retention_epochs", "must be > 0");
        }

        let x = self.adversary;
        let adversary = AdversaryParams {
            forged: x.forged.unwrap_or(0),
            replays: x.replays.unwrap_or(0),
            over_quota_burst: x.over_quota_burst.unwrap_or(0),
            mutations: x.mutations.unwrap_or(0),
            ineligible: x.ineligible.unwrap_or(0),
            invalid_objects: x.invalid_objects.unwrap_or(0),
            forged_metadata: x.forged_metadata.unwrap_or(0),
            start_tick: x.start_tick.unwrap_or(0),
            span_ticks: x.span_ticks.unwrap_or(run_ticks.unwrap_or(1).max(1)),
        };
        c.positive("adversary.span_ticks", adversary.span_ticks);
        if (adversary.replays > 0 || adversary.mutations > 0) && workload.objects == 0 {
            c.fail(
                "adversary",
                "replays and mutations capture honest envelopes; workload.objects must be > 0",
            );
        }

        let b = self.builder;
        let builder = BuilderParams {
            attach: b.attach.unwrap_or_else(|| vec![0]),
            block_interval: b.block_interval.unwrap_or(10),
            capacity: b.capacity.unwrap_or(1024),
            require_eligible: b.require_eligible.unwrap_or(false),
        };
        if let Some(k) = nodes {
            if builder.attach.iter().any(|&i| i >= k) {
                c.fail("builder.attach", "relay index out of range");
            }
        }
        c.positive("builder.block_interval", builder.block_interval);
        c.positive("builder.capacity", builder.capacity as u64);

        let costs = CostParams {
            light: self.costs.light.unwrap_or(1),
            heavy: self.costs.heavy.unwrap_or(100),
        };
        c.positive("costs.light", costs.light);
        c.positive("costs.heavy", costs.heavy);

        let envelope = self.envelope.map(|e| {
            let s = EnvelopeSection {
                objects: e.objects.unwrap_or(0),
                ticks: e.ticks.unwrap_or(0),
                light: e.light.unwrap_or(0),
                heavy: e.heavy.unwrap_or(0),
                relays: e.relays.unwrap_or(1),
            };
            c.positive("envelope.objects", s.objects);
            c.positive("envelope.ticks", s.ticks);
            c.positive("envelope.light", s.light);
            c.positive("envelope.heavy", s.heavy);
            c.positive("envelope.relays", s.relays);
            s
        });

        if !c.errors.is_empty() {
            return Err(ConfigError::Validation(c.errors));
        }
        Ok(SimScenario {
            name: self.name.unwrap_or_else(|| "unnamed".into()),
            seed: seed.expect("checked"),
            mode: mode.expect("checked"),
            domain: domain.expect("checked"),
            proof_size,
            topology: TopologyParams {
                nodes: nodes.expect("checked"),
                degree: degree.expect("checked"),
                hop_delay,
            },
            timing: TimingParams {
                tick_interval_us,
                run_ticks: run_ticks.expect("checked"),
                epoch_ticks,
            },
            profile,
            workload,
            admission,
            adversary,
            builder,
            costs,
            tick_proof_always: self.recursive.always_send.unwrap_or(true),
            envelope,
        })
    }
}
