//! Relay admission: eligibility, per-epoch quota, nonce replay set,
//! temporary denylisting and authenticated eligibility metadata.
//!
//! Checks run cheapest first: denylist, expiry, eligibility, quota, nonce,
//! and finally the signature. Quota and the nonce set change only on
//! `Accept`; a drop can at most add a strike toward denylisting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attestation::{self, Domain, Envelope, Nonce};
use crate::crypto::{self, KeyPair, Profile, PublicKey, Signature, SignatureScheme};

pub type Epoch = u64;
pub type Tick = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    Ineligible,
    Denylisted,
    QuotaExceeded,
    ReplayNonce,
    BadSignature,
    Expired,
}

impl DropReason {
    pub const ALL: [DropReason; 6] = [
        DropReason::Ineligible,
        DropReason::Denylisted,
        DropReason::QuotaExceeded,
        DropReason::ReplayNonce,
        DropReason::BadSignature,
        DropReason::Expired,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "outcome", content = "reason")]
pub enum AdmitDecision {
    Accept,
    Drop(DropReason),
}

impl AdmitDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, AdmitDecision::Accept)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdmissionError {
    #[error("epoch must advance: current {current}, requested {requested}")]
    NonMonotoneEpoch { current: Epoch, requested: Epoch },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionParams {
    /// Accepts allowed per key per epoch.
    pub quota_limit: u32,
    pub violation_threshold: u32,
    pub denylist_epochs: u64,
    pub nonce_retention_epochs: u64,
    pub ttl_ticks: u64,
    /// Drop reasons that count as a strike.
    pub strike_on: BTreeSet<DropReason>,
}

impl Default for AdmissionParams {
    fn default() -> Self {
        Self {
            quota_limit: 64,
            violation_threshold: 3,
            denylist_epochs: 4,
            nonce_retention_epochs: 2,
            ttl_ticks: 240,
            strike_on: [DropReason::BadSignature, DropReason::QuotaExceeded]
                .into_iter()
                .collect(),
        }
    }
}

/// Deliberate defects for detector non-vacuity tests. Never set in normal
/// operation.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissionFault {
    SkipDenylist,
    SkipEligibility,
    SkipQuota,
    SkipNonce,
    SkipSignature,
    SkipMetadataAuth,
    SkipEpochReset,
}

/// Timing context for one admission decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdmitContext {
    pub tick: Tick,
    /// Tick at which the envelope first appeared on the network.
    pub first_seen: Tick,
}

impl AdmitContext {
    pub fn at(tick: Tick) -> Self {
        Self {
            tick,
            first_seen: tick,
        }
    }
}

/// Authority-signed replacement of the eligibility metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EligibilityUpdate {
    pub metadata_epoch: u64,
    pub eligible: Vec<PublicKey>,
    /// `(key, expiry epoch)` denylist entries to install.
    pub denylist: Vec<(PublicKey, Epoch)>,
    pub signature: Signature,
}

impl EligibilityUpdate {
    pub fn signing_bytes(
        metadata_epoch: u64,
        eligible: &[PublicKey],
        denylist: &[(PublicKey, Epoch)],
    ) -> Vec<u8> {
        let mut m = b"arace/eligibility/v1".to_vec();
        m.extend_from_slice(&metadata_epoch.to_be_bytes());
        m.extend_from_slice(&(eligible.len() as u32).to_be_bytes());
        for k in eligible {
            m.extend_from_slice(&(k.0.len() as u32).to_be_bytes());
            m.extend_from_slice(&k.0);
        }
        m.extend_from_slice(&(denylist.len() as u32).to_be_bytes());
        for (k, exp) in denylist {
            m.extend_from_slice(&(k.0.len() as u32).to_be_bytes());
            m.extend_from_slice(&k.0);
            m.extend_from_slice(&exp.to_be_bytes());
        }
        m
    }

    pub fn signed(
        authority: &KeyPair,
        metadata_epoch: u64,
        eligible: Vec<PublicKey>,
        denylist: Vec<(PublicKey, Epoch)>,
    ) -> Self {
        let m = Self::signing_bytes(metadata_epoch, &eligible, &denylist);
        Self {
            signature: crypto::sign(&authority.secret, &m),
            metadata_epoch,
            eligible,
            denylist,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaRejection {
    BadSignature,
    StaleEpoch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaOutcome {
    Applied,
    Rejected(MetaRejection),
}

#[derive(Clone, Debug)]
pub struct MetadataAuthority {
    pub scheme: SignatureScheme,
    pub public_key: PublicKey,
}

/// Per-relay admission state.
#[derive(Clone, Debug)]
pub struct AdmissionState {
    params: AdmissionParams,
    profile: Profile,
    authority: Option<MetadataAuthority>,
    last_metadata_epoch: Option<u64>,
    eligible: BTreeSet<PublicKey>,
    quota_used: BTreeMap<PublicKey, u32>,
    seen_nonces: BTreeMap<(PublicKey, Nonce), Epoch>,
    denylist: BTreeMap<PublicKey, Epoch>,
    strikes: BTreeMap<PublicKey, u32>,
    epoch: Epoch,
    signature_checks: u64,
    fault: Option<AdmissionFault>,
}

impl AdmissionState {
    pub fn new(
        params: AdmissionParams,
        profile: Profile,
        eligible: impl IntoIterator<Item = PublicKey>,
    ) -> Self {
        Self {
            params,
            profile,
            authority: None,
            last_metadata_epoch: None,
            eligible: eligible.into_iter().collect(),
            quota_used: BTreeMap::new(),
            seen_nonces: BTreeMap::new(),
            denylist: BTreeMap::new(),
            strikes: BTreeMap::new(),
            epoch: 0,
            signature_checks: 0,
            fault: None,
        }
    }

    pub fn with_authority(mut self, authority: MetadataAuthority) -> Self {
        self.authority = Some(authority);
        self
    }

    #[doc(hidden)]
    pub fn with_fault(mut self, fault: Option<AdmissionFault>) -> Self {
        self.fault = fault;
        self
    }

    fn faulty(&self, f: AdmissionFault) -> bool {
        self.fault == Some(f)
    }

    pub fn params(&self) -> &AdmissionParams {
        &self.params
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn epoch(&self) -> Epoch {
        self.epoch
    }

    pub fn is_eligible(&self, pk: &PublicKey) -> bool {
        self.eligible.contains(pk)
    }

    pub fn eligible(&self) -> &BTreeSet<PublicKey> {
        &self.eligible
    }

    pub fn quota_used(&self, pk: &PublicKey) -> u32 {
        self.quota_used.get(pk).copied().unwrap_or(0)
    }

    pub fn is_denylisted(&self, pk: &PublicKey) -> bool {
        self.denylist.get(pk).is_some_and(|exp| *exp > self.epoch)
    }

    pub fn denylist_expiry(&self, pk: &PublicKey) -> Option<Epoch> {
        self.denylist.get(pk).copied()
    }

    pub fn strikes(&self, pk: &PublicKey) -> u32 {
        self.strikes.get(pk).copied().unwrap_or(0)
    }

    pub fn has_seen(&self, pk: &PublicKey, nonce: &Nonce) -> bool {
        self.seen_nonces.contains_key(&(pk.clone(), *nonce))
    }

    pub fn seen_nonce_count(&self) -> usize {
        self.seen_nonces.len()
    }

    /// Signature verifications performed so far.
    pub fn signature_checks(&self) -> u64 {
        self.signature_checks
    }

    /// Run the admission pipeline for one envelope.
    pub fn admit(&mut self, env: &Envelope, domain: &Domain, ctx: AdmitContext) -> AdmitDecision {
        let decision = self.evaluate(env, domain, ctx);
        match decision {
            AdmitDecision::Accept => {
                *self.quota_used.entry(env.attester_pk.clone()).or_insert(0) += 1;
                self.seen_nonces
                    .insert((env.attester_pk.clone(), env.nonce), self.epoch);
            }
            AdmitDecision::Drop(reason) => {
                if self.params.strike_on.contains(&reason) {
                    self.strike(&env.attester_pk);
                }
            }
        }
        decision
    }

    fn evaluate(&mut self, env: &Envelope, domain: &Domain, ctx: AdmitContext) -> AdmitDecision {
        use DropReason::*;
        let pk = &env.attester_pk;
        if self.is_denylisted(pk) && !self.faulty(AdmissionFault::SkipDenylist) {
            return AdmitDecision::Drop(Denylisted);
        }
        if ctx.tick.saturating_sub(ctx.first_seen) > self.params.ttl_ticks {
            return AdmitDecision::Drop(Expired);
        }
        if !self.eligible.contains(pk) && !self.faulty(AdmissionFault::SkipEligibility) {
            return AdmitDecision::Drop(Ineligible);
        }
        if self.quota_used(pk) >= self.params.quota_limit && !self.faulty(AdmissionFault::SkipQuota)
        {
            return AdmitDecision::Drop(QuotaExceeded);
        }
        if self.has_seen(pk, &env.nonce) && !self.faulty(AdmissionFault::SkipNonce) {
            return AdmitDecision::Drop(ReplayNonce);
        }
        if !self.faulty(AdmissionFault::SkipSignature) {
            self.signature_checks += 1;
            if !attestation::verify_envelope(env, domain, &self.profile) {
                return AdmitDecision::Drop(BadSignature);
            }
        }
        AdmitDecision::Accept
    }

    fn strike(&mut self, pk: &PublicKey) {
        let n = self.strikes.entry(pk.clone()).or_insert(0);
        *n += 1;
        if *n >= self.params.violation_threshold {
            self.strikes.remove(pk);
            self.denylist
                .insert(pk.clone(), self.epoch + self.params.denylist_epochs);
        }
    }

    /// Move to `new_epoch`: reset quotas, expire denylist entries and prune
    /// nonces older than the retention window.
    pub fn epoch_rollover(&mut self, new_epoch: Epoch) -> Result<(), AdmissionError> {
        if new_epoch <= self.epoch {
            return Err(AdmissionError::NonMonotoneEpoch {
                current: self.epoch,
                requested: new_epoch,
            });
        }
        self.epoch = new_epoch;
        if !self.faulty(AdmissionFault::SkipEpochReset) {
            self.quota_used.clear();
        }
        self.denylist.retain(|_, exp| *exp > new_epoch);
        let keep = self.params.nonce_retention_epochs;
        self.seen_nonces
            .retain(|_, recorded| *recorded + keep > new_epoch);
        Ok(())
    }

    /// Roll over if `epoch` is ahead of the current one; no-op otherwise.
    pub fn advance_to(&mut self, epoch: Epoch) {
        if epoch > self.epoch {
            self.epoch_rollover(epoch).expect("checked monotone");
        }
    }

    /// Apply an eligibility update if it is authority-signed and fresh.
    pub fn load_eligibility(&mut self, update: &EligibilityUpdate) -> MetaOutcome {
        if !self.faulty(AdmissionFault::SkipMetadataAuth) {
            let Some(auth) = &self.authority else {
                return MetaOutcome::Rejected(MetaRejection::BadSignature);
            };
            let m = EligibilityUpdate::signing_bytes(
                update.metadata_epoch,
                &update.eligible,
                &update.denylist,
            );
            if !crypto::verify(&auth.scheme, &auth.public_key, &m, &update.signature) {
                return MetaOutcome::Rejected(MetaRejection::BadSignature);
            }
            if self
                .last_metadata_epoch
                .is_some_and(|last| update.metadata_epoch <= last)
            {
                return MetaOutcome::Rejected(MetaRejection::StaleEpoch);
            }
        }
        self.last_metadata_epoch = Some(update.metadata_epoch);
        self.eligible = update.eligible.iter().cloned().collect();
        for (k, exp) in &update.denylist {
            self.denylist.insert(k.clone(), *exp);
        }
        MetaOutcome::Applied
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attestation::make_envelope;
    use crate::crypto::keygen;

    struct Fx {
        profile: Profile,
        domain: Domain,
        honest: KeyPair,
        outsider: KeyPair,
        authority: KeyPair,
    }

    impl Fx {
        fn new() -> Self {
            let profile = Profile::hybrid_performance();
            Self {
                profile,
                domain: Domain::new(b"test-net".to_vec()).unwrap(),
                honest: keygen(&[1; 32], profile.scheme).unwrap(),
                outsider: keygen(&[2; 32], profile.scheme).unwrap(),
                authority: keygen(&[3; 32], SignatureScheme::ed25519()).unwrap(),
            }
        }

        fn state(&self, params: AdmissionParams) -> AdmissionState {
            AdmissionState::new(params, self.profile, [self.honest.public.clone()]).with_authority(
                MetadataAuthority {
                    scheme: SignatureScheme::ed25519(),
                    public_key: self.authority.public.clone(),
                },
            )
        }

        fn env(&self, kp: &KeyPair, i: u64) -> Envelope {
            make_envelope(
                &kp.secret,
                &kp.public,
                format!("object-{i}").into_bytes(),
                &self.domain,
                Nonce::from_counter(0, 0, i),
            )
        }

        fn bad_sig(&self, kp: &KeyPair, i: u64) -> Envelope {
            let mut e = self.env(kp, i);
            e.attestation.0[0] ^= 1;
            e
        }
    }

    fn params_q(q: u32) -> AdmissionParams {
        AdmissionParams {
            quota_limit: q,
            ..AdmissionParams::default()
        }
    }

    #[test]
    fn happy_path_accepts_and_counts() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(4));
        let e = fx.env(&fx.honest, 0);
        assert_eq!(st.admit(&e, &fx.domain, AdmitContext::at(0)), AdmitDecision::Accept);
        assert_eq!(st.quota_used(&fx.honest.public), 1);
        assert!(st.has_seen(&fx.honest.public, &e.nonce));
    }

    #[test]
    fn second_presentation_is_a_replay() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(4));
        let e = fx.env(&fx.honest, 0);
        st.admit(&e, &fx.domain, AdmitContext::at(0));
        assert_eq!(
            st.admit(&e, &fx.domain, AdmitContext::at(1)),
            AdmitDecision::Drop(DropReason::ReplayNonce)
        );
        assert_eq!(st.quota_used(&fx.honest.public), 1);
    }

    #[test]
    fn quota_exhaustion_drops_without_counting() {
        let fx = Fx::new();
        let mut st = fx.state(AdmissionParams {
            violation_threshold: 100,
            ..params_q(3)
        });
        for i in 0..3 {
            assert!(st.admit(&fx.env(&fx.honest, i), &fx.domain, AdmitContext::at(0)).is_accept());
        }
        assert_eq!(
            st.admit(&fx.env(&fx.honest, 3), &fx.domain, AdmitContext::at(0)),
            AdmitDecision::Drop(DropReason::QuotaExceeded)
        );
        assert_eq!(st.quota_used(&fx.honest.public), 3);
        assert!(!st.has_seen(&fx.honest.public, &fx.env(&fx.honest, 3).nonce));
    }

    #[test]
    fn ineligible_key_dropped_even_with_valid_signature() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(4));
        let e = fx.env(&fx.outsider, 0);
        assert!(attestation::verify_envelope(&e, &fx.domain, &fx.profile));
        assert_eq!(
            st.admit(&e, &fx.domain, AdmitContext::at(0)),
            AdmitDecision::Drop(DropReason::Ineligible)
        );
        assert_eq!(st.signature_checks(), 0);
    }

    #[test]
    fn bad_signature_strikes_lead_to_denylisting() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(100));
        for i in 0..3 {
            assert_eq!(
                st.admit(&fx.bad_sig(&fx.honest, i), &fx.domain, AdmitContext::at(0)),
                AdmitDecision::Drop(DropReason::BadSignature)
            );
        }
        assert!(st.is_denylisted(&fx.honest.public));
        assert_eq!(
            st.admit(&fx.env(&fx.honest, 10), &fx.domain, AdmitContext::at(0)),
            AdmitDecision::Drop(DropReason::Denylisted)
        );
        // Drops never touch quota or the nonce set.
        assert_eq!(st.quota_used(&fx.honest.public), 0);
        assert_eq!(st.seen_nonce_count(), 0);
    }

    #[test]
    fn quota_resets_on_rollover() {
        let fx = Fx::new();
        let mut st = fx.state(AdmissionParams {
            violation_threshold: 100,
            ..params_q(1)
        });
        assert!(st.admit(&fx.env(&fx.honest, 0), &fx.domain, AdmitContext::at(0)).is_accept());
        assert!(!st.admit(&fx.env(&fx.honest, 1), &fx.domain, AdmitContext::at(0)).is_accept());
        st.epoch_rollover(1).unwrap();
        assert!(st.admit(&fx.env(&fx.honest, 1), &fx.domain, AdmitContext::at(0)).is_accept());
    }

    #[test]
    fn denylist_expiry_arithmetic() {
        let fx = Fx::new();
        let mut st = fx.state(AdmissionParams {
            denylist_epochs: 2,
            ..params_q(100)
        });
        st.epoch_rollover(5).unwrap();
        for i in 0..3 {
            st.admit(&fx.bad_sig(&fx.honest, i), &fx.domain, AdmitContext::at(0));
        }
        assert_eq!(st.denylist_expiry(&fx.honest.public), Some(7));
        st.epoch_rollover(6).unwrap();
        assert_eq!(
            st.admit(&fx.env(&fx.honest, 10), &fx.domain, AdmitContext::at(0)),
            AdmitDecision::Drop(DropReason::Denylisted)
        );
        st.epoch_rollover(7).unwrap();
        assert!(st.admit(&fx.env(&fx.honest, 11), &fx.domain, AdmitContext::at(0)).is_accept());
    }

    #[test]
    fn nonce_retention_window() {
        let fx = Fx::new();
        let mut st = fx.state(AdmissionParams {
            nonce_retention_epochs: 2,
            ..params_q(100)
        });
        let e = fx.env(&fx.honest, 0);
        assert!(st.admit(&e, &fx.domain, AdmitContext::at(0)).is_accept());
        st.epoch_rollover(1).unwrap();
        assert_eq!(
            st.admit(&e, &fx.domain, AdmitContext::at(0)),
            AdmitDecision::Drop(DropReason::ReplayNonce)
        );
        st.epoch_rollover(2).unwrap();
        assert!(!st.has_seen(&fx.honest.public, &e.nonce));
    }

    #[test]
    fn rollover_must_advance() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(1));
        st.epoch_rollover(3).unwrap();
        assert_eq!(
            st.epoch_rollover(3),
            Err(AdmissionError::NonMonotoneEpoch {
                current: 3,
                requested: 3
            })
        );
        assert!(st.epoch_rollover(2).is_err());
    }

    #[test]
    fn expired_envelopes_are_dropped() {
        let fx = Fx::new();
        let mut st = fx.state(AdmissionParams {
            ttl_ticks: 10,
            ..params_q(10)
        });
        let ctx = AdmitContext {
            tick: 11,
            first_seen: 0,
        };
        assert_eq!(
            st.admit(&fx.env(&fx.honest, 0), &fx.domain, ctx),
            AdmitDecision::Drop(DropReason::Expired)
        );
        let ctx = AdmitContext {
            tick: 10,
            first_seen: 0,
        };
        assert!(st.admit(&fx.env(&fx.honest, 0), &fx.domain, ctx).is_accept());
    }

    #[test]
    fn eligibility_updates_are_authenticated_and_fresh() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(10));
        let add = EligibilityUpdate::signed(
            &fx.authority,
            1,
            vec![fx.honest.public.clone(), fx.outsider.public.clone()],
            vec![],
        );
        let mut forged = add.clone();
        forged.signature.0[5] ^= 0x10;
        assert_eq!(
            st.load_eligibility(&forged),
            MetaOutcome::Rejected(MetaRejection::BadSignature)
        );
        assert!(!st.is_eligible(&fx.outsider.public));

        assert_eq!(st.load_eligibility(&add), MetaOutcome::Applied);
        assert!(st.is_eligible(&fx.outsider.public));

        let remove =
            EligibilityUpdate::signed(&fx.authority, 2, vec![fx.honest.public.clone()], vec![]);
        assert_eq!(st.load_eligibility(&remove), MetaOutcome::Applied);
        assert!(!st.is_eligible(&fx.outsider.public));

        // Replaying the captured epoch-1 update must not restore the key.
        assert_eq!(
            st.load_eligibility(&add),
            MetaOutcome::Rejected(MetaRejection::StaleEpoch)
        );
        assert!(!st.is_eligible(&fx.outsider.public));
    }

    #[test]
    fn update_signed_by_non_authority_is_rejected() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(10));
        let rogue = EligibilityUpdate::signed(&fx.outsider, 1, vec![fx.outsider.public.clone()], vec![]);
        assert_eq!(
            st.load_eligibility(&rogue),
            MetaOutcome::Rejected(MetaRejection::BadSignature)
        );
        let mut no_auth = AdmissionState::new(params_q(1), fx.profile, []);
        let good = EligibilityUpdate::signed(&fx.authority, 1, vec![], vec![]);
        assert!(matches!(no_auth.load_eligibility(&good), MetaOutcome::Rejected(_)));
    }

    #[test]
    fn metadata_denylist_entries_apply() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(10));
        let u = EligibilityUpdate::signed(
            &fx.authority,
            1,
            vec![fx.honest.public.clone()],
            vec![(fx.honest.public.clone(), 3)],
        );
        assert_eq!(st.load_eligibility(&u), MetaOutcome::Applied);
        assert_eq!(
            st.admit(&fx.env(&fx.honest, 0), &fx.domain, AdmitContext::at(0)),
            AdmitDecision::Drop(DropReason::Denylisted)
        );
    }

    #[test]
    fn faults_disable_their_check() {
        let fx = Fx::new();
        let mut st = fx.state(params_q(1)).with_fault(Some(AdmissionFault::SkipQuota));
        assert!(st.admit(&fx.env(&fx.honest, 0), &fx.domain, AdmitContext::at(0)).is_accept());
        assert!(st.admit(&fx.env(&fx.honest, 1), &fx.domain, AdmitContext::at(0)).is_accept());
        assert_eq!(st.quota_used(&fx.honest.public), 2);
    }
}
