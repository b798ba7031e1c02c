//! Attestation message encoding and the on-path `Envelope`.
//!
//! The signed message is `objHash ∥ len(domain) ∥ domain ∥ nonce`. The
//! single length byte keeps the encoding injective across variable-length
//! domain labels.
//!
//! Wire framing, used for byte accounting:
//!
//! ```text
//! u32 BE object length ∥ object ∥ nonce (16) ∥ public key ∥ attestation
//! ```
//!
//! The domain is ambient per network and is never carried on the wire.
//! The 4-byte length prefix is accounted as object bytes; nonce, public
//! key and attestation are accounted as attestation bytes.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Digest32, Profile, PublicKey, SecretKey, Signature};

pub const NONCE_SIZE: usize = 16;
pub const OBJECT_LENGTH_PREFIX: usize = 4;
pub const MAX_DOMAIN_LEN: usize = 255;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttestationError {
    #[error("domain label must be 1..=255 bytes, got {0}")]
    DomainLength(usize),
    #[error("nonce must be {NONCE_SIZE} bytes, got {0}")]
    NonceLength(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("frame has {0} trailing bytes")]
    Trailing(usize),
    #[error("empty object")]
    EmptyObject,
}

/// Domain separator: chain, mempool instance or application label.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Domain(Vec<u8>);

impl Domain {
    pub fn new(label: impl Into<Vec<u8>>) -> Result<Self, AttestationError> {
        let label = label.into();
        if label.is_empty() || label.len() > MAX_DOMAIN_LEN {
            return Err(AttestationError::DomainLength(label.len()));
        }
        Ok(Self(label))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Domain({:?})", String::from_utf8_lossy(&self.0))
    }
}

impl TryFrom<String> for Domain {
    type Error = AttestationError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Domain::new(s.into_bytes())
    }
}

impl From<Domain> for String {
    fn from(d: Domain) -> Self {
        String::from_utf8_lossy(&d.0).into_owned()
    }
}

/// Replay token carried in the clear alongside the attestation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Nonce(pub [u8; NONCE_SIZE]);

impl Nonce {
    /// Submitter nonce: big-endian counter followed by an 8-byte tag derived
    /// from the run seed and the submitter identity. Unique per submitter
    /// for every counter value.
    pub fn from_counter(run_seed: u64, submitter: u64, counter: u64) -> Self {
        let tag = crypto::hash_object(
            &[
                b"arace/nonce/v1".as_slice(),
                &run_seed.to_be_bytes(),
                &submitter.to_be_bytes(),
            ]
            .concat(),
        );
        let mut out = [0u8; NONCE_SIZE];
        out[..8].copy_from_slice(&counter.to_be_bytes());
        out[8..].copy_from_slice(&tag.0[..8]);
        Nonce(out)
    }

    pub fn from_slice(b: &[u8]) -> Result<Self, AttestationError> {
        Ok(Nonce(
            b.try_into()
                .map_err(|_| AttestationError::NonceLength(b.len()))?,
        ))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", self.to_hex())
    }
}

/// Encode the signed attestation message. Length is `49 + |domain|`.
pub fn encode_message(obj_hash: &Digest32, domain: &Domain, nonce: &Nonce) -> Vec<u8> {
    let mut m = Vec::with_capacity(32 + 1 + domain.0.len() + NONCE_SIZE);
    m.extend_from_slice(obj_hash.as_bytes());
    // Domain::new bounds the length to 255.
    m.push(domain.0.len() as u8);
    m.extend_from_slice(&domain.0);
    m.extend_from_slice(&nonce.0);
    m
}

/// The on-path unit `(obj, Attest, pk, nonce)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub object: Vec<u8>,
    pub attestation: Signature,
    pub attester_pk: PublicKey,
    pub nonce: Nonce,
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Envelope")
            .field("obj_hash", &self.obj_hash())
            .field("object_len", &self.object.len())
            .field("attester_pk", &self.attester_pk)
            .field("nonce", &self.nonce)
            .finish()
    }
}

impl Envelope {
    pub fn obj_hash(&self) -> Digest32 {
        crypto::hash_object(&self.object)
    }

    /// Bytes accounted in the object category: length prefix plus payload.
    pub fn object_wire_bytes(&self) -> u64 {
        (OBJECT_LENGTH_PREFIX + self.object.len()) as u64
    }

    /// Bytes accounted in the attestation category: nonce, key and signature.
    pub fn attestation_wire_bytes(&self) -> u64 {
        (NONCE_SIZE + self.attester_pk.0.len() + self.attestation.len()) as u64
    }

    pub fn wire_len(&self) -> u64 {
        self.object_wire_bytes() + self.attestation_wire_bytes()
    }

    pub fn encode_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len() as usize);
        out.extend_from_slice(&(self.object.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.object);
        out.extend_from_slice(&self.nonce.0);
        out.extend_from_slice(self.attester_pk.as_bytes());
        out.extend_from_slice(self.attestation.as_bytes());
        out
    }

    /// Decode a frame whose key and signature sizes are fixed by `profile`.
    pub fn decode_wire(frame: &[u8], profile: &Profile) -> Result<Envelope, WireError> {
        let need = |n: usize, have: &[u8]| {
            if have.len() < n {
                Err(WireError::Truncated {
                    needed: n,
                    available: have.len(),
                })
            } else {
                Ok(())
            }
        };
        need(OBJECT_LENGTH_PREFIX, frame)?;
        let (len, rest) = frame.split_at(OBJECT_LENGTH_PREFIX);
        let obj_len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        if obj_len == 0 {
            return Err(WireError::EmptyObject);
        }
        let tail = NONCE_SIZE + profile.public_key_size() + profile.signature_size();
        need(obj_len + tail, rest)?;
        if rest.len() > obj_len + tail {
            return Err(WireError::Trailing(rest.len() - obj_len - tail));
        }
        let (object, rest) = rest.split_at(obj_len);
        let (nonce, rest) = rest.split_at(NONCE_SIZE);
        let (pk, sig) = rest.split_at(profile.public_key_size());
        Ok(Envelope {
            object: object.to_vec(),
            attestation: Signature(sig.to_vec()),
            attester_pk: PublicKey(pk.to_vec()),
            nonce: Nonce(nonce.try_into().expect("16 bytes")),
        })
    }
}

/// Per-envelope attestation overhead on the wire for a profile.
pub fn on_path_overhead(profile: &Profile) -> u64 {
    (NONCE_SIZE + profile.public_key_size() + profile.signature_size()) as u64
}

pub fn make_envelope(
    sk: &SecretKey,
    pk: &PublicKey,
    object: Vec<u8>,
    domain: &Domain,
    nonce: Nonce,
) -> Envelope {
    let m = encode_message(&crypto::hash_object(&object), domain, &nonce);
    Envelope {
        attestation: crypto::sign(sk, &m),
        attester_pk: pk.clone(),
        object,
        nonce,
    }
}

/// Checks the attestation under `profile`'s scheme for `domain`.
pub fn verify_envelope(env: &Envelope, domain: &Domain, profile: &Profile) -> bool {
    if env.object.is_empty() {
        return false;
    }
    let m = encode_message(&env.obj_hash(), domain, &env.nonce);
    crypto::verify(&profile.scheme, &env.attester_pk, &m, &env.attestation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{hash_object, keygen};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn fixture(profile: Profile) -> (crate::crypto::KeyPair, Domain) {
        (
            keygen(&[4u8; 32], profile.scheme).unwrap(),
            Domain::new(b"chain-1/mempool".to_vec()).unwrap(),
        )
    }

    #[test]
    fn message_layout() {
        let h = hash_object(b"obj");
        let d = Domain::new(b"ABCDEFGH".to_vec()).unwrap();
        let n = Nonce([0xAA; 16]);
        let m = encode_message(&h, &d, &n);
        assert_eq!(m.len(), 57);
        assert_eq!(&m[..32], h.as_bytes());
        assert_eq!(m[32], 0x08);
        assert_eq!(&m[33..41], b"ABCDEFGH");
        assert_eq!(&m[41..], &[0xAA; 16]);
    }

    #[test]
    fn nonce_changes_the_encoding() {
        let h = hash_object(b"obj");
        let d = Domain::new(b"d".to_vec()).unwrap();
        assert_ne!(
            encode_message(&h, &d, &Nonce([1; 16])),
            encode_message(&h, &d, &Nonce([2; 16]))
        );
    }

    #[test]
    fn domain_bounds() {
        assert_eq!(Domain::new(vec![]), Err(AttestationError::DomainLength(0)));
        assert!(Domain::new(vec![b'x'; 255]).is_ok());
        assert_eq!(
            Domain::new(vec![b'x'; 256]),
            Err(AttestationError::DomainLength(256))
        );
        assert!(Nonce::from_slice(&[0; 15]).is_err());
    }

    #[test]
    fn length_byte_disambiguates_short_domains() {
        // Every (domain of 1..=3 bytes over a 2-letter alphabet, nonce with a
        // 2-letter-alphabet prefix) must encode uniquely.
        let h = hash_object(b"o");
        let alphabet = *b"AB";
        let mut domains = Vec::new();
        for len in 1..=3usize {
            for mask in 0..(1u32 << len) {
                let label: Vec<u8> = (0..len)
                    .map(|i| alphabet[((mask >> i) & 1) as usize])
                    .collect();
                domains.push(Domain::new(label).unwrap());
            }
        }
        let mut nonces = Vec::new();
        for mask in 0..8u32 {
            let mut n = [0u8; 16];
            for (i, b) in n.iter_mut().take(3).enumerate() {
                *b = alphabet[((mask >> i) & 1) as usize];
            }
            nonces.push(Nonce(n));
        }
        let mut seen = HashSet::new();
        for d in &domains {
            for n in &nonces {
                assert!(seen.insert(encode_message(&h, d, n)), "{d:?} {n:?}");
            }
        }
        assert_eq!(seen.len(), domains.len() * nonces.len());

        // The classic shift: ("AB", n) vs ("A", "B" ∥ n[..15]).
        let n = Nonce([7; 16]);
        let mut shifted = [0u8; 16];
        shifted[0] = b'B';
        shifted[1..].copy_from_slice(&n.0[..15]);
        assert_ne!(
            encode_message(&h, &Domain::new(b"AB".to_vec()).unwrap(), &n),
            encode_message(&h, &Domain::new(b"A".to_vec()).unwrap(), &Nonce(shifted))
        );
    }

    #[test]
    fn envelope_round_trip_and_domain_binding() {
        let p = Profile::hybrid_performance();
        let (kp, d) = fixture(p);
        let env = make_envelope(&kp.secret, &kp.public, b"tx".to_vec(), &d, Nonce([1; 16]));
        assert!(verify_envelope(&env, &d, &p));
        let again = make_envelope(&kp.secret, &kp.public, b"tx".to_vec(), &d, Nonce([1; 16]));
        assert_eq!(env, again);
        let other = Domain::new(b"chain-2/mempool".to_vec()).unwrap();
        assert!(!verify_envelope(&env, &other, &p));
    }

    #[test]
    fn object_substitution_and_key_swap_fail() {
        let p = Profile::hybrid_performance();
        let (kp, d) = fixture(p);
        let env = make_envelope(&kp.secret, &kp.public, b"tx".to_vec(), &d, Nonce([1; 16]));
        let mut swapped = env.clone();
        swapped.object = b"ty".to_vec();
        assert!(!verify_envelope(&swapped, &d, &p));

        for i in 0..200u8 {
            let other = keygen(&[i + 10; 32], p.scheme).unwrap();
            let mut e = env.clone();
            e.attester_pk = other.public;
            assert!(!verify_envelope(&e, &d, &p));
        }
    }

    #[test]
    fn on_path_overhead_by_profile() {
        assert_eq!(on_path_overhead(&Profile::hybrid_performance()), 16 + 32 + 64);
        assert!(on_path_overhead(&Profile::hybrid_performance()) < 256);
        assert_eq!(on_path_overhead(&Profile::full_pqc()), 16 + 1312 + 2420);
    }

    #[test]
    fn wire_frame_decodes_and_rejects_bad_lengths() {
        for p in [Profile::hybrid_performance(), Profile::full_pqc()] {
            let (kp, d) = fixture(p);
            let env = make_envelope(&kp.secret, &kp.public, vec![9; 300], &d, Nonce([3; 16]));
            let frame = env.encode_wire();
            assert_eq!(frame.len() as u64, env.wire_len());
            assert_eq!(Envelope::decode_wire(&frame, &p).unwrap(), env);

            let mut bad = frame.clone();
            bad[3] = bad[3].wrapping_add(1);
            assert!(Envelope::decode_wire(&bad, &p).is_err());
            assert!(matches!(
                Envelope::decode_wire(&frame[..frame.len() - 1], &p),
                Err(WireError::Truncated { .. })
            ));
        }
        assert_eq!(
            Envelope::decode_wire(&[0, 0, 0, 0], &Profile::hybrid_performance()),
            Err(WireError::EmptyObject)
        );
    }

    #[test]
    fn counter_nonces_are_unique() {
        let a: HashSet<_> = (0..1000).map(|c| Nonce::from_counter(1, 2, c)).collect();
        assert_eq!(a.len(), 1000);
        assert_ne!(Nonce::from_counter(1, 2, 0), Nonce::from_counter(1, 3, 0));
    }

    #[derive(Debug, Clone)]
    enum Mutation {
        ObjectByte(usize, u8),
        ObjectExtend(u8),
        NonceByte(usize, u8),
        DomainByte(usize, u8),
        PkByte(usize, u8),
    }

    fn mutation() -> impl Strategy<Value = Mutation> {
        prop_oneof![
            (any::<usize>(), 1..=255u8).prop_map(|(i, x)| Mutation::ObjectByte(i, x)),
            any::<u8>().prop_map(Mutation::ObjectExtend),
            (0..16usize, 1..=255u8).prop_map(|(i, x)| Mutation::NonceByte(i, x)),
            (any::<usize>(), 1..=255u8).prop_map(|(i, x)| Mutation::DomainByte(i, x)),
            (0..32usize, 1..=255u8).prop_map(|(i, x)| Mutation::PkByte(i, x)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn any_field_mutation_breaks_verification(
            object in proptest::collection::vec(any::<u8>(), 1..64),
            label in proptest::collection::vec(any::<u8>(), 1..16),
            nonce in any::<[u8; 16]>(),
            m in mutation(),
        ) {
            let p = Profile::hybrid_performance();
            let kp = keygen(&[1u8; 32], p.scheme).unwrap();
            let d = Domain::new(label).unwrap();
            let env = make_envelope(&kp.secret, &kp.public, object, &d, Nonce(nonce));
            prop_assert!(verify_envelope(&env, &d, &p));
            let mut e = env.clone();
            let mut dom = d.clone();
            match m {
                Mutation::ObjectByte(i, x) => { let n = e.object.len(); e.object[i % n] ^= x; }
                Mutation::ObjectExtend(x) => e.object.push(x),
                Mutation::NonceByte(i, x) => e.nonce.0[i] ^= x,
                Mutation::DomainByte(i, x) => { let n = dom.0.len(); dom.0[i % n] ^= x; }
                Mutation::PkByte(i, x) => e.attester_pk.0[i] ^= x,
            }
            prop_assert!(!verify_envelope(&e, &dom, &p));
        }
    }
}
