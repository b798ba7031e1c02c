//! Hashing, the signature-scheme abstraction and the two deployment profiles.
//!
//! Object hashes are SHA-256. Attestation signatures use deterministic
//! Ed25519 (RFC 8032) as the binding primitive. A scheme may declare
//! larger public-key and signature sizes than Ed25519 emits (the full-PQC
//! profile models ML-DSA-44 sizes); the surplus is filled with a padding
//! stream derived from the Ed25519 output, and verification recomputes
//! and checks the padding, so every emitted byte is covered and the
//! declared sizes are exact.

use std::fmt;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Size of the Ed25519 public key that backs every scheme.
pub const CORE_PUBLIC_KEY_SIZE: usize = 32;
/// Size of the Ed25519 signature that backs every scheme.
pub const CORE_SIGNATURE_SIZE: usize = 64;

/// ML-DSA-44 public key size.
pub const FULL_PQC_PUBLIC_KEY_SIZE: usize = 1312;
/// ML-DSA-44 signature size.
pub const FULL_PQC_SIGNATURE_SIZE: usize = 2420;

const KEYGEN_TAG: &[u8] = b"arace/keygen/v1";
const PK_PAD_TAG: &[u8] = b"arace/pk-pad/v1";
const SIG_PAD_TAG: &[u8] = b"arace/sig-pad/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("unsupported signature scheme {0}")]
    UnsupportedScheme(String),
    #[error("scheme {scheme} declares {field} = {size}, below the minimum of {min}")]
    SizeTooSmall {
        scheme: SchemeId,
        field: &'static str,
        size: usize,
        min: usize,
    },
    #[error("malformed public key: expected {expected} bytes, got {actual}")]
    MalformedPublicKey { expected: usize, actual: usize },
}

/// 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(Self(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest32 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest32::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex chars"))
    }
}

/// Hash an object payload with SHA-256.
pub fn hash_object(payload: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(payload).into())
}

fn hash_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Counter-mode SHA-256 stream of `len` bytes keyed by `tag ∥ input`.
fn expand(tag: &[u8], input: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut counter = 0u32;
    while out.len() < len {
        let block = hash_parts(&[tag, &counter.to_be_bytes(), input]);
        let take = (len - out.len()).min(block.len());
        out.extend_from_slice(&block[..take]);
        counter += 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    /// Plain deterministic Ed25519.
    Ed25519,
    /// Ed25519 core padded out to PQC-sized keys and signatures.
    PaddedPqc,
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::Ed25519 => f.write_str("ed25519"),
            SchemeId::PaddedPqc => f.write_str("padded-pqc"),
        }
    }
}

impl std::str::FromStr for SchemeId {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ed25519" => Ok(SchemeId::Ed25519),
            "padded-pqc" => Ok(SchemeId::PaddedPqc),
            other => Err(CryptoError::UnsupportedScheme(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureScheme {
    pub scheme_id: SchemeId,
    pub public_key_size: usize,
    pub signature_size: usize,
}

impl SignatureScheme {
    pub const fn ed25519() -> Self {
        Self {
            scheme_id: SchemeId::Ed25519,
            public_key_size: CORE_PUBLIC_KEY_SIZE,
            signature_size: CORE_SIGNATURE_SIZE,
        }
    }

    pub const fn padded_pqc(public_key_size: usize, signature_size: usize) -> Self {
        Self {
            scheme_id: SchemeId::PaddedPqc,
            public_key_size,
            signature_size,
        }
    }

    /// Checks the declared sizes against what the scheme can emit.
    pub fn validate(&self) -> Result<(), CryptoError> {
        let check = |field, size, min| {
            if size < min {
                Err(CryptoError::SizeTooSmall {
                    scheme: self.scheme_id,
                    field,
                    size,
                    min,
                })
            } else {
                Ok(())
            }
        };
        match self.scheme_id {
            SchemeId::Ed25519 => {
                if self.public_key_size != CORE_PUBLIC_KEY_SIZE
                    || self.signature_size != CORE_SIGNATURE_SIZE
                {
                    return Err(CryptoError::UnsupportedScheme(format!(
                        "ed25519 with sizes pk={} sig={}",
                        self.public_key_size, self.signature_size
                    )));
                }
                Ok(())
            }
            SchemeId::PaddedPqc => {
                check("public_key_size", self.public_key_size, CORE_PUBLIC_KEY_SIZE)?;
                check("signature_size", self.signature_size, CORE_SIGNATURE_SIZE)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// Profile A: short classical on-path signatures.
    HybridPerformance,
    /// Profile B: PQC-sized on-path signatures.
    FullPqc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    pub scheme: SignatureScheme,
}

impl Profile {
    pub const fn hybrid_performance() -> Self {
        Self {
            kind: ProfileKind::HybridPerformance,
            scheme: SignatureScheme::ed25519(),
        }
    }

    pub const fn full_pqc() -> Self {
        Self::full_pqc_with_sizes(FULL_PQC_PUBLIC_KEY_SIZE, FULL_PQC_SIGNATURE_SIZE)
    }

    pub const fn full_pqc_with_sizes(public_key_size: usize, signature_size: usize) -> Self {
        Self {
            kind: ProfileKind::FullPqc,
            scheme: SignatureScheme::padded_pqc(public_key_size, signature_size),
        }
    }

    pub fn signature_size(&self) -> usize {
        self.scheme.signature_size
    }

    pub fn public_key_size(&self) -> usize {
        self.scheme.public_key_size
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub Vec<u8>);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    /// Short identifier for logs and traces: hex of the first 8 bytes of
    /// SHA-256 over the full key.
    pub fn fingerprint(&self) -> String {
        hex::encode(&hash_parts(&[&self.0])[..8])
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.fingerprint())
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({} bytes)", self.0.len())
    }
}

pub struct SecretKey {
    scheme: SignatureScheme,
    signing: SigningKey,
}

impl SecretKey {
    pub fn scheme(&self) -> SignatureScheme {
        self.scheme
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKey")
            .field("scheme", &self.scheme.scheme_id)
            .finish_non_exhaustive()
    }
}

impl Clone for SecretKey {
    fn clone(&self) -> Self {
        Self {
            scheme: self.scheme,
            signing: SigningKey::from_bytes(&self.signing.to_bytes()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

fn encode_public(scheme: &SignatureScheme, core: &VerifyingKey) -> PublicKey {
    let core = core.to_bytes();
    let mut out = Vec::with_capacity(scheme.public_key_size);
    out.extend_from_slice(&core);
    out.extend(expand(
        PK_PAD_TAG,
        &core,
        scheme.public_key_size - CORE_PUBLIC_KEY_SIZE,
    ));
    PublicKey(out)
}

/// Deterministically derive a key pair for `scheme` from a 32-byte seed.
pub fn keygen(seed: &[u8; 32], scheme: SignatureScheme) -> Result<KeyPair, CryptoError> {
    scheme.validate()?;
    let id = scheme.scheme_id.to_string();
    let sk_seed = hash_parts(&[KEYGEN_TAG, id.as_bytes(), seed]);
    let signing = SigningKey::from_bytes(&sk_seed);
    let public = encode_public(&scheme, &signing.verifying_key());
    Ok(KeyPair {
        secret: SecretKey { scheme, signing },
        public,
    })
}

/// Sign `msg`; the result is exactly `scheme.signature_size` bytes.
pub fn sign(sk: &SecretKey, msg: &[u8]) -> Signature {
    let core = sk.signing.sign(msg).to_bytes();
    let mut out = Vec::with_capacity(sk.scheme.signature_size);
    out.extend_from_slice(&core);
    out.extend(expand(
        SIG_PAD_TAG,
        &core,
        sk.scheme.signature_size - CORE_SIGNATURE_SIZE,
    ));
    Signature(out)
}

/// Verify `sig` over `msg` under `pk` for the given scheme. Malformed
/// inputs of any kind yield `false`.
pub fn verify(scheme: &SignatureScheme, pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    if pk.0.len() != scheme.public_key_size || sig.0.len() != scheme.signature_size {
        return false;
    }
    if scheme.validate().is_err() {
        return false;
    }
    let (pk_core, pk_pad) = pk.0.split_at(CORE_PUBLIC_KEY_SIZE);
    let (sig_core, sig_pad) = sig.0.split_at(CORE_SIGNATURE_SIZE);
    if pk_pad != expand(PK_PAD_TAG, pk_core, pk_pad.len()).as_slice()
        || sig_pad != expand(SIG_PAD_TAG, sig_core, sig_pad.len()).as_slice()
    {
        return false;
    }
    let Ok(pk_core) = <[u8; 32]>::try_from(pk_core) else {
        return false;
    };
    let Ok(vk) = VerifyingKey::from_bytes(&pk_core) else {
        return false;
    };
    let Ok(sig_core) = <[u8; 64]>::try_from(sig_core) else {
        return false;
    };
    vk.verify(msg, &ed25519_dalek::Signature::from_bytes(&sig_core))
        .is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seed(b: u8) -> [u8; 32] {
        [b; 32]
    }

    #[test]
    fn empty_payload_matches_sha256_test_vector() {
        // FIPS 180-2 / NIST CAVS value for the empty message.
        assert_eq!(
            hash_object(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            hash_object(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn hashing_is_deterministic() {
        assert_eq!(hash_object(b"payload"), hash_object(b"payload"));
    }

    #[test]
    fn single_byte_changes_change_the_digest() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let len = rng.gen_range(1..64);
            let mut p: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let a = hash_object(&p);
            let i = rng.gen_range(0..len);
            p[i] ^= rng.gen_range(1..=255u8);
            assert_ne!(a, hash_object(&p));
        }
    }

    #[test]
    fn keygen_is_deterministic_and_sized() {
        for scheme in [SignatureScheme::ed25519(), Profile::full_pqc().scheme] {
            let a = keygen(&seed(1), scheme).unwrap();
            let b = keygen(&seed(1), scheme).unwrap();
            assert_eq!(a.public, b.public);
            assert_eq!(a.public.0.len(), scheme.public_key_size);
            assert_eq!(sign(&a.secret, b"m"), sign(&b.secret, b"m"));
        }
    }

    #[test]
    fn distinct_seeds_give_distinct_public_keys() {
        let mut seen = std::collections::HashSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let s: [u8; 32] = rng.gen();
            let kp = keygen(&s, SignatureScheme::ed25519()).unwrap();
            assert!(seen.insert(kp.public.0));
        }
    }

    #[test]
    fn same_seed_different_scheme_gives_different_key() {
        let a = keygen(&seed(3), SignatureScheme::ed25519()).unwrap();
        let b = keygen(&seed(3), Profile::full_pqc().scheme).unwrap();
        assert_ne!(a.public.0[..32], b.public.0[..32]);
    }

    #[test]
    fn profile_signature_sizes() {
        let a = Profile::hybrid_performance();
        let kp = keygen(&seed(2), a.scheme).unwrap();
        assert_eq!(sign(&kp.secret, b"m").len(), 64);

        let b = Profile::full_pqc();
        let kp = keygen(&seed(2), b.scheme).unwrap();
        assert_eq!(sign(&kp.secret, b"m").len(), 2420);

        // The ~2.5 KB figure is reachable by configuration.
        let b25 = Profile::full_pqc_with_sizes(1312, 2560);
        let kp = keygen(&seed(2), b25.scheme).unwrap();
        let sig = sign(&kp.secret, b"m");
        assert_eq!(sig.len(), 2560);
        assert!(verify(&b25.scheme, &kp.public, b"m", &sig));
    }

    #[test]
    fn undersized_schemes_are_rejected() {
        let bad = SignatureScheme::padded_pqc(16, 2420);
        assert!(matches!(
            keygen(&seed(0), bad),
            Err(CryptoError::SizeTooSmall { field: "public_key_size", .. })
        ));
        let bad = SignatureScheme {
            scheme_id: SchemeId::Ed25519,
            public_key_size: 32,
            signature_size: 65,
        };
        assert!(keygen(&seed(0), bad).is_err());
        assert!("ml-dsa-87".parse::<SchemeId>().is_err());
    }

    #[test]
    fn verify_rejects_bit_flips() {
        for scheme in [SignatureScheme::ed25519(), Profile::full_pqc().scheme] {
            let kp = keygen(&seed(5), scheme).unwrap();
            let msg = b"objhash||domain||nonce".to_vec();
            let sig = sign(&kp.secret, &msg);
            assert!(verify(&scheme, &kp.public, &msg, &sig));

            let mut m2 = msg.clone();
            m2[3] ^= 0x01;
            assert!(!verify(&scheme, &kp.public, &m2, &sig));

            // Flip a bit in the core and in the padding region.
            for pos in [0, 63, sig.len() - 1] {
                let mut s2 = sig.clone();
                s2.0[pos] ^= 0x80;
                assert!(!verify(&scheme, &kp.public, &msg, &s2), "pos {pos}");
            }
            for pos in [0, kp.public.0.len() - 1] {
                let mut pk2 = kp.public.clone();
                pk2.0[pos] ^= 0x01;
                assert!(!verify(&scheme, &pk2, &msg, &sig), "pk pos {pos}");
            }
            let mut short = sig.clone();
            short.0.pop();
            assert!(!verify(&scheme, &kp.public, &msg, &short));
        }
    }

    #[test]
    fn key_binding_other_key_rejects() {
        let s = SignatureScheme::ed25519();
        let a = keygen(&seed(8), s).unwrap();
        let b = keygen(&seed(9), s).unwrap();
        let sig = sign(&a.secret, b"m");
        assert!(!verify(&s, &b.public, b"m", &sig));
    }

    #[test]
    fn digest_hex_round_trip() {
        let d = hash_object(b"x");
        assert_eq!(Digest32::from_hex(&d.to_hex()), Some(d));
        assert_eq!(Digest32::from_hex("zz"), None);
    }
}
