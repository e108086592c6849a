//! Hashing, signing and canonical encoding.
//!
//! The algorithms sit behind [`HashFunction`] and [`SignatureScheme`]. The
//! reference configuration used throughout the crate is SHA-256 and Ed25519.

pub mod encoding;

use std::fmt;

use ed25519_dalek::{Signer as _, Verifier as _};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoding::{decode, encode, tags, Decoder, Encoder, EncodingError, Field};

/// A 32-byte hash value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes = hex::decode(s).map_err(|_| CryptoError::MalformedDigest)?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| CryptoError::MalformedDigest)?;
        Ok(Self(arr))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("corrupt private key material ({0} bytes)")]
    CorruptKey(usize),
    #[error("malformed digest")]
    MalformedDigest,
}

pub trait HashFunction {
    fn hash(data: &[u8]) -> Digest;
}

pub struct Sha256;

impl HashFunction for Sha256 {
    fn hash(data: &[u8]) -> Digest {
        use sha2::Digest as _;
        Digest(sha2::Sha256::digest(data).into())
    }
}

pub trait SignatureScheme {
    fn keypair_from_seed(seed: [u8; 32]) -> KeyPair;
    fn sign(message: &[u8], private: &PrivateKey) -> Result<Signature, CryptoError>;
    fn verify(message: &[u8], sig: &Signature, public: &PublicKey) -> bool;
}

pub struct Ed25519;

impl SignatureScheme for Ed25519 {
    fn keypair_from_seed(seed: [u8; 32]) -> KeyPair {
        let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
        KeyPair {
            public: PublicKey(sk.verifying_key().to_bytes().to_vec()),
            private: PrivateKey(seed.to_vec()),
        }
    }

    fn sign(message: &[u8], private: &PrivateKey) -> Result<Signature, CryptoError> {
        let seed: [u8; 32] = private
            .0
            .as_slice()
            .try_into()
            .map_err(|_| CryptoError::CorruptKey(private.0.len()))?;
        let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
        Ok(Signature(sk.sign(message).to_bytes().to_vec()))
    }

    fn verify(message: &[u8], sig: &Signature, public: &PublicKey) -> bool {
        let Ok(pk_bytes) = <[u8; 32]>::try_from(public.0.as_slice()) else {
            return false;
        };
        let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk_bytes) else {
            return false;
        };
        let Ok(sig_bytes) = <[u8; 64]>::try_from(sig.0.as_slice()) else {
            return false;
        };
        vk.verify(message, &ed25519_dalek::Signature::from_bytes(&sig_bytes))
            .is_ok()
    }
}

pub type DefaultHash = Sha256;
pub type DefaultScheme = Ed25519;

/// Hashes with the reference hash function.
pub fn hash(data: &[u8]) -> Digest {
    DefaultHash::hash(data)
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PublicKey(pub Vec<u8>);

impl PublicKey {
    /// Key identifier, `H(k)`.
    pub fn digest(&self) -> Digest {
        hash(&self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &hex::encode(&self.0)[..16.min(self.0.len() * 2)])
    }
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateKey(pub Vec<u8>);

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature(pub Vec<u8>);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", &hex::encode(&self.0)[..16.min(self.0.len() * 2)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl KeyPair {
    /// Deterministic key pair for simulation seed `seed`.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        DefaultScheme::keypair_from_seed(bytes)
    }

    /// Key pair from an arbitrary RNG, used where keys are drawn mid-run.
    pub fn from_rng(rng: &mut impl RngCore) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        DefaultScheme::keypair_from_seed(bytes)
    }

    pub fn key_digest(&self) -> Digest {
        self.public.digest()
    }
}

pub fn generate_keypair(seed: u64) -> KeyPair {
    KeyPair::generate(seed)
}

pub fn sign(message: &[u8], private: &PrivateKey) -> Result<Signature, CryptoError> {
    DefaultScheme::sign(message, private)
}

pub fn verify(message: &[u8], sig: &Signature, public: &PublicKey) -> bool {
    DefaultScheme::verify(message, sig, public)
}
