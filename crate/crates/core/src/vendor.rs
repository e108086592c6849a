//! Reader vendors, reader certificates and the external PKI stub.
//!
//! Certificate wire format: `PUBLIC_KEY ‖ T_INI ‖ T_EXP ‖ SIGNATURE ‖ VENDOR_KEY_DIGEST`,
//! signature over `PUBLIC_KEY ‖ T_INI ‖ T_EXP`. Revocation is an early `t_exp`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    self, tags, CryptoError, Decoder, Digest, Encoder, EncodingError, KeyPair, PublicKey,
    Signature,
};
use crate::world::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Certificate {
    pub reader_public: PublicKey,
    pub t_ini: Timestamp,
    pub t_exp: Timestamp,
    pub sig: Signature,
    pub vendor_key_digest: Digest,
}

impl Certificate {
    pub fn signed_message(reader_public: &PublicKey, t_ini: Timestamp, t_exp: Timestamp) -> Vec<u8> {
        Encoder::new()
            .field(tags::PUBLIC_KEY, &reader_public.0)
            .u64_field(tags::T_INI, t_ini.0)
            .u64_field(tags::T_EXP, t_exp.0)
            .finish()
    }

    /// `H(k_r)` of the certified reader key.
    pub fn reader_key_digest(&self) -> Digest {
        self.reader_public.digest()
    }

    pub fn covers(&self, t: Timestamp) -> bool {
        self.t_ini <= t && t <= self.t_exp
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        Encoder::new()
            .field(tags::PUBLIC_KEY, &self.reader_public.0)
            .u64_field(tags::T_INI, self.t_ini.0)
            .u64_field(tags::T_EXP, self.t_exp.0)
            .field(tags::SIGNATURE, &self.sig.0)
            .field(tags::VENDOR_KEY_DIGEST, self.vendor_key_digest.as_bytes())
            .finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let reader_public = PublicKey(dec.expect(tags::PUBLIC_KEY)?.to_vec());
        let t_ini = Timestamp(dec.expect_u64(tags::T_INI)?);
        let t_exp = Timestamp(dec.expect_u64(tags::T_EXP)?);
        let sig = Signature(dec.expect(tags::SIGNATURE)?.to_vec());
        let vendor_key_digest = Digest(dec.expect_fixed(tags::VENDOR_KEY_DIGEST)?);
        dec.finish()?;
        Ok(Self {
            reader_public,
            t_ini,
            t_exp,
            sig,
            vendor_key_digest,
        })
    }
}

#[derive(Debug, Error)]
pub enum VendorError {
    #[error("validity window [{t_ini}, {t_exp}] is empty")]
    Window { t_ini: Timestamp, t_exp: Timestamp },
    #[error("certificate issued at {t}, after its start {t_ini}")]
    IssuedLate { t: Timestamp, t_ini: Timestamp },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, Clone)]
pub struct Vendor {
    pub name: String,
    keypair: KeyPair,
}

impl Vendor {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            keypair: KeyPair::generate(seed),
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keypair.public
    }

    /// `H(k_v)`.
    pub fn key_digest(&self) -> Digest {
        self.keypair.key_digest()
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    /// Signs a certificate issued at `t` for the window `[t_ini, t_exp]`.
    pub fn issue_certificate(
        &self,
        reader_public: &PublicKey,
        t: Timestamp,
        t_ini: Timestamp,
        t_exp: Timestamp,
    ) -> Result<Certificate, VendorError> {
        if t_ini >= t_exp {
            return Err(VendorError::Window { t_ini, t_exp });
        }
        if t > t_ini {
            return Err(VendorError::IssuedLate { t, t_ini });
        }
        let msg = Certificate::signed_message(reader_public, t_ini, t_exp);
        let sig = crypto::sign(&msg, &self.keypair.private)?;
        Ok(Certificate {
            reader_public: reader_public.clone(),
            t_ini,
            t_exp,
            sig,
            vendor_key_digest: self.key_digest(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PkiEntry {
    pub public: PublicKey,
    pub valid_from: Timestamp,
    pub valid_to: Timestamp,
    sig: Signature,
}

impl PkiEntry {
    fn signed_message(public: &PublicKey, from: Timestamp, to: Timestamp) -> Vec<u8> {
        Encoder::new()
            .field(tags::PUBLIC_KEY, &public.0)
            .u64_field(tags::PKI_ENTRY_FROM, from.0)
            .u64_field(tags::PKI_ENTRY_TO, to.0)
            .finish()
    }

    pub fn covers(&self, t: Timestamp) -> bool {
        self.valid_from <= t && t <= self.valid_to
    }
}

/// Stand-in for the external PKI that certifies vendor keys: a table of
/// vendor keys with validity windows, each entry signed by a root key.
#[derive(Debug, Clone)]
pub struct PkiStub {
    root: KeyPair,
    entries: BTreeMap<Digest, PkiEntry>,
}

impl PkiStub {
    pub fn new(seed: u64) -> Self {
        Self {
            root: KeyPair::generate(seed ^ 0x706b_6900),
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, public: &PublicKey, valid_from: Timestamp, valid_to: Timestamp) {
        let msg = PkiEntry::signed_message(public, valid_from, valid_to);
        let sig = crypto::sign(&msg, &self.root.private).expect("root key is well formed");
        self.entries.insert(
            public.digest(),
            PkiEntry {
                public: public.clone(),
                valid_from,
                valid_to,
                sig,
            },
        );
    }

    /// Ends the validity of a vendor key at `at`.
    pub fn expire(&mut self, vendor_key_digest: &Digest, at: Timestamp) -> bool {
        let Some(entry) = self.entries.get(vendor_key_digest).cloned() else {
            return false;
        };
        self.register(&entry.public, entry.valid_from, at.min(entry.valid_to));
        true
    }

    pub fn entry(&self, vendor_key_digest: &Digest) -> Option<&PkiEntry> {
        self.entries
            .get(vendor_key_digest)
            .filter(|e| self.entry_authentic(e))
    }

    fn entry_authentic(&self, e: &PkiEntry) -> bool {
        let msg = PkiEntry::signed_message(&e.public, e.valid_from, e.valid_to);
        crypto::verify(&msg, &e.sig, &self.root.public)
    }

    pub fn lookup(&self, vendor_key_digest: &Digest, t: Timestamp) -> Option<PublicKey> {
        self.entry(vendor_key_digest)
            .filter(|e| e.covers(t))
            .map(|e| e.public.clone())
    }
}

pub fn pki_lookup(stub: &PkiStub, vendor_key_digest: &Digest, t: Timestamp) -> Option<PublicKey> {
    stub.lookup(vendor_key_digest, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_signature_binds_window() {
        let v = Vendor::new("acme", 1);
        let reader = KeyPair::generate(2);
        let c = v
            .issue_certificate(&reader.public, Timestamp(50), Timestamp(100), Timestamp(10_000))
            .unwrap();
        let msg = Certificate::signed_message(&c.reader_public, c.t_ini, c.t_exp);
        assert!(crypto::verify(&msg, &c.sig, v.public_key()));
        let forged = Certificate::signed_message(&c.reader_public, c.t_ini, Timestamp(20_000));
        assert!(!crypto::verify(&forged, &c.sig, v.public_key()));
        assert_eq!(c.vendor_key_digest, v.key_digest());
        assert_eq!(c.reader_key_digest(), reader.key_digest());
        assert_eq!(Certificate::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn empty_window_rejected() {
        let v = Vendor::new("acme", 1);
        let r = KeyPair::generate(2);
        assert!(matches!(
            v.issue_certificate(&r.public, Timestamp(0), Timestamp(100), Timestamp(100)),
            Err(VendorError::Window { .. })
        ));
        assert!(matches!(
            v.issue_certificate(&r.public, Timestamp(200), Timestamp(100), Timestamp(300)),
            Err(VendorError::IssuedLate { .. })
        ));
    }

    #[test]
    fn window_boundaries() {
        let v = Vendor::new("acme", 1);
        let r = KeyPair::generate(2);
        let c = v
            .issue_certificate(&r.public, Timestamp(0), Timestamp(100), Timestamp(200))
            .unwrap();
        assert!(!c.covers(Timestamp(99)));
        assert!(c.covers(Timestamp(100)));
        assert!(c.covers(Timestamp(200)));
        assert!(!c.covers(Timestamp(201)));
    }

    #[test]
    fn pki_lookup_respects_window() {
        let v = Vendor::new("acme", 1);
        let mut pki = PkiStub::new(3);
        pki.register(v.public_key(), Timestamp(0), Timestamp(1000));
        assert_eq!(pki_lookup(&pki, &v.key_digest(), Timestamp(500)), Some(v.public_key().clone()));
        assert_eq!(pki_lookup(&pki, &v.key_digest(), Timestamp(1001)), None);
        assert_eq!(pki_lookup(&pki, &crypto::hash(b"nobody"), Timestamp(5)), None);
        assert!(pki.expire(&v.key_digest(), Timestamp(400)));
        assert_eq!(pki_lookup(&pki, &v.key_digest(), Timestamp(500)), None);
        assert!(pki_lookup(&pki, &v.key_digest(), Timestamp(300)).is_some());
    }
}
