//! Logistics service providers that own readers and store readouts, and the
//! clients that query them.

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Digest;
use crate::reader::{search_key, Nonce, Readout};
use crate::tag::TagId;
use crate::world::Location;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperField {
    Data,
    Time,
    Location,
}

/// How a service answers readout queries.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Dishonesty {
    #[default]
    Honest,
    /// Claims to hold no readouts.
    Hide,
    /// Alters one readout field before answering.
    Tamper(TamperField),
    /// Adds a readout it never received.
    Inject(Readout),
    /// Answers with readouts stored under another search key.
    WrongReadout,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("service {service} does not own reader {reader}")]
    NotOwned { service: String, reader: Digest },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingest {
    Stored,
    Duplicate,
}

#[derive(Debug)]
pub struct Service {
    pub name: String,
    pub dishonesty: Dishonesty,
    owned: BTreeSet<Digest>,
    readouts: BTreeMap<Digest, Vec<Readout>>,
    seen: BTreeSet<Digest>,
    rng: ChaCha20Rng,
}

impl Service {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            dishonesty: Dishonesty::Honest,
            owned: BTreeSet::new(),
            readouts: BTreeMap::new(),
            seen: BTreeSet::new(),
            rng: ChaCha20Rng::seed_from_u64(seed ^ 0x7376_6300),
        }
    }

    pub fn register_reader(&mut self, reader_id: Digest) {
        self.owned.insert(reader_id);
    }

    pub fn owns(&self, reader_id: &Digest) -> bool {
        self.owned.contains(reader_id)
    }

    /// Key digests of the readers this service operates. Their certificates
    /// are public, so clients may know this set.
    pub fn readers(&self) -> Vec<Digest> {
        self.owned.iter().copied().collect()
    }

    /// Fresh nonce for a tag shipment.
    pub fn provision_nonce(&mut self) -> Nonce {
        let mut n = [0u8; 16];
        self.rng.fill_bytes(&mut n);
        Nonce(n)
    }

    /// Stores a readout from an owned reader. Redelivery is idempotent.
    pub fn ingest_readout(&mut self, ro: &Readout) -> Result<Ingest, ServiceError> {
        if !self.owns(&ro.key_digest) {
            return Err(ServiceError::NotOwned {
                service: self.name.clone(),
                reader: ro.key_digest,
            });
        }
        if !self.seen.insert(ro.content_id()) {
            return Ok(Ingest::Duplicate);
        }
        self.readouts.entry(ro.h1()).or_default().push(ro.clone());
        Ok(Ingest::Stored)
    }

    pub fn stored_count(&self) -> usize {
        self.readouts.values().map(Vec::len).sum()
    }

    /// Readouts actually held under `key`.
    pub fn stored(&self, key: &Digest) -> &[Readout] {
        self.readouts.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Answers a client query for search key `key`.
    pub fn query(&self, key: &Digest) -> Vec<Readout> {
        let honest = self.stored(key).to_vec();
        match &self.dishonesty {
            Dishonesty::Honest => honest,
            Dishonesty::Hide => Vec::new(),
            Dishonesty::Tamper(field) => honest.into_iter().map(|ro| tamper(ro, *field)).collect(),
            Dishonesty::Inject(forged) => {
                let mut out = honest;
                out.push(forged.clone());
                out
            }
            Dishonesty::WrongReadout => self
                .readouts
                .iter()
                .find(|(k, _)| *k != key)
                .map(|(_, v)| v.clone())
                .unwrap_or_default(),
        }
    }
}

fn tamper(mut ro: Readout, field: TamperField) -> Readout {
    match field {
        TamperField::Data => ro.data.push(b'!'),
        TamperField::Time => ro.t = ro.t.plus(600),
        TamperField::Location => ro.loc = Location::labeled(format!("{}-elsewhere", ro.loc.label)),
    }
    ro
}

/// A party that knows shipment nonces and queries services and the chain.
#[derive(Debug, Clone, Default)]
pub struct Client {
    pub name: String,
    nonces: BTreeMap<TagId, Vec<Nonce>>,
}

impl Client {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            nonces: BTreeMap::new(),
        }
    }

    pub fn learn_nonce(&mut self, tag: TagId, n: Nonce) {
        let list = self.nonces.entry(tag).or_default();
        if !list.contains(&n) {
            list.push(n);
        }
    }

    /// Search keys the client can form for `tag`.
    pub fn search_keys(&self, tag: &TagId) -> Vec<Digest> {
        self.nonces
            .get(tag)
            .into_iter()
            .flatten()
            .map(|n| search_key(n, tag))
            .collect()
    }
}
