//! Off-chain aggregation with on-chain anchoring: an evidence service that
//! batches evidences into Merkle trees and a mock of the anchoring contract
//! with gas accounting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, hash, tags, Digest, Encoder, KeyPair, PublicKey, Signature};
use crate::merkle::{self, MerkleProof};
use crate::reader::Evidence;
use crate::world::Timestamp;

pub const DEPLOY_GAS: u64 = 149_119;
pub const STORE_GAS: u64 = 44_241;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnchorError {
    #[error("block number must be positive")]
    ZeroBlock,
}

/// Digest-to-block-number map. The first store of a digest wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorContract {
    stored: BTreeMap<Digest, u64>,
    gas_used: u64,
    calls: u64,
}

impl Default for AnchorContract {
    fn default() -> Self {
        Self::deploy()
    }
}

impl AnchorContract {
    pub fn deploy() -> Self {
        Self {
            stored: BTreeMap::new(),
            gas_used: DEPLOY_GAS,
            calls: 0,
        }
    }

    /// Records `digest` at `block_no` and reports whether it was already
    /// stored. A repeated store changes nothing and costs no storage gas.
    pub fn store(&mut self, digest: Digest, block_no: u64) -> Result<bool, AnchorError> {
        if block_no == 0 {
            return Err(AnchorError::ZeroBlock);
        }
        self.calls += 1;
        let already = self.is_stored(&digest);
        if !already {
            self.stored.insert(digest, block_no);
            self.gas_used += STORE_GAS;
        }
        Ok(already)
    }

    pub fn is_stored(&self, digest: &Digest) -> bool {
        self.get_stored(digest) > 0
    }

    /// Block number of the digest, or 0 when absent.
    pub fn get_stored(&self, digest: &Digest) -> u64 {
        self.stored.get(digest).copied().unwrap_or(0)
    }

    pub fn gas_used(&self) -> u64 {
        self.gas_used
    }

    pub fn store_calls(&self) -> u64 {
        self.calls
    }

    pub fn len(&self) -> usize {
        self.stored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stored.is_empty()
    }
}

/// Signed statement by the evidence service listing the evidences covered
/// by one aggregation window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkProof {
    pub window: u64,
    pub digests: Vec<Digest>,
    pub sig: Signature,
}

impl BulkProof {
    pub fn signed_message(window: u64, digests: &[Digest]) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64_field(tags::BULK_WINDOW, window);
        for d in digests {
            enc.field(tags::BULK_DIGEST, d.as_bytes());
        }
        enc.finish()
    }

    pub fn verify(&self, service_key: &PublicKey) -> bool {
        crypto::verify(&Self::signed_message(self.window, &self.digests), &self.sig, service_key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorRecord {
    pub window: u64,
    pub root: Digest,
    pub block_no: u64,
    pub anchored_at: Timestamp,
    pub proofs: BTreeMap<Digest, MerkleProof>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BulkProofFault {
    #[error("bulk proof signature does not verify")]
    Signature,
    #[error("window {0} has no anchor record")]
    NoRecord(u64),
    #[error("root {0} is not stored in the contract")]
    NotAnchored(Digest),
    #[error("evidence {0} is covered by the bulk proof but not provable against the root")]
    Omitted(Digest),
}

/// Window root with one inclusion proof per evidence leaf.
pub type AnchoredWindow = (Digest, BTreeMap<Digest, MerkleProof>);

/// Digest identifying an evidence inside an aggregation tree.
pub fn evidence_leaf(ev: &Evidence) -> Digest {
    hash(&ev.to_bytes())
}

/// Builds the window tree, anchors its root, and returns the root with one
/// inclusion proof per evidence. An empty window anchors nothing.
pub fn aggregate_and_anchor(
    window: &[Evidence],
    contract: &mut AnchorContract,
    block_no: u64,
) -> Result<Option<AnchoredWindow>, AnchorError> {
    if window.is_empty() {
        return Ok(None);
    }
    let leaves: Vec<Digest> = window.iter().map(evidence_leaf).collect();
    let tree = merkle::build(&leaves);
    let root = tree.root();
    contract.store(root, block_no)?;
    let proofs = leaves
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, tree.prove_index(i)))
        .collect();
    Ok(Some((root, proofs)))
}

#[derive(Debug)]
pub struct EvidenceService {
    key: KeyPair,
    window: Vec<Evidence>,
    next_window: u64,
    records: BTreeMap<u64, AnchorRecord>,
    /// Evidences a dishonest service covers in its bulk proof but leaves out
    /// of the anchored tree.
    omit: BTreeSet<Digest>,
}

impl EvidenceService {
    pub fn new(seed: u64) -> Self {
        Self {
            key: KeyPair::generate(seed ^ 0x6275_6c6b),
            window: Vec::new(),
            next_window: 0,
            records: BTreeMap::new(),
            omit: BTreeSet::new(),
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.key.public
    }

    pub fn add(&mut self, ev: Evidence) {
        self.window.push(ev);
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn omit(&mut self, ev: &Evidence) {
        self.omit.insert(evidence_leaf(ev));
    }

    pub fn record(&self, window: u64) -> Option<&AnchorRecord> {
        self.records.get(&window)
    }

    /// Closes the current window: anchors it and returns the signed bulk
    /// proof. Nothing happens for an empty window.
    pub fn close_window(
        &mut self,
        contract: &mut AnchorContract,
        block_no: u64,
        at: Timestamp,
    ) -> Result<Option<BulkProof>, AnchorError> {
        if self.window.is_empty() {
            return Ok(None);
        }
        let covered: Vec<Digest> = self.window.iter().map(evidence_leaf).collect();
        let anchored: Vec<Evidence> = self
            .window
            .iter()
            .filter(|ev| !self.omit.contains(&evidence_leaf(ev)))
            .cloned()
            .collect();
        let Some((root, proofs)) = aggregate_and_anchor(&anchored, contract, block_no)? else {
            self.window.clear();
            return Ok(None);
        };
        let window = self.next_window;
        self.next_window += 1;
        let sig = crypto::sign(&BulkProof::signed_message(window, &covered), &self.key.private)
            .expect("service key is well formed");
        self.records.insert(
            window,
            AnchorRecord {
                window,
                root,
                block_no,
                anchored_at: at,
                proofs,
            },
        );
        self.window.clear();
        Ok(Some(BulkProof {
            window,
            digests: covered,
            sig,
        }))
    }

    /// Client-side reconfirmation of a bulk proof against the anchored root.
    pub fn reconfirm(
        &self,
        bulk: &BulkProof,
        contract: &AnchorContract,
        service_key: &PublicKey,
    ) -> Result<(), BulkProofFault> {
        if !bulk.verify(service_key) {
            return Err(BulkProofFault::Signature);
        }
        let record = self.record(bulk.window).ok_or(BulkProofFault::NoRecord(bulk.window))?;
        if !contract.is_stored(&record.root) {
            return Err(BulkProofFault::NotAnchored(record.root));
        }
        for d in &bulk.digests {
            let ok = record
                .proofs
                .get(d)
                .is_some_and(|p| merkle::verify_proof(d, p, &record.root));
            if !ok {
                return Err(BulkProofFault::Omitted(*d));
            }
        }
        Ok(())
    }
}
