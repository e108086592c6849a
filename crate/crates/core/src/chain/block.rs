//! Terms recorded on chain and hash-chained blocks.
//!
//! Term wire format: `TERM_EVIDENCE(evidence)` or `TERM_CERTIFICATE(certificate)`.
//! Block wire format: `BLOCK_HEIGHT ‖ BLOCK_PREV ‖ BLOCK_CREATED_AT ‖ BLOCK_ROOT ‖
//! BLOCK_WORK ‖ BLOCK_TERM*`. A block's digest is the hash of its encoding;
//! the first block links to the all-zero digest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash, tags, Decoder, Digest, Encoder, EncodingError};
use crate::merkle::{self, MerkleTree};
use crate::reader::Evidence;
use crate::vendor::Certificate;
use crate::world::Timestamp;

/// Accounted proof-of-work cost per block.
pub const WORK_PER_BLOCK: u64 = 1_000;

pub const GENESIS_PREV: Digest = Digest([0u8; 32]);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Evidence(Evidence),
    Certificate(Certificate),
}

impl Term {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Term::Evidence(ev) => Encoder::new().field(tags::TERM_EVIDENCE, &ev.to_bytes()).finish(),
            Term::Certificate(c) => Encoder::new()
                .field(tags::TERM_CERTIFICATE, &c.to_bytes())
                .finish(),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let term = match dec.peek_tag() {
            Some(tags::TERM_EVIDENCE) => Term::Evidence(Evidence::from_bytes(dec.expect(tags::TERM_EVIDENCE)?)?),
            Some(tags::TERM_CERTIFICATE) => {
                Term::Certificate(Certificate::from_bytes(dec.expect(tags::TERM_CERTIFICATE)?)?)
            }
            Some(other) => {
                return Err(EncodingError::UnexpectedTag {
                    expected: tags::TERM_EVIDENCE,
                    found: other,
                    offset: 0,
                })
            }
            None => return Err(EncodingError::Truncated(0)),
        };
        dec.finish()?;
        Ok(term)
    }

    /// Merkle leaf and lookup key of the term.
    pub fn digest(&self) -> Digest {
        hash(&self.to_bytes())
    }

    pub fn as_evidence(&self) -> Option<&Evidence> {
        match self {
            Term::Evidence(ev) => Some(ev),
            Term::Certificate(_) => None,
        }
    }

    pub fn as_certificate(&self) -> Option<&Certificate> {
        match self {
            Term::Certificate(c) => Some(c),
            Term::Evidence(_) => None,
        }
    }
}

impl From<Evidence> for Term {
    fn from(ev: Evidence) -> Self {
        Term::Evidence(ev)
    }
}

impl From<Certificate> for Term {
    fn from(c: Certificate) -> Self {
        Term::Certificate(c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_digest: Digest,
    pub created_at: Timestamp,
    pub terms: Vec<Term>,
    pub merkle_root: Digest,
    pub work_cost: u64,
}

impl Block {
    pub fn new(height: u64, prev_digest: Digest, created_at: Timestamp, terms: Vec<Term>) -> Self {
        let merkle_root = Self::root_of(&terms);
        Self {
            height,
            prev_digest,
            created_at,
            terms,
            merkle_root,
            work_cost: WORK_PER_BLOCK,
        }
    }

    pub fn root_of(terms: &[Term]) -> Digest {
        MerkleTree::build(&Self::leaves_of(terms)).root()
    }

    fn leaves_of(terms: &[Term]) -> Vec<Digest> {
        terms.iter().map(Term::digest).collect()
    }

    pub fn tree(&self) -> MerkleTree {
        merkle::build(&Self::leaves_of(&self.terms))
    }

    pub fn digest(&self) -> Digest {
        hash(&self.to_bytes())
    }

    pub fn contains(&self, term_digest: &Digest) -> bool {
        self.terms.iter().any(|t| t.digest() == *term_digest)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64_field(tags::BLOCK_HEIGHT, self.height)
            .field(tags::BLOCK_PREV, self.prev_digest.as_bytes())
            .u64_field(tags::BLOCK_CREATED_AT, self.created_at.0)
            .field(tags::BLOCK_ROOT, self.merkle_root.as_bytes())
            .u64_field(tags::BLOCK_WORK, self.work_cost);
        for term in &self.terms {
            enc.field(tags::BLOCK_TERM, &term.to_bytes());
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let height = dec.expect_u64(tags::BLOCK_HEIGHT)?;
        let prev_digest = Digest(dec.expect_fixed(tags::BLOCK_PREV)?);
        let created_at = Timestamp(dec.expect_u64(tags::BLOCK_CREATED_AT)?);
        let merkle_root = Digest(dec.expect_fixed(tags::BLOCK_ROOT)?);
        let work_cost = dec.expect_u64(tags::BLOCK_WORK)?;
        let mut terms = Vec::new();
        while !dec.is_empty() {
            terms.push(Term::from_bytes(dec.expect(tags::BLOCK_TERM)?)?);
        }
        dec.finish()?;
        Ok(Self {
            height,
            prev_digest,
            created_at,
            terms,
            merkle_root,
            work_cost,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("block at index {0} declares height {1}")]
    Height(usize, u64),
    #[error("block {0} does not link to its predecessor")]
    BrokenLink(u64),
    #[error("block {0} has a Merkle root that does not match its terms")]
    MerkleRoot(u64),
    #[error("block {0} is not later than its predecessor")]
    CreationOrder(u64),
    #[error("block {0} carries work cost {1}")]
    Work(u64, u64),
    #[error("tip digest differs from the trusted tip")]
    Tip,
    #[error("block {0} failed to decode: {1}")]
    Decode(usize, EncodingError),
}

/// Re-verifies a ledger from genesis. With `trusted_tip` the last block is
/// also pinned, which covers mutations no successor could reveal.
pub fn verify_ledger(blocks: &[Block], trusted_tip: Option<&Digest>) -> Result<(), IntegrityError> {
    let mut prev = GENESIS_PREV;
    let mut prev_time: Option<Timestamp> = None;
    for (i, b) in blocks.iter().enumerate() {
        if b.height != i as u64 {
            return Err(IntegrityError::Height(i, b.height));
        }
        if b.prev_digest != prev {
            return Err(IntegrityError::BrokenLink(b.height));
        }
        if b.work_cost != WORK_PER_BLOCK {
            return Err(IntegrityError::Work(b.height, b.work_cost));
        }
        if prev_time.is_some_and(|p| b.created_at <= p) {
            return Err(IntegrityError::CreationOrder(b.height));
        }
        if Block::root_of(&b.terms) != b.merkle_root {
            return Err(IntegrityError::MerkleRoot(b.height));
        }
        prev = b.digest();
        prev_time = Some(b.created_at);
    }
    match trusted_tip {
        Some(tip) if blocks.last().map(Block::digest).as_ref() != Some(tip) => Err(IntegrityError::Tip),
        _ => Ok(()),
    }
}

/// Decodes serialized blocks and verifies the resulting ledger.
pub fn verify_encoded_ledger(encoded: &[Vec<u8>], trusted_tip: Option<&Digest>) -> Result<(), IntegrityError> {
    let blocks = encoded
        .iter()
        .enumerate()
        .map(|(i, b)| Block::from_bytes(b).map_err(|e| IntegrityError::Decode(i, e)))
        .collect::<Result<Vec<_>, _>>()?;
    verify_ledger(&blocks, trusted_tip)
}

/// Accumulated work needed to rewrite the ledger from `height` to the tip.
pub fn rewrite_cost(blocks: &[Block], height: u64) -> u64 {
    blocks
        .iter()
        .filter(|b| b.height >= height)
        .map(|b| b.work_cost)
        .sum()
}

/// Extends `blocks` by one block holding `terms`.
pub fn extend(blocks: &[Block], created_at: Timestamp, terms: Vec<Term>) -> Block {
    let (height, prev) = match blocks.last() {
        Some(tip) => (tip.height + 1, tip.digest()),
        None => (0, GENESIS_PREV),
    };
    Block::new(height, prev, created_at, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{Signature};

    fn ev(i: u8) -> Term {
        Term::Evidence(Evidence {
            h1: hash(&[i]),
            h2: hash(&[i, i]),
            sig: Signature(vec![i; 64]),
            key_digest: hash(b"reader"),
        })
    }

    fn chain(n: usize) -> Vec<Block> {
        let mut blocks = Vec::new();
        for i in 0..n {
            let terms = (0..(i % 3)).map(|j| ev((i * 3 + j) as u8)).collect();
            let b = extend(&blocks, Timestamp(15 * (i as u64 + 1)), terms);
            blocks.push(b);
        }
        blocks
    }

    #[test]
    fn roundtrip_and_verify() {
        let blocks = chain(6);
        for b in &blocks {
            assert_eq!(Block::from_bytes(&b.to_bytes()).unwrap(), *b);
        }
        let tip = blocks.last().unwrap().digest();
        assert!(verify_ledger(&blocks, Some(&tip)).is_ok());
    }

    #[test]
    fn empty_block_root_is_empty_hash() {
        let b = Block::new(0, GENESIS_PREV, Timestamp(15), vec![]);
        assert_eq!(b.merkle_root, hash(&[]));
    }

    #[test]
    fn term_removal_breaks_links() {
        let mut blocks = chain(6);
        blocks[2].terms.pop();
        assert_eq!(verify_ledger(&blocks, None), Err(IntegrityError::MerkleRoot(2)));
        blocks[2].merkle_root = Block::root_of(&blocks[2].terms);
        assert_eq!(verify_ledger(&blocks, None), Err(IntegrityError::BrokenLink(3)));
    }

    #[test]
    fn rewrite_cost_accumulates() {
        let blocks = chain(10);
        assert_eq!(rewrite_cost(&blocks, 9), WORK_PER_BLOCK);
        assert_eq!(rewrite_cost(&blocks, 0), 10 * WORK_PER_BLOCK);
        for h in 0..8 {
            assert!(rewrite_cost(&blocks, h) > WORK_PER_BLOCK);
        }
    }

    #[test]
    fn term_wire_roundtrip() {
        let t = ev(3);
        assert_eq!(Term::from_bytes(&t.to_bytes()).unwrap(), t);
        assert!(Term::from_bytes(&[]).is_err());
    }
}
