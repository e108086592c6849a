//! A single blockchain node: term validation, pending pool, ledger, queries,
//! and the fault behaviours used by adversarial scenarios.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::block::{self, Block, Term, GENESIS_PREV};
use super::rules::{self, TermFault};
use crate::crypto::{hash, tags, Digest, Encoder, Signature};
use crate::merkle::{MerkleProof, Side};
use crate::reader::Evidence;
use crate::vendor::{Certificate, PkiStub};
use crate::world::Timestamp;

/// Ways a lying node answers queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LieMode {
    /// Denies knowledge of recorded terms.
    Withhold,
    /// Adds invented evidences with invented proofs.
    Fabricate,
    /// Answers with terms recorded under other keys.
    WrongTerm,
    /// Reports invented Merkle roots.
    ForgeRoots,
    /// Serves a locally rewritten ledger.
    Rewritten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    Correct,
    /// Never responds and never forwards.
    Silent,
    Lying(LieMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receipt {
    Accepted,
    AlreadyKnown,
    Forgotten(TermFault),
}

#[derive(Debug, Clone)]
pub struct ChainNode {
    pub id: usize,
    pub fault: FaultMode,
    pub peers: Vec<usize>,
    terms: BTreeMap<Digest, Term>,
    pending: Vec<Digest>,
    ledger: Vec<Block>,
    confirmed: BTreeMap<Digest, u64>,
    certs_by_reader: BTreeMap<Digest, Vec<Digest>>,
    evidence_by_h1: BTreeMap<Digest, Vec<Digest>>,
    outgoing: Vec<Digest>,
    forgotten: u64,
}

impl ChainNode {
    pub fn new(id: usize) -> Self {
        Self {
            id,
            fault: FaultMode::Correct,
            peers: Vec::new(),
            terms: BTreeMap::new(),
            pending: Vec::new(),
            ledger: Vec::new(),
            confirmed: BTreeMap::new(),
            certs_by_reader: BTreeMap::new(),
            evidence_by_h1: BTreeMap::new(),
            outgoing: Vec::new(),
            forgotten: 0,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.fault == FaultMode::Correct
    }

    pub fn responds(&self) -> bool {
        self.fault != FaultMode::Silent
    }

    pub fn knows(&self, term_digest: &Digest) -> bool {
        self.terms.contains_key(term_digest)
    }

    pub fn ledger(&self) -> &[Block] {
        &self.ledger
    }

    pub fn tip(&self) -> Option<&Block> {
        self.ledger.last()
    }

    pub fn has_outgoing(&self) -> bool {
        !self.outgoing.is_empty()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn forgotten_count(&self) -> u64 {
        self.forgotten
    }

    pub fn is_confirmed(&self, term_digest: &Digest) -> bool {
        self.confirmed.contains_key(term_digest)
    }

    /// Valid certificates this node knows for a reader key.
    pub fn certificates_for(&self, reader_key_digest: &Digest) -> Vec<Certificate> {
        self.certs_by_reader
            .get(reader_key_digest)
            .into_iter()
            .flatten()
            .filter_map(|d| self.terms.get(d).and_then(Term::as_certificate).cloned())
            .collect()
    }

    fn certs_for_term(&self, term: &Term, extra: &[Certificate]) -> Vec<Certificate> {
        match term {
            Term::Evidence(ev) => {
                let mut certs = self.certificates_for(&ev.key_digest);
                certs.extend(extra.iter().filter(|c| c.reader_key_digest() == ev.key_digest).cloned());
                certs
            }
            Term::Certificate(_) => Vec::new(),
        }
    }

    fn index(&mut self, digest: Digest, term: Term) {
        match &term {
            Term::Evidence(ev) => self.evidence_by_h1.entry(ev.h1).or_default().push(digest),
            Term::Certificate(c) => self
                .certs_by_reader
                .entry(c.reader_key_digest())
                .or_default()
                .push(digest),
        }
        self.terms.insert(digest, term);
    }

    fn unindex(&mut self, digest: &Digest) {
        let Some(term) = self.terms.remove(digest) else {
            return;
        };
        let list = match &term {
            Term::Evidence(ev) => self.evidence_by_h1.get_mut(&ev.h1),
            Term::Certificate(c) => self.certs_by_reader.get_mut(&c.reader_key_digest()),
        };
        if let Some(list) = list {
            list.retain(|d| d != digest);
        }
        self.confirmed.remove(digest);
        self.pending.retain(|d| d != digest);
    }

    /// Learns a term received at `at`. Invalid terms are forgotten.
    pub fn receive(&mut self, term: &Term, at: Timestamp, pki: &PkiStub) -> Receipt {
        let digest = term.digest();
        if self.knows(&digest) {
            return Receipt::AlreadyKnown;
        }
        let certs = self.certs_for_term(term, &[]);
        if let Err(fault) = rules::validate(term, &certs, pki, at) {
            self.forgotten += 1;
            return Receipt::Forgotten(fault);
        }
        self.index(digest, term.clone());
        self.pending.push(digest);
        self.outgoing.push(digest);
        Receipt::Accepted
    }

    pub(crate) fn take_outgoing(&mut self) -> Vec<Term> {
        std::mem::take(&mut self.outgoing)
            .into_iter()
            .filter_map(|d| self.terms.get(&d).cloned())
            .collect()
    }

    /// Terms a lying node injects alongside its honest gossip.
    pub(crate) fn invented_terms(&self, at: Timestamp) -> Vec<Term> {
        match self.fault {
            FaultMode::Lying(LieMode::Fabricate) => {
                let key = hash(&[&at.to_be_bytes()[..], &(self.id as u64).to_be_bytes()].concat());
                vec![Term::Evidence(self.fabricate(&key))]
            }
            _ => Vec::new(),
        }
    }

    /// Builds the next block from pending terms that are still valid at `at`.
    pub fn produce_block(&self, at: Timestamp, pki: &PkiStub) -> Block {
        let mut certs_in_block: Vec<Certificate> = Vec::new();
        let mut chosen = Vec::new();
        for d in &self.pending {
            let term = &self.terms[d];
            let certs = self.certs_for_term(term, &certs_in_block);
            if rules::validate(term, &certs, pki, at).is_ok() {
                if let Term::Certificate(c) = term {
                    certs_in_block.push(c.clone());
                }
                chosen.push(term.clone());
            }
        }
        block::extend(&self.ledger, at, chosen)
    }

    /// Validates and appends a block. Returns whether it was appended.
    pub fn apply_block(&mut self, b: &Block, pki: &PkiStub) -> bool {
        let (height, prev, last_time) = match self.ledger.last() {
            Some(tip) => (tip.height + 1, tip.digest(), Some(tip.created_at)),
            None => (0, GENESIS_PREV, None),
        };
        if b.height != height || b.prev_digest != prev || last_time.is_some_and(|t| b.created_at <= t) {
            return false;
        }
        if self.is_correct() {
            if Block::root_of(&b.terms) != b.merkle_root {
                return false;
            }
            let mut certs_in_block = Vec::new();
            for term in &b.terms {
                let certs = self.certs_for_term(term, &certs_in_block);
                if rules::validate(term, &certs, pki, b.created_at).is_err() {
                    return false;
                }
                if let Term::Certificate(c) = term {
                    certs_in_block.push(c.clone());
                }
            }
        }
        for term in &b.terms {
            let d = term.digest();
            if !self.knows(&d) {
                self.index(d, term.clone());
            }
            self.confirmed.insert(d, b.height);
        }
        let confirmed = &self.confirmed;
        self.pending.retain(|d| !confirmed.contains_key(d));
        self.ledger.push(b.clone());
        self.forget_stale(b.created_at, pki);
        true
    }

    /// Forgets pending terms that can no longer enter a block, such as
    /// evidences whose certificate window has closed.
    fn forget_stale(&mut self, at: Timestamp, pki: &PkiStub) {
        let stale: Vec<Digest> = self
            .pending
            .iter()
            .filter(|d| {
                let term = &self.terms[*d];
                rules::validate(term, &self.certs_for_term(term, &[]), pki, at).is_err()
            })
            .copied()
            .collect();
        for d in stale {
            self.unindex(&d);
            self.forgotten += 1;
        }
    }

    /// Removes a recorded term and rewrites every later block so the local
    /// ledger stays internally consistent. Returns the work the rewrite cost.
    pub fn delete_term(&mut self, term_digest: &Digest) -> Option<u64> {
        let height = *self.confirmed.get(term_digest)?;
        let cost = block::rewrite_cost(&self.ledger, height);
        let mut rebuilt: Vec<Block> = self.ledger[..height as usize].to_vec();
        for old in &self.ledger[height as usize..] {
            let terms = old
                .terms
                .iter()
                .filter(|t| t.digest() != *term_digest)
                .cloned()
                .collect();
            let b = block::extend(&rebuilt, old.created_at, terms);
            rebuilt.push(b);
        }
        self.ledger = rebuilt;
        self.unindex(term_digest);
        Some(cost)
    }

    fn bct_of(&self, term_digest: &Digest) -> Option<Timestamp> {
        self.confirmed
            .get(term_digest)
            .map(|h| self.ledger[*h as usize].created_at)
    }

    fn honest_evidence(&self, key: &Digest, t: Timestamp) -> Vec<(Evidence, Timestamp)> {
        let mut out: Vec<_> = self
            .evidence_by_h1
            .get(key)
            .into_iter()
            .flatten()
            .filter_map(|d| {
                let bct = self.bct_of(d)?;
                let ev = self.terms.get(d)?.as_evidence()?.clone();
                (bct < t).then_some((ev, bct))
            })
            .collect();
        out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.h2.cmp(&b.0.h2)));
        out
    }

    fn latest_block_before(&self, t: Timestamp) -> Option<Timestamp> {
        self.ledger.iter().rev().map(|b| b.created_at).find(|c| *c < t)
    }

    fn fabricate(&self, key: &Digest) -> Evidence {
        let seed = Encoder::new()
            .field(tags::QUERY_KEY, key.as_bytes())
            .u64_field(tags::QUERY_KIND, self.id as u64)
            .finish();
        let a = hash(&seed);
        let b = hash(a.as_bytes());
        let key_digest = self
            .certs_by_reader
            .keys()
            .next()
            .copied()
            .unwrap_or_else(|| hash(b.as_bytes()));
        Evidence {
            h1: *key,
            h2: a,
            sig: Signature([a.0, b.0].concat()),
            key_digest,
        }
    }

    /// Evidences recorded under search key `key` with block creation time
    /// before `t`, in BCT order. `None` means no response.
    pub fn query_evidence(&self, key: &Digest, t: Timestamp) -> Option<Vec<(Evidence, Timestamp)>> {
        match self.fault {
            FaultMode::Silent => None,
            FaultMode::Lying(LieMode::Withhold) => Some(Vec::new()),
            FaultMode::Lying(LieMode::Fabricate) => {
                let mut out = self.honest_evidence(key, t);
                if let Some(bct) = self.latest_block_before(t) {
                    out.push((self.fabricate(key), bct));
                }
                Some(out)
            }
            FaultMode::Lying(LieMode::WrongTerm) => {
                let other = self
                    .evidence_by_h1
                    .iter()
                    .filter(|(h1, _)| *h1 != key)
                    .flat_map(|(h1, _)| self.honest_evidence(h1, t))
                    .next();
                match other {
                    Some(found) => Some(vec![found]),
                    None => Some(
                        self.latest_block_before(t)
                            .map(|bct| (self.fabricate(&hash(key.as_bytes())), bct))
                            .into_iter()
                            .collect(),
                    ),
                }
            }
            _ => Some(self.honest_evidence(key, t)),
        }
    }

    /// Earliest recorded certificate for a reader key, with its BCT.
    pub fn query_certificate(&self, reader_key_digest: &Digest) -> Option<Option<(Certificate, Timestamp)>> {
        match self.fault {
            FaultMode::Silent => None,
            FaultMode::Lying(LieMode::Withhold) => Some(None),
            _ => Some(
                self.certs_by_reader
                    .get(reader_key_digest)
                    .into_iter()
                    .flatten()
                    .filter_map(|d| Some((self.terms.get(d)?.as_certificate()?.clone(), self.bct_of(d)?)))
                    .min_by_key(|(_, bct)| *bct),
            ),
        }
    }

    pub fn query_bct(&self, term_digest: &Digest) -> Option<Option<Timestamp>> {
        match self.fault {
            FaultMode::Silent => None,
            FaultMode::Lying(LieMode::Withhold) => Some(None),
            _ => Some(self.bct_of(term_digest)),
        }
    }

    /// Merkle root of the block created at `bct`.
    pub fn query_root(&self, bct: Timestamp) -> Option<Option<Digest>> {
        match self.fault {
            FaultMode::Silent => None,
            FaultMode::Lying(LieMode::ForgeRoots) => Some(Some(hash(
                &[b"root".as_slice(), &bct.to_be_bytes(), &(self.id as u64).to_be_bytes()].concat(),
            ))),
            _ => Some(
                self.ledger
                    .iter()
                    .find(|b| b.created_at == bct)
                    .map(|b| b.merkle_root),
            ),
        }
    }

    /// Inclusion proof of a term in the block created at `bct`.
    pub fn query_proof(&self, term_digest: &Digest, bct: Timestamp) -> Option<Option<MerkleProof>> {
        match self.fault {
            FaultMode::Silent => None,
            FaultMode::Lying(LieMode::Withhold) => Some(None),
            FaultMode::Lying(LieMode::Fabricate | LieMode::WrongTerm) if !self.knows(term_digest) => {
                Some(Some(MerkleProof {
                    leaf_index: 0,
                    path: vec![(Side::Right, hash(term_digest.as_bytes()))],
                }))
            }
            _ => Some(
                self.ledger
                    .iter()
                    .find(|b| b.created_at == bct)
                    .and_then(|b| b.tree().prove(term_digest)),
            ),
        }
    }

    pub fn query_tip(&self) -> Option<Option<Digest>> {
        self.responds().then(|| self.tip().map(Block::digest))
    }

    /// Terms this node has confirmed, for state comparison in tests.
    pub fn confirmed_digests(&self) -> BTreeSet<Digest> {
        self.confirmed.keys().copied().collect()
    }
}
