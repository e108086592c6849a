//! Client-side verification: readout authenticity, elapsed-time and alibi
//! checks, evidence service audits, and ledger agreement.
//!
//! Chain access goes through [`ChainView`]. [`QuorumView`] answers from a
//! fixed set of nodes and trusts a Merkle root only when a majority of
//! them report it.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::{rules, verify_ledger, Block, ChainNetwork, Term, TermFault};
use crate::crypto::{self, tags, Digest, Encoder};
use crate::merkle;
use crate::reader::{Evidence, Readout};
use crate::vendor::{Certificate, PkiStub};
use crate::world::{Proximity, Timestamp};


/// Any term a verifier may be asked to judge.
#[derive(Debug, Clone, Copy)]
pub enum AnyTerm<'a> {
    Readout(&'a Readout),
    Evidence(&'a Evidence),
    Certificate(&'a Certificate),
    Block(&'a Block),
}

/// Validity of a term known at `at`, given the valid certificates known so
/// far. A readout is judged at its own timestamp; a block is invalid if any
/// term in it is.
pub fn validate_term(term: AnyTerm, certs: &[Certificate], pki: &PkiStub, at: Timestamp) -> Result<(), TermFault> {
    match term {
        AnyTerm::Readout(ro) => {
            rules::validate_evidence(&ro.to_evidence(), certs, ro.t)?;
            if at < ro.t {
                return Err(TermFault::CertWindow);
            }
            Ok(())
        }
        AnyTerm::Evidence(ev) => rules::validate_evidence(ev, certs, at),
        AnyTerm::Certificate(c) => rules::validate_certificate(c, pki, at),
        AnyTerm::Block(b) => {
            let mut known = certs.to_vec();
            for t in &b.terms {
                rules::validate(t, &known, pki, b.created_at)?;
                if let Term::Certificate(c) = t {
                    known.push(c.clone());
                }
            }
            Ok(())
        }
    }
}

/// Default quorum size for chain queries.
pub const QUORUM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Authentic,
    ServiceFault,
    EvidenceFault,
    InvalidTerm,
    Unproven,
}

impl Outcome {
    fn rank(self) -> u8 {
        match self {
            Outcome::ServiceFault => 4,
            Outcome::EvidenceFault => 3,
            Outcome::InvalidTerm => 2,
            Outcome::Unproven => 1,
            Outcome::Authentic => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    CertWindow,
    SigFail,
    NoEvidence,
    PoeFail,
    BctMismatch,
    KeyUnobtainable,
    KeyMismatch,
    Withheld,
    Unreachable,
    MissingReadout,
    NotApart,
}

impl From<TermFault> for Reason {
    fn from(f: TermFault) -> Self {
        match f {
            TermFault::KeyUnobtainable => Reason::KeyUnobtainable,
            TermFault::CertWindow => Reason::CertWindow,
            TermFault::SigFail => Reason::SigFail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Note {
    /// Location is reported by the reader and cannot be checked.
    LocationUnverified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub reasons: Vec<Reason>,
    pub notes: Vec<Note>,
}

impl Verdict {
    pub fn authentic() -> Self {
        Self {
            outcome: Outcome::Authentic,
            reasons: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn fault(outcome: Outcome, reason: Reason) -> Self {
        Self {
            outcome,
            reasons: vec![reason],
            notes: Vec::new(),
        }
    }

    pub fn is_authentic(&self) -> bool {
        self.outcome == Outcome::Authentic
    }

    pub fn has(&self, r: Reason) -> bool {
        self.reasons.contains(&r)
    }

    fn with_note(mut self, n: Note) -> Self {
        if !self.notes.contains(&n) {
            self.notes.push(n);
        }
        self
    }

    /// Merges `other` in; the more severe outcome wins.
    pub fn absorb(&mut self, other: Verdict) {
        if other.outcome.rank() > self.outcome.rank() {
            self.outcome = other.outcome;
        }
        for r in other.reasons {
            if !self.reasons.contains(&r) {
                self.reasons.push(r);
            }
        }
        for n in other.notes {
            if !self.notes.contains(&n) {
                self.notes.push(n);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lookup<T> {
    Found(T),
    Absent,
    Unreachable,
}

impl<T> Lookup<T> {
    pub fn found(self) -> Option<T> {
        match self {
            Lookup::Found(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Certificate,
    Evidence,
    Root,
    Proof,
    Tip,
}

impl QueryKind {
    fn byte(self) -> u8 {
        match self {
            QueryKind::Certificate => 1,
            QueryKind::Evidence => 2,
            QueryKind::Root => 3,
            QueryKind::Proof => 4,
            QueryKind::Tip => 5,
        }
    }
}

/// One query sent to the chain, in wire form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub kind: QueryKind,
    pub nodes: Vec<usize>,
    pub bytes: Vec<u8>,
}

fn query_bytes(kind: QueryKind, key: Option<&Digest>, bct: Option<Timestamp>, at: Option<Timestamp>) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.field(tags::QUERY_KIND, &[kind.byte()]);
    if let Some(k) = key {
        enc.field(tags::QUERY_KEY, k.as_bytes());
    }
    if let Some(b) = bct {
        enc.u64_field(tags::QUERY_BCT, b.0);
    }
    if let Some(a) = at {
        enc.u64_field(tags::QUERY_AT, a.0);
    }
    enc.finish()
}

/// Everything a verifier may learn from the chain.
pub trait ChainView {
    fn pki(&self) -> &PkiStub;
    /// Time of the check.
    fn now(&self) -> Timestamp;
    /// Candidate certificates for a reader key, with the BCT each node claims.
    fn certificates(&self, reader_key_digest: &Digest) -> Lookup<Vec<(Certificate, Timestamp)>>;
    /// Candidate evidences under a search key, with claimed BCTs. Not yet
    /// checked for existence.
    fn evidences(&self, key: &Digest) -> Lookup<Vec<(Evidence, Timestamp)>>;
    /// Trusted root of the block created at `bct`, if the term is provably in it.
    fn existence(&self, term_digest: &Digest, bct: Timestamp) -> Lookup<Digest>;
}

/// Chain view over a node quorum with majority agreement on roots.
pub struct QuorumView<'a> {
    net: &'a ChainNetwork,
    pki: &'a PkiStub,
    nodes: Vec<usize>,
    at: Timestamp,
    log: RefCell<Vec<QueryRecord>>,
}

impl<'a> QuorumView<'a> {
    pub fn new(net: &'a ChainNetwork, pki: &'a PkiStub, nodes: Vec<usize>, at: Timestamp) -> Self {
        assert!(!nodes.is_empty(), "quorum needs nodes");
        Self {
            net,
            pki,
            nodes,
            at,
            log: RefCell::new(Vec::new()),
        }
    }

    /// Quorum of the first [`QUORUM`] nodes.
    pub fn first(net: &'a ChainNetwork, pki: &'a PkiStub, at: Timestamp) -> Self {
        let n = net.len().min(QUORUM);
        Self::new(net, pki, (0..n).collect(), at)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn network(&self) -> &ChainNetwork {
        self.net
    }

    pub fn queries(&self) -> Vec<QueryRecord> {
        self.log.borrow().clone()
    }

    /// Consumes the view, returning its queries so the caller can log them
    /// once the network is no longer borrowed.
    pub fn into_queries(self) -> Vec<QueryRecord> {
        self.log.into_inner()
    }

    fn record(&self, kind: QueryKind, key: Option<&Digest>, bct: Option<Timestamp>, at: Option<Timestamp>) {
        self.log.borrow_mut().push(QueryRecord {
            kind,
            nodes: self.nodes.clone(),
            bytes: query_bytes(kind, key, bct, at),
        });
    }

    fn majority(&self) -> usize {
        self.nodes.len() / 2 + 1
    }

    /// Raw answer of one node to an evidence query.
    pub fn node_evidence(&self, node: usize, key: &Digest) -> Option<Vec<(Evidence, Timestamp)>> {
        self.log.borrow_mut().push(QueryRecord {
            kind: QueryKind::Evidence,
            nodes: vec![node],
            bytes: query_bytes(QueryKind::Evidence, Some(key), None, Some(self.at)),
        });
        self.net.node(node).query_evidence(key, self.at)
    }
}

impl ChainView for QuorumView<'_> {
    fn pki(&self) -> &PkiStub {
        self.pki
    }

    fn now(&self) -> Timestamp {
        self.at
    }

    fn certificates(&self, reader_key_digest: &Digest) -> Lookup<Vec<(Certificate, Timestamp)>> {
        self.record(QueryKind::Certificate, Some(reader_key_digest), None, None);
        let mut any = false;
        let mut out: Vec<(Certificate, Timestamp)> = Vec::new();
        for &i in &self.nodes {
            if let Some(answer) = self.net.node(i).query_certificate(reader_key_digest) {
                any = true;
                if let Some(c) = answer {
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        if !any {
            return Lookup::Unreachable;
        }
        out.sort_by_key(|(_, bct)| *bct);
        Lookup::Found(out)
    }

    fn evidences(&self, key: &Digest) -> Lookup<Vec<(Evidence, Timestamp)>> {
        self.record(QueryKind::Evidence, Some(key), None, Some(self.at));
        let mut any = false;
        let mut out: Vec<(Evidence, Timestamp)> = Vec::new();
        for &i in &self.nodes {
            if let Some(answer) = self.net.node(i).query_evidence(key, self.at) {
                any = true;
                for e in answer {
                    if !out.contains(&e) {
                        out.push(e);
                    }
                }
            }
        }
        if !any {
            return Lookup::Unreachable;
        }
        out.sort_by_key(|(_, bct)| *bct);
        Lookup::Found(out)
    }

    fn existence(&self, term_digest: &Digest, bct: Timestamp) -> Lookup<Digest> {
        self.record(QueryKind::Root, None, Some(bct), None);
        let mut votes: BTreeMap<Option<Digest>, usize> = BTreeMap::new();
        let mut responses = 0;
        for &i in &self.nodes {
            if let Some(r) = self.net.node(i).query_root(bct) {
                responses += 1;
                *votes.entry(r).or_default() += 1;
            }
        }
        let winner = votes.iter().find(|(_, c)| **c >= self.majority()).map(|(r, _)| *r);
        let root = match winner {
            Some(Some(root)) => root,
            Some(None) => return Lookup::Absent,
            None if responses < self.majority() => return Lookup::Unreachable,
            None => return Lookup::Absent,
        };
        self.record(QueryKind::Proof, Some(term_digest), Some(bct), None);
        for &i in &self.nodes {
            if let Some(Some(proof)) = self.net.node(i).query_proof(term_digest, bct) {
                if merkle::verify_proof(term_digest, &proof, &root) {
                    return Lookup::Found(root);
                }
            }
        }
        Lookup::Absent
    }
}

/// Verification policy parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    /// Allowed gap between a claimed time and a block creation time.
    pub bct_tolerance: u64,
    pub proximity: Proximity,
}

impl Policy {
    pub fn new(block_interval: u64, proximity: Proximity) -> Self {
        Self {
            bct_tolerance: block_interval + proximity.close,
            proximity,
        }
    }
}

/// First certificate for `reader_key_digest` that exists on chain and was
/// valid when it was recorded.
fn trusted_certificate(view: &dyn ChainView, reader_key_digest: &Digest) -> Result<(Certificate, Timestamp), Verdict> {
    let candidates = match view.certificates(reader_key_digest) {
        Lookup::Found(c) => c,
        Lookup::Absent => Vec::new(),
        Lookup::Unreachable => return Err(Verdict::fault(Outcome::Unproven, Reason::Unreachable)),
    };
    let mut fault = Reason::KeyUnobtainable;
    for (cert, bct) in candidates {
        if cert.reader_key_digest() != *reader_key_digest {
            continue;
        }
        match view.existence(&Term::Certificate(cert.clone()).digest(), bct) {
            Lookup::Found(_) => {}
            Lookup::Unreachable => return Err(Verdict::fault(Outcome::Unproven, Reason::Unreachable)),
            Lookup::Absent => continue,
        }
        match rules::validate_certificate(&cert, view.pki(), bct) {
            Ok(()) => return Ok((cert, bct)),
            Err(f) => fault = f.into(),
        }
    }
    Err(Verdict::fault(Outcome::InvalidTerm, fault))
}

/// Evidence equal to `ev` that provably exists on chain, with its BCT.
fn recorded_evidence(view: &dyn ChainView, ev: &Evidence) -> Result<Timestamp, Verdict> {
    let candidates = match view.evidences(&ev.h1) {
        Lookup::Found(c) => c,
        Lookup::Absent => Vec::new(),
        Lookup::Unreachable => return Err(Verdict::fault(Outcome::Unproven, Reason::Unreachable)),
    };
    let matching: Vec<_> = candidates.into_iter().filter(|(e, _)| e == ev).collect();
    if matching.is_empty() {
        return Err(Verdict::fault(Outcome::ServiceFault, Reason::NoEvidence));
    }
    let digest = Term::Evidence(ev.clone()).digest();
    let mut unreachable = false;
    for (_, bct) in matching {
        match view.existence(&digest, bct) {
            Lookup::Found(_) => return Ok(bct),
            Lookup::Unreachable => unreachable = true,
            Lookup::Absent => {}
        }
    }
    if unreachable {
        Err(Verdict::fault(Outcome::Unproven, Reason::Unreachable))
    } else {
        Err(Verdict::fault(Outcome::EvidenceFault, Reason::PoeFail))
    }
}

/// Checks a readout returned by a service against the chain.
pub fn verify_readout(ro: &Readout, view: &dyn ChainView, policy: &Policy) -> Verdict {
    verify_readout_inner(ro, view, policy)
        .err()
        .unwrap_or_else(Verdict::authentic)
        .with_note(Note::LocationUnverified)
}

fn verify_readout_inner(ro: &Readout, view: &dyn ChainView, policy: &Policy) -> Result<(), Verdict> {
    let (cert, _) = trusted_certificate(view, &ro.key_digest)?;
    if !cert.covers(ro.t) {
        return Err(Verdict::fault(Outcome::InvalidTerm, Reason::CertWindow));
    }
    if !crypto::verify(&ro.signed_message(), &ro.sig, &cert.reader_public) {
        return Err(Verdict::fault(Outcome::ServiceFault, Reason::SigFail));
    }
    let bct = recorded_evidence(view, &ro.to_evidence())?;
    if bct.abs_diff(ro.t) > policy.bct_tolerance {
        return Err(Verdict::fault(Outcome::ServiceFault, Reason::BctMismatch));
    }
    Ok(())
}

/// Checks a service's full answer to a query for search key `key`: every
/// readout must verify and every recorded evidence signed by one of
/// `service_readers` must have a readout.
pub fn verify_service_response(
    key: &Digest,
    readouts: &[Readout],
    service_readers: &[Digest],
    view: &dyn ChainView,
    policy: &Policy,
) -> Verdict {
    let mut verdict = Verdict::authentic().with_note(Note::LocationUnverified);
    for ro in readouts {
        if ro.h1() != *key {
            verdict.absorb(Verdict::fault(Outcome::ServiceFault, Reason::KeyMismatch));
            continue;
        }
        verdict.absorb(verify_readout(ro, view, policy));
    }
    match view.evidences(key) {
        Lookup::Found(candidates) => {
            for (ev, bct) in candidates {
                if ev.h1 != *key || !service_readers.contains(&ev.key_digest) {
                    continue;
                }
                let proven = matches!(view.existence(&Term::Evidence(ev.clone()).digest(), bct), Lookup::Found(_));
                let paired = readouts.iter().any(|ro| ro.to_evidence() == ev);
                if proven && !paired {
                    verdict.absorb(Verdict::fault(Outcome::ServiceFault, Reason::MissingReadout));
                }
            }
        }
        Lookup::Absent => {}
        Lookup::Unreachable => verdict.absorb(Verdict::fault(Outcome::Unproven, Reason::Unreachable)),
    }
    verdict
}

/// A term whose time of existence is in question.
#[derive(Debug, Clone, PartialEq)]
pub enum Claim {
    Readout(Readout),
    Evidence(Evidence),
    Certificate(Certificate),
}

/// Result of an elapsed-time or alibi check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeCheck {
    /// Recorded creation time of the backing term, when found.
    pub bct: Option<Timestamp>,
    pub reasons: Vec<Reason>,
}

impl TimeCheck {
    fn failed(r: Reason) -> Self {
        Self {
            bct: None,
            reasons: vec![r],
        }
    }

    /// Elapsed time upheld: no reasons to doubt the claim.
    pub fn upheld(&self) -> bool {
        self.reasons.is_empty()
    }

    /// Alibi verdict: the claim was made up.
    pub fn fabrication_detected(&self) -> bool {
        !self.reasons.is_empty()
    }
}

fn first_reason(v: Verdict) -> Reason {
    v.reasons.first().copied().unwrap_or(Reason::Unreachable)
}

/// Finds the recorded creation time backing `claim`.
fn backing_bct(claim: &Claim, view: &dyn ChainView) -> Result<Timestamp, Reason> {
    match claim {
        Claim::Readout(ro) => {
            let (cert, _) = trusted_certificate(view, &ro.key_digest).map_err(first_reason)?;
            if !crypto::verify(&ro.signed_message(), &ro.sig, &cert.reader_public) {
                return Err(Reason::SigFail);
            }
            let ev = ro.to_evidence();
            let bct = recorded_evidence(view, &ev).map_err(first_reason)?;
            if !cert.covers(bct) {
                return Err(Reason::CertWindow);
            }
            Ok(bct)
        }
        Claim::Evidence(ev) => {
            let (cert, _) = trusted_certificate(view, &ev.key_digest).map_err(first_reason)?;
            if !crypto::verify(&ev.signed_message(), &ev.sig, &cert.reader_public) {
                return Err(Reason::SigFail);
            }
            let bct = recorded_evidence(view, ev).map_err(first_reason)?;
            if !cert.covers(bct) {
                return Err(Reason::CertWindow);
            }
            Ok(bct)
        }
        Claim::Certificate(c) => {
            let candidates = match view.certificates(&c.reader_key_digest()) {
                Lookup::Found(v) => v,
                Lookup::Absent => Vec::new(),
                Lookup::Unreachable => return Err(Reason::Unreachable),
            };
            let Some((_, bct)) = candidates.into_iter().find(|(cand, _)| cand == c) else {
                return Err(Reason::NoEvidence);
            };
            match view.existence(&Term::Certificate(c.clone()).digest(), bct) {
                Lookup::Found(_) => {}
                Lookup::Absent => return Err(Reason::PoeFail),
                Lookup::Unreachable => return Err(Reason::Unreachable),
            }
            rules::validate_certificate(c, view.pki(), bct).map_err(Reason::from)?;
            Ok(bct)
        }
    }
}

fn time_check(claim: &Claim, claimed: Timestamp, view: &dyn ChainView, policy: &Policy) -> TimeCheck {
    match backing_bct(claim, view) {
        Err(r) => TimeCheck::failed(r),
        Ok(bct) => {
            let reasons = if bct.0 > claimed.0 + policy.bct_tolerance {
                vec![Reason::BctMismatch]
            } else {
                Vec::new()
            };
            TimeCheck {
                bct: Some(bct),
                reasons,
            }
        }
    }
}

/// Was `claim` in existence at `claimed`, a time well before now? Holds
/// after the reader key leaked or its certificate expired, since the
/// backing term was recorded while the key was still valid.
pub fn check_elapsed_time(claim: &Claim, claimed: Timestamp, view: &dyn ChainView, policy: &Policy) -> TimeCheck {
    if !policy.proximity.time_apart(claimed, view.now()) {
        return TimeCheck::failed(Reason::NotApart);
    }
    time_check(claim, claimed, view, policy)
}

/// Detects a term created now but dated to `claimed`: the chain either has
/// no record of it or recorded it too late.
pub fn check_alibi(claim: &Claim, claimed: Timestamp, view: &dyn ChainView, policy: &Policy) -> TimeCheck {
    time_check(claim, claimed, view, policy)
}

/// Evidences under `key` that provably exist on chain.
pub fn proven_evidences(view: &dyn ChainView, key: &Digest) -> Lookup<Vec<(Evidence, Timestamp)>> {
    match view.evidences(key) {
        Lookup::Found(c) => Lookup::Found(
            c.into_iter()
                .filter(|(e, bct)| {
                    e.h1 == *key
                        && matches!(view.existence(&Term::Evidence(e.clone()).digest(), *bct), Lookup::Found(_))
                })
                .collect(),
        ),
        other => other,
    }
}

/// Per-node audit of evidence answers for `key` against the set `expected`.
pub fn audit_evidence_service(key: &Digest, expected: &[Evidence], view: &QuorumView, nodes: &[usize]) -> Vec<(usize, Verdict)> {
    nodes
        .iter()
        .map(|&node| {
            let Some(answer) = view.node_evidence(node, key) else {
                return (node, Verdict::fault(Outcome::Unproven, Reason::Unreachable));
            };
            let mut v = Verdict::authentic();
            for (ev, bct) in &answer {
                if ev.h1 != *key {
                    v.absorb(Verdict::fault(Outcome::EvidenceFault, Reason::KeyMismatch));
                } else if !expected.contains(ev) {
                    let d = Term::Evidence(ev.clone()).digest();
                    if !matches!(view.existence(&d, *bct), Lookup::Found(_)) {
                        v.absorb(Verdict::fault(Outcome::EvidenceFault, Reason::PoeFail));
                    }
                }
            }
            if expected.iter().any(|e| !answer.iter().any(|(a, _)| a == e)) {
                v.absorb(Verdict::fault(Outcome::EvidenceFault, Reason::Withheld));
            }
            (node, v)
        })
        .collect()
}

/// Ledger agreement: `true` for nodes whose ledger verifies and whose tip
/// matches the majority tip of responsive nodes.
pub fn audit_ledgers(net: &ChainNetwork) -> Vec<(usize, bool)> {
    let tips: Vec<Option<Option<Digest>>> = net.nodes().iter().map(|n| n.query_tip()).collect();
    let mut votes: BTreeMap<Digest, usize> = BTreeMap::new();
    for t in tips.iter().flatten().flatten() {
        *votes.entry(*t).or_default() += 1;
    }
    let majority = votes.iter().max_by_key(|(d, c)| (**c, **d)).map(|(d, _)| *d);
    net.nodes()
        .iter()
        .zip(tips)
        .filter(|(_, t)| t.is_some())
        .map(|(n, t)| {
            let ok = verify_ledger(n.ledger(), majority.as_ref()).is_ok() && t.flatten() == majority;
            (n.id, ok)
        })
        .collect()
}
