//! The multi-node chain network: submission, gossip, block creation and a
//! log of every byte sent to a chain node.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::block::{Block, Term};
use super::node::{ChainNode, FaultMode, Receipt};
use super::rules::TermFault;
use crate::crypto::Digest;
use crate::vendor::PkiStub;
use crate::world::Timestamp;

pub const DEFAULT_BLOCK_INTERVAL: u64 = 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Line,
    Ring,
    Full,
    Edges(Vec<(usize, usize)>),
}

impl Topology {
    fn edges(&self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Topology::Line => (1..n).map(|i| (i - 1, i)).collect(),
            Topology::Ring if n > 2 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Topology::Ring => Topology::Line.edges(n),
            Topology::Full => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
            Topology::Edges(e) => e.iter().copied().filter(|(a, b)| a < &n && b < &n && a != b).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Submit,
    Gossip,
    Block,
    Query,
}

/// Bytes delivered to chain nodes; the confidentiality scan runs over these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMessage {
    pub at: Timestamp,
    pub kind: MessageKind,
    pub to: Vec<usize>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted,
    Forgotten(TermFault),
    NoResponse,
}

impl SubmitOutcome {
    /// The submitting party saw a reply.
    pub fn acknowledged(self) -> bool {
        self != SubmitOutcome::NoResponse
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockReport {
    pub height: u64,
    pub producer: usize,
    pub created_at: Timestamp,
    pub terms: usize,
    pub digest: Digest,
    pub reached: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ChainNetwork {
    nodes: Vec<ChainNode>,
    pub block_interval: u64,
    log: Vec<ChainMessage>,
    produced: u64,
}

impl ChainNetwork {
    pub fn new(n: usize, topology: &Topology, block_interval: u64) -> Self {
        assert!(n > 0, "a chain network needs at least one node");
        assert!(block_interval > 0, "block interval must be positive");
        let mut nodes: Vec<ChainNode> = (0..n).map(ChainNode::new).collect();
        for (a, b) in topology.edges(n) {
            if !nodes[a].peers.contains(&b) {
                nodes[a].peers.push(b);
                nodes[b].peers.push(a);
            }
        }
        for node in &mut nodes {
            node.peers.sort_unstable();
        }
        Self {
            nodes,
            block_interval,
            log: Vec::new(),
            produced: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &ChainNode {
        &self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut ChainNode {
        &mut self.nodes[i]
    }

    pub fn nodes(&self) -> &[ChainNode] {
        &self.nodes
    }

    pub fn set_fault(&mut self, i: usize, mode: FaultMode) {
        self.nodes[i].fault = mode;
    }

    pub fn correct_nodes(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_correct()).map(|n| n.id).collect()
    }

    pub fn message_log(&self) -> &[ChainMessage] {
        &self.log
    }

    pub fn record(&mut self, at: Timestamp, kind: MessageKind, to: Vec<usize>, bytes: Vec<u8>) {
        self.log.push(ChainMessage { at, kind, to, bytes });
    }

    pub fn is_block_time(&self, t: Timestamp) -> bool {
        t.0 > 0 && t.0.is_multiple_of(self.block_interval)
    }

    /// Next block creation time strictly after `t`.
    pub fn next_block_time(&self, t: Timestamp) -> Timestamp {
        Timestamp((t.0 / self.block_interval + 1) * self.block_interval)
    }

    /// Delivers a term to one node, as a reader or client would.
    pub fn submit(&mut self, node: usize, term: &Term, at: Timestamp, pki: &PkiStub) -> SubmitOutcome {
        self.record(at, MessageKind::Submit, vec![node], term.to_bytes());
        let target = &mut self.nodes[node];
        if !target.responds() {
            return SubmitOutcome::NoResponse;
        }
        match target.receive(term, at, pki) {
            Receipt::Accepted | Receipt::AlreadyKnown => SubmitOutcome::Accepted,
            Receipt::Forgotten(f) => SubmitOutcome::Forgotten(f),
        }
    }

    /// One synchronous gossip round: every responsive node forwards newly
    /// learned terms to neighbours that do not know them yet.
    pub fn gossip_round(&mut self, at: Timestamp, pki: &PkiStub) -> usize {
        let mut sends: Vec<(usize, Term)> = Vec::new();
        for i in 0..self.nodes.len() {
            if !self.nodes[i].responds() {
                self.nodes[i].take_outgoing();
                continue;
            }
            let mut terms = self.nodes[i].take_outgoing();
            terms.extend(self.nodes[i].invented_terms(at));
            for term in terms {
                let d = term.digest();
                for &p in &self.nodes[i].peers {
                    if !self.nodes[p].knows(&d) {
                        sends.push((p, term.clone()));
                    }
                }
            }
        }
        let delivered = sends.len();
        for (to, term) in sends {
            self.record(at, MessageKind::Gossip, vec![to], term.to_bytes());
            if self.nodes[to].responds() {
                self.nodes[to].receive(&term, at, pki);
            }
        }
        delivered
    }

    /// Some node still has terms to gossip.
    pub fn has_outgoing(&self) -> bool {
        self.nodes.iter().any(|n| n.responds() && n.has_outgoing())
    }

    /// Some correct node holds terms not yet in a block.
    pub fn has_pending(&self) -> bool {
        self.nodes.iter().any(|n| n.is_correct() && n.pending_len() > 0)
    }

    /// Creates the block for time `at` on a rotating correct producer and
    /// floods it through responsive nodes.
    pub fn create_block(&mut self, at: Timestamp, pki: &PkiStub) -> Option<BlockReport> {
        let correct = self.correct_nodes();
        if correct.is_empty() {
            return None;
        }
        let producer = correct[(self.produced as usize) % correct.len()];
        self.produced += 1;
        let block: Block = self.nodes[producer].produce_block(at, pki);
        let bytes = block.to_bytes();

        let mut reached = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([producer]);
        reached[producer] = true;
        while let Some(i) = queue.pop_front() {
            for &p in &self.nodes[i].peers {
                if !reached[p] && self.nodes[p].responds() {
                    reached[p] = true;
                    queue.push_back(p);
                }
            }
        }
        let targets: Vec<usize> = (0..self.nodes.len()).filter(|i| reached[*i]).collect();
        self.record(at, MessageKind::Block, targets.clone(), bytes);
        for &i in &targets {
            self.nodes[i].apply_block(&block, pki);
        }
        Some(BlockReport {
            height: block.height,
            producer,
            created_at: at,
            terms: block.terms.len(),
            digest: block.digest(),
            reached: targets,
        })
    }

    /// Height of the longest ledger held by a correct node.
    pub fn height(&self) -> u64 {
        self.nodes
            .iter()
            .filter(|n| n.is_correct())
            .map(|n| n.ledger().len() as u64)
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{self, KeyPair};
    use crate::reader::{content_digest, search_key, signed_message, Evidence, Nonce};
    use crate::tag::TagId;
    use crate::vendor::Vendor;
    use crate::world::Location;

    use super::super::node::LieMode;

    struct Fixture {
        pki: PkiStub,
        reader: KeyPair,
        cert: Term,
    }

    fn fixture() -> Fixture {
        let v = Vendor::new("v", 1);
        let mut pki = PkiStub::new(2);
        pki.register(v.public_key(), Timestamp(0), Timestamp(100_000));
        let reader = KeyPair::generate(5);
        let cert = v
            .issue_certificate(&reader.public, Timestamp(0), Timestamp(1), Timestamp(50_000))
            .unwrap();
        Fixture {
            pki,
            reader,
            cert: Term::Certificate(cert),
        }
    }

    fn evidence(r: &KeyPair, i: u8) -> Term {
        let h1 = search_key(&Nonce([i; 16]), &TagId([i; 32]));
        let h2 = content_digest(Timestamp(i as u64), &Location::labeled("a"), &[i]);
        Term::Evidence(Evidence {
            h1,
            h2,
            sig: crypto::sign(&signed_message(&h1, &h2), &r.private).unwrap(),
            key_digest: r.key_digest(),
        })
    }

    fn settle(net: &mut ChainNetwork, pki: &PkiStub, from: u64, to: u64) {
        for t in from..=to {
            let at = Timestamp(t);
            net.gossip_round(at, pki);
            if net.is_block_time(at) {
                net.create_block(at, pki);
            }
        }
    }

    #[test]
    fn gossip_reaches_line_end_and_blocks_agree() {
        let f = fixture();
        let mut net = ChainNetwork::new(5, &Topology::Line, 15);
        assert_eq!(net.submit(0, &f.cert, Timestamp(1), &f.pki), SubmitOutcome::Accepted);
        let ev = evidence(&f.reader, 1);
        assert_eq!(net.submit(4, &ev, Timestamp(20), &f.pki), SubmitOutcome::Forgotten(TermFault::KeyUnobtainable));
        settle(&mut net, &f.pki, 1, 30);
        assert_eq!(net.submit(4, &ev, Timestamp(31), &f.pki), SubmitOutcome::Accepted);
        settle(&mut net, &f.pki, 31, 60);
        let tips: Vec<_> = net.nodes().iter().map(|n| n.tip().unwrap().digest()).collect();
        assert!(tips.windows(2).all(|w| w[0] == w[1]));
        for n in net.nodes() {
            assert_eq!(n.query_bct(&ev.digest()), Some(Some(Timestamp(45))));
        }
    }

    #[test]
    fn silent_node_ignores_and_partitions() {
        let f = fixture();
        let mut net = ChainNetwork::new(3, &Topology::Line, 15);
        net.set_fault(1, FaultMode::Silent);
        assert_eq!(net.submit(1, &f.cert, Timestamp(1), &f.pki), SubmitOutcome::NoResponse);
        assert!(!SubmitOutcome::NoResponse.acknowledged());
        net.submit(0, &f.cert, Timestamp(1), &f.pki);
        settle(&mut net, &f.pki, 1, 15);
        assert!(net.node(0).is_confirmed(&f.cert.digest()));
        assert!(!net.node(2).knows(&f.cert.digest()));
        assert!(net.node(1).ledger().is_empty());
    }

    #[test]
    fn fabricated_gossip_is_forgotten_by_correct_nodes() {
        let f = fixture();
        let mut net = ChainNetwork::new(3, &Topology::Full, 15);
        net.set_fault(2, FaultMode::Lying(LieMode::Fabricate));
        net.submit(0, &f.cert, Timestamp(1), &f.pki);
        settle(&mut net, &f.pki, 1, 45);
        assert!(net.node(0).forgotten_count() > 0);
        let confirmed = net.node(0).confirmed_digests();
        assert_eq!(confirmed.len(), 1);
    }

    #[test]
    fn empty_blocks_are_created() {
        let f = fixture();
        let mut net = ChainNetwork::new(2, &Topology::Full, 15);
        settle(&mut net, &f.pki, 1, 150);
        assert_eq!(net.height(), 10);
        assert_eq!(net.next_block_time(Timestamp(150)), Timestamp(165));
        assert_eq!(net.next_block_time(Timestamp(151)), Timestamp(165));
    }

    #[test]
    fn deletion_rewrites_local_ledger_only() {
        let f = fixture();
        let mut net = ChainNetwork::new(3, &Topology::Full, 15);
        net.submit(0, &f.cert, Timestamp(1), &f.pki);
        settle(&mut net, &f.pki, 1, 15);
        let ev = evidence(&f.reader, 2);
        net.submit(0, &ev, Timestamp(16), &f.pki);
        settle(&mut net, &f.pki, 16, 90);
        net.set_fault(2, FaultMode::Lying(LieMode::Rewritten));
        let cost = net.node_mut(2).delete_term(&ev.digest()).unwrap();
        assert_eq!(cost, 5 * super::super::block::WORK_PER_BLOCK);
        assert!(super::super::block::verify_ledger(net.node(2).ledger(), None).is_ok());
        assert_ne!(net.node(2).tip().unwrap().digest(), net.node(0).tip().unwrap().digest());
        assert_eq!(net.node(2).query_bct(&ev.digest()), Some(None));
    }
}
