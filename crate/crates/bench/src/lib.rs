//! Fixtures shared by the benchmarks.

use rfid_evidence::chain::{extend, Block, Term};
use rfid_evidence::crypto::{hash, sign, Digest, KeyPair};
use rfid_evidence::reader::{signed_message, Evidence};
use rfid_evidence::world::Timestamp;

pub fn leaves(n: usize) -> Vec<Digest> {
    (0..n as u64).map(|i| hash(&i.to_be_bytes())).collect()
}

pub fn evidence(key: &KeyPair, i: u64) -> Evidence {
    let h1 = hash(&i.to_be_bytes());
    let h2 = hash(&(i ^ u64::MAX).to_be_bytes());
    Evidence {
        h1,
        h2,
        sig: sign(&signed_message(&h1, &h2), &key.private).expect("valid key"),
        key_digest: key.public.digest(),
    }
}

/// A ledger of `blocks` blocks holding `per_block` signed evidences each.
pub fn ledger(blocks: usize, per_block: usize) -> Vec<Block> {
    let key = KeyPair::generate(1);
    let mut out: Vec<Block> = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let terms = (0..per_block)
            .map(|j| Term::Evidence(evidence(&key, (b * per_block + j) as u64)))
            .collect();
        let next = extend(&out, Timestamp(15 * (b as u64 + 1)), terms);
        out.push(next);
    }
    out
}
