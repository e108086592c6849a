//! Reference implementations written from the wire format alone.

#![allow(dead_code)]

use sha2::{Digest as _, Sha256};

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn field(out: &mut Vec<u8>, tag: u8, payload: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
}

/// Interior node: hash of the left child under tag 0x20 and the right child
/// under tag 0x21.
pub fn node(l: &[u8; 32], r: &[u8; 32]) -> [u8; 32] {
    let mut buf = Vec::with_capacity(74);
    field(&mut buf, 0x20, l);
    field(&mut buf, 0x21, r);
    sha256(&buf)
}

/// Recursive root over `leaves[lo..hi]` padded to a power of two by
/// repeating the last node of each odd level.
pub fn naive_root(leaves: &[[u8; 32]]) -> [u8; 32] {
    match leaves.len() {
        0 => sha256(b""),
        1 => leaves[0],
        _ => {
            let next: Vec<[u8; 32]> = leaves
                .chunks(2)
                .map(|c| node(&c[0], c.get(1).unwrap_or(&c[0])))
                .collect();
            naive_root(&next)
        }
    }
}

/// Sibling path for leaf `i`: `(sibling_is_left, sibling)` per level.
pub fn naive_path(leaves: &[[u8; 32]], mut i: usize) -> Vec<(bool, [u8; 32])> {
    let mut level = leaves.to_vec();
    let mut path = Vec::new();
    while level.len() > 1 {
        let sibling = if i % 2 == 1 { level[i - 1] } else { *level.get(i + 1).unwrap_or(&level[i]) };
        path.push((i % 2 == 1, sibling));
        level = level
            .chunks(2)
            .map(|c| node(&c[0], c.get(1).unwrap_or(&c[0])))
            .collect();
        i /= 2;
    }
    path
}

pub fn leaves(n: usize, salt: u8) -> Vec<[u8; 32]> {
    (0..n).map(|i| sha256(&[salt, (i >> 8) as u8, i as u8])).collect()
}
