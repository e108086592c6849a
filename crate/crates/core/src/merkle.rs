//! Merkle trees over term digests.
//!
//! Conventions: an empty tree has root `hash([])`, a single-leaf tree has the
//! leaf itself as root, and an odd node at any level is paired with a copy of
//! itself. Interior nodes hash the canonical encoding of `(left, right)` under
//! dedicated tags, so they can never be confused with a leaf digest.

use serde::{Deserialize, Serialize};

use crate::crypto::{hash, tags, Decoder, Digest, Encoder, EncodingError};

/// Which side of the running node a sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn to_byte(self) -> u8 {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Side::Left),
            1 => Some(Side::Right),
            _ => None,
        }
    }
}

pub fn hash_pair(left: &Digest, right: &Digest) -> Digest {
    let bytes = Encoder::new()
        .field(tags::MERKLE_LEFT, left.as_bytes())
        .field(tags::MERKLE_RIGHT, right.as_bytes())
        .finish();
    hash(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleTree {
    /// `levels[0]` holds the leaves; the last level holds the root.
    levels: Vec<Vec<Digest>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf_index: u64,
    pub path: Vec<(Side, Digest)>,
}

impl MerkleTree {
    pub fn build(leaves: &[Digest]) -> Self {
        let mut levels = vec![leaves.to_vec()];
        while levels.last().is_some_and(|l| l.len() > 1) {
            let current = levels.last().unwrap();
            let next = current
                .chunks(2)
                .map(|pair| match pair {
                    [l, r] => hash_pair(l, r),
                    [only] => hash_pair(only, only),
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        Self { levels }
    }

    pub fn leaves(&self) -> &[Digest] {
        &self.levels[0]
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels[0].is_empty()
    }

    pub fn height(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> Digest {
        match self.levels.last() {
            Some(top) if !top.is_empty() => top[0],
            _ => hash(&[]),
        }
    }

    /// Proof for the first occurrence of `leaf`, or `None` if absent.
    pub fn prove(&self, leaf: &Digest) -> Option<MerkleProof> {
        let index = self.leaves().iter().position(|l| l == leaf)?;
        Some(self.prove_index(index))
    }

    pub fn prove_index(&self, index: usize) -> MerkleProof {
        assert!(index < self.len(), "leaf index out of range");
        let mut path = Vec::with_capacity(self.height());
        let mut i = index;
        for level in &self.levels[..self.height()] {
            let (side, sibling) = if i.is_multiple_of(2) {
                (Side::Right, level.get(i + 1).unwrap_or(&level[i]))
            } else {
                (Side::Left, &level[i - 1])
            };
            path.push((side, *sibling));
            i /= 2;
        }
        MerkleProof {
            leaf_index: index as u64,
            path,
        }
    }
}

impl MerkleProof {
    /// Folds `leaf` along the path. Returns `None` when the side flags do not
    /// agree with the bits of `leaf_index`.
    pub fn compute_root(&self, leaf: &Digest) -> Option<Digest> {
        let height = self.path.len();
        if height < 64 && self.leaf_index >> height != 0 {
            return None;
        }
        let mut acc = *leaf;
        for (level, (side, sibling)) in self.path.iter().enumerate() {
            let is_right_child = (self.leaf_index >> level) & 1 == 1;
            acc = match (side, is_right_child) {
                (Side::Left, true) => hash_pair(sibling, &acc),
                (Side::Right, false) => hash_pair(&acc, sibling),
                _ => return None,
            };
        }
        Some(acc)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64_field(tags::PROOF_LEAF_INDEX, self.leaf_index);
        for (side, digest) in &self.path {
            let mut entry = [0u8; 33];
            entry[0] = side.to_byte();
            entry[1..].copy_from_slice(digest.as_bytes());
            enc.field(tags::PROOF_ENTRY, &entry);
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let leaf_index = dec.expect_u64(tags::PROOF_LEAF_INDEX)?;
        let mut path = Vec::new();
        while !dec.is_empty() {
            let entry: [u8; 33] = dec.expect_fixed(tags::PROOF_ENTRY)?;
            let side = Side::from_byte(entry[0]).ok_or(EncodingError::BadPayload(tags::PROOF_ENTRY))?;
            let mut d = [0u8; 32];
            d.copy_from_slice(&entry[1..]);
            path.push((side, Digest(d)));
        }
        dec.finish()?;
        Ok(Self { leaf_index, path })
    }
}

pub fn build(leaves: &[Digest]) -> MerkleTree {
    MerkleTree::build(leaves)
}

pub fn prove(tree: &MerkleTree, leaf: &Digest) -> Option<MerkleProof> {
    tree.prove(leaf)
}

pub fn verify_proof(leaf: &Digest, proof: &MerkleProof, root: &Digest) -> bool {
    proof.compute_root(leaf).as_ref() == Some(root)
}
