mod common;

use proptest::prelude::*;
use rfid_evidence::crypto::Digest;
use rfid_evidence::merkle::{self, MerkleProof, Side};

fn digests(raw: &[[u8; 32]]) -> Vec<Digest> {
    raw.iter().map(|d| Digest(*d)).collect()
}

#[test]
fn roots_and_paths_match_oracle() {
    for n in 0..=64 {
        let raw = common::leaves(n, 7);
        let tree = merkle::build(&digests(&raw));
        assert_eq!(tree.root().0, common::naive_root(&raw), "size {n}");
        for i in 0..n {
            let proof = tree.prove_index(i);
            let expected: Vec<(Side, Digest)> = common::naive_path(&raw, i)
                .into_iter()
                .map(|(left, d)| (if left { Side::Left } else { Side::Right }, Digest(d)))
                .collect();
            assert_eq!(proof.leaf_index, i as u64);
            assert_eq!(proof.path, expected, "size {n} leaf {i}");
        }
    }
}

#[test]
fn oracle_node_differs_from_plain_concatenation() {
    let a = [1u8; 32];
    let b = [2u8; 32];
    let plain = common::sha256(&[a, b].concat());
    assert_ne!(common::node(&a, &b), plain);
    assert_eq!(merkle::hash_pair(&Digest(a), &Digest(b)).0, common::node(&a, &b));
}

#[test]
fn duplicate_leaves_prove_their_own_index() {
    let d = Digest([9; 32]);
    let tree = merkle::build(&[d, d, d]);
    for i in 0..3 {
        assert!(merkle::verify_proof(&d, &tree.prove_index(i), &tree.root()));
    }
}

proptest! {
    #[test]
    fn every_leaf_verifies(n in 1usize..200, salt in any::<u8>()) {
        let raw = common::leaves(n, salt);
        let tree = merkle::build(&digests(&raw));
        let root = tree.root();
        for (i, leaf) in raw.iter().enumerate() {
            let p = tree.prove_index(i);
            prop_assert!(merkle::verify_proof(&Digest(*leaf), &p, &root));
            prop_assert_eq!(MerkleProof::from_bytes(&p.to_bytes()).unwrap(), p);
        }
    }

    #[test]
    fn foreign_leaf_is_rejected(n in 1usize..64, i in any::<prop::sample::Index>(), other in any::<[u8; 32]>()) {
        let raw = common::leaves(n, 3);
        prop_assume!(!raw.contains(&other));
        let tree = merkle::build(&digests(&raw));
        let p = tree.prove_index(i.index(n));
        prop_assert!(!merkle::verify_proof(&Digest(other), &p, &tree.root()));
    }

    #[test]
    fn proof_for_one_tree_fails_on_another(n in 2usize..64, i in any::<prop::sample::Index>()) {
        let a = merkle::build(&digests(&common::leaves(n, 1)));
        let b = merkle::build(&digests(&common::leaves(n, 2)));
        let i = i.index(n);
        let leaf = a.leaves()[i];
        prop_assert!(!merkle::verify_proof(&leaf, &a.prove_index(i), &b.root()));
    }
}
