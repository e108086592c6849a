//! Blockchain substrate: terms, blocks, nodes with fault modes, the gossip
//! network, and on-chain anchoring.

pub mod anchor;
mod block;
mod network;
mod node;
pub mod rules;

pub use anchor::{
    aggregate_and_anchor, AnchorContract, AnchorError, AnchorRecord, BulkProof, BulkProofFault,
    EvidenceService, DEPLOY_GAS, STORE_GAS,
};
pub use block::{
    extend, rewrite_cost, verify_encoded_ledger, verify_ledger, Block, IntegrityError, Term,
    GENESIS_PREV, WORK_PER_BLOCK,
};
pub use network::{
    BlockReport, ChainMessage, ChainNetwork, MessageKind, SubmitOutcome, Topology,
    DEFAULT_BLOCK_INTERVAL,
};
pub use node::{ChainNode, FaultMode, LieMode, Receipt};
pub use rules::TermFault;
