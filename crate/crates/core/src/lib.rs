//! Signed RFID readouts with hash-only evidences recorded on a simulated
//! blockchain, plus a deterministic multi-party simulator for attacking and
//! verifying them.
//!
//! A reader that observes a tag produces a readout for its owner service and
//! an evidence for the chain in one step. The evidence carries only digests,
//! a signature and the reader key digest. A client that knows the shipment
//! nonce can later check any readout a service hands over against the chain
//! without sharing secrets with the reader.

pub mod chain;
pub mod crypto;
pub mod harness;
pub mod merkle;
pub mod reader;
pub mod service;
pub mod tag;
pub mod vendor;
pub mod verifier;
pub mod world;

pub use chain::{AnchorContract, Block, ChainNetwork, FaultMode, LieMode, Term, TermFault, Topology};
pub use crypto::{Digest, KeyPair, PrivateKey, PublicKey, Signature};
pub use harness::{run_scenario, Scenario, ScenarioError, ScenarioReport, Simulation};
pub use merkle::{MerkleProof, MerkleTree, Side};
pub use reader::{Evidence, Nonce, Readout, Reader};
pub use service::{Client, Dishonesty, Service};
pub use tag::{Tag, TagId};
pub use vendor::{Certificate, PkiStub, Vendor};
pub use verifier::{Outcome, Policy, QuorumView, Reason, Verdict};
pub use world::{Location, Proximity, Timestamp, World};
