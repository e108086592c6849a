//! Declarative scenario files (TOML): network, actors and a timed event list
//! with inline expectations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{FaultMode, LieMode, Topology, DEFAULT_BLOCK_INTERVAL};
use crate::world::{Proximity, APART_THRESHOLD, CLOSE_THRESHOLD, READ_RANGE_M};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("event {index} at t={at}: unknown {kind} `{name}`")]
    UnknownActor {
        index: usize,
        at: u64,
        kind: &'static str,
        name: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Last tick to simulate; defaults to a few blocks after the last event.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub vendors: Vec<VendorSpec>,
    #[serde(default)]
    pub services: Vec<NamedSpec>,
    #[serde(default)]
    pub clients: Vec<NamedSpec>,
    #[serde(default)]
    pub locations: Vec<LocationSpec>,
    #[serde(default)]
    pub readers: Vec<ReaderSpec>,
    #[serde(default)]
    pub tags: Vec<TagSpec>,
    #[serde(default)]
    pub events: Vec<Event>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_topology")]
    pub topology: String,
    #[serde(default = "default_interval")]
    pub block_interval: u64,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    /// Probability a reader's send is lost before delivery.
    #[serde(default)]
    pub request_drop: f64,
    /// Probability the acknowledgement of a delivered send is lost.
    #[serde(default)]
    pub ack_drop: f64,
    /// Nodes a verifying client queries; defaults to the first three.
    #[serde(default)]
    pub quorum: Option<Vec<usize>>,
}

fn default_nodes() -> usize {
    5
}

fn default_topology() -> String {
    "ring".into()
}

fn default_interval() -> u64 {
    DEFAULT_BLOCK_INTERVAL
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            nodes: default_nodes(),
            topology: default_topology(),
            block_interval: default_interval(),
            faults: Vec::new(),
            request_drop: 0.0,
            ack_drop: 0.0,
            quorum: None,
        }
    }
}

impl NetworkSpec {
    pub fn topology(&self) -> Result<Topology, ScenarioError> {
        match self.topology.as_str() {
            "line" => Ok(Topology::Line),
            "ring" => Ok(Topology::Ring),
            "full" => Ok(Topology::Full),
            other => Err(ScenarioError::Config(format!("unknown topology `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub node: usize,
    pub mode: String,
}

/// Parses a node fault name as used in scenario files and on the CLI.
pub fn parse_fault(mode: &str) -> Result<FaultMode, ScenarioError> {
    Ok(match mode {
        "correct" => FaultMode::Correct,
        "silent" => FaultMode::Silent,
        "withhold" => FaultMode::Lying(LieMode::Withhold),
        "fabricate" => FaultMode::Lying(LieMode::Fabricate),
        "wrong_term" => FaultMode::Lying(LieMode::WrongTerm),
        "forge_roots" => FaultMode::Lying(LieMode::ForgeRoots),
        "rewritten" => FaultMode::Lying(LieMode::Rewritten),
        other => return Err(ScenarioError::Config(format!("unknown fault mode `{other}`"))),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_close")]
    pub close: u64,
    #[serde(default = "default_apart")]
    pub apart: u64,
    #[serde(default = "default_range")]
    pub read_range_m: f64,
}

fn default_close() -> u64 {
    CLOSE_THRESHOLD
}

fn default_apart() -> u64 {
    APART_THRESHOLD
}

fn default_range() -> f64 {
    READ_RANGE_M
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            close: CLOSE_THRESHOLD,
            apart: APART_THRESHOLD,
            read_range_m: READ_RANGE_M,
        }
    }
}

impl Thresholds {
    pub fn proximity(&self) -> Proximity {
        Proximity {
            close: self.close,
            apart: self.apart,
            read_range_m: self.read_range_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VendorSpec {
    pub name: String,
    #[serde(default)]
    pub pki_from: u64,
    #[serde(default = "far_future")]
    pub pki_to: u64,
}

fn far_future() -> u64 {
    1 << 40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSpec {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationSpec {
    pub label: String,
    #[serde(default)]
    pub coords: Option<[f64; 2]>,
    #[serde(default = "yes")]
    pub logistical: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReaderSpec {
    pub name: String,
    pub owner: String,
    pub location: String,
    pub vendor: String,
    #[serde(default)]
    pub gateway: usize,
    #[serde(default = "default_cert_ini")]
    pub cert_ini: u64,
    #[serde(default = "far_future")]
    pub cert_exp: u64,
}

fn default_cert_ini() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSpec {
    pub name: String,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub at: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// A service draws a fresh nonce for a tag shipment and shares it.
    Provision {
        service: String,
        tag: String,
        shipment: String,
        #[serde(default)]
        share_with: Vec<String>,
    },
    Observe {
        reader: String,
        shipment: String,
        label: String,
        #[serde(default)]
        write: Option<String>,
    },
    Move {
        tag: String,
        to: String,
    },
    Tamper {
        reader: String,
    },
    Restart {
        reader: String,
    },
    /// The adversary obtains the reader's private key.
    CompromiseKey {
        reader: String,
    },
    ExpireVendorKey {
        vendor: String,
    },
    Dishonesty {
        service: String,
        mode: String,
        #[serde(default)]
        forged: Option<String>,
    },
    NodeFault {
        node: usize,
        mode: String,
    },
    FalsifyPosition {
        reader: String,
        #[serde(default)]
        time_offset: i64,
        #[serde(default)]
        location: Option<String>,
    },
    /// A readout dated `claimed_at`, signed with the stolen key of `reader`
    /// (or a fresh key if none was stolen). With `submit_evidence` the
    /// matching evidence is sent to `node` now.
    ForgeReadout {
        label: String,
        reader: String,
        shipment: String,
        claimed_at: u64,
        data: String,
        #[serde(default)]
        location: Option<String>,
        #[serde(default)]
        submit_evidence: bool,
        #[serde(default)]
        node: usize,
    },
    /// A certificate for a fresh reader key signed with the vendor key,
    /// backdated to `t_ini`, submitted to `node` now.
    ForgeCertificate {
        label: String,
        vendor: String,
        t_ini: u64,
        t_exp: u64,
        #[serde(default)]
        node: usize,
    },
    DeleteTerm {
        node: usize,
        observation: String,
    },
    Verify {
        client: String,
        service: String,
        shipment: String,
        expect: String,
        #[serde(default)]
        reasons: Vec<String>,
    },
    VerifyReadout {
        readout: String,
        expect: String,
        #[serde(default)]
        reasons: Vec<String>,
    },
    /// Verifies a readout through an instrumented view and checks that only
    /// the readout and public chain data were consulted.
    SecretFreeVerify {
        readout: String,
    },
    CheckElapsed {
        target: String,
        term: String,
        #[serde(default)]
        claimed: Option<u64>,
        expect_upheld: bool,
        #[serde(default)]
        reasons: Vec<String>,
    },
    CheckAlibi {
        target: String,
        term: String,
        #[serde(default)]
        claimed: Option<u64>,
        expect_detected: bool,
    },
    Audit {
        client: String,
        shipment: String,
        #[serde(default)]
        nodes: Vec<usize>,
        expect: Vec<NodeExpectation>,
    },
    CheckLedgers {
        #[serde(default)]
        expect_faulty: Vec<usize>,
    },
    /// Closes the evidence service window, anchors it, and reconfirms the
    /// bulk proof.
    Anchor {
        #[serde(default)]
        omit: Vec<String>,
        expect_reconfirmed: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeExpectation {
    pub node: usize,
    pub outcome: String,
    #[serde(default)]
    pub reasons: Vec<String>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon.unwrap_or_else(|| {
            let last = self.events.iter().map(|e| e.at).max().unwrap_or(0);
            last + 4 * self.network.block_interval
        })
    }

    /// Rejects references to undeclared actors before anything runs.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = &self.network;
        if n.nodes == 0 || n.block_interval == 0 {
            return Err(ScenarioError::Config("nodes and block_interval must be positive".into()));
        }
        if !(0.0..1.0).contains(&n.request_drop) || !(0.0..1.0).contains(&n.ack_drop) {
            return Err(ScenarioError::Config("drop probabilities must lie in [0, 1)".into()));
        }
        n.topology()?;
        for f in &n.faults {
            parse_fault(&f.mode)?;
            if f.node >= n.nodes {
                return Err(ScenarioError::Config(format!("fault on missing node {}", f.node)));
            }
        }
        if let Some(q) = &n.quorum {
            if q.is_empty() || q.iter().any(|i| *i >= n.nodes) {
                return Err(ScenarioError::Config("quorum names missing nodes".into()));
            }
        }

        let names = |v: &[NamedSpec]| v.iter().map(|s| s.name.clone()).collect::<BTreeSet<_>>();
        let services = names(&self.services);
        let clients = names(&self.clients);
        let parties: BTreeSet<_> = services.union(&clients).cloned().collect();
        let vendors: BTreeSet<_> = self.vendors.iter().map(|v| v.name.clone()).collect();
        let locations: BTreeSet<_> = self.locations.iter().map(|l| l.label.clone()).collect();
        let readers: BTreeSet<_> = self.readers.iter().map(|r| r.name.clone()).collect();
        let tags: BTreeSet<_> = self.tags.iter().map(|t| t.name.clone()).collect();

        let cfg = |kind: &'static str, name: &str| ScenarioError::UnknownActor {
            index: usize::MAX,
            at: 0,
            kind,
            name: name.to_string(),
        };
        for r in &self.readers {
            if !services.contains(&r.owner) {
                return Err(cfg("service", &r.owner));
            }
            if !locations.contains(&r.location) {
                return Err(cfg("location", &r.location));
            }
            if !vendors.contains(&r.vendor) {
                return Err(cfg("vendor", &r.vendor));
            }
            if r.gateway >= n.nodes {
                return Err(ScenarioError::Config(format!("reader {} uses missing gateway", r.name)));
            }
        }
        for t in &self.tags {
            if !locations.contains(&t.location) {
                return Err(cfg("location", &t.location));
            }
        }

        let mut shipments = BTreeSet::new();
        let mut labels = BTreeSet::new();
        for (index, e) in self.events.iter().enumerate() {
            let unknown = |kind: &'static str, name: &str| ScenarioError::UnknownActor {
                index,
                at: e.at,
                kind,
                name: name.to_string(),
            };
            let check = |set: &BTreeSet<String>, kind: &'static str, name: &str| {
                if set.contains(name) {
                    Ok(())
                } else {
                    Err(unknown(kind, name))
                }
            };
            let node_ok = |i: usize| {
                if i < n.nodes {
                    Ok(())
                } else {
                    Err(unknown("node", &i.to_string()))
                }
            };
            match &e.action {
                Action::Provision {
                    service,
                    tag,
                    shipment,
                    share_with,
                } => {
                    check(&services, "service", service)?;
                    check(&tags, "tag", tag)?;
                    for p in share_with {
                        check(&parties, "party", p)?;
                    }
                    shipments.insert(shipment.clone());
                }
                Action::Observe {
                    reader,
                    shipment,
                    label,
                    ..
                } => {
                    check(&readers, "reader", reader)?;
                    check(&shipments, "shipment", shipment)?;
                    labels.insert(label.clone());
                }
                Action::Move { tag, to } => {
                    check(&tags, "tag", tag)?;
                    check(&locations, "location", to)?;
                }
                Action::Tamper { reader } | Action::Restart { reader } | Action::CompromiseKey { reader } => {
                    check(&readers, "reader", reader)?
                }
                Action::ExpireVendorKey { vendor } => check(&vendors, "vendor", vendor)?,
                Action::Dishonesty { service, mode, forged } => {
                    check(&services, "service", service)?;
                    if mode == "inject" {
                        let f = forged.as_deref().unwrap_or_default();
                        check(&labels, "forged readout", f)?;
                    }
                }
                Action::NodeFault { node, mode } => {
                    node_ok(*node)?;
                    parse_fault(mode)?;
                }
                Action::FalsifyPosition { reader, location, .. } => {
                    check(&readers, "reader", reader)?;
                    if let Some(l) = location {
                        check(&locations, "location", l)?;
                    }
                }
                Action::ForgeReadout {
                    label,
                    reader,
                    shipment,
                    location,
                    node,
                    ..
                } => {
                    check(&readers, "reader", reader)?;
                    check(&shipments, "shipment", shipment)?;
                    if let Some(l) = location {
                        check(&locations, "location", l)?;
                    }
                    node_ok(*node)?;
                    labels.insert(label.clone());
                }
                Action::ForgeCertificate { label, vendor, node, .. } => {
                    check(&vendors, "vendor", vendor)?;
                    node_ok(*node)?;
                    labels.insert(label.clone());
                }
                Action::DeleteTerm { node, observation } => {
                    node_ok(*node)?;
                    check(&labels, "observation", observation)?;
                }
                Action::Verify {
                    client,
                    service,
                    shipment,
                    ..
                } => {
                    check(&parties, "party", client)?;
                    check(&services, "service", service)?;
                    check(&shipments, "shipment", shipment)?;
                }
                Action::Audit {
                    client,
                    shipment,
                    nodes,
                    expect,
                } => {
                    check(&parties, "party", client)?;
                    check(&shipments, "shipment", shipment)?;
                    for i in nodes.iter().chain(expect.iter().map(|x| &x.node)) {
                        node_ok(*i)?;
                    }
                }
                Action::VerifyReadout { readout, .. } | Action::SecretFreeVerify { readout } => {
                    check(&labels, "readout", readout)?
                }
                Action::CheckElapsed { target, term, .. } | Action::CheckAlibi { target, term, .. } => {
                    let set = if term == "certificate" { &readers } else { &labels };
                    if term == "certificate" && labels.contains(target) {
                        continue;
                    }
                    check(set, "target", target)?;
                }
                Action::CheckLedgers { expect_faulty } => {
                    for i in expect_faulty {
                        node_ok(*i)?;
                    }
                }
                Action::Anchor { omit, .. } => {
                    for l in omit {
                        check(&labels, "observation", l)?;
                    }
                }
            }
        }
        Ok(())
    }
}
