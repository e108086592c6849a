//! Deterministic scenario driver.
//!
//! Each simulated tick runs scripted events, flushes reader outboxes through
//! a lossy transport, runs one gossip round, and creates a block on interval
//! boundaries. Idle stretches are skipped. The transcript is one JSON object
//! per line and depends only on the scenario and its seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::confidentiality::{self, Leak, Needle};
use super::scenario::{parse_fault, Action, Event, Scenario, ScenarioError};
use crate::chain::{
    AnchorContract, ChainNetwork, EvidenceService, MessageKind, SubmitOutcome, Term,
};
use crate::crypto::{self, hash, Digest, KeyPair, PrivateKey};
use crate::reader::{
    content_digest, search_key, signed_message, Evidence, Nonce, PositionLie, Readout, Reader,
    Transport,
};
use crate::service::{Client, Dishonesty, Service, TamperField};
use crate::tag::TagId;
use crate::vendor::{Certificate, PkiStub, Vendor};
use crate::verifier::{
    self, audit_evidence_service, audit_ledgers, check_alibi, check_elapsed_time,
    proven_evidences, verify_readout, verify_service_response, Claim, Lookup, Outcome, Policy,
    QueryKind, QuorumView, Reason, Verdict,
};
use crate::world::{Location, Timestamp, World};

/// Ticks the driver keeps running past the horizon to drain outboxes.
const DRAIN_LIMIT: u64 = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub at: u64,
    pub kind: String,
    pub subject: String,
    pub passed: bool,
    pub detail: Value,
}

/// Reader-produced readouts stored by services versus evidences confirmed
/// on chain, both as `(h1, h2, key digest)` multisets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Atomicity {
    pub readouts: usize,
    pub evidences: usize,
    pub matched: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub leaks: Vec<Leak>,
    pub atomicity: Atomicity,
    pub drained: bool,
    pub final_time: u64,
    #[serde(skip)]
    pub transcript: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.leaks.is_empty()
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn transcript_text(&self) -> String {
        let mut s = self.transcript.join("\n");
        s.push('\n');
        s
    }

    pub fn transcript_digest(&self) -> Digest {
        hash(self.transcript_text().as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct Observation {
    pub label: String,
    pub reader: String,
    pub readout: Readout,
    pub evidence: Evidence,
    pub actual_at: Timestamp,
}

#[derive(Debug, Clone)]
struct Shipment {
    tag: TagId,
    nonce: Nonce,
}

struct LossyTransport<'a> {
    services: &'a mut BTreeMap<String, Service>,
    chain: &'a mut ChainNetwork,
    pki: &'a PkiStub,
    rng: &'a mut ChaCha20Rng,
    request_drop: f64,
    ack_drop: f64,
    dropped: u64,
}

impl LossyTransport<'_> {
    fn lost(&mut self, p: f64) -> bool {
        let roll: f64 = self.rng.gen();
        let lost = roll < p;
        if lost {
            self.dropped += 1;
        }
        lost
    }
}

impl Transport for LossyTransport<'_> {
    fn send_readout(&mut self, service: &str, ro: &Readout, _t: Timestamp) -> bool {
        if self.lost(self.request_drop) {
            return false;
        }
        if let Some(s) = self.services.get_mut(service) {
            // A rejection is still an answer; the reader stops resending.
            let _ = s.ingest_readout(ro);
        }
        !self.lost(self.ack_drop)
    }

    fn send_evidence(&mut self, node: usize, ev: &Evidence, t: Timestamp) -> bool {
        if self.lost(self.request_drop) {
            return false;
        }
        let outcome = self.chain.submit(node, &Term::Evidence(ev.clone()), t, self.pki);
        outcome.acknowledged() && !self.lost(self.ack_drop)
    }
}

/// A running scenario.
pub struct Simulation {
    scenario: Scenario,
    world: World,
    rng: ChaCha20Rng,
    policy: Policy,
    quorum: Vec<usize>,
    parties: BTreeMap<String, Client>,
    tag_ids: BTreeMap<String, TagId>,
    shipments: BTreeMap<String, Shipment>,
    certs: BTreeMap<String, Certificate>,
    pending_certs: Vec<(usize, Term)>,
    stolen: BTreeMap<String, PrivateKey>,
    observations: BTreeMap<String, Observation>,
    forged_readouts: BTreeMap<String, Readout>,
    forged_certs: BTreeMap<String, Certificate>,
    needles: Vec<Needle>,
    evidence_service: EvidenceService,
    contract: AnchorContract,
    anchor_window: Vec<String>,
    transcript: Vec<String>,
    checks: Vec<CheckResult>,
    events: Vec<Event>,
    next_event: usize,
    dropped: u64,
}

fn derive_seed(seed: u64, kind: &str, name: &str) -> u64 {
    let d = hash(&[&seed.to_be_bytes()[..], kind.as_bytes(), &[0], name.as_bytes()].concat());
    u64::from_be_bytes(d.0[..8].try_into().expect("digest has 8 bytes"))
}

fn parse_outcome(s: &str) -> Option<Outcome> {
    serde_json::from_value(Value::String(s.to_string())).ok()
}

fn parse_reason(s: &str) -> Option<Reason> {
    serde_json::from_value(Value::String(s.to_string())).ok()
}

fn reasons_match(expected: &[String], got: &[Reason]) -> bool {
    expected
        .iter()
        .all(|r| parse_reason(r).is_some_and(|r| got.contains(&r)))
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let seed = scenario.seed;
        let net_spec = &scenario.network;
        let mut chain = ChainNetwork::new(net_spec.nodes, &net_spec.topology()?, net_spec.block_interval);
        for f in &net_spec.faults {
            chain.set_fault(f.node, parse_fault(&f.mode)?);
        }
        let proximity = scenario.thresholds.proximity();
        let mut world = World::new(seed, proximity, chain, PkiStub::new(seed));
        let config = |e: crate::world::WorldError| ScenarioError::Config(e.to_string());

        for l in &scenario.locations {
            let loc = Location::new(l.label.clone(), l.coords.map(|c| (c[0], c[1])));
            world.add_location(loc, l.logistical).map_err(config)?;
        }
        let mut parties = BTreeMap::new();
        for s in &scenario.services {
            world
                .add_service(Service::new(s.name.clone(), derive_seed(seed, "service", &s.name)))
                .map_err(config)?;
            parties.insert(s.name.clone(), Client::new(s.name.clone()));
        }
        for c in &scenario.clients {
            world.add_client(Client::new(c.name.clone())).map_err(config)?;
            parties.insert(c.name.clone(), Client::new(c.name.clone()));
        }
        for v in &scenario.vendors {
            let vendor = Vendor::new(v.name.clone(), derive_seed(seed, "vendor", &v.name));
            world
                .pki
                .register(vendor.public_key(), Timestamp(v.pki_from), Timestamp(v.pki_to));
            world.add_vendor(vendor).map_err(config)?;
        }

        let mut certs = BTreeMap::new();
        let mut pending_certs = Vec::new();
        for r in &scenario.readers {
            let loc = world.location(&r.location).map_err(config)?.clone();
            let reader = Reader::new(derive_seed(seed, "reader", &r.name), r.owner.clone(), loc, r.gateway);
            let vendor = &world.vendors[&r.vendor];
            let cert = vendor
                .issue_certificate(reader.public_key(), Timestamp(0), Timestamp(r.cert_ini), Timestamp(r.cert_exp))
                .map_err(|e| ScenarioError::Config(format!("certificate for {}: {e}", r.name)))?;
            pending_certs.push((r.gateway, Term::Certificate(cert.clone())));
            certs.insert(r.name.clone(), cert);
            world.add_reader(&r.name, reader).map_err(config)?;
        }

        let mut tag_ids = BTreeMap::new();
        for t in &scenario.tags {
            let loc = world.location(&t.location).map_err(config)?.clone();
            let id = world
                .tags
                .create(Timestamp(0), loc)
                .map_err(|e| ScenarioError::Config(e.to_string()))?;
            tag_ids.insert(t.name.clone(), id);
        }

        let quorum = net_spec
            .quorum
            .clone()
            .unwrap_or_else(|| (0..net_spec.nodes.min(verifier::QUORUM)).collect());
        let mut events = scenario.events.clone();
        events.sort_by_key(|e| e.at);
        let policy = Policy::new(net_spec.block_interval, proximity);

        let mut sim = Self {
            world,
            rng: ChaCha20Rng::seed_from_u64(derive_seed(seed, "transport", "")),
            policy,
            quorum,
            parties,
            tag_ids,
            shipments: BTreeMap::new(),
            certs,
            pending_certs,
            stolen: BTreeMap::new(),
            observations: BTreeMap::new(),
            forged_readouts: BTreeMap::new(),
            forged_certs: BTreeMap::new(),
            needles: Vec::new(),
            evidence_service: EvidenceService::new(seed),
            contract: AnchorContract::deploy(),
            anchor_window: Vec::new(),
            transcript: Vec::new(),
            checks: Vec::new(),
            events,
            next_event: 0,
            dropped: 0,
            scenario,
        };
        sim.log(
            0,
            "setup",
            json!({
                "scenario": sim.scenario.name,
                "seed": seed,
                "nodes": sim.scenario.network.nodes,
                "topology": sim.scenario.network.topology,
                "block_interval": sim.scenario.network.block_interval,
                "readers": sim.scenario.readers.len(),
                "tags": sim.scenario.tags.len(),
            }),
        );
        Ok(sim)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn observations(&self) -> &BTreeMap<String, Observation> {
        &self.observations
    }

    pub fn contract(&self) -> &AnchorContract {
        &self.contract
    }

    fn now(&self) -> u64 {
        self.world.now().0
    }

    fn log(&mut self, t: u64, event: &str, fields: Value) {
        let mut line = Map::new();
        line.insert("t".into(), json!(t));
        line.insert("event".into(), json!(event));
        if let Value::Object(extra) = fields {
            line.extend(extra);
        }
        self.transcript
            .push(serde_json::to_string(&Value::Object(line)).expect("transcript values serialize"));
    }

    fn check(&mut self, kind: &str, subject: &str, passed: bool, detail: Value) {
        let at = self.now();
        self.log(
            at,
            "check",
            json!({"kind": kind, "subject": subject, "passed": passed, "detail": detail.clone()}),
        );
        self.checks.push(CheckResult {
            at,
            kind: kind.to_string(),
            subject: subject.to_string(),
            passed,
            detail,
        });
    }

    fn outboxes_empty(&self) -> bool {
        self.pending_certs.is_empty() && self.world.readers.values().all(|r| r.outbox_len() == 0)
    }

    /// Runs to the horizon, drains, and reports.
    pub fn run(mut self) -> (ScenarioReport, World) {
        let report = self.run_in_place();
        (report, self.world)
    }

    pub fn run_in_place(&mut self) -> ScenarioReport {
        let horizon = self.scenario.horizon();
        let mut t = 0u64;
        loop {
            self.tick(t);
            let Some(next) = self.next_time(t) else { break };
            let draining = next > horizon;
            if draining && (self.settled() || next > horizon + DRAIN_LIMIT) {
                break;
            }
            t = next;
            self.world.clock.advance_to(Timestamp(t));
        }
        self.finish()
    }

    fn settled(&self) -> bool {
        self.outboxes_empty() && !self.world.chain.has_outgoing() && !self.world.chain.has_pending()
    }

    fn next_time(&self, t: u64) -> Option<u64> {
        let mut candidates = Vec::new();
        if let Some(e) = self.events.get(self.next_event) {
            candidates.push(e.at);
        }
        if !self.outboxes_empty() || self.world.chain.has_outgoing() {
            candidates.push(t + 1);
        }
        candidates.push(self.world.chain.next_block_time(Timestamp(t)).0);
        for r in self.world.readers.values() {
            if let Some(f) = r.next_forget_at() {
                candidates.push(f.0.max(t + 1));
            }
        }
        candidates.into_iter().filter(|c| *c > t).min()
    }

    fn tick(&mut self, t: u64) {
        let at = Timestamp(t);
        while self.next_event < self.events.len() && self.events[self.next_event].at <= t {
            let event = self.events[self.next_event].clone();
            self.next_event += 1;
            self.apply(&event.action);
        }

        let World {
            readers,
            services,
            chain,
            pki,
            ..
        } = &mut self.world;
        let mut still_pending = Vec::new();
        for (gateway, term) in self.pending_certs.drain(..) {
            if chain.submit(gateway, &term, at, pki) == SubmitOutcome::NoResponse {
                still_pending.push((gateway, term));
            }
        }
        self.pending_certs = still_pending;

        let mut transport = LossyTransport {
            services,
            chain,
            pki,
            rng: &mut self.rng,
            request_drop: self.scenario.network.request_drop,
            ack_drop: self.scenario.network.ack_drop,
            dropped: 0,
        };
        let mut flushes = Vec::new();
        for (name, reader) in readers.iter_mut() {
            if reader.outbox_len() == 0 {
                continue;
            }
            let report = reader.flush_outbox(&mut transport, at);
            flushes.push((name.clone(), report));
        }
        self.dropped += transport.dropped;
        for (name, report) in flushes {
            self.log(
                t,
                "flush",
                json!({"reader": name, "delivered": report.delivered, "retained": report.retained}),
            );
        }

        let World { chain, pki, .. } = &mut self.world;
        chain.gossip_round(at, pki);
        if chain.is_block_time(at) {
            if let Some(b) = chain.create_block(at, pki) {
                if b.terms > 0 {
                    self.log(
                        t,
                        "block",
                        json!({
                            "height": b.height,
                            "producer": b.producer,
                            "terms": b.terms,
                            "digest": b.digest.to_hex(),
                            "reached": b.reached,
                        }),
                    );
                }
            }
        }
        for r in self.world.readers.values_mut() {
            r.forget(at);
        }
    }

    fn fail(&mut self, kind: &str, subject: &str, why: String) {
        self.check(kind, subject, false, json!({"error": why}));
    }

    fn apply(&mut self, action: &Action) {
        let t = self.now();
        let at = Timestamp(t);
        match action {
            Action::Provision {
                service,
                tag,
                shipment,
                share_with,
            } => {
                let n = self
                    .world
                    .services
                    .get_mut(service)
                    .expect("validated service")
                    .provision_nonce();
                let tag_id = self.tag_ids[tag];
                self.shipments.insert(shipment.clone(), Shipment { tag: tag_id, nonce: n });
                for p in std::iter::once(service).chain(share_with) {
                    if let Some(c) = self.parties.get_mut(p) {
                        c.learn_nonce(tag_id, n);
                    }
                    if let Some(c) = self.world.clients.get_mut(p) {
                        c.learn_nonce(tag_id, n);
                    }
                }
                self.needles.push(Needle::raw("nonce", shipment, n.as_bytes()));
                self.needles.push(Needle::raw("tag_id", tag, tag_id.as_bytes()));
                self.log(t, "provision", json!({"service": service, "shipment": shipment, "shared": share_with}));
            }
            Action::Observe {
                reader,
                shipment,
                label,
                write,
            } => {
                let Some(ship) = self.shipments.get(shipment).cloned() else {
                    return self.fail("observe", label, format!("shipment {shipment} not provisioned"));
                };
                let World {
                    readers,
                    tags,
                    proximity,
                    ..
                } = &mut self.world;
                let r = readers.get_mut(reader).expect("validated reader");
                let result = tags
                    .get_mut(&ship.tag)
                    .map_err(|e| e.to_string())
                    .and_then(|tag| {
                        r.observe(tag, at, ship.nonce, write.as_deref().map(str::as_bytes), proximity)
                            .map_err(|e| e.to_string())
                    });
                match result {
                    Ok((readout, evidence)) => {
                        self.needles.extend(confidentiality::readout_needles(label, &readout));
                        self.log(
                            t,
                            "observe",
                            json!({"reader": reader, "label": label, "h1": evidence.h1.to_hex()}),
                        );
                        self.anchor_window.push(label.clone());
                        self.observations.insert(
                            label.clone(),
                            Observation {
                                label: label.clone(),
                                reader: reader.clone(),
                                readout,
                                evidence,
                                actual_at: at,
                            },
                        );
                    }
                    Err(e) => self.fail("observe", label, e),
                }
            }
            Action::Move { tag, to } => {
                let loc = self.world.locations[to].clone();
                let id = self.tag_ids[tag];
                let res = self.world.tags.get_mut(&id).and_then(|tg| tg.move_to(at, loc));
                match res {
                    Ok(()) => self.log(t, "move", json!({"tag": tag, "to": to})),
                    Err(e) => self.fail("move", tag, e.to_string()),
                }
            }
            Action::Tamper { reader } => {
                self.world.readers.get_mut(reader).expect("validated reader").tamper(at);
                self.log(t, "tamper", json!({"reader": reader}));
            }
            Action::Restart { reader } => {
                self.world.readers.get_mut(reader).expect("validated reader").restart();
                self.log(t, "restart", json!({"reader": reader}));
            }
            Action::CompromiseKey { reader } => {
                let key = self.world.readers[reader].expose_private_key();
                self.stolen.insert(reader.clone(), key);
                self.log(t, "compromise_key", json!({"reader": reader}));
            }
            Action::ExpireVendorKey { vendor } => {
                let d = self.world.vendors[vendor].key_digest();
                self.world.pki.expire(&d, at);
                self.log(t, "expire_vendor_key", json!({"vendor": vendor}));
            }
            Action::Dishonesty { service, mode, forged } => {
                let d = match mode.as_str() {
                    "honest" => Dishonesty::Honest,
                    "hide" => Dishonesty::Hide,
                    "tamper_data" => Dishonesty::Tamper(TamperField::Data),
                    "tamper_time" => Dishonesty::Tamper(TamperField::Time),
                    "tamper_location" => Dishonesty::Tamper(TamperField::Location),
                    "wrong_readout" => Dishonesty::WrongReadout,
                    "inject" => {
                        let label = forged.clone().unwrap_or_default();
                        match self.forged_readouts.get(&label) {
                            Some(ro) => Dishonesty::Inject(ro.clone()),
                            None => return self.fail("dishonesty", service, format!("no forged readout {label}")),
                        }
                    }
                    other => return self.fail("dishonesty", service, format!("unknown mode {other}")),
                };
                self.world.services.get_mut(service).expect("validated service").dishonesty = d;
                self.log(t, "dishonesty", json!({"service": service, "mode": mode}));
            }
            Action::NodeFault { node, mode } => {
                let m = parse_fault(mode).expect("validated fault");
                self.world.chain.set_fault(*node, m);
                self.log(t, "node_fault", json!({"node": node, "mode": mode}));
            }
            Action::FalsifyPosition {
                reader,
                time_offset,
                location,
            } => {
                let loc = location.as_ref().map(|l| self.world.locations[l].clone());
                self.world
                    .readers
                    .get_mut(reader)
                    .expect("validated reader")
                    .set_position_lie(Some(PositionLie {
                        time_offset: *time_offset,
                        location: loc,
                    }));
                self.log(t, "falsify_position", json!({"reader": reader, "time_offset": time_offset}));
            }
            Action::ForgeReadout {
                label,
                reader,
                shipment,
                claimed_at,
                data,
                location,
                submit_evidence,
                node,
            } => self.forge_readout(label, reader, shipment, *claimed_at, data, location.as_deref(), *submit_evidence, *node),
            Action::ForgeCertificate {
                label,
                vendor,
                t_ini,
                t_exp,
                node,
            } => {
                let key = KeyPair::generate(derive_seed(self.scenario.seed, "forged-cert", label));
                let v = &self.world.vendors[vendor];
                let msg = Certificate::signed_message(&key.public, Timestamp(*t_ini), Timestamp(*t_exp));
                let sig = crypto::sign(&msg, &v.keypair().private).expect("vendor key is well formed");
                let cert = Certificate {
                    reader_public: key.public.clone(),
                    t_ini: Timestamp(*t_ini),
                    t_exp: Timestamp(*t_exp),
                    sig,
                    vendor_key_digest: v.key_digest(),
                };
                let World { chain, pki, .. } = &mut self.world;
                let outcome = chain.submit(*node, &Term::Certificate(cert.clone()), at, pki);
                self.forged_certs.insert(label.clone(), cert);
                self.log(t, "forge_certificate", json!({"label": label, "outcome": format!("{outcome:?}")}));
            }
            Action::DeleteTerm { node, observation } => {
                let Some(obs) = self.observations.get(observation) else {
                    return self.fail("delete_term", observation, "unknown observation".into());
                };
                let d = Term::Evidence(obs.evidence.clone()).digest();
                self.world
                    .chain
                    .set_fault(*node, parse_fault("rewritten").expect("known mode"));
                let cost = self.world.chain.node_mut(*node).delete_term(&d);
                self.log(
                    t,
                    "delete_term",
                    json!({"node": node, "observation": observation, "rewrite_cost": cost}),
                );
            }
            Action::Verify {
                client,
                service,
                shipment,
                expect,
                reasons,
            } => self.verify(client, service, shipment, expect, reasons),
            Action::VerifyReadout { readout, expect, reasons } => {
                let Some(ro) = self.find_readout(readout) else {
                    return self.fail("verify_readout", readout, "unknown readout".into());
                };
                let (verdict, queries) = self.with_view(|v, p| verify_readout(&ro, v, p));
                self.record_queries(queries);
                let ok = parse_outcome(expect) == Some(verdict.outcome) && reasons_match(reasons, &verdict.reasons);
                self.check("verify_readout", readout, ok, json!({"verdict": verdict, "expected": expect}));
            }
            Action::SecretFreeVerify { readout } => self.secret_free_verify(readout),
            Action::CheckElapsed {
                target,
                term,
                claimed,
                expect_upheld,
                reasons,
            } => {
                let Some((claim, default_time)) = self.claim(target, term) else {
                    return self.fail("check_elapsed", target, format!("unknown {term}"));
                };
                let claimed = claimed.map(Timestamp).unwrap_or(default_time);
                let (res, queries) = self.with_view(|v, p| check_elapsed_time(&claim, claimed, v, p));
                self.record_queries(queries);
                let ok = res.upheld() == *expect_upheld && reasons_match(reasons, &res.reasons);
                self.check(
                    "check_elapsed",
                    target,
                    ok,
                    json!({"upheld": res.upheld(), "bct": res.bct, "reasons": res.reasons, "claimed": claimed}),
                );
            }
            Action::CheckAlibi {
                target,
                term,
                claimed,
                expect_detected,
            } => {
                let Some((claim, default_time)) = self.claim(target, term) else {
                    return self.fail("check_alibi", target, format!("unknown {term}"));
                };
                let claimed = claimed.map(Timestamp).unwrap_or(default_time);
                let (res, queries) = self.with_view(|v, p| check_alibi(&claim, claimed, v, p));
                self.record_queries(queries);
                let ok = res.fabrication_detected() == *expect_detected;
                self.check(
                    "check_alibi",
                    target,
                    ok,
                    json!({"fabrication_detected": res.fabrication_detected(), "bct": res.bct, "reasons": res.reasons, "claimed": claimed}),
                );
            }
            Action::Audit {
                client,
                shipment,
                nodes,
                expect,
            } => self.audit(client, shipment, nodes, expect),
            Action::CheckLedgers { expect_faulty } => {
                let results = audit_ledgers(&self.world.chain);
                let faulty: BTreeSet<usize> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
                let expected: BTreeSet<usize> = expect_faulty.iter().copied().collect();
                self.check(
                    "check_ledgers",
                    "chain",
                    faulty == expected,
                    json!({"faulty": faulty, "expected": expected}),
                );
            }
            Action::Anchor {
                omit,
                expect_reconfirmed,
            } => self.anchor(omit, *expect_reconfirmed),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn forge_readout(
        &mut self,
        label: &str,
        reader: &str,
        shipment: &str,
        claimed_at: u64,
        data: &str,
        location: Option<&str>,
        submit_evidence: bool,
        node: usize,
    ) {
        let t = self.now();
        let Some(ship) = self.shipments.get(shipment).cloned() else {
            return self.fail("forge_readout", label, format!("shipment {shipment} not provisioned"));
        };
        let r = &self.world.readers[reader];
        let key = self
            .stolen
            .get(reader)
            .cloned()
            .unwrap_or_else(|| KeyPair::generate(derive_seed(self.scenario.seed, "forger", label)).private);
        let loc = match location {
            Some(l) => self.world.locations[l].clone(),
            None => r.location.clone(),
        };
        let claimed = Timestamp(claimed_at);
        let h1 = search_key(&ship.nonce, &ship.tag);
        let h2 = content_digest(claimed, &loc, data.as_bytes());
        let sig = crypto::sign(&signed_message(&h1, &h2), &key).expect("forger key is well formed");
        let ro = Readout {
            n: ship.nonce,
            tag_id: ship.tag,
            t: claimed,
            loc,
            data: data.as_bytes().to_vec(),
            sig,
            key_digest: r.id(),
        };
        self.needles.extend(confidentiality::readout_needles(label, &ro));
        let mut outcome = None;
        if submit_evidence {
            let World { chain, pki, .. } = &mut self.world;
            outcome = Some(format!(
                "{:?}",
                chain.submit(node, &Term::Evidence(ro.to_evidence()), Timestamp(t), pki)
            ));
        }
        self.forged_readouts.insert(label.to_string(), ro);
        self.log(
            t,
            "forge_readout",
            json!({"label": label, "stolen_key": self.stolen.contains_key(reader), "evidence": outcome}),
        );
    }

    fn find_readout(&self, label: &str) -> Option<Readout> {
        self.observations
            .get(label)
            .map(|o| o.readout.clone())
            .or_else(|| self.forged_readouts.get(label).cloned())
    }

    fn claim(&self, target: &str, term: &str) -> Option<(Claim, Timestamp)> {
        match term {
            "readout" => self.find_readout(target).map(|ro| {
                let t = ro.t;
                (Claim::Readout(ro), t)
            }),
            "evidence" => self.find_readout(target).map(|ro| {
                let t = ro.t;
                (Claim::Evidence(ro.to_evidence()), t)
            }),
            "certificate" => self
                .certs
                .get(target)
                .or_else(|| self.forged_certs.get(target))
                .map(|c| (Claim::Certificate(c.clone()), c.t_ini)),
            _ => None,
        }
    }

    fn with_view<T>(&self, f: impl FnOnce(&QuorumView, &Policy) -> T) -> (T, Vec<verifier::QueryRecord>) {
        let view = QuorumView::new(&self.world.chain, &self.world.pki, self.quorum.clone(), self.world.now());
        let out = f(&view, &self.policy);
        (out, view.into_queries())
    }

    fn record_queries(&mut self, queries: Vec<verifier::QueryRecord>) {
        let at = self.world.now();
        for q in queries {
            self.world.chain.record(at, MessageKind::Query, q.nodes, q.bytes);
        }
    }

    fn search_key_for(&self, party: &str, shipment: &str) -> Option<Digest> {
        let ship = self.shipments.get(shipment)?;
        let keys = self.parties.get(party)?.search_keys(&ship.tag);
        let key = search_key(&ship.nonce, &ship.tag);
        keys.contains(&key).then_some(key)
    }

    fn verify(&mut self, client: &str, service: &str, shipment: &str, expect: &str, reasons: &[String]) {
        let Some(key) = self.search_key_for(client, shipment) else {
            return self.fail("verify", shipment, format!("{client} does not know the shipment nonce"));
        };
        let readouts = self.world.services[service].query(&key);
        let service_readers = self.world.services[service].readers();
        let ((verdict, bcts), queries) = self.with_view(|v, p| {
            let verdict = verify_service_response(&key, &readouts, &service_readers, v, p);
            let bcts: Vec<u64> = match proven_evidences(v, &key) {
                Lookup::Found(list) => list.iter().map(|(_, b)| b.0).collect(),
                _ => Vec::new(),
            };
            (verdict, bcts)
        });
        self.record_queries(queries);
        let ok = parse_outcome(expect) == Some(verdict.outcome) && reasons_match(reasons, &verdict.reasons);
        self.check(
            "verify",
            shipment,
            ok,
            json!({
                "client": client,
                "service": service,
                "readouts": readouts.len(),
                "verdict": verdict,
                "recorded_by": bcts,
                "expected": expect,
            }),
        );
    }

    fn secret_free_verify(&mut self, label: &str) {
        let Some(obs) = self.observations.get(label).cloned() else {
            return self.fail("secret_free_verify", label, "unknown observation".into());
        };
        let (verdict, queries) = self.with_view(|v, p| verify_readout(&obs.readout, v, p));
        let private = self.world.readers[&obs.reader].expose_private_key();
        let allowed = [QueryKind::Certificate, QueryKind::Evidence, QueryKind::Root, QueryKind::Proof];
        let ro = &obs.readout;
        let secrets: Vec<&[u8]> = vec![&private.0, ro.n.as_bytes(), ro.tag_id.as_bytes()];
        let kinds_ok = queries.iter().all(|q| allowed.contains(&q.kind));
        let no_secret_in_queries = queries
            .iter()
            .all(|q| secrets.iter().all(|s| memchr::memmem::find(&q.bytes, s).is_none()));
        let no_key_in_readout = memchr::memmem::find(&ro.to_bytes(), &private.0).is_none();
        let kinds: BTreeSet<QueryKind> = queries.iter().map(|q| q.kind).collect();
        self.record_queries(queries);
        let ok = verdict.is_authentic() && kinds_ok && no_secret_in_queries && no_key_in_readout;
        self.check(
            "secret_free_verify",
            label,
            ok,
            json!({
                "verdict": verdict,
                "query_kinds": kinds,
                "no_secret_in_queries": no_secret_in_queries,
                "no_key_in_readout": no_key_in_readout,
            }),
        );
    }

    fn audit(&mut self, client: &str, shipment: &str, nodes: &[usize], expect: &[super::scenario::NodeExpectation]) {
        let Some(key) = self.search_key_for(client, shipment) else {
            return self.fail("audit", shipment, format!("{client} does not know the shipment nonce"));
        };
        let targets: Vec<usize> = if nodes.is_empty() {
            (0..self.world.chain.len()).collect()
        } else {
            nodes.to_vec()
        };
        let ((expected, verdicts), queries) = self.with_view(|v, _| {
            let expected: Vec<Evidence> = match proven_evidences(v, &key) {
                Lookup::Found(list) => list.into_iter().map(|(e, _)| e).collect(),
                _ => Vec::new(),
            };
            let verdicts = audit_evidence_service(&key, &expected, v, &targets);
            (expected, verdicts)
        });
        self.record_queries(queries);
        let by_node: BTreeMap<usize, Verdict> = verdicts.into_iter().collect();
        let mut ok = !expected.is_empty();
        for e in expect {
            let matched = by_node.get(&e.node).is_some_and(|v| {
                parse_outcome(&e.outcome) == Some(v.outcome) && reasons_match(&e.reasons, &v.reasons)
            });
            ok &= matched;
        }
        let rendered: BTreeMap<String, Verdict> = by_node.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        self.check(
            "audit",
            shipment,
            ok,
            json!({"expected_evidences": expected.len(), "verdicts": rendered}),
        );
    }

    fn anchor(&mut self, omit: &[String], expect_reconfirmed: bool) {
        let labels = std::mem::take(&mut self.anchor_window);
        for l in &labels {
            let ev = self.observations[l].evidence.clone();
            if omit.contains(l) {
                self.evidence_service.omit(&ev);
            }
            self.evidence_service.add(ev);
        }
        let block_no = self.world.chain.height().max(1);
        let at = self.world.now();
        let result = self.evidence_service.close_window(&mut self.contract, block_no, at);
        let (reconfirmed, detail) = match result {
            Ok(Some(bulk)) => {
                let key = self.evidence_service.public_key().clone();
                let r = self.evidence_service.reconfirm(&bulk, &self.contract, &key);
                let root = self.evidence_service.record(bulk.window).map(|rec| rec.root.to_hex());
                (
                    r.is_ok(),
                    json!({
                        "window": bulk.window,
                        "covered": bulk.digests.len(),
                        "root": root,
                        "block_no": block_no,
                        "fault": r.err().map(|e| e.to_string()),
                    }),
                )
            }
            Ok(None) => (false, json!({"window": Value::Null})),
            Err(e) => (false, json!({"error": e.to_string()})),
        };
        let gas = self.contract.gas_used();
        self.check(
            "anchor",
            "evidence-service",
            reconfirmed == expect_reconfirmed,
            json!({"reconfirmed": reconfirmed, "gas_used": gas, "anchor": detail}),
        );
    }

    fn atomicity(&self) -> Atomicity {
        let honest: BTreeSet<Digest> = self
            .world
            .readers
            .values()
            .filter(|r| !r.is_tampered())
            .map(Reader::id)
            .collect();
        let forged: BTreeSet<(Digest, Digest, Digest)> = self
            .forged_readouts
            .values()
            .map(|ro| ro.to_evidence().pairing_key())
            .collect();
        let mut readouts: Vec<(Digest, Digest, Digest)> = Vec::new();
        for s in self.world.services.values() {
            for obs in self.observations.values() {
                let key = obs.evidence.h1;
                for ro in s.stored(&key) {
                    if honest.contains(&ro.key_digest) {
                        readouts.push(ro.to_evidence().pairing_key());
                    }
                }
            }
        }
        readouts.sort();
        readouts.dedup();
        let mut evidences: Vec<(Digest, Digest, Digest)> = Vec::new();
        if let Some(&node) = self.world.chain.correct_nodes().first() {
            for b in self.world.chain.node(node).ledger() {
                for term in &b.terms {
                    if let Some(ev) = term.as_evidence() {
                        let k = ev.pairing_key();
                        if honest.contains(&ev.key_digest) && !forged.contains(&k) {
                            evidences.push(k);
                        }
                    }
                }
            }
        }
        evidences.sort();
        Atomicity {
            readouts: readouts.len(),
            evidences: evidences.len(),
            matched: readouts == evidences,
        }
    }

    fn finish(&mut self) -> ScenarioReport {
        let leaks = confidentiality::scan(self.world.chain.message_log(), &self.needles);
        let atomicity = self.atomicity();
        let drained = self.outboxes_empty();
        let t = self.now();
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let total = self.checks.len();
        self.log(
            t,
            "summary",
            json!({
                "checks_passed": passed,
                "checks_total": total,
                "leaks": leaks.len(),
                "atomic": atomicity.matched,
                "drained": drained,
                "dropped": self.dropped,
                "height": self.world.chain.height(),
                "chain_messages": self.world.chain.message_log().len(),
                "anchor_gas": self.contract.gas_used(),
            }),
        );
        ScenarioReport {
            name: self.scenario.name.clone(),
            seed: self.scenario.seed,
            checks: self.checks.clone(),
            leaks,
            atomicity,
            drained,
            final_time: t,
            transcript: self.transcript.clone(),
        }
    }
}

/// Parses, runs and reports one scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport, ScenarioError> {
    let sim = Simulation::new(scenario.clone())?;
    Ok(sim.run().0)
}
