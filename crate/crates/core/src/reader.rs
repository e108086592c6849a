//! Tamper-evident, location-bound readers and the readout/evidence formats.
//!
//! Wire formats (canonical TLV, fixed field order):
//!
//! * readout: `NONCE ‖ TAG_ID ‖ TIME ‖ LOCATION ‖ DATA ‖ SIGNATURE ‖ KEY_DIGEST`
//! * evidence: `H1 ‖ H2 ‖ SIGNATURE ‖ KEY_DIGEST`
//!
//! with `h1 = H(NONCE ‖ TAG_ID)`, `h2 = H(TIME ‖ LOCATION ‖ DATA)` and the
//! signature taken over `H1 ‖ H2`.

use std::collections::VecDeque;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    self, hash, tags, CryptoError, Decoder, Digest, Encoder, EncodingError, KeyPair, PrivateKey,
    PublicKey, Signature,
};
use crate::tag::{Tag, TagError, TagId};
use crate::world::{Location, Proximity, Timestamp, WorldError};

/// Default number of ticks after which a reader drops tag plaintext.
pub const FORGET_AFTER: u64 = 3600;

/// The shared random number `n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Nonce(pub [u8; 16]);

impl Nonce {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", hex::encode(self.0))
    }
}

/// `h1 = H(n, c.id)`, the search key shared by readouts and evidences.
pub fn search_key(n: &Nonce, tag_id: &TagId) -> Digest {
    hash(
        &Encoder::new()
            .field(tags::NONCE, n.as_bytes())
            .field(tags::TAG_ID, tag_id.as_bytes())
            .finish(),
    )
}

/// `h2 = H(t, r.loc(), c.data(t))`.
pub fn content_digest(t: Timestamp, loc: &Location, data: &[u8]) -> Digest {
    hash(
        &Encoder::new()
            .u64_field(tags::TIME, t.0)
            .field(tags::LOCATION, &loc.encode())
            .field(tags::DATA, data)
            .finish(),
    )
}

/// The bytes a reader signs: `⟨h1, h2⟩`.
pub fn signed_message(h1: &Digest, h2: &Digest) -> Vec<u8> {
    Encoder::new()
        .field(tags::H1, h1.as_bytes())
        .field(tags::H2, h2.as_bytes())
        .finish()
}

/// Canonical bytes of a TIME field as it appears inside a readout.
pub fn encoded_time_field(t: Timestamp) -> Vec<u8> {
    Encoder::new().u64_field(tags::TIME, t.0).finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub n: Nonce,
    pub tag_id: TagId,
    pub t: Timestamp,
    pub loc: Location,
    pub data: Vec<u8>,
    pub sig: Signature,
    pub key_digest: Digest,
}

impl Readout {
    pub fn h1(&self) -> Digest {
        search_key(&self.n, &self.tag_id)
    }

    pub fn h2(&self) -> Digest {
        content_digest(self.t, &self.loc, &self.data)
    }

    pub fn signed_message(&self) -> Vec<u8> {
        signed_message(&self.h1(), &self.h2())
    }

    /// The evidence this readout corresponds to.
    pub fn to_evidence(&self) -> Evidence {
        Evidence {
            h1: self.h1(),
            h2: self.h2(),
            sig: self.sig.clone(),
            key_digest: self.key_digest,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        Encoder::new()
            .field(tags::NONCE, self.n.as_bytes())
            .field(tags::TAG_ID, self.tag_id.as_bytes())
            .u64_field(tags::TIME, self.t.0)
            .field(tags::LOCATION, &self.loc.encode())
            .field(tags::DATA, &self.data)
            .field(tags::SIGNATURE, &self.sig.0)
            .field(tags::KEY_DIGEST, self.key_digest.as_bytes())
            .finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let n = Nonce(dec.expect_fixed(tags::NONCE)?);
        let tag_id = TagId(dec.expect_fixed(tags::TAG_ID)?);
        let t = Timestamp(dec.expect_u64(tags::TIME)?);
        let loc = Location::decode(dec.expect(tags::LOCATION)?)?;
        let data = dec.expect(tags::DATA)?.to_vec();
        let sig = Signature(dec.expect(tags::SIGNATURE)?.to_vec());
        let key_digest = Digest(dec.expect_fixed(tags::KEY_DIGEST)?);
        dec.finish()?;
        Ok(Self {
            n,
            tag_id,
            t,
            loc,
            data,
            sig,
            key_digest,
        })
    }

    /// Receiver-side dedup key.
    pub fn content_id(&self) -> Digest {
        hash(&self.to_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub h1: Digest,
    pub h2: Digest,
    pub sig: Signature,
    pub key_digest: Digest,
}

impl Evidence {
    pub fn signed_message(&self) -> Vec<u8> {
        signed_message(&self.h1, &self.h2)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        Encoder::new()
            .field(tags::H1, self.h1.as_bytes())
            .field(tags::H2, self.h2.as_bytes())
            .field(tags::SIGNATURE, &self.sig.0)
            .field(tags::KEY_DIGEST, self.key_digest.as_bytes())
            .finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let h1 = Digest(dec.expect_fixed(tags::H1)?);
        let h2 = Digest(dec.expect_fixed(tags::H2)?);
        let sig = Signature(dec.expect(tags::SIGNATURE)?.to_vec());
        let key_digest = Digest(dec.expect_fixed(tags::KEY_DIGEST)?);
        dec.finish()?;
        Ok(Self {
            h1,
            h2,
            sig,
            key_digest,
        })
    }

    /// Correspondence key between a readout and its evidence.
    pub fn pairing_key(&self) -> (Digest, Digest, Digest) {
        (self.h1, self.h2, self.key_digest)
    }
}

#[derive(Debug, Error)]
pub enum ReaderError {
    #[error("tag at {tag} is out of range of the reader at {reader}")]
    OutOfRange { reader: String, tag: String },
    #[error("tag does not exist at {0}")]
    TagAbsent(Timestamp),
    #[error(transparent)]
    Proximity(#[from] WorldError),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ItemKind {
    Readout,
    Evidence,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutboxPayload {
    Readout(Readout),
    Evidence(Evidence),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutboxItem {
    /// Observation sequence number shared by a readout and its evidence.
    pub pair: u64,
    pub payload: OutboxPayload,
    pub attempts: u32,
}

impl OutboxItem {
    pub fn kind(&self) -> ItemKind {
        match self.payload {
            OutboxPayload::Readout(_) => ItemKind::Readout,
            OutboxPayload::Evidence(_) => ItemKind::Evidence,
        }
    }
}

/// Record of a successful delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivered {
    pub pair: u64,
    pub kind: ItemKind,
    pub at: Timestamp,
}

/// How queued items reach their destinations. Returning `false` means the
/// sender saw no acknowledgement; the item stays queued and is sent again.
pub trait Transport {
    fn send_readout(&mut self, service: &str, ro: &Readout, t: Timestamp) -> bool;
    fn send_evidence(&mut self, node: usize, ev: &Evidence, t: Timestamp) -> bool;
}

/// Scenario-injected positioning fault: the reader reports a false time
/// and/or location without being physically tampered with.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PositionLie {
    pub time_offset: i64,
    pub location: Option<Location>,
}

#[derive(Debug, Clone, PartialEq)]
struct Observation {
    at: Timestamp,
    tag_id: TagId,
    data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlushReport {
    pub delivered: usize,
    pub retained: usize,
}

#[derive(Debug)]
pub struct Reader {
    certified: PublicKey,
    active: KeyPair,
    pub owner: String,
    pub location: Location,
    /// Chain node that receives this reader's evidences.
    pub gateway: usize,
    pub forget_after: u64,
    outbox: VecDeque<OutboxItem>,
    knowledge: Vec<Observation>,
    tampered: bool,
    position_lie: Option<PositionLie>,
    tamper_rng: ChaCha20Rng,
    next_pair: u64,
    deliveries: Vec<Delivered>,
}

impl Reader {
    pub fn new(seed: u64, owner: impl Into<String>, location: Location, gateway: usize) -> Self {
        let keypair = KeyPair::generate(seed);
        Self {
            certified: keypair.public.clone(),
            active: keypair,
            owner: owner.into(),
            location,
            gateway,
            forget_after: FORGET_AFTER,
            outbox: VecDeque::new(),
            knowledge: Vec::new(),
            tampered: false,
            position_lie: None,
            tamper_rng: ChaCha20Rng::seed_from_u64(seed ^ 0x7461_6d70_6572),
            next_pair: 0,
            deliveries: Vec::new(),
        }
    }

    /// `H(k_r)`, the reader identity. Fixed at manufacture.
    pub fn id(&self) -> Digest {
        self.certified.digest()
    }

    /// The public key the vendor certifies.
    pub fn public_key(&self) -> &PublicKey {
        &self.certified
    }

    pub fn is_tampered(&self) -> bool {
        self.tampered
    }

    /// Active private key, handed to an adversary when a scenario models key
    /// compromise.
    pub fn expose_private_key(&self) -> PrivateKey {
        self.active.private.clone()
    }

    pub fn set_position_lie(&mut self, lie: Option<PositionLie>) {
        self.position_lie = lie;
    }

    pub fn outbox(&self) -> impl Iterator<Item = &OutboxItem> {
        self.outbox.iter()
    }

    pub fn outbox_len(&self) -> usize {
        self.outbox.len()
    }

    pub fn delivery_log(&self) -> &[Delivered] {
        &self.deliveries
    }

    /// Tag plaintext the reader still holds, as `(tag id, data)` pairs.
    pub fn retained_plaintext(&self) -> Vec<(TagId, Vec<u8>)> {
        self.knowledge
            .iter()
            .map(|o| (o.tag_id, o.data.clone()))
            .collect()
    }

    /// Reads (and optionally first writes) `tag`, then queues the readout
    /// for the owner service and the evidence for the chain in one step.
    pub fn observe(
        &mut self,
        tag: &mut Tag,
        t: Timestamp,
        n: Nonce,
        write_data: Option<&[u8]>,
        proximity: &Proximity,
    ) -> Result<(Readout, Evidence), ReaderError> {
        let tag_loc = tag.loc(t).ok_or(ReaderError::TagAbsent(t))?;
        if !proximity.location_near(&self.location, tag_loc)? {
            return Err(ReaderError::OutOfRange {
                reader: self.location.label.clone(),
                tag: tag_loc.label.clone(),
            });
        }
        if let Some(d) = write_data {
            tag.write(t, d)?;
        }
        let (tag_id, data) = tag.read(t);

        let (reported_t, reported_loc) = match &self.position_lie {
            Some(lie) => (
                t.offset(lie.time_offset),
                lie.location.clone().unwrap_or_else(|| self.location.clone()),
            ),
            None => (t, self.location.clone()),
        };

        let h1 = search_key(&n, &tag_id);
        let h2 = content_digest(reported_t, &reported_loc, &data);
        let sig = crypto::sign(&signed_message(&h1, &h2), &self.active.private)?;
        let key_digest = self.id();

        let readout = Readout {
            n,
            tag_id,
            t: reported_t,
            loc: reported_loc,
            data: data.clone(),
            sig: sig.clone(),
            key_digest,
        };
        let evidence = Evidence {
            h1,
            h2,
            sig,
            key_digest,
        };

        let pair = self.next_pair;
        self.next_pair += 1;
        self.outbox.push_back(OutboxItem {
            pair,
            payload: OutboxPayload::Readout(readout.clone()),
            attempts: 0,
        });
        self.outbox.push_back(OutboxItem {
            pair,
            payload: OutboxPayload::Evidence(evidence.clone()),
            attempts: 0,
        });
        self.knowledge.push(Observation { at: t, tag_id, data });
        Ok((readout, evidence))
    }

    /// Attempts every queued item once. Unacknowledged items stay queued.
    pub fn flush_outbox(&mut self, transport: &mut dyn Transport, t: Timestamp) -> FlushReport {
        let mut report = FlushReport::default();
        let mut retained = VecDeque::with_capacity(self.outbox.len());
        while let Some(mut item) = self.outbox.pop_front() {
            item.attempts += 1;
            let acked = match &item.payload {
                OutboxPayload::Readout(ro) => transport.send_readout(&self.owner, ro, t),
                OutboxPayload::Evidence(ev) => transport.send_evidence(self.gateway, ev, t),
            };
            if acked {
                report.delivered += 1;
                self.deliveries.push(Delivered {
                    pair: item.pair,
                    kind: item.kind(),
                    at: t,
                });
            } else {
                retained.push_back(item);
            }
        }
        report.retained = retained.len();
        self.outbox = retained;
        report
    }

    /// Drops tag plaintext observed at least `forget_after` ticks before `now`.
    pub fn forget(&mut self, now: Timestamp) {
        let horizon = self.forget_after;
        self.knowledge.retain(|o| now.0 < o.at.0.saturating_add(horizon));
    }

    /// Earliest tick at which [`Reader::forget`] will drop something.
    pub fn next_forget_at(&self) -> Option<Timestamp> {
        self.knowledge
            .iter()
            .map(|o| o.at.plus(self.forget_after))
            .min()
    }

    /// Simulated power cycle: volatile memory is lost, the non-volatile
    /// outbox survives.
    pub fn restart(&mut self) {
        self.knowledge.clear();
    }

    /// Physical tampering changes the signing key irreversibly.
    pub fn tamper(&mut self, _t: Timestamp) {
        self.active = KeyPair::from_rng(&mut self.tamper_rng);
        self.tampered = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag::TagRegistry;
    use std::collections::{BTreeMap, BTreeSet};

    fn setup() -> (Reader, TagRegistry, TagId) {
        let w = Location::new("warehouse", Some((0.0, 0.0)));
        let reader = Reader::new(42, "svc", w.clone(), 0);
        let mut reg = TagRegistry::new(9);
        let id = reg.create(Timestamp(0), w).unwrap();
        (reader, reg, id)
    }

    #[derive(Default)]
    struct Sink {
        up: bool,
        readouts: Vec<Readout>,
        evidences: Vec<Evidence>,
    }

    impl Transport for Sink {
        fn send_readout(&mut self, _s: &str, ro: &Readout, _t: Timestamp) -> bool {
            if self.up {
                self.readouts.push(ro.clone());
            }
            self.up
        }
        fn send_evidence(&mut self, _n: usize, ev: &Evidence, _t: Timestamp) -> bool {
            if self.up {
                self.evidences.push(ev.clone());
            }
            self.up
        }
    }

    #[test]
    fn observe_produces_matching_pair() {
        let (mut r, mut reg, id) = setup();
        let n = Nonce([7; 16]);
        let tag = reg.get_mut(&id).unwrap();
        tag.write(Timestamp(50), b"dest=osaka").unwrap();
        let (ro, ev) = r
            .observe(tag, Timestamp(100), n, None, &Proximity::default())
            .unwrap();
        assert_eq!(ro.n, n);
        assert_eq!(ro.tag_id, id);
        assert_eq!(ro.t, Timestamp(100));
        assert_eq!(ro.loc.label, "warehouse");
        assert_eq!(ro.data, b"dest=osaka");
        assert_eq!(ro.key_digest, r.id());
        assert_eq!(ev.h1, search_key(&n, &id));
        assert_eq!(ev.h2, content_digest(Timestamp(100), &ro.loc, b"dest=osaka"));
        assert_eq!(ev.sig, ro.sig);
        assert!(crypto::verify(&ev.signed_message(), &ev.sig, r.public_key()));
        assert_eq!(r.outbox_len(), 2);
    }

    #[test]
    fn write_happens_before_read() {
        let (mut r, mut reg, id) = setup();
        let tag = reg.get_mut(&id).unwrap();
        let (ro, _) = r
            .observe(tag, Timestamp(5), Nonce([1; 16]), Some(b"svc1"), &Proximity::default())
            .unwrap();
        assert_eq!(ro.data, b"svc1");
        assert_eq!(tag.read(Timestamp(6)).1, b"svc1");
    }

    #[test]
    fn out_of_range_tag() {
        let (mut r, mut reg, _) = setup();
        let far = reg
            .create(Timestamp(0), Location::new("depot-b", Some((5000.0, 0.0))))
            .unwrap();
        let err = r
            .observe(
                reg.get_mut(&far).unwrap(),
                Timestamp(1),
                Nonce([0; 16]),
                None,
                &Proximity::default(),
            )
            .unwrap_err();
        assert!(matches!(err, ReaderError::OutOfRange { .. }));
        assert_eq!(r.outbox_len(), 0);
    }

    #[test]
    fn tampering_breaks_signatures_under_certified_key() {
        let (mut r, mut reg, id) = setup();
        let p = Proximity::default();
        let (_, ev) = r
            .observe(reg.get_mut(&id).unwrap(), Timestamp(1), Nonce([0; 16]), None, &p)
            .unwrap();
        assert!(crypto::verify(&ev.signed_message(), &ev.sig, r.public_key()));
        r.tamper(Timestamp(2));
        assert!(r.is_tampered());
        let (_, ev) = r
            .observe(reg.get_mut(&id).unwrap(), Timestamp(3), Nonce([0; 16]), None, &p)
            .unwrap();
        assert!(!crypto::verify(&ev.signed_message(), &ev.sig, r.public_key()));
        r.tamper(Timestamp(4));
        assert!(r.is_tampered());
        let (_, ev) = r
            .observe(reg.get_mut(&id).unwrap(), Timestamp(5), Nonce([0; 16]), None, &p)
            .unwrap();
        assert!(!crypto::verify(&ev.signed_message(), &ev.sig, r.public_key()));
        assert_eq!(ev.key_digest, r.id());
    }

    #[test]
    fn flush_up_and_down() {
        let (mut r, mut reg, id) = setup();
        let p = Proximity::default();
        for i in 0..3u64 {
            r.observe(reg.get_mut(&id).unwrap(), Timestamp(i + 1), Nonce([i as u8; 16]), None, &p)
                .unwrap();
        }
        let mut down = Sink::default();
        assert_eq!(
            r.flush_outbox(&mut down, Timestamp(10)),
            FlushReport { delivered: 0, retained: 6 }
        );
        let mut up = Sink { up: true, ..Default::default() };
        assert_eq!(
            r.flush_outbox(&mut up, Timestamp(11)),
            FlushReport { delivered: 6, retained: 0 }
        );
        assert_eq!(up.readouts.len(), 3);
        assert_eq!(up.evidences.len(), 3);
        for ro in &up.readouts {
            assert!(up.evidences.contains(&ro.to_evidence()));
        }
    }

    /// Fault injection with lost requests and lost acknowledgements; the
    /// receiver deduplicates by content digest.
    #[test]
    fn retransmission_is_exactly_once_after_dedup() {
        use rand::Rng;
        struct Flaky {
            rng: ChaCha20Rng,
            readouts: BTreeMap<Digest, usize>,
            evidences: BTreeMap<Digest, usize>,
        }
        impl Flaky {
            fn attempt(&mut self) -> (bool, bool) {
                let arrives = self.rng.gen_bool(0.5);
                let acked = arrives && self.rng.gen_bool(0.5);
                (arrives, acked)
            }
        }
        impl Transport for Flaky {
            fn send_readout(&mut self, _s: &str, ro: &Readout, _t: Timestamp) -> bool {
                let (arrives, acked) = self.attempt();
                if arrives {
                    *self.readouts.entry(ro.content_id()).or_default() += 1;
                }
                acked
            }
            fn send_evidence(&mut self, _n: usize, ev: &Evidence, _t: Timestamp) -> bool {
                let (arrives, acked) = self.attempt();
                if arrives {
                    *self.evidences.entry(hash(&ev.to_bytes())).or_default() += 1;
                }
                acked
            }
        }
        let (mut r, mut reg, id) = setup();
        let p = Proximity::default();
        for i in 0..5u64 {
            r.observe(reg.get_mut(&id).unwrap(), Timestamp(i), Nonce([i as u8; 16]), None, &p)
                .unwrap();
        }
        let mut net = Flaky {
            rng: ChaCha20Rng::seed_from_u64(1),
            readouts: BTreeMap::new(),
            evidences: BTreeMap::new(),
        };
        let mut t = 10;
        while r.outbox_len() > 0 {
            r.flush_outbox(&mut net, Timestamp(t));
            t += 1;
            assert!(t < 1000);
        }
        // At-least-once on the wire, exactly one distinct item per observation.
        assert_eq!(net.readouts.len(), 5);
        assert_eq!(net.evidences.len(), 5);
        assert!(net.readouts.values().chain(net.evidences.values()).any(|&c| c > 1));
        let pairs: BTreeSet<u64> = r.delivery_log().iter().map(|d| d.pair).collect();
        assert_eq!(pairs.len(), 5);
    }

    #[test]
    fn outbox_survives_restart() {
        let (mut r, mut reg, id) = setup();
        r.observe(reg.get_mut(&id).unwrap(), Timestamp(1), Nonce([0; 16]), None, &Proximity::default())
            .unwrap();
        r.restart();
        assert_eq!(r.outbox_len(), 2);
        assert!(r.retained_plaintext().is_empty());
        let mut up = Sink { up: true, ..Default::default() };
        assert_eq!(r.flush_outbox(&mut up, Timestamp(2)).delivered, 2);
    }

    #[test]
    fn forgets_plaintext_after_horizon() {
        let (mut r, mut reg, id) = setup();
        r.observe(reg.get_mut(&id).unwrap(), Timestamp(100), Nonce([0; 16]), Some(b"xyz"), &Proximity::default())
            .unwrap();
        r.forget(Timestamp(100 + FORGET_AFTER - 1));
        assert_eq!(r.retained_plaintext().len(), 1);
        r.forget(Timestamp(100 + FORGET_AFTER));
        assert!(r.retained_plaintext().is_empty());
    }

    #[test]
    fn evidence_carries_no_plaintext() {
        let (mut r, mut reg, id) = setup();
        let n = Nonce(*b"sixteen-byte-n!!");
        let (ro, ev) = r
            .observe(reg.get_mut(&id).unwrap(), Timestamp(777), n, Some(b"fragile: glass"), &Proximity::default())
            .unwrap();
        let bytes = ev.to_bytes();
        let contains = |needle: &[u8]| bytes.windows(needle.len()).any(|w| w == needle);
        assert!(!contains(n.as_bytes()));
        assert!(!contains(ro.tag_id.as_bytes()));
        assert!(!contains(&encoded_time_field(ro.t)));
        assert!(!contains(ro.loc.label.as_bytes()));
        assert!(!contains(&ro.data));
        let fields = crypto::decode(&bytes).unwrap();
        let field_tags: Vec<u8> = fields.iter().map(|f| f.tag).collect();
        assert_eq!(field_tags, vec![tags::H1, tags::H2, tags::SIGNATURE, tags::KEY_DIGEST]);
    }

    #[test]
    fn wire_roundtrip() {
        let (mut r, mut reg, id) = setup();
        let (ro, ev) = r
            .observe(reg.get_mut(&id).unwrap(), Timestamp(3), Nonce([5; 16]), Some(b"d"), &Proximity::default())
            .unwrap();
        assert_eq!(Readout::from_bytes(&ro.to_bytes()).unwrap(), ro);
        assert_eq!(Evidence::from_bytes(&ev.to_bytes()).unwrap(), ev);
    }

    #[test]
    fn position_lie_changes_reported_time_only() {
        let (mut r, mut reg, id) = setup();
        r.set_position_lie(Some(PositionLie { time_offset: -7200, location: None }));
        let (ro, ev) = r
            .observe(reg.get_mut(&id).unwrap(), Timestamp(10_000), Nonce([0; 16]), None, &Proximity::default())
            .unwrap();
        assert_eq!(ro.t, Timestamp(2800));
        assert!(crypto::verify(&ev.signed_message(), &ev.sig, r.public_key()));
    }
}
