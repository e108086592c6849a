//! Simulation registry, discrete clock and proximity relations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::ChainNetwork;
use crate::crypto::{tags, Encoder};
use crate::reader::Reader;
use crate::service::{Client, Service};
use crate::tag::TagRegistry;
use crate::vendor::{PkiStub, Vendor};

/// Simulated time in whole seconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn abs_diff(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    pub fn plus(self, delta: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(delta))
    }

    /// Signed offset, saturating at zero.
    pub fn offset(self, delta: i64) -> Timestamp {
        Timestamp(self.0.saturating_add_signed(delta))
    }

    pub fn to_be_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub label: String,
    /// Planar position in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<(f64, f64)>,
}

impl Location {
    pub fn new(label: impl Into<String>, coords: Option<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            coords,
        }
    }

    pub fn labeled(label: impl Into<String>) -> Self {
        Self::new(label, None)
    }

    /// Canonical bytes: the label, then the coordinates when present.
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.field(tags::LOC_LABEL, self.label.as_bytes());
        if let Some((x, y)) = self.coords {
            let mut c = [0u8; 16];
            c[..8].copy_from_slice(&x.to_be_bytes());
            c[8..].copy_from_slice(&y.to_be_bytes());
            enc.field(tags::LOC_COORDS, &c);
        }
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, crate::crypto::EncodingError> {
        let mut dec = crate::crypto::Decoder::new(bytes);
        let label = String::from_utf8(dec.expect(tags::LOC_LABEL)?.to_vec())
            .map_err(|_| crate::crypto::EncodingError::BadPayload(tags::LOC_LABEL))?;
        let coords = if dec.is_empty() {
            None
        } else {
            let c: [u8; 16] = dec.expect_fixed(tags::LOC_COORDS)?;
            let x = f64::from_be_bytes(c[..8].try_into().unwrap());
            let y = f64::from_be_bytes(c[8..].try_into().unwrap());
            Some((x, y))
        };
        dec.finish()?;
        Ok(Self { label, coords })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("cannot decide proximity of {0} and {1}: coordinates missing")]
    Indeterminate(String, String),
    #[error("duplicate {kind} identifier {id}")]
    Duplicate { kind: &'static str, id: String },
    #[error("unknown {kind} {id}")]
    Unknown { kind: &'static str, id: String },
    #[error("location {0} is not a logistical location")]
    NotLogistical(String),
}

/// Thresholds for the timewise and locationwise proximity relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proximity {
    /// `|t1 - t2| <= close` means the times are close.
    pub close: u64,
    /// `|t1 - t2| >= apart` means the times are apart.
    pub apart: u64,
    /// Reader range in meters.
    pub read_range_m: f64,
}

pub const CLOSE_THRESHOLD: u64 = 30;
pub const APART_THRESHOLD: u64 = 120;
pub const READ_RANGE_M: f64 = 10.0;

impl Default for Proximity {
    fn default() -> Self {
        Self {
            close: CLOSE_THRESHOLD,
            apart: APART_THRESHOLD,
            read_range_m: READ_RANGE_M,
        }
    }
}

impl Proximity {
    pub fn time_close(&self, t1: Timestamp, t2: Timestamp) -> bool {
        t1.abs_diff(t2) <= self.close
    }

    pub fn time_apart(&self, t1: Timestamp, t2: Timestamp) -> bool {
        t1.abs_diff(t2) >= self.apart
    }

    pub fn location_near(&self, a: &Location, b: &Location) -> Result<bool, WorldError> {
        if a.label == b.label {
            return Ok(true);
        }
        match (a.coords, b.coords) {
            (Some((ax, ay)), Some((bx, by))) => {
                let d = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
                Ok(d <= self.read_range_m)
            }
            _ => Err(WorldError::Indeterminate(a.label.clone(), b.label.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    now: Timestamp,
}

impl Clock {
    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn advance(&mut self, delta: u64) -> Timestamp {
        self.now = self.now.plus(delta);
        self.now
    }

    /// Moves the clock forward to `t`; earlier times leave it unchanged.
    pub fn advance_to(&mut self, t: Timestamp) -> Timestamp {
        if t > self.now {
            self.now = t;
        }
        self.now
    }
}

/// The logistics network: entities, vendors, readers, tags, locations,
/// chain nodes and time.
#[derive(Debug)]
pub struct World {
    pub clock: Clock,
    pub proximity: Proximity,
    pub locations: BTreeMap<String, Location>,
    pub logistical: BTreeSet<String>,
    pub tags: TagRegistry,
    pub readers: BTreeMap<String, Reader>,
    pub vendors: BTreeMap<String, Vendor>,
    pub services: BTreeMap<String, Service>,
    pub clients: BTreeMap<String, Client>,
    pub pki: PkiStub,
    pub chain: ChainNetwork,
}

impl World {
    pub fn new(seed: u64, proximity: Proximity, chain: ChainNetwork, pki: PkiStub) -> Self {
        Self {
            clock: Clock::default(),
            proximity,
            locations: BTreeMap::new(),
            logistical: BTreeSet::new(),
            tags: TagRegistry::new(seed),
            readers: BTreeMap::new(),
            vendors: BTreeMap::new(),
            services: BTreeMap::new(),
            clients: BTreeMap::new(),
            pki,
            chain,
        }
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn advance_clock(&mut self, delta: u64) -> Timestamp {
        self.clock.advance(delta)
    }

    pub fn add_location(&mut self, loc: Location, logistical: bool) -> Result<(), WorldError> {
        if self.locations.contains_key(&loc.label) {
            return Err(WorldError::Duplicate {
                kind: "location",
                id: loc.label,
            });
        }
        if logistical {
            self.logistical.insert(loc.label.clone());
        }
        self.locations.insert(loc.label.clone(), loc);
        Ok(())
    }

    pub fn location(&self, label: &str) -> Result<&Location, WorldError> {
        self.locations.get(label).ok_or_else(|| WorldError::Unknown {
            kind: "location",
            id: label.to_string(),
        })
    }

    pub fn add_service(&mut self, service: Service) -> Result<(), WorldError> {
        let name = service.name.clone();
        if self.services.contains_key(&name) || self.clients.contains_key(&name) {
            return Err(WorldError::Duplicate {
                kind: "entity",
                id: name,
            });
        }
        self.services.insert(name, service);
        Ok(())
    }

    pub fn add_client(&mut self, client: Client) -> Result<(), WorldError> {
        let name = client.name.clone();
        if self.services.contains_key(&name) || self.clients.contains_key(&name) {
            return Err(WorldError::Duplicate {
                kind: "entity",
                id: name,
            });
        }
        self.clients.insert(name, client);
        Ok(())
    }

    pub fn add_vendor(&mut self, vendor: Vendor) -> Result<(), WorldError> {
        let name = vendor.name.clone();
        if self.vendors.contains_key(&name) {
            return Err(WorldError::Duplicate {
                kind: "vendor",
                id: name,
            });
        }
        self.vendors.insert(name, vendor);
        Ok(())
    }

    /// Registers a reader; its owner must be a service and its location a
    /// logistical location.
    pub fn add_reader(&mut self, name: &str, reader: Reader) -> Result<(), WorldError> {
        if self.readers.contains_key(name) {
            return Err(WorldError::Duplicate {
                kind: "reader",
                id: name.to_string(),
            });
        }
        let owner = self
            .services
            .get_mut(&reader.owner)
            .ok_or_else(|| WorldError::Unknown {
                kind: "service",
                id: reader.owner.clone(),
            })?;
        if !self.logistical.contains(&reader.location.label) {
            return Err(WorldError::NotLogistical(reader.location.label.clone()));
        }
        owner.register_reader(reader.id());
        self.readers.insert(name.to_string(), reader);
        Ok(())
    }

    /// Checks the registry-wide structural invariants.
    pub fn check_invariants(&self) -> Result<(), WorldError> {
        for r in self.readers.values() {
            let svc = self.services.get(&r.owner).ok_or_else(|| WorldError::Unknown {
                kind: "service",
                id: r.owner.clone(),
            })?;
            if !svc.owns(&r.id()) {
                return Err(WorldError::Unknown {
                    kind: "owned reader",
                    id: r.id().to_hex(),
                });
            }
            if !self.logistical.contains(&r.location.label) {
                return Err(WorldError::NotLogistical(r.location.label.clone()));
            }
        }
        self.tags.check_unique().map_err(|id| WorldError::Duplicate {
            kind: "tag",
            id: id.to_hex(),
        })
    }
}
