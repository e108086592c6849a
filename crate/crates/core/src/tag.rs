//! Passive RFID tags.

use std::collections::BTreeMap;
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Location, Timestamp};

/// Tag memory capacity in bytes.
pub const MEMORY_BOUND: usize = 4096;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagId(pub [u8; 32]);

impl TagId {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TagId({})", &self.to_hex()[..12])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("tag id collision: {0:?}")]
    IdCollision(TagId),
    #[error("move at {at} does not follow the last recorded move at {last}")]
    NonMonotoneMove { at: Timestamp, last: Timestamp },
    #[error("write at {at} precedes the last write at {last}")]
    NonMonotoneWrite { at: Timestamp, last: Timestamp },
    #[error("data of {0} bytes exceeds the {MEMORY_BOUND}-byte tag memory")]
    Capacity(usize),
    #[error("unknown tag {0:?}")]
    Unknown(TagId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tag {
    id: TagId,
    /// Writes in time order; memory at `t` is the latest write at or before `t`.
    writes: Vec<(Timestamp, Vec<u8>)>,
    location_history: Vec<(Timestamp, Location)>,
}

impl Tag {
    fn new(id: TagId, t: Timestamp, location: Location) -> Self {
        Self {
            id,
            writes: Vec::new(),
            location_history: vec![(t, location)],
        }
    }

    pub fn id(&self) -> TagId {
        self.id
    }

    /// Physical location at `t`; `None` before the tag existed.
    pub fn loc(&self, t: Timestamp) -> Option<&Location> {
        self.location_history
            .iter()
            .rev()
            .find(|(at, _)| *at <= t)
            .map(|(_, l)| l)
    }

    pub fn data(&self, t: Timestamp) -> &[u8] {
        self.writes
            .iter()
            .rev()
            .find(|(at, _)| *at <= t)
            .map(|(_, d)| d.as_slice())
            .unwrap_or(&[])
    }

    pub fn location_history(&self) -> &[(Timestamp, Location)] {
        &self.location_history
    }

    pub fn move_to(&mut self, t: Timestamp, to: Location) -> Result<(), TagError> {
        let last = self.location_history.last().map(|(at, _)| *at).unwrap_or_default();
        if t <= last {
            return Err(TagError::NonMonotoneMove { at: t, last });
        }
        self.location_history.push((t, to));
        Ok(())
    }

    pub fn read(&self, t: Timestamp) -> (TagId, Vec<u8>) {
        (self.id, self.data(t).to_vec())
    }

    pub fn write(&mut self, t: Timestamp, d: &[u8]) -> Result<(), TagError> {
        if d.len() > MEMORY_BOUND {
            return Err(TagError::Capacity(d.len()));
        }
        if let Some((last, _)) = self.writes.last() {
            if t < *last {
                return Err(TagError::NonMonotoneWrite { at: t, last: *last });
            }
            if t == *last {
                self.writes.pop();
            }
        }
        self.writes.push((t, d.to_vec()));
        Ok(())
    }
}

/// Issues unclonable tag ids from a seeded generator and rejects collisions.
#[derive(Debug)]
pub struct TagRegistry {
    rng: ChaCha20Rng,
    tags: BTreeMap<TagId, Tag>,
}

impl TagRegistry {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed ^ 0x7461_6773),
            tags: BTreeMap::new(),
        }
    }

    pub fn create(&mut self, t: Timestamp, location: Location) -> Result<TagId, TagError> {
        let mut id = [0u8; 32];
        self.rng.fill_bytes(&mut id);
        self.insert_with_id(TagId(id), t, location)
    }

    /// Registers a tag with an explicit id. A repeated id models a cloned tag
    /// and is fatal.
    pub fn insert_with_id(
        &mut self,
        id: TagId,
        t: Timestamp,
        location: Location,
    ) -> Result<TagId, TagError> {
        if self.tags.contains_key(&id) {
            return Err(TagError::IdCollision(id));
        }
        self.tags.insert(id, Tag::new(id, t, location));
        Ok(id)
    }

    pub fn get(&self, id: &TagId) -> Result<&Tag, TagError> {
        self.tags.get(id).ok_or(TagError::Unknown(*id))
    }

    pub fn get_mut(&mut self, id: &TagId) -> Result<&mut Tag, TagError> {
        self.tags.get_mut(id).ok_or(TagError::Unknown(*id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tag> {
        self.tags.values()
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub(crate) fn check_unique(&self) -> Result<(), TagId> {
        for (key, tag) in &self.tags {
            if *key != tag.id {
                return Err(tag.id);
            }
        }
        Ok(())
    }
}

pub fn create_tag(registry: &mut TagRegistry, t: Timestamp, location: Location) -> Result<TagId, TagError> {
    registry.create(t, location)
}

pub fn move_tag(tag: &mut Tag, t: Timestamp, to: Location) -> Result<(), TagError> {
    tag.move_to(t, to)
}

pub fn tag_read(tag: &Tag, t: Timestamp) -> (TagId, Vec<u8>) {
    tag.read(t)
}

pub fn tag_write(tag: &mut Tag, t: Timestamp, d: &[u8]) -> Result<(), TagError> {
    tag.write(t, d)
}
