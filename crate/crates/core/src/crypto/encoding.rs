//! Canonical tag-length-value encoding.
//!
//! Every term that is hashed or signed goes through this encoding. A field is
//! one tag byte, a 4-byte big-endian payload length, then the payload. The
//! framing is self-delimiting, so distinct field sequences can never collide.

use thiserror::Error;

/// Registered field tags. The numeric values are part of the wire format.
pub mod tags {
    pub const NONCE: u8 = 0x01;
    pub const TAG_ID: u8 = 0x02;
    pub const TIME: u8 = 0x03;
    pub const LOCATION: u8 = 0x04;
    pub const DATA: u8 = 0x05;
    pub const SIGNATURE: u8 = 0x06;
    pub const KEY_DIGEST: u8 = 0x07;
    pub const H1: u8 = 0x08;
    pub const H2: u8 = 0x09;
    pub const PUBLIC_KEY: u8 = 0x0a;
    pub const T_INI: u8 = 0x0b;
    pub const T_EXP: u8 = 0x0c;
    pub const VENDOR_KEY_DIGEST: u8 = 0x0d;

    pub const LOC_LABEL: u8 = 0x10;
    pub const LOC_COORDS: u8 = 0x11;

    pub const MERKLE_LEFT: u8 = 0x20;
    pub const MERKLE_RIGHT: u8 = 0x21;
    pub const PROOF_LEAF_INDEX: u8 = 0x22;
    pub const PROOF_ENTRY: u8 = 0x23;

    pub const TERM_EVIDENCE: u8 = 0x30;
    pub const TERM_CERTIFICATE: u8 = 0x31;

    pub const BLOCK_HEIGHT: u8 = 0x40;
    pub const BLOCK_PREV: u8 = 0x41;
    pub const BLOCK_CREATED_AT: u8 = 0x42;
    pub const BLOCK_TERM: u8 = 0x43;
    pub const BLOCK_ROOT: u8 = 0x44;
    pub const BLOCK_WORK: u8 = 0x45;

    pub const BULK_WINDOW: u8 = 0x50;
    pub const BULK_DIGEST: u8 = 0x51;
    pub const PKI_ENTRY_FROM: u8 = 0x52;
    pub const PKI_ENTRY_TO: u8 = 0x53;

    pub const QUERY_KIND: u8 = 0x60;
    pub const QUERY_KEY: u8 = 0x61;
    pub const QUERY_BCT: u8 = 0x62;
    pub const QUERY_AT: u8 = 0x63;

    pub(super) const ALL: &[u8] = &[
        NONCE,
        TAG_ID,
        TIME,
        LOCATION,
        DATA,
        SIGNATURE,
        KEY_DIGEST,
        H1,
        H2,
        PUBLIC_KEY,
        T_INI,
        T_EXP,
        VENDOR_KEY_DIGEST,
        LOC_LABEL,
        LOC_COORDS,
        MERKLE_LEFT,
        MERKLE_RIGHT,
        PROOF_LEAF_INDEX,
        PROOF_ENTRY,
        TERM_EVIDENCE,
        TERM_CERTIFICATE,
        BLOCK_HEIGHT,
        BLOCK_PREV,
        BLOCK_CREATED_AT,
        BLOCK_TERM,
        BLOCK_ROOT,
        BLOCK_WORK,
        BULK_WINDOW,
        BULK_DIGEST,
        PKI_ENTRY_FROM,
        PKI_ENTRY_TO,
        QUERY_KIND,
        QUERY_KEY,
        QUERY_BCT,
        QUERY_AT,
    ];
}

/// Returns true if `tag` is part of the wire format.
pub fn is_registered(tag: u8) -> bool {
    tags::ALL.contains(&tag)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("unregistered field tag 0x{0:02x}")]
    UnregisteredTag(u8),
    #[error("payload of {0} bytes exceeds the 4-byte length prefix")]
    PayloadTooLarge(usize),
    #[error("input truncated at offset {0}")]
    Truncated(usize),
    #[error("expected tag 0x{expected:02x} at offset {offset}, found 0x{found:02x}")]
    UnexpectedTag { expected: u8, found: u8, offset: usize },
    #[error("field 0x{tag:02x} has length {len}, expected {expected}")]
    BadLength { tag: u8, len: usize, expected: usize },
    #[error("{0} trailing bytes after the last field")]
    TrailingBytes(usize),
    #[error("invalid payload for field 0x{0:02x}")]
    BadPayload(u8),
}

/// One decoded field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub tag: u8,
    pub payload: Vec<u8>,
}

impl Field {
    pub fn new(tag: u8, payload: impl Into<Vec<u8>>) -> Self {
        Self {
            tag,
            payload: payload.into(),
        }
    }
}

/// Encodes an ordered field list.
pub fn encode(fields: &[Field]) -> Result<Vec<u8>, EncodingError> {
    let mut enc = Encoder::new();
    for f in fields {
        enc.try_field(f.tag, &f.payload)?;
    }
    Ok(enc.finish())
}

/// Decodes bytes produced by [`encode`] back into the field list.
pub fn decode(bytes: &[u8]) -> Result<Vec<Field>, EncodingError> {
    let mut dec = Decoder::new(bytes);
    let mut out = Vec::new();
    while !dec.is_empty() {
        let (tag, payload) = dec.next_any()?;
        out.push(Field::new(tag, payload));
    }
    Ok(out)
}

/// Incremental encoder used by the typed wire formats.
///
/// The typed formats only use registered tags, so [`Encoder::field`] panics on
/// an unregistered one; [`Encoder::try_field`] is the fallible form.
#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn try_field(&mut self, tag: u8, payload: &[u8]) -> Result<&mut Self, EncodingError> {
        if !is_registered(tag) {
            return Err(EncodingError::UnregisteredTag(tag));
        }
        let len = u32::try_from(payload.len())
            .map_err(|_| EncodingError::PayloadTooLarge(payload.len()))?;
        self.buf.push(tag);
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(payload);
        Ok(self)
    }

    pub fn field(&mut self, tag: u8, payload: &[u8]) -> &mut Self {
        self.try_field(tag, payload)
            .expect("typed wire formats use registered tags");
        self
    }

    pub fn u64_field(&mut self, tag: u8, value: u64) -> &mut Self {
        self.field(tag, &value.to_be_bytes())
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

/// Strict sequential decoder: fields must appear in the expected order and
/// the input must be fully consumed.
#[derive(Debug)]
pub struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub fn peek_tag(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    pub fn next_any(&mut self) -> Result<(u8, &'a [u8]), EncodingError> {
        let start = self.pos;
        let header = self
            .bytes
            .get(start..start + 5)
            .ok_or(EncodingError::Truncated(start))?;
        let tag = header[0];
        if !is_registered(tag) {
            return Err(EncodingError::UnregisteredTag(tag));
        }
        let len = u32::from_be_bytes([header[1], header[2], header[3], header[4]]) as usize;
        let body_start = start + 5;
        let body_end = body_start
            .checked_add(len)
            .ok_or(EncodingError::Truncated(body_start))?;
        let payload = self
            .bytes
            .get(body_start..body_end)
            .ok_or(EncodingError::Truncated(body_start))?;
        self.pos = body_end;
        Ok((tag, payload))
    }

    pub fn expect(&mut self, tag: u8) -> Result<&'a [u8], EncodingError> {
        let offset = self.pos;
        let (found, payload) = self.next_any()?;
        if found != tag {
            return Err(EncodingError::UnexpectedTag {
                expected: tag,
                found,
                offset,
            });
        }
        Ok(payload)
    }

    pub fn expect_fixed<const N: usize>(&mut self, tag: u8) -> Result<[u8; N], EncodingError> {
        let payload = self.expect(tag)?;
        payload.try_into().map_err(|_| EncodingError::BadLength {
            tag,
            len: payload.len(),
            expected: N,
        })
    }

    pub fn expect_u64(&mut self, tag: u8) -> Result<u64, EncodingError> {
        self.expect_fixed::<8>(tag).map(u64::from_be_bytes)
    }

    pub fn finish(self) -> Result<(), EncodingError> {
        if self.pos < self.bytes.len() {
            return Err(EncodingError::TrailingBytes(self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data_fields(parts: &[&str]) -> Vec<Field> {
        parts
            .iter()
            .map(|p| Field::new(tags::DATA, p.as_bytes()))
            .collect()
    }

    #[test]
    fn split_point_changes_encoding() {
        let a = encode(&data_fields(&["ab", "c"])).unwrap();
        let b = encode(&data_fields(&["a", "bc"])).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn deterministic() {
        let f = data_fields(&["x", "yz"]);
        assert_eq!(encode(&f).unwrap(), encode(&f).unwrap());
    }

    #[test]
    fn unregistered_tag_rejected() {
        let err = encode(&[Field::new(0xee, vec![1, 2])]).unwrap_err();
        assert_eq!(err, EncodingError::UnregisteredTag(0xee));
    }

    #[test]
    fn layout_is_tag_then_big_endian_length() {
        let bytes = encode(&[Field::new(tags::NONCE, vec![0xaa, 0xbb])]).unwrap();
        assert_eq!(bytes, vec![tags::NONCE, 0, 0, 0, 2, 0xaa, 0xbb]);
    }

    #[test]
    fn truncated_and_trailing_input() {
        let bytes = encode(&data_fields(&["hello"])).unwrap();
        assert!(matches!(
            decode(&bytes[..bytes.len() - 1]),
            Err(EncodingError::Truncated(_))
        ));
        let mut dec = Decoder::new(&bytes);
        dec.expect(tags::DATA).unwrap();
        assert!(dec.finish().is_ok());

        let mut extra = bytes.clone();
        extra.push(0);
        let mut dec = Decoder::new(&extra);
        dec.expect(tags::DATA).unwrap();
        assert!(matches!(dec.finish(), Err(EncodingError::TrailingBytes(1))));
    }

    #[test]
    fn no_collisions_over_random_field_lists() {
        use rand::{Rng, SeedableRng};
        use std::collections::HashMap;
        // Small alphabets make accidental framing ambiguities likely to show up.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut by_encoding: HashMap<Vec<u8>, Vec<(u8, Vec<u8>)>> = HashMap::new();
        for _ in 0..100_000 {
            let n = rng.gen_range(0..5);
            let list: Vec<(u8, Vec<u8>)> = (0..n)
                .map(|_| {
                    let tag = tags::ALL[rng.gen_range(0..3)];
                    let len = rng.gen_range(0..4);
                    (tag, (0..len).map(|_| rng.gen_range(0..3u8)).collect())
                })
                .collect();
            let fields: Vec<Field> = list.iter().map(|(t, p)| Field::new(*t, p.clone())).collect();
            let bytes = encode(&fields).unwrap();
            if let Some(prev) = by_encoding.insert(bytes, list.clone()) {
                assert_eq!(prev, list, "distinct field lists share an encoding");
            }
        }
        assert!(by_encoding.len() > 10_000);
    }

    proptest! {
        #[test]
        fn roundtrip(list in proptest::collection::vec((0usize..tags::ALL.len(), proptest::collection::vec(any::<u8>(), 0..40)), 0..8)) {
            let fields: Vec<Field> = list.into_iter().map(|(i, p)| Field::new(tags::ALL[i], p)).collect();
            let bytes = encode(&fields).unwrap();
            prop_assert_eq!(decode(&bytes).unwrap(), fields);
        }
    }
}
