//! Byte scan of everything sent to chain nodes for readout plaintext.

use memchr::memmem;
use serde::Serialize;

use crate::chain::{ChainMessage, MessageKind};
use crate::crypto::{tags, Encoder};
use crate::reader::{encoded_time_field, Readout};

/// Plain values shorter than this are only searched in their encoded form,
/// since a short raw string occurs by chance in random digests.
pub const MIN_RAW_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Needle {
    pub kind: &'static str,
    pub subject: String,
    pub bytes: Vec<u8>,
}

impl Needle {
    pub fn raw(kind: &'static str, subject: &str, bytes: &[u8]) -> Self {
        Self {
            kind,
            subject: subject.to_string(),
            bytes: bytes.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Leak {
    pub kind: &'static str,
    pub subject: String,
    pub message: usize,
    pub message_kind: MessageKind,
    pub offset: usize,
}

/// Every secret a readout carries: nonce, tag id, the encoded timestamp,
/// the location label and the data.
pub fn readout_needles(subject: &str, ro: &Readout) -> Vec<Needle> {
    let mut out = vec![
        Needle::raw("nonce", subject, ro.n.as_bytes()),
        Needle::raw("tag_id", subject, ro.tag_id.as_bytes()),
        Needle::raw("timestamp", subject, &encoded_time_field(ro.t)),
        Needle::raw(
            "location",
            subject,
            &Encoder::new().field(tags::LOC_LABEL, ro.loc.label.as_bytes()).finish(),
        ),
        Needle::raw("data", subject, &Encoder::new().field(tags::DATA, &ro.data).finish()),
    ];
    if ro.loc.label.len() >= MIN_RAW_LEN {
        out.push(Needle::raw("location", subject, ro.loc.label.as_bytes()));
    }
    if ro.data.len() >= MIN_RAW_LEN {
        out.push(Needle::raw("data", subject, &ro.data));
    }
    out
}

pub fn scan(log: &[ChainMessage], needles: &[Needle]) -> Vec<Leak> {
    let finders: Vec<_> = needles
        .iter()
        .filter(|n| !n.bytes.is_empty())
        .map(|n| (n, memmem::Finder::new(&n.bytes)))
        .collect();
    let mut leaks = Vec::new();
    for (i, msg) in log.iter().enumerate() {
        for (needle, finder) in &finders {
            if let Some(offset) = finder.find(&msg.bytes) {
                leaks.push(Leak {
                    kind: needle.kind,
                    subject: needle.subject.clone(),
                    message: i,
                    message_kind: msg.kind,
                    offset,
                });
            }
        }
    }
    leaks
}
