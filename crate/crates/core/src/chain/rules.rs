//! Term validity rules shared by chain nodes and verifying clients.

use serde::{Deserialize, Serialize};

use super::Term;
use crate::crypto;
use crate::reader::Evidence;
use crate::vendor::{Certificate, PkiStub};
use crate::world::Timestamp;

/// Why a term is not valid at the time it became known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermFault {
    /// The key needed to check the signature cannot be obtained.
    KeyUnobtainable,
    /// A timestamp subterm falls outside the validity window of the key.
    CertWindow,
    SigFail,
}

impl TermFault {
    pub fn code(self) -> &'static str {
        match self {
            TermFault::KeyUnobtainable => "KEY_UNOBTAINABLE",
            TermFault::CertWindow => "CERT_WINDOW",
            TermFault::SigFail => "SIG_FAIL",
        }
    }
}

/// A certificate known at `at` is valid if the vendor key is in the PKI at
/// `at`, the certificate does not start before the vendor key did, and the
/// vendor signature checks out.
pub fn validate_certificate(cert: &Certificate, pki: &PkiStub, at: Timestamp) -> Result<(), TermFault> {
    let entry = pki
        .entry(&cert.vendor_key_digest)
        .filter(|e| e.covers(at))
        .ok_or(TermFault::KeyUnobtainable)?;
    if cert.t_ini < entry.valid_from || cert.t_ini >= cert.t_exp {
        return Err(TermFault::CertWindow);
    }
    let msg = Certificate::signed_message(&cert.reader_public, cert.t_ini, cert.t_exp);
    if !crypto::verify(&msg, &cert.sig, &entry.public) {
        return Err(TermFault::SigFail);
    }
    Ok(())
}

/// Evidence known at `at` is valid if some already valid certificate for its
/// reader key covers `at` and the reader signature checks out.
pub fn validate_evidence(ev: &Evidence, certs: &[Certificate], at: Timestamp) -> Result<(), TermFault> {
    let matching: Vec<_> = certs
        .iter()
        .filter(|c| c.reader_key_digest() == ev.key_digest)
        .collect();
    if matching.is_empty() {
        return Err(TermFault::KeyUnobtainable);
    }
    let Some(cert) = matching.iter().find(|c| c.covers(at)) else {
        return Err(TermFault::CertWindow);
    };
    if !crypto::verify(&ev.signed_message(), &ev.sig, &cert.reader_public) {
        return Err(TermFault::SigFail);
    }
    Ok(())
}

pub fn validate(term: &Term, certs: &[Certificate], pki: &PkiStub, at: Timestamp) -> Result<(), TermFault> {
    match term {
        Term::Evidence(ev) => validate_evidence(ev, certs, at),
        Term::Certificate(c) => validate_certificate(c, pki, at),
    }
}
