//! Secrets stored inside the vault state, encrypted under the derived key.
//!
//! Each record carries a random nonce. Keystream block `j` is
//! `hkdf(K, "envelope:" || label || nonce || j)`. The records are covered by
//! the state MAC, so they need no tag of their own.

use crate::env::Env;
use crate::error::{Error, Result};
use crate::primitives::{hkdf32, DerivedKey};
use crate::state::{EnvelopeRecord, PolicyState};

pub const MAX_ENVELOPE_LEN: usize = 1 << 20;

fn keystream_xor(key: &DerivedKey, label: &str, nonce: &[u8; 32], data: &[u8]) -> Vec<u8> {
    let mut info = b"envelope:".to_vec();
    info.extend_from_slice(label.as_bytes());
    info.extend_from_slice(nonce);
    let base = info.len();
    let mut out = Vec::with_capacity(data.len());
    for (j, chunk) in data.chunks(32).enumerate() {
        info.truncate(base);
        info.extend_from_slice(&(j as u32).to_be_bytes());
        let ks = hkdf32(key.as_bytes(), &info);
        out.extend(chunk.iter().zip(ks).map(|(a, b)| a ^ b));
    }
    out
}

pub fn seal_record(
    key: &DerivedKey,
    label: &str,
    secret: &[u8],
    nonce: [u8; 32],
) -> EnvelopeRecord {
    EnvelopeRecord {
        label: label.to_string(),
        nonce,
        ciphertext: keystream_xor(key, label, &nonce, secret),
    }
}

/// Decrypt a record. A wrong key gives unrelated bytes, not an error.
pub fn open_record(key: &DerivedKey, rec: &EnvelopeRecord) -> Vec<u8> {
    keystream_xor(key, &rec.label, &rec.nonce, &rec.ciphertext)
}

/// Add an envelope and re-tag the state. The key must authenticate the state.
pub fn seal(
    state: &PolicyState,
    key: &DerivedKey,
    label: &str,
    secret: &[u8],
    env: &mut Env,
) -> Result<PolicyState> {
    if !state.verify(key) {
        return Err(Error::WrongKey);
    }
    if label.is_empty() || label.len() > 255 {
        return Err(Error::InvalidParameter(
            "envelope labels are 1..=255 bytes".into(),
        ));
    }
    if secret.len() > MAX_ENVELOPE_LEN {
        return Err(Error::InvalidParameter(format!(
            "envelopes hold at most {MAX_ENVELOPE_LEN} bytes"
        )));
    }
    if state.envelopes.iter().any(|e| e.label == label) {
        return Err(Error::DuplicateEnvelope(label.to_string()));
    }
    let mut next = state.clone();
    next.envelopes
        .push(seal_record(key, label, secret, env.random_32()));
    Ok(next.seal(key))
}

pub fn open(state: &PolicyState, key: &DerivedKey, label: &str) -> Result<Vec<u8>> {
    let rec = state
        .envelopes
        .iter()
        .find(|e| e.label == label)
        .ok_or_else(|| Error::NoSuchEnvelope(label.to_string()))?;
    Ok(open_record(key, rec))
}

pub fn remove(state: &PolicyState, key: &DerivedKey, label: &str) -> Result<PolicyState> {
    if !state.verify(key) {
        return Err(Error::WrongKey);
    }
    let mut next = state.clone();
    let before = next.envelopes.len();
    next.envelopes.retain(|e| e.label != label);
    if next.envelopes.len() == before {
        return Err(Error::NoSuchEnvelope(label.to_string()));
    }
    Ok(next.seal(key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_roundtrip_and_wrong_key() {
        let k = DerivedKey([1; 32]);
        let secret =
            b"abandon ability able about above absent absorb abstract absurd abuse access accident"
                .to_vec();
        let r = seal_record(&k, "seed", &secret, [2; 32]);
        assert_eq!(open_record(&k, &r), secret);
        assert_ne!(open_record(&DerivedKey([3; 32]), &r), secret);
        let r2 = seal_record(&k, "seed", &secret, [4; 32]);
        assert_ne!(r.ciphertext, r2.ciphertext);
        assert!(seal_record(&k, "e", &[], [0; 32]).ciphertext.is_empty());
    }
}
