//! Code-offset fuzzy extractor over Reed–Solomon codes.
//!
//! Helper data is `P = w xor Encode(r)` for a random message `r`. A noisy
//! sample `w'` gives `w' xor P = Encode(r) xor (w xor w')`; up to `t` flipped
//! bits touch at most `t` bytes, which the code corrects. The Hamming distance
//! to the reconstructed enrollment sample is then checked explicitly.

use serde::Serialize;

use super::reed_solomon::ReedSolomon;
use super::{FactorError, FactorResult, FactorState, Pending, SourceKey};
use crate::codec::{Reader, Writer};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::primitives::hkdf32;

/// Default sample size: 1024 bits.
pub const DEFAULT_SAMPLE_BYTES: usize = 128;
pub const DEFAULT_TOLERANCE: u16 = 16;
const MIN_MESSAGE_BYTES: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FuzzyState {
    /// Maximum Hamming distance in bits.
    pub tolerance: u16,
    #[serde(with = "crate::hexser")]
    pub helper: Vec<u8>,
}

impl FuzzyState {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u16(self.tolerance).bytes(&self.helper);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<FuzzyState> {
        let s = FuzzyState {
            tolerance: r.u16()?,
            helper: r.bytes()?,
        };
        if code_for(s.helper.len(), s.tolerance).is_err() {
            return Err(Error::malformed("fuzzy helper data shape"));
        }
        Ok(s)
    }
}

fn code_for(len: usize, tolerance: u16) -> FactorResult<ReedSolomon> {
    let parity = 2 * tolerance as usize;
    if tolerance == 0 || len > 255 || len < parity + MIN_MESSAGE_BYTES {
        return Err(FactorError::InvalidMaterial(format!(
      "sample of {len} bytes cannot carry tolerance {tolerance} (need at most 255 bytes and {MIN_MESSAGE_BYTES} message bytes)"
    )));
    }
    ReedSolomon::new(len, parity)
        .ok_or_else(|| FactorError::InvalidMaterial("bad code shape".into()))
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

pub fn hamming(a: &[u8], b: &[u8]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

pub fn setup(sample: &[u8], tolerance: u16, env: &mut Env) -> FactorResult<(Pending, SourceKey)> {
    let rs = code_for(sample.len(), tolerance)?;
    let mut r = vec![0u8; rs.message_len()];
    env.rng().fill_bytes(&mut r);
    let helper = xor(sample, &rs.encode(&r));
    Ok((
        Pending::Ready(FactorState::Fuzzy(FuzzyState { tolerance, helper })),
        SourceKey(hkdf32(&r, b"fuzzy")),
    ))
}

pub fn derive1(s: &FuzzyState, sample: &[u8]) -> FactorResult<SourceKey> {
    if sample.len() != s.helper.len() {
        return Err(FactorError::InvalidWitness(
            "sample length differs from enrollment".into(),
        ));
    }
    let rs = code_for(s.helper.len(), s.tolerance)?;
    let codeword = rs
        .decode(&xor(sample, &s.helper))
        .ok_or(FactorError::DecodeFailed)?;
    let enrolled = xor(&codeword, &s.helper);
    if hamming(&enrolled, sample) > u32::from(s.tolerance) {
        return Err(FactorError::DecodeFailed);
    }
    Ok(SourceKey(hkdf32(rs.message(&codeword), b"fuzzy")))
}
