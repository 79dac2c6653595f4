//! Multi-factor credential hashing. The server stores the opaque vault state
//! and a digest of the derived key; login is a derive plus a digest check.

use crate::env::Env;
use crate::error::{Error, Result};
use crate::primitives::{ct_eq, sha256_parts, DerivedKey};
use crate::state::PolicyState;
use crate::vault::{self, FactorSpec, SetupOptions, Witnesses};

const VERIFY_LABEL: &[u8] = b"mfchf2-verify";

pub fn verifier_digest(key: &DerivedKey) -> [u8; 32] {
    sha256_parts(&[key.as_bytes(), VERIFY_LABEL])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CredentialRecord {
    pub state: PolicyState,
    pub digest: [u8; 32],
}

impl CredentialRecord {
    pub fn new(state: PolicyState, key: &DerivedKey) -> CredentialRecord {
        CredentialRecord {
            state,
            digest: verifier_digest(key),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = self.state.to_bytes();
        b.extend_from_slice(&self.digest);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CredentialRecord> {
        if bytes.len() < 32 {
            return Err(Error::malformed("credential record too short"));
        }
        let (state, digest) = bytes.split_at(bytes.len() - 32);
        Ok(CredentialRecord {
            state: PolicyState::from_bytes(state)?,
            digest: digest.try_into().unwrap(),
        })
    }
}

#[derive(Debug)]
pub enum Verdict {
    /// The updated record must replace the stored one.
    Accept(CredentialRecord),
    Reject,
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept(_))
    }
}

/// Enroll with every factor required.
pub fn enroll(
    factors: Vec<FactorSpec>,
    opts: &SetupOptions,
    env: &mut Env,
) -> Result<CredentialRecord> {
    let (state, key) = vault::setup_nn(factors, opts, env)?;
    Ok(CredentialRecord::new(state, &key))
}

pub fn enroll_threshold(
    t: usize,
    factors: Vec<FactorSpec>,
    opts: &SetupOptions,
    env: &mut Env,
) -> Result<CredentialRecord> {
    let (state, key) = vault::setup_threshold(t, factors, opts, env)?;
    Ok(CredentialRecord::new(state, &key))
}

/// Failed derivations reject. Usage errors such as unknown slots are returned as errors.
pub fn verify(record: &CredentialRecord, w: &Witnesses, env: &mut Env) -> Result<Verdict> {
    match vault::derive(&record.state, w, env) {
        Ok((state, key)) if ct_eq(&verifier_digest(&key), &record.digest) => {
            Ok(Verdict::Accept(CredentialRecord {
                state,
                digest: record.digest,
            }))
        }
        Ok(_) => Ok(Verdict::Reject),
        Err(Error::DerivationFailed) => Ok(Verdict::Reject),
        Err(e) => Err(e),
    }
}
