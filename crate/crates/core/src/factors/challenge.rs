//! Rotating-challenge factors: passkey PRF, SQRL, push and proximity tags.
//!
//! The source key is a random 32-byte value fixed at setup. The public state
//! holds the current challenge and the source key wrapped under a key derived
//! from the device's response to that challenge. Each accepted derivation
//! draws a new challenge and re-wraps, so an old response opens nothing.

use ed25519_dalek::{Signature, Verifier, VerifyingKey};
use serde::Serialize;

use super::{AuthRequest, Authenticator, FactorError, FactorResult, Pending, SourceKey};
use crate::codec::{Reader, Writer};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::primitives::{hkdf32, prp_decrypt, prp_encrypt, sha256, PrpKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChallengeKind {
    Passkey,
    Sqrl,
    Push,
    Proximity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChallengeState {
    pub kind: ChallengeKind,
    #[serde(with = "crate::hexser")]
    pub credential_id: Vec<u8>,
    #[serde(with = "crate::hexser")]
    pub public_key: Vec<u8>,
    #[serde(with = "crate::hexser")]
    pub challenge: [u8; 32],
    #[serde(with = "crate::hexser")]
    pub wrapped: [u8; 32],
}

impl ChallengeState {
    pub(crate) fn encode(&self, w: &mut Writer) {
        let kind = match self.kind {
            ChallengeKind::Passkey => 1,
            ChallengeKind::Sqrl => 2,
            ChallengeKind::Push => 3,
            ChallengeKind::Proximity => 4,
        };
        w.u8(kind)
            .bytes(&self.credential_id)
            .bytes(&self.public_key)
            .fixed(&self.challenge)
            .fixed(&self.wrapped);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<ChallengeState> {
        let kind = match r.u8()? {
            1 => ChallengeKind::Passkey,
            2 => ChallengeKind::Sqrl,
            3 => ChallengeKind::Push,
            4 => ChallengeKind::Proximity,
            _ => return Err(Error::malformed("unknown challenge kind")),
        };
        let s = ChallengeState {
            kind,
            credential_id: r.bytes()?,
            public_key: r.bytes()?,
            challenge: r.array32()?,
            wrapped: r.array32()?,
        };
        let signed = matches!(kind, ChallengeKind::Sqrl | ChallengeKind::Push);
        if signed != (s.public_key.len() == 32) || (!signed && !s.public_key.is_empty()) {
            return Err(Error::malformed("challenge factor public key"));
        }
        Ok(s)
    }
}

/// Ask the device to answer `challenge` and reduce the answer to a 32-byte response key.
pub fn response_key(
    kind: ChallengeKind,
    credential_id: &[u8],
    public_key: &[u8],
    challenge: &[u8; 32],
    device: &dyn Authenticator,
) -> FactorResult<[u8; 32]> {
    match kind {
        ChallengeKind::Passkey => {
            let r = device.respond(AuthRequest::Prf {
                credential_id,
                challenge,
            })?;
            r.try_into().map_err(|_| FactorError::MalformedResponse)
        }
        ChallengeKind::Proximity => {
            let r = device.respond(AuthRequest::Tag { challenge })?;
            r.try_into().map_err(|_| FactorError::MalformedResponse)
        }
        ChallengeKind::Sqrl | ChallengeKind::Push => {
            let r = device.respond(AuthRequest::Sign { challenge })?;
            let pk: [u8; 32] = public_key
                .try_into()
                .map_err(|_| FactorError::BadSignature)?;
            let vk = VerifyingKey::from_bytes(&pk).map_err(|_| FactorError::BadSignature)?;
            let sig = Signature::from_slice(&r).map_err(|_| FactorError::MalformedResponse)?;
            vk.verify(challenge, &sig)
                .map_err(|_| FactorError::BadSignature)?;
            Ok(sha256(&r))
        }
    }
}

fn wrap_key(rho: &[u8; 32]) -> PrpKey {
    PrpKey(hkdf32(rho, b"response-wrap"))
}

pub fn setup(
    kind: ChallengeKind,
    credential_id: Vec<u8>,
    public_key: Option<[u8; 32]>,
    device: &dyn Authenticator,
    env: &mut Env,
) -> FactorResult<(Pending, SourceKey)> {
    let public_key = public_key.map(|k| k.to_vec()).unwrap_or_default();
    if kind == ChallengeKind::Passkey && credential_id.is_empty() {
        return Err(FactorError::InvalidMaterial(
            "passkey needs a credential id".into(),
        ));
    }
    let kappa = SourceKey(env.random_32());
    let challenge = env.random_32();
    let rho = response_key(kind, &credential_id, &public_key, &challenge, device)?;
    let wrapped = prp_encrypt(&wrap_key(&rho), &kappa.0).expect("32-byte block");
    let state = ChallengeState {
        kind,
        credential_id,
        public_key,
        challenge,
        wrapped,
    };
    let fs = match kind {
        ChallengeKind::Passkey => super::FactorState::Passkey(state),
        ChallengeKind::Sqrl => super::FactorState::Sqrl(state),
        ChallengeKind::Push => super::FactorState::Push(state),
        ChallengeKind::Proximity => super::FactorState::Proximity(state),
    };
    Ok((Pending::Ready(fs), kappa))
}

pub fn derive1(s: &ChallengeState, device: &dyn Authenticator) -> FactorResult<SourceKey> {
    let rho = response_key(
        s.kind,
        &s.credential_id,
        &s.public_key,
        &s.challenge,
        device,
    )?;
    Ok(SourceKey(
        prp_decrypt(&wrap_key(&rho), &s.wrapped).expect("32-byte block"),
    ))
}

pub fn derive2(
    s: &ChallengeState,
    kappa: &SourceKey,
    device: &dyn Authenticator,
    env: &mut Env,
) -> FactorResult<ChallengeState> {
    let challenge = env.random_32();
    let rho = response_key(s.kind, &s.credential_id, &s.public_key, &challenge, device)?;
    let wrapped = prp_encrypt(&wrap_key(&rho), &kappa.0).expect("32-byte block");
    Ok(ChallengeState {
        challenge,
        wrapped,
        ..s.clone()
    })
}
