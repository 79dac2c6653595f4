//! OpenID Connect factor. The provider signs a compact token
//! `header.payload.signature` (base64url, EdDSA) whose payload carries the
//! issuer, subject and the current nonce. The source key is wrapped under a
//! key derived from the token signature, as for the other challenge factors.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};

use super::{
    AuthRequest, Authenticator, FactorError, FactorResult, FactorState, Pending, SourceKey,
};
use crate::codec::{Reader, Writer};
use crate::env::Env;
use crate::error::Result;
use crate::primitives::{hkdf32, prp_decrypt, prp_encrypt, sha256, PrpKey};

const HEADER: &str = r#"{"alg":"EdDSA","typ":"JWT"}"#;

#[derive(Serialize, Deserialize)]
struct Claims {
    iss: String,
    sub: String,
    nonce: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OidcState {
    pub issuer: String,
    pub subject: String,
    #[serde(with = "crate::hexser")]
    pub provider_key: [u8; 32],
    #[serde(with = "crate::hexser")]
    pub nonce: [u8; 32],
    #[serde(with = "crate::hexser")]
    pub wrapped: [u8; 32],
}

impl OidcState {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.str(&self.issuer)
            .str(&self.subject)
            .fixed(&self.provider_key)
            .fixed(&self.nonce)
            .fixed(&self.wrapped);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<OidcState> {
        Ok(OidcState {
            issuer: r.str()?,
            subject: r.str()?,
            provider_key: r.array32()?,
            nonce: r.array32()?,
            wrapped: r.array32()?,
        })
    }
}

pub fn issue_token(key: &SigningKey, issuer: &str, subject: &str, nonce: &[u8; 32]) -> String {
    let claims = Claims {
        iss: issuer.into(),
        sub: subject.into(),
        nonce: hex::encode(nonce),
    };
    let body = format!(
        "{}.{}",
        URL_SAFE_NO_PAD.encode(HEADER),
        URL_SAFE_NO_PAD.encode(serde_json::to_vec(&claims).expect("claims serialize"))
    );
    let sig = key.sign(body.as_bytes());
    format!("{body}.{}", URL_SAFE_NO_PAD.encode(sig.to_bytes()))
}

/// Check a token against the expected identity and nonce; returns the signature bytes.
pub fn verify_token(
    token: &[u8],
    provider_key: &[u8; 32],
    issuer: &str,
    subject: &str,
    nonce: &[u8; 32],
) -> FactorResult<Vec<u8>> {
    let token = std::str::from_utf8(token).map_err(|_| FactorError::MalformedResponse)?;
    let mut parts = token.split('.');
    let (Some(h), Some(p), Some(s), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(FactorError::MalformedResponse);
    };
    let header = URL_SAFE_NO_PAD
        .decode(h)
        .map_err(|_| FactorError::MalformedResponse)?;
    if header != HEADER.as_bytes() {
        return Err(FactorError::MalformedResponse);
    }
    let sig_bytes = URL_SAFE_NO_PAD
        .decode(s)
        .map_err(|_| FactorError::MalformedResponse)?;
    let sig = Signature::from_slice(&sig_bytes).map_err(|_| FactorError::MalformedResponse)?;
    let vk = VerifyingKey::from_bytes(provider_key).map_err(|_| FactorError::BadSignature)?;
    vk.verify(format!("{h}.{p}").as_bytes(), &sig)
        .map_err(|_| FactorError::BadSignature)?;
    let payload = URL_SAFE_NO_PAD
        .decode(p)
        .map_err(|_| FactorError::MalformedResponse)?;
    let claims: Claims =
        serde_json::from_slice(&payload).map_err(|_| FactorError::MalformedResponse)?;
    if claims.iss != issuer || claims.sub != subject {
        return Err(FactorError::IdentityMismatch);
    }
    if claims.nonce != hex::encode(nonce) {
        return Err(FactorError::NonceMismatch);
    }
    Ok(sig_bytes)
}

fn response_key(
    s: &OidcState,
    nonce: &[u8; 32],
    provider: &dyn Authenticator,
) -> FactorResult<PrpKey> {
    let token = provider.respond(AuthRequest::IdToken {
        issuer: &s.issuer,
        subject: &s.subject,
        nonce,
    })?;
    let sig = verify_token(&token, &s.provider_key, &s.issuer, &s.subject, nonce)?;
    Ok(PrpKey(hkdf32(&sha256(&sig), b"response-wrap")))
}

pub fn setup(
    issuer: &str,
    subject: &str,
    provider_key: &[u8; 32],
    provider: &dyn Authenticator,
    env: &mut Env,
) -> FactorResult<(Pending, SourceKey)> {
    if issuer.is_empty() || subject.is_empty() {
        return Err(FactorError::InvalidMaterial(
            "issuer and subject are required".into(),
        ));
    }
    let kappa = SourceKey(env.random_32());
    let mut s = OidcState {
        issuer: issuer.into(),
        subject: subject.into(),
        provider_key: *provider_key,
        nonce: env.random_32(),
        wrapped: [0; 32],
    };
    let k = response_key(&s, &s.nonce, provider)?;
    s.wrapped = prp_encrypt(&k, &kappa.0).expect("32-byte block");
    Ok((Pending::Ready(FactorState::Oidc(s)), kappa))
}

pub fn derive1(s: &OidcState, provider: &dyn Authenticator) -> FactorResult<SourceKey> {
    let k = response_key(s, &s.nonce, provider)?;
    Ok(SourceKey(
        prp_decrypt(&k, &s.wrapped).expect("32-byte block"),
    ))
}

pub fn derive2(
    s: &OidcState,
    kappa: &SourceKey,
    provider: &dyn Authenticator,
    env: &mut Env,
) -> FactorResult<OidcState> {
    let nonce = env.random_32();
    let k = response_key(s, &nonce, provider)?;
    Ok(OidcState {
        nonce,
        wrapped: prp_encrypt(&k, &kappa.0).expect("32-byte block"),
        ..s.clone()
    })
}
