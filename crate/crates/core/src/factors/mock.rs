//! Deterministic software authenticators for tests, simulations and the CLI.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use ed25519_dalek::{Signer, SigningKey};

use super::{oidc, AuthRequest, Authenticator, FactorError, FactorResult};
use crate::primitives::hmac_sha256;

/// PRF-capable credential: PRF(chal) = HMAC(device secret, chal).
pub struct MockPasskey {
    secret: [u8; 32],
}

impl MockPasskey {
    pub fn new(secret: [u8; 32]) -> MockPasskey {
        MockPasskey { secret }
    }
}

impl Authenticator for MockPasskey {
    fn respond(&self, request: AuthRequest<'_>) -> FactorResult<Vec<u8>> {
        match request {
            AuthRequest::Prf { challenge, .. } => Ok(hmac_sha256(&self.secret, challenge).to_vec()),
            _ => Err(FactorError::DeviceRefused("unsupported request".into())),
        }
    }
}

/// Ed25519 signing device, used for SQRL and push approval.
pub struct MockSigner {
    key: SigningKey,
}

impl MockSigner {
    pub fn from_seed(seed: [u8; 32]) -> MockSigner {
        MockSigner {
            key: SigningKey::from_bytes(&seed),
        }
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.key.verifying_key().to_bytes()
    }
}

impl Authenticator for MockSigner {
    fn respond(&self, request: AuthRequest<'_>) -> FactorResult<Vec<u8>> {
        match request {
            AuthRequest::Sign { challenge } => Ok(self.key.sign(challenge).to_bytes().to_vec()),
            _ => Err(FactorError::DeviceRefused("unsupported request".into())),
        }
    }
}

/// Proximity tag answering HMAC(tag key, chal).
pub struct MockTag {
    key: [u8; 32],
}

impl MockTag {
    pub fn new(key: [u8; 32]) -> MockTag {
        MockTag { key }
    }
}

impl Authenticator for MockTag {
    fn respond(&self, request: AuthRequest<'_>) -> FactorResult<Vec<u8>> {
        match request {
            AuthRequest::Tag { challenge } => Ok(hmac_sha256(&self.key, challenge).to_vec()),
            _ => Err(FactorError::DeviceRefused("unsupported request".into())),
        }
    }
}

/// Secure-enclave stand-in. Secrets are derived from a device master key and
/// the secret id, and released only while the gate is open.
pub struct MockEnclave {
    master: [u8; 32],
    gate: AtomicBool,
    bound: AtomicU64,
}

impl MockEnclave {
    pub fn new(master: [u8; 32]) -> MockEnclave {
        MockEnclave {
            master,
            gate: AtomicBool::new(true),
            bound: AtomicU64::new(0),
        }
    }

    pub fn set_gate(&self, open: bool) {
        self.gate.store(open, Ordering::SeqCst);
    }
}

impl Authenticator for MockEnclave {
    fn respond(&self, request: AuthRequest<'_>) -> FactorResult<Vec<u8>> {
        match request {
            AuthRequest::Bind { condition } => {
                let n = self.bound.fetch_add(1, Ordering::SeqCst);
                let mut msg = b"bind".to_vec();
                msg.extend_from_slice(&n.to_be_bytes());
                msg.extend_from_slice(condition.as_bytes());
                Ok(hmac_sha256(&self.master, &msg)[..16].to_vec())
            }
            AuthRequest::Release { secret_id } => {
                if !self.gate.load(Ordering::SeqCst) {
                    return Err(FactorError::DeviceRefused(
                        "release condition not met".into(),
                    ));
                }
                let mut msg = b"release".to_vec();
                msg.extend_from_slice(secret_id);
                Ok(hmac_sha256(&self.master, &msg).to_vec())
            }
            _ => Err(FactorError::DeviceRefused("unsupported request".into())),
        }
    }
}

/// Identity provider issuing Ed25519-signed tokens for whoever is logged in.
pub struct MockOidcProvider {
    issuer: String,
    key: SigningKey,
    subject: Mutex<String>,
}

impl MockOidcProvider {
    pub fn new(
        issuer: impl Into<String>,
        seed: [u8; 32],
        subject: impl Into<String>,
    ) -> MockOidcProvider {
        MockOidcProvider {
            issuer: issuer.into(),
            key: SigningKey::from_bytes(&seed),
            subject: Mutex::new(subject.into()),
        }
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.key.verifying_key().to_bytes()
    }

    pub fn issuer(&self) -> &str {
        &self.issuer
    }

    pub fn login_as(&self, subject: impl Into<String>) {
        *self.subject.lock().unwrap() = subject.into();
    }
}

impl Authenticator for MockOidcProvider {
    fn respond(&self, request: AuthRequest<'_>) -> FactorResult<Vec<u8>> {
        match request {
            AuthRequest::IdToken { issuer, nonce, .. } => {
                if issuer != self.issuer {
                    return Err(FactorError::DeviceRefused("unknown issuer".into()));
                }
                let sub = self.subject.lock().unwrap().clone();
                Ok(oidc::issue_token(&self.key, &self.issuer, &sub, nonce).into_bytes())
            }
            _ => Err(FactorError::DeviceRefused("unsupported request".into())),
        }
    }
}

/// Answers every request with one recorded response.
pub struct ReplayDevice {
    response: Vec<u8>,
}

impl ReplayDevice {
    pub fn new(response: Vec<u8>) -> ReplayDevice {
        ReplayDevice { response }
    }
}

impl Authenticator for ReplayDevice {
    fn respond(&self, _: AuthRequest<'_>) -> FactorResult<Vec<u8>> {
        Ok(self.response.clone())
    }
}

/// Wraps a device and counts how often it was asked.
pub struct CountingDevice<D> {
    inner: D,
    calls: AtomicU64,
}

impl<D: Authenticator> CountingDevice<D> {
    pub fn new(inner: D) -> CountingDevice<D> {
        CountingDevice {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<D: Authenticator> Authenticator for CountingDevice<D> {
    fn respond(&self, request: AuthRequest<'_>) -> FactorResult<Vec<u8>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.respond(request)
    }
}
