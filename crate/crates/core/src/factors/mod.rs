//! Factor constructions. Each exposes setup, a first derive stage that
//! recovers source key material from a witness without seeing the derived
//! key, and a second stage that updates the public state given the key.

pub mod challenge;
pub mod enclave;
pub mod fuzzy;
pub mod mock;
pub mod oidc;
pub mod otp;
pub mod password;
pub mod reed_solomon;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{Reader, Writer};
use crate::env::Env;
use crate::error::Result;
use crate::oracle::OracleError;
use crate::primitives::hkdf32;

pub use challenge::{ChallengeKind, ChallengeState};
pub use enclave::EnclaveState;
pub use fuzzy::FuzzyState;
pub use oidc::OidcState;
pub use otp::{HotpConfig, HotpState, TotpConfig, TotpState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FactorError {
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("invalid factor material: {0}")]
    InvalidMaterial(String),
    #[error("witness does not match the factor type")]
    WrongWitnessKind,
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error("witness time is outside the stored window")]
    OutsideWindow,
    #[error("authenticator refused: {0}")]
    DeviceRefused(String),
    #[error("malformed authenticator response")]
    MalformedResponse,
    #[error("signature verification failed")]
    BadSignature,
    #[error("token does not carry the current challenge")]
    NonceMismatch,
    #[error("token issuer or subject mismatch")]
    IdentityMismatch,
    #[error("sample could not be reconciled with the helper data")]
    DecodeFailed,
    #[error("timing oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("oracle-backed factor needs an oracle and a local key")]
    OracleMissing,
    #[error("malformed factor state: {0}")]
    Malformed(String),
}

pub type FactorResult<T> = std::result::Result<T, FactorError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
#[repr(u8)]
pub enum FactorType {
    Password = 1,
    Hotp = 2,
    Totp = 3,
    Passkey = 4,
    Fuzzy = 5,
    Sqrl = 6,
    Push = 7,
    Enclave = 8,
    Proximity = 9,
    Oidc = 10,
}

impl FactorType {
    pub const ALL: [FactorType; 10] = [
        FactorType::Password,
        FactorType::Hotp,
        FactorType::Totp,
        FactorType::Passkey,
        FactorType::Fuzzy,
        FactorType::Sqrl,
        FactorType::Push,
        FactorType::Enclave,
        FactorType::Proximity,
        FactorType::Oidc,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<FactorType> {
        FactorType::ALL.iter().copied().find(|t| t.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            FactorType::Password => "password",
            FactorType::Hotp => "hotp",
            FactorType::Totp => "totp",
            FactorType::Passkey => "passkey",
            FactorType::Fuzzy => "fuzzy",
            FactorType::Sqrl => "sqrl",
            FactorType::Push => "push",
            FactorType::Enclave => "enclave",
            FactorType::Proximity => "proximity",
            FactorType::Oidc => "oidc",
        }
    }

    /// Factors whose public state never changes after setup.
    pub fn is_static(self) -> bool {
        matches!(
            self,
            FactorType::Password | FactorType::Fuzzy | FactorType::Enclave
        )
    }
}

impl fmt::Display for FactorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Static source key material contributed by one factor.
#[derive(Clone, PartialEq, Eq)]
pub struct SourceKey(pub [u8; 32]);

impl fmt::Debug for SourceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SourceKey(..)")
    }
}

/// Per-slot key used by the second derive stage, bound to the derived key.
#[derive(Clone, PartialEq, Eq)]
pub struct FeedbackKey(pub [u8; 32]);

impl FeedbackKey {
    pub fn derive(key: &crate::primitives::DerivedKey, salt: &[u8; 32]) -> FeedbackKey {
        let mut info = b"key-feedback:".to_vec();
        info.extend_from_slice(salt);
        FeedbackKey(hkdf32(key.as_bytes(), &info))
    }
}

impl fmt::Debug for FeedbackKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FeedbackKey(..)")
    }
}

/// A request sent to a device or service that proves possession of a factor.
#[derive(Debug, Clone, Copy)]
pub enum AuthRequest<'a> {
    /// WebAuthn-style PRF evaluation for a credential.
    Prf {
        credential_id: &'a [u8],
        challenge: &'a [u8; 32],
    },
    /// Signature over a challenge.
    Sign { challenge: &'a [u8; 32] },
    /// Keyed tag response over a challenge.
    Tag { challenge: &'a [u8; 32] },
    /// Identity token carrying a nonce.
    IdToken {
        issuer: &'a str,
        subject: &'a str,
        nonce: &'a [u8; 32],
    },
    /// Bind a new secret to a release condition; replies with its id.
    Bind { condition: &'a str },
    /// Release a bound secret.
    Release { secret_id: &'a [u8] },
}

/// Challenge-response transport. Mocks live in [`mock`]; real transports plug in here.
pub trait Authenticator: Send + Sync {
    fn respond(&self, request: AuthRequest<'_>) -> FactorResult<Vec<u8>>;
}

#[derive(Clone)]
pub enum FactorMaterial {
    Password(String),
    Hotp(HotpConfig),
    Totp(TotpConfig),
    Passkey {
        credential_id: Vec<u8>,
        device: Arc<dyn Authenticator>,
    },
    Fuzzy {
        sample: Vec<u8>,
        tolerance: u16,
    },
    Sqrl {
        public_key: [u8; 32],
        device: Arc<dyn Authenticator>,
    },
    Push {
        public_key: [u8; 32],
        device: Arc<dyn Authenticator>,
    },
    Enclave {
        condition: String,
        device: Arc<dyn Authenticator>,
    },
    Proximity {
        device: Arc<dyn Authenticator>,
    },
    Oidc {
        issuer: String,
        subject: String,
        provider_key: [u8; 32],
        provider: Arc<dyn Authenticator>,
    },
}

impl FactorMaterial {
    pub fn password(p: impl Into<String>) -> FactorMaterial {
        FactorMaterial::Password(p.into())
    }

    pub fn factor_type(&self) -> FactorType {
        match self {
            FactorMaterial::Password(_) => FactorType::Password,
            FactorMaterial::Hotp(_) => FactorType::Hotp,
            FactorMaterial::Totp(_) => FactorType::Totp,
            FactorMaterial::Passkey { .. } => FactorType::Passkey,
            FactorMaterial::Fuzzy { .. } => FactorType::Fuzzy,
            FactorMaterial::Sqrl { .. } => FactorType::Sqrl,
            FactorMaterial::Push { .. } => FactorType::Push,
            FactorMaterial::Enclave { .. } => FactorType::Enclave,
            FactorMaterial::Proximity { .. } => FactorType::Proximity,
            FactorMaterial::Oidc { .. } => FactorType::Oidc,
        }
    }

    pub fn uses_oracle(&self) -> bool {
        matches!(self, FactorMaterial::Totp(c) if c.oracle)
    }
}

impl fmt::Debug for FactorMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FactorMaterial::{}(..)", self.factor_type())
    }
}

#[derive(Clone)]
pub enum Witness {
    Password(String),
    /// An OTP code. TOTP reads the time from the environment clock.
    Code(u32),
    Sample(Vec<u8>),
    Device(Arc<dyn Authenticator>),
}

impl Witness {
    pub fn password(p: impl Into<String>) -> Witness {
        Witness::Password(p.into())
    }

    /// Parse a decimal OTP code.
    pub fn code(s: &str) -> FactorResult<Witness> {
        if s.is_empty() || s.len() > 10 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(FactorError::InvalidWitness(
                "code must be decimal digits".into(),
            ));
        }
        s.parse::<u64>()
            .ok()
            .and_then(|v| u32::try_from(v).ok())
            .map(Witness::Code)
            .ok_or_else(|| FactorError::InvalidWitness("code out of range".into()))
    }

    pub fn device(d: Arc<dyn Authenticator>) -> Witness {
        Witness::Device(d)
    }
}

impl fmt::Debug for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            Witness::Password(_) => "Password",
            Witness::Code(_) => "Code",
            Witness::Sample(_) => "Sample",
            Witness::Device(_) => "Device",
        };
        write!(f, "Witness::{kind}(..)")
    }
}

/// Public state of a single factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FactorState {
    Password,
    Hotp(HotpState),
    Totp(TotpState),
    Passkey(ChallengeState),
    Fuzzy(FuzzyState),
    Sqrl(ChallengeState),
    Push(ChallengeState),
    Enclave(EnclaveState),
    Proximity(ChallengeState),
    Oidc(OidcState),
}

impl FactorState {
    pub fn factor_type(&self) -> FactorType {
        match self {
            FactorState::Password => FactorType::Password,
            FactorState::Hotp(_) => FactorType::Hotp,
            FactorState::Totp(_) => FactorType::Totp,
            FactorState::Passkey(_) => FactorType::Passkey,
            FactorState::Fuzzy(_) => FactorType::Fuzzy,
            FactorState::Sqrl(_) => FactorType::Sqrl,
            FactorState::Push(_) => FactorType::Push,
            FactorState::Enclave(_) => FactorType::Enclave,
            FactorState::Proximity(_) => FactorType::Proximity,
            FactorState::Oidc(_) => FactorType::Oidc,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            FactorState::Password => {}
            FactorState::Hotp(s) => s.encode(&mut w),
            FactorState::Totp(s) => s.encode(&mut w),
            FactorState::Passkey(s)
            | FactorState::Sqrl(s)
            | FactorState::Push(s)
            | FactorState::Proximity(s) => s.encode(&mut w),
            FactorState::Fuzzy(s) => s.encode(&mut w),
            FactorState::Enclave(s) => s.encode(&mut w),
            FactorState::Oidc(s) => s.encode(&mut w),
        }
        w.finish()
    }

    pub fn decode(ty: FactorType, bytes: &[u8]) -> Result<FactorState> {
        let mut r = Reader::new(bytes);
        let s = match ty {
            FactorType::Password => FactorState::Password,
            FactorType::Hotp => FactorState::Hotp(HotpState::decode(&mut r)?),
            FactorType::Totp => FactorState::Totp(TotpState::decode(&mut r)?),
            FactorType::Passkey => FactorState::Passkey(ChallengeState::decode(&mut r)?),
            FactorType::Sqrl => FactorState::Sqrl(ChallengeState::decode(&mut r)?),
            FactorType::Push => FactorState::Push(ChallengeState::decode(&mut r)?),
            FactorType::Proximity => FactorState::Proximity(ChallengeState::decode(&mut r)?),
            FactorType::Fuzzy => FactorState::Fuzzy(FuzzyState::decode(&mut r)?),
            FactorType::Enclave => FactorState::Enclave(EnclaveState::decode(&mut r)?),
            FactorType::Oidc => FactorState::Oidc(OidcState::decode(&mut r)?),
        };
        r.finish()?;
        Ok(s)
    }

    /// Slots whose source keys feed the timing-oracle local key, if any.
    pub fn oracle_dependencies(&self) -> Option<&[String]> {
        match self {
            FactorState::Totp(s) if s.oracle => Some(&s.local_key_slots),
            _ => None,
        }
    }
}

/// Output of factor setup that still needs the derived key before it can be stored.
pub enum Pending {
    Ready(FactorState),
    Hotp(otp::HotpPending),
    Totp(otp::TotpPending),
}

/// Inputs that some factors need beyond their own state.
#[derive(Clone, Copy, Default)]
pub struct FactorCtx<'a> {
    /// Local key for oracle-backed TOTP.
    pub local_key: Option<&'a [u8; 32]>,
    /// Slots that make up the local key; recorded by oracle-backed TOTP at setup.
    pub local_key_slots: &'a [String],
}

pub fn setup(material: &FactorMaterial, env: &mut Env) -> FactorResult<(Pending, SourceKey)> {
    match material {
        FactorMaterial::Password(p) => password::setup(p).map(|(s, k)| (Pending::Ready(s), k)),
        FactorMaterial::Hotp(c) => otp::hotp_setup(c, env).map(|(p, k)| (Pending::Hotp(p), k)),
        FactorMaterial::Totp(c) => otp::totp_setup(c, env).map(|(p, k)| (Pending::Totp(p), k)),
        FactorMaterial::Passkey {
            credential_id,
            device,
        } => challenge::setup(
            ChallengeKind::Passkey,
            credential_id.clone(),
            None,
            device.as_ref(),
            env,
        ),
        FactorMaterial::Sqrl { public_key, device } => challenge::setup(
            ChallengeKind::Sqrl,
            Vec::new(),
            Some(*public_key),
            device.as_ref(),
            env,
        ),
        FactorMaterial::Push { public_key, device } => challenge::setup(
            ChallengeKind::Push,
            Vec::new(),
            Some(*public_key),
            device.as_ref(),
            env,
        ),
        FactorMaterial::Proximity { device } => challenge::setup(
            ChallengeKind::Proximity,
            Vec::new(),
            None,
            device.as_ref(),
            env,
        ),
        FactorMaterial::Fuzzy { sample, tolerance } => fuzzy::setup(sample, *tolerance, env),
        FactorMaterial::Enclave { condition, device } => enclave::setup(condition, device.as_ref()),
        FactorMaterial::Oidc {
            issuer,
            subject,
            provider_key,
            provider,
        } => oidc::setup(issuer, subject, provider_key, provider.as_ref(), env),
    }
}

/// Finish setup: the first application of the second stage.
pub fn seal(
    pending: Pending,
    kappa: &SourceKey,
    fk: &FeedbackKey,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<FactorState> {
    match pending {
        Pending::Ready(s) => Ok(s),
        Pending::Hotp(p) => otp::hotp_seal(p, kappa, fk, env),
        Pending::Totp(p) => otp::totp_seal(p, kappa, fk, env, ctx),
    }
}

/// First stage: candidate source keys for a witness, most likely first.
pub fn derive1(
    state: &FactorState,
    witness: &Witness,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<Vec<SourceKey>> {
    match (state, witness) {
        (FactorState::Password, Witness::Password(p)) => password::derive1(p).map(|k| vec![k]),
        (FactorState::Hotp(s), Witness::Code(c)) => otp::hotp_derive1(s, *c).map(|k| vec![k]),
        (FactorState::Totp(s), Witness::Code(c)) => otp::totp_derive1(s, *c, env, ctx),
        (
            FactorState::Passkey(s)
            | FactorState::Sqrl(s)
            | FactorState::Push(s)
            | FactorState::Proximity(s),
            Witness::Device(d),
        ) => challenge::derive1(s, d.as_ref()).map(|k| vec![k]),
        (FactorState::Fuzzy(s), Witness::Sample(w)) => fuzzy::derive1(s, w).map(|k| vec![k]),
        (FactorState::Enclave(s), Witness::Device(d)) => {
            enclave::derive1(s, d.as_ref()).map(|k| vec![k])
        }
        (FactorState::Oidc(s), Witness::Device(d)) => oidc::derive1(s, d.as_ref()).map(|k| vec![k]),
        _ => Err(FactorError::WrongWitnessKind),
    }
}

/// Second stage: the next public state. Never returns source key material.
pub fn derive2(
    state: &FactorState,
    fk: &FeedbackKey,
    kappa: &SourceKey,
    witness: &Witness,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<FactorState> {
    match (state, witness) {
        (FactorState::Password, _) | (FactorState::Fuzzy(_), _) | (FactorState::Enclave(_), _) => {
            Ok(state.clone())
        }
        (FactorState::Hotp(s), _) => otp::hotp_derive2(s, fk, kappa, env).map(FactorState::Hotp),
        (FactorState::Totp(s), _) => {
            otp::totp_derive2(s, fk, kappa, env, ctx).map(FactorState::Totp)
        }
        (FactorState::Passkey(s), Witness::Device(d)) => {
            challenge::derive2(s, kappa, d.as_ref(), env).map(FactorState::Passkey)
        }
        (FactorState::Sqrl(s), Witness::Device(d)) => {
            challenge::derive2(s, kappa, d.as_ref(), env).map(FactorState::Sqrl)
        }
        (FactorState::Push(s), Witness::Device(d)) => {
            challenge::derive2(s, kappa, d.as_ref(), env).map(FactorState::Push)
        }
        (FactorState::Proximity(s), Witness::Device(d)) => {
            challenge::derive2(s, kappa, d.as_ref(), env).map(FactorState::Proximity)
        }
        (FactorState::Oidc(s), Witness::Device(d)) => {
            oidc::derive2(s, kappa, d.as_ref(), env).map(FactorState::Oidc)
        }
        _ => Err(FactorError::WrongWitnessKind),
    }
}

/// Move key-bound parts of a factor state from one derived key to another.
pub fn rekey(
    state: &FactorState,
    old: &FeedbackKey,
    new: &FeedbackKey,
    env: &mut Env,
) -> FactorResult<FactorState> {
    match state {
        FactorState::Hotp(s) => otp::hotp_rekey(s, old, new, env).map(FactorState::Hotp),
        FactorState::Totp(s) => otp::totp_rekey(s, old, new, env).map(FactorState::Totp),
        other => Ok(other.clone()),
    }
}

/// Re-run the oracle window for an oracle-backed TOTP under a new local key.
pub fn refresh_oracle_window(
    state: &FactorState,
    fk: &FeedbackKey,
    kappa: &SourceKey,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<FactorState> {
    match state {
        FactorState::Totp(s) if s.oracle => {
            otp::totp_derive2(s, fk, kappa, env, ctx).map(FactorState::Totp)
        }
        other => Ok(other.clone()),
    }
}
