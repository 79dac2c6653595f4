use thiserror::Error;

use crate::factors::FactorError;
use crate::primitives::PrimitiveError;
use crate::sss::SssError;

#[derive(Debug, Error)]
pub enum Error {
    /// The single failure path for derivation: wrong witnesses and tampered
    /// state are deliberately indistinguishable.
    #[error("derivation failed")]
    DerivationFailed,
    #[error("malformed state: {0}")]
    Malformed(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported kdf algorithm id {0}")]
    UnsupportedKdf(u8),
    #[error("duplicate slot id {0:?}")]
    DuplicateSlot(String),
    #[error("unknown slot id {0:?}")]
    UnknownSlot(String),
    #[error("operation not available in {0} mode")]
    UnsupportedMode(&'static str),
    #[error("recovery needs witnesses for every retained factor; missing {0:?}")]
    RetainedFactorsMissing(Vec<String>),
    #[error("new kdf parameters are weaker than the current ones")]
    WeakerParams,
    #[error("no hint stored for slot {0:?}")]
    NoHint(String),
    #[error("envelope label {0:?} already exists")]
    DuplicateEnvelope(String),
    #[error("no envelope labelled {0:?}")]
    NoSuchEnvelope(String),
    #[error("key does not authenticate this state")]
    WrongKey,
    #[error("factor {slot:?}: {source}")]
    Factor { slot: String, source: FactorError },
    #[error(transparent)]
    Sss(#[from] SssError),
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn malformed(msg: impl Into<String>) -> Error {
        Error::Malformed(msg.into())
    }

    pub fn is_derivation_failure(&self) -> bool {
        matches!(self, Error::DerivationFailed)
    }
}
