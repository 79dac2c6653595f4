//! Stateless timing oracle for TOTP liveness.
//!
//! The oracle holds a pepper and answers `v_T` for a client local key and a
//! time step, refusing steps that are already in the past. A TOTP factor
//! folds `v_T` into its offsets, so a code observed at step T is useless once
//! the oracle stops answering for T.

pub mod http;

use std::sync::Arc;

use thiserror::Error;

use crate::env::Clock;
use crate::primitives::{hkdf32, hmac_sha256};

/// Values are uniform in `[0, 10^9)`; clients reduce mod their decimal code space.
pub const ORACLE_MODULUS: u32 = 1_000_000_000;
/// Largest multiple of the modulus not above 2^31.
const ACCEPT_BELOW: u32 = (0x8000_0000u32 / ORACLE_MODULUS) * ORACLE_MODULUS;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("step is in the past")]
    Stale,
    #[error("step is too far in the future")]
    TooFarAhead,
    #[error("malformed request")]
    BadRequest,
    #[error("oracle unreachable: {0}")]
    Unreachable(String),
}

impl OracleError {
    pub fn code(&self) -> u8 {
        match self {
            OracleError::Stale => 1,
            OracleError::TooFarAhead => 2,
            OracleError::BadRequest => 3,
            OracleError::Unreachable(_) => 4,
        }
    }

    pub fn from_code(c: u8) -> OracleError {
        match c {
            1 => OracleError::Stale,
            2 => OracleError::TooFarAhead,
            3 => OracleError::BadRequest,
            _ => OracleError::Unreachable(format!("refusal code {c}")),
        }
    }
}

pub trait OracleClient: Send + Sync {
    fn eval(&self, local_key: &[u8; 32], step: u64) -> Result<u32, OracleError>;
}

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub step_secs: u32,
    /// Steps behind the oracle clock that are still answered.
    pub skew_steps: u64,
    /// Steps ahead of the oracle clock that are answered, so clients can fill their window.
    pub horizon_steps: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            step_secs: 30,
            skew_steps: 1,
            horizon_steps: 3000,
        }
    }
}

pub struct TimingOracle {
    pepper: [u8; 32],
    clock: Arc<dyn Clock>,
    config: OracleConfig,
}

impl TimingOracle {
    pub fn new(pepper: [u8; 32], clock: Arc<dyn Clock>) -> TimingOracle {
        TimingOracle {
            pepper,
            clock,
            config: OracleConfig::default(),
        }
    }

    pub fn with_config(mut self, config: OracleConfig) -> TimingOracle {
        self.config = config;
        self
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn current_step(&self) -> u64 {
        self.clock.now_unix() / u64::from(self.config.step_secs)
    }
}

impl OracleClient for TimingOracle {
    fn eval(&self, local_key: &[u8; 32], step: u64) -> Result<u32, OracleError> {
        let now = self.current_step();
        if step + self.config.skew_steps < now {
            return Err(OracleError::Stale);
        }
        if step > now + self.config.horizon_steps {
            return Err(OracleError::TooFarAhead);
        }
        Ok(oracle_value(&self.pepper, local_key, step))
    }
}

/// `HMAC(hkdf(K_L || S_TO, "oracle"), T || i)` truncated to 31 bits, taking the
/// first counter `i` whose value lands below a multiple of the modulus.
pub fn oracle_value(pepper: &[u8; 32], local_key: &[u8; 32], step: u64) -> u32 {
    let mut ikm = [0u8; 64];
    ikm[..32].copy_from_slice(local_key);
    ikm[32..].copy_from_slice(pepper);
    let key = hkdf32(&ikm, b"oracle");
    let mut msg = [0u8; 12];
    msg[..8].copy_from_slice(&step.to_be_bytes());
    for i in 0u32.. {
        msg[8..].copy_from_slice(&i.to_be_bytes());
        let u = crate::factors::otp::truncate31(&hmac_sha256(&key, &msg));
        if u < ACCEPT_BELOW {
            return u % ORACLE_MODULUS;
        }
    }
    unreachable!("counter space exhausted")
}

/// Local key from the salted digests of the vault's static factors.
pub fn local_key(static_digests: &[[u8; 32]]) -> [u8; 32] {
    hkdf32(&static_digests.concat(), b"oracle-local-key")
}

/// An oracle that answers with unrelated values. It can break liveness but
/// learns nothing and leaks nothing.
pub struct LyingOracle {
    seed: [u8; 32],
}

impl LyingOracle {
    pub fn new(seed: [u8; 32]) -> LyingOracle {
        LyingOracle { seed }
    }
}

impl OracleClient for LyingOracle {
    fn eval(&self, local_key: &[u8; 32], step: u64) -> Result<u32, OracleError> {
        Ok(oracle_value(&self.seed, local_key, step))
    }
}

/// An oracle that is never reachable.
pub struct DownOracle;

impl OracleClient for DownOracle {
    fn eval(&self, _: &[u8; 32], _: u64) -> Result<u32, OracleError> {
        Err(OracleError::Unreachable("offline".into()))
    }
}
