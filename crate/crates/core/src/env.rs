//! Execution context for vault operations: randomness, time, KDF bounds and
//! an optional timing-oracle client.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::oracle::OracleClient;
use crate::primitives::KdfBounds;

pub trait SecureRng: RngCore + CryptoRng + Send {}
impl<T: RngCore + CryptoRng + Send> SecureRng for T {}

pub trait Clock: Send + Sync {
    fn now_unix(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_unix(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// A settable clock shared between the parties of a test.
#[derive(Debug, Default)]
pub struct VirtualClock(AtomicU64);

impl VirtualClock {
    pub fn new(unix: u64) -> Arc<VirtualClock> {
        Arc::new(VirtualClock(AtomicU64::new(unix)))
    }

    pub fn set(&self, unix: u64) {
        self.0.store(unix, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_unix(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

pub struct Env {
    rng: Box<dyn SecureRng>,
    clock: Arc<dyn Clock>,
    oracle: Option<Arc<dyn OracleClient>>,
    pub bounds: KdfBounds,
}

impl Env {
    /// OS randomness, the system clock and production KDF bounds.
    pub fn system() -> Env {
        Env {
            rng: Box::new(OsRng),
            clock: Arc::new(SystemClock),
            oracle: None,
            bounds: KdfBounds::default(),
        }
    }

    /// Deterministic ChaCha20 randomness, a virtual clock at 0 and testing bounds.
    pub fn seeded(seed: u64) -> Env {
        Env::from_seed_bytes(ChaCha20Rng::seed_from_u64(seed).get_seed())
    }

    pub fn from_seed_bytes(seed: [u8; 32]) -> Env {
        Env {
            rng: Box::new(ChaCha20Rng::from_seed(seed)),
            clock: VirtualClock::new(0),
            oracle: None,
            bounds: KdfBounds::testing(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Env {
        self.clock = clock;
        self
    }

    pub fn with_oracle(mut self, oracle: Arc<dyn OracleClient>) -> Env {
        self.oracle = Some(oracle);
        self
    }

    pub fn with_bounds(mut self, bounds: KdfBounds) -> Env {
        self.bounds = bounds;
        self
    }

    pub fn set_oracle(&mut self, oracle: Option<Arc<dyn OracleClient>>) {
        self.oracle = oracle;
    }

    pub fn rng(&mut self) -> &mut dyn SecureRng {
        self.rng.as_mut()
    }

    pub fn now(&self) -> u64 {
        self.clock.now_unix()
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.clock.clone()
    }

    pub fn oracle(&self) -> Option<&Arc<dyn OracleClient>> {
        self.oracle.as_ref()
    }

    pub fn random_32(&mut self) -> [u8; 32] {
        let mut b = [0u8; 32];
        self.rng.fill_bytes(&mut b);
        b
    }
}
