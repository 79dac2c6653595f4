//! One interface over MFKDF2 and the legacy construction, so that each game
//! and adversary runs unchanged against either.

use std::collections::BTreeMap;

use mfkdf2::factors::otp::{hotp_code, HotpConfig};
use mfkdf2::factors::FactorState;
use mfkdf2::primitives::{kdf, sha256_parts, DerivedKey, KdfBounds, KdfParams};
use mfkdf2::{Env, FactorMaterial, FactorSpec, PolicyState, SetupOptions, Witness, Witnesses};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::legacy::{self, LegacyError, LegacyMode, LegacyState, OTP_MODULUS};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GameFactor {
    Password(String),
    /// HOTP secret, at most 32 bytes.
    Hotp(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GameWitness {
    Password(String),
    Code(u32),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("adversary exceeded the query cap of {0}")]
    QueryCap(usize),
    #[error("setup failed: {0}")]
    Setup(String),
}

/// Why an honest operation did not complete.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Refusal {
    Rejected,
    Other(String),
}

impl From<LegacyError> for Refusal {
    fn from(e: LegacyError) -> Refusal {
        match e {
            LegacyError::Rejected | LegacyError::Insufficient => Refusal::Rejected,
            LegacyError::Invalid(m) => Refusal::Other(m),
        }
    }
}

impl From<mfkdf2::Error> for Refusal {
    fn from(e: mfkdf2::Error) -> Refusal {
        match e {
            mfkdf2::Error::DerivationFailed | mfkdf2::Error::Malformed(_) => Refusal::Rejected,
            other => Refusal::Other(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    Mfkdf2,
    Legacy(LegacyMode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    NOfN,
    Threshold(usize),
}

pub fn params() -> KdfParams {
    KdfParams::testing()
}

/// What a game client accepts: its own parameters and a little headroom.
/// A tampered cost field is refused before any memory-hard work.
pub fn client_bounds() -> KdfBounds {
    KdfBounds {
        min_memory_kib: 8,
        max_memory_kib: 64,
        min_time_cost: 1,
        max_time_cost: 4,
        max_parallelism: 4,
    }
}

/// Seeded environment with [`client_bounds`].
pub fn client_env(seed: [u8; 32]) -> Env {
    Env::from_seed_bytes(seed).with_bounds(client_bounds())
}

/// Key derivation shared by both schemes, available to adversaries too.
pub fn key_from_master(master: &[u8; 32], view: &View) -> Option<DerivedKey> {
    kdf(master, &view.salt_k, &view.kdf, &KdfBounds::testing()).ok()
}

/// Binding commitment to a key, handed to adversaries in place of the key.
pub fn commit(key: &DerivedKey) -> [u8; 32] {
    sha256_parts(&[b"estmf-commit", key.as_bytes()])
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Mfkdf2 => "mfkdf2".into(),
            Scheme::Legacy(m) => m.label(),
        }
    }

    pub fn is_legacy(&self) -> bool {
        matches!(self, Scheme::Legacy(_))
    }

    pub fn setup(
        &self,
        shape: Shape,
        factors: &[(String, GameFactor)],
        master: Option<[u8; 32]>,
        env: &mut Env,
        rng: &mut ChaCha20Rng,
    ) -> Result<(Instance, DerivedKey), GameError> {
        let err = |e: String| GameError::Setup(e);
        match self {
            Scheme::Mfkdf2 => {
                let specs: Vec<FactorSpec> = factors
                    .iter()
                    .map(|(id, f)| FactorSpec::new(id.clone(), material(f)))
                    .collect();
                let opts = SetupOptions::new(params());
                let r = match (shape, master) {
                    (Shape::NOfN, None) => mfkdf2::setup_nn(specs, &opts, env),
                    (Shape::NOfN, Some(_)) => {
                        return Err(err("n-of-n vaults derive their own master secret".into()))
                    }
                    (Shape::Threshold(t), None) => mfkdf2::setup_threshold(t, specs, &opts, env),
                    (Shape::Threshold(t), Some(m)) => {
                        mfkdf2::setup_threshold_with_secret(t, specs, m, &opts, env)
                    }
                };
                r.map(|(s, k)| (Instance::Mfkdf2(s), k))
                    .map_err(|e| err(e.to_string()))
            }
            Scheme::Legacy(mode) => {
                let t = match shape {
                    Shape::NOfN => None,
                    Shape::Threshold(t) => Some(t),
                };
                legacy::setup(*mode, t, factors, master, params(), rng)
                    .map(|(s, k)| (Instance::Legacy(s), k))
                    .map_err(|e| err(e.to_string()))
            }
        }
    }
}

fn material(f: &GameFactor) -> FactorMaterial {
    match f {
        GameFactor::Password(p) => FactorMaterial::password(p.clone()),
        GameFactor::Hotp(s) => {
            FactorMaterial::Hotp(HotpConfig::new(s.clone()).modulus(OTP_MODULUS))
        }
    }
}

/// What an adversary can read from a state, in scheme-neutral form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SlotView {
    pub id: String,
    pub salt: [u8; 32],
    pub index: u8,
    pub share: Vec<u8>,
    pub hotp: Option<HotpView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HotpView {
    pub enc_secret: Vec<u8>,
    pub counter: u64,
    pub offset: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct View {
    pub threshold: usize,
    pub salt_k: [u8; 32],
    pub kdf: KdfParams,
    pub slots: Vec<SlotView>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Mfkdf2(PolicyState),
    Legacy(LegacyState),
}

impl Instance {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Instance::Mfkdf2(s) => s.to_bytes(),
            Instance::Legacy(s) => s.to_bytes(),
        }
    }

    pub fn view(&self) -> View {
        match self {
            Instance::Mfkdf2(s) => View {
                threshold: s.threshold as usize,
                salt_k: s.salt_k,
                kdf: s.kdf,
                slots: s
                    .slots
                    .iter()
                    .enumerate()
                    .map(|(i, sl)| SlotView {
                        id: sl.id.clone(),
                        salt: sl.salt,
                        index: i as u8 + 1,
                        share: s.shares.get(i).map(|c| c.to_vec()).unwrap_or_default(),
                        hotp: match &sl.beta {
                            FactorState::Hotp(h) => Some(HotpView {
                                enc_secret: h.enc_secret.to_vec(),
                                counter: h.counter,
                                offset: h.offset,
                            }),
                            _ => None,
                        },
                    })
                    .collect(),
            },
            Instance::Legacy(s) => View {
                threshold: s.threshold,
                salt_k: s.salt_k,
                kdf: s.kdf,
                slots: s
                    .slots
                    .iter()
                    .map(|sl| SlotView {
                        id: sl.id.clone(),
                        salt: sl.salt,
                        index: sl.index,
                        share: sl.share.clone(),
                        hotp: sl.hotp.as_ref().map(|h| HotpView {
                            enc_secret: h.enc_secret.clone(),
                            counter: h.counter,
                            offset: h.offset,
                        }),
                    })
                    .collect(),
            },
        }
    }

    /// Witnesses an honest client holding `factors` would present for `slots`.
    pub fn honest_witnesses(
        &self,
        factors: &[(String, GameFactor)],
        slots: &[usize],
    ) -> BTreeMap<String, GameWitness> {
        let view = self.view();
        slots
            .iter()
            .map(|&i| {
                let (id, f) = &factors[i];
                let w = match f {
                    GameFactor::Password(p) => GameWitness::Password(p.clone()),
                    GameFactor::Hotp(secret) => {
                        let counter = view
                            .slots
                            .iter()
                            .find(|s| &s.id == id)
                            .and_then(|s| s.hotp.as_ref())
                            .map_or(0, |h| h.counter);
                        GameWitness::Code(hotp_code(secret, counter, OTP_MODULUS))
                    }
                };
                (id.clone(), w)
            })
            .collect()
    }

    pub fn derive(
        &self,
        w: &BTreeMap<String, GameWitness>,
        env: &mut Env,
    ) -> Result<(Instance, DerivedKey), Refusal> {
        match self {
            Instance::Mfkdf2(s) => {
                let (next, key) = mfkdf2::derive(s, &to_witnesses(w), env)?;
                Ok((Instance::Mfkdf2(next), key))
            }
            Instance::Legacy(s) => {
                let (next, key) = legacy::derive(s, w)?;
                Ok((Instance::Legacy(next), key))
            }
        }
    }

    pub fn recover(
        &self,
        w: &BTreeMap<String, GameWitness>,
        slot: &str,
        factor: &GameFactor,
        env: &mut Env,
        rng: &mut ChaCha20Rng,
    ) -> Result<Instance, Refusal> {
        match self {
            Instance::Mfkdf2(s) => Ok(Instance::Mfkdf2(mfkdf2::recover(
                s,
                &to_witnesses(w),
                slot,
                material(factor),
                env,
            )?)),
            Instance::Legacy(s) => Ok(Instance::Legacy(legacy::recover(s, w, slot, factor, rng)?)),
        }
    }

    /// Overwrite the stored threshold without touching anything else.
    pub fn set_threshold(&mut self, t: usize) {
        match self {
            Instance::Mfkdf2(s) => s.threshold = t as u8,
            Instance::Legacy(s) => s.threshold = t,
        }
    }

    pub fn factors_needed(&self) -> usize {
        match self {
            Instance::Mfkdf2(s) => s.threshold as usize,
            Instance::Legacy(s) => s.factors_needed(),
        }
    }
}

fn to_witnesses(w: &BTreeMap<String, GameWitness>) -> Witnesses {
    let mut out = Witnesses::new();
    for (id, wit) in w {
        out.insert(
            id.clone(),
            match wit {
                GameWitness::Password(p) => Witness::password(p.clone()),
                GameWitness::Code(c) => Witness::Code(*c),
            },
        );
    }
    out
}

impl Instance {
    /// Whether `key` authenticates the state. A legacy state without a MAC
    /// authenticates under any key.
    pub fn tag_valid(&self, key: &DerivedKey) -> bool {
        match self {
            Instance::Mfkdf2(s) => s.verify(key),
            Instance::Legacy(s) => match &s.tag {
                Some(t) => mfkdf2::primitives::ct_eq(
                    t,
                    &mfkdf2::primitives::hmac_sha256(key.as_bytes(), &s.encode_body()),
                ),
                None => true,
            },
        }
    }
}
