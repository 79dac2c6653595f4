//! The challenger side of the interaction game and the built-in adversaries.
//!
//! Adversaries get full read access to every state, may ask the honest client
//! to derive with a chosen subset of factors, and may overwrite the state
//! between operations. Each interaction counts against the query cap.

use mfkdf2::factors::otp::{hotp_code, otp_kappa};
use mfkdf2::primitives::{prp_decrypt, sha256, DerivedKey};
use mfkdf2::{slot_share_key, Env, SourceKey};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::legacy::{self, OTP_MODULUS};
use crate::scheme::{commit, key_from_master, GameError, GameFactor, Instance, Scheme, View};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Query {
    Derive { slots: Vec<usize>, accepted: bool },
    Tamper { note: String },
}

/// Everything needed to replay one trial: the seed and the observed stream.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GameTranscript {
    pub seed: String,
    pub states: Vec<String>,
    pub queries: Vec<Query>,
    pub b: u8,
    pub guess: u8,
}

pub struct Challenger {
    factors: Vec<(String, GameFactor)>,
    instance: Instance,
    env: Env,
    cap: usize,
    pub transcript: GameTranscript,
}

impl Challenger {
    pub fn new(
        factors: Vec<(String, GameFactor)>,
        instance: Instance,
        env: Env,
        cap: usize,
        seed: &[u8; 32],
    ) -> Challenger {
        let transcript = GameTranscript {
            seed: hex::encode(seed),
            states: vec![hex::encode(instance.to_bytes())],
            ..Default::default()
        };
        Challenger {
            factors,
            instance,
            env,
            cap,
            transcript,
        }
    }

    pub fn view(&self) -> View {
        self.instance.view()
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn slot_count(&self) -> usize {
        self.factors.len()
    }

    pub fn queries_left(&self) -> usize {
        self.cap - self.transcript.queries.len()
    }

    fn charge(&self) -> Result<(), GameError> {
        if self.transcript.queries.len() >= self.cap {
            return Err(GameError::QueryCap(self.cap));
        }
        Ok(())
    }

    /// The honest client derives with its factors for `slots`. On success the
    /// client's new state replaces the stored one.
    pub fn derive(&mut self, slots: &[usize]) -> Result<bool, GameError> {
        self.charge()?;
        let w = self.instance.honest_witnesses(&self.factors, slots);
        let accepted = match self.instance.derive(&w, &mut self.env) {
            Ok((next, _)) => {
                self.instance = next;
                self.transcript
                    .states
                    .push(hex::encode(self.instance.to_bytes()));
                true
            }
            Err(_) => false,
        };
        self.transcript.queries.push(Query::Derive {
            slots: slots.to_vec(),
            accepted,
        });
        Ok(accepted)
    }

    /// Replace the stored state with a modified copy.
    pub fn tamper(&mut self, note: &str, f: impl FnOnce(&mut Instance)) -> Result<(), GameError> {
        self.charge()?;
        f(&mut self.instance);
        self.transcript
            .queries
            .push(Query::Tamper { note: note.into() });
        self.transcript
            .states
            .push(hex::encode(self.instance.to_bytes()));
        Ok(())
    }
}

/// What the MSI adversary is told: the compromised factors and commitments
/// to the two candidate keys.
pub struct MsiKnowledge {
    pub scheme: Scheme,
    pub compromised: Vec<(usize, GameFactor)>,
    pub commitments: [[u8; 32]; 2],
}

impl MsiKnowledge {
    pub fn identify(&self, key: &DerivedKey) -> Option<u8> {
        let c = commit(key);
        self.commitments
            .iter()
            .position(|x| *x == c)
            .map(|i| i as u8)
    }
}

pub trait MsiAdversary: Sync + Send {
    fn name(&self) -> &'static str;
    fn play(
        &self,
        ch: &mut Challenger,
        k: &MsiKnowledge,
        rng: &mut ChaCha20Rng,
    ) -> Result<u8, GameError>;
}

pub struct CoinFlip;

impl MsiAdversary for CoinFlip {
    fn name(&self) -> &'static str {
        "coin-flip"
    }

    fn play(
        &self,
        _: &mut Challenger,
        _: &MsiKnowledge,
        rng: &mut ChaCha20Rng,
    ) -> Result<u8, GameError> {
        Ok(rng.gen_range(0..2))
    }
}

/// Unmask a compromised HOTP secret as if it were stored as `sigma ^ K`.
pub fn xor_secret_candidates(view: &View, k: &MsiKnowledge) -> Vec<DerivedKey> {
    let mut out = Vec::new();
    for (i, f) in &k.compromised {
        if let (GameFactor::Hotp(sigma), Some(h)) =
            (f, view.slots.get(*i).and_then(|s| s.hotp.as_ref()))
        {
            if sigma.len() == 32 && h.enc_secret.len() >= 32 {
                let x: Vec<u8> = h.enc_secret.iter().zip(sigma).map(|(a, b)| a ^ b).collect();
                out.push(DerivedKey(x.try_into().unwrap()));
            }
        }
    }
    out
}

/// Source key of a compromised factor as the scheme would compute it.
pub fn compromised_kappa(view: &View, slot: usize, f: &GameFactor) -> Option<[u8; 32]> {
    match f {
        GameFactor::Password(p) => Some(sha256(p.as_bytes())),
        GameFactor::Hotp(secret) => {
            let h = view.slots.get(slot)?.hotp.as_ref()?;
            let code = hotp_code(secret, h.counter, OTP_MODULUS);
            Some(otp_kappa((code + h.offset) % OTP_MODULUS).0)
        }
    }
}

/// Unmask a slot's share under the scheme's published formula.
pub fn unmask(scheme: &Scheme, view: &View, slot: usize, kappa: &[u8; 32]) -> Option<Vec<u8>> {
    let s = view.slots.get(slot)?;
    match scheme {
        Scheme::Mfkdf2 => {
            if s.share.len() != 32 {
                return None;
            }
            prp_decrypt(&slot_share_key(&SourceKey(*kappa), &s.salt), &s.share)
                .ok()
                .map(|b| b.to_vec())
        }
        Scheme::Legacy(mode) => legacy::unmask_share(mode, kappa, &s.salt, &s.share).ok(),
    }
}

/// Treat each compromised share as a 1-of-n share: the master secret itself.
pub fn single_share_candidates(view: &View, k: &MsiKnowledge) -> Vec<DerivedKey> {
    let mut out = Vec::new();
    for (i, f) in &k.compromised {
        let Some(kappa) = compromised_kappa(view, *i, f) else {
            continue;
        };
        let Some(s) = unmask(&k.scheme, view, *i, &kappa) else {
            continue;
        };
        if s.len() < 32 {
            continue;
        }
        let m: [u8; 32] = s[s.len() - 32..].try_into().unwrap();
        if let Some(key) = key_from_master(&m, view) {
            out.push(key);
        }
    }
    out
}

/// Reads the current state once and applies the XOR unmasking of the HOTP secret.
pub struct HotpCompromise;

impl MsiAdversary for HotpCompromise {
    fn name(&self) -> &'static str {
        "hotp-compromise"
    }

    fn play(
        &self,
        ch: &mut Challenger,
        k: &MsiKnowledge,
        rng: &mut ChaCha20Rng,
    ) -> Result<u8, GameError> {
        let view = ch.view();
        Ok(xor_secret_candidates(&view, k)
            .iter()
            .find_map(|c| k.identify(c))
            .unwrap_or_else(|| rng.gen_range(0..2)))
    }
}

/// Spends the query budget on honest derivations over rotating factor
/// subsets, ends with one threshold-lowering tamper, and runs every built-in
/// extraction on every state it sees.
pub struct BestMsi;

impl MsiAdversary for BestMsi {
    fn name(&self) -> &'static str {
        "best"
    }

    fn play(
        &self,
        ch: &mut Challenger,
        k: &MsiKnowledge,
        rng: &mut ChaCha20Rng,
    ) -> Result<u8, GameError> {
        let try_view = |view: &View| {
            xor_secret_candidates(view, k)
                .into_iter()
                .chain(single_share_candidates(view, k))
                .find_map(|c| k.identify(&c))
        };
        if let Some(g) = try_view(&ch.view()) {
            return Ok(g);
        }
        let n = ch.slot_count();
        let mut round = 0usize;
        while ch.queries_left() > 0 {
            if ch.queries_left() == 1 {
                ch.tamper("threshold lowered to 1", |i| i.set_threshold(1))?;
            } else {
                let a = round % n;
                let b = (round + 1) % n;
                ch.derive(&[a.min(b), a.max(b)])?;
            }
            if let Some(g) = try_view(&ch.view()) {
                return Ok(g);
            }
            round += 1;
        }
        Ok(rng.gen_range(0..2))
    }
}

pub fn msi_adversary(name: &str) -> Option<Box<dyn MsiAdversary>> {
    Some(match name {
        "coin-flip" => Box::new(CoinFlip),
        "hotp-compromise" => Box::new(HotpCompromise),
        "best" => Box::new(BestMsi),
        _ => return None,
    })
}
