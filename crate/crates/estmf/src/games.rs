//! The games. Every trial owns a ChaCha20 stream seeded by
//! `SHA256(master seed || trial index)`, so trials run in parallel and any
//! single one can be replayed.

use std::collections::BTreeMap;
use std::sync::Arc;

use mfkdf2::factors::otp::TotpConfig;
use mfkdf2::factors::{self, FactorCtx, FactorMaterial, FeedbackKey, Witness};
use mfkdf2::oracle::{TimingOracle, ORACLE_MODULUS};
use mfkdf2::primitives::{hkdf32, sha256, sha256_parts, DerivedKey};
use mfkdf2::{sss, Env, PolicyState, VirtualClock};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adversary::{
    compromised_kappa, unmask, Challenger, GameTranscript, MsiAdversary, MsiKnowledge,
};
use crate::legacy::{self, LegacyMode};
use crate::prime;
use crate::scheme::{
    client_env, commit, key_from_master, GameError, GameFactor, GameWitness, Instance, Scheme,
    Shape,
};
use crate::stats::{chi_square_uniform, proportion_power, Advantage, ChiSquare};

pub fn trial_seed(master: &[u8; 32], idx: u64) -> [u8; 32] {
    sha256_parts(&[master, &idx.to_be_bytes()])
}

struct Trial {
    seed: [u8; 32],
    rng: ChaCha20Rng,
    adversary: ChaCha20Rng,
    env: Env,
}

impl Trial {
    fn new(master: &[u8; 32], idx: u64) -> Trial {
        let seed = trial_seed(master, idx);
        Trial {
            seed,
            rng: ChaCha20Rng::from_seed(hkdf32(&seed, b"challenger")),
            adversary: ChaCha20Rng::from_seed(hkdf32(&seed, b"adversary")),
            env: client_env(hkdf32(&seed, b"env")),
        }
    }

    /// Separate coin streams per adversary so records from different games
    /// are not correlated through their fallback guesses.
    fn adversary_for(&mut self, name: &str) {
        self.adversary =
            ChaCha20Rng::from_seed(hkdf32(&self.seed, format!("adversary:{name}").as_bytes()));
    }

    fn bit(&mut self) -> u8 {
        self.rng.gen_range(0..2)
    }

    fn bytes32(&mut self) -> [u8; 32] {
        let mut b = [0u8; 32];
        self.rng.fill_bytes(&mut b);
        b
    }

    fn password(&mut self) -> String {
        format!("pw-{:016x}", self.rng.next_u64())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GameConfig {
    pub trials: u64,
    pub seed: [u8; 32],
    /// Query budget per trial.
    pub queries: usize,
}

fn count<F>(trials: u64, f: F) -> Result<u64, GameError>
where
    F: Fn(u64) -> Result<bool, GameError> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| f(i).map(u64::from))
        .sum()
}

fn standard_factors(t: &mut Trial) -> Vec<(String, GameFactor)> {
    vec![
        ("pw".into(), GameFactor::Password(t.password())),
        ("otp".into(), GameFactor::Hotp(t.bytes32().to_vec())),
        ("backup".into(), GameFactor::Password(t.password())),
    ]
}

fn refused(e: impl std::fmt::Debug) -> GameError {
    GameError::Setup(format!("{e:?}"))
}

/// One MSI trial on a 2-of-3 vault (password, HOTP, password) with the HOTP
/// factor compromised.
pub fn msi_trial(
    scheme: Scheme,
    adv: &dyn MsiAdversary,
    master: &[u8; 32],
    idx: u64,
    queries: usize,
) -> Result<GameTranscript, GameError> {
    let mut t = Trial::new(master, idx);
    t.adversary_for(adv.name());
    let m = [t.bytes32(), t.bytes32()];
    let b = t.bit();
    let factors = standard_factors(&mut t);
    let (inst, _) = scheme.setup(
        Shape::Threshold(2),
        &factors,
        Some(m[b as usize]),
        &mut t.env,
        &mut t.rng,
    )?;
    let view = inst.view();
    let key =
        |m: &[u8; 32]| key_from_master(m, &view).ok_or_else(|| GameError::Setup("kdf".into()));
    let k = MsiKnowledge {
        scheme,
        compromised: vec![(1, factors[1].1.clone())],
        commitments: [commit(&key(&m[0])?), commit(&key(&m[1])?)],
    };
    let mut ch = Challenger::new(factors, inst, t.env, queries, &t.seed);
    let guess = adv.play(&mut ch, &k, &mut t.adversary)?;
    ch.transcript.b = b;
    ch.transcript.guess = guess;
    Ok(ch.transcript)
}

pub fn run_msi_game(
    scheme: Scheme,
    adv: &dyn MsiAdversary,
    cfg: &GameConfig,
) -> Result<Advantage, GameError> {
    let wins = count(cfg.trials, |i| {
        msi_trial(scheme, adv, &cfg.seed, i, cfg.queries).map(|t| t.b == t.guess)
    })?;
    Ok(Advantage::from_counts(wins, cfg.trials))
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoTimePad {
    pub advantage: Advantage,
    /// Trials where `c_i ^ c_{i+1}` equalled the true `pad_i ^ pad_{i+1}`.
    pub pad_matches: u64,
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// Factor-IND-CMA with a password rotation: the adversary holds the old
/// password and must tell which of two candidate new passwords was set.
fn two_time_pad_trial(
    scheme: Scheme,
    master: &[u8; 32],
    idx: u64,
) -> Result<(bool, bool), GameError> {
    let mut t = Trial::new(master, idx);
    t.adversary_for("two-time-pad");
    let factors = standard_factors(&mut t);
    let GameFactor::Password(old) = factors[0].1.clone() else {
        unreachable!()
    };
    let (inst, _) = scheme.setup(Shape::Threshold(2), &factors, None, &mut t.env, &mut t.rng)?;
    let candidates = [t.password(), t.password()];
    let b = t.bit();
    let w = inst.honest_witnesses(&factors, &[0, 1, 2]);
    let next = inst
        .recover(
            &w,
            "pw",
            &GameFactor::Password(candidates[b as usize].clone()),
            &mut t.env,
            &mut t.rng,
        )
        .map_err(refused)?;
    let (v0, v1) = (inst.view(), next.view());
    let (c0, c1) = (&v0.slots[0].share, &v1.slots[0].share);
    let x = xor(c0, c1);
    let pad_old = legacy::pad(&sha256(old.as_bytes()), &v0.slots[0].salt, c0.len());
    let predicted: Vec<Vec<u8>> = candidates
        .iter()
        .map(|p| {
            xor(
                &pad_old,
                &legacy::pad(&sha256(p.as_bytes()), &v1.slots[0].salt, c1.len()),
            )
        })
        .collect();
    let guess = match predicted.iter().position(|p| *p == x) {
        Some(g) => g as u8,
        None => t.adversary.gen_range(0..2),
    };
    Ok((guess == b, predicted[b as usize] == x))
}

pub fn run_two_time_pad(
    scheme: Scheme,
    trials: u64,
    seed: &[u8; 32],
) -> Result<TwoTimePad, GameError> {
    let results: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| two_time_pad_trial(scheme, seed, i))
        .collect::<Result<_, _>>()?;
    let wins = results.iter().filter(|r| r.0).count() as u64;
    let pad_matches = results.iter().filter(|r| r.1).count() as u64;
    Ok(TwoTimePad {
        advantage: Advantage::from_counts(wins, trials),
        pad_matches,
    })
}

/// Factor-IND-CMA with a passive server. The challenge password sits in a
/// 3-of-3 vault next to a compromised HOTP factor; after each honest
/// derivation the adversary interpolates the compromised share with the
/// share each candidate would unmask and checks the result against the MAC.
fn passive_trial(
    scheme: Scheme,
    master: &[u8; 32],
    idx: u64,
    queries: usize,
) -> Result<bool, GameError> {
    let mut t = Trial::new(master, idx);
    t.adversary_for("passive");
    let candidates = [t.password(), t.password()];
    let b = t.bit();
    let otp = GameFactor::Hotp(t.bytes32().to_vec());
    let factors = vec![
        (
            "challenge".to_string(),
            GameFactor::Password(candidates[b as usize].clone()),
        ),
        ("otp".to_string(), otp.clone()),
        ("other".to_string(), GameFactor::Password(t.password())),
    ];
    let (inst, _) = scheme.setup(Shape::Threshold(3), &factors, None, &mut t.env, &mut t.rng)?;
    let mut ch = Challenger::new(factors, inst, t.env, queries, &t.seed);
    let check = |ch: &Challenger| -> Option<u8> {
        let view = ch.view();
        let kappa = compromised_kappa(&view, 1, &otp)?;
        let s_otp = unmask(&scheme, &view, 1, &kappa)?;
        for (x, p) in candidates.iter().enumerate() {
            let Some(s_x) = unmask(&scheme, &view, 0, &sha256(p.as_bytes())) else {
                continue;
            };
            let shares = [
                sss::Share {
                    index: view.slots[0].index,
                    bytes: s_x,
                },
                sss::Share {
                    index: view.slots[1].index,
                    bytes: s_otp.clone(),
                },
            ];
            let Ok(m) = sss::combine(&shares, 2) else {
                continue;
            };
            let Ok(m) = <[u8; 32]>::try_from(m) else {
                continue;
            };
            if key_from_master(&m, &view).is_some_and(|k| ch.instance().tag_valid(&k)) {
                return Some(x as u8);
            }
        }
        None
    };
    let mut guess = check(&ch);
    while guess.is_none() && ch.queries_left() > 0 {
        ch.derive(&[0, 1, 2])?;
        guess = check(&ch);
    }
    Ok(guess.unwrap_or_else(|| t.adversary.gen_range(0..2)) == b)
}

pub fn run_factor_ind_cma_passive(
    scheme: Scheme,
    cfg: &GameConfig,
) -> Result<Advantage, GameError> {
    let wins = count(cfg.trials, |i| {
        passive_trial(scheme, &cfg.seed, i, cfg.queries)
    })?;
    Ok(Advantage::from_counts(wins, cfg.trials))
}

/// Share of trials in which something happened.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub trials: u64,
    pub hits: u64,
    pub notes: Vec<String>,
}

impl Rate {
    pub fn value(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.hits as f64 / self.trials as f64
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every non-identity reassignment of password witnesses to slots in n-of-n
/// vaults with `2..=max_n` factors; a hit is a derivation of the setup key.
pub fn run_fungibility(
    scheme: Scheme,
    max_n: usize,
    vaults_per_n: u64,
    seed: &[u8; 32],
) -> Result<Rate, GameError> {
    let jobs: Vec<(usize, u64)> = (2..=max_n)
        .flat_map(|n| (0..vaults_per_n).map(move |v| (n, v)))
        .collect();
    let per: Vec<(u64, u64)> = jobs
        .par_iter()
        .map(|&(n, v)| {
            let mut t = Trial::new(seed, (n as u64) << 32 | v);
            let pws: Vec<String> = (0..n).map(|_| t.password()).collect();
            let factors: Vec<(String, GameFactor)> = pws
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("f{i}"), GameFactor::Password(p.clone())))
                .collect();
            let (inst, key) = scheme.setup(Shape::NOfN, &factors, None, &mut t.env, &mut t.rng)?;
            let (mut tried, mut same) = (0, 0);
            for perm in permutations(n)
                .into_iter()
                .filter(|p| p.iter().enumerate().any(|(i, &j)| i != j))
            {
                let w: BTreeMap<String, GameWitness> = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| (format!("f{i}"), GameWitness::Password(pws[j].clone())))
                    .collect();
                tried += 1;
                if matches!(inst.derive(&w, &mut t.env), Ok((_, k)) if k == key) {
                    same += 1;
                }
            }
            Ok((tried, same))
        })
        .collect::<Result<_, GameError>>()?;
    Ok(Rate {
        trials: per.iter().map(|p| p.0).sum(),
        hits: per.iter().map(|p| p.1).sum(),
        notes: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TamperStrategy {
    /// XOR 1..=max_bytes distinct bytes of the encoding with random nonzero values.
    RandomBytes {
        max_bytes: usize,
    },
    /// Every position, every nonzero XOR value; ignores the trial count.
    SingleByteSweep,
    /// Lower the stored threshold to 1 before an honest recovery.
    ShareDilution,
    NoOp,
}

fn integrity_base(
    scheme: Scheme,
    seed: &[u8; 32],
) -> Result<
    (
        Instance,
        Vec<(String, GameFactor)>,
        BTreeMap<String, GameWitness>,
    ),
    GameError,
> {
    let mut t = Trial::new(seed, u64::MAX);
    let factors = standard_factors(&mut t);
    let (inst, _) = scheme.setup(Shape::Threshold(2), &factors, None, &mut t.env, &mut t.rng)?;
    let w = inst.honest_witnesses(&factors, &[0, 1]);
    Ok((inst, factors, w))
}

fn accepts_bytes(bytes: &[u8], w: &BTreeMap<String, GameWitness>, env: &mut Env) -> bool {
    match PolicyState::from_bytes(bytes) {
        Ok(s) => Instance::Mfkdf2(s).derive(w, env).is_ok(),
        Err(_) => false,
    }
}

/// Acceptance rate of tampered states by an honest client.
pub fn run_state_integrity(
    scheme: Scheme,
    strategy: TamperStrategy,
    trials: u64,
    seed: &[u8; 32],
) -> Result<Rate, GameError> {
    let byte_level = matches!(
        strategy,
        TamperStrategy::RandomBytes { .. } | TamperStrategy::SingleByteSweep
    );
    if byte_level && scheme.is_legacy() {
        return Err(GameError::Setup(
            "byte-level tampering needs the MFKDF2 codec".into(),
        ));
    }
    match strategy {
        TamperStrategy::RandomBytes { max_bytes } => {
            let (inst, _, w) = integrity_base(scheme, seed)?;
            let bytes = inst.to_bytes();
            let hits = count(trials, |i| {
                let mut t = Trial::new(seed, i);
                let k = t.rng.gen_range(1..=max_bytes.min(bytes.len()));
                let mut b = bytes.clone();
                for pos in sample(&mut t.rng, bytes.len(), k) {
                    b[pos] ^= t.rng.gen_range(1..=255u8);
                }
                Ok(accepts_bytes(&b, &w, &mut t.env))
            })?;
            Ok(Rate {
                trials,
                hits,
                notes: vec![format!(
                    "{} byte state, up to {max_bytes} bytes changed",
                    bytes.len()
                )],
            })
        }
        TamperStrategy::SingleByteSweep => {
            let (inst, _, w) = integrity_base(scheme, seed)?;
            let bytes = inst.to_bytes();
            let total = bytes.len() as u64 * 255;
            let hits = count(total, |i| {
                let mut b = bytes.clone();
                b[(i / 255) as usize] ^= (i % 255 + 1) as u8;
                let mut env = client_env(trial_seed(seed, i));
                Ok(accepts_bytes(&b, &w, &mut env))
            })?;
            Ok(Rate {
                trials: total,
                hits,
                notes: vec![format!("{} byte state", bytes.len())],
            })
        }
        TamperStrategy::ShareDilution => {
            let results: Vec<(bool, bool)> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut t = Trial::new(seed, i);
                    let factors = standard_factors(&mut t);
                    let (mut inst, key) = scheme.setup(
                        Shape::Threshold(2),
                        &factors,
                        None,
                        &mut t.env,
                        &mut t.rng,
                    )?;
                    let w = inst.honest_witnesses(&factors, &[0, 1, 2]);
                    inst.set_threshold(1);
                    let fresh = GameFactor::Password(t.password());
                    let Ok(next) = inst.recover(&w, "pw", &fresh, &mut t.env, &mut t.rng) else {
                        return Ok((false, false));
                    };
                    let single = next.honest_witnesses(&factors, &[2]);
                    let diluted =
                        matches!(next.derive(&single, &mut t.env), Ok((_, k)) if k == key);
                    Ok((true, diluted))
                })
                .collect::<Result<_, GameError>>()?;
            let hits = results.iter().filter(|r| r.0).count() as u64;
            let diluted = results.iter().filter(|r| r.1).count();
            Ok(Rate {
        trials,
        hits,
        notes: vec![format!(
          "after acceptance the key came from a single factor in {diluted} of {trials} trials (2 of 3 needed at setup)"
        )],
      })
        }
        TamperStrategy::NoOp => {
            let (inst, _, w) = integrity_base(scheme, seed)?;
            let hits = count(trials, |i| {
                let mut env = client_env(trial_seed(seed, i));
                Ok(inst.derive(&w, &mut env).is_ok())
            })?;
            Ok(Rate {
                trials,
                hits,
                notes: Vec::new(),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SharingBackend {
    Gf256,
    PrimeField,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShareFormatReport {
    pub backend: SharingBackend,
    pub samples: u64,
    pub alpha: f64,
    pub positions: Vec<ChiSquare>,
    pub failing: Vec<usize>,
    /// None when the sample is too small for the test.
    pub uniform: Option<bool>,
}

/// Chi-square per byte position of one share of a fixed secret, over
/// `samples` independent sharings.
pub fn measure_share_format_bias(
    backend: SharingBackend,
    samples: u64,
    alpha: f64,
    seed: &[u8; 32],
) -> ShareFormatReport {
    let mut rng = ChaCha20Rng::from_seed(hkdf32(seed, b"share-format"));
    let mut secret = [0u8; 32];
    rng.fill_bytes(&mut secret);
    let len = match backend {
        SharingBackend::Gf256 => 32,
        SharingBackend::PrimeField => prime::SHARE_LEN,
    };
    let mut counts = vec![[0u64; 256]; len];
    for _ in 0..samples {
        let share = match backend {
            SharingBackend::Gf256 => {
                sss::share(&secret, 2, 3, &mut rng)
                    .expect("valid shape")
                    .swap_remove(0)
                    .bytes
            }
            SharingBackend::PrimeField => prime::share(&secret, 2, 3, &mut rng).swap_remove(0).1,
        };
        for (c, b) in counts.iter_mut().zip(&share) {
            c[*b as usize] += 1;
        }
    }
    // Expected cell counts below 5 make the chi-square approximation meaningless.
    if samples < 5 * 256 {
        return ShareFormatReport {
            backend,
            samples,
            alpha,
            positions: Vec::new(),
            failing: Vec::new(),
            uniform: None,
        };
    }
    let positions: Vec<ChiSquare> = counts
        .iter()
        .map(|c| chi_square_uniform(c).expect("nonempty"))
        .collect();
    let failing: Vec<usize> = positions
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.passes(alpha))
        .map(|(i, _)| i)
        .collect();
    let uniform = Some(failing.is_empty());
    ShareFormatReport {
        backend,
        samples,
        alpha,
        positions,
        failing,
        uniform,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KiTarget {
    StaticPassword,
    OracleTotp,
}

#[derive(Clone, Debug, Serialize)]
pub struct KiResult {
    pub advantage: Advantage,
    /// True when the two worlds produced byte-identical state streams in every
    /// trial, which makes the advantage exactly zero.
    pub identical_views: bool,
}

/// The factor's state stream with every transition computed under `key`.
/// All other randomness depends only on the trial seed.
fn ki_stream(
    target: KiTarget,
    seed: &[u8; 32],
    key: &DerivedKey,
    queries: usize,
) -> Result<Vec<Vec<u8>>, GameError> {
    let clock = VirtualClock::new(1_700_000_000);
    let oracle = Arc::new(TimingOracle::new(hkdf32(seed, b"pepper"), clock.clone()));
    let mut env = client_env(hkdf32(seed, b"env"))
        .with_clock(clock.clone())
        .with_oracle(oracle);
    let mut rng = ChaCha20Rng::from_seed(hkdf32(seed, b"schedule"));
    let salt = hkdf32(seed, b"salt");
    let fk = FeedbackKey::derive(key, &salt);
    let lk = hkdf32(seed, b"local-key");
    let slots = ["pw".to_string()];
    let ctx = FactorCtx {
        local_key: Some(&lk),
        local_key_slots: &slots,
    };
    let material = match target {
        KiTarget::StaticPassword => {
            FactorMaterial::password(hex::encode(hkdf32(seed, b"password")))
        }
        KiTarget::OracleTotp => FactorMaterial::Totp(
            TotpConfig::new(hkdf32(seed, b"secret")[..20].to_vec())
                .window(8)
                .with_oracle(),
        ),
    };
    let (pending, kappa) = factors::setup(&material, &mut env).map_err(refused)?;
    let mut state = factors::seal(pending, &kappa, &fk, &mut env, ctx).map_err(refused)?;
    let mut out = vec![state.encode()];
    for _ in 0..queries {
        clock.advance(rng.gen_range(30..=600));
        state = factors::derive2(&state, &fk, &kappa, &Witness::Code(0), &mut env, ctx)
            .map_err(refused)?;
        out.push(state.encode());
    }
    Ok(out)
}

/// Factor-KI: the adversary sees one factor's state stream under K_b plus
/// commitments to K_0 and K_1, and guesses from a hash of everything it saw.
pub fn run_factor_ki(target: KiTarget, cfg: &GameConfig) -> Result<KiResult, GameError> {
    let results: Vec<(bool, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut t = Trial::new(&cfg.seed, i);
            let keys = [DerivedKey(t.bytes32()), DerivedKey(t.bytes32())];
            let b = t.bit();
            let seen = ki_stream(target, &t.seed, &keys[b as usize], cfg.queries)?;
            let other = ki_stream(target, &t.seed, &keys[1 - b as usize], cfg.queries)?;
            let mut parts: Vec<&[u8]> = seen.iter().map(|v| v.as_slice()).collect();
            let (c0, c1) = (commit(&keys[0]), commit(&keys[1]));
            parts.push(&c0);
            parts.push(&c1);
            let guess = sha256_parts(&parts)[0] & 1;
            Ok((guess == b, seen == other))
        })
        .collect::<Result<_, GameError>>()?;
    let wins = results.iter().filter(|r| r.0).count() as u64;
    Ok(KiResult {
        advantage: Advantage::from_counts(wins, cfg.trials),
        identical_views: results.iter().all(|r| r.1),
    })
}

/// Exact distribution of OTP code residues mod `modulus`, computed by
/// counting rather than sampling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidueBias {
    pub modulus: u32,
    pub oracle: bool,
    /// Total variation distance from the uniform distribution on residues.
    pub tv_distance: f64,
    /// The residues that are over-represented: `[0, low_cells)`.
    pub low_cells: u32,
    pub p_low: f64,
    pub p_low_uniform: f64,
}

/// Raw codes are `Truncate31 mod m` for a uniform 31-bit value. With the
/// oracle the residue is `(code - v) mod m` where `v` is uniform on
/// `[0, 10^9)`; since m divides 10^9, `v mod m` is exactly uniform and so is
/// the difference, whatever the code distribution.
pub fn exact_residue_bias(modulus: u32, oracle: bool) -> ResidueBias {
    let space: u128 = 1 << 31;
    let m = u128::from(modulus);
    let q = space / m;
    let rem = space % m;
    let p_low_uniform = rem as f64 / m as f64;
    if oracle {
        assert_eq!(
            ORACLE_MODULUS % modulus,
            0,
            "oracle code space must divide 10^9"
        );
        // Each residue of v has exactly 10^9 / m preimages.
        let per_residue = u128::from(ORACLE_MODULUS / modulus);
        debug_assert_eq!(per_residue * m, u128::from(ORACLE_MODULUS));
        return ResidueBias {
            modulus,
            oracle,
            tv_distance: 0.0,
            low_cells: rem as u32,
            p_low: p_low_uniform,
            p_low_uniform,
        };
    }
    // |count/2^31 - 1/m| over a common denominator 2^31 * m.
    let hi = ((q + 1) * m).abs_diff(space) * rem;
    let lo = (q * m).abs_diff(space) * (m - rem);
    let tv_distance = (hi + lo) as f64 / (2.0 * space as f64 * m as f64);
    let p_low = (rem * (q + 1)) as f64 / space as f64;
    ResidueBias {
        modulus,
        oracle,
        tv_distance,
        low_cells: rem as u32,
        p_low,
        p_low_uniform,
    }
}

impl ResidueBias {
    /// Advantage of the best distinguisher that counts low residues over `n`
    /// samples, by the normal approximation.
    pub fn frequency_advantage(&self, n: u64) -> f64 {
        let p0 = self.p_low_uniform;
        let delta = (self.p_low - p0).abs();
        let sigma = (p0 * (1.0 - p0)).sqrt();
        Normal::standard().cdf((n as f64).sqrt() * delta / (2.0 * sigma)) - 0.5
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidueFrequency {
    pub advantage: Advantage,
    pub samples: u64,
    /// Power of a level-10^-3 test of the low-residue share at this sample size.
    pub power: f64,
}

/// Empirical version: in each trial the adversary sees `samples` residues,
/// either from the mechanism (b = 0) or uniform (b = 1), and thresholds the
/// low-residue count halfway between the two expectations. HMAC outputs are
/// modelled as uniform 31-bit values.
pub fn run_residue_frequency(
    oracle: bool,
    samples: u64,
    trials: u64,
    seed: &[u8; 32],
) -> ResidueFrequency {
    let m = 1_000_000u32;
    let bias = exact_residue_bias(m, false);
    let cut = samples as f64 * (bias.p_low_uniform + bias.p_low) / 2.0;
    let wins = count(trials, |i| {
        let mut t = Trial::new(seed, i);
        let b = t.bit();
        let mut low = 0u64;
        for _ in 0..samples {
            let r = if b == 1 {
                t.rng.gen_range(0..m)
            } else {
                let code = (t.rng.next_u32() >> 1) % m;
                if oracle {
                    let v = t.rng.gen_range(0..ORACLE_MODULUS) % m;
                    (code + m - v) % m
                } else {
                    code
                }
            };
            low += u64::from(r < bias.low_cells);
        }
        let guess = u8::from((low as f64) <= cut);
        Ok(guess == b)
    })
    .expect("infallible");
    let p1 = if oracle {
        bias.p_low_uniform
    } else {
        bias.p_low
    };
    ResidueFrequency {
        advantage: Advantage::from_counts(wins, trials),
        samples,
        power: proportion_power(bias.p_low_uniform, p1, samples, 1e-3),
    }
}

/// A fresh legacy mode with exactly one flag, or the named set.
pub fn legacy(flags: &[&str]) -> Scheme {
    Scheme::Legacy(flags.iter().fold(LegacyMode::default(), |m, f| m.with(f)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(3).len(), 6);
        let mut p = permutations(4);
        p.sort();
        p.dedup();
        assert_eq!(p.len(), 24);
    }

    #[test]
    fn exact_bias_values() {
        let raw = exact_residue_bias(1_000_000, false);
        assert_eq!(raw.low_cells, 483_648);
        assert!(
            raw.tv_distance > 1e-4 && raw.tv_distance < 2e-4,
            "{}",
            raw.tv_distance
        );
        let oracle = exact_residue_bias(1_000_000, true);
        assert_eq!(oracle.tv_distance, 0.0);
        assert_eq!(oracle.frequency_advantage(1_000_000), 0.0);
        // A power-of-two modulus divides 2^31 and has no bias at all.
        assert_eq!(exact_residue_bias(1024, false).tv_distance, 0.0);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let m = [1u8; 32];
        assert_ne!(trial_seed(&m, 0), trial_seed(&m, 1));
        assert_eq!(trial_seed(&m, 5), trial_seed(&m, 5));
    }
}
