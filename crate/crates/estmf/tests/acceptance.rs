//! One line per acceptance criterion. Runs without the libtest harness so the
//! lines always print; exits non-zero on any failure not listed in
//! `EXPECTED_FAIL`.

use std::collections::HashSet;
use std::process::ExitCode;
use std::sync::Arc;

use mfkdf2::factors::mock::MockPasskey;
use mfkdf2::factors::otp::{hotp_code, totp_code, HotpConfig, TotpConfig};
use mfkdf2::hints::check_hint_witness;
use mfkdf2::modes::mfchf2;
use mfkdf2::modes::mfdpg2::{self, CurveOrder};
use mfkdf2::oracle::{oracle_value, TimingOracle, ORACLE_MODULUS};
use mfkdf2::primitives::{sha256, DerivedKey};
use mfkdf2::{
    derive, setup_nn, setup_threshold, Env, FactorMaterial, FactorSpec, HintVerdict, KdfParams,
    PolicyState, SetupOptions, VirtualClock, Witness, Witnesses,
};
use mfkdf2_estmf::adversary::{unmask, BestMsi, HotpCompromise};
use mfkdf2_estmf::games::{self, legacy, GameConfig, SharingBackend, TamperStrategy};
use mfkdf2_estmf::scheme::{GameFactor, Shape};
use mfkdf2_estmf::stats::{chi_square_uniform, proportion_p_value};
use mfkdf2_estmf::Scheme;
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

/// Criteria that cannot be met as stated; see the README for the analysis.
const EXPECTED_FAIL: &[u32] = &[9];

const SEED: [u8; 32] = *b"acceptance-suite-fixed-seed-0001";
const ALPHA: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn opts() -> SetupOptions {
    SetupOptions::new(KdfParams::testing())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Password,
    Hotp,
    Totp,
    Passkey,
    Fuzzy,
}

const KINDS: [Kind; 5] = [
    Kind::Password,
    Kind::Hotp,
    Kind::Totp,
    Kind::Passkey,
    Kind::Fuzzy,
];

fn otp_secret(seed: u8) -> Vec<u8> {
    let mut s = b"12345678901234567890".to_vec();
    s[0] = seed;
    s
}

fn sample(seed: u8) -> Vec<u8> {
    (0..128u32)
        .map(|i| {
            (i as u8)
                .wrapping_mul(31)
                .wrapping_add(seed.wrapping_mul(97))
        })
        .collect()
}

fn material(kind: Kind, seed: u8) -> FactorMaterial {
    match kind {
        Kind::Password => FactorMaterial::password(format!("password-{seed}")),
        Kind::Hotp => FactorMaterial::Hotp(HotpConfig::new(otp_secret(seed))),
        Kind::Totp => FactorMaterial::Totp(TotpConfig::new(otp_secret(seed)).window(16)),
        Kind::Passkey => FactorMaterial::Passkey {
            credential_id: vec![seed],
            device: Arc::new(MockPasskey::new([seed; 32])),
        },
        Kind::Fuzzy => FactorMaterial::Fuzzy {
            sample: sample(seed),
            tolerance: 8,
        },
    }
}

/// Honest witness against the setup state (HOTP counter 0).
fn witness(kind: Kind, seed: u8, env: &Env) -> Witness {
    match kind {
        Kind::Password => Witness::password(format!("password-{seed}")),
        Kind::Hotp => Witness::Code(hotp_code(&otp_secret(seed), 0, 1_000_000)),
        Kind::Totp => Witness::Code(totp_code(&otp_secret(seed), env.now(), 30, 1_000_000)),
        Kind::Passkey => Witness::device(Arc::new(MockPasskey::new([seed; 32]))),
        Kind::Fuzzy => {
            let mut s = sample(seed);
            s[3] ^= 0x11;
            Witness::Sample(s)
        }
    }
}

fn wrong_witness(kind: Kind, seed: u8, env: &Env) -> Witness {
    match (kind, witness(kind, seed, env)) {
        (Kind::Password, _) => Witness::password("not it"),
        (Kind::Hotp | Kind::Totp, Witness::Code(c)) => Witness::Code((c + 1) % 1_000_000),
        (Kind::Passkey, _) => Witness::device(Arc::new(MockPasskey::new([seed ^ 0xff; 32]))),
        _ => Witness::Sample(sample(seed.wrapping_add(1))),
    }
}

/// Multisets of size `n` over the five kinds, as non-decreasing index lists.
fn mixes(n: usize) -> Vec<Vec<Kind>> {
    fn go(n: usize, from: usize, cur: &mut Vec<Kind>, out: &mut Vec<Vec<Kind>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in from..KINDS.len() {
            cur.push(KINDS[k]);
            go(n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Default)]
struct SweepTally {
    vaults: u64,
    honest: u64,
    honest_bad: u64,
    refused: u64,
    refused_bad: u64,
}

fn sweep_vault(kinds: &[Kind], t: Option<usize>, tag: u8) -> SweepTally {
    let n = kinds.len();
    let mut env = Env::from_seed_bytes(sha256(&[tag, n as u8, t.unwrap_or(0) as u8]));
    let seeds: Vec<u8> = (0..n)
        .map(|i| tag.wrapping_mul(8).wrapping_add(i as u8 + 1))
        .collect();
    let specs: Vec<FactorSpec> = kinds
        .iter()
        .zip(&seeds)
        .enumerate()
        .map(|(i, (k, s))| FactorSpec::new(format!("f{i}"), material(*k, *s)))
        .collect();
    let (state, key) = match t {
        Some(t) => setup_threshold(t, specs, &opts(), &mut env),
        None => setup_nn(specs, &opts(), &mut env),
    }
    .expect("setup");
    let need = t.unwrap_or(n);
    let mut tally = SweepTally {
        vaults: 1,
        ..Default::default()
    };
    for mask in 0u32..1 << n {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let build = |wrong: Option<usize>, env: &Env| {
            let mut w = Witnesses::new();
            for &i in &members {
                let wit = if wrong == Some(i) {
                    wrong_witness(kinds[i], seeds[i], env)
                } else {
                    witness(kinds[i], seeds[i], env)
                };
                w.insert(format!("f{i}"), wit);
            }
            w
        };
        let w = build(None, &env);
        let got = derive(&state, &w, &mut env);
        if members.len() >= need {
            tally.honest += 1;
            if !matches!(got, Ok((_, ref k)) if *k == key) {
                tally.honest_bad += 1;
            }
            for &bad in &members {
                let w = build(Some(bad), &env);
                tally.refused += 1;
                if derive(&state, &w, &mut env).is_ok() {
                    tally.refused_bad += 1;
                }
            }
        } else {
            tally.refused += 1;
            if got.is_ok() {
                tally.refused_bad += 1;
            }
        }
    }
    tally
}

fn criterion_1() -> Outcome {
    let mut jobs = Vec::new();
    for n in 1..=5 {
        for (m, kinds) in mixes(n).into_iter().enumerate() {
            jobs.push((kinds.clone(), None, m as u8));
            for t in 1..=n {
                jobs.push((kinds.clone(), Some(t), m as u8));
            }
        }
    }
    let total = jobs
        .par_iter()
        .map(|(k, t, m)| sweep_vault(k, *t, *m))
        .reduce(SweepTally::default, |a, b| SweepTally {
            vaults: a.vaults + b.vaults,
            honest: a.honest + b.honest,
            honest_bad: a.honest_bad + b.honest_bad,
            refused: a.refused + b.refused,
            refused_bad: a.refused_bad + b.refused_bad,
        });
    outcome(
    total.honest_bad == 0 && total.refused_bad == 0,
    format!(
      "{} vaults; {} satisfying subsets, {} wrong keys; {} non-satisfying or corrupted subsets, {} accepted",
      total.vaults, total.honest, total.honest_bad, total.refused, total.refused_bad
    ),
  )
}

fn criterion_2() -> Outcome {
    let sweep =
        games::run_state_integrity(Scheme::Mfkdf2, TamperStrategy::SingleByteSweep, 0, &SEED)
            .unwrap();
    let random = games::run_state_integrity(
        Scheme::Mfkdf2,
        TamperStrategy::RandomBytes { max_bytes: 8 },
        100_000,
        &SEED,
    )
    .unwrap();
    outcome(
        sweep.hits == 0 && random.hits == 0 && random.trials == 100_000,
        format!(
            "single-byte sweep {} of {} accepted; random multi-byte {} of {} accepted",
            sweep.hits, sweep.trials, random.hits, random.trials
        ),
    )
}

fn criterion_3() -> Outcome {
    let gf = games::measure_share_format_bias(SharingBackend::Gf256, 100_000, ALPHA, &SEED);
    let pf = games::measure_share_format_bias(SharingBackend::PrimeField, 100_000, ALPHA, &SEED);
    let worst = gf.positions.iter().map(|c| c.p_value).fold(1.0, f64::min);
    outcome(
        gf.uniform == Some(true) && pf.uniform == Some(false),
        format!(
            "GF(256) all {} positions pass (min p {worst:.4}); prime field fails at positions {:?}",
            gf.positions.len(),
            pf.failing
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha20Rng::from_seed(SEED);
    let mut env = Env::from_seed_bytes(SEED);
    let mut pw = "initial password".to_string();
    let factors = vec![
        ("pw".to_string(), GameFactor::Password(pw.clone())),
        (
            "otp".to_string(),
            GameFactor::Hotp(b"forward-secrecy-hotp-key".to_vec()),
        ),
        (
            "backup".to_string(),
            GameFactor::Password("backup password".into()),
        ),
    ];
    let (mut inst, key) = Scheme::Mfkdf2
        .setup(Shape::Threshold(2), &factors, None, &mut env, &mut rng)
        .unwrap();
    let mut seen: HashSet<Vec<u8>> = inst.view().slots.iter().map(|s| s.share.clone()).collect();
    let (mut reused, mut recovered, mut key_changed) = (0u64, 0u64, 0u64);
    let rounds = 1000;
    for r in 0..rounds {
        let old = inst.view();
        let mut current = factors.clone();
        current[0].1 = GameFactor::Password(pw.clone());
        let w = inst.honest_witnesses(&current, &[0, 1, 2]);
        let next_pw = format!("password #{r}");
        let next = inst
            .recover(
                &w,
                "pw",
                &GameFactor::Password(next_pw.clone()),
                &mut env,
                &mut rng,
            )
            .unwrap();
        let view = next.view();
        for s in &view.slots {
            if !seen.insert(s.share.clone()) {
                reused += 1;
            }
        }
        // The old-password holder tries both the new and the old salt against the new state.
        let truth: Vec<Vec<u8>> = (0..3)
            .filter_map(|i| {
                let k = match i {
                    0 => sha256(next_pw.as_bytes()),
                    2 => sha256(b"backup password"),
                    _ => return None,
                };
                unmask(&Scheme::Mfkdf2, &view, i, &k)
            })
            .collect();
        let old_kappa = sha256(pw.as_bytes());
        let mut salted = view.clone();
        salted.slots[0].salt = old.slots[0].salt;
        let guesses = [
            unmask(&Scheme::Mfkdf2, &view, 0, &old_kappa),
            unmask(&Scheme::Mfkdf2, &salted, 0, &old_kappa),
        ];
        if guesses.iter().flatten().any(|g| truth.contains(g)) {
            recovered += 1;
        }
        current[0].1 = GameFactor::Password(next_pw.clone());
        let check = next.honest_witnesses(&current, &[0, 2]);
        if !matches!(next.derive(&check, &mut env), Ok((_, k)) if k == key) {
            key_changed += 1;
        }
        inst = next;
        pw = next_pw;
    }
    outcome(
    reused == 0 && recovered == 0 && key_changed == 0,
    format!("{rounds} recoveries; {reused} reused ciphertexts; old factor recovered a new share {recovered} times; key lost {key_changed} times"),
  )
}

fn criterion_5() -> Outcome {
    let s = legacy(&["xor-share-encryption", "no-share-regeneration"]);
    let l = games::run_two_time_pad(s, 1000, &SEED).unwrap();
    let m = games::run_two_time_pad(Scheme::Mfkdf2, 2000, &SEED).unwrap();
    let a = m.advantage;
    outcome(
        l.pad_matches == 1000 && a.contains_zero(),
        format!(
            "legacy pad match {} of 1000; MFKDF2 advantage {:.4} in [{:.4}, {:.4}] over {} trials",
            l.pad_matches, a.estimate, a.lower, a.upper, a.trials
        ),
    )
}

fn criterion_6() -> Outcome {
    let l = games::run_fungibility(legacy(&["xor-share-combine"]), 4, 10, &SEED).unwrap();
    let m = games::run_fungibility(Scheme::Mfkdf2, 4, 10, &SEED).unwrap();
    outcome(
        l.hits == l.trials && m.hits == 0,
        format!(
            "legacy same key {} of {}; MFKDF2 same key {} of {} (n = 2..4, all permutations)",
            l.hits, l.trials, m.hits, m.trials
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = GameConfig {
        trials: 2000,
        seed: SEED,
        queries: 50,
    };
    let m = games::run_msi_game(Scheme::Mfkdf2, &BestMsi, &cfg).unwrap();
    let l = games::run_msi_game(legacy(&["xor-share-encryption"]), &HotpCompromise, &cfg).unwrap();
    outcome(
        m.upper < 0.05 && l.estimate > 0.45,
        format!(
            "MFKDF2 best adversary upper bound {:.4}; legacy HOTP compromise advantage {:.4}",
            m.upper, l.estimate
        ),
    )
}

fn criterion_8() -> Outcome {
    const HOTP: [u32; 10] = [
        755224, 287082, 359152, 969429, 338314, 254676, 287922, 162583, 399871, 520489,
    ];
    const TOTP: [(u64, u32); 6] = [
        (59, 94287082),
        (1111111109, 7081804),
        (1111111111, 14050471),
        (1234567890, 89005924),
        (2000000000, 69279037),
        (20000000000, 65353130),
    ];
    let secret = b"12345678901234567890";
    let hotp_ok = (0..10)
        .filter(|&c| hotp_code(secret, c, 1_000_000) == HOTP[c as usize])
        .count();
    let totp_ok = TOTP
        .iter()
        .filter(|(t, code)| totp_code(secret, *t, 30, 100_000_000) == *code)
        .count();
    // Oracle-backed vaults opened with the published codes at the published times.
    let mut opened = 0;
    for (i, (t, code)) in TOTP.iter().enumerate() {
        let clock = VirtualClock::new(*t);
        let oracle = Arc::new(TimingOracle::new([i as u8; 32], clock.clone()));
        let mut env = Env::from_seed_bytes([i as u8; 32])
            .with_clock(clock)
            .with_oracle(oracle);
        let totp = FactorMaterial::Totp(
            TotpConfig::new(secret.to_vec())
                .digits(8)
                .window(4)
                .with_oracle(),
        );
        let specs = vec![
            FactorSpec::new("pw", FactorMaterial::password("pw")),
            FactorSpec::new("totp", totp),
        ];
        let (state, key) = setup_nn(specs, &opts(), &mut env).unwrap();
        let w = Witnesses::new()
            .with("pw", Witness::password("pw"))
            .with("totp", Witness::Code(*code));
        if matches!(derive(&state, &w, &mut env), Ok((_, k)) if k == key) {
            opened += 1;
        }
    }
    outcome(
        hotp_ok == 10 && totp_ok == 6 && opened == 6,
        format!(
            "RFC 4226 {hotp_ok}/10; RFC 6238 {totp_ok}/6; oracle-backed vaults opened {opened}/6"
        ),
    )
}

struct Residues {
    low_p: f64,
    chi_p: f64,
}

fn residue_tests(r: &[u32]) -> Residues {
    let m = 1_000_000u32;
    let rem = ((1u64 << 31) % u64::from(m)) as u32;
    let low = r.iter().filter(|&&x| x < rem).count() as u64;
    let mut bins = vec![0u64; 1000];
    for &x in r {
        bins[(x / 1000) as usize] += 1;
    }
    Residues {
        low_p: proportion_p_value(low, r.len() as u64, f64::from(rem) / f64::from(m)),
        chi_p: chi_square_uniform(&bins).unwrap().p_value,
    }
}

fn criterion_9() -> (Outcome, bool) {
    // Stale replay: every code is replayed after the clock has moved past the skew.
    let t0 = 1_750_000_000;
    let clock = VirtualClock::new(t0);
    let oracle = Arc::new(TimingOracle::new([9; 32], clock.clone()));
    let mut env = Env::from_seed_bytes(SEED)
        .with_clock(clock.clone())
        .with_oracle(oracle);
    let secret = b"stale-replay-totp-secret".to_vec();
    let totp = FactorMaterial::Totp(TotpConfig::new(secret.clone()).window(32).with_oracle());
    let specs = vec![
        FactorSpec::new("pw", FactorMaterial::password("pw")),
        FactorSpec::new("totp", totp),
    ];
    let (mut state, key) = setup_nn(specs, &opts(), &mut env).unwrap();
    let w = |c: u32| {
        Witnesses::new()
            .with("pw", Witness::password("pw"))
            .with("totp", Witness::Code(c))
    };
    let mut rng = ChaCha20Rng::from_seed(SEED);
    let (trials, mut replayed, mut honest_failed) = (10_000u64, 0u64, 0u64);
    for _ in 0..trials {
        let code = totp_code(&secret, env.now(), 30, 1_000_000);
        let stale: PolicyState = state.clone();
        match derive(&state, &w(code), &mut env) {
            Ok((next, k)) if k == key => state = next,
            _ => honest_failed += 1,
        }
        clock.advance(30 * rng.gen_range(2..=20));
        if derive(&stale, &w(code), &mut env).is_ok() || derive(&state, &w(code), &mut env).is_ok()
        {
            replayed += 1;
        }
    }
    let replay_ok = replayed == 0 && honest_failed == 0;

    // Residues: real HOTP codes, offset by real oracle values, against raw codes.
    let n = 1_000_000u64;
    let m = 1_000_000u32;
    let pepper = [3u8; 32];
    let lk = [4u8; 32];
    let hotp_secret = b"residue-bias-hotp-secret".to_vec();
    let (offset, raw): (Vec<u32>, Vec<u32>) = (0..n)
        .into_par_iter()
        .map(|c| {
            let code = hotp_code(&hotp_secret, c, m);
            let v = oracle_value(&pepper, &lk, c) % m;
            ((code + m - v) % m, code)
        })
        .unzip();
    debug_assert_eq!(ORACLE_MODULUS % m, 0);
    let o = residue_tests(&offset);
    let r = residue_tests(&raw);
    let offset_ok = o.low_p >= ALPHA && o.chi_p >= ALPHA;
    let raw_rejected = r.low_p < ALPHA || r.chi_p < ALPHA;
    let exact = games::exact_residue_bias(m, false);
    let detail = format!(
    "stale replays {replayed} of {trials} (honest failures {honest_failed}); (code - v) low-residue p {:.3}, chi-square p {:.3}; \
     raw Truncate31 mod 10^6 low-residue p {:.3}, chi-square p {:.3} at 10^6 samples (exact TV {:.2e}, best-test advantage {:.3})",
    o.low_p,
    o.chi_p,
    r.low_p,
    r.chi_p,
    exact.tv_distance,
    exact.frequency_advantage(n)
  );
    (
        outcome(replay_ok && offset_ok && raw_rejected, detail),
        replay_ok && offset_ok,
    )
}

/// Samples at which the low-residue z statistic reaches the two-sided
/// critical value on average.
fn raw_samples_needed() -> f64 {
    let b = games::exact_residue_bias(1_000_000, false);
    let p0 = b.p_low_uniform;
    let z = 3.290_526_731_491_926;
    (z * (p0 * (1.0 - p0)).sqrt() / (b.p_low - p0)).powi(2)
}

fn criterion_10() -> Outcome {
    let mut env = Env::from_seed_bytes(SEED);
    let specs = vec![
        FactorSpec::new("pw", FactorMaterial::password("the right one")),
        FactorSpec::new("pin", FactorMaterial::password("4321")),
    ];
    let (state, _) = setup_threshold(1, specs, &opts().with_hint("pw", 7), &mut env).unwrap();
    let mut rng = ChaCha20Rng::from_seed(SEED);
    let trials = 10_000u64;
    let mut wrong_pass = 0u64;
    for _ in 0..trials {
        let guess = format!("guess-{:016x}", rng.next_u64());
        if check_hint_witness(&state, "pw", &Witness::password(guess), &mut env).unwrap()
            == HintVerdict::Plausible
        {
            wrong_pass += 1;
        }
    }
    // The right password always passes, on fresh vaults with fresh salts.
    let mut right = 0u64;
    let vaults = 1000u64;
    for i in 0..vaults {
        let pw = format!("right-{i}");
        let specs = vec![FactorSpec::new("pw", FactorMaterial::password(pw.clone()))];
        let (s, _) = setup_threshold(1, specs, &opts().with_hint("pw", 7), &mut env).unwrap();
        if check_hint_witness(&s, "pw", &Witness::password(pw), &mut env).unwrap()
            == HintVerdict::Plausible
        {
            right += 1;
        }
    }
    let rate = wrong_pass as f64 / trials as f64;
    let (lo, hi) = (0.7 / 128.0, 1.3 / 128.0);
    outcome(
    (lo..=hi).contains(&rate) && right == vaults,
    format!("wrong-password pass rate {rate:.5} in [{lo:.5}, {hi:.5}]; right password {right} of {vaults}"),
  )
}

fn criterion_11() -> Outcome {
    let toy = CurveOrder::new(BigUint::from(3u8) << 254usize).unwrap();
    let p256 = CurveOrder::secp256r1();
    let one = BigUint::from(1u8);
    let mut rng = ChaCha20Rng::from_seed(SEED);
    let keys: Vec<DerivedKey> = (0..10_000)
        .map(|_| {
            let mut k = [0u8; 32];
            rng.fill_bytes(&mut k);
            DerivedKey(k)
        })
        .collect();
    let mut attempts = 0u64;
    let mut in_range = 0u64;
    for k in &keys {
        let d = mfdpg2::passkey(k, &toy).unwrap();
        attempts += u64::from(d.attempts);
        let p = mfdpg2::passkey(k, &p256).unwrap();
        if p.scalar >= one && &p.scalar < p256.value() {
            in_range += 1;
        }
    }
    // Analytic acceptance is (n - 1) / 2^256, 3/4 up to 2^-256.
    let rate = keys.len() as f64 / attempts as f64;
    outcome(
    (rate / 0.75 - 1.0).abs() <= 0.02 && in_range == keys.len() as u64,
    format!("toy acceptance {rate:.4} against 0.75 ({attempts} candidates); secp256r1 in range {in_range} of {}", keys.len()),
  )
}

fn criterion_12() -> Outcome {
    let secret = b"toy-brute-force-otp".to_vec();
    let runs = 100u64;
    let mut rng = ChaCha20Rng::from_seed(SEED);
    let mut guesses_total = 0u64;
    let mut full_space_accepts = None;
    let mut max_guesses = 0u64;
    for run in 0..runs {
        let mut env = Env::from_seed_bytes(sha256(&run.to_be_bytes()));
        let pw = rng.gen_range(0..16u32);
        let specs = vec![
            FactorSpec::new("pw", FactorMaterial::password(format!("p{pw}"))),
            FactorSpec::new(
                "otp",
                FactorMaterial::Hotp(HotpConfig::new(secret.clone()).modulus(256)),
            ),
        ];
        let record = mfchf2::enroll(specs, &opts(), &mut env).unwrap();
        let mut space: Vec<(u32, u32)> = (0..16)
            .flat_map(|p| (0..256).map(move |c| (p, c)))
            .collect();
        space.shuffle(&mut rng);
        let verify = |p: u32, c: u32, env: &mut Env| {
            let w = Witnesses::new()
                .with("pw", Witness::password(format!("p{p}")))
                .with("otp", Witness::Code(c));
            mfchf2::verify(&record, &w, env).unwrap().is_accept()
        };
        if run == 0 {
            // Exactly one point of the 2^12 space opens the record.
            full_space_accepts = Some(
                space
                    .iter()
                    .filter(|(p, c)| verify(*p, *c, &mut env))
                    .count(),
            );
        }
        let n = space
            .iter()
            .position(|(p, c)| verify(*p, *c, &mut env))
            .expect("the true pair is in the space") as u64
            + 1;
        guesses_total += n;
        max_guesses = max_guesses.max(n);
    }
    let mean = guesses_total as f64 / runs as f64;
    // Uniform position in 4096: mean 2048.5, sd 4096 / sqrt(12); four standard errors.
    let tol = 4.0 * 4096.0 / 12f64.sqrt() / (runs as f64).sqrt();
    outcome(
    (mean - 2048.0).abs() <= tol && full_space_accepts == Some(1),
    format!(
      "mean guesses {mean:.1} over {runs} runs (2048 +/- {tol:.0}); max {max_guesses}; accepting points in the full space {}",
      full_space_accepts.unwrap_or(0)
    ),
  )
}

fn main() -> ExitCode {
    let mut unexpected = Vec::new();
    let mut report = |id: u32, o: Outcome| {
        println!(
            "criterion {id:>2}: {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass && !EXPECTED_FAIL.contains(&id) {
            unexpected.push(id);
        }
        if o.pass && EXPECTED_FAIL.contains(&id) {
            println!("criterion {id:>2}: listed as an expected failure but passed");
            unexpected.push(id);
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    let (nine, attainable_part) = criterion_9();
    report(9, nine);
    report(10, criterion_10());
    report(11, criterion_11());
    report(12, criterion_12());
    if EXPECTED_FAIL.contains(&9) {
        println!("criterion  9: expected failure; a level-{ALPHA} test of the raw bias needs about {:.1e} samples for even odds", raw_samples_needed());
    }
    if !attainable_part {
        println!("criterion  9: the replay or offset-residue part failed");
        unexpected.push(9);
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
