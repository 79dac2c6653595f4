mod common;

use std::collections::BTreeMap;

use common::{opts, OTP_SECRET};
use mfkdf2::factors::otp::{hotp_code, totp_code, HotpConfig, TotpConfig};
use mfkdf2::modes::mfchf2::{self, CredentialRecord, Verdict};
use mfkdf2::modes::mfdpg2::{self, CharClass, CurveOrder, SitePasswordSpec};
use mfkdf2::{DerivedKey, Env, FactorMaterial, FactorSpec, Witness, Witnesses};
use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi2_passes(counts: &[u64], alpha: f64) -> bool {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let crit = ChiSquared::new((counts.len() - 1) as f64)
        .unwrap()
        .inverse_cdf(1.0 - alpha);
    stat < crit
}

fn keys(seed: u64, n: usize) -> Vec<DerivedKey> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut k = [0u8; 32];
            rng.fill_bytes(&mut k);
            DerivedKey(k)
        })
        .collect()
}

fn pw_totp() -> Vec<FactorSpec> {
    vec![
        FactorSpec::new("pw", FactorMaterial::password("hunter2")),
        FactorSpec::new(
            "totp",
            FactorMaterial::Totp(TotpConfig::new(OTP_SECRET).window(8)),
        ),
    ]
}

#[test]
fn mfchf2_accepts_the_right_pair_only() {
    let mut env = Env::seeded(1);
    let rec = mfchf2::enroll(pw_totp(), &opts(), &mut env).unwrap();
    let good = |env: &Env| {
        Witnesses::new()
            .with("pw", Witness::password("hunter2"))
            .with(
                "totp",
                Witness::Code(totp_code(OTP_SECRET, env.now(), 30, 1_000_000)),
            )
    };
    let Verdict::Accept(next) = mfchf2::verify(&rec, &good(&env), &mut env).unwrap() else {
        panic!()
    };
    assert_eq!(next.digest, rec.digest);
    assert_ne!(
        next.state.to_bytes(),
        rec.state.to_bytes(),
        "dynamic factor state advances"
    );
    let wrong_totp = Witnesses::new()
        .with("pw", Witness::password("hunter2"))
        .with(
            "totp",
            Witness::Code((totp_code(OTP_SECRET, env.now(), 30, 1_000_000) + 1) % 1_000_000),
        );
    assert!(!mfchf2::verify(&next, &wrong_totp, &mut env)
        .unwrap()
        .is_accept());
    let wrong_pw = good(&env).with("pw", Witness::password("hunter3"));
    assert!(!mfchf2::verify(&next, &wrong_pw, &mut env)
        .unwrap()
        .is_accept());
    // Unknown slot ids are usage errors, not rejections.
    assert!(mfchf2::verify(
        &next,
        &good(&env).with("nope", Witness::password("x")),
        &mut env
    )
    .is_err());
}

#[test]
fn mfchf2_record_codec_and_digest() {
    let mut env = Env::seeded(2);
    let rec = mfchf2::enroll(pw_totp(), &opts(), &mut env).unwrap();
    let bytes = rec.to_bytes();
    assert_eq!(CredentialRecord::from_bytes(&bytes).unwrap(), rec);
    assert!(CredentialRecord::from_bytes(&bytes[..31]).is_err());
    let mut forged = rec.clone();
    forged.digest[0] ^= 1;
    let w = Witnesses::new()
        .with("pw", Witness::password("hunter2"))
        .with(
            "totp",
            Witness::Code(totp_code(OTP_SECRET, env.now(), 30, 1_000_000)),
        );
    assert!(matches!(
        mfchf2::verify(&forged, &w, &mut env).unwrap(),
        Verdict::Reject
    ));
    // The stored record never contains the key itself.
    let (_, key) = mfkdf2::derive(&rec.state, &w, &mut env).unwrap();
    assert!(!bytes.windows(32).any(|win| win == key.as_bytes()));
}

/// Verify accepts exactly when derive returns the enrolled key, over a small
/// password space crossed with a small HOTP code space.
#[test]
fn mfchf2_verify_matches_derive_over_a_small_space() {
    let mut env = Env::seeded(3);
    let factors = vec![
        FactorSpec::new("pw", FactorMaterial::password("p2")),
        FactorSpec::new(
            "otp",
            FactorMaterial::Hotp(HotpConfig::new(OTP_SECRET).modulus(16)),
        ),
    ];
    let (state, key) = mfkdf2::setup_nn(factors, &opts(), &mut env).unwrap();
    let rec = CredentialRecord::new(state.clone(), &key);
    let mut accepted = Vec::new();
    for p in 0..4 {
        for c in 0..16 {
            let w = Witnesses::new()
                .with("pw", Witness::password(format!("p{p}")))
                .with("otp", Witness::Code(c));
            let v = mfchf2::verify(&rec, &w, &mut env).unwrap().is_accept();
            let d = mfkdf2::derive(&state, &w, &mut env)
                .map(|(_, k)| k == key)
                .unwrap_or(false);
            assert_eq!(v, d);
            if v {
                accepted.push((p, c));
            }
        }
    }
    assert_eq!(accepted, vec![(2, hotp_code(OTP_SECRET, 0, 16))]);
}

#[test]
fn mfdpg2_is_deterministic_and_domain_separated() {
    let ks = keys(4, 200);
    let spec = |d: &str| SitePasswordSpec::new(d, 16);
    let mut seen = std::collections::HashSet::new();
    for k in &ks {
        let a = mfdpg2::password(k, &spec("a.com")).unwrap();
        assert_eq!(a, mfdpg2::password(k, &spec("a.com")).unwrap());
        let b = mfdpg2::password(k, &spec("b.com")).unwrap();
        assert_ne!(a, b);
        assert!(seen.insert(a));
        assert_ne!(mfdpg2::site_seed(k, "a.com"), mfdpg2::site_seed(k, "b.com"));
    }
}

#[test]
fn mfdpg2_always_satisfies_required_classes() {
    let spec = SitePasswordSpec::new("example.org", 16)
        .require(CharClass::Digit)
        .require(CharClass::Upper);
    for k in keys(5, 10_000) {
        let pw = mfdpg2::password(&k, &spec).unwrap();
        assert!(spec.accepts(&pw), "{pw}");
        assert!(
            pw.chars().any(|c| c.is_ascii_digit()) && pw.chars().any(|c| c.is_ascii_uppercase())
        );
        assert_eq!(pw.chars().count(), 16);
    }
    let tight = SitePasswordSpec::new("pin", 6)
        .only(&[CharClass::Digit])
        .forbid("0");
    for k in keys(6, 1000) {
        let pw = mfdpg2::password(&k, &tight).unwrap();
        assert!(pw.chars().all(|c| ('1'..='9').contains(&c)));
    }
    let exact = SitePasswordSpec::new("x", 4)
        .require(CharClass::Lower)
        .require(CharClass::Upper)
        .require(CharClass::Digit)
        .require(CharClass::Symbol);
    for k in keys(7, 1000) {
        assert!(exact.accepts(&mfdpg2::password(&k, &exact).unwrap()));
    }
}

/// Each position is uniform over the alphabet without required classes, and
/// uniform within each class when classes are required.
#[test]
fn mfdpg2_positions_are_unbiased() {
    let free = SitePasswordSpec::new("free", 8);
    let alpha = free.alphabet();
    let mut counts = vec![vec![0u64; alpha.len()]; 8];
    let ks = keys(8, 100_000);
    for k in &ks {
        for (pos, c) in mfdpg2::password(k, &free).unwrap().chars().enumerate() {
            counts[pos][alpha.iter().position(|a| *a == c).unwrap()] += 1;
        }
    }
    for (pos, row) in counts.iter().enumerate() {
        assert!(chi2_passes(row, 1e-3), "position {pos}");
    }

    let req = SitePasswordSpec::new("req", 8)
        .require(CharClass::Digit)
        .require(CharClass::Symbol);
    let mut per: BTreeMap<(usize, CharClass), BTreeMap<char, u64>> = BTreeMap::new();
    for k in &ks {
        for (pos, c) in mfdpg2::password(k, &req).unwrap().chars().enumerate() {
            let class = CharClass::ALL
                .into_iter()
                .find(|cl| cl.contains(c))
                .unwrap();
            *per.entry((pos, class)).or_default().entry(c).or_default() += 1;
        }
    }
    for ((pos, class), m) in per {
        let row: Vec<u64> = class
            .chars()
            .chars()
            .map(|c| *m.get(&c).unwrap_or(&0))
            .collect();
        assert!(chi2_passes(&row, 1e-3), "position {pos} class {class:?}");
    }
}

#[test]
fn passkey_on_secp256r1_is_in_range_and_deterministic() {
    let curve = CurveOrder::secp256r1();
    let one = BigUint::from(1u8);
    let mut rejections = 0;
    for k in keys(9, 100_000) {
        let d = mfdpg2::passkey(&k, &curve).unwrap();
        assert!(d.scalar >= one && &d.scalar < curve.value());
        rejections += d.attempts - 1;
    }
    // Per-candidate rejection probability is about 2^-32.
    assert_eq!(rejections, 0);
    let k = DerivedKey([3; 32]);
    assert_eq!(
        mfdpg2::passkey(&k, &curve).unwrap(),
        mfdpg2::passkey(&k, &curve).unwrap()
    );
    assert_eq!(mfdpg2::passkey(&k, &curve).unwrap().to_bytes_be().len(), 32);
}

#[test]
fn passkey_toy_modulus_rate_and_uniformity() {
    let n = (BigUint::from(3u8) << 254usize) as BigUint;
    let curve = CurveOrder::new(n.clone()).unwrap();
    let ks = keys(10, 10_000);
    let mut first = 0usize;
    let mut u: Vec<f64> = Vec::with_capacity(ks.len());
    let scale = 2f64.powi(-254) / 3.0;
    for k in &ks {
        let d = mfdpg2::passkey(k, &curve).unwrap();
        assert!(d.scalar >= BigUint::from(1u8) && d.scalar < n);
        if d.attempts == 1 {
            first += 1;
        }
        let top = (&d.scalar >> 192usize)
            .to_u64_digits()
            .first()
            .copied()
            .unwrap_or(0) as f64;
        u.push(top * 2f64.powi(192) * scale);
    }
    let rate = first as f64 / ks.len() as f64;
    assert!((rate - 0.75).abs() <= 0.02 * 0.75, "rate {rate}");
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = u.len() as f64;
    let ks_stat = u
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            ((i as f64 + 1.0) / m - x)
                .abs()
                .max((x - i as f64 / m).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov critical value at alpha = 0.001.
    assert!(ks_stat < 1.949 / m.sqrt(), "KS {ks_stat}");
}

#[test]
fn passkey_cap_is_a_hard_failure() {
    let curve = CurveOrder::new(BigUint::from(2u8)).unwrap();
    assert!(mfdpg2::passkey(&DerivedKey([1; 32]), &curve).is_err());
    assert!(CurveOrder::new(BigUint::from(1u8)).is_err());
}
