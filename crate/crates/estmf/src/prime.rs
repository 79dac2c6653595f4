//! Shamir sharing over the prime field p = 2^256 + 297, with each share
//! written as a 33-byte big-endian integer. The encoding leaves the top byte
//! almost always zero; this is the byte bias the share-format game measures.

use num_bigint::{BigInt, BigUint, Sign};
use rand::RngCore;

pub const SHARE_LEN: usize = 33;

pub fn modulus() -> BigUint {
    (BigUint::from(1u8) << 256usize) + BigUint::from(297u32)
}

fn encode(v: &BigUint) -> Vec<u8> {
    let b = v.to_bytes_be();
    let mut out = vec![0u8; SHARE_LEN];
    out[SHARE_LEN - b.len()..].copy_from_slice(&b);
    out
}

pub fn share(secret: &[u8; 32], t: usize, n: usize, rng: &mut dyn RngCore) -> Vec<(u8, Vec<u8>)> {
    assert!(1 <= t && t <= n && n <= 255);
    let p = modulus();
    let mut coeffs = vec![BigUint::from_bytes_be(secret)];
    for _ in 1..t {
        let mut r = [0u8; 40];
        rng.fill_bytes(&mut r);
        coeffs.push(BigUint::from_bytes_be(&r) % &p);
    }
    (1..=n as u32)
        .map(|x| {
            let xb = BigUint::from(x);
            let y = coeffs
                .iter()
                .rev()
                .fold(BigUint::from(0u8), |acc, c| (acc * &xb + c) % &p);
            (x as u8, encode(&y))
        })
        .collect()
}

/// Interpolate at zero; the result is reduced to 32 bytes.
pub fn combine(shares: &[(u8, Vec<u8>)]) -> [u8; 32] {
    let p = BigInt::from_biguint(Sign::Plus, modulus());
    let norm = |v: BigInt| ((v % &p) + &p) % &p;
    let mut acc = BigInt::from(0);
    for (i, (xi, yi)) in shares.iter().enumerate() {
        let mut num = BigInt::from(1);
        let mut den = BigInt::from(1);
        for (j, (xj, _)) in shares.iter().enumerate() {
            if i != j {
                num = norm(num * -BigInt::from(*xj));
                den = norm(den * (BigInt::from(*xi) - BigInt::from(*xj)));
            }
        }
        let inv = den.modpow(&(&p - BigInt::from(2)), &p);
        let y = BigInt::from_bytes_be(Sign::Plus, yi);
        acc = norm(acc + y * num * inv);
    }
    let b = acc.to_biguint().unwrap().to_bytes_be();
    let mut out = [0u8; 32];
    let take = b.len().min(32);
    out[32 - take..].copy_from_slice(&b[b.len() - take..]);
    out
}
