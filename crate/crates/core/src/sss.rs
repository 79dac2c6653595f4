//! Bytewise (t, n) Shamir secret sharing over GF(256).
//!
//! Each secret byte gets its own random polynomial of degree t-1. Share `i`
//! is the evaluation of every polynomial at x = i, with indices 1..=n.
//! Only interpolation at zero is exposed.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::gf256::{eval_poly, FieldElement};

pub const MAX_SHARES: usize = 255;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SssError {
    #[error("threshold must satisfy 1 <= t <= n (t = {t}, n = {n})")]
    InvalidThreshold { t: usize, n: usize },
    #[error("at most 255 shares are supported (requested {0})")]
    TooManyShares(usize),
    #[error("share index 0 is reserved for the secret")]
    ZeroIndex,
    #[error("duplicate share index {0}")]
    DuplicateIndex(u8),
    #[error("need at least {needed} shares, got {got}")]
    NotEnoughShares { needed: usize, got: usize },
    #[error("shares have inconsistent lengths")]
    LengthMismatch,
    #[error("secret must not be empty")]
    EmptySecret,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Share {
    pub index: u8,
    pub bytes: Vec<u8>,
}

impl std::fmt::Debug for Share {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Share")
            .field("index", &self.index)
            .field("len", &self.bytes.len())
            .finish()
    }
}

pub fn share<R: RngCore + CryptoRng + ?Sized>(
    secret: &[u8],
    t: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Share>, SssError> {
    if n > MAX_SHARES {
        return Err(SssError::TooManyShares(n));
    }
    if t == 0 || t > n {
        return Err(SssError::InvalidThreshold { t, n });
    }
    if secret.is_empty() {
        return Err(SssError::EmptySecret);
    }

    let mut shares: Vec<Share> = (1..=n)
        .map(|i| Share {
            index: i as u8,
            bytes: Vec::with_capacity(secret.len()),
        })
        .collect();
    let mut coeffs = vec![FieldElement::ZERO; t];
    let mut random = vec![0u8; t - 1];
    for &byte in secret {
        rng.fill_bytes(&mut random);
        coeffs[0] = FieldElement(byte);
        for (c, r) in coeffs[1..].iter_mut().zip(&random) {
            *c = FieldElement(*r);
        }
        for s in shares.iter_mut() {
            s.bytes.push(eval_poly(&coeffs, FieldElement(s.index)).0);
        }
    }
    Ok(shares)
}

/// Lagrange interpolation at x = 0. Uses every supplied share; with honest
/// shares any subset of size >= t gives the same answer.
pub fn combine(shares: &[Share], t: usize) -> Result<Vec<u8>, SssError> {
    if t == 0 {
        return Err(SssError::InvalidThreshold { t, n: shares.len() });
    }
    if shares.len() < t {
        return Err(SssError::NotEnoughShares {
            needed: t,
            got: shares.len(),
        });
    }
    if shares.len() > MAX_SHARES {
        return Err(SssError::TooManyShares(shares.len()));
    }
    let len = shares[0].bytes.len();
    let mut seen = [false; 256];
    for s in shares {
        if s.index == 0 {
            return Err(SssError::ZeroIndex);
        }
        if seen[s.index as usize] {
            return Err(SssError::DuplicateIndex(s.index));
        }
        seen[s.index as usize] = true;
        if s.bytes.len() != len {
            return Err(SssError::LengthMismatch);
        }
    }

    // l_j(0) = prod_{m != j} x_m / (x_m - x_j)
    let weights: Vec<FieldElement> = shares
        .iter()
        .map(|sj| {
            let xj = FieldElement(sj.index);
            let mut num = FieldElement::ONE;
            let mut den = FieldElement::ONE;
            for sm in shares {
                if sm.index != sj.index {
                    let xm = FieldElement(sm.index);
                    num *= xm;
                    den *= xm - xj;
                }
            }
            num / den
        })
        .collect();

    let mut out = vec![0u8; len];
    for (b, o) in out.iter_mut().enumerate() {
        let mut acc = FieldElement::ZERO;
        for (s, w) in shares.iter().zip(&weights) {
            acc += FieldElement(s.bytes[b]) * *w;
        }
        *o = acc.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(7)
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    #[test]
    fn threshold_one_copies_secret() {
        let secret = [0xA5u8; 32];
        let shares = share(&secret, 1, 5, &mut rng()).unwrap();
        assert_eq!(shares.len(), 5);
        for s in &shares {
            assert_eq!(s.bytes, secret);
        }
    }

    #[test]
    fn every_t_subset_reconstructs_and_smaller_do_not() {
        let mut r = rng();
        for n in 1..=6 {
            for t in 1..=n {
                let mut secret = [0u8; 32];
                r.fill_bytes(&mut secret);
                let shares = share(&secret, t, n, &mut r).unwrap();
                for k in t..=n {
                    for sub in subsets(n, k) {
                        let picked: Vec<Share> = sub.iter().map(|&i| shares[i].clone()).collect();
                        assert_eq!(
                            combine(&picked, t).unwrap(),
                            secret,
                            "n={n} t={t} sub={sub:?}"
                        );
                    }
                }
                if t >= 2 {
                    for sub in subsets(n, t - 1) {
                        let picked: Vec<Share> = sub.iter().map(|&i| shares[i].clone()).collect();
                        assert!(combine(&picked, t).is_err());
                        // Interpolating the short set as if it were enough does not land on the secret.
                        assert_ne!(combine(&picked, t - 1).unwrap(), secret);
                    }
                }
            }
        }
    }

    #[test]
    fn parameter_errors() {
        let s = [1u8; 32];
        assert_eq!(
            share(&s, 2, 256, &mut rng()),
            Err(SssError::TooManyShares(256))
        );
        assert_eq!(
            share(&s, 0, 3, &mut rng()),
            Err(SssError::InvalidThreshold { t: 0, n: 3 })
        );
        assert_eq!(
            share(&s, 4, 3, &mut rng()),
            Err(SssError::InvalidThreshold { t: 4, n: 3 })
        );
        assert!(share(&s, 255, 255, &mut rng()).is_ok());
    }

    #[test]
    fn combine_rejects_bad_sets() {
        let s = [9u8; 32];
        let shares = share(&s, 2, 3, &mut rng()).unwrap();
        let dup = vec![shares[0].clone(), shares[0].clone()];
        assert_eq!(combine(&dup, 2), Err(SssError::DuplicateIndex(1)));
        assert_eq!(
            combine(&shares[..1], 2),
            Err(SssError::NotEnoughShares { needed: 2, got: 1 })
        );
        let mut zero = shares.clone();
        zero[0].index = 0;
        assert_eq!(combine(&zero, 2), Err(SssError::ZeroIndex));
        let mut short = shares.clone();
        short[1].bytes.pop();
        assert_eq!(combine(&short, 2), Err(SssError::LengthMismatch));
    }

    #[test]
    fn corrupted_share_changes_output() {
        let mut r = rng();
        for _ in 0..200 {
            let mut secret = [0u8; 32];
            r.fill_bytes(&mut secret);
            let mut shares = share(&secret, 3, 5, &mut r).unwrap();
            let which = (r.next_u32() % 3) as usize;
            let pos = (r.next_u32() % 32) as usize;
            shares[which].bytes[pos] ^= 1 + (r.next_u32() % 255) as u8;
            assert_ne!(combine(&shares[..3], 3).unwrap(), secret);
        }
    }
}
