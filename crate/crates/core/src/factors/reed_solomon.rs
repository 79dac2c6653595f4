//! Systematic Reed–Solomon codes over GF(256) with roots alpha^0..alpha^(2t-1).
//!
//! Byte `i` of a codeword is the coefficient of x^i. Parity occupies the low
//! `parity` positions and the message the rest. Decoding is
//! Berlekamp–Massey, Chien search, then Forney.

use crate::gf256::{eval_poly, FieldElement as F, GENERATOR};

#[derive(Clone, Debug)]
pub struct ReedSolomon {
    n: usize,
    parity: usize,
    generator: Vec<F>,
}

fn alpha_pow(e: usize) -> F {
    GENERATOR.pow((e % 255) as u32)
}

fn poly_mul(a: &[F], b: &[F]) -> Vec<F> {
    let mut out = vec![F::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn derivative(p: &[F]) -> Vec<F> {
    // Characteristic 2: only odd-degree terms survive.
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| if i % 2 == 1 { c } else { F::ZERO })
        .collect()
}

impl ReedSolomon {
    /// Codewords of `n` bytes with `parity` check bytes, correcting `parity / 2` byte errors.
    pub fn new(n: usize, parity: usize) -> Option<ReedSolomon> {
        if n > 255 || parity == 0 || parity >= n {
            return None;
        }
        let mut generator = vec![F::ONE];
        for j in 0..parity {
            generator = poly_mul(&generator, &[alpha_pow(j), F::ONE]);
        }
        Some(ReedSolomon {
            n,
            parity,
            generator,
        })
    }

    pub fn message_len(&self) -> usize {
        self.n - self.parity
    }

    pub fn correctable(&self) -> usize {
        self.parity / 2
    }

    pub fn encode(&self, message: &[u8]) -> Vec<u8> {
        assert_eq!(message.len(), self.message_len(), "message length");
        // remainder of m(x) * x^parity modulo the monic generator
        let mut rem: Vec<F> = vec![F::ZERO; self.parity];
        rem.extend(message.iter().map(|&b| F(b)));
        for i in (self.parity..self.n).rev() {
            let coef = rem[i];
            if !coef.is_zero() {
                for (j, &g) in self.generator.iter().enumerate() {
                    rem[i - self.parity + j] += coef * g;
                }
            }
        }
        let mut out = vec![0u8; self.n];
        for i in 0..self.parity {
            out[i] = rem[i].0;
        }
        out[self.parity..].copy_from_slice(message);
        out
    }

    pub fn message<'a>(&self, codeword: &'a [u8]) -> &'a [u8] {
        &codeword[self.parity..]
    }

    fn syndromes(&self, word: &[F]) -> Vec<F> {
        (0..self.parity)
            .map(|j| eval_poly(word, alpha_pow(j)))
            .collect()
    }

    /// Correct up to `parity / 2` byte errors. `None` when the word is not decodable.
    pub fn decode(&self, received: &[u8]) -> Option<Vec<u8>> {
        if received.len() != self.n {
            return None;
        }
        let mut word: Vec<F> = received.iter().map(|&b| F(b)).collect();
        let synd = self.syndromes(&word);
        if synd.iter().all(|s| s.is_zero()) {
            return Some(received.to_vec());
        }

        // Berlekamp–Massey
        let mut c = vec![F::ONE];
        let mut b = vec![F::ONE];
        let mut l = 0usize;
        let mut m = 1usize;
        let mut bb = F::ONE;
        for r in 0..self.parity {
            let mut d = synd[r];
            for i in 1..=l.min(c.len() - 1) {
                d += c[i] * synd[r - i];
            }
            if d.is_zero() {
                m += 1;
                continue;
            }
            let coef = d / bb;
            let mut next = c.clone();
            if next.len() < b.len() + m {
                next.resize(b.len() + m, F::ZERO);
            }
            for (i, &bi) in b.iter().enumerate() {
                next[i + m] += coef * bi;
            }
            if 2 * l <= r {
                b = c;
                l = r + 1 - l;
                bb = d;
                m = 1;
            } else {
                m += 1;
            }
            c = next;
        }
        while c.len() > 1 && c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        let lambda = c;
        if l > self.correctable() || lambda.len() - 1 != l {
            return None;
        }

        // Chien search over the codeword positions.
        let positions: Vec<usize> = (0..self.n)
            .filter(|&p| eval_poly(&lambda, alpha_pow(255 - p % 255)).is_zero())
            .collect();
        if positions.len() != l {
            return None;
        }

        // Forney: e = X * Omega(X^-1) / Lambda'(X^-1)
        let mut omega = poly_mul(&synd, &lambda);
        omega.truncate(self.parity);
        let dlambda = derivative(&lambda);
        for &p in &positions {
            let x = alpha_pow(p);
            let xinv = alpha_pow(255 - p % 255);
            let den = eval_poly(&dlambda, xinv);
            if den.is_zero() {
                return None;
            }
            word[p] += x * eval_poly(&omega, xinv) / den;
        }
        if self.syndromes(&word).iter().any(|s| !s.is_zero()) {
            return None;
        }
        Some(word.into_iter().map(|f| f.0).collect())
    }
}
