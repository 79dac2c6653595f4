//! Deterministic site passwords and passkey scalars from a derived key.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::primitives::{hkdf32, hkdf_expand, DerivedKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CharClass {
    Lower,
    Upper,
    Digit,
    Symbol,
}

impl CharClass {
    pub const ALL: [CharClass; 4] = [
        CharClass::Lower,
        CharClass::Upper,
        CharClass::Digit,
        CharClass::Symbol,
    ];

    pub fn chars(self) -> &'static str {
        match self {
            CharClass::Lower => "abcdefghijklmnopqrstuvwxyz",
            CharClass::Upper => "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
            CharClass::Digit => "0123456789",
            CharClass::Symbol => "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~",
        }
    }

    pub fn contains(self, c: char) -> bool {
        self.chars().contains(c)
    }

    pub fn parse(s: &str) -> Option<CharClass> {
        match s {
            "lower" => Some(CharClass::Lower),
            "upper" => Some(CharClass::Upper),
            "digit" => Some(CharClass::Digit),
            "symbol" => Some(CharClass::Symbol),
            _ => None,
        }
    }
}

pub const MAX_PASSWORD_LEN: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SitePasswordSpec {
    pub domain: String,
    pub length: usize,
    /// Classes characters may come from.
    pub allowed: BTreeSet<CharClass>,
    /// Classes that must appear at least once.
    pub required: BTreeSet<CharClass>,
    pub forbidden: BTreeSet<char>,
}

impl SitePasswordSpec {
    /// All four classes allowed, none required.
    pub fn new(domain: impl Into<String>, length: usize) -> SitePasswordSpec {
        SitePasswordSpec {
            domain: domain.into(),
            length,
            allowed: CharClass::ALL.into_iter().collect(),
            required: BTreeSet::new(),
            forbidden: BTreeSet::new(),
        }
    }

    pub fn require(mut self, c: CharClass) -> SitePasswordSpec {
        self.allowed.insert(c);
        self.required.insert(c);
        self
    }

    pub fn only(mut self, classes: &[CharClass]) -> SitePasswordSpec {
        self.allowed = classes.iter().copied().collect();
        self.required.retain(|c| classes.contains(c));
        self
    }

    pub fn forbid(mut self, chars: &str) -> SitePasswordSpec {
        self.forbidden.extend(chars.chars());
        self
    }

    fn class_chars(&self, c: CharClass) -> Vec<char> {
        c.chars()
            .chars()
            .filter(|x| !self.forbidden.contains(x))
            .collect()
    }

    pub fn alphabet(&self) -> Vec<char> {
        self.allowed
            .iter()
            .flat_map(|c| self.class_chars(*c))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.domain.is_empty() {
            return bad("domain must not be empty".into());
        }
        if self.length == 0 || self.length > MAX_PASSWORD_LEN {
            return bad(format!("length must be 1..={MAX_PASSWORD_LEN}"));
        }
        if self.required.len() > self.length {
            return bad(format!(
                "{} required classes do not fit in {} characters",
                self.required.len(),
                self.length
            ));
        }
        if !self.required.is_subset(&self.allowed) {
            return bad("required classes must be allowed".into());
        }
        for c in &self.allowed {
            if self.class_chars(*c).is_empty() {
                return bad(format!(
                    "class {c:?} has no characters left after forbidding"
                ));
            }
        }
        if self.alphabet().is_empty() {
            return bad("empty alphabet".into());
        }
        Ok(())
    }

    /// Whether a password meets this spec.
    pub fn accepts(&self, pw: &str) -> bool {
        let alpha = self.alphabet();
        pw.chars().count() == self.length
            && pw.chars().all(|c| alpha.contains(&c))
            && self
                .required
                .iter()
                .all(|cl| pw.chars().any(|c| cl.contains(c)))
    }
}

pub fn site_seed(key: &DerivedKey, domain: &str) -> [u8; 32] {
    let mut info = b"MFDPG2:".to_vec();
    info.extend_from_slice(domain.as_bytes());
    hkdf32(key.as_bytes(), &info)
}

/// Map a 64-bit draw onto `0..n` by the high half of the product.
fn below(rng: &mut ChaCha20Rng, n: usize) -> usize {
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

pub fn password(key: &DerivedKey, spec: &SitePasswordSpec) -> Result<String> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::from_seed(site_seed(key, &spec.domain));
    let alpha = spec.alphabet();
    let mut out: Vec<char> = (0..spec.length)
        .map(|_| alpha[below(&mut rng, alpha.len())])
        .collect();
    // Positions for required classes: a partial Fisher-Yates over the indices.
    let mut idx: Vec<usize> = (0..spec.length).collect();
    for (k, class) in spec.required.iter().enumerate() {
        let j = k + below(&mut rng, spec.length - k);
        idx.swap(k, j);
        let chars = spec.class_chars(*class);
        out[idx[k]] = chars[below(&mut rng, chars.len())];
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveOrder(BigUint);

impl CurveOrder {
    pub fn new(n: BigUint) -> Result<CurveOrder> {
        if n <= BigUint::from(1u8) {
            return Err(Error::InvalidParameter("curve order must exceed 1".into()));
        }
        Ok(CurveOrder(n))
    }

    pub fn secp256r1() -> CurveOrder {
        CurveOrder(
            BigUint::parse_bytes(
                b"ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551",
                16,
            )
            .unwrap(),
        )
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

pub const MAX_PASSKEY_ATTEMPTS: u32 = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PasskeyScalar {
    pub scalar: BigUint,
    /// Candidates drawn, including the accepted one.
    pub attempts: u32,
}

impl PasskeyScalar {
    pub fn to_bytes_be(&self) -> [u8; 32] {
        let b = self.scalar.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - b.len()..].copy_from_slice(&b);
        out
    }
}

/// Candidate `i` is `HKDF-Expand(K, "MFDPG2-Passkey" || i)`; the first in `[1, n-1]` wins.
pub fn passkey(key: &DerivedKey, curve: &CurveOrder) -> Result<PasskeyScalar> {
    let one = BigUint::from(1u8);
    for i in 0..MAX_PASSKEY_ATTEMPTS {
        let mut info = b"MFDPG2-Passkey".to_vec();
        info.extend_from_slice(&i.to_be_bytes());
        let d = BigUint::from_bytes_be(&hkdf_expand(key.as_bytes(), &info, 32)?);
        if d >= one && d < curve.0 {
            return Ok(PasskeyScalar {
                scalar: d,
                attempts: i + 1,
            });
        }
    }
    Err(Error::InvalidParameter(format!(
        "no scalar below the curve order in {MAX_PASSKEY_ATTEMPTS} candidates"
    )))
}
