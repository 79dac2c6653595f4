use argon2::{Algorithm, Argon2, Params, Version};
use serde::Serialize;

use super::{balloon::balloon_sha3, DerivedKey, PrimitiveError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[repr(u8)]
pub enum KdfAlgorithm {
    Argon2id = 1,
    BalloonSha3 = 2,
}

impl KdfAlgorithm {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<KdfAlgorithm> {
        match id {
            1 => Some(KdfAlgorithm::Argon2id),
            2 => Some(KdfAlgorithm::BalloonSha3),
            _ => None,
        }
    }
}

/// The one KDF this build accepts. Chosen at compile time with the `balloon` feature.
#[cfg(not(feature = "balloon"))]
pub const KDF_ALGORITHM: KdfAlgorithm = KdfAlgorithm::Argon2id;
#[cfg(feature = "balloon")]
pub const KDF_ALGORITHM: KdfAlgorithm = KdfAlgorithm::BalloonSha3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KdfParams {
    pub memory_kib: u32,
    pub time_cost: u32,
    pub parallelism: u32,
}

impl Default for KdfParams {
    fn default() -> Self {
        KdfParams {
            memory_kib: 64 * 1024,
            time_cost: 3,
            parallelism: 1,
        }
    }
}

impl KdfParams {
    pub fn new(memory_kib: u32, time_cost: u32, parallelism: u32) -> Self {
        KdfParams {
            memory_kib,
            time_cost,
            parallelism,
        }
    }

    /// The cheapest parameters accepted by the testing bounds.
    pub fn testing() -> Self {
        KdfParams {
            memory_kib: 8,
            time_cost: 1,
            parallelism: 1,
        }
    }

    /// True if `self` costs at least as much as `other` in both memory and time.
    pub fn at_least(&self, other: &KdfParams) -> bool {
        self.memory_kib >= other.memory_kib && self.time_cost >= other.time_cost
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KdfBounds {
    pub min_memory_kib: u32,
    pub max_memory_kib: u32,
    pub min_time_cost: u32,
    pub max_time_cost: u32,
    pub max_parallelism: u32,
}

impl Default for KdfBounds {
    fn default() -> Self {
        KdfBounds {
            min_memory_kib: 8 * 1024,
            max_memory_kib: 4 * 1024 * 1024,
            min_time_cost: 1,
            max_time_cost: 64,
            max_parallelism: 16,
        }
    }
}

impl KdfBounds {
    /// Bounds for tests and simulations, allowing tiny memory costs.
    pub fn testing() -> Self {
        KdfBounds {
            min_memory_kib: 8,
            ..KdfBounds::default()
        }
    }

    pub fn check(&self, p: &KdfParams) -> Result<(), PrimitiveError> {
        let fail = |m: String| Err(PrimitiveError::KdfBounds(m));
        if p.memory_kib < self.min_memory_kib || p.memory_kib > self.max_memory_kib {
            return fail(format!(
                "memory {} KiB outside [{}, {}]",
                p.memory_kib, self.min_memory_kib, self.max_memory_kib
            ));
        }
        if p.time_cost < self.min_time_cost || p.time_cost > self.max_time_cost {
            return fail(format!(
                "time cost {} outside [{}, {}]",
                p.time_cost, self.min_time_cost, self.max_time_cost
            ));
        }
        if p.parallelism == 0 || p.parallelism > self.max_parallelism {
            return fail(format!(
                "parallelism {} outside [1, {}]",
                p.parallelism, self.max_parallelism
            ));
        }
        if p.memory_kib < 8 * p.parallelism {
            return fail("memory must be at least 8 KiB per lane".into());
        }
        if KDF_ALGORITHM == KdfAlgorithm::BalloonSha3 && p.parallelism != 1 {
            return fail("balloon hashing runs a single lane".into());
        }
        Ok(())
    }
}

pub fn kdf(
    input: &[u8],
    salt: &[u8; 32],
    params: &KdfParams,
    bounds: &KdfBounds,
) -> Result<DerivedKey, PrimitiveError> {
    bounds.check(params)?;
    let out = match KDF_ALGORITHM {
        KdfAlgorithm::Argon2id => argon2id(input, salt, params)?,
        // 32-byte blocks, so 32 blocks per KiB.
        KdfAlgorithm::BalloonSha3 => balloon_sha3(
            input,
            salt,
            u64::from(params.memory_kib) * 32,
            u64::from(params.time_cost),
            3,
        ),
    };
    Ok(DerivedKey(out))
}

fn argon2id(input: &[u8], salt: &[u8], params: &KdfParams) -> Result<[u8; 32], PrimitiveError> {
    let p = Params::new(
        params.memory_kib,
        params.time_cost,
        params.parallelism,
        Some(32),
    )
    .map_err(|e| PrimitiveError::Kdf(e.to_string()))?;
    let mut out = [0u8; 32];
    Argon2::new(Algorithm::Argon2id, Version::V0x13, p)
        .hash_password_into(input, salt, &mut out)
        .map_err(|e| PrimitiveError::Kdf(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Expected values computed with the argon2-cffi reference bindings.
    #[test]
    fn argon2id_reference_vectors() {
        let salt: Vec<u8> = (0..32).collect();
        let cases: [(&[u8], &[u8], KdfParams, &str); 3] = [
            (
                b"password",
                &salt,
                KdfParams::new(8, 1, 1),
                "d47d24b4a189088b2297eee7045b5f164db197763355f81ae3cdf63686b494f6",
            ),
            (
                b"password",
                &salt,
                KdfParams::new(64, 2, 1),
                "c69292eade4d82142df1f938d162cc8e1ede3e2a2c2e61fad8eb43a19b94760a",
            ),
            (
                b"correct horse",
                &[0x11; 32],
                KdfParams::new(32, 1, 2),
                "392080b7cfe565c4e9ec035e74e1c0de8fba1f81da5df001bd326e73f293be5c",
            ),
        ];
        for (pw, salt, p, want) in cases {
            assert_eq!(hex::encode(argon2id(pw, salt, &p).unwrap()), want);
        }
    }

    #[test]
    fn deterministic_and_salt_sensitive() {
        let b = KdfBounds::testing();
        let p = KdfParams::testing();
        let a = kdf(b"input", &[1; 32], &p, &b).unwrap();
        assert_eq!(a, kdf(b"input", &[1; 32], &p, &b).unwrap());
        assert_ne!(a, kdf(b"input", &[2; 32], &p, &b).unwrap());
        assert_ne!(
            a,
            kdf(b"input", &[1; 32], &KdfParams::new(16, 1, 1), &b).unwrap()
        );
    }

    #[test]
    fn bounds_are_enforced() {
        let d = KdfBounds::default();
        assert!(d.check(&KdfParams::default()).is_ok());
        assert!(d.check(&KdfParams::testing()).is_err());
        assert!(d.check(&KdfParams::new(8 * 1024, 0, 1)).is_err());
        assert!(d.check(&KdfParams::new(8 * 1024, 1, 0)).is_err());
        assert!(kdf(b"x", &[0; 32], &KdfParams::testing(), &d).is_err());
    }

    #[test]
    fn cost_ordering() {
        let base = KdfParams::new(1024, 2, 1);
        assert!(KdfParams::new(2048, 2, 1).at_least(&base));
        assert!(base.at_least(&base));
        assert!(!KdfParams::new(512, 3, 1).at_least(&base));
        assert!(!KdfParams::new(2048, 1, 1).at_least(&base));
    }

    #[test]
    fn algorithm_ids_roundtrip() {
        for a in [KdfAlgorithm::Argon2id, KdfAlgorithm::BalloonSha3] {
            assert_eq!(KdfAlgorithm::from_id(a.id()), Some(a));
        }
        assert_eq!(KdfAlgorithm::from_id(0), None);
    }
}
