#![allow(dead_code)]

use std::sync::Arc;

use mfkdf2::factors::mock::MockPasskey;
use mfkdf2::factors::otp::{hotp_code, totp_code, HotpConfig, TotpConfig};
use mfkdf2::{Env, FactorMaterial, FactorSpec, KdfParams, SetupOptions, Witness};

pub const OTP_SECRET: &[u8] = b"12345678901234567890";

pub fn opts() -> SetupOptions {
    SetupOptions::new(KdfParams::testing())
}

/// A factor whose witness can be regenerated from the seed at any time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Password,
    Hotp,
    Totp,
    Passkey,
    Fuzzy,
}

pub const KINDS: [Kind; 5] = [
    Kind::Password,
    Kind::Hotp,
    Kind::Totp,
    Kind::Passkey,
    Kind::Fuzzy,
];

pub struct TestFactor {
    pub id: String,
    pub kind: Kind,
    pub seed: u8,
    /// HOTP counter the next witness should use.
    pub counter: u64,
}

fn secret(seed: u8) -> Vec<u8> {
    let mut s = OTP_SECRET.to_vec();
    s[0] = seed;
    s
}

pub fn sample(seed: u8) -> Vec<u8> {
    (0..128u32)
        .map(|i| {
            (i as u8)
                .wrapping_mul(31)
                .wrapping_add(seed.wrapping_mul(97))
        })
        .collect()
}

impl TestFactor {
    pub fn new(id: &str, kind: Kind, seed: u8) -> TestFactor {
        TestFactor {
            id: id.into(),
            kind,
            seed,
            counter: 0,
        }
    }

    pub fn material(&self) -> FactorMaterial {
        match self.kind {
            Kind::Password => FactorMaterial::password(format!("password-{}", self.seed)),
            Kind::Hotp => FactorMaterial::Hotp(HotpConfig::new(secret(self.seed))),
            Kind::Totp => FactorMaterial::Totp(TotpConfig::new(secret(self.seed)).window(16)),
            Kind::Passkey => FactorMaterial::Passkey {
                credential_id: vec![self.seed],
                device: Arc::new(MockPasskey::new([self.seed; 32])),
            },
            Kind::Fuzzy => FactorMaterial::Fuzzy {
                sample: sample(self.seed),
                tolerance: 8,
            },
        }
    }

    pub fn spec(&self) -> FactorSpec {
        FactorSpec::new(self.id.clone(), self.material())
    }

    pub fn witness(&self, env: &Env) -> Witness {
        match self.kind {
            Kind::Password => Witness::password(format!("password-{}", self.seed)),
            Kind::Hotp => Witness::Code(hotp_code(&secret(self.seed), self.counter, 1_000_000)),
            Kind::Totp => Witness::Code(totp_code(&secret(self.seed), env.now(), 30, 1_000_000)),
            Kind::Passkey => Witness::device(Arc::new(MockPasskey::new([self.seed; 32]))),
            Kind::Fuzzy => {
                let mut s = sample(self.seed);
                s[3] ^= 0x11;
                Witness::Sample(s)
            }
        }
    }

    pub fn wrong_witness(&self, env: &Env) -> Witness {
        match self.kind {
            Kind::Password => Witness::password("not it"),
            Kind::Hotp | Kind::Totp => match self.witness(env) {
                Witness::Code(c) => Witness::Code((c + 1) % 1_000_000),
                _ => unreachable!(),
            },
            Kind::Passkey => Witness::device(Arc::new(MockPasskey::new([self.seed ^ 0xff; 32]))),
            Kind::Fuzzy => Witness::Sample(sample(self.seed.wrapping_add(1))),
        }
    }

    /// Record that a derive consumed this factor's witness.
    pub fn used(&mut self) {
        if self.kind == Kind::Hotp {
            self.counter += 1;
        }
    }
}
