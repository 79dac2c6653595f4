//! HOTP and TOTP factors.
//!
//! The source key is a uniform value below the code space, fixed at setup.
//! The public state stores `offset = (kappa - code) mod m`, so a fresh code
//! plus the offset reproduces kappa. The OTP secret itself is kept under the
//! feedback key and re-encrypted whenever the state advances.

use hmac::{Hmac, Mac};
use rand::Rng;
use serde::Serialize;
use sha1::Sha1;

use super::{FactorCtx, FactorError, FactorResult, FeedbackKey, SourceKey};
use crate::codec::{Reader, Writer};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::oracle::ORACLE_MODULUS;
use crate::primitives::{prp_decrypt, prp_encrypt, PrpKey};

pub const DEFAULT_DIGITS: u32 = 6;
pub const DEFAULT_STEP_SECS: u32 = 30;
pub const DEFAULT_WINDOW: u32 = 2920;
pub const MAX_WINDOW: u32 = 100_000;
pub const MAX_SECRET_LEN: usize = 32;

/// RFC 4226 dynamic truncation to 31 bits.
pub fn truncate31(mac: &[u8]) -> u32 {
    let off = (mac[mac.len() - 1] & 0x0f) as usize;
    u32::from_be_bytes([mac[off], mac[off + 1], mac[off + 2], mac[off + 3]]) & 0x7fff_ffff
}

/// HMAC-SHA1 HOTP value reduced mod `modulus`.
pub fn hotp_code(secret: &[u8], counter: u64, modulus: u32) -> u32 {
    let mut m = <Hmac<Sha1> as Mac>::new_from_slice(secret).expect("hmac accepts any key length");
    m.update(&counter.to_be_bytes());
    truncate31(&m.finalize().into_bytes()) % modulus
}

pub fn totp_code(secret: &[u8], unix: u64, step_secs: u32, modulus: u32) -> u32 {
    hotp_code(secret, unix / u64::from(step_secs), modulus)
}

pub fn digits_modulus(digits: u32) -> u32 {
    10u32.pow(digits)
}

/// Source key encoding for code-space factors: 4-byte big-endian, zero padded.
pub fn otp_kappa(value: u32) -> SourceKey {
    let mut k = [0u8; 32];
    k[..4].copy_from_slice(&value.to_be_bytes());
    SourceKey(k)
}

fn kappa_value(k: &SourceKey, modulus: u32) -> FactorResult<u64> {
    let v = u32::from_be_bytes(k.0[..4].try_into().unwrap());
    if v >= modulus || k.0[4..].iter().any(|&b| b != 0) {
        return Err(FactorError::InvalidMaterial(
            "source key is not an otp value".into(),
        ));
    }
    Ok(u64::from(v))
}

fn sub_mod(a: u64, b: u64, m: u64) -> u32 {
    ((a % m + m - b % m) % m) as u32
}

fn validate_common(secret: &[u8], modulus: u32) -> FactorResult<()> {
    if secret.is_empty() || secret.len() > MAX_SECRET_LEN {
        return Err(FactorError::InvalidMaterial(format!(
            "otp secret must be 1..={MAX_SECRET_LEN} bytes"
        )));
    }
    if !(2..=0x7fff_ffff).contains(&modulus) {
        return Err(FactorError::InvalidMaterial(
            "code space must be in [2, 2^31)".into(),
        ));
    }
    Ok(())
}

fn seal_secret(secret: &[u8], fk: &FeedbackKey, env: &mut Env) -> [u8; 32] {
    let mut block = env.random_32();
    block[..secret.len()].copy_from_slice(secret);
    prp_encrypt(&PrpKey(fk.0), &block).expect("32-byte block")
}

fn open_secret(enc: &[u8; 32], len: u8, fk: &FeedbackKey) -> Vec<u8> {
    let block = prp_decrypt(&PrpKey(fk.0), enc).expect("32-byte block");
    block[..len as usize].to_vec()
}

fn check_code(code: u32, modulus: u32) -> FactorResult<u64> {
    if code >= modulus {
        return Err(FactorError::InvalidWitness(
            "code outside the code space".into(),
        ));
    }
    Ok(u64::from(code))
}

#[derive(Clone, Debug)]
pub struct HotpConfig {
    pub secret: Vec<u8>,
    /// Code space; 10^digits for standard tokens.
    pub modulus: u32,
    pub counter: u64,
}

impl HotpConfig {
    pub fn new(secret: impl Into<Vec<u8>>) -> HotpConfig {
        HotpConfig {
            secret: secret.into(),
            modulus: digits_modulus(DEFAULT_DIGITS),
            counter: 0,
        }
    }

    pub fn digits(mut self, d: u32) -> HotpConfig {
        self.modulus = digits_modulus(d);
        self
    }

    pub fn modulus(mut self, m: u32) -> HotpConfig {
        self.modulus = m;
        self
    }

    pub fn counter(mut self, c: u64) -> HotpConfig {
        self.counter = c;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HotpState {
    #[serde(with = "crate::hexser")]
    pub enc_secret: [u8; 32],
    pub secret_len: u8,
    pub modulus: u32,
    pub counter: u64,
    pub offset: u32,
}

impl HotpState {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.fixed(&self.enc_secret)
            .u8(self.secret_len)
            .u32(self.modulus)
            .u64(self.counter)
            .u32(self.offset);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<HotpState> {
        let s = HotpState {
            enc_secret: r.array32()?,
            secret_len: r.u8()?,
            modulus: r.u32()?,
            counter: r.u64()?,
            offset: r.u32()?,
        };
        if s.secret_len == 0
            || s.secret_len as usize > MAX_SECRET_LEN
            || s.modulus < 2
            || s.offset >= s.modulus
        {
            return Err(Error::malformed("hotp state out of range"));
        }
        Ok(s)
    }
}

pub struct HotpPending {
    secret: Vec<u8>,
    modulus: u32,
    counter: u64,
}

pub fn hotp_setup(c: &HotpConfig, env: &mut Env) -> FactorResult<(HotpPending, SourceKey)> {
    validate_common(&c.secret, c.modulus)?;
    let v = env.rng().gen_range(0..c.modulus);
    Ok((
        HotpPending {
            secret: c.secret.clone(),
            modulus: c.modulus,
            counter: c.counter,
        },
        otp_kappa(v),
    ))
}

fn hotp_state(
    secret: &[u8],
    modulus: u32,
    counter: u64,
    kappa: &SourceKey,
    fk: &FeedbackKey,
    env: &mut Env,
) -> FactorResult<HotpState> {
    let k = kappa_value(kappa, modulus)?;
    let code = hotp_code(secret, counter, modulus);
    Ok(HotpState {
        enc_secret: seal_secret(secret, fk, env),
        secret_len: secret.len() as u8,
        modulus,
        counter,
        offset: sub_mod(k, u64::from(code), u64::from(modulus)),
    })
}

pub fn hotp_seal(
    p: HotpPending,
    kappa: &SourceKey,
    fk: &FeedbackKey,
    env: &mut Env,
) -> FactorResult<super::FactorState> {
    hotp_state(&p.secret, p.modulus, p.counter, kappa, fk, env).map(super::FactorState::Hotp)
}

pub fn hotp_derive1(s: &HotpState, code: u32) -> FactorResult<SourceKey> {
    let w = check_code(code, s.modulus)?;
    Ok(otp_kappa(
        ((w + u64::from(s.offset)) % u64::from(s.modulus)) as u32,
    ))
}

pub fn hotp_derive2(
    s: &HotpState,
    fk: &FeedbackKey,
    kappa: &SourceKey,
    env: &mut Env,
) -> FactorResult<HotpState> {
    let secret = open_secret(&s.enc_secret, s.secret_len, fk);
    hotp_state(&secret, s.modulus, s.counter + 1, kappa, fk, env)
}

pub fn hotp_rekey(
    s: &HotpState,
    old: &FeedbackKey,
    new: &FeedbackKey,
    env: &mut Env,
) -> FactorResult<HotpState> {
    let secret = open_secret(&s.enc_secret, s.secret_len, old);
    Ok(HotpState {
        enc_secret: seal_secret(&secret, new, env),
        ..s.clone()
    })
}

#[derive(Clone, Debug)]
pub struct TotpConfig {
    pub secret: Vec<u8>,
    pub modulus: u32,
    pub step_secs: u32,
    /// Number of future steps covered by the stored offset table.
    pub window: u32,
    /// Mix in timing-oracle values so stale codes stop working.
    pub oracle: bool,
}

impl TotpConfig {
    pub fn new(secret: impl Into<Vec<u8>>) -> TotpConfig {
        TotpConfig {
            secret: secret.into(),
            modulus: digits_modulus(DEFAULT_DIGITS),
            step_secs: DEFAULT_STEP_SECS,
            window: DEFAULT_WINDOW,
            oracle: false,
        }
    }

    pub fn digits(mut self, d: u32) -> TotpConfig {
        self.modulus = digits_modulus(d);
        self
    }

    pub fn modulus(mut self, m: u32) -> TotpConfig {
        self.modulus = m;
        self
    }

    pub fn step(mut self, secs: u32) -> TotpConfig {
        self.step_secs = secs;
        self
    }

    pub fn window(mut self, steps: u32) -> TotpConfig {
        self.window = steps;
        self
    }

    pub fn with_oracle(mut self) -> TotpConfig {
        self.oracle = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TotpState {
    #[serde(with = "crate::hexser")]
    pub enc_secret: [u8; 32],
    pub secret_len: u8,
    pub modulus: u32,
    pub step_secs: u32,
    pub start_step: u64,
    pub offsets: Vec<u32>,
    pub oracle: bool,
    /// Static slots whose source keys make up the oracle local key.
    pub local_key_slots: Vec<String>,
}

impl TotpState {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.fixed(&self.enc_secret)
            .u8(self.secret_len)
            .u32(self.modulus)
            .u32(self.step_secs)
            .u64(self.start_step);
        w.u32(self.offsets.len() as u32);
        for o in &self.offsets {
            w.u32(*o);
        }
        w.bool(self.oracle);
        w.u16(self.local_key_slots.len() as u16);
        for s in &self.local_key_slots {
            w.str(s);
        }
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<TotpState> {
        let enc_secret = r.array32()?;
        let secret_len = r.u8()?;
        let modulus = r.u32()?;
        let step_secs = r.u32()?;
        let start_step = r.u64()?;
        let n = r.u32()?;
        if n == 0 || n > MAX_WINDOW || (n as usize) * 4 > r.remaining() {
            return Err(Error::malformed("totp window out of range"));
        }
        let mut offsets = Vec::with_capacity(n as usize);
        for _ in 0..n {
            offsets.push(r.u32()?);
        }
        let oracle = r.bool()?;
        let k = r.u16()?;
        let mut local_key_slots = Vec::with_capacity(k as usize);
        for _ in 0..k {
            local_key_slots.push(r.str()?);
        }
        if secret_len == 0 || secret_len as usize > MAX_SECRET_LEN || modulus < 2 || step_secs == 0
        {
            return Err(Error::malformed("totp state out of range"));
        }
        if offsets.iter().any(|&o| o >= modulus) {
            return Err(Error::malformed("totp offset outside code space"));
        }
        Ok(TotpState {
            enc_secret,
            secret_len,
            modulus,
            step_secs,
            start_step,
            offsets,
            oracle,
            local_key_slots,
        })
    }

    pub fn end_step(&self) -> u64 {
        self.start_step + self.offsets.len() as u64
    }
}

pub struct TotpPending {
    config: TotpConfig,
}

pub fn totp_setup(c: &TotpConfig, env: &mut Env) -> FactorResult<(TotpPending, SourceKey)> {
    validate_common(&c.secret, c.modulus)?;
    if c.step_secs == 0 || c.window == 0 || c.window > MAX_WINDOW {
        return Err(FactorError::InvalidMaterial(format!(
            "totp window must be 1..={MAX_WINDOW} steps of >= 1 s"
        )));
    }
    if c.oracle && ORACLE_MODULUS % c.modulus != 0 {
        return Err(FactorError::InvalidMaterial(
            "oracle-backed totp needs a decimal code space of at most 9 digits".into(),
        ));
    }
    let v = env.rng().gen_range(0..c.modulus);
    Ok((TotpPending { config: c.clone() }, otp_kappa(v)))
}

fn oracle_value(env: &Env, ctx: FactorCtx<'_>, step: u64, modulus: u32) -> FactorResult<u64> {
    let (Some(oracle), Some(lk)) = (env.oracle(), ctx.local_key) else {
        return Err(FactorError::OracleMissing);
    };
    Ok(u64::from(oracle.eval(lk, step)? % modulus))
}

#[allow(clippy::too_many_arguments)]
fn totp_window(
    secret: &[u8],
    modulus: u32,
    step_secs: u32,
    window: u32,
    oracle: bool,
    local_key_slots: Vec<String>,
    kappa: &SourceKey,
    fk: &FeedbackKey,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<TotpState> {
    let k = kappa_value(kappa, modulus)?;
    let m = u64::from(modulus);
    let start_step = env.now() / u64::from(step_secs);
    let mut offsets = Vec::with_capacity(window as usize);
    for step in start_step..start_step + u64::from(window) {
        let code = u64::from(hotp_code(secret, step, modulus));
        let v = if oracle {
            oracle_value(env, ctx, step, modulus)?
        } else {
            0
        };
        // offset = kappa - (code - v)
        offsets.push(sub_mod(k + v, code, m));
    }
    Ok(TotpState {
        enc_secret: seal_secret(secret, fk, env),
        secret_len: secret.len() as u8,
        modulus,
        step_secs,
        start_step,
        offsets,
        oracle,
        local_key_slots,
    })
}

pub fn totp_seal(
    p: TotpPending,
    kappa: &SourceKey,
    fk: &FeedbackKey,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<super::FactorState> {
    let c = p.config;
    let slots = if c.oracle {
        ctx.local_key_slots.to_vec()
    } else {
        Vec::new()
    };
    if c.oracle && slots.is_empty() {
        return Err(FactorError::OracleMissing);
    }
    totp_window(
        &c.secret,
        c.modulus,
        c.step_secs,
        c.window,
        c.oracle,
        slots,
        kappa,
        fk,
        env,
        ctx,
    )
    .map(super::FactorState::Totp)
}

/// Candidate source keys for the current step, then one step back and one ahead.
pub fn totp_derive1(
    s: &TotpState,
    code: u32,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<Vec<SourceKey>> {
    let w = check_code(code, s.modulus)?;
    let m = u64::from(s.modulus);
    let now = env.now() / u64::from(s.step_secs);
    let steps: Vec<u64> = [Some(now), now.checked_sub(1), now.checked_add(1)]
        .into_iter()
        .flatten()
        .filter(|&t| t >= s.start_step && t < s.end_step())
        .collect();
    if steps.is_empty() {
        return Err(FactorError::OutsideWindow);
    }
    let mut out = Vec::with_capacity(steps.len());
    let mut last_err = None;
    for t in steps {
        let offset = u64::from(s.offsets[(t - s.start_step) as usize]);
        let v = if s.oracle {
            match oracle_value(env, ctx, t, s.modulus) {
                Ok(v) => v,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            }
        } else {
            0
        };
        out.push(otp_kappa(((w + m - v + offset) % m) as u32));
    }
    if out.is_empty() {
        return Err(last_err.unwrap_or(FactorError::OutsideWindow));
    }
    Ok(out)
}

pub fn totp_derive2(
    s: &TotpState,
    fk: &FeedbackKey,
    kappa: &SourceKey,
    env: &mut Env,
    ctx: FactorCtx<'_>,
) -> FactorResult<TotpState> {
    let secret = open_secret(&s.enc_secret, s.secret_len, fk);
    totp_window(
        &secret,
        s.modulus,
        s.step_secs,
        s.offsets.len() as u32,
        s.oracle,
        s.local_key_slots.clone(),
        kappa,
        fk,
        env,
        ctx,
    )
}

pub fn totp_rekey(
    s: &TotpState,
    old: &FeedbackKey,
    new: &FeedbackKey,
    env: &mut Env,
) -> FactorResult<TotpState> {
    let secret = open_secret(&s.enc_secret, s.secret_len, old);
    Ok(TotpState {
        enc_secret: seal_secret(&secret, new, env),
        ..s.clone()
    })
}
