//! A reconstruction of the earlier MFKDF design, with each known weakness
//! behind its own flag. It exists only inside the harness: nothing here is
//! reachable from the `mfkdf2` crate.
//!
//! With every flag off it still differs from MFKDF2 in the ways the flags do
//! not cover, e.g. salts are never refreshed and no hints or envelopes exist.

use std::collections::BTreeMap;

use mfkdf2::factors::otp::{hotp_code, otp_kappa};
use mfkdf2::primitives::{
    ct_eq, derive_share_key, hkdf32, hkdf_with_salt, hmac_sha256, kdf, prp_decrypt, prp_encrypt,
    sha256, sha256_parts, DerivedKey, KdfBounds, KdfParams, PrpKey,
};
use mfkdf2::sss;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::prime;
use crate::scheme::{GameFactor, GameWitness};

pub const OTP_MODULUS: u32 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct LegacyMode {
    /// Shares and HOTP secrets are XOR-masked: `c = s ^ pad(kappa)`, `enc = sigma ^ K`.
    pub xor_share_encryption: bool,
    /// n-of-n keys are the XOR of per-factor pads, so witness order is irrelevant.
    pub xor_share_combine: bool,
    /// The state carries no MAC and is trusted as read.
    pub no_state_mac: bool,
    /// Recovery keeps the old shares and only re-masks the replaced one.
    pub no_share_regeneration: bool,
    /// Shares live in a prime field and are written as 33-byte integers.
    pub biased_share_format: bool,
    /// TOTP offsets use the raw `Truncate31 mod 10^6` code without an oracle.
    pub raw_mod_otp_bias: bool,
}

pub const FLAG_NAMES: [&str; 6] = [
    "xor-share-encryption",
    "xor-share-combine",
    "no-state-mac",
    "no-share-regeneration",
    "biased-share-format",
    "raw-mod-otp-bias",
];

impl LegacyMode {
    pub fn all() -> LegacyMode {
        LegacyMode {
            xor_share_encryption: true,
            xor_share_combine: true,
            no_state_mac: true,
            no_share_regeneration: true,
            biased_share_format: true,
            raw_mod_otp_bias: true,
        }
    }

    fn flag_mut(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "xor-share-encryption" => &mut self.xor_share_encryption,
            "xor-share-combine" => &mut self.xor_share_combine,
            "no-state-mac" => &mut self.no_state_mac,
            "no-share-regeneration" => &mut self.no_share_regeneration,
            "biased-share-format" => &mut self.biased_share_format,
            "raw-mod-otp-bias" => &mut self.raw_mod_otp_bias,
            _ => return None,
        })
    }

    /// Comma- or plus-separated flag names.
    pub fn parse(s: &str) -> Result<LegacyMode, String> {
        let mut m = LegacyMode::default();
        for name in s.split([',', '+']).map(str::trim).filter(|n| !n.is_empty()) {
            *m.flag_mut(name)
                .ok_or_else(|| format!("unknown legacy flag {name:?}"))? = true;
        }
        Ok(m)
    }

    pub fn with(mut self, name: &str) -> LegacyMode {
        *self
            .flag_mut(name)
            .unwrap_or_else(|| panic!("unknown legacy flag {name:?}")) = true;
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut m = *self;
        FLAG_NAMES
            .iter()
            .copied()
            .filter(|n| *m.flag_mut(n).unwrap())
            .collect()
    }

    pub fn label(&self) -> String {
        format!("legacy({})", self.names().join("+"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LegacyError {
    #[error("not enough factors")]
    Insufficient,
    #[error("state rejected")]
    Rejected,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LegacyHotp {
    pub enc_secret: Vec<u8>,
    pub counter: u64,
    pub offset: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LegacySlot {
    pub id: String,
    pub salt: [u8; 32],
    pub index: u8,
    /// Masked share; empty for XOR-combined vaults.
    pub share: Vec<u8>,
    pub hotp: Option<LegacyHotp>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LegacyState {
    pub mode: LegacyMode,
    pub threshold: usize,
    pub salt_k: [u8; 32],
    pub kdf: KdfParams,
    pub slots: Vec<LegacySlot>,
    pub tag: Option<[u8; 32]>,
}

fn push_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

impl LegacyState {
    pub fn encode_body(&self) -> Vec<u8> {
        let mut out = vec![self.threshold as u8];
        out.extend_from_slice(&self.salt_k);
        out.extend_from_slice(&self.kdf.memory_kib.to_be_bytes());
        out.extend_from_slice(&self.kdf.time_cost.to_be_bytes());
        out.extend_from_slice(&self.kdf.parallelism.to_be_bytes());
        for s in &self.slots {
            push_bytes(&mut out, s.id.as_bytes());
            out.extend_from_slice(&s.salt);
            out.push(s.index);
            push_bytes(&mut out, &s.share);
            match &s.hotp {
                Some(h) => {
                    out.push(1);
                    push_bytes(&mut out, &h.enc_secret);
                    out.extend_from_slice(&h.counter.to_be_bytes());
                    out.extend_from_slice(&h.offset.to_be_bytes());
                }
                None => out.push(0),
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.encode_body();
        if let Some(t) = &self.tag {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn slot_index(&self, id: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.id == id)
    }

    /// Factors an honest client needs to open the vault as it stands.
    pub fn factors_needed(&self) -> usize {
        if self.mode.xor_share_combine {
            self.slots.len()
        } else {
            self.threshold
        }
    }

    fn retag(&mut self, key: &DerivedKey) {
        self.tag = if self.mode.no_state_mac {
            None
        } else {
            Some(hmac_sha256(key.as_bytes(), &self.encode_body()))
        };
    }
}

/// The factor-specific mask. Deterministic in the factor's source key and
/// the slot salt, which is what makes a reused share a two-time pad.
pub fn pad(kappa: &[u8; 32], salt: &[u8; 32], len: usize) -> Vec<u8> {
    hkdf_with_salt(salt, kappa, b"legacy-pad", len).expect("short pad")
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

fn share_key(kappa: &[u8; 32], salt: &[u8; 32]) -> PrpKey {
    derive_share_key(&sha256_parts(&[kappa, salt]))
}

fn mask_share(mode: &LegacyMode, kappa: &[u8; 32], salt: &[u8; 32], share: &[u8]) -> Vec<u8> {
    if mode.xor_share_encryption {
        return xor(share, &pad(kappa, salt, share.len()));
    }
    let k = share_key(kappa, salt);
    let mut out = prp_encrypt(&k, &share[..32])
        .expect("32-byte block")
        .to_vec();
    if share.len() > 32 {
        out.extend(xor(&share[32..], &pad(kappa, salt, share.len())[32..]));
    }
    out
}

pub fn unmask_share(
    mode: &LegacyMode,
    kappa: &[u8; 32],
    salt: &[u8; 32],
    c: &[u8],
) -> Result<Vec<u8>, LegacyError> {
    if c.len() < 32 {
        return Err(LegacyError::Invalid("share too short".into()));
    }
    if mode.xor_share_encryption {
        return Ok(xor(c, &pad(kappa, salt, c.len())));
    }
    let k = share_key(kappa, salt);
    let mut out = prp_decrypt(&k, &c[..32]).expect("32-byte block").to_vec();
    if c.len() > 32 {
        out.extend(xor(&c[32..], &pad(kappa, salt, c.len())[32..]));
    }
    Ok(out)
}

fn feedback_key(key: &DerivedKey, salt: &[u8; 32]) -> PrpKey {
    let mut info = b"legacy-feedback:".to_vec();
    info.extend_from_slice(salt);
    PrpKey(hkdf32(key.as_bytes(), &info))
}

fn seal_secret(mode: &LegacyMode, key: &DerivedKey, salt: &[u8; 32], secret: &[u8]) -> Vec<u8> {
    if mode.xor_share_encryption {
        return xor(secret, key.as_bytes());
    }
    let mut block = [0u8; 32];
    block[..secret.len()].copy_from_slice(secret);
    let mut out = prp_encrypt(&feedback_key(key, salt), &block)
        .expect("32-byte block")
        .to_vec();
    out.push(secret.len() as u8);
    out
}

fn open_secret(
    mode: &LegacyMode,
    key: &DerivedKey,
    salt: &[u8; 32],
    enc: &[u8],
) -> Result<Vec<u8>, LegacyError> {
    if mode.xor_share_encryption {
        return Ok(xor(enc, key.as_bytes()));
    }
    if enc.len() != 33 || enc[32] as usize > 32 {
        return Err(LegacyError::Invalid("sealed otp secret".into()));
    }
    let block = prp_decrypt(&feedback_key(key, salt), &enc[..32]).expect("32-byte block");
    Ok(block[..enc[32] as usize].to_vec())
}

fn sub_mod(a: u32, b: u32, m: u32) -> u32 {
    ((u64::from(a) + u64::from(m) - u64::from(b % m)) % u64::from(m)) as u32
}

fn kappa_for(slot: &LegacySlot, w: &GameWitness) -> Result<[u8; 32], LegacyError> {
    match (w, &slot.hotp) {
        (GameWitness::Password(p), None) => Ok(sha256(p.as_bytes())),
        (GameWitness::Code(c), Some(h)) => {
            Ok(otp_kappa((c % OTP_MODULUS + h.offset) % OTP_MODULUS).0)
        }
        _ => Err(LegacyError::Invalid(format!(
            "wrong witness kind for {}",
            slot.id
        ))),
    }
}

fn derive_key(state: &LegacyState, m: &[u8; 32]) -> Result<DerivedKey, LegacyError> {
    kdf(m, &state.salt_k, &state.kdf, &KdfBounds::testing())
        .map_err(|e| LegacyError::Invalid(e.to_string()))
}

fn share_secret(
    mode: &LegacyMode,
    m: &[u8; 32],
    t: usize,
    n: usize,
    rng: &mut ChaCha20Rng,
) -> Vec<(u8, Vec<u8>)> {
    if mode.biased_share_format {
        prime::share(m, t, n, rng)
    } else {
        sss::share(m, t, n, rng)
            .expect("valid shape")
            .into_iter()
            .map(|s| (s.index, s.bytes))
            .collect()
    }
}

fn combine(mode: &LegacyMode, shares: &[(u8, Vec<u8>)], t: usize) -> Result<[u8; 32], LegacyError> {
    if shares.len() < t {
        return Err(LegacyError::Insufficient);
    }
    if mode.biased_share_format {
        return Ok(prime::combine(shares));
    }
    let shares: Vec<sss::Share> = shares
        .iter()
        .map(|(i, b)| sss::Share {
            index: *i,
            bytes: b.clone(),
        })
        .collect();
    let m = sss::combine(&shares, t).map_err(|e| LegacyError::Invalid(e.to_string()))?;
    m.try_into()
        .map_err(|_| LegacyError::Invalid("share length".into()))
}

/// Per-slot source keys drawn at setup, for factors whose key is not a
/// function of the witness alone.
fn fresh_kappa(f: &GameFactor, rng: &mut ChaCha20Rng) -> (u32, [u8; 32]) {
    match f {
        GameFactor::Password(p) => (0, sha256(p.as_bytes())),
        GameFactor::Hotp(_) => {
            let v = rng.gen_range(0..OTP_MODULUS);
            (v, otp_kappa(v).0)
        }
    }
}

/// `threshold = None` builds an n-of-n vault.
pub fn setup(
    mode: LegacyMode,
    threshold: Option<usize>,
    factors: &[(String, GameFactor)],
    master: Option<[u8; 32]>,
    params: KdfParams,
    rng: &mut ChaCha20Rng,
) -> Result<(LegacyState, DerivedKey), LegacyError> {
    let n = factors.len();
    let t = threshold.unwrap_or(n);
    if n == 0 || t == 0 || t > n {
        return Err(LegacyError::Invalid("bad vault shape".into()));
    }
    if mode.xor_share_combine && t != n {
        return Err(LegacyError::Invalid("xor combining is n-of-n only".into()));
    }
    let mut salt_k = [0u8; 32];
    rng.fill_bytes(&mut salt_k);
    let kappas: Vec<(u32, [u8; 32])> = factors.iter().map(|(_, f)| fresh_kappa(f, rng)).collect();
    let mut state = LegacyState {
        mode,
        threshold: t,
        salt_k,
        kdf: params,
        slots: Vec::new(),
        tag: None,
    };

    let salts: Vec<[u8; 32]> = (0..n)
        .map(|_| {
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            s
        })
        .collect();
    let (m, shares) = if mode.xor_share_combine {
        let mut m = [0u8; 32];
        for (_, k) in &kappas {
            m = xor(&m, &sha256(k)).try_into().unwrap();
        }
        (m, vec![(0u8, Vec::new()); n])
    } else {
        let m = master.unwrap_or_else(|| {
            let mut m = [0u8; 32];
            rng.fill_bytes(&mut m);
            m
        });
        (m, share_secret(&mode, &m, t, n, rng))
    };
    let key = derive_key(&state, &m)?;
    for (i, ((id, f), (v, kappa))) in factors.iter().zip(&kappas).enumerate() {
        let share = if mode.xor_share_combine {
            Vec::new()
        } else {
            mask_share(&mode, kappa, &salts[i], &shares[i].1)
        };
        let hotp = match f {
            GameFactor::Hotp(secret) => Some(LegacyHotp {
                enc_secret: seal_secret(&mode, &key, &salts[i], secret),
                counter: 0,
                offset: sub_mod(*v, hotp_code(secret, 0, OTP_MODULUS), OTP_MODULUS),
            }),
            GameFactor::Password(_) => None,
        };
        state.slots.push(LegacySlot {
            id: id.clone(),
            salt: salts[i],
            index: shares[i].0,
            share,
            hotp,
        });
    }
    state.retag(&key);
    Ok((state, key))
}

struct Opened {
    master: [u8; 32],
    key: DerivedKey,
    kappas: BTreeMap<usize, [u8; 32]>,
}

fn open(state: &LegacyState, w: &BTreeMap<String, GameWitness>) -> Result<Opened, LegacyError> {
    let mut kappas = BTreeMap::new();
    for (id, wit) in w {
        let i = state
            .slot_index(id)
            .ok_or_else(|| LegacyError::Invalid(format!("unknown slot {id}")))?;
        kappas.insert(i, kappa_for(&state.slots[i], wit)?);
    }
    let master = if state.mode.xor_share_combine {
        if kappas.len() != state.slots.len() {
            return Err(LegacyError::Insufficient);
        }
        let mut m = [0u8; 32];
        for k in kappas.values() {
            m = xor(&m, &sha256(k)).try_into().unwrap();
        }
        m
    } else {
        let mut shares = Vec::new();
        for (i, k) in &kappas {
            let s = &state.slots[*i];
            shares.push((s.index, unmask_share(&state.mode, k, &s.salt, &s.share)?));
        }
        combine(&state.mode, &shares, state.threshold)?
    };
    let key = derive_key(state, &master)?;
    if !state.mode.no_state_mac {
        match &state.tag {
            Some(t) if ct_eq(t, &hmac_sha256(key.as_bytes(), &state.encode_body())) => {}
            _ => return Err(LegacyError::Rejected),
        }
    }
    Ok(Opened {
        master,
        key,
        kappas,
    })
}

/// Derive and advance every witnessed HOTP factor.
pub fn derive(
    state: &LegacyState,
    w: &BTreeMap<String, GameWitness>,
) -> Result<(LegacyState, DerivedKey), LegacyError> {
    let o = open(state, w)?;
    let mut next = state.clone();
    for (i, kappa) in &o.kappas {
        let s = &mut next.slots[*i];
        if let Some(h) = &mut s.hotp {
            let secret = open_secret(&state.mode, &o.key, &s.salt, &h.enc_secret)?;
            let v = u32::from_be_bytes(kappa[..4].try_into().unwrap());
            h.counter += 1;
            h.offset = sub_mod(v, hotp_code(&secret, h.counter, OTP_MODULUS), OTP_MODULUS);
        }
    }
    next.retag(&o.key);
    Ok((next, o.key))
}

/// Replace `slot` with `factor`. Every other slot must be witnessed. Without
/// share regeneration the old witness for `slot` is needed too, since its
/// share is kept and only re-masked.
pub fn recover(
    state: &LegacyState,
    w: &BTreeMap<String, GameWitness>,
    slot: &str,
    factor: &GameFactor,
    rng: &mut ChaCha20Rng,
) -> Result<LegacyState, LegacyError> {
    if state.mode.xor_share_combine {
        return Err(LegacyError::Invalid(
            "xor-combined vaults have no recovery".into(),
        ));
    }
    let r = state
        .slot_index(slot)
        .ok_or_else(|| LegacyError::Invalid(format!("unknown slot {slot}")))?;
    let o = open(state, w)?;
    if (0..state.slots.len()).any(|i| i != r && !o.kappas.contains_key(&i)) {
        return Err(LegacyError::Insufficient);
    }
    let (v, new_kappa) = fresh_kappa(factor, rng);
    let mut kappas = o.kappas.clone();
    kappas.insert(r, new_kappa);
    let mut next = state.clone();
    let plain: Vec<(u8, Vec<u8>)> = if state.mode.no_share_regeneration {
        let old = o.kappas.get(&r).ok_or(LegacyError::Insufficient)?;
        let mut out: Vec<(u8, Vec<u8>)> = Vec::new();
        for (i, sl) in state.slots.iter().enumerate() {
            let k = if i == r { old } else { &o.kappas[&i] };
            out.push((sl.index, unmask_share(&state.mode, k, &sl.salt, &sl.share)?));
        }
        out
    } else {
        share_secret(
            &state.mode,
            &o.master,
            state.threshold,
            state.slots.len(),
            rng,
        )
    };
    for (i, sl) in next.slots.iter_mut().enumerate() {
        sl.index = plain[i].0;
        sl.share = mask_share(&state.mode, &kappas[&i], &sl.salt, &plain[i].1);
    }
    let s = &mut next.slots[r];
    s.hotp = match factor {
        GameFactor::Hotp(secret) => Some(LegacyHotp {
            enc_secret: seal_secret(&state.mode, &o.key, &s.salt, secret),
            counter: 0,
            offset: sub_mod(v, hotp_code(secret, 0, OTP_MODULUS), OTP_MODULUS),
        }),
        GameFactor::Password(_) => None,
    };
    next.retag(&o.key);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn factors() -> Vec<(String, GameFactor)> {
        vec![
            ("pw".into(), GameFactor::Password("a".into())),
            ("otp".into(), GameFactor::Hotp(vec![7; 32])),
            ("pw2".into(), GameFactor::Password("b".into())),
        ]
    }

    fn witnesses(state: &LegacyState, ids: &[&str]) -> BTreeMap<String, GameWitness> {
        ids.iter()
            .map(|id| {
                let w = match *id {
                    "pw" => GameWitness::Password("a".into()),
                    "pw2" => GameWitness::Password("b".into()),
                    _ => GameWitness::Code(hotp_code(
                        &[7; 32],
                        state.slots[1].hotp.as_ref().unwrap().counter,
                        OTP_MODULUS,
                    )),
                };
                (id.to_string(), w)
            })
            .collect()
    }

    #[test]
    fn flags_parse() {
        let m = LegacyMode::parse("xor-share-encryption,no-state-mac").unwrap();
        assert_eq!(m.names(), vec!["xor-share-encryption", "no-state-mac"]);
        assert_eq!(m.label(), "legacy(xor-share-encryption+no-state-mac)");
        assert!(LegacyMode::parse("bogus").is_err());
        assert_eq!(LegacyMode::all().names().len(), 6);
    }

    #[test]
    fn every_mode_roundtrips() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let modes = [
            LegacyMode::default(),
            LegacyMode::default().with("xor-share-encryption"),
            LegacyMode::default()
                .with("no-state-mac")
                .with("no-share-regeneration"),
            LegacyMode::default().with("biased-share-format"),
            LegacyMode::default()
                .with("biased-share-format")
                .with("xor-share-encryption"),
        ];
        for mode in modes {
            let (s, key) = setup(
                mode,
                Some(2),
                &factors(),
                None,
                KdfParams::testing(),
                &mut rng,
            )
            .unwrap();
            for ids in [["pw", "otp"], ["otp", "pw2"], ["pw", "pw2"]] {
                let (next, k) = derive(&s, &witnesses(&s, &ids)).unwrap();
                assert_eq!(k, key, "{mode:?}");
                let (_, k2) = derive(&next, &witnesses(&next, &ids)).unwrap();
                assert_eq!(k2, key);
            }
            assert_eq!(
                derive(&s, &witnesses(&s, &["pw"])).unwrap_err(),
                LegacyError::Insufficient
            );
            let mut w = witnesses(&s, &["pw", "pw2", "otp"]);
            let rotated =
                recover(&s, &w, "pw", &GameFactor::Password("c".into()), &mut rng).unwrap();
            w.insert("pw".into(), GameWitness::Password("c".into()));
            w.remove("otp");
            assert_eq!(derive(&rotated, &w).unwrap().1, key);
        }
    }

    #[test]
    fn mac_catches_tampering_unless_disabled() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (mut s, _) = setup(
            LegacyMode::default(),
            Some(2),
            &factors(),
            None,
            KdfParams::testing(),
            &mut rng,
        )
        .unwrap();
        s.slots[0].salt[0] ^= 1;
        let w = witnesses(&s, &["otp", "pw2"]);
        assert_eq!(derive(&s, &w).unwrap_err(), LegacyError::Rejected);
        let mode = LegacyMode::default().with("no-state-mac");
        let (mut s, _) = setup(
            mode,
            Some(2),
            &factors(),
            None,
            KdfParams::testing(),
            &mut rng,
        )
        .unwrap();
        assert!(s.tag.is_none());
        s.slots[0].salt[0] ^= 1;
        assert!(derive(&s, &w).is_ok());
    }

    #[test]
    fn xor_combine_is_order_blind() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let f: Vec<(String, GameFactor)> = ["x", "y", "z"]
            .iter()
            .map(|p| (format!("s{p}"), GameFactor::Password(p.to_string())))
            .collect();
        let (s, key) = setup(
            LegacyMode::default().with("xor-share-combine"),
            None,
            &f,
            None,
            KdfParams::testing(),
            &mut rng,
        )
        .unwrap();
        let w: BTreeMap<String, GameWitness> = [("sx", "z"), ("sy", "x"), ("sz", "y")]
            .iter()
            .map(|(id, p)| (id.to_string(), GameWitness::Password(p.to_string())))
            .collect();
        assert_eq!(derive(&s, &w).unwrap().1, key);
    }
}
