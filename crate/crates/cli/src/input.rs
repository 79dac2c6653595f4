//! Factor arguments and witnesses from the command line.
//!
//! A factor is `KIND[:ID][,key=value|flag...]`. Kinds: password, hotp, totp,
//! passkey (mock device from a 32-byte seed) and fuzzy.

use std::collections::BTreeMap;
use std::sync::Arc;

use mfkdf2::factors::mock::MockPasskey;
use mfkdf2::factors::otp::{HotpConfig, TotpConfig};
use mfkdf2::{FactorMaterial, FactorSpec, FactorType, PolicyState, Witness, Witnesses};
use rand::RngCore;

use crate::Fail;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorArg {
    pub kind: String,
    pub id: String,
    pub opts: BTreeMap<String, String>,
}

pub fn parse_factor(s: &str) -> Result<FactorArg, String> {
    let mut parts = s.split(',');
    let head = parts.next().unwrap_or_default();
    let (kind, id) = match head.split_once(':') {
        Some((k, i)) => (k, i),
        None => (head, head),
    };
    if !["password", "hotp", "totp", "passkey", "fuzzy"].contains(&kind) {
        return Err(format!("unknown factor kind {kind:?}"));
    }
    if id.is_empty() {
        return Err("empty factor id".into());
    }
    let mut opts = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').unwrap_or((p, ""));
        opts.insert(k.to_string(), v.to_string());
    }
    Ok(FactorArg {
        kind: kind.into(),
        id: id.into(),
        opts,
    })
}

/// `ID=VALUE`.
pub fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| format!("expected ID=VALUE, got {s:?}"))
}

fn usage(m: impl Into<String>) -> Fail {
    Fail::Usage(m.into())
}

fn num<T: std::str::FromStr>(f: &FactorArg, key: &str) -> Result<Option<T>, Fail> {
    f.opts
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| usage(format!("factor {}: bad {key} {v:?}", f.id)))
        })
        .transpose()
}

fn seed32(s: &str, what: &str) -> Result<[u8; 32], Fail> {
    hex::decode(s)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| usage(format!("{what} must be 32 bytes of hex")))
}

/// Build setup material. Passwords come from `passwords` in factor order
/// unless given inline with `value=`. OTP secrets are generated when absent
/// and reported through `notes`.
pub fn materials(
    factors: &[FactorArg],
    passwords: &[String],
    notes: &mut Vec<String>,
) -> Result<Vec<FactorSpec>, Fail> {
    let mut pw = passwords.iter();
    let mut out = Vec::new();
    for f in factors {
        let m = match f.kind.as_str() {
            "password" => {
                let v = match f.opts.get("value") {
                    Some(v) => v.clone(),
                    None => pw
                        .next()
                        .cloned()
                        .ok_or_else(|| usage(format!("factor {}: no --password given", f.id)))?,
                };
                FactorMaterial::password(v)
            }
            "hotp" | "totp" => {
                let secret = match f.opts.get("secret") {
                    Some(s) => hex::decode(s)
                        .map_err(|_| usage(format!("factor {}: secret must be hex", f.id)))?,
                    None => {
                        let mut s = vec![0u8; 20];
                        rand::rngs::OsRng.fill_bytes(&mut s);
                        notes.push(format!("{} secret {}", f.id, hex::encode(&s)));
                        s
                    }
                };
                if f.kind == "hotp" {
                    let mut c = HotpConfig::new(secret);
                    if let Some(d) = num(f, "digits")? {
                        c = c.digits(d);
                    }
                    FactorMaterial::Hotp(c)
                } else {
                    let mut c = TotpConfig::new(secret);
                    if let Some(d) = num(f, "digits")? {
                        c = c.digits(d);
                    }
                    if let Some(s) = num(f, "step")? {
                        c = c.step(s);
                    }
                    if let Some(w) = num(f, "window")? {
                        c = c.window(w);
                    }
                    if f.opts.contains_key("oracle") {
                        c = c.with_oracle();
                    }
                    FactorMaterial::Totp(c)
                }
            }
            "passkey" => {
                let seed = seed32(
                    f.opts
                        .get("seed")
                        .ok_or_else(|| usage(format!("factor {}: passkey needs seed=HEX", f.id)))?,
                    "seed",
                )?;
                FactorMaterial::Passkey {
                    credential_id: f.id.as_bytes().to_vec(),
                    device: Arc::new(MockPasskey::new(seed)),
                }
            }
            "fuzzy" => {
                let sample =
                    hex::decode(f.opts.get("sample").map(String::as_str).unwrap_or_default())
                        .map_err(|_| usage(format!("factor {}: sample must be hex", f.id)))?;
                FactorMaterial::Fuzzy {
                    sample,
                    tolerance: num(f, "tolerance")?.unwrap_or(8),
                }
            }
            _ => unreachable!("kind checked at parse time"),
        };
        out.push(FactorSpec::new(f.id.clone(), m));
    }
    if pw.next().is_some() {
        return Err(usage("more --password values than password factors"));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct WitnessArgs {
    pub passwords: Vec<String>,
    pub hotp: Vec<String>,
    pub totp: Vec<String>,
    pub explicit: Vec<(String, String)>,
}

fn witness_for(ty: FactorType, id: &str, value: &str) -> Result<Witness, Fail> {
    let bad = |what: &str| usage(format!("slot {id}: {what}"));
    Ok(match ty {
        FactorType::Password => Witness::password(value),
        FactorType::Hotp | FactorType::Totp => {
            Witness::code(value).map_err(|_| bad("code must be decimal digits"))?
        }
        FactorType::Passkey => {
            Witness::device(Arc::new(MockPasskey::new(seed32(value, "passkey seed")?)))
        }
        FactorType::Fuzzy => {
            Witness::Sample(hex::decode(value).map_err(|_| bad("sample must be hex"))?)
        }
        other => {
            return Err(bad(&format!(
                "{other} witnesses are not available from the command line"
            )))
        }
    })
}

/// Typed flags fill slots of their type in slot order; `--witness ID=VALUE` names one slot.
pub fn witnesses(state: &PolicyState, args: &WitnessArgs) -> Result<Witnesses, Fail> {
    let mut w = Witnesses::new();
    let mut queues: BTreeMap<FactorType, std::slice::Iter<'_, String>> = BTreeMap::new();
    queues.insert(FactorType::Password, args.passwords.iter());
    queues.insert(FactorType::Hotp, args.hotp.iter());
    queues.insert(FactorType::Totp, args.totp.iter());
    let named: BTreeMap<&str, &str> = args
        .explicit
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    for id in named.keys() {
        if state.slot_index(id).is_none() {
            return Err(usage(format!(
                "no slot {id:?}; slots are {}",
                state.slot_ids().join(", ")
            )));
        }
    }
    for slot in &state.slots {
        let value = match named.get(slot.id.as_str()) {
            Some(v) => Some(v.to_string()),
            None => queues
                .get_mut(&slot.factor_type)
                .and_then(|q| q.next())
                .cloned(),
        };
        if let Some(v) = value {
            w.insert(
                slot.id.clone(),
                witness_for(slot.factor_type, &slot.id, &v)?,
            );
        }
    }
    for (ty, mut q) in queues {
        if q.next().is_some() {
            return Err(usage(format!("more {ty} witnesses than {ty} slots")));
        }
    }
    Ok(w)
}
