//! Probabilistic hints: a few bits of a salted factor hash, stored so a
//! legitimate user can tell which factor was mistyped.

use serde::Serialize;

use crate::env::Env;
use crate::error::{Error, Result};
use crate::factors::{self, FactorCtx, SourceKey, Witness};
use crate::primitives::sha256_parts;
use crate::state::PolicyState;

pub const DEFAULT_HINT_BITS: u8 = 7;
pub const MAX_HINT_BITS: u8 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HintVerdict {
    Plausible,
    Implausible,
}

/// Top `bits` bits of the first two bytes of `SHA256(kappa || salt || "hint")`.
pub fn hint_value(kappa: &SourceKey, salt: &[u8; 32], bits: u8) -> u16 {
    assert!(
        (1..=MAX_HINT_BITS).contains(&bits),
        "hint width out of range"
    );
    let h = sha256_parts(&[&kappa.0, salt, b"hint"]);
    u16::from_be_bytes([h[0], h[1]]) >> (16 - bits)
}

pub fn check_hint(state: &PolicyState, slot: &str, kappa: &SourceKey) -> Result<HintVerdict> {
    let i = state
        .slot_index(slot)
        .ok_or_else(|| Error::UnknownSlot(slot.to_string()))?;
    let rec = state
        .hints
        .iter()
        .find(|h| h.slot_id == slot)
        .ok_or_else(|| Error::NoHint(slot.to_string()))?;
    Ok(
        if hint_value(kappa, &state.slots[i].salt, rec.bits) == rec.value {
            HintVerdict::Plausible
        } else {
            HintVerdict::Implausible
        },
    )
}

/// Check a witness by running the factor's first derive stage. Any candidate
/// that matches makes the witness plausible.
pub fn check_hint_witness(
    state: &PolicyState,
    slot: &str,
    witness: &Witness,
    env: &mut Env,
) -> Result<HintVerdict> {
    let i = state
        .slot_index(slot)
        .ok_or_else(|| Error::UnknownSlot(slot.to_string()))?;
    if !state.hints.iter().any(|h| h.slot_id == slot) {
        return Err(Error::NoHint(slot.to_string()));
    }
    let cands = match factors::derive1(&state.slots[i].beta, witness, env, FactorCtx::default()) {
        Ok(c) => c,
        Err(factors::FactorError::WrongWitnessKind) => {
            return Err(Error::Factor {
                slot: slot.to_string(),
                source: factors::FactorError::WrongWitnessKind,
            })
        }
        Err(_) => return Ok(HintVerdict::Implausible),
    };
    for k in &cands {
        if check_hint(state, slot, k)? == HintVerdict::Plausible {
            return Ok(HintVerdict::Plausible);
        }
    }
    Ok(HintVerdict::Implausible)
}
