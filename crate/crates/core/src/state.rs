//! The public vault state and its canonical encoding.
//!
//! The encoding is the MAC input. The vault file is that encoding followed by
//! the 32-byte tag.

use std::collections::HashSet;

use serde::Serialize;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::factors::{FactorState, FactorType};
use crate::policy::{PolicyTree, MAX_DEPTH};
use crate::primitives::{mac, DerivedKey, KdfAlgorithm, KdfParams, MacTag};

pub const VERSION: u8 = 0x02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
#[repr(u8)]
pub enum Mode {
    NOfN = 1,
    Threshold = 2,
    Policy = 3,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::NOfN => "n-of-n",
            Mode::Threshold => "threshold",
            Mode::Policy => "policy",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FactorSlot {
    pub id: String,
    pub factor_type: FactorType,
    #[serde(with = "crate::hexser")]
    pub salt: [u8; 32],
    pub beta: FactorState,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GateNode {
    /// Index into the slot list.
    Leaf(u16),
    Gate(GateState),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GateChild {
    pub node: GateNode,
    /// This child's share of the gate secret, encrypted under the child's key.
    #[serde(with = "crate::hexser")]
    pub ciphertext: [u8; 32],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GateState {
    pub threshold: u8,
    pub children: Vec<GateChild>,
}

impl GateState {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.threshold).u16(self.children.len() as u16);
        for c in &self.children {
            match &c.node {
                GateNode::Leaf(i) => {
                    w.u8(0).u16(*i);
                }
                GateNode::Gate(g) => {
                    w.u8(1);
                    g.encode(w);
                }
            }
            w.fixed(&c.ciphertext);
        }
    }

    fn decode(r: &mut Reader<'_>, depth: usize) -> Result<GateState> {
        if depth > MAX_DEPTH {
            return Err(Error::malformed("policy too deep"));
        }
        let threshold = r.u8()?;
        let n = r.u16()? as usize;
        if n == 0 || n > 255 || threshold == 0 || threshold as usize > n {
            return Err(Error::malformed("policy gate shape"));
        }
        let mut children = Vec::with_capacity(n);
        for _ in 0..n {
            let node = match r.u8()? {
                0 => GateNode::Leaf(r.u16()?),
                1 => GateNode::Gate(GateState::decode(r, depth + 1)?),
                _ => return Err(Error::malformed("policy node tag")),
            };
            children.push(GateChild {
                node,
                ciphertext: r.array32()?,
            });
        }
        Ok(GateState {
            threshold,
            children,
        })
    }

    fn leaf_indices(&self, out: &mut Vec<u16>) {
        for c in &self.children {
            match &c.node {
                GateNode::Leaf(i) => out.push(*i),
                GateNode::Gate(g) => g.leaf_indices(out),
            }
        }
    }

    pub fn to_tree(&self, slots: &[FactorSlot]) -> PolicyTree {
        PolicyTree::Gate {
            threshold: self.threshold as usize,
            children: self
                .children
                .iter()
                .map(|c| match &c.node {
                    GateNode::Leaf(i) => PolicyTree::Leaf(slots[*i as usize].id.clone()),
                    GateNode::Gate(g) => g.to_tree(slots),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HintRecord {
    pub slot_id: String,
    pub bits: u8,
    pub value: u16,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EnvelopeRecord {
    pub label: String,
    #[serde(with = "crate::hexser")]
    pub nonce: [u8; 32],
    #[serde(with = "crate::hexser")]
    pub ciphertext: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyState {
    pub version: u8,
    pub mode: Mode,
    pub threshold: u8,
    pub factor_count: u8,
    #[serde(with = "crate::hexser")]
    pub salt_k: [u8; 32],
    pub kdf_algorithm: u8,
    pub kdf: KdfParams,
    pub slots: Vec<FactorSlot>,
    #[serde(serialize_with = "hex_list")]
    pub shares: Vec<[u8; 32]>,
    pub policy: Option<GateState>,
    pub hints: Vec<HintRecord>,
    pub envelopes: Vec<EnvelopeRecord>,
    #[serde(serialize_with = "hex_tag")]
    pub tag: MacTag,
}

fn hex_list<S: serde::Serializer>(v: &[[u8; 32]], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(hex::encode))
}

fn hex_tag<S: serde::Serializer>(v: &MacTag, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(v.0))
}

impl PolicyState {
    /// Canonical encoding of every field except the tag.
    pub fn encode_body(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.version)
            .u8(self.mode as u8)
            .u8(self.threshold)
            .u8(self.factor_count);
        w.fixed(&self.salt_k);
        w.u8(self.kdf_algorithm)
            .u32(self.kdf.memory_kib)
            .u32(self.kdf.time_cost)
            .u32(self.kdf.parallelism);
        w.u16(self.slots.len() as u16);
        for s in &self.slots {
            w.str(&s.id)
                .u8(s.factor_type.tag())
                .fixed(&s.salt)
                .bytes(&s.beta.encode());
        }
        w.u16(self.shares.len() as u16);
        for c in &self.shares {
            w.fixed(c);
        }
        match &self.policy {
            None => {
                w.u8(0);
            }
            Some(g) => {
                w.u8(1);
                g.encode(&mut w);
            }
        }
        w.u16(self.hints.len() as u16);
        for h in &self.hints {
            w.str(&h.slot_id).u8(h.bits).u16(h.value);
        }
        w.u16(self.envelopes.len() as u16);
        for e in &self.envelopes {
            w.str(&e.label).fixed(&e.nonce).bytes(&e.ciphertext);
        }
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = self.encode_body();
        b.extend_from_slice(&self.tag.0);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PolicyState> {
        if bytes.len() < 32 {
            return Err(Error::malformed("vault too short"));
        }
        let (body, tag) = bytes.split_at(bytes.len() - 32);
        let mut r = Reader::new(body);
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::malformed(format!(
                "unsupported version {version:#04x}"
            )));
        }
        let mode = match r.u8()? {
            1 => Mode::NOfN,
            2 => Mode::Threshold,
            3 => Mode::Policy,
            m => return Err(Error::malformed(format!("unknown mode {m}"))),
        };
        let threshold = r.u8()?;
        let factor_count = r.u8()?;
        let salt_k = r.array32()?;
        let kdf_algorithm = r.u8()?;
        let kdf = KdfParams {
            memory_kib: r.u32()?,
            time_cost: r.u32()?,
            parallelism: r.u32()?,
        };
        let ns = r.u16()? as usize;
        let mut slots = Vec::with_capacity(ns.min(255));
        for _ in 0..ns {
            let id = r.str()?;
            let ty = FactorType::from_tag(r.u8()?)
                .ok_or_else(|| Error::malformed("unknown factor type"))?;
            let salt = r.array32()?;
            let beta = FactorState::decode(ty, &r.bytes()?)?;
            slots.push(FactorSlot {
                id,
                factor_type: ty,
                salt,
                beta,
            });
        }
        let nc = r.u16()? as usize;
        let mut shares = Vec::with_capacity(nc.min(255));
        for _ in 0..nc {
            shares.push(r.array32()?);
        }
        let policy = match r.u8()? {
            0 => None,
            1 => Some(GateState::decode(&mut r, 0)?),
            _ => return Err(Error::malformed("policy presence flag")),
        };
        let nh = r.u16()? as usize;
        let mut hints = Vec::with_capacity(nh.min(255));
        for _ in 0..nh {
            hints.push(HintRecord {
                slot_id: r.str()?,
                bits: r.u8()?,
                value: r.u16()?,
            });
        }
        let ne = r.u16()? as usize;
        let mut envelopes = Vec::with_capacity(ne.min(1024));
        for _ in 0..ne {
            envelopes.push(EnvelopeRecord {
                label: r.str()?,
                nonce: r.array32()?,
                ciphertext: r.bytes()?,
            });
        }
        r.finish()?;
        let state = PolicyState {
            version,
            mode,
            threshold,
            factor_count,
            salt_k,
            kdf_algorithm,
            kdf,
            slots,
            shares,
            policy,
            hints,
            envelopes,
            tag: MacTag(tag.try_into().unwrap()),
        };
        state.validate()?;
        Ok(state)
    }

    /// Structural invariants. Authenticity is checked separately by the MAC.
    pub fn validate(&self) -> Result<()> {
        let n = self.slots.len();
        if n == 0 || n > 255 || self.factor_count as usize != n {
            return Err(Error::malformed("factor count"));
        }
        if KdfAlgorithm::from_id(self.kdf_algorithm).is_none() {
            return Err(Error::malformed("unknown kdf algorithm"));
        }
        let mut ids = HashSet::new();
        for s in &self.slots {
            if s.id.is_empty() || !ids.insert(s.id.as_str()) {
                return Err(Error::malformed("slot ids must be unique and non-empty"));
            }
            if s.beta.factor_type() != s.factor_type {
                return Err(Error::malformed("slot type mismatch"));
            }
        }
        let t = self.threshold as usize;
        match self.mode {
            Mode::NOfN => {
                if t != n || !self.shares.is_empty() || self.policy.is_some() {
                    return Err(Error::malformed("n-of-n shape"));
                }
            }
            Mode::Threshold => {
                if t == 0 || t > n || self.shares.len() != n || self.policy.is_some() {
                    return Err(Error::malformed("threshold shape"));
                }
            }
            Mode::Policy => {
                let Some(g) = &self.policy else {
                    return Err(Error::malformed("policy mode without policy"));
                };
                if !self.shares.is_empty() || t != g.threshold as usize {
                    return Err(Error::malformed("policy shape"));
                }
                let mut leaves = Vec::new();
                g.leaf_indices(&mut leaves);
                leaves.sort_unstable();
                if leaves.len() != n || leaves.iter().enumerate().any(|(i, &l)| l as usize != i) {
                    return Err(Error::malformed(
                        "policy must reference every slot exactly once",
                    ));
                }
            }
        }
        let mut hinted = HashSet::new();
        for h in &self.hints {
            if !ids.contains(h.slot_id.as_str()) || !hinted.insert(h.slot_id.as_str()) {
                return Err(Error::malformed("hint slot"));
            }
            if h.bits == 0 || h.bits > 16 || (h.bits < 16 && h.value >> h.bits != 0) {
                return Err(Error::malformed("hint width"));
            }
        }
        let mut labels = HashSet::new();
        for e in &self.envelopes {
            if !labels.insert(e.label.as_str()) {
                return Err(Error::malformed("duplicate envelope label"));
            }
        }
        for s in &self.slots {
            if let Some(deps) = s.beta.oracle_dependencies() {
                for d in deps {
                    let ok = self
                        .slots
                        .iter()
                        .any(|o| &o.id == d && o.factor_type.is_static());
                    if !ok {
                        return Err(Error::malformed(
                            "oracle local key references a non-static slot",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn slot_index(&self, id: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.id == id)
    }

    pub fn slot_ids(&self) -> Vec<&str> {
        self.slots.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn verify(&self, key: &DerivedKey) -> bool {
        crate::primitives::mac_verify(key, &self.encode_body(), &self.tag)
    }

    pub(crate) fn seal(mut self, key: &DerivedKey) -> PolicyState {
        self.tag = mac(key, &self.encode_body());
        self
    }

    /// The policy as a tree of slot ids. Threshold and n-of-n vaults become a single gate.
    pub fn policy_tree(&self) -> PolicyTree {
        match &self.policy {
            Some(g) => g.to_tree(&self.slots),
            None => PolicyTree::Gate {
                threshold: self.threshold as usize,
                children: self
                    .slots
                    .iter()
                    .map(|s| PolicyTree::Leaf(s.id.clone()))
                    .collect(),
            },
        }
    }

    /// Human-readable JSON. Not an input format.
    pub fn debug_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }
}
