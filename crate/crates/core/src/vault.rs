//! Setup, derive, recover and parameter upgrade over every vault mode.

use std::collections::{BTreeMap, BTreeSet};

use crate::env::Env;
use crate::error::{Error, Result};
use crate::factors::{
    self, FactorCtx, FactorError, FactorMaterial, FactorState, FeedbackKey, Pending, SourceKey,
    Witness,
};
use crate::hints;
use crate::oracle;
use crate::policy::PolicyTree;
use crate::primitives::{
    derive_share_key, kdf, prp_decrypt, prp_encrypt, sha256_parts, DerivedKey, KdfParams, MacTag,
    PrimitiveError, PrpKey, KDF_ALGORITHM,
};
use crate::sss::{self, Share};
use crate::state::{
    FactorSlot, GateChild, GateNode, GateState, HintRecord, Mode, PolicyState, VERSION,
};

/// Upper bound on candidate combinations tried against the MAC in one derive.
const MAX_COMBINATIONS: usize = 64;

pub struct FactorSpec {
    pub id: String,
    pub material: FactorMaterial,
}

impl FactorSpec {
    pub fn new(id: impl Into<String>, material: FactorMaterial) -> FactorSpec {
        FactorSpec {
            id: id.into(),
            material,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SetupOptions {
    pub params: KdfParams,
    /// Slot id and hint width in bits. A width of 0 stores nothing.
    pub hints: Vec<(String, u8)>,
}

impl SetupOptions {
    pub fn new(params: KdfParams) -> SetupOptions {
        SetupOptions {
            params,
            hints: Vec::new(),
        }
    }

    pub fn with_hint(mut self, slot: impl Into<String>, bits: u8) -> SetupOptions {
        self.hints.push((slot.into(), bits));
        self
    }
}

impl Default for SetupOptions {
    fn default() -> Self {
        SetupOptions::new(KdfParams::default())
    }
}

/// Witnesses keyed by slot id.
#[derive(Clone, Debug, Default)]
pub struct Witnesses(BTreeMap<String, Witness>);

impl Witnesses {
    pub fn new() -> Witnesses {
        Witnesses::default()
    }

    pub fn with(mut self, slot: impl Into<String>, w: Witness) -> Witnesses {
        self.0.insert(slot.into(), w);
        self
    }

    pub fn insert(&mut self, slot: impl Into<String>, w: Witness) {
        self.0.insert(slot.into(), w);
    }

    pub fn get(&self, slot: &str) -> Option<&Witness> {
        self.0.get(slot)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// Result of a successful derive.
#[derive(Debug)]
pub struct Derivation {
    pub state: PolicyState,
    pub key: DerivedKey,
    /// Slots whose witnesses contributed, in slot order.
    pub used: Vec<String>,
    /// Candidate keys checked against the MAC.
    pub attempts: usize,
}

/// Salted per-slot digest `SHA256(kappa || salt)`.
pub fn slot_digest(kappa: &SourceKey, salt: &[u8; 32]) -> [u8; 32] {
    sha256_parts(&[&kappa.0, salt])
}

/// Key under which a slot's share is stored.
pub fn slot_share_key(kappa: &SourceKey, salt: &[u8; 32]) -> PrpKey {
    derive_share_key(&slot_digest(kappa, salt))
}

fn factor_err(slot: &str) -> impl FnOnce(FactorError) -> Error + '_ {
    move |source| Error::Factor {
        slot: slot.to_string(),
        source,
    }
}

fn kdf_err(e: PrimitiveError) -> Error {
    match e {
        PrimitiveError::KdfBounds(m) => Error::InvalidParameter(m),
        other => Error::Primitive(other),
    }
}

fn local_key_for(
    deps: &[String],
    slots: &[FactorSlot],
    digests: &[Option<[u8; 32]>],
) -> Option<[u8; 32]> {
    let mut parts = Vec::with_capacity(deps.len());
    for d in deps {
        let i = slots.iter().position(|s| &s.id == d)?;
        parts.push(digests[i]?);
    }
    Some(oracle::local_key(&parts))
}

struct Prepared {
    slots: Vec<SlotDraft>,
    local_key_slots: Vec<String>,
    local_key: Option<[u8; 32]>,
}

struct SlotDraft {
    id: String,
    pending: Option<Pending>,
    kappa: SourceKey,
    salt: [u8; 32],
    digest: [u8; 32],
}

fn static_slot_ids(ids: impl Iterator<Item = (String, bool)>) -> Vec<String> {
    ids.filter(|(_, s)| *s).map(|(id, _)| id).collect()
}

fn prepare(factors: Vec<FactorSpec>, env: &mut Env) -> Result<Prepared> {
    if factors.is_empty() {
        return Err(Error::InvalidParameter(
            "a vault needs at least one factor".into(),
        ));
    }
    if factors.len() > sss::MAX_SHARES {
        return Err(Error::InvalidParameter(format!(
            "at most {} factors",
            sss::MAX_SHARES
        )));
    }
    let mut seen = BTreeSet::new();
    for f in &factors {
        if f.id.is_empty() || f.id.len() > 255 {
            return Err(Error::InvalidParameter(
                "slot ids must be 1..=255 bytes".into(),
            ));
        }
        if !seen.insert(f.id.clone()) {
            return Err(Error::DuplicateSlot(f.id.clone()));
        }
    }
    let local_key_slots = static_slot_ids(
        factors
            .iter()
            .map(|f| (f.id.clone(), f.material.factor_type().is_static())),
    );
    if factors.iter().any(|f| f.material.uses_oracle()) && local_key_slots.is_empty() {
        return Err(Error::InvalidParameter(
            "oracle-backed totp needs at least one static factor in the vault".into(),
        ));
    }
    let mut slots = Vec::with_capacity(factors.len());
    for f in factors {
        let (pending, kappa) = factors::setup(&f.material, env).map_err(factor_err(&f.id))?;
        let salt = env.random_32();
        let digest = slot_digest(&kappa, &salt);
        slots.push(SlotDraft {
            id: f.id,
            pending: Some(pending),
            kappa,
            salt,
            digest,
        });
    }
    let local_key = if local_key_slots.is_empty() {
        None
    } else {
        let parts: Vec<[u8; 32]> = local_key_slots
            .iter()
            .map(|id| slots.iter().find(|s| &s.id == id).unwrap().digest)
            .collect();
        Some(oracle::local_key(&parts))
    };
    Ok(Prepared {
        slots,
        local_key_slots,
        local_key,
    })
}

fn share_among(
    secret: &[u8; 32],
    t: usize,
    keys: &[PrpKey],
    env: &mut Env,
) -> Result<Vec<[u8; 32]>> {
    let shares = sss::share(secret, t, keys.len(), env.rng())?;
    keys.iter()
        .zip(&shares)
        .map(|(k, s)| prp_encrypt(k, &s.bytes).map_err(Error::from))
        .collect()
}

fn build_gate(
    tree: &PolicyTree,
    secret: &[u8; 32],
    index: &BTreeMap<&str, usize>,
    digests: &[[u8; 32]],
    env: &mut Env,
) -> Result<GateState> {
    let PolicyTree::Gate {
        threshold,
        children,
    } = tree
    else {
        unreachable!("normalized")
    };
    let mut keys = Vec::with_capacity(children.len());
    let mut nodes = Vec::with_capacity(children.len());
    for c in children {
        match c {
            PolicyTree::Leaf(id) => {
                let i = index[id.as_str()];
                keys.push(derive_share_key(&digests[i]));
                nodes.push(GateNode::Leaf(i as u16));
            }
            PolicyTree::Gate { .. } => {
                let sub = env.random_32();
                keys.push(derive_share_key(&sub));
                nodes.push(GateNode::Gate(build_gate(c, &sub, index, digests, env)?));
            }
        }
    }
    let cts = share_among(secret, *threshold, &keys, env)?;
    Ok(GateState {
        threshold: *threshold as u8,
        children: nodes
            .into_iter()
            .zip(cts)
            .map(|(node, ciphertext)| GateChild { node, ciphertext })
            .collect(),
    })
}

/// Evaluate a gate given the slot digests that are available.
fn eval_gate(g: &GateState, digests: &[Option<[u8; 32]>]) -> Option<[u8; 32]> {
    let mut shares = Vec::new();
    for (i, c) in g.children.iter().enumerate() {
        let key = match &c.node {
            GateNode::Leaf(l) => digests
                .get(*l as usize)
                .copied()
                .flatten()
                .map(|d| derive_share_key(&d)),
            GateNode::Gate(sub) => eval_gate(sub, digests).map(|s| derive_share_key(&s)),
        };
        if let Some(k) = key {
            shares.push(Share {
                index: (i + 1) as u8,
                bytes: prp_decrypt(&k, &c.ciphertext).ok()?.to_vec(),
            });
        }
    }
    if shares.len() < g.threshold as usize {
        return None;
    }
    sss::combine(&shares, g.threshold as usize)
        .ok()?
        .try_into()
        .ok()
}

fn gate_satisfied(g: &GateState, present: &[bool]) -> bool {
    g.children
        .iter()
        .filter(|c| match &c.node {
            GateNode::Leaf(l) => present.get(*l as usize).copied().unwrap_or(false),
            GateNode::Gate(sub) => gate_satisfied(sub, present),
        })
        .count()
        >= g.threshold as usize
}

fn make_hints(opts: &SetupOptions, slots: &[SlotDraft]) -> Result<Vec<HintRecord>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (id, bits) in &opts.hints {
        let s = slots
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| Error::UnknownSlot(id.clone()))?;
        if *bits > hints::MAX_HINT_BITS {
            return Err(Error::InvalidParameter(format!(
                "hints are at most {} bits",
                hints::MAX_HINT_BITS
            )));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::InvalidParameter(format!(
                "two hints for slot {id:?}"
            )));
        }
        if *bits > 0 {
            out.push(HintRecord {
                slot_id: id.clone(),
                bits: *bits,
                value: hints::hint_value(&s.kappa, &s.salt, *bits),
            });
        }
    }
    Ok(out)
}

enum Shape {
    NOfN,
    Threshold(usize, Option<[u8; 32]>),
    Policy(PolicyTree),
}

fn setup_inner(
    shape: Shape,
    factors: Vec<FactorSpec>,
    opts: &SetupOptions,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    env.bounds.check(&opts.params).map_err(kdf_err)?;
    let n = factors.len();
    if let Shape::Threshold(t, _) = &shape {
        if *t == 0 || *t > n {
            return Err(Error::InvalidParameter(format!(
                "threshold {t} invalid for {n} factors"
            )));
        }
    }
    let tree = match &shape {
        Shape::Policy(tree) => {
            tree.validate()?;
            let tree = tree.clone().normalized();
            let leaves: BTreeSet<&str> = tree.leaves().into_iter().collect();
            let ids: BTreeSet<&str> = factors.iter().map(|f| f.id.as_str()).collect();
            if leaves != ids || leaves.len() != n {
                return Err(Error::InvalidParameter(
                    "policy leaves must name every factor exactly once".into(),
                ));
            }
            Some(tree)
        }
        _ => None,
    };
    let mut prep = prepare(factors, env)?;
    let digests: Vec<[u8; 32]> = prep.slots.iter().map(|s| s.digest).collect();
    let salt_k = env.random_32();

    let (mode, threshold, master, shares, policy) = match shape {
        Shape::NOfN => (Mode::NOfN, n, digests.concat(), Vec::new(), None),
        Shape::Threshold(t, secret) => {
            let m = secret.unwrap_or_else(|| env.random_32());
            let keys: Vec<PrpKey> = digests.iter().map(|d| derive_share_key(d)).collect();
            let cts = share_among(&m, t, &keys, env)?;
            (Mode::Threshold, t, m.to_vec(), cts, None)
        }
        Shape::Policy(_) => {
            let tree = tree.unwrap();
            let m = env.random_32();
            let index: BTreeMap<&str, usize> = prep
                .slots
                .iter()
                .enumerate()
                .map(|(i, s)| (s.id.as_str(), i))
                .collect();
            let g = build_gate(&tree, &m, &index, &digests, env)?;
            (
                Mode::Policy,
                g.threshold as usize,
                m.to_vec(),
                Vec::new(),
                Some(g),
            )
        }
    };
    let key = kdf(&master, &salt_k, &opts.params, &env.bounds).map_err(kdf_err)?;
    let hints = make_hints(opts, &prep.slots)?;

    let mut slots = Vec::with_capacity(n);
    for d in &mut prep.slots {
        let fk = FeedbackKey::derive(&key, &d.salt);
        let ctx = FactorCtx {
            local_key: prep.local_key.as_ref(),
            local_key_slots: &prep.local_key_slots,
        };
        let beta = factors::seal(d.pending.take().unwrap(), &d.kappa, &fk, env, ctx)
            .map_err(factor_err(&d.id))?;
        slots.push(FactorSlot {
            id: d.id.clone(),
            factor_type: beta.factor_type(),
            salt: d.salt,
            beta,
        });
    }
    let state = PolicyState {
        version: VERSION,
        mode,
        threshold: threshold as u8,
        factor_count: n as u8,
        salt_k,
        kdf_algorithm: KDF_ALGORITHM.id(),
        kdf: opts.params,
        slots,
        shares,
        policy,
        hints,
        envelopes: Vec::new(),
        tag: MacTag([0; 32]),
    }
    .seal(&key);
    Ok((state, key))
}

/// All factors required, combined in slot order.
pub fn setup_nn(
    factors: Vec<FactorSpec>,
    opts: &SetupOptions,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    setup_inner(Shape::NOfN, factors, opts, env)
}

/// Any `t` of the factors.
pub fn setup_threshold(
    t: usize,
    factors: Vec<FactorSpec>,
    opts: &SetupOptions,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    setup_inner(Shape::Threshold(t, None), factors, opts, env)
}

/// Threshold setup with a caller-chosen master secret. Meant for game
/// challengers that must pick between two known secrets.
pub fn setup_threshold_with_secret(
    t: usize,
    factors: Vec<FactorSpec>,
    master: [u8; 32],
    opts: &SetupOptions,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    setup_inner(Shape::Threshold(t, Some(master)), factors, opts, env)
}

/// Factors combined by a policy tree whose leaves are the factor ids.
pub fn setup_policy(
    tree: &PolicyTree,
    factors: Vec<FactorSpec>,
    opts: &SetupOptions,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    setup_inner(Shape::Policy(tree.clone()), factors, opts, env)
}

/// A MAC-verified opening of a state.
struct Opened {
    key: DerivedKey,
    master: Vec<u8>,
    /// Source keys of the contributing slots.
    kappas: Vec<Option<SourceKey>>,
    digests: Vec<Option<[u8; 32]>>,
    attempts: usize,
}

fn check_algorithm(state: &PolicyState) -> Result<()> {
    if state.kdf_algorithm != KDF_ALGORITHM.id() {
        return Err(Error::UnsupportedKdf(state.kdf_algorithm));
    }
    Ok(())
}

fn open(state: &PolicyState, w: &Witnesses, env: &mut Env) -> Result<Opened> {
    state.validate()?;
    check_algorithm(state)?;
    for id in w.slots() {
        if state.slot_index(id).is_none() {
            return Err(Error::UnknownSlot(id.to_string()));
        }
    }
    let n = state.slots.len();
    let t = state.threshold as usize;
    let supplied: Vec<bool> = state.slots.iter().map(|s| w.get(&s.id).is_some()).collect();
    let enough = |present: &[bool]| match state.mode {
        Mode::NOfN => present.iter().all(|p| *p),
        Mode::Threshold => present.iter().filter(|p| **p).count() >= t,
        Mode::Policy => gate_satisfied(state.policy.as_ref().unwrap(), present),
    };
    if !enough(&supplied) {
        return Err(Error::DerivationFailed);
    }

    let mut cands: Vec<Vec<SourceKey>> = vec![Vec::new(); n];
    let mut static_digests: Vec<Option<[u8; 32]>> = vec![None; n];
    let order = (0..n)
        .filter(|i| state.slots[*i].factor_type.is_static())
        .chain((0..n).filter(|i| !state.slots[*i].factor_type.is_static()));
    for i in order {
        let slot = &state.slots[i];
        let Some(wit) = w.get(&slot.id) else { continue };
        let lk = slot
            .beta
            .oracle_dependencies()
            .and_then(|deps| local_key_for(deps, &state.slots, &static_digests));
        let ctx = FactorCtx {
            local_key: lk.as_ref(),
            local_key_slots: &[],
        };
        match factors::derive1(&slot.beta, wit, env, ctx) {
            Ok(v) if !v.is_empty() => {
                if slot.factor_type.is_static() {
                    static_digests[i] = Some(slot_digest(&v[0], &slot.salt));
                }
                cands[i] = v;
            }
            Ok(_) => {}
            Err(FactorError::WrongWitnessKind) => {
                return Err(factor_err(&slot.id)(FactorError::WrongWitnessKind))
            }
            // A supplied witness that cannot even produce candidates is wrong, not absent.
            Err(_) => return Err(Error::DerivationFailed),
        }
    }
    let present: Vec<bool> = cands.iter().map(|c| !c.is_empty()).collect();
    if !enough(&present) {
        return Err(Error::DerivationFailed);
    }

    let live: Vec<usize> = (0..n).filter(|i| present[*i]).collect();
    let mut choice = vec![0usize; live.len()];
    let mut attempts = 0;
    loop {
        let mut digests: Vec<Option<[u8; 32]>> = vec![None; n];
        for (j, &i) in live.iter().enumerate() {
            digests[i] = Some(slot_digest(&cands[i][choice[j]], &state.slots[i].salt));
        }
        if let Some(master) = master_from(state, &digests) {
            attempts += 1;
            let key =
                kdf(&master, &state.salt_k, &state.kdf, &env.bounds).map_err(|e| match e {
                    PrimitiveError::KdfBounds(m) => {
                        Error::malformed(format!("kdf parameters: {m}"))
                    }
                    other => Error::Primitive(other),
                })?;
            if state.verify(&key) {
                let mut kappas = vec![None; n];
                for (j, &i) in live.iter().enumerate() {
                    kappas[i] = Some(cands[i][choice[j]].clone());
                }
                return Ok(Opened {
                    key,
                    master,
                    kappas,
                    digests,
                    attempts,
                });
            }
        }
        // Next combination in mixed radix, first slot fastest.
        let mut j = 0;
        loop {
            if j == live.len() {
                return Err(Error::DerivationFailed);
            }
            choice[j] += 1;
            if choice[j] < cands[live[j]].len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
        if attempts >= MAX_COMBINATIONS {
            return Err(Error::DerivationFailed);
        }
    }
}

fn master_from(state: &PolicyState, digests: &[Option<[u8; 32]>]) -> Option<Vec<u8>> {
    match state.mode {
        Mode::NOfN => {
            let mut m = Vec::with_capacity(32 * digests.len());
            for d in digests {
                m.extend_from_slice(&(*d)?);
            }
            Some(m)
        }
        Mode::Threshold => {
            let mut shares = Vec::new();
            for (i, d) in digests.iter().enumerate() {
                if let Some(d) = d {
                    let s = prp_decrypt(&derive_share_key(d), &state.shares[i]).ok()?;
                    shares.push(Share {
                        index: (i + 1) as u8,
                        bytes: s.to_vec(),
                    });
                }
            }
            sss::combine(&shares, state.threshold as usize).ok()
        }
        Mode::Policy => eval_gate(state.policy.as_ref()?, digests).map(|m| m.to_vec()),
    }
}

/// Second-stage updates for the contributing slots under `key`.
fn feedback(
    state: &PolicyState,
    opened: &Opened,
    w: &Witnesses,
    key: &DerivedKey,
    old_key: Option<&DerivedKey>,
    env: &mut Env,
) -> Result<Vec<FactorSlot>> {
    let mut slots = state.slots.clone();
    for (i, slot) in slots.iter_mut().enumerate() {
        let fk = FeedbackKey::derive(key, &slot.salt);
        match (&opened.kappas[i], w.get(&slot.id)) {
            (Some(kappa), Some(wit)) => {
                let lk = slot
                    .beta
                    .oracle_dependencies()
                    .and_then(|d| local_key_for(d, &state.slots, &opened.digests));
                let ctx = FactorCtx {
                    local_key: lk.as_ref(),
                    local_key_slots: &[],
                };
                slot.beta = factors::derive2(&slot.beta, &fk, kappa, wit, env, ctx)
                    .map_err(factor_err(&slot.id))?;
            }
            _ => {
                if let Some(old) = old_key {
                    let ofk = FeedbackKey::derive(old, &slot.salt);
                    slot.beta =
                        factors::rekey(&slot.beta, &ofk, &fk, env).map_err(factor_err(&slot.id))?;
                }
            }
        }
    }
    Ok(slots)
}

fn used_ids(state: &PolicyState, opened: &Opened) -> Vec<String> {
    state
        .slots
        .iter()
        .zip(&opened.kappas)
        .filter(|(_, k)| k.is_some())
        .map(|(s, _)| s.id.clone())
        .collect()
}

/// Derive the key and the next state. On failure nothing changes; on
/// success the returned state replaces the old one.
pub fn derive_full(state: &PolicyState, w: &Witnesses, env: &mut Env) -> Result<Derivation> {
    let opened = open(state, w, env)?;
    let slots = feedback(state, &opened, w, &opened.key, None, env)?;
    let next = PolicyState {
        slots,
        ..state.clone()
    }
    .seal(&opened.key);
    Ok(Derivation {
        used: used_ids(state, &opened),
        attempts: opened.attempts,
        state: next,
        key: opened.key,
    })
}

pub fn derive(
    state: &PolicyState,
    w: &Witnesses,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    derive_full(state, w, env).map(|d| (d.state, d.key))
}

/// n-of-n derive with witnesses given in slot order.
pub fn derive_nn(
    state: &PolicyState,
    witnesses: &[Witness],
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    if state.mode != Mode::NOfN {
        return Err(Error::UnsupportedMode(state.mode.name()));
    }
    if witnesses.len() != state.slots.len() {
        return Err(Error::DerivationFailed);
    }
    let w = state
        .slots
        .iter()
        .zip(witnesses)
        .fold(Witnesses::new(), |acc, (s, x)| {
            acc.with(s.id.clone(), x.clone())
        });
    derive(state, &w, env)
}

pub fn derive_threshold(
    state: &PolicyState,
    w: &Witnesses,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    if state.mode != Mode::Threshold {
        return Err(Error::UnsupportedMode(state.mode.name()));
    }
    derive(state, w, env)
}

/// Replace the factor in `slot` while keeping the derived key. Every other
/// slot must be witnessed so that the whole sharing can be regenerated.
///
/// An oracle-backed TOTP needs every static factor to reach the oracle, so it
/// cannot stand in for a lost static factor.
pub fn recover(
    state: &PolicyState,
    w: &Witnesses,
    slot: &str,
    material: FactorMaterial,
    env: &mut Env,
) -> Result<PolicyState> {
    if state.mode == Mode::NOfN {
        return Err(Error::UnsupportedMode(state.mode.name()));
    }
    let r = state
        .slot_index(slot)
        .ok_or_else(|| Error::UnknownSlot(slot.to_string()))?;
    let missing: Vec<String> = state
        .slots
        .iter()
        .filter(|s| s.id != slot && w.get(&s.id).is_none())
        .map(|s| s.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::RetainedFactorsMissing(missing));
    }
    // A witness for the replaced slot may be given, e.g. when rotating a
    // password; it takes part in opening but not in the new state.
    let opened = open(state, w, env)?;
    let dropped: Vec<String> = state
        .slots
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != r && opened.kappas[*i].is_none())
        .map(|(_, s)| s.id.clone())
        .collect();
    if !dropped.is_empty() {
        return Err(Error::RetainedFactorsMissing(dropped));
    }
    let key = &opened.key;

    let (pending, kappa) = factors::setup(&material, env).map_err(factor_err(slot))?;
    let mut pending = Some(pending);
    let salt = env.random_32();
    let mut digests: Vec<[u8; 32]> = Vec::with_capacity(state.slots.len());
    let mut kappas: Vec<SourceKey> = Vec::with_capacity(state.slots.len());
    for (i, d) in opened.digests.iter().enumerate() {
        if i == r {
            digests.push(slot_digest(&kappa, &salt));
            kappas.push(kappa.clone());
        } else {
            digests.push(d.expect("retained slot opened"));
            kappas.push(opened.kappas[i].clone().unwrap());
        }
    }
    let is_static: Vec<bool> = state
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if i == r {
                material.factor_type().is_static()
            } else {
                s.factor_type.is_static()
            }
        })
        .collect();
    let lk_slots = static_slot_ids(
        state
            .slots
            .iter()
            .zip(&is_static)
            .map(|(s, st)| (s.id.clone(), *st)),
    );
    let uses_oracle = state
        .slots
        .iter()
        .enumerate()
        .any(|(i, s)| i != r && s.beta.oracle_dependencies().is_some())
        || material.uses_oracle();
    if uses_oracle && lk_slots.is_empty() {
        return Err(Error::InvalidParameter(
            "oracle-backed totp needs at least one static factor in the vault".into(),
        ));
    }
    let lk = if lk_slots.is_empty() {
        None
    } else {
        let parts: Vec<[u8; 32]> = lk_slots
            .iter()
            .map(|id| digests[state.slot_index(id).unwrap()])
            .collect();
        Some(oracle::local_key(&parts))
    };
    let ctx = FactorCtx {
        local_key: lk.as_ref(),
        local_key_slots: &lk_slots,
    };

    let mut slots = Vec::with_capacity(state.slots.len());
    for (i, s) in state.slots.iter().enumerate() {
        if i == r {
            let fk = FeedbackKey::derive(key, &salt);
            let beta = factors::seal(pending.take().unwrap(), &kappa, &fk, env, ctx)
                .map_err(factor_err(slot))?;
            slots.push(FactorSlot {
                id: s.id.clone(),
                factor_type: beta.factor_type(),
                salt,
                beta,
            });
            continue;
        }
        let fk = FeedbackKey::derive(key, &s.salt);
        let wit = w.get(&s.id).unwrap();
        let mut beta =
            factors::derive2(&s.beta, &fk, &kappas[i], wit, env, ctx).map_err(factor_err(&s.id))?;
        if let FactorState::Totp(t) = &mut beta {
            if t.oracle {
                t.local_key_slots = lk_slots.clone();
            }
        }
        slots.push(FactorSlot { beta, ..s.clone() });
    }

    let master: [u8; 32] = opened
        .master
        .as_slice()
        .try_into()
        .map_err(|_| Error::malformed("master length"))?;
    let (shares, policy) = match state.mode {
        Mode::Threshold => {
            let keys: Vec<PrpKey> = digests.iter().map(|d| derive_share_key(d)).collect();
            (
                share_among(&master, state.threshold as usize, &keys, env)?,
                None,
            )
        }
        Mode::Policy => {
            let tree = state.policy_tree();
            let index: BTreeMap<&str, usize> = state
                .slots
                .iter()
                .enumerate()
                .map(|(i, s)| (s.id.as_str(), i))
                .collect();
            (
                Vec::new(),
                Some(build_gate(&tree, &master, &index, &digests, env)?),
            )
        }
        Mode::NOfN => unreachable!(),
    };

    let hints = state
        .hints
        .iter()
        .map(|h| {
            if h.slot_id == slot {
                HintRecord {
                    value: hints::hint_value(&kappa, &salt, h.bits),
                    ..h.clone()
                }
            } else {
                h.clone()
            }
        })
        .collect();

    Ok(PolicyState {
        slots,
        shares,
        policy,
        hints,
        ..state.clone()
    }
    .seal(key))
}

/// Re-derive under stronger KDF parameters. The key changes; enveloped
/// secrets and OTP secrets move to the new key.
pub fn upgrade_params(
    state: &PolicyState,
    w: &Witnesses,
    params: KdfParams,
    env: &mut Env,
) -> Result<(PolicyState, DerivedKey)> {
    if !params.at_least(&state.kdf) {
        return Err(Error::WeakerParams);
    }
    env.bounds.check(&params).map_err(kdf_err)?;
    let opened = open(state, w, env)?;
    let key = kdf(&opened.master, &state.salt_k, &params, &env.bounds).map_err(kdf_err)?;
    let slots = feedback(state, &opened, w, &key, Some(&opened.key), env)?;
    let mut envelopes = Vec::with_capacity(state.envelopes.len());
    for e in &state.envelopes {
        let secret = crate::envelope::open_record(&opened.key, e);
        envelopes.push(crate::envelope::seal_record(
            &key,
            &e.label,
            &secret,
            env.random_32(),
        ));
    }
    let next = PolicyState {
        kdf: params,
        slots,
        envelopes,
        ..state.clone()
    }
    .seal(&key);
    Ok((next, key))
}
