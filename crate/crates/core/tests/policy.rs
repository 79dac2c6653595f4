mod common;

use std::collections::BTreeSet;

use common::opts;
use mfkdf2::{
    derive, setup_policy, Env, Error, FactorMaterial, FactorSpec, Mode, PolicyState, PolicyTree,
    Witness, Witnesses,
};

fn specs(ids: &[&str]) -> Vec<FactorSpec> {
    ids.iter()
        .map(|id| FactorSpec::new(*id, FactorMaterial::password(format!("pw-{id}"))))
        .collect()
}

fn witnesses(ids: &[&str]) -> Witnesses {
    ids.iter().fold(Witnesses::new(), |w, id| {
        w.with(*id, Witness::password(format!("pw-{id}")))
    })
}

fn check_all_subsets(text: &str, ids: &[&str], seed: u64) {
    let tree = PolicyTree::parse(text).unwrap();
    let mut env = Env::seeded(seed);
    let (state, key) = setup_policy(&tree, specs(ids), &opts(), &mut env).unwrap();
    assert_eq!(state.mode, Mode::Policy);
    assert_eq!(PolicyState::from_bytes(&state.to_bytes()).unwrap(), state);
    for mask in 0u32..(1 << ids.len()) {
        let subset: Vec<&str> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, s)| *s)
            .collect();
        let present: BTreeSet<String> = subset.iter().map(|s| s.to_string()).collect();
        let got = derive(&state, &witnesses(&subset), &mut env);
        if tree.satisfied_by(&present) {
            assert_eq!(got.unwrap().1, key, "{text} with {subset:?}");
        } else {
            assert!(
                matches!(got, Err(Error::DerivationFailed)),
                "{text} with {subset:?}"
            );
        }
    }
}

#[test]
fn password_and_totp_or_recovery() {
    check_all_subsets(
        "and(password, or(totp, recovery))",
        &["password", "totp", "recovery"],
        1,
    );
}

#[test]
fn nested_thresholds() {
    check_all_subsets("2of(a, and(b, c), or(d, e))", &["a", "b", "c", "d", "e"], 2);
    check_all_subsets(
        "or(and(a, b), and(c, d), 2of(a2, b2, c2))",
        &["a", "b", "c", "d", "a2", "b2", "c2"],
        3,
    );
}

#[test]
fn single_leaf_is_one_of_one() {
    let mut env = Env::seeded(4);
    let (state, key) = setup_policy(
        &PolicyTree::leaf("only"),
        specs(&["only"]),
        &opts(),
        &mut env,
    )
    .unwrap();
    assert_eq!(state.threshold, 1);
    assert_eq!(
        state.policy_tree(),
        PolicyTree::or(vec![PolicyTree::leaf("only")])
    );
    assert_eq!(
        derive(&state, &witnesses(&["only"]), &mut env).unwrap().1,
        key
    );
}

#[test]
fn malformed_trees_are_rejected() {
    let mut env = Env::seeded(5);
    let empty = PolicyTree::Gate {
        threshold: 1,
        children: vec![],
    };
    assert!(setup_policy(&empty, specs(&["a"]), &opts(), &mut env).is_err());
    let missing = PolicyTree::parse("and(a, b)").unwrap();
    assert!(setup_policy(&missing, specs(&["a", "b", "c"]), &opts(), &mut env).is_err());
    let unknown = PolicyTree::parse("and(a, z)").unwrap();
    assert!(setup_policy(&unknown, specs(&["a", "b"]), &opts(), &mut env).is_err());
    let twice = PolicyTree::parse("or(a, and(a, b))").unwrap();
    assert!(setup_policy(&twice, specs(&["a", "b"]), &opts(), &mut env).is_err());
}

#[test]
fn single_flip_anywhere_in_a_policy_state_is_rejected() {
    let mut env = Env::seeded(6);
    let tree = PolicyTree::parse("and(a, or(b, c))").unwrap();
    let (state, _) = setup_policy(&tree, specs(&["a", "b", "c"]), &opts(), &mut env).unwrap();
    let bytes = state.to_bytes();
    let w = witnesses(&["a", "b", "c"]);
    for i in 0..bytes.len() {
        let mut b = bytes.clone();
        b[i] ^= 0x80;
        assert!(
            PolicyState::from_bytes(&b)
                .ok()
                .and_then(|s| derive(&s, &w, &mut env).ok())
                .is_none(),
            "byte {i}"
        );
    }
}
