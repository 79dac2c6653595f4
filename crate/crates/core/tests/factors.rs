mod common;

use std::sync::Arc;

use common::opts;
use mfkdf2::factors::mock::{
    CountingDevice, MockEnclave, MockOidcProvider, MockPasskey, MockSigner, MockTag, ReplayDevice,
};
use mfkdf2::factors::otp::{hotp_code, HotpConfig, TotpConfig};
use mfkdf2::factors::{self, AuthRequest, Authenticator, FactorCtx, FactorState, FactorType};
use mfkdf2::{
    derive, setup_threshold, Env, Error, FactorMaterial, FactorSpec, PolicyState, Witness,
    Witnesses,
};

struct Devices {
    passkey: Arc<MockPasskey>,
    sqrl: Arc<MockSigner>,
    push: Arc<MockSigner>,
    enclave: Arc<MockEnclave>,
    tag: Arc<MockTag>,
    idp: Arc<MockOidcProvider>,
}

fn devices() -> Devices {
    Devices {
        passkey: Arc::new(MockPasskey::new([1; 32])),
        sqrl: Arc::new(MockSigner::from_seed([2; 32])),
        push: Arc::new(MockSigner::from_seed([3; 32])),
        enclave: Arc::new(MockEnclave::new([4; 32])),
        tag: Arc::new(MockTag::new([5; 32])),
        idp: Arc::new(MockOidcProvider::new(
            "https://id.example",
            [6; 32],
            "alice",
        )),
    }
}

fn sample() -> Vec<u8> {
    (0..64u8).map(|i| i.wrapping_mul(151)).collect()
}

fn every_type(d: &Devices) -> Vec<FactorSpec> {
    vec![
        FactorSpec::new("password", FactorMaterial::password("pw")),
        FactorSpec::new(
            "hotp",
            FactorMaterial::Hotp(HotpConfig::new(common::OTP_SECRET)),
        ),
        FactorSpec::new(
            "totp",
            FactorMaterial::Totp(TotpConfig::new(common::OTP_SECRET).window(8)),
        ),
        FactorSpec::new(
            "passkey",
            FactorMaterial::Passkey {
                credential_id: b"cred".to_vec(),
                device: d.passkey.clone(),
            },
        ),
        FactorSpec::new(
            "fuzzy",
            FactorMaterial::Fuzzy {
                sample: sample(),
                tolerance: 4,
            },
        ),
        FactorSpec::new(
            "sqrl",
            FactorMaterial::Sqrl {
                public_key: d.sqrl.public_key(),
                device: d.sqrl.clone(),
            },
        ),
        FactorSpec::new(
            "push",
            FactorMaterial::Push {
                public_key: d.push.public_key(),
                device: d.push.clone(),
            },
        ),
        FactorSpec::new(
            "enclave",
            FactorMaterial::Enclave {
                condition: "unlocked".into(),
                device: d.enclave.clone(),
            },
        ),
        FactorSpec::new(
            "proximity",
            FactorMaterial::Proximity {
                device: d.tag.clone(),
            },
        ),
        FactorSpec::new(
            "oidc",
            FactorMaterial::Oidc {
                issuer: "https://id.example".into(),
                subject: "alice".into(),
                provider_key: d.idp.public_key(),
                provider: d.idp.clone(),
            },
        ),
    ]
}

fn witness(d: &Devices, id: &str, env: &Env, hotp_counter: u64) -> Witness {
    match id {
        "password" => Witness::password("pw"),
        "hotp" => Witness::Code(hotp_code(common::OTP_SECRET, hotp_counter, 1_000_000)),
        "totp" => Witness::Code(mfkdf2::factors::otp::totp_code(
            common::OTP_SECRET,
            env.now(),
            30,
            1_000_000,
        )),
        "passkey" => Witness::device(d.passkey.clone()),
        "fuzzy" => {
            let mut s = sample();
            s[10] ^= 0x04;
            Witness::Sample(s)
        }
        "sqrl" => Witness::device(d.sqrl.clone()),
        "push" => Witness::device(d.push.clone()),
        "enclave" => Witness::device(d.enclave.clone()),
        "proximity" => Witness::device(d.tag.clone()),
        "oidc" => Witness::device(d.idp.clone()),
        _ => unreachable!(),
    }
}

const IDS: [&str; 10] = [
    "password",
    "hotp",
    "totp",
    "passkey",
    "fuzzy",
    "sqrl",
    "push",
    "enclave",
    "proximity",
    "oidc",
];

#[test]
fn every_factor_type_opens_a_one_of_n_vault_repeatedly() {
    let d = devices();
    let mut env = Env::seeded(1);
    let (mut state, key) = setup_threshold(1, every_type(&d), &opts(), &mut env).unwrap();
    let types: Vec<FactorType> = state.slots.iter().map(|s| s.factor_type).collect();
    assert_eq!(types, FactorType::ALL.to_vec());
    let mut counter = 0;
    for round in 0..3 {
        for id in IDS {
            let w = Witnesses::new().with(id, witness(&d, id, &env, counter));
            let (next, k) =
                derive(&state, &w, &mut env).unwrap_or_else(|e| panic!("{id} round {round}: {e}"));
            assert_eq!(k, key, "{id}");
            if id == "hotp" {
                counter += 1;
            }
            let before = &state.slots[state.slot_index(id).unwrap()].beta;
            let after = &next.slots[next.slot_index(id).unwrap()].beta;
            assert_eq!(
                before == after,
                FactorType::ALL[IDS.iter().position(|x| *x == id).unwrap()].is_static(),
                "{id}"
            );
            state = PolicyState::from_bytes(&next.to_bytes()).unwrap();
        }
    }
}

#[test]
fn wrong_devices_fail() {
    let d = devices();
    let mut env = Env::seeded(2);
    let (state, _) = setup_threshold(1, every_type(&d), &opts(), &mut env).unwrap();
    let other = devices_with_offset();
    for id in ["passkey", "sqrl", "push", "enclave", "proximity", "oidc"] {
        let w = Witnesses::new().with(id, witness(&other, id, &env, 0));
        assert!(
            matches!(derive(&state, &w, &mut env), Err(Error::DerivationFailed)),
            "{id}"
        );
    }
    d.enclave.set_gate(false);
    let w = Witnesses::new().with("enclave", witness(&d, "enclave", &env, 0));
    assert!(derive(&state, &w, &mut env).is_err());
    d.enclave.set_gate(true);
    assert!(derive(&state, &w, &mut env).is_ok());
    let far = Witnesses::new().with(
        "fuzzy",
        Witness::Sample(sample().iter().map(|b| !b).collect()),
    );
    assert!(derive(&state, &far, &mut env).is_err());
}

fn devices_with_offset() -> Devices {
    Devices {
        passkey: Arc::new(MockPasskey::new([11; 32])),
        sqrl: Arc::new(MockSigner::from_seed([12; 32])),
        push: Arc::new(MockSigner::from_seed([13; 32])),
        enclave: Arc::new(MockEnclave::new([14; 32])),
        tag: Arc::new(MockTag::new([15; 32])),
        idp: Arc::new(MockOidcProvider::new(
            "https://id.example",
            [16; 32],
            "alice",
        )),
    }
}

#[test]
fn replayed_responses_fail_after_rotation() {
    let d = devices();
    let mut env = Env::seeded(3);
    let (state, _) = setup_threshold(1, every_type(&d), &opts(), &mut env).unwrap();
    let FactorState::Proximity(p) = &state.slots[8].beta else {
        panic!()
    };
    let recorded = d
        .tag
        .respond(AuthRequest::Tag {
            challenge: &p.challenge,
        })
        .unwrap();
    let replay = Witnesses::new().with(
        "proximity",
        Witness::device(Arc::new(ReplayDevice::new(recorded))),
    );
    let honest = Witnesses::new().with("proximity", Witness::device(d.tag.clone()));
    let (next, _) = derive(&state, &honest, &mut env).unwrap();
    assert!(matches!(
        derive(&next, &replay, &mut env),
        Err(Error::DerivationFailed)
    ));
    assert!(derive(&next, &honest, &mut env).is_ok());
}

/// The first stage sees only the factor state and the witness; the device is
/// asked once for the current challenge and once more for the next one.
#[test]
fn two_stage_contract_with_an_instrumented_device() {
    let mut env = Env::seeded(4);
    let dev = Arc::new(CountingDevice::new(MockPasskey::new([9; 32])));
    let spec = FactorSpec::new(
        "pk",
        FactorMaterial::Passkey {
            credential_id: vec![1],
            device: dev.clone(),
        },
    );
    let pw = FactorSpec::new("pw", FactorMaterial::password("x"));
    let (state, key) = setup_threshold(1, vec![spec, pw], &opts(), &mut env).unwrap();
    let at_setup = dev.calls();
    let kappa = factors::derive1(
        &state.slots[0].beta,
        &Witness::device(dev.clone()),
        &mut env,
        FactorCtx::default(),
    )
    .unwrap();
    assert_eq!(dev.calls(), at_setup + 1);
    assert_eq!(kappa.len(), 1);
    let (_, k) = derive(
        &state,
        &Witnesses::new().with("pk", Witness::device(dev.clone())),
        &mut env,
    )
    .unwrap();
    assert_eq!(k, key);
    assert_eq!(dev.calls(), at_setup + 3);
    // Only the password contributes here, so the device is never asked.
    let before = dev.calls();
    derive(
        &state,
        &Witnesses::new().with("pw", Witness::password("x")),
        &mut env,
    )
    .unwrap();
    assert_eq!(dev.calls(), before);
}

#[test]
fn wrong_witness_kind_is_a_usage_error() {
    let mut env = Env::seeded(5);
    let (state, _) = setup_threshold(
        1,
        vec![FactorSpec::new("pw", FactorMaterial::password("x"))],
        &opts(),
        &mut env,
    )
    .unwrap();
    let w = Witnesses::new().with("pw", Witness::Sample(vec![1, 2, 3]));
    assert!(matches!(
        derive(&state, &w, &mut env),
        Err(Error::Factor { .. })
    ));
}
