//! MFKDF2: multi-factor key derivation with an authenticated public state.
//!
//! A vault combines several authentication factors into one 256-bit key.
//! The public state it needs between derivations is protected by an HMAC
//! under the derived key itself, so tampering and wrong witnesses both end
//! in the same failure.
//!
//! ```
//! use mfkdf2::{Env, FactorMaterial, FactorSpec, KdfParams, SetupOptions, Witness, Witnesses};
//!
//! let mut env = Env::seeded(1);
//! let opts = SetupOptions::new(KdfParams::testing());
//! let factors = vec![
//!   FactorSpec::new("pw", FactorMaterial::password("hunter2")),
//!   FactorSpec::new("pin", FactorMaterial::password("8812")),
//! ];
//! let (state, key) = mfkdf2::setup_threshold(1, factors, &opts, &mut env).unwrap();
//! let w = Witnesses::new().with("pin", Witness::password("8812"));
//! let (_next, again) = mfkdf2::derive(&state, &w, &mut env).unwrap();
//! assert_eq!(key, again);
//! ```

pub mod codec;
pub mod env;
pub mod envelope;
pub mod error;
pub mod factors;
pub mod gf256;
pub mod hints;
pub mod modes;
pub mod oracle;
pub mod policy;
pub mod primitives;
pub mod sss;
pub mod state;
mod vault;

pub use env::{Clock, Env, SystemClock, VirtualClock};
pub use error::{Error, Result};
pub use factors::{FactorMaterial, FactorType, SourceKey, Witness};
pub use hints::HintVerdict;
pub use policy::PolicyTree;
pub use primitives::{DerivedKey, KdfParams, MacTag};
pub use state::{Mode, PolicyState, VERSION};
pub use vault::{
    derive, derive_full, derive_nn, derive_threshold, recover, setup_nn, setup_policy,
    setup_threshold, setup_threshold_with_secret, slot_digest, slot_share_key, upgrade_params,
    Derivation, FactorSpec, SetupOptions, Witnesses,
};

pub(crate) mod hexser {
    use serde::Serializer;

    pub fn serialize<S: Serializer, T: AsRef<[u8]>>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v.as_ref()))
    }
}
