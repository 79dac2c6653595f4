//! Fixed primitives: SHA-256, HMAC-SHA256, HKDF-SHA256, the two-block AES-256
//! permutation, and the memory-hard KDF.

mod balloon;
mod kdf;

use std::fmt;

use aes::cipher::{generic_array::GenericArray, BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes256;
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

pub use balloon::balloon_sha3;
pub use kdf::{kdf, KdfAlgorithm, KdfBounds, KdfParams, KDF_ALGORITHM};

/// Salt used for every HKDF extract step in the scheme.
pub const HKDF_EXTRACT_SALT: &[u8] = b"MFKDF2-v1-extract";

/// Largest HKDF-SHA256 output: 255 * 32 bytes.
pub const HKDF_MAX_LEN: usize = 255 * 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("hkdf output length {0} exceeds {HKDF_MAX_LEN}")]
    HkdfLength(usize),
    #[error("prp block must be 32 bytes, got {0}")]
    BlockLength(usize),
    #[error("kdf parameter out of bounds: {0}")]
    KdfBounds(String),
    #[error("kdf failure: {0}")]
    Kdf(String),
}

macro_rules! secret_bytes {
    ($name:ident) => {
        #[derive(Clone, PartialEq, Eq)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "(..)"))
            }
        }
    };
}

secret_bytes!(DerivedKey);
secret_bytes!(PrpKey);

impl DerivedKey {
    /// Short public identifier for a key: hex of the first 8 bytes of SHA-256("fingerprint" || K).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"fingerprint");
        h.update(self.0);
        hex::encode(&h.finalize()[..8])
    }

    pub fn ct_eq(&self, other: &DerivedKey) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MacTag(pub [u8; 32]);

impl MacTag {
    pub fn ct_eq(&self, other: &MacTag) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

pub fn sha256_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

pub fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac accepts any key length");
    m.update(message);
    m.finalize().into_bytes().into()
}

pub fn mac(key: &DerivedKey, message: &[u8]) -> MacTag {
    MacTag(hmac_sha256(&key.0, message))
}

pub fn mac_verify(key: &DerivedKey, message: &[u8], tag: &MacTag) -> bool {
    mac(key, message).ct_eq(tag)
}

pub fn hkdf_with_salt(
    salt: &[u8],
    ikm: &[u8],
    info: &[u8],
    len: usize,
) -> Result<Vec<u8>, PrimitiveError> {
    if len > HKDF_MAX_LEN {
        return Err(PrimitiveError::HkdfLength(len));
    }
    let mut out = vec![0u8; len];
    hkdf::Hkdf::<Sha256>::new(Some(salt), ikm)
        .expand(info, &mut out)
        .map_err(|_| PrimitiveError::HkdfLength(len))?;
    Ok(out)
}

pub fn hkdf(ikm: &[u8], info: &[u8], len: usize) -> Result<Vec<u8>, PrimitiveError> {
    hkdf_with_salt(HKDF_EXTRACT_SALT, ikm, info, len)
}

pub fn hkdf32(ikm: &[u8], info: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    hkdf::Hkdf::<Sha256>::new(Some(HKDF_EXTRACT_SALT), ikm)
        .expand(info, &mut out)
        .expect("32 bytes is a valid hkdf length");
    out
}

/// HKDF-Expand only, with `prk` used directly as the pseudorandom key.
pub fn hkdf_expand(prk: &[u8; 32], info: &[u8], len: usize) -> Result<Vec<u8>, PrimitiveError> {
    if len > HKDF_MAX_LEN {
        return Err(PrimitiveError::HkdfLength(len));
    }
    let mut out = vec![0u8; len];
    hkdf::Hkdf::<Sha256>::from_prk(prk)
        .expect("32-byte prk")
        .expand(info, &mut out)
        .map_err(|_| PrimitiveError::HkdfLength(len))?;
    Ok(out)
}

pub fn derive_share_key(kappa: &[u8]) -> PrpKey {
    PrpKey(hkdf32(kappa, b"share-key"))
}

fn block_cipher(key: &PrpKey) -> Aes256 {
    Aes256::new(GenericArray::from_slice(&key.0))
}

/// AES-256 applied to each 16-byte half independently.
pub fn prp_encrypt(key: &PrpKey, block: &[u8]) -> Result<[u8; 32], PrimitiveError> {
    let mut out: [u8; 32] = block
        .try_into()
        .map_err(|_| PrimitiveError::BlockLength(block.len()))?;
    let cipher = block_cipher(key);
    for half in out.chunks_exact_mut(16) {
        cipher.encrypt_block(GenericArray::from_mut_slice(half));
    }
    Ok(out)
}

pub fn prp_decrypt(key: &PrpKey, block: &[u8]) -> Result<[u8; 32], PrimitiveError> {
    let mut out: [u8; 32] = block
        .try_into()
        .map_err(|_| PrimitiveError::BlockLength(block.len()))?;
    let cipher = block_cipher(key);
    for half in out.chunks_exact_mut(16) {
        cipher.decrypt_block(GenericArray::from_mut_slice(half));
    }
    Ok(out)
}

pub fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.ct_eq(b).into()
}
