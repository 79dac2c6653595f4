//! Balloon hashing (single lane) over SHA3-256.
//!
//! Counters and loop indices are encoded as 8-byte little-endian integers, and
//! the pseudo-random neighbour index is the digest read as a little-endian
//! integer reduced mod the space cost.

use sha3::{Digest, Sha3_256};

fn digest(cnt: &mut u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha3_256::new();
    h.update(cnt.to_le_bytes());
    *cnt += 1;
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

fn le_mod(bytes: &[u8; 32], m: u64) -> usize {
    let m = u128::from(m);
    bytes
        .iter()
        .rev()
        .fold(0u128, |acc, &b| ((acc << 8) | u128::from(b)) % m) as usize
}

pub fn balloon_sha3(
    password: &[u8],
    salt: &[u8],
    space_cost: u64,
    time_cost: u64,
    delta: u64,
) -> [u8; 32] {
    let s = space_cost.max(1);
    let mut cnt = 0u64;
    let mut buf: Vec<[u8; 32]> = Vec::with_capacity(s as usize);
    buf.push(digest(&mut cnt, &[password, salt]));
    for m in 1..s as usize {
        let prev = buf[m - 1];
        buf.push(digest(&mut cnt, &[&prev]));
    }
    for t in 0..time_cost {
        for m in 0..s as usize {
            let prev = buf[(m + s as usize - 1) % s as usize];
            buf[m] = digest(&mut cnt, &[&prev, &buf[m]]);
            for i in 0..delta {
                let mut idx = [0u8; 24];
                idx[..8].copy_from_slice(&t.to_le_bytes());
                idx[8..16].copy_from_slice(&(m as u64).to_le_bytes());
                idx[16..].copy_from_slice(&i.to_le_bytes());
                let pick = digest(&mut cnt, &[salt, &idx]);
                let other = buf[le_mod(&pick, s)];
                buf[m] = digest(&mut cnt, &[&buf[m], &other]);
            }
        }
    }
    buf[s as usize - 1]
}
