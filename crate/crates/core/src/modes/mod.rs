//! Applications layered on the derived key.

pub mod mfchf2;
pub mod mfdpg2;
