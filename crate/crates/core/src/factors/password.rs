use super::{FactorError, FactorResult, FactorState, SourceKey};
use crate::primitives::sha256;

pub fn setup(password: &str) -> FactorResult<(FactorState, SourceKey)> {
    Ok((FactorState::Password, derive1(password)?))
}

pub fn derive1(password: &str) -> FactorResult<SourceKey> {
    if password.is_empty() {
        return Err(FactorError::EmptyPassword);
    }
    Ok(SourceKey(sha256(password.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_is_sha256_of_password() {
        let (state, k) = setup("hunter2").unwrap();
        assert_eq!(state, FactorState::Password);
        assert_eq!(
            hex::encode(k.0),
            "f52fbd32b2b3b86ff88ef6c490628285f482af15ddcb29541f94bcf526a3f6c7"
        );
        assert_eq!(derive1("hunter2").unwrap(), k);
        assert_eq!(derive1(""), Err(FactorError::EmptyPassword));
    }
}
