use serde::Serialize;

use super::{
    AuthRequest, Authenticator, FactorError, FactorResult, FactorState, Pending, SourceKey,
};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EnclaveState {
    #[serde(with = "crate::hexser")]
    pub secret_id: Vec<u8>,
}

impl EnclaveState {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.bytes(&self.secret_id);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<EnclaveState> {
        let secret_id = r.bytes()?;
        if secret_id.is_empty() {
            return Err(Error::malformed("empty enclave secret id"));
        }
        Ok(EnclaveState { secret_id })
    }
}

fn release(secret_id: &[u8], device: &dyn Authenticator) -> FactorResult<SourceKey> {
    let secret = device.respond(AuthRequest::Release { secret_id })?;
    secret
        .try_into()
        .map(SourceKey)
        .map_err(|_| FactorError::MalformedResponse)
}

pub fn setup(condition: &str, device: &dyn Authenticator) -> FactorResult<(Pending, SourceKey)> {
    let secret_id = device.respond(AuthRequest::Bind { condition })?;
    if secret_id.is_empty() {
        return Err(FactorError::MalformedResponse);
    }
    let kappa = release(&secret_id, device)?;
    Ok((
        Pending::Ready(FactorState::Enclave(EnclaveState { secret_id })),
        kappa,
    ))
}

pub fn derive1(s: &EnclaveState, device: &dyn Authenticator) -> FactorResult<SourceKey> {
    release(&s.secret_id, device)
}
