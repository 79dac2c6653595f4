//! Minimal HTTP binding: `POST /eval` with body `K_L (32) || T (8, big-endian)`.
//! The reply is a 4-byte big-endian value, or a single refusal byte.

use std::io::{self, Read};
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use super::{OracleClient, OracleError, TimingOracle};

pub fn handle(oracle: &dyn OracleClient, body: &[u8]) -> Vec<u8> {
    if body.len() != 40 {
        return vec![OracleError::BadRequest.code()];
    }
    let lk: [u8; 32] = body[..32].try_into().unwrap();
    let step = u64::from_be_bytes(body[32..].try_into().unwrap());
    match oracle.eval(&lk, step) {
        Ok(v) => v.to_be_bytes().to_vec(),
        Err(e) => vec![e.code()],
    }
}

pub struct OracleServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl OracleServer {
    pub fn start(oracle: Arc<TimingOracle>, addr: &str) -> io::Result<OracleServer> {
        let server =
            Arc::new(tiny_http::Server::http(addr).map_err(|e| io::Error::other(e.to_string()))?);
        let bound = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("oracle must listen on an IP address"))?;
        let s = server.clone();
        let worker = std::thread::spawn(move || {
            for mut req in s.incoming_requests() {
                let reply = if req.method() == &tiny_http::Method::Post && req.url() == "/eval" {
                    let mut body = Vec::with_capacity(40);
                    match req.as_reader().take(64).read_to_end(&mut body) {
                        Ok(_) => tiny_http::Response::from_data(handle(oracle.as_ref(), &body)),
                        Err(_) => {
                            tiny_http::Response::from_data(vec![OracleError::BadRequest.code()])
                        }
                    }
                } else {
                    tiny_http::Response::from_data(Vec::new()).with_status_code(404)
                };
                let _ = req.respond(reply);
            }
        });
        Ok(OracleServer {
            server,
            addr: bound,
            worker: Some(worker),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Block until the server stops.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for OracleServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

pub struct HttpOracleClient {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpOracleClient {
    pub fn new(base_url: &str) -> HttpOracleClient {
        HttpOracleClient {
            endpoint: format!("{}/eval", base_url.trim_end_matches('/')),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(5))
                .build(),
        }
    }
}

impl OracleClient for HttpOracleClient {
    fn eval(&self, local_key: &[u8; 32], step: u64) -> Result<u32, OracleError> {
        let mut body = local_key.to_vec();
        body.extend_from_slice(&step.to_be_bytes());
        let resp = self
            .agent
            .post(&self.endpoint)
            .set("content-type", "application/octet-stream")
            .send_bytes(&body)
            .map_err(|e| OracleError::Unreachable(e.to_string()))?;
        let mut reply = Vec::with_capacity(4);
        resp.into_reader()
            .take(16)
            .read_to_end(&mut reply)
            .map_err(|e| OracleError::Unreachable(e.to_string()))?;
        match reply.len() {
            4 => Ok(u32::from_be_bytes(reply.try_into().unwrap())),
            1 => Err(OracleError::from_code(reply[0])),
            _ => Err(OracleError::Unreachable("malformed reply".into())),
        }
    }
}
