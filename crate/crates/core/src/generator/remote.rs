//! Generator running in another process, reached over OSC/UDP.
//!
//! The request is sent as a `/gen/request` blob and the first `/gen/response`
//! whose id matches is returned. A timeout or an unreadable reply yields an
//! empty response, so callers always get an answer within the deadline.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use super::{GeneratorKind, GeneratorPlugin, GeneratorRequest, GeneratorResponse};
use crate::osc::{decode, encode, AppMessage, MAX_DATAGRAM};

pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    endpoint: SocketAddr,
    deadline: Duration,
}

impl RemoteGenerator {
    pub fn new(endpoint: SocketAddr) -> Self {
        RemoteGenerator { endpoint, deadline: DEFAULT_DEADLINE }
    }

    pub fn with_deadline(mut self, deadline: Duration) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn endpoint(&self) -> SocketAddr {
        self.endpoint
    }

    pub fn deadline(&self) -> Duration {
        self.deadline
    }

    fn exchange(&self, req: &GeneratorRequest) -> io::Result<Option<GeneratorResponse>> {
        let socket = UdpSocket::bind(if self.endpoint.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" })?;
        let packet = encode(&AppMessage::GenRequest(req.to_wire()).to_osc())
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        socket.send_to(&packet, self.endpoint)?;

        let give_up = Instant::now() + self.deadline;
        let mut buf = vec![0u8; MAX_DATAGRAM];
        loop {
            let left = give_up.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            socket.set_read_timeout(Some(left))?;
            let n = match socket.recv_from(&mut buf) {
                Ok((n, _)) => n,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return Ok(None),
                Err(e) => return Err(e),
            };
            let Ok(AppMessage::GenResponse(blob)) =
                decode(&buf[..n]).map_err(drop).and_then(|m| AppMessage::from_osc(&m).map_err(drop))
            else {
                continue;
            };
            match GeneratorResponse::from_wire(&blob) {
                Ok(r) if r.request_id == req.id && r.kind() == req.kind() => return Ok(Some(r)),
                Ok(r) => tracing::debug!(id = r.request_id, "ignoring response to another request"),
                Err(e) => {
                    tracing::warn!(error = %e, "malformed generator response");
                    return Ok(None);
                }
            }
        }
    }
}

impl GeneratorPlugin for RemoteGenerator {
    fn name(&self) -> &str {
        "remote"
    }

    fn supports(&self, _kind: GeneratorKind) -> bool {
        true
    }

    fn generate(&self, req: &GeneratorRequest) -> GeneratorResponse {
        match self.exchange(req) {
            Ok(Some(r)) => r,
            Ok(None) => {
                tracing::warn!(id = req.id, deadline = ?self.deadline, "no usable generator response");
                GeneratorResponse::empty_for(req)
            }
            Err(e) => {
                tracing::warn!(error = %e, "generator request failed");
                GeneratorResponse::empty_for(req)
            }
        }
    }
}

/// Answers `/gen/request` datagrams on `socket` with `plugin` until `stop` is
/// set. Returns the number of requests served.
pub fn serve_requests(socket: &UdpSocket, plugin: &dyn GeneratorPlugin, stop: &AtomicBool) -> io::Result<u64> {
    socket.set_read_timeout(Some(Duration::from_millis(100)))?;
    let mut buf = vec![0u8; MAX_DATAGRAM];
    let mut served = 0;
    while !stop.load(Ordering::Relaxed) {
        let (n, from) = match socket.recv_from(&mut buf) {
            Ok(x) => x,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) => return Err(e),
        };
        let Some(AppMessage::GenRequest(blob)) = decode(&buf[..n]).ok().and_then(|m| AppMessage::from_osc(&m).ok())
        else {
            continue;
        };
        let response = match GeneratorRequest::from_wire(&blob) {
            Ok(req) if plugin.supports(req.kind()) => plugin.generate(&req),
            Ok(req) => GeneratorResponse::empty_for(&req),
            Err(e) => {
                tracing::warn!(error = %e, "malformed generator request");
                continue;
            }
        };
        let reply = encode(&AppMessage::GenResponse(response.to_wire()).to_osc())
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        socket.send_to(&reply, from)?;
        served += 1;
    }
    Ok(served)
}
