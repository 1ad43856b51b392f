//! UDP endpoints for OSC traffic.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::codec::{decode, encode};
use super::schema::{AppMessage, SchemaError};

/// Largest datagram accepted. Anything longer is counted and dropped.
pub const MAX_DATAGRAM: usize = 64 * 1024;

const POLL_INTERVAL: Duration = Duration::from_millis(100);
const BACKOFF_MIN: Duration = Duration::from_millis(10);
const BACKOFF_MAX: Duration = Duration::from_secs(1);

#[derive(Debug, Default)]
pub struct TransportStats {
    pub received: AtomicU64,
    pub dispatched: AtomicU64,
    pub malformed: AtomicU64,
    pub oversized: AtomicU64,
    pub unknown: AtomicU64,
    pub sent: AtomicU64,
    pub send_errors: AtomicU64,
    pub socket_errors: AtomicU64,
    latency_count: AtomicU64,
    latency_total_ns: AtomicU64,
    latency_max_ns: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StatsSnapshot {
    pub received: u64,
    pub dispatched: u64,
    pub malformed: u64,
    pub oversized: u64,
    pub unknown: u64,
    pub sent: u64,
    pub send_errors: u64,
    pub socket_errors: u64,
    pub mean_dispatch_ns: u64,
    pub max_dispatch_ns: u64,
}

impl TransportStats {
    /// Records the time from datagram arrival to hand-off.
    pub fn record_dispatch(&self, elapsed: Duration) {
        let ns = u64::try_from(elapsed.as_nanos()).unwrap_or(u64::MAX);
        self.latency_count.fetch_add(1, Ordering::Relaxed);
        self.latency_total_ns.fetch_add(ns, Ordering::Relaxed);
        self.latency_max_ns.fetch_max(ns, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        let load = |a: &AtomicU64| a.load(Ordering::Relaxed);
        let count = load(&self.latency_count);
        StatsSnapshot {
            received: load(&self.received),
            dispatched: load(&self.dispatched),
            malformed: load(&self.malformed),
            oversized: load(&self.oversized),
            unknown: load(&self.unknown),
            sent: load(&self.sent),
            send_errors: load(&self.send_errors),
            socket_errors: load(&self.socket_errors),
            mean_dispatch_ns: load(&self.latency_total_ns).checked_div(count).unwrap_or(0),
            max_dispatch_ns: load(&self.latency_max_ns),
        }
    }
}

/// Decodes one datagram. Bad input is counted, logged and dropped.
pub fn process_datagram(bytes: &[u8], stats: &TransportStats) -> Option<AppMessage> {
    stats.received.fetch_add(1, Ordering::Relaxed);
    if bytes.len() > MAX_DATAGRAM {
        stats.oversized.fetch_add(1, Ordering::Relaxed);
        tracing::warn!(len = bytes.len(), "dropping oversized datagram");
        return None;
    }
    let msg = match decode(bytes) {
        Ok(m) => m,
        Err(e) => {
            stats.malformed.fetch_add(1, Ordering::Relaxed);
            tracing::warn!(error = %e, "dropping malformed datagram");
            return None;
        }
    };
    match AppMessage::from_osc(&msg) {
        Ok(app) => Some(app),
        Err(SchemaError::UnknownAddress(addr)) => {
            stats.unknown.fetch_add(1, Ordering::Relaxed);
            tracing::debug!(%addr, "ignoring unknown address");
            None
        }
        Err(e) => {
            stats.malformed.fetch_add(1, Ordering::Relaxed);
            tracing::warn!(error = %e, "dropping message with bad arguments");
            None
        }
    }
}

/// Background thread reading datagrams from a socket and handing decoded
/// messages to a callback. Stops when dropped.
pub struct OscReceiver {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl OscReceiver {
    pub fn spawn<F>(socket: UdpSocket, stats: Arc<TransportStats>, mut dispatch: F) -> io::Result<OscReceiver>
    where
        F: FnMut(AppMessage, SocketAddr) + Send + 'static,
    {
        socket.set_read_timeout(Some(POLL_INTERVAL))?;
        let local_addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let handle = thread::Builder::new().name("osc-rx".into()).spawn(move || {
            let mut buf = vec![0u8; MAX_DATAGRAM + 1];
            let mut backoff = BACKOFF_MIN;
            while !flag.load(Ordering::Relaxed) {
                match socket.recv_from(&mut buf) {
                    Ok((n, from)) => {
                        backoff = BACKOFF_MIN;
                        let arrived = Instant::now();
                        if let Some(msg) = process_datagram(&buf[..n], &stats) {
                            dispatch(msg, from);
                            stats.dispatched.fetch_add(1, Ordering::Relaxed);
                            stats.record_dispatch(arrived.elapsed());
                        }
                    }
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                    Err(e) => {
                        stats.socket_errors.fetch_add(1, Ordering::Relaxed);
                        tracing::warn!(error = %e, ?backoff, "socket error, backing off");
                        thread::sleep(backoff);
                        backoff = (backoff * 2).min(BACKOFF_MAX);
                    }
                }
            }
        })?;
        Ok(OscReceiver { local_addr, stop, handle: Some(handle) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn stop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for OscReceiver {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Sends application messages to a fixed destination.
pub struct OscSender {
    socket: UdpSocket,
    dest: SocketAddr,
    stats: Arc<TransportStats>,
}

impl OscSender {
    pub fn new(socket: UdpSocket, dest: impl ToSocketAddrs, stats: Arc<TransportStats>) -> io::Result<OscSender> {
        let dest = dest
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no destination address"))?;
        Ok(OscSender { socket, dest, stats })
    }

    /// Binds an ephemeral local port.
    pub fn bind(dest: impl ToSocketAddrs, stats: Arc<TransportStats>) -> io::Result<OscSender> {
        OscSender::new(UdpSocket::bind("0.0.0.0:0")?, dest, stats)
    }

    pub fn dest(&self) -> SocketAddr {
        self.dest
    }

    pub fn send(&self, msg: &AppMessage) -> io::Result<()> {
        self.send_to(msg, self.dest)
    }

    pub fn send_to(&self, msg: &AppMessage, dest: SocketAddr) -> io::Result<()> {
        let bytes = encode(&msg.to_osc()).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        match self.socket.send_to(&bytes, dest) {
            Ok(_) => {
                self.stats.sent.fetch_add(1, Ordering::Relaxed);
                Ok(())
            }
            Err(e) => {
                self.stats.send_errors.fetch_add(1, Ordering::Relaxed);
                Err(e)
            }
        }
    }
}
