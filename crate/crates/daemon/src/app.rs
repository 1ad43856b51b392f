//! Daemon wiring: engine runtime, OSC in/out, state monitor and WS bridge.

use std::io;
use std::net::{SocketAddr, TcpListener, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use jamloop_core::clock::{Clock, SystemClock};
use jamloop_core::generator::{GeneratorPlugin, RemoteGenerator, StubGenerator};
use jamloop_core::osc::{AppMessage, OscReceiver, OscSender, StatsSnapshot, TransportStats, MAX_DATAGRAM};
use jamloop_core::runtime::{Runtime, RuntimeHandle};
use jamloop_core::{CcMap, Emission, InboundEvent, Looper};
use thiserror::Error;

use crate::config::{EngineConfig, GeneratorChoice};
use crate::ws::WsServer;

/// How often the `/engine/state` monitor checks for a new snapshot.
const STATE_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Error)]
pub enum AppError {
    #[error("cannot bind {what} on {addr}: {source}")]
    Bind { what: &'static str, addr: SocketAddr, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn make_generator(config: &EngineConfig) -> Arc<dyn GeneratorPlugin> {
    match config.generator {
        GeneratorChoice::Stub => Arc::new(StubGenerator),
        GeneratorChoice::Remote(addr) => Arc::new(RemoteGenerator::new(addr).with_deadline(config.gen_deadline)),
    }
}

/// Routes a decoded inbound OSC message to the engine.
pub fn route(msg: AppMessage, cc_map: &CcMap) -> Option<InboundEvent> {
    match msg {
        AppMessage::NoteOn { pitch, velocity } => Some(InboundEvent::NoteOn { pitch, velocity }),
        AppMessage::NoteOff { pitch } => Some(InboundEvent::NoteOff { pitch }),
        AppMessage::Cc { controller, value } => cc_map.translate(controller, value).map(InboundEvent::from),
        _ => None,
    }
}

/// A running daemon.
pub struct App {
    runtime: Option<Runtime>,
    receiver: OscReceiver,
    ws: Option<WsServer>,
    monitor: Option<JoinHandle<()>>,
    monitor_stop: Arc<AtomicBool>,
    stats: Arc<TransportStats>,
}

impl App {
    pub fn start(config: &EngineConfig) -> Result<App, AppError> {
        let listen = UdpSocket::bind(config.osc_listen).map_err(|source| AppError::Bind {
            what: "OSC listener",
            addr: config.osc_listen,
            source,
        })?;
        let ws_addr = SocketAddr::from(([127, 0, 0, 1], config.ws_port));
        let ws_listener = TcpListener::bind(ws_addr).map_err(|source| AppError::Bind {
            what: "WebSocket server",
            addr: ws_addr,
            source,
        })?;

        let stats = Arc::new(TransportStats::default());
        let out = Arc::new(OscSender::bind(config.osc_send, Arc::clone(&stats))?);
        let sink_out = Arc::clone(&out);
        let sink = move |e: &Emission, _actual_ms: f64| {
            if let Err(err) = sink_out.send(&e.note.to_message()) {
                tracing::debug!("note send failed: {err}");
            }
        };
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::new());
        let runtime =
            Runtime::spawn(Looper::new(config.engine.clone()), clock, Box::new(sink), make_generator(config))?;
        let handle = runtime.handle();

        let cc_map = config.cc_map.clone();
        let rx_handle = handle.clone();
        let receiver = OscReceiver::spawn(listen, Arc::clone(&stats), move |msg, from| {
            let address = msg.address();
            match route(msg, &cc_map) {
                Some(event) => rx_handle.send(event),
                None => tracing::trace!(%from, address, "ignored inbound message"),
            }
        })?;

        let ws = WsServer::spawn(ws_listener, handle.clone())?;
        let monitor_stop = Arc::new(AtomicBool::new(false));
        let monitor = {
            let stop = Arc::clone(&monitor_stop);
            thread::Builder::new().name("state-monitor".into()).spawn(move || monitor_loop(&handle, &out, &stop))?
        };
        tracing::info!(osc = %receiver.local_addr(), ws = %ws.local_addr(), send = %config.osc_send, "daemon ready");
        Ok(App { runtime: Some(runtime), receiver, ws: Some(ws), monitor: Some(monitor), monitor_stop, stats })
    }

    pub fn osc_addr(&self) -> SocketAddr {
        self.receiver.local_addr()
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws.as_ref().map(WsServer::local_addr)
    }

    pub fn handle(&self) -> RuntimeHandle {
        self.runtime.as_ref().expect("running").handle()
    }

    pub fn transport_stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    /// Stops intake first, then the engine (which flushes note-offs).
    pub fn shutdown(mut self) -> Option<Looper> {
        self.receiver.stop();
        if let Some(mut ws) = self.ws.take() {
            ws.stop();
        }
        self.monitor_stop.store(true, Ordering::Release);
        if let Some(m) = self.monitor.take() {
            let _ = m.join();
        }
        self.runtime.take().and_then(Runtime::shutdown)
    }
}

fn monitor_loop(handle: &RuntimeHandle, out: &OscSender, stop: &AtomicBool) {
    let mut last_seq = None;
    while !stop.load(Ordering::Acquire) {
        let (seq, snap) = handle.snapshot();
        if last_seq != Some(seq) {
            last_seq = Some(seq);
            match serde_json::to_vec(&*snap) {
                Ok(blob) if blob.len() < MAX_DATAGRAM - 64 => {
                    if let Err(e) = out.send(&AppMessage::EngineState(blob)) {
                        tracing::debug!("state send failed: {e}");
                    }
                }
                Ok(blob) => tracing::debug!(bytes = blob.len(), "state snapshot too large for one datagram"),
                Err(e) => tracing::warn!("cannot serialize state: {e}"),
            }
        }
        thread::sleep(STATE_INTERVAL);
    }
}

/// Runs until `stop` is set, then shuts down cleanly.
pub fn run(config: &EngineConfig, stop: &AtomicBool) -> Result<(), AppError> {
    let app = App::start(config)?;
    while !stop.load(Ordering::Acquire) {
        thread::sleep(Duration::from_millis(20));
    }
    tracing::info!("shutting down");
    app.shutdown();
    Ok(())
}

/// Sets `flag` on SIGINT or SIGTERM.
pub fn install_signal_flag(flag: Arc<AtomicBool>) -> io::Result<()> {
    for sig in [libc::SIGINT, libc::SIGTERM] {
        let f = Arc::clone(&flag);
        // SAFETY: the handler only stores to an atomic, which is
        // async-signal-safe.
        unsafe { signal_hook_registry::register(sig, move || f.store(true, Ordering::Release)) }?;
    }
    Ok(())
}
