//! The timeline thread: owns the [`Looper`], applies inbound events in order,
//! emits due steps on time and publishes snapshots for monitors.

use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, select, unbounded, Receiver, Sender};

use crate::clock::Clock;
use crate::control::InboundEvent;
use crate::engine::{Emission, EngineError, EngineSnapshot, Looper, Origin};
use crate::generator::{GeneratorPlugin, GeneratorWorker};

/// Longest the timeline sleeps without checking the clock.
const MAX_WAIT: Duration = Duration::from_millis(5);
/// Playhead-only snapshot updates are published at most this often.
const PLAYHEAD_PUBLISH_MS: f64 = 20.0;

/// Where emitted notes go. Called on the timeline thread; must not block.
pub trait NoteSink: Send {
    fn emit(&mut self, emission: &Emission, actual_ms: f64);
}

impl<F: FnMut(&Emission, f64) + Send> NoteSink for F {
    fn emit(&mut self, emission: &Emission, actual_ms: f64) {
        self(emission, actual_ms)
    }
}

/// Fixed-resolution latency histogram, 1 µs buckets up to 10 ms.
#[derive(Debug)]
pub struct LatencyHistogram {
    buckets: Vec<AtomicU64>,
}

impl Default for LatencyHistogram {
    fn default() -> Self {
        LatencyHistogram { buckets: (0..=Self::MAX_US).map(|_| AtomicU64::new(0)).collect() }
    }
}

impl LatencyHistogram {
    const MAX_US: usize = 10_000;

    pub fn record(&self, d: Duration) {
        let us = (d.as_micros() as usize).min(Self::MAX_US);
        self.buckets[us].fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.buckets.iter().map(|b| b.load(Ordering::Relaxed)).sum()
    }

    /// Upper edge of the bucket holding quantile `q`. The last bucket also
    /// holds everything beyond 10 ms.
    pub fn quantile(&self, q: f64) -> Option<Duration> {
        let total = self.count();
        if total == 0 {
            return None;
        }
        let rank = ((q.clamp(0.0, 1.0) * total as f64).ceil() as u64).max(1);
        let mut seen = 0;
        for (us, b) in self.buckets.iter().enumerate() {
            seen += b.load(Ordering::Relaxed);
            if seen >= rank {
                return Some(Duration::from_micros(us as u64 + 1));
            }
        }
        Some(Duration::from_micros(Self::MAX_US as u64 + 1))
    }
}

#[derive(Debug, Default)]
pub struct RuntimeStats {
    /// Enqueue of a performer note-on to its output reaching the sink.
    pub interception: LatencyHistogram,
    pub emitted: AtomicU64,
    pub rejected: AtomicU64,
    /// Worst scheduled-event lateness seen, in microseconds.
    pub max_lateness_us: AtomicU64,
}

/// Latest published snapshot and its sequence number.
#[derive(Debug)]
pub struct SnapshotSlot {
    inner: Mutex<(u64, Arc<EngineSnapshot>)>,
}

impl SnapshotSlot {
    fn new(s: EngineSnapshot) -> Self {
        SnapshotSlot { inner: Mutex::new((0, Arc::new(s))) }
    }

    fn publish(&self, s: EngineSnapshot) {
        let mut g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        g.0 += 1;
        g.1 = Arc::new(s);
    }

    pub fn latest(&self) -> (u64, Arc<EngineSnapshot>) {
        let g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        (g.0, Arc::clone(&g.1))
    }
}

type Reply = Sender<Result<(), EngineError>>;

enum Msg {
    Event(InboundEvent, Instant, Option<Reply>),
    Shutdown,
}

/// Cloneable way in to a running timeline.
#[derive(Clone)]
pub struct RuntimeHandle {
    tx: Sender<Msg>,
    snapshots: Arc<SnapshotSlot>,
    stats: Arc<RuntimeStats>,
}

impl RuntimeHandle {
    /// Enqueues an event without waiting.
    pub fn send(&self, event: InboundEvent) {
        let _ = self.tx.send(Msg::Event(event, Instant::now(), None));
    }

    /// Enqueues an event and waits for the engine's verdict.
    pub fn request(&self, event: InboundEvent, timeout: Duration) -> Result<(), RequestError> {
        let (tx, rx) = bounded(1);
        self.tx.send(Msg::Event(event, Instant::now(), Some(tx))).map_err(|_| RequestError::Stopped)?;
        match rx.recv_timeout(timeout) {
            Ok(r) => r.map_err(RequestError::Rejected),
            Err(_) => Err(RequestError::Stopped),
        }
    }

    pub fn snapshot(&self) -> (u64, Arc<EngineSnapshot>) {
        self.snapshots.latest()
    }

    pub fn stats(&self) -> &RuntimeStats {
        &self.stats
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RequestError {
    #[error(transparent)]
    Rejected(EngineError),
    #[error("engine is not running")]
    Stopped,
}

pub struct Runtime {
    handle: RuntimeHandle,
    thread: Option<JoinHandle<Looper>>,
}

impl Runtime {
    pub fn spawn(
        looper: Looper,
        clock: Arc<dyn Clock>,
        sink: Box<dyn NoteSink>,
        plugin: Arc<dyn GeneratorPlugin>,
    ) -> io::Result<Runtime> {
        let (tx, rx) = unbounded();
        let (resp_tx, resp_rx) = unbounded();
        let worker = GeneratorWorker::spawn(plugin, resp_tx)?;
        let snapshots = Arc::new(SnapshotSlot::new(looper.snapshot()));
        let stats = Arc::new(RuntimeStats::default());
        let handle = RuntimeHandle { tx, snapshots: Arc::clone(&snapshots), stats: Arc::clone(&stats) };
        let thread = thread::Builder::new().name("timeline".into()).spawn(move || {
            Timeline {
                looper,
                clock,
                sink,
                worker,
                snapshots,
                stats,
                published_version: u64::MAX,
                published_playhead: None,
                published_at: f64::NEG_INFINITY,
            }
            .run(rx, resp_rx)
        })?;
        Ok(Runtime { handle, thread: Some(thread) })
    }

    pub fn handle(&self) -> RuntimeHandle {
        self.handle.clone()
    }

    /// Stops playback (flushing note-offs to the sink) and returns the final
    /// engine state.
    pub fn shutdown(mut self) -> Option<Looper> {
        self.stop_thread()
    }

    fn stop_thread(&mut self) -> Option<Looper> {
        let _ = self.handle.tx.send(Msg::Shutdown);
        self.thread.take().and_then(|t| t.join().ok())
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        self.stop_thread();
    }
}

struct Timeline {
    looper: Looper,
    clock: Arc<dyn Clock>,
    sink: Box<dyn NoteSink>,
    worker: GeneratorWorker,
    snapshots: Arc<SnapshotSlot>,
    stats: Arc<RuntimeStats>,
    published_version: u64,
    published_playhead: Option<u32>,
    published_at: f64,
}

impl Timeline {
    fn run(mut self, rx: Receiver<Msg>, responses: Receiver<crate::generator::GeneratorResponse>) -> Looper {
        loop {
            self.tick();
            let wait = match self.looper.next_due_ms() {
                Some(due) => {
                    let ms = (due - self.clock.now_ms()).max(0.0);
                    Duration::from_secs_f64(ms / 1000.0).min(MAX_WAIT)
                }
                None => MAX_WAIT,
            };
            select! {
                recv(rx) -> msg => match msg {
                    Ok(Msg::Event(event, enqueued, reply)) => self.apply(event, enqueued, reply),
                    Ok(Msg::Shutdown) | Err(_) => break,
                },
                recv(responses) -> r => {
                    if let Ok(r) = r {
                        self.looper.on_generator_response(&r);
                    }
                }
                default(wait) => {}
            }
        }
        let now = self.clock.now_ms();
        let mut offs = self.looper.stop_playback(now);
        offs.extend(self.looper.all_notes_off(now));
        self.emit(&offs);
        self.publish(now);
        self.looper
    }

    fn emit(&mut self, emissions: &[Emission]) {
        for e in emissions {
            let actual = self.clock.now_ms();
            self.sink.emit(e, actual);
            self.stats.emitted.fetch_add(1, Ordering::Relaxed);
            if e.origin == Origin::Scheduled {
                let late_us = ((actual - e.ideal_ms) * 1000.0).max(0.0) as u64;
                self.stats.max_lateness_us.fetch_max(late_us, Ordering::Relaxed);
            }
        }
    }

    fn tick(&mut self) {
        let now = self.clock.now_ms();
        let due = self.looper.tick(now);
        self.emit(&due);
        for req in self.looper.take_requests() {
            self.worker.submit(req);
        }
        self.publish(now);
    }

    fn apply(&mut self, event: InboundEvent, enqueued: Instant, reply: Option<Reply>) {
        // steps that came due while the event waited go out first
        self.tick();
        let now = self.clock.now_ms();
        let result = self.looper.apply(event, now);
        match &result {
            Ok(out) => {
                self.emit(out);
                if matches!(event, InboundEvent::NoteOn { .. }) {
                    self.stats.interception.record(enqueued.elapsed());
                }
            }
            Err(e) => {
                self.stats.rejected.fetch_add(1, Ordering::Relaxed);
                tracing::info!(error = %e, ?event, "event rejected");
            }
        }
        for req in self.looper.take_requests() {
            self.worker.submit(req);
        }
        if let Some(reply) = reply {
            let _ = reply.send(result.map(drop));
        }
        self.publish(now);
    }

    fn publish(&mut self, now: f64) {
        let version = self.looper.version();
        let playhead = self.looper.playhead();
        let structural = version != self.published_version;
        let moved = playhead != self.published_playhead && now - self.published_at >= PLAYHEAD_PUBLISH_MS;
        if structural || moved {
            self.snapshots.publish(self.looper.snapshot());
            self.published_version = version;
            self.published_playhead = playhead;
            self.published_at = now;
        }
    }
}
