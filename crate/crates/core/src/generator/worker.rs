//! Runs generator calls off the timeline thread.
//!
//! Each request kind has a single-slot mailbox and its own thread. Submitting
//! never blocks: a newer request replaces one that has not started yet, which
//! is fine because the engine only ever waits for its most recent request.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::Sender;

use super::{GeneratorKind, GeneratorPlugin, GeneratorRequest, GeneratorResponse};
use crate::mailbox::Mailbox;

const IDLE_PARK: Duration = Duration::from_millis(100);

struct Lane {
    slot: Arc<Mailbox<GeneratorRequest>>,
    thread: JoinHandle<()>,
}

pub struct GeneratorWorker {
    plugin_name: String,
    stop: Arc<AtomicBool>,
    melody: Lane,
    drums: Lane,
}

impl GeneratorWorker {
    /// Starts one worker thread per request kind. Responses go to `out`.
    pub fn spawn(plugin: Arc<dyn GeneratorPlugin>, out: Sender<GeneratorResponse>) -> std::io::Result<Self> {
        let stop = Arc::new(AtomicBool::new(false));
        let lane = |kind: GeneratorKind| -> std::io::Result<Lane> {
            let slot: Arc<Mailbox<GeneratorRequest>> = Arc::new(Mailbox::new());
            let (slot2, plugin, out, stop) = (Arc::clone(&slot), Arc::clone(&plugin), out.clone(), Arc::clone(&stop));
            let thread = thread::Builder::new().name(format!("gen-{kind:?}").to_lowercase()).spawn(move || {
                while !stop.load(Ordering::Acquire) {
                    let Some(req) = slot2.take() else {
                        thread::park_timeout(IDLE_PARK);
                        continue;
                    };
                    let response = if plugin.supports(req.kind()) {
                        plugin.generate(&req)
                    } else {
                        GeneratorResponse::empty_for(&req)
                    };
                    if out.send(response).is_err() {
                        break;
                    }
                }
            })?;
            Ok(Lane { slot, thread })
        };
        let melody = lane(GeneratorKind::Melody)?;
        let drums = lane(GeneratorKind::Drums)?;
        Ok(GeneratorWorker { plugin_name: plugin.name().to_owned(), stop, melody, drums })
    }

    pub fn plugin_name(&self) -> &str {
        &self.plugin_name
    }

    /// Queues `req` without blocking. Returns a request it displaced, if any.
    pub fn submit(&self, req: GeneratorRequest) -> Option<GeneratorRequest> {
        let lane = match req.kind() {
            GeneratorKind::Melody => &self.melody,
            GeneratorKind::Drums => &self.drums,
        };
        let displaced = lane.slot.post(req);
        lane.thread.thread().unpark();
        displaced
    }
}

impl Drop for GeneratorWorker {
    // Threads are signalled but not joined: one may be inside a slow remote
    // call, and shutdown must not wait for it.
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        self.melody.thread.thread().unpark();
        self.drums.thread.thread().unpark();
    }
}
