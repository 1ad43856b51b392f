//! Single-slot, latest-wins hand-off between two threads.
//!
//! Both sides are wait-free: posting never blocks (a newer value displaces an
//! unread older one) and taking returns immediately.

use crossbeam_queue::ArrayQueue;

#[derive(Debug)]
pub struct Mailbox<T> {
    slot: ArrayQueue<T>,
}

impl<T> Mailbox<T> {
    pub fn new() -> Self {
        Mailbox { slot: ArrayQueue::new(1) }
    }

    /// Stores `value`, returning the unread value it displaced, if any.
    pub fn post(&self, value: T) -> Option<T> {
        self.slot.force_push(value)
    }

    pub fn take(&self) -> Option<T> {
        self.slot.pop()
    }

    pub fn is_empty(&self) -> bool {
        self.slot.is_empty()
    }
}

impl<T> Default for Mailbox<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;

    #[test]
    fn latest_wins() {
        let m = Mailbox::new();
        assert_eq!(m.post(1), None);
        assert_eq!(m.post(2), Some(1));
        assert_eq!(m.take(), Some(2));
        assert_eq!(m.take(), None);
        assert!(m.is_empty());
    }

    #[test]
    fn cross_thread_delivery_is_monotone() {
        let m = Arc::new(Mailbox::new());
        let producer = {
            let m = Arc::clone(&m);
            thread::spawn(move || {
                for i in 0..10_000u32 {
                    m.post(i);
                }
            })
        };
        let mut last = None;
        while !producer.is_finished() || !m.is_empty() {
            if let Some(v) = m.take() {
                assert!(last.is_none_or(|l| v > l));
                last = Some(v);
            }
        }
        producer.join().unwrap();
        assert_eq!(last, Some(9_999));
    }
}
