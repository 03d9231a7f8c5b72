//! Counting gate that caps the number of in-flight backend requests.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

#[derive(Debug)]
pub struct InFlightGate {
    cap: usize,
    active: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
}

impl InFlightGate {
    /// A cap of zero is treated as one.
    pub fn new(cap: usize) -> Self {
        InFlightGate {
            cap: cap.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
            peak: AtomicUsize::new(0),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.cap {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        self.peak.fetch_max(*active, Ordering::SeqCst);
        Permit { gate: self }
    }

    /// Highest number of simultaneously held permits observed so far.
    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

pub struct Permit<'a> {
    gate: &'a InFlightGate,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut active = self.gate.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.gate.freed.notify_one();
    }
}
