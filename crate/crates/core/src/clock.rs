//! Time sources. Everything time-dependent in the engine reads a [`Clock`];
//! only the binary entry point uses the system clock.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::model::Millis;

pub trait Clock: Send + Sync {
    fn now(&self) -> Millis;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Millis {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as Millis).unwrap_or(0)
    }
}

/// Manually driven clock for tests and replay. Cloning shares the same time.
#[derive(Debug, Default, Clone)]
pub struct FakeClock(Arc<AtomicI64>);

impl FakeClock {
    pub fn new(start: Millis) -> Self {
        FakeClock(Arc::new(AtomicI64::new(start)))
    }

    pub fn set(&self, t: Millis) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, delta: Millis) -> Millis {
        self.0.fetch_add(delta, Ordering::SeqCst) + delta
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Millis {
        self.0.load(Ordering::SeqCst)
    }
}

/// Mints opaque identifiers of the form `<prefix>.<kind><n>`.
#[derive(Debug, Clone, Default)]
pub struct IdMinter {
    prefix: String,
    counters: std::collections::BTreeMap<&'static str, u64>,
}

impl IdMinter {
    pub fn new(prefix: impl Into<String>) -> Self {
        IdMinter { prefix: prefix.into(), counters: Default::default() }
    }

    pub fn mint(&mut self, kind: &'static str) -> String {
        let n = self.counters.entry(kind).or_insert(0);
        *n += 1;
        format!("{}.{}{}", self.prefix, kind, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fake_clock_shared() {
        let c = FakeClock::new(100);
        let c2 = c.clone();
        c.advance(50);
        assert_eq!(c2.now(), 150);
        c2.set(10);
        assert_eq!(c.now(), 10);
    }

    #[test]
    fn ids_are_sequential_per_kind() {
        let mut m = IdMinter::new("s1");
        assert_eq!(m.mint("ev"), "s1.ev1");
        assert_eq!(m.mint("ev"), "s1.ev2");
        assert_eq!(m.mint("sug"), "s1.sug1");
    }
}
