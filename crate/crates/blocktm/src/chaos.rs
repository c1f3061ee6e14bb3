//! Schedule perturbation for concurrency stress tests: deterministic-ish
//! pseudo-random yields injected wherever workers touch shared state.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

#[derive(Clone, Default)]
pub struct Chaos(Option<Arc<Inner>>);

struct Inner {
    seed: u64,
    counter: AtomicU64,
}

impl Chaos {
    pub fn disabled() -> Self {
        Chaos(None)
    }

    pub fn from_seed(seed: Option<u64>) -> Self {
        match seed {
            Some(seed) => Chaos(Some(Arc::new(Inner { seed, counter: AtomicU64::new(0) }))),
            None => Chaos(None),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.0.is_some()
    }

    /// Possibly yields the current thread. Call at every shared-memory touch
    /// point; a no-op unless chaos is enabled.
    #[inline]
    pub fn touch(&self) {
        if let Some(inner) = &self.0 {
            let tick = inner.counter.fetch_add(1, Ordering::Relaxed);
            let mut x = tick ^ inner.seed ^ 0x9e3779b97f4a7c15;
            // splitmix64 finalizer
            x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
            x ^= x >> 31;
            match x & 0b111 {
                0 | 1 => std::thread::yield_now(),
                2 => {
                    for _ in 0..(x >> 3) & 0x3f {
                        std::hint::spin_loop();
                    }
                }
                _ => {}
            }
        }
    }
}
