use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Time source for the rate limiter, replaceable in tests.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Spaces requests to the same host at least `interval` apart. Callers for
/// one host are serialized; different hosts do not wait on each other.
pub struct RateLimiter {
    interval: Duration,
    clock: Arc<dyn Clock>,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Duration>>>>>,
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateLimiter").field("interval", &self.interval).finish_non_exhaustive()
    }
}

impl RateLimiter {
    pub fn new(interval: Duration, clock: Arc<dyn Clock>) -> Self {
        RateLimiter { interval, clock, hosts: Mutex::new(HashMap::new()) }
    }

    /// One request per second per host on the system clock.
    pub fn per_second() -> Self {
        Self::new(Duration::from_millis(1000), Arc::new(SystemClock::default()))
    }

    /// Runs `f` once the host's slot is free and records the start time.
    pub fn run<T>(&self, host: &str, f: impl FnOnce() -> T) -> T {
        let slot = {
            let mut hosts = self.hosts.lock().unwrap_or_else(|e| e.into_inner());
            hosts.entry(host.to_string()).or_default().clone()
        };
        let mut last = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let now = self.clock.now();
            let ready = prev + self.interval;
            if now < ready {
                self.clock.sleep(ready - now);
            }
        }
        *last = Some(self.clock.now());
        f()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Clock that only advances when slept on.
    #[derive(Debug, Default)]
    pub struct FakeClock {
        pub now: Mutex<Duration>,
    }

    impl Clock for FakeClock {
        fn now(&self) -> Duration {
            *self.now.lock().unwrap()
        }

        fn sleep(&self, d: Duration) {
            *self.now.lock().unwrap() += d;
        }
    }

    #[test]
    fn same_host_spaced_by_interval() {
        let clock = Arc::new(FakeClock::default());
        let rl = RateLimiter::new(Duration::from_millis(1000), clock.clone());
        let mut starts = Vec::new();
        for _ in 0..4 {
            rl.run("a.example", || starts.push(clock.now()));
        }
        for w in starts.windows(2) {
            assert!(w[1] - w[0] >= Duration::from_millis(1000));
        }
    }

    #[test]
    fn other_hosts_do_not_wait() {
        let clock = Arc::new(FakeClock::default());
        let rl = RateLimiter::new(Duration::from_millis(1000), clock.clone());
        rl.run("a", || ());
        rl.run("b", || ());
        assert_eq!(clock.now(), Duration::ZERO);
        rl.run("a", || ());
        assert_eq!(clock.now(), Duration::from_millis(1000));
    }
}
