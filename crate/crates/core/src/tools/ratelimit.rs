use std::collections::HashMap;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;

/// Per-key minimum spacing between requests, with random jitter added to
/// each slot. Keys are provider names (`whois`, `dns`, ...) or
/// `fetch:<host>` for page fetches.
#[derive(Debug)]
pub struct RateLimiter {
    default_interval: Duration,
    overrides: HashMap<String, Duration>,
    jitter: Duration,
    next_slot: Mutex<HashMap<String, Instant>>,
}

impl Default for RateLimiter {
    /// One request per second per key, up to 250 ms jitter.
    fn default() -> Self {
        Self::new(Duration::from_secs(1), Duration::from_millis(250))
    }
}

impl RateLimiter {
    pub fn new(default_interval: Duration, jitter: Duration) -> Self {
        Self { default_interval, overrides: HashMap::new(), jitter, next_slot: Mutex::new(HashMap::new()) }
    }

    /// No waiting at all.
    pub fn unlimited() -> Self {
        Self::new(Duration::ZERO, Duration::ZERO)
    }

    /// Interval for keys equal to `key` or starting with `key:`.
    pub fn with_interval(mut self, key: impl Into<String>, interval: Duration) -> Self {
        self.overrides.insert(key.into(), interval);
        self
    }

    fn interval_for(&self, key: &str) -> Duration {
        let family = key.split(':').next().unwrap_or(key);
        self.overrides.get(key).or_else(|| self.overrides.get(family)).copied().unwrap_or(self.default_interval)
    }

    /// Blocks until `key` may issue its next request.
    pub fn wait(&self, key: &str) {
        let interval = self.interval_for(key);
        if interval.is_zero() && self.jitter.is_zero() {
            return;
        }
        let jitter = if self.jitter.is_zero() {
            Duration::ZERO
        } else {
            rand::thread_rng().gen_range(Duration::ZERO..=self.jitter)
        };
        let slot = {
            let mut slots = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = slots.get(key).copied().filter(|s| *s > now).unwrap_or(now);
            slots.insert(key.to_string(), slot + interval + jitter);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_on_one_key_are_spaced() {
        let limiter = RateLimiter::new(Duration::from_millis(40), Duration::ZERO);
        let start = Instant::now();
        for _ in 0..3 {
            limiter.wait("whois");
        }
        assert!(start.elapsed() >= Duration::from_millis(80));
    }

    #[test]
    fn keys_are_independent() {
        let limiter = RateLimiter::new(Duration::from_millis(200), Duration::ZERO);
        let start = Instant::now();
        limiter.wait("fetch:a.example");
        limiter.wait("fetch:b.example");
        limiter.wait("dns");
        assert!(start.elapsed() < Duration::from_millis(150));
    }

    #[test]
    fn family_override_applies_to_hosts() {
        let limiter = RateLimiter::default().with_interval("fetch", Duration::ZERO);
        assert_eq!(limiter.interval_for("fetch:a.example"), Duration::ZERO);
        assert_eq!(limiter.interval_for("whois"), Duration::from_secs(1));
    }
}
