//! Requests-per-minute pacing shared by source fetching and the model gateway.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clock::Clock;

/// Spaces calls at least `60s / per_minute` apart, plus optional random
/// jitter. Callers are serialized: `acquire` holds the limiter while waiting.
pub struct RateLimiter {
    interval: Duration,
    jitter: f64,
    clock: Arc<dyn Clock>,
    state: Mutex<LimiterState>,
}

struct LimiterState {
    last: Option<DateTime<Utc>>,
    rng: ChaCha8Rng,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32, clock: Arc<dyn Clock>) -> Self {
        assert!(per_minute >= 1, "rate limit must be at least 1 request/minute");
        RateLimiter {
            interval: Duration::from_secs_f64(60.0 / f64::from(per_minute)),
            jitter: 0.0,
            clock,
            state: Mutex::new(LimiterState { last: None, rng: ChaCha8Rng::seed_from_u64(0) }),
        }
    }

    /// Add up to `fraction` of the interval as extra random delay.
    pub fn with_jitter(mut self, fraction: f64, seed: u64) -> Self {
        self.jitter = fraction.max(0.0);
        self.state.get_mut().unwrap().rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    pub fn acquire(&self) {
        let mut st = self.state.lock().unwrap();
        let now = self.clock.now();
        if let Some(last) = st.last {
            let extra = if self.jitter > 0.0 {
                self.interval.mul_f64(st.rng.random_range(0.0..self.jitter))
            } else {
                Duration::ZERO
            };
            let due = last + chrono::Duration::from_std(self.interval + extra).unwrap();
            if due > now {
                self.clock.sleep((due - now).to_std().unwrap());
            }
        }
        st.last = Some(self.clock.now());
    }
}
