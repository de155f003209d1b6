//! Time source abstraction so pacing, backoff and scheduling can be driven by
//! a fake clock in tests.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Manually advanced clock. `sleep` advances time instantly and records the
/// requested duration.
#[derive(Debug, Clone)]
pub struct FakeClock {
    inner: Arc<Mutex<FakeState>>,
}

#[derive(Debug)]
struct FakeState {
    now: DateTime<Utc>,
    sleeps: Vec<Duration>,
}

impl FakeClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        FakeClock {
            inner: Arc::new(Mutex::new(FakeState { now: start, sleeps: Vec::new() })),
        }
    }

    /// 2023-08-15T00:00:00Z
    pub fn fixed() -> Self {
        FakeClock::new(Utc.with_ymd_and_hms(2023, 8, 15, 0, 0, 0).unwrap())
    }

    pub fn advance(&self, by: Duration) {
        let mut st = self.inner.lock().unwrap();
        st.now += chrono::Duration::from_std(by).expect("duration in range");
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.inner.lock().unwrap().sleeps.clone()
    }
}

impl Clock for FakeClock {
    fn now(&self) -> DateTime<Utc> {
        self.inner.lock().unwrap().now
    }

    fn sleep(&self, duration: Duration) {
        let mut st = self.inner.lock().unwrap();
        st.sleeps.push(duration);
        st.now += chrono::Duration::from_std(duration).expect("duration in range");
    }
}
