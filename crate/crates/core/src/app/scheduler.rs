use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};

use super::Engine;
use crate::store::RunRecord;

/// Decides when the weekly update is due. Windows missed while the process
/// was busy or asleep collapse into a single run.
pub struct Scheduler {
    cadence: Duration,
    next_due: Mutex<DateTime<Utc>>,
}

impl Scheduler {
    /// First run is one cadence after the last recorded weekly run, or after
    /// `now` when there is none.
    pub fn new(cadence: Duration, now: DateTime<Utc>, last_run: Option<DateTime<Utc>>) -> Self {
        let next_due = last_run.unwrap_or(now) + cadence;
        Scheduler { cadence, next_due: Mutex::new(next_due) }
    }

    pub fn for_engine(engine: &Engine, cadence_days: u32) -> Self {
        let last = engine.store.runs().ok().and_then(|runs| runs.into_iter().rev().find(|r| r.kind == "weekly")).map(|r| r.started_at);
        Scheduler::new(Duration::days(cadence_days.into()), engine.now(), last)
    }

    pub fn next_due(&self) -> DateTime<Utc> {
        *self.next_due.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Whether a run is due at `now`; when it is, the due time moves to the
    /// first slot on the cadence grid after `now`.
    pub fn claim(&self, now: DateTime<Utc>) -> bool {
        let mut due = self.next_due.lock().unwrap_or_else(|e| e.into_inner());
        if now < *due {
            return false;
        }
        let missed = (now - *due).num_seconds() / self.cadence.num_seconds().max(1);
        *due += self.cadence * (missed as i32 + 1);
        true
    }

    /// Run the update if it is due. Errors are logged and swallowed.
    pub fn tick(&self, engine: &Engine) -> Option<RunRecord> {
        if !self.claim(engine.now()) {
            return None;
        }
        match engine.run_weekly_update() {
            Ok(run) => Some(run),
            Err(e) => {
                tracing::error!("weekly update failed: {e}");
                None
            }
        }
    }
}
