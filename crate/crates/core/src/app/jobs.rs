use std::collections::{BTreeMap, HashMap};
use std::panic::AssertUnwindSafe;
use std::sync::{Arc, Condvar, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Engine, EngineError};
use crate::ingest::{search_source, BulkRow, KnownUrls};
use crate::model::{domain_key, Article, PipelineReport, TechDomain};
use crate::store::RunRecord;

/// What a bulk job should ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BulkSpec {
    /// Explicit URLs; rows without a domain use `default_domain`.
    Urls { rows: Vec<BulkRow>, default_domain: Option<String> },
    /// Search configured sources (all when `sources` is empty) for each keyword.
    Keywords { domain: String, keywords: Vec<String>, #[serde(default)] sources: Vec<String>, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub state: JobState,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    /// URLs to fetch, once known.
    pub requested: usize,
    pub fetched: usize,
    pub published: usize,
    /// Funnel counters, updated while the job runs.
    pub report: PipelineReport,
    pub errors: Vec<String>,
}

#[derive(Default)]
struct Inner {
    jobs: BTreeMap<String, JobStatus>,
    live: HashMap<String, Arc<Mutex<PipelineReport>>>,
    running: Option<String>,
    next: u64,
}

/// Job registry. At most one job runs at a time.
#[derive(Default)]
pub(super) struct JobTable {
    inner: Mutex<Inner>,
    finished: Condvar,
}

impl JobTable {
    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub(super) fn status(&self, id: &str) -> Option<JobStatus> {
        let inner = self.lock();
        let mut status = inner.jobs.get(id)?.clone();
        if let Some(live) = inner.live.get(id) {
            status.report = live.lock().unwrap_or_else(|e| e.into_inner()).clone();
        }
        Some(status)
    }

    pub(super) fn wait(&self, id: &str) -> Option<JobStatus> {
        let mut inner = self.lock();
        loop {
            match inner.jobs.get(id) {
                None => return None,
                Some(s) if s.state != JobState::Running => return Some(s.clone()),
                Some(_) => inner = self.finished.wait(inner).unwrap_or_else(|e| e.into_inner()),
            }
        }
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobStatus)) {
        if let Some(s) = self.lock().jobs.get_mut(id) {
            f(s);
        }
    }
}

fn validate(engine: &Engine, spec: &BulkSpec) -> Result<(), EngineError> {
    let bad = |m: String| Err(EngineError::InvalidRequest(m));
    match spec {
        BulkSpec::Urls { rows, default_domain } => {
            if rows.is_empty() {
                return bad("no URLs to import".into());
            }
            let fallback = default_domain.as_deref().filter(|d| !d.trim().is_empty());
            if let Some(n) = rows.iter().position(|r| r.domain.as_deref().filter(|d| !d.trim().is_empty()).or(fallback).is_none()) {
                return bad(format!("row {}: no domain given and no default domain", n + 1));
            }
        }
        BulkSpec::Keywords { domain, keywords, sources, limit } => {
            if domain.trim().is_empty() || keywords.iter().all(|k| k.trim().is_empty()) {
                return bad("keyword import needs a domain and at least one keyword".into());
            }
            if *limit == 0 {
                return bad("limit must be at least 1".into());
            }
            if engine.sources().is_empty() {
                return bad("no sources are configured".into());
            }
            for name in sources {
                if !engine.sources().iter().any(|s| s.name() == name) {
                    return bad(format!("unknown source {name:?}"));
                }
            }
        }
    }
    Ok(())
}

pub(super) fn start(engine: &Arc<Engine>, spec: BulkSpec) -> Result<String, EngineError> {
    validate(engine, &spec)?;
    let live = Arc::new(Mutex::new(PipelineReport::default()));
    let id = {
        let mut inner = engine.jobs.lock();
        if let Some(running) = &inner.running {
            return Err(EngineError::JobRunning(running.clone()));
        }
        inner.next += 1;
        let id = format!("job-{}", inner.next);
        inner.jobs.insert(
            id.clone(),
            JobStatus {
                id: id.clone(),
                state: JobState::Running,
                started_at: engine.clock.now(),
                finished_at: None,
                requested: 0,
                fetched: 0,
                published: 0,
                report: PipelineReport::default(),
                errors: Vec::new(),
            },
        );
        inner.live.insert(id.clone(), live.clone());
        inner.running = Some(id.clone());
        id
    };

    let engine = engine.clone();
    let job = id.clone();
    std::thread::Builder::new()
        .name(format!("bulk-{job}"))
        .spawn(move || {
            let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| run(&engine, &job, spec, &live)));
            let finished_at = engine.clock.now();
            let mut inner = engine.jobs.lock();
            inner.live.remove(&job);
            inner.running = None;
            if let Some(s) = inner.jobs.get_mut(&job) {
                s.finished_at = Some(finished_at);
                match outcome {
                    Ok(()) => s.state = JobState::Completed,
                    Err(_) => {
                        s.state = JobState::Failed;
                        s.report = live.lock().unwrap_or_else(|e| e.into_inner()).clone();
                        s.errors.push("job aborted unexpectedly".into());
                    }
                }
            }
            drop(inner);
            engine.jobs.finished.notify_all();
        })
        .map_err(|e| EngineError::Setup(format!("could not start job thread: {e}")))?;
    Ok(id)
}

fn admin_domain(engine: &Engine, name: &str) -> TechDomain {
    engine.store.domain(name).unwrap_or_else(|| TechDomain::new(name.trim(), &[name.trim()]))
}

fn collect(engine: &Engine, job: &str, spec: &BulkSpec) -> (BTreeMap<String, (TechDomain, Vec<Article>)>, Vec<String>) {
    let mut groups: BTreeMap<String, (TechDomain, Vec<Article>)> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut fetch_into = |domain: &str, url: &str, groups: &mut BTreeMap<String, (TechDomain, Vec<Article>)>| {
        match engine.fetch_article(url) {
            Ok(a) => {
                let entry = groups.entry(domain_key(domain)).or_insert_with(|| (admin_domain(engine, domain), Vec::new()));
                entry.1.push(a);
                engine.jobs.update(job, |s| s.fetched += 1);
            }
            Err(e) => errors.push(format!("{url}: {e}")),
        }
    };
    match spec {
        BulkSpec::Urls { rows, default_domain } => {
            engine.jobs.update(job, |s| s.requested = rows.len());
            for row in rows {
                let domain = row.domain.as_deref().filter(|d| !d.trim().is_empty()).or(default_domain.as_deref()).unwrap_or_default();
                fetch_into(domain, &row.url, &mut groups);
            }
        }
        BulkSpec::Keywords { domain, keywords, sources, limit } => {
            let mut urls = Vec::new();
            let mut search_errors = Vec::new();
            for source in engine.sources().iter().filter(|s| sources.is_empty() || sources.iter().any(|n| n == s.name())) {
                for keyword in keywords.iter().filter(|k| !k.trim().is_empty()) {
                    match search_source(source, keyword, *limit) {
                        Ok(found) => urls.extend(found.into_iter().filter(|u| !engine.store.contains_url(u))),
                        Err(e) => search_errors.push(e.to_string()),
                    }
                }
            }
            let mut seen = std::collections::HashSet::new();
            urls.retain(|u| seen.insert(u.clone()));
            engine.jobs.update(job, |s| s.requested = urls.len());
            for url in &urls {
                fetch_into(domain, url, &mut groups);
            }
            errors.extend(search_errors);
        }
    }
    (groups, errors)
}

fn run(engine: &Engine, job: &str, spec: BulkSpec, live: &Mutex<PipelineReport>) {
    let started_at = engine.clock.now();
    let (groups, mut errors) = collect(engine, job, &spec);
    let label = groups.values().map(|(d, _)| d.name.as_str()).collect::<Vec<_>>().join(", ");
    live.lock().unwrap_or_else(|e| e.into_inner()).domain = label.clone();
    let mut result = engine.pipeline_and_publish(&groups, Some(live));
    result.report.domain = label;
    errors.append(&mut result.errors);
    let record = RunRecord { id: 0, kind: "bulk".into(), started_at, finished_at: engine.clock.now(), report: result.report.clone(), errors: errors.clone(), failed_sources: Vec::new() };
    if let Err(e) = engine.store.record_run(&record) {
        errors.push(format!("could not record run: {e}"));
    }
    engine.jobs.update(job, |s| {
        s.report = result.report;
        s.published = result.published;
        s.errors = errors;
    });
}
