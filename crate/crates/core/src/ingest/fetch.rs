use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::IngestError;

/// Downloads a page body. Non-success HTTP statuses are errors.
pub trait Fetcher: Send + Sync {
    fn get(&self, url: &str) -> Result<Vec<u8>, IngestError>;
}

pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("consequence-catalog/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| IngestError::Fetch { url: String::new(), message: e.to_string() })?;
        Ok(HttpFetcher { client })
    }
}

impl Fetcher for HttpFetcher {
    fn get(&self, url: &str) -> Result<Vec<u8>, IngestError> {
        let fail = |message: String| IngestError::Fetch { url: url.to_string(), message };
        let resp = self.client.get(url).send().map_err(|e| fail(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(fail(format!("HTTP {status}")));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| fail(e.to_string()))
    }
}

/// In-memory page map, for offline runs and tests. Pages can be added or
/// removed while in use; every request is logged.
#[derive(Clone, Default)]
pub struct StaticFetcher {
    pages: Arc<Mutex<HashMap<String, Vec<u8>>>>,
    log: Arc<Mutex<Vec<String>>>,
}

impl StaticFetcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, url: impl Into<String>, body: impl Into<Vec<u8>>) {
        self.pages.lock().unwrap().insert(url.into(), body.into());
    }

    pub fn remove(&self, url: &str) {
        self.pages.lock().unwrap().remove(url);
    }

    pub fn requests(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }

    /// Load pages listed in a `{"pages": [{"url": ..., "file": ...}]}`
    /// manifest. Relative files resolve against the manifest's directory.
    pub fn from_manifest(path: &Path) -> Result<Self, IngestError> {
        #[derive(serde::Deserialize)]
        struct Manifest {
            pages: Vec<Page>,
        }
        #[derive(serde::Deserialize)]
        struct Page {
            url: String,
            file: PathBuf,
        }
        let bad = |message: String| IngestError::InvalidSource(format!("{}: {message}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let fetcher = StaticFetcher::new();
        for page in manifest.pages {
            let file = dir.join(&page.file);
            let body = std::fs::read(&file).map_err(|e| bad(format!("{}: {e}", file.display())))?;
            fetcher.insert(page.url, body);
        }
        Ok(fetcher)
    }
}

impl Fetcher for StaticFetcher {
    fn get(&self, url: &str) -> Result<Vec<u8>, IngestError> {
        self.log.lock().unwrap().push(url.to_string());
        self.pages
            .lock()
            .unwrap()
            .get(url)
            .cloned()
            .ok_or_else(|| IngestError::Fetch { url: url.to_string(), message: "HTTP 404 Not Found".into() })
    }
}
