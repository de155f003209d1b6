//! Embedded durable store. SQLite holds the authoritative state; an
//! in-memory mirror of the catalog serves reads and vector search.

mod imports;
mod token;
mod vector;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, NaiveDate, Utc};
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::{Gateway, GatewayError};
use crate::ingest::KnownUrls;
use crate::model::{canonical_card_json, canonical_json, domain_key, Article, ArticleId, Aspect, CardId, ConsequenceCard, ModelError, PipelineReport, TechDomain};

pub use imports::{ImportState, PendingImport, Rejection};
pub use token::{ClientToken, InvalidToken, TOKEN_LEN};
pub use vector::{VectorError, VectorIndex, NORM_TOLERANCE};

pub const MAX_PAGE_LIMIT: usize = 200;
pub const DEFAULT_PAGE_LIMIT: usize = 24;
pub const CARDS_FILE: &str = "cards.jsonl";
pub const SIDECAR_FILE: &str = "catalog.json";

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS domains (key TEXT PRIMARY KEY, json TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS articles (id TEXT PRIMARY KEY, url TEXT NOT NULL UNIQUE, json TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS cards (
    id TEXT PRIMARY KEY,
    article_id TEXT NOT NULL REFERENCES articles(id),
    json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS vectors (
    card_id TEXT PRIMARY KEY REFERENCES cards(id) ON DELETE CASCADE,
    data BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS bookmarks (
    client TEXT NOT NULL,
    card_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    PRIMARY KEY (client, card_id)
);
CREATE TABLE IF NOT EXISTS dismissals (client TEXT NOT NULL, card_id TEXT NOT NULL, PRIMARY KEY (client, card_id));
CREATE TABLE IF NOT EXISTS imports (seq INTEGER PRIMARY KEY, id TEXT NOT NULL UNIQUE, state TEXT NOT NULL, json TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS runs (id INTEGER PRIMARY KEY AUTOINCREMENT, kind TEXT NOT NULL, json TEXT NOT NULL);
";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("{0}")]
    Io(String),
    #[error("corrupt record: {0}")]
    Corrupt(String),
    #[error("article {0} is not stored")]
    MissingArticle(ArticleId),
    #[error("unknown card {0}")]
    UnknownCard(String),
    #[error("unknown import {0}")]
    UnknownImport(String),
    #[error("import {id} is {from:?} and cannot become {to:?}")]
    InvalidTransition { id: String, from: ImportState, to: ImportState },
    #[error("limit {limit} exceeds the maximum of {MAX_PAGE_LIMIT}")]
    LimitExceeded { limit: usize },
    #[error("{0}")]
    InvalidRequest(String),
    #[error(transparent)]
    InvalidCard(#[from] ModelError),
    #[error(transparent)]
    Embedding(#[from] GatewayError),
    #[error(transparent)]
    Vector(#[from] VectorError),
}

fn to_json<T: Serialize>(v: &T) -> String {
    String::from_utf8(canonical_json(v)).expect("canonical JSON is UTF-8")
}

fn from_json<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T, StoreError> {
    serde_json::from_str(text).map_err(|e| StoreError::Corrupt(format!("{what}: {e}")))
}

/// Conjunctive card filter. Empty sets mean "any".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardFilter {
    #[serde(default)]
    pub domains: Vec<String>,
    #[serde(default)]
    pub aspects: Vec<Aspect>,
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub exclude_for: Option<ClientToken>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum CardOrder {
    Shuffled(u64),
    Newest,
}

/// A card together with the article fields a reader needs to display it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardView {
    #[serde(flatten)]
    pub card: ConsequenceCard,
    pub title: String,
    pub url: String,
    pub source: String,
    pub published_at: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardPage {
    /// Cards matching the filter, before paging.
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub cards: Vec<CardView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCard {
    #[serde(flatten)]
    pub view: CardView,
    pub score: f64,
}

/// A dated record of one batch run (weekly update, bulk import).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(default)]
    pub id: i64,
    pub kind: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub report: PipelineReport,
    #[serde(default)]
    pub errors: Vec<String>,
    /// Sources that could not be polled during this run.
    #[serde(default)]
    pub failed_sources: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogSidecar {
    pub domains: Vec<TechDomain>,
    pub articles: Vec<Article>,
    #[serde(default)]
    pub imports: Vec<PendingImport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadSummary {
    pub domains: usize,
    pub articles: usize,
    pub cards: usize,
    pub imports: usize,
}

#[derive(Default)]
struct Mirror {
    domains: BTreeMap<String, TechDomain>,
    articles: HashMap<ArticleId, Article>,
    urls: HashMap<String, ArticleId>,
    cards: BTreeMap<CardId, ConsequenceCard>,
    index: VectorIndex,
}

impl Mirror {
    fn view(&self, card: &ConsequenceCard) -> CardView {
        let article = self.articles.get(&card.article_id);
        CardView {
            card: card.clone(),
            title: article.map(|a| a.title.clone()).unwrap_or_default(),
            url: article.map(|a| a.canonical_url.clone()).unwrap_or_default(),
            source: article.map(|a| a.source.clone()).unwrap_or_default(),
            published_at: article.and_then(|a| a.published_at),
        }
    }

    fn matches(&self, card: &ConsequenceCard, filter: &CardFilter, needle: Option<&str>, hidden: &HashSet<CardId>) -> bool {
        if !filter.domains.is_empty() && !filter.domains.iter().any(|d| domain_key(d) == domain_key(&card.domain)) {
            return false;
        }
        if !filter.aspects.is_empty() && !filter.aspects.contains(&card.aspect) {
            return false;
        }
        if hidden.contains(&card.id) {
            return false;
        }
        if let Some(needle) = needle {
            let title = self.articles.get(&card.article_id).map(|a| a.title.to_lowercase()).unwrap_or_default();
            if !card.summary.to_lowercase().contains(needle) && !title.contains(needle) {
                return false;
            }
        }
        true
    }

    fn filtered(&self, filter: &CardFilter, hidden: &HashSet<CardId>) -> Vec<&ConsequenceCard> {
        let needle = filter.query.as_deref().map(str::trim).filter(|q| !q.is_empty()).map(str::to_lowercase);
        self.cards.values().filter(|c| self.matches(c, filter, needle.as_deref(), hidden)).collect()
    }
}

/// Position of a card in the permutation for `seed`. Keyed per card so a
/// filtered listing keeps the relative order of the unfiltered one.
fn shuffle_key(seed: u64, id: &CardId) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_str().as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

pub struct Store {
    conn: Mutex<Connection>,
    mirror: RwLock<Mirror>,
    path: Option<PathBuf>,
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| StoreError::Io(format!("{}: {e}", dir.display())))?;
        }
        let conn = Connection::open(path)?;
        let mode: String = conn.query_row("PRAGMA journal_mode=WAL", [], |r| r.get(0))?;
        tracing::debug!(%mode, path = %path.display(), "opened store");
        Self::init(conn, Some(path.to_path_buf()))
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?, None)
    }

    fn init(conn: Connection, path: Option<PathBuf>) -> Result<Self, StoreError> {
        conn.execute_batch("PRAGMA foreign_keys=ON; PRAGMA synchronous=FULL; PRAGMA busy_timeout=5000;")?;
        conn.execute_batch(SCHEMA)?;
        let mirror = Self::load(&conn)?;
        Ok(Store { conn: Mutex::new(conn), mirror: RwLock::new(mirror), path })
    }

    fn load(conn: &Connection) -> Result<Mirror, StoreError> {
        let mut m = Mirror::default();
        let mut stmt = conn.prepare("SELECT json FROM domains")?;
        for row in stmt.query_map([], |r| r.get::<_, String>(0))? {
            let d: TechDomain = from_json("domain", &row?)?;
            m.domains.insert(d.key(), d);
        }
        let mut stmt = conn.prepare("SELECT json FROM articles")?;
        for row in stmt.query_map([], |r| r.get::<_, String>(0))? {
            let a: Article = from_json("article", &row?)?;
            m.urls.insert(a.canonical_url.clone(), a.id.clone());
            m.articles.insert(a.id.clone(), a);
        }
        let mut stmt = conn.prepare("SELECT c.json, v.data FROM cards c JOIN vectors v ON v.card_id = c.id ORDER BY c.id")?;
        for row in stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, Vec<u8>>(1)?)))? {
            let (json, blob) = row?;
            let card: ConsequenceCard = from_json("card", &json)?;
            let v = vector::decode(&blob).ok_or_else(|| StoreError::Corrupt(format!("vector for {}", card.id)))?;
            m.index.insert(card.id.clone(), v)?;
            m.cards.insert(card.id.clone(), card);
        }
        Ok(m)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn conn(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Mirror> {
        self.mirror.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Mirror> {
        self.mirror.write().unwrap_or_else(|e| e.into_inner())
    }

    // domains

    pub fn upsert_domain(&self, domain: &TechDomain) -> Result<(), StoreError> {
        domain.validate()?;
        let conn = self.conn();
        conn.execute("INSERT OR REPLACE INTO domains (key, json) VALUES (?1, ?2)", params![domain.key(), to_json(domain)])?;
        self.write().domains.insert(domain.key(), domain.clone());
        Ok(())
    }

    pub fn domain(&self, name: &str) -> Option<TechDomain> {
        self.read().domains.get(&domain_key(name)).cloned()
    }

    pub fn domains(&self) -> Vec<TechDomain> {
        self.read().domains.values().cloned().collect()
    }

    // articles

    /// Store an article. An article already stored under the same URL is
    /// kept as is. Returns whether the article was new.
    pub fn insert_article(&self, article: &Article) -> Result<bool, StoreError> {
        let conn = self.conn();
        let n = conn.execute(
            "INSERT OR IGNORE INTO articles (id, url, json) VALUES (?1, ?2, ?3)",
            params![article.id.as_str(), article.canonical_url, to_json(article)],
        )?;
        if n > 0 {
            let mut m = self.write();
            m.urls.insert(article.canonical_url.clone(), article.id.clone());
            m.articles.insert(article.id.clone(), article.clone());
        }
        Ok(n > 0)
    }

    pub fn article(&self, id: &ArticleId) -> Option<Article> {
        self.read().articles.get(id).cloned()
    }

    pub fn article_by_url(&self, canonical_url: &str) -> Option<Article> {
        let m = self.read();
        m.urls.get(canonical_url).and_then(|id| m.articles.get(id)).cloned()
    }

    pub fn article_count(&self) -> usize {
        self.read().articles.len()
    }

    // cards

    fn embed_card(&self, card: &ConsequenceCard, gateway: &Gateway) -> Result<Vec<f64>, StoreError> {
        card.validate()?;
        let v = gateway.embed(&card.summary)?;
        self.read().index.check(&v)?;
        Ok(v)
    }

    fn write_card(tx: &Transaction<'_>, card: &ConsequenceCard, v: &[f64]) -> Result<(), StoreError> {
        tx.execute(
            "INSERT OR REPLACE INTO cards (id, article_id, json) VALUES (?1, ?2, ?3)",
            params![card.id.as_str(), card.article_id.as_str(), to_json(card)],
        )?;
        tx.execute("INSERT OR REPLACE INTO vectors (card_id, data) VALUES (?1, ?2)", params![card.id.as_str(), vector::encode(v)])?;
        Ok(())
    }

    fn mirror_card(m: &mut Mirror, card: &ConsequenceCard, v: Vec<f64>) -> Result<(), StoreError> {
        m.index.insert(card.id.clone(), v)?;
        m.cards.insert(card.id.clone(), card.clone());
        Ok(())
    }

    /// Insert or replace the card for its (article, domain) pair, together
    /// with the embedding of its summary.
    pub fn upsert_card(&self, card: &ConsequenceCard, gateway: &Gateway) -> Result<CardId, StoreError> {
        let v = self.embed_card(card, gateway)?;
        let mut conn = self.conn();
        if !self.read().articles.contains_key(&card.article_id) {
            return Err(StoreError::MissingArticle(card.article_id.clone()));
        }
        let tx = conn.transaction()?;
        Self::write_card(&tx, card, &v)?;
        tx.commit()?;
        Self::mirror_card(&mut self.write(), card, v)?;
        Ok(card.id.clone())
    }

    pub fn card(&self, id: &CardId) -> Option<ConsequenceCard> {
        self.read().cards.get(id).cloned()
    }

    pub fn card_view(&self, id: &CardId) -> Option<CardView> {
        let m = self.read();
        m.cards.get(id).map(|c| m.view(c))
    }

    pub fn card_count(&self) -> usize {
        self.read().cards.len()
    }

    pub fn vector_count(&self) -> usize {
        self.read().index.len()
    }

    /// All cards ordered by id.
    pub fn cards(&self) -> Vec<ConsequenceCard> {
        self.read().cards.values().cloned().collect()
    }

    pub fn vector(&self, id: &CardId) -> Option<Vec<f64>> {
        self.read().index.get(id).map(<[f64]>::to_vec)
    }

    fn hidden_for(&self, client: Option<&ClientToken>) -> Result<HashSet<CardId>, StoreError> {
        let Some(client) = client else { return Ok(HashSet::new()) };
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT card_id FROM dismissals WHERE client = ?1")?;
        let ids = stmt.query_map([client.as_str()], |r| r.get::<_, String>(0))?.map(|r| r.map(CardId)).collect::<Result<_, _>>()?;
        Ok(ids)
    }

    pub fn list_cards(&self, filter: &CardFilter, order: CardOrder, offset: usize, limit: usize) -> Result<CardPage, StoreError> {
        if limit > MAX_PAGE_LIMIT {
            return Err(StoreError::LimitExceeded { limit });
        }
        let hidden = self.hidden_for(filter.exclude_for.as_ref())?;
        let m = self.read();
        let mut hits = m.filtered(filter, &hidden);
        match order {
            CardOrder::Shuffled(seed) => hits.sort_by_cached_key(|c| (shuffle_key(seed, &c.id), c.id.clone())),
            CardOrder::Newest => hits.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| a.id.cmp(&b.id))),
        }
        let total = hits.len();
        let cards = hits.into_iter().skip(offset).take(limit).map(|c| m.view(c)).collect();
        Ok(CardPage { total, offset, limit, cards })
    }

    /// Exact top-`k` cards by cosine similarity to `query`, among cards
    /// passing `filter`.
    pub fn semantic_search(&self, query: &str, k: usize, filter: &CardFilter, gateway: &Gateway) -> Result<Vec<ScoredCard>, StoreError> {
        if k < 1 {
            return Err(StoreError::InvalidRequest("k must be at least 1".into()));
        }
        let q = gateway.embed(query)?;
        let hidden = self.hidden_for(filter.exclude_for.as_ref())?;
        let m = self.read();
        let candidates: Vec<CardId> = m.filtered(filter, &hidden).into_iter().map(|c| c.id.clone()).collect();
        Ok(m.index
            .top_k(&q, k, &candidates)
            .into_iter()
            .map(|(id, score)| ScoredCard { view: m.view(&m.cards[&id]), score })
            .collect())
    }

    // per-client state

    fn require_card(&self, id: &CardId) -> Result<(), StoreError> {
        if self.read().cards.contains_key(id) {
            Ok(())
        } else {
            Err(StoreError::UnknownCard(id.to_string()))
        }
    }

    pub fn bookmark(&self, client: &ClientToken, card: &CardId) -> Result<(), StoreError> {
        self.require_card(card)?;
        self.conn().execute(
            "INSERT OR IGNORE INTO bookmarks (client, card_id, seq)
             VALUES (?1, ?2, (SELECT COALESCE(MAX(seq), 0) + 1 FROM bookmarks WHERE client = ?1))",
            params![client.as_str(), card.as_str()],
        )?;
        Ok(())
    }

    pub fn unbookmark(&self, client: &ClientToken, card: &CardId) -> Result<(), StoreError> {
        self.conn().execute("DELETE FROM bookmarks WHERE client = ?1 AND card_id = ?2", params![client.as_str(), card.as_str()])?;
        Ok(())
    }

    /// Bookmarked cards in the order they were first bookmarked.
    pub fn list_bookmarks(&self, client: &ClientToken) -> Result<Vec<CardView>, StoreError> {
        let ids: Vec<CardId> = {
            let conn = self.conn();
            let mut stmt = conn.prepare("SELECT card_id FROM bookmarks WHERE client = ?1 ORDER BY seq")?;
            let rows = stmt.query_map([client.as_str()], |r| r.get::<_, String>(0))?;
            rows.map(|r| r.map(CardId)).collect::<Result<_, _>>()?
        };
        let m = self.read();
        Ok(ids.iter().filter_map(|id| m.cards.get(id)).map(|c| m.view(c)).collect())
    }

    pub fn dismiss(&self, client: &ClientToken, card: &CardId) -> Result<(), StoreError> {
        self.require_card(card)?;
        self.conn()
            .execute("INSERT OR IGNORE INTO dismissals (client, card_id) VALUES (?1, ?2)", params![client.as_str(), card.as_str()])?;
        Ok(())
    }

    pub fn dismissed(&self, client: &ClientToken) -> Result<Vec<CardId>, StoreError> {
        let mut ids: Vec<CardId> = self.hidden_for(Some(client))?.into_iter().collect();
        ids.sort();
        Ok(ids)
    }

    // imports

    /// Record a submitted import. The id is assigned here.
    pub fn create_import(&self, mut item: PendingImport) -> Result<PendingImport, StoreError> {
        item.validate().map_err(StoreError::InvalidRequest)?;
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let seq: i64 = tx.query_row("SELECT COALESCE(MAX(seq), 0) + 1 FROM imports", [], |r| r.get(0))?;
        item.id = format!("imp-{seq}");
        tx.execute(
            "INSERT INTO imports (seq, id, state, json) VALUES (?1, ?2, ?3, ?4)",
            params![seq, item.id, item.state.as_str(), to_json(&item)],
        )?;
        tx.commit()?;
        Ok(item)
    }

    fn read_import(conn: &Connection, id: &str) -> Result<PendingImport, StoreError> {
        let json: Option<String> = conn.query_row("SELECT json FROM imports WHERE id = ?1", [id], |r| r.get(0)).optional()?;
        from_json("import", &json.ok_or_else(|| StoreError::UnknownImport(id.to_string()))?)
    }

    pub fn import(&self, id: &str) -> Result<PendingImport, StoreError> {
        Self::read_import(&self.conn(), id)
    }

    /// Imports in submission order, optionally only those in `state`.
    pub fn list_imports(&self, state: Option<ImportState>) -> Result<Vec<PendingImport>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT json FROM imports ORDER BY seq")?;
        let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
        let mut out = Vec::new();
        for row in rows {
            let item: PendingImport = from_json("import", &row?)?;
            if state.is_none_or(|s| s == item.state) {
                out.push(item);
            }
        }
        Ok(out)
    }

    /// Publish a pending import: its domain (created approved if new), its
    /// article and its card become part of the catalog in one transaction.
    pub fn approve_import(&self, id: &str, now: DateTime<Utc>, gateway: &Gateway) -> Result<PendingImport, StoreError> {
        let mut conn = self.conn();
        let mut item = Self::read_import(&conn, id)?;
        if !item.state.can_become(ImportState::Approved) {
            return Err(StoreError::InvalidTransition { id: id.into(), from: item.state, to: ImportState::Approved });
        }
        let (Some(card), Some(article)) = (item.extracted_card.clone(), item.article.clone()) else {
            return Err(StoreError::InvalidTransition { id: id.into(), from: item.state, to: ImportState::Approved });
        };
        let v = self.embed_card(&card, gateway)?;
        let domain = match self.domain(&item.proposed_domain) {
            Some(d) => d,
            None => TechDomain::new(item.proposed_domain.trim(), &[item.proposed_domain.trim()]),
        };
        domain.validate()?;
        item.state = ImportState::Approved;
        item.decided_at = Some(now);

        let tx = conn.transaction()?;
        tx.execute("INSERT OR REPLACE INTO domains (key, json) VALUES (?1, ?2)", params![domain.key(), to_json(&domain)])?;
        tx.execute(
            "INSERT OR IGNORE INTO articles (id, url, json) VALUES (?1, ?2, ?3)",
            params![article.id.as_str(), article.canonical_url, to_json(&article)],
        )?;
        Self::write_card(&tx, &card, &v)?;
        tx.execute("UPDATE imports SET state = ?2, json = ?3 WHERE id = ?1", params![id, item.state.as_str(), to_json(&item)])?;
        tx.commit()?;

        let mut m = self.write();
        m.domains.insert(domain.key(), domain);
        if !m.articles.contains_key(&article.id) {
            m.urls.insert(article.canonical_url.clone(), article.id.clone());
            m.articles.insert(article.id.clone(), article);
        }
        Self::mirror_card(&mut m, &card, v)?;
        Ok(item)
    }

    pub fn reject_import(&self, id: &str, now: DateTime<Utc>) -> Result<PendingImport, StoreError> {
        let conn = self.conn();
        let mut item = Self::read_import(&conn, id)?;
        if !item.state.can_become(ImportState::Rejected) {
            return Err(StoreError::InvalidTransition { id: id.into(), from: item.state, to: ImportState::Rejected });
        }
        item.state = ImportState::Rejected;
        item.decided_at = Some(now);
        conn.execute("UPDATE imports SET state = ?2, json = ?3 WHERE id = ?1", params![id, item.state.as_str(), to_json(&item)])?;
        Ok(item)
    }

    // run history

    pub fn record_run(&self, run: &RunRecord) -> Result<i64, StoreError> {
        let conn = self.conn();
        conn.execute("INSERT INTO runs (kind, json) VALUES (?1, ?2)", params![run.kind, to_json(run)])?;
        Ok(conn.last_insert_rowid())
    }

    /// Recorded runs, oldest first.
    pub fn runs(&self) -> Result<Vec<RunRecord>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT id, json FROM runs ORDER BY id")?;
        let rows = stmt.query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?)))?;
        let mut out = Vec::new();
        for row in rows {
            let (id, json) = row?;
            let mut run: RunRecord = from_json("run", &json)?;
            run.id = id;
            out.push(run);
        }
        Ok(out)
    }

    // export / import

    /// Write `cards.jsonl` (canonical records sorted by id) and the
    /// `catalog.json` sidecar into `dir`.
    pub fn export_catalog(&self, dir: &Path) -> Result<LoadSummary, StoreError> {
        let io = |e: std::io::Error| StoreError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let imports = self.list_imports(None)?;
        let m = self.read();
        let mut cards = std::fs::File::create(dir.join(CARDS_FILE)).map_err(io)?;
        for card in m.cards.values() {
            cards.write_all(&canonical_card_json(card)).map_err(io)?;
            cards.write_all(b"\n").map_err(io)?;
        }
        cards.sync_all().map_err(io)?;
        let mut articles: Vec<Article> = m.articles.values().cloned().collect();
        articles.sort_by(|a, b| a.id.cmp(&b.id));
        let sidecar = CatalogSidecar { domains: m.domains.values().cloned().collect(), articles, imports };
        let mut json = serde_json::to_vec_pretty(&sidecar).map_err(|e| StoreError::Io(e.to_string()))?;
        json.push(b'\n');
        std::fs::write(dir.join(SIDECAR_FILE), json).map_err(io)?;
        Ok(LoadSummary { domains: sidecar.domains.len(), articles: sidecar.articles.len(), cards: m.cards.len(), imports: sidecar.imports.len() })
    }

    /// Load an exported catalog. Existing records with the same keys are
    /// replaced; imports keep their ids.
    pub fn import_catalog(&self, dir: &Path, gateway: &Gateway) -> Result<LoadSummary, StoreError> {
        let read = |name: &str| std::fs::read_to_string(dir.join(name)).map_err(|e| StoreError::Io(format!("{}: {e}", dir.join(name).display())));
        let sidecar: CatalogSidecar = from_json(SIDECAR_FILE, &read(SIDECAR_FILE)?)?;
        let mut cards = Vec::new();
        for (n, line) in read(CARDS_FILE)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            cards.push(from_json::<ConsequenceCard>(&format!("{CARDS_FILE} line {}", n + 1), line)?);
        }
        for d in &sidecar.domains {
            d.validate()?;
        }
        let known: HashSet<&ArticleId> = sidecar.articles.iter().map(|a| &a.id).collect();
        let mut vectors = Vec::with_capacity(cards.len());
        for card in &cards {
            if !known.contains(&card.article_id) && !self.read().articles.contains_key(&card.article_id) {
                return Err(StoreError::MissingArticle(card.article_id.clone()));
            }
            vectors.push(self.embed_card(card, gateway)?);
        }

        let mut conn = self.conn();
        let tx = conn.transaction()?;
        for d in &sidecar.domains {
            tx.execute("INSERT OR REPLACE INTO domains (key, json) VALUES (?1, ?2)", params![d.key(), to_json(d)])?;
        }
        for a in &sidecar.articles {
            tx.execute("DELETE FROM articles WHERE url = ?1 AND id <> ?2", params![a.canonical_url, a.id.as_str()])
                .map_err(|e| StoreError::Corrupt(format!("article {} conflicts with a stored URL: {e}", a.id)))?;
            tx.execute(
                "INSERT OR REPLACE INTO articles (id, url, json) VALUES (?1, ?2, ?3)",
                params![a.id.as_str(), a.canonical_url, to_json(a)],
            )?;
        }
        for (card, v) in cards.iter().zip(&vectors) {
            Self::write_card(&tx, card, v)?;
        }
        for item in &sidecar.imports {
            let seq: i64 = item
                .id
                .strip_prefix("imp-")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| StoreError::Corrupt(format!("import id {}", item.id)))?;
            tx.execute(
                "INSERT OR REPLACE INTO imports (seq, id, state, json) VALUES (?1, ?2, ?3, ?4)",
                params![seq, item.id, item.state.as_str(), to_json(item)],
            )?;
        }
        tx.commit()?;

        let mut m = self.write();
        for d in &sidecar.domains {
            m.domains.insert(d.key(), d.clone());
        }
        for a in &sidecar.articles {
            m.urls.insert(a.canonical_url.clone(), a.id.clone());
            m.articles.insert(a.id.clone(), a.clone());
        }
        for (card, v) in cards.iter().zip(vectors) {
            Self::mirror_card(&mut m, card, v)?;
        }
        Ok(LoadSummary { domains: sidecar.domains.len(), articles: sidecar.articles.len(), cards: cards.len(), imports: sidecar.imports.len() })
    }
}

impl KnownUrls for Store {
    fn contains_url(&self, canonical_url: &str) -> bool {
        self.read().urls.contains_key(canonical_url)
    }
}
