//! C ABI over the catalog store and evaluation helpers.
//!
//! Every function returns a [`CatalogStatus`]. On failure a message is
//! available from [`catalog_last_error`] on the same thread. Strings handed
//! out through `out` parameters are owned by the caller and must be released
//! with [`catalog_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use catalog::app::Engine;
use catalog::clock::SystemClock;
use catalog::config::AppConfig;
use catalog::eval::{cohen_kappa, render_funnel_table};
use catalog::gateway::{Gateway, MockProvider, RuleTable};
use catalog::ingest::HttpFetcher;
use catalog::model::{Aspect, CardId, PipelineReport};
use catalog::store::{CardFilter, CardOrder, ClientToken, Store, StoreError};
use serde_json::{json, Value};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidArgument = 4,
    NotFound = 5,
    Storage = 6,
    Provider = 7,
    Panic = 8,
}

/// Opaque handle to an open catalog.
pub struct CatalogHandle {
    store: Arc<Store>,
    gateway: Arc<Gateway>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CatalogStatus, String);

impl Failure {
    fn new(status: CatalogStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownCard(_) | StoreError::UnknownImport(_) => CatalogStatus::NotFound,
            StoreError::LimitExceeded { .. } | StoreError::InvalidRequest(_) | StoreError::InvalidTransition { .. } => CatalogStatus::InvalidArgument,
            StoreError::Embedding(_) => CatalogStatus::Provider,
            _ => CatalogStatus::Storage,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("no interior NUL"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CatalogStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            CatalogStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            CatalogStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(CatalogStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(CatalogStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn json_arg(p: *const c_char, what: &str) -> Result<Value, Failure> {
    let raw = text(p, what)?;
    serde_json::from_str(raw).map_err(|e| Failure::new(CatalogStatus::InvalidJson, format!("{what}: {e}")))
}

unsafe fn handle<'a>(h: *const CatalogHandle) -> Result<&'a CatalogHandle, Failure> {
    h.as_ref().ok_or_else(|| Failure::new(CatalogStatus::NullArgument, "handle is null"))
}

unsafe fn client(p: *const c_char) -> Result<ClientToken, Failure> {
    ClientToken::parse(text(p, "client token")?).map_err(|_| Failure::new(CatalogStatus::InvalidArgument, "malformed client token"))
}

unsafe fn give(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(CatalogStatus::NullArgument, "out is null"));
    }
    let c = CString::new(value).map_err(|_| Failure::new(CatalogStatus::InvalidArgument, "result contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn give_json(out: *mut *mut c_char, value: &impl serde::Serialize) -> Result<(), Failure> {
    give(out, serde_json::to_string(value).expect("serializable"))
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| Failure::new(CatalogStatus::InvalidJson, format!("{what}: {e}")))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn catalog_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn catalog_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Open the catalog described by a TOML config file. Queries are embedded
/// with the configured provider, so results match the HTTP service.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_open(config_path: *const c_char, out: *mut *mut CatalogHandle) -> CatalogStatus {
    guard(|| {
        let path = text(config_path, "config path")?;
        if out.is_null() {
            return Err(Failure::new(CatalogStatus::NullArgument, "out is null"));
        }
        let config = AppConfig::load(Some(Path::new(path))).map_err(|e| Failure::new(CatalogStatus::InvalidArgument, e.to_string()))?;
        let fetcher = HttpFetcher::new(std::time::Duration::from_secs(config.provider.timeout_secs)).map_err(|e| Failure::new(CatalogStatus::Provider, e.to_string()))?;
        let engine = Engine::from_config(&config, Arc::new(fetcher), Arc::new(SystemClock)).map_err(|e| Failure::new(CatalogStatus::Storage, e.to_string()))?;
        *out = Box::into_raw(Box::new(CatalogHandle { store: engine.store.clone(), gateway: engine.gateway.clone() }));
        Ok(())
    })
}

/// Open an empty in-memory catalog that embeds with the built-in mock
/// provider.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_open_in_memory(out: *mut *mut CatalogHandle) -> CatalogStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(CatalogStatus::NullArgument, "out is null"));
        }
        let store = Store::open_in_memory()?;
        let provider = MockProvider::new(RuleTable::default(), MockProvider::DEFAULT_SEED);
        let gateway = Gateway::builder(Arc::new(provider), Arc::new(SystemClock)).build();
        *out = Box::into_raw(Box::new(CatalogHandle { store: Arc::new(store), gateway: Arc::new(gateway) }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from `catalog_open*` and not have been closed.
#[no_mangle]
pub unsafe extern "C" fn catalog_close(h: *mut CatalogHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Load an exported catalog directory (cards.jsonl plus its sidecar).
///
/// # Safety
/// `h` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn catalog_load_dir(h: *const CatalogHandle, dir: *const c_char, cards_loaded: *mut usize) -> CatalogStatus {
    guard(|| {
        let h = handle(h)?;
        let summary = h.store.import_catalog(Path::new(text(dir, "dir")?), &h.gateway)?;
        if !cards_loaded.is_null() {
            *cards_loaded = summary.cards;
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_card_count(h: *const CatalogHandle, out: *mut usize) -> CatalogStatus {
    guard(|| {
        let h = handle(h)?;
        if out.is_null() {
            return Err(Failure::new(CatalogStatus::NullArgument, "out is null"));
        }
        *out = h.store.card_count();
        Ok(())
    })
}

/// List cards. `request_json` is
/// `{"filter": {...}, "order": {"kind": "newest"}, "offset": 0, "limit": 24}`;
/// every key is optional. Writes a page `{total, offset, limit, cards}`.
///
/// # Safety
/// `h` must be a live handle; `request_json` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_cards_list(h: *const CatalogHandle, request_json: *const c_char, out: *mut *mut c_char) -> CatalogStatus {
    guard(|| {
        let h = handle(h)?;
        let mut req = json_arg(request_json, "request")?;
        let filter: CardFilter = from_value(req.get_mut("filter").map(Value::take).unwrap_or(json!({})), "filter")?;
        let order: CardOrder = from_value(req.get_mut("order").map(Value::take).unwrap_or(json!({ "kind": "newest" })), "order")?;
        let offset = req.get("offset").and_then(Value::as_u64).unwrap_or(0) as usize;
        let limit = req.get("limit").and_then(Value::as_u64).unwrap_or(24) as usize;
        give_json(out, &h.store.list_cards(&filter, order, offset, limit)?)
    })
}

/// Top-`k` cards by similarity to `query`. Writes a JSON array of cards with
/// a `score` field.
///
/// # Safety
/// `h` must be a live handle; `query` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_cards_search(h: *const CatalogHandle, query: *const c_char, k: usize, out: *mut *mut c_char) -> CatalogStatus {
    guard(|| {
        let h = handle(h)?;
        let hits = h.store.semantic_search(text(query, "query")?, k, &CardFilter::default(), &h.gateway)?;
        give_json(out, &hits)
    })
}

/// Fresh client token for bookmark and dismissal calls.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_client_token_new(out: *mut *mut c_char) -> CatalogStatus {
    guard(|| give(out, ClientToken::generate().to_string()))
}

/// # Safety
/// `h` must be a live handle; `client` and `card_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn catalog_bookmark_set(h: *const CatalogHandle, client_token: *const c_char, card_id: *const c_char, bookmarked: bool) -> CatalogStatus {
    guard(|| {
        let h = handle(h)?;
        let (c, id) = (client(client_token)?, CardId(text(card_id, "card id")?.to_string()));
        if bookmarked {
            h.store.bookmark(&c, &id)?;
        } else {
            h.store.unbookmark(&c, &id)?;
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `client` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_bookmarks_list(h: *const CatalogHandle, client_token: *const c_char, out: *mut *mut c_char) -> CatalogStatus {
    guard(|| {
        let h = handle(h)?;
        give_json(out, &h.store.list_bookmarks(&client(client_token)?)?)
    })
}

/// Hide a card from one client's listings and searches.
///
/// # Safety
/// `h` must be a live handle; `client` and `card_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn catalog_dismiss(h: *const CatalogHandle, client_token: *const c_char, card_id: *const c_char) -> CatalogStatus {
    guard(|| {
        let h = handle(h)?;
        h.store.dismiss(&client(client_token)?, &CardId(text(card_id, "card id")?.to_string()))?;
        Ok(())
    })
}

/// The ten aspects as `[{name, color, index}]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_aspects(out: *mut *mut c_char) -> CatalogStatus {
    guard(|| {
        let list: Vec<Value> = Aspect::ALL.iter().map(|a| json!({ "name": a.name(), "color": a.color(), "index": a.index() })).collect();
        give_json(out, &list)
    })
}

/// Render a pipeline report (as JSON) into the source-by-stage CSV table.
///
/// # Safety
/// `report_json` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_funnel_table(report_json: *const c_char, out: *mut *mut c_char) -> CatalogStatus {
    guard(|| {
        let report: PipelineReport = from_value(json_arg(report_json, "report")?, "report")?;
        give(out, render_funnel_table(&report))
    })
}

/// Cohen's kappa between two JSON arrays of string labels.
///
/// # Safety
/// Both label arguments must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catalog_cohen_kappa(labels_a: *const c_char, labels_b: *const c_char, out: *mut f64) -> CatalogStatus {
    guard(|| {
        let a: Vec<String> = from_value(json_arg(labels_a, "labels_a")?, "labels_a")?;
        let b: Vec<String> = from_value(json_arg(labels_b, "labels_b")?, "labels_b")?;
        if out.is_null() {
            return Err(Failure::new(CatalogStatus::NullArgument, "out is null"));
        }
        *out = cohen_kappa(&a, &b).map_err(|e| Failure::new(CatalogStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}
