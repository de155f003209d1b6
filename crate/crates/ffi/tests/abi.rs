use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use catalog_ffi::*;
use serde_json::Value;

fn demo_dir() -> CString {
    CString::new(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/demo").to_str().unwrap()).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    catalog_string_free(p);
    s
}

unsafe fn last_error() -> String {
    let p = catalog_last_error();
    assert!(!p.is_null(), "error message expected");
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

struct Handle(*mut CatalogHandle);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { catalog_close(self.0) }
    }
}

fn open_demo() -> Handle {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(catalog_open_in_memory(&mut h), CatalogStatus::Ok);
        let mut loaded = 0usize;
        assert_eq!(catalog_load_dir(h, demo_dir().as_ptr(), &mut loaded), CatalogStatus::Ok);
        assert_eq!(loaded, 21);
        Handle(h)
    }
}

#[test]
fn list_search_bookmark_and_dismiss() {
    let h = open_demo();
    unsafe {
        let mut n = 0usize;
        assert_eq!(catalog_card_count(h.0, &mut n), CatalogStatus::Ok);
        assert_eq!(n, 21);

        let req = CString::new(r#"{"filter":{"domains":["smart homes"]},"limit":50}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(catalog_cards_list(h.0, req.as_ptr(), &mut out), CatalogStatus::Ok);
        let page: Value = serde_json::from_str(&take(out)).unwrap();
        let total = page["total"].as_u64().unwrap();
        assert!(total > 0 && page["cards"].as_array().unwrap().iter().all(|c| c["domain"] == "smart homes"));

        let q = CString::new("smart locks landlords").unwrap();
        assert_eq!(catalog_cards_search(h.0, q.as_ptr(), 3, &mut out), CatalogStatus::Ok);
        let hits: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(hits.as_array().unwrap().len(), 3);
        assert_eq!(hits[0]["domain"], "smart homes");
        let top = CString::new(hits[0]["id"].as_str().unwrap()).unwrap();

        assert_eq!(catalog_client_token_new(&mut out), CatalogStatus::Ok);
        let client = CString::new(take(out)).unwrap();
        assert_eq!(catalog_bookmark_set(h.0, client.as_ptr(), top.as_ptr(), true), CatalogStatus::Ok);
        assert_eq!(catalog_bookmarks_list(h.0, client.as_ptr(), &mut out), CatalogStatus::Ok);
        let marks: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(marks[0]["id"].as_str(), top.to_str().ok());
        assert_eq!(catalog_bookmark_set(h.0, client.as_ptr(), top.as_ptr(), false), CatalogStatus::Ok);

        assert_eq!(catalog_dismiss(h.0, client.as_ptr(), top.as_ptr()), CatalogStatus::Ok);
        let mine = CString::new(format!(r#"{{"filter":{{"domains":["smart homes"],"exclude_for":"{}"}},"limit":50}}"#, client.to_str().unwrap())).unwrap();
        assert_eq!(catalog_cards_list(h.0, mine.as_ptr(), &mut out), CatalogStatus::Ok);
        let page: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(page["total"].as_u64().unwrap(), total - 1);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let h = open_demo();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(catalog_cards_list(ptr::null(), c"{}".as_ptr(), &mut out), CatalogStatus::NullArgument);
        assert!(last_error().contains("handle"));
        assert_eq!(catalog_cards_list(h.0, c"{not json".as_ptr(), &mut out), CatalogStatus::InvalidJson);
        assert_eq!(catalog_cards_list(h.0, c"{\"limit\":1000}".as_ptr(), &mut out), CatalogStatus::InvalidArgument);
        assert_eq!(catalog_cards_list(h.0, c"{\"filter\":{\"aspects\":[\"Weather\"]}}".as_ptr(), &mut out), CatalogStatus::InvalidJson);
        assert_eq!(catalog_cards_search(h.0, c"x".as_ptr(), 0, &mut out), CatalogStatus::InvalidArgument);

        let bad_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(catalog_cards_search(h.0, bad_utf8.as_ptr().cast(), 1, &mut out), CatalogStatus::InvalidUtf8);

        assert_eq!(catalog_client_token_new(&mut out), CatalogStatus::Ok);
        let client = CString::new(take(out)).unwrap();
        assert_eq!(catalog_bookmark_set(h.0, client.as_ptr(), c"missing".as_ptr(), true), CatalogStatus::NotFound);
        assert_eq!(catalog_dismiss(h.0, c"short".as_ptr(), c"missing".as_ptr()), CatalogStatus::InvalidArgument);

        let missing = CString::new("/nonexistent/catalog").unwrap();
        assert_eq!(catalog_load_dir(h.0, missing.as_ptr(), ptr::null_mut()), CatalogStatus::Storage);
        assert_eq!(catalog_open(c"/nonexistent/config.toml".as_ptr(), &mut ptr::null_mut()), CatalogStatus::InvalidArgument);

        let mut n = 0usize;
        assert_eq!(catalog_card_count(h.0, &mut n), CatalogStatus::Ok);
        assert!(catalog_last_error().is_null(), "success clears the error");
    }
}

#[test]
fn eval_helpers() {
    unsafe {
        let mut k = f64::NAN;
        assert_eq!(catalog_cohen_kappa(c"[\"x\",\"x\",\"y\",\"y\"]".as_ptr(), c"[\"x\",\"y\",\"x\",\"y\"]".as_ptr(), &mut k), CatalogStatus::Ok);
        assert_eq!(k, 0.0);
        assert_eq!(catalog_cohen_kappa(c"[\"x\"]".as_ptr(), c"[]".as_ptr(), &mut k), CatalogStatus::InvalidArgument);

        let report = cr#"{"domain":"d","retrieved":720,"after_title_filter":236,"after_content_filter":175,"cards_emitted":175,"pct_title":0,"pct_content":0,"per_source":[{"source":"The Verge","retrieved":720,"after_title_filter":236,"after_content_filter":175,"cards_emitted":175}]}"#;
        let mut out = ptr::null_mut();
        assert_eq!(catalog_funnel_table(report.as_ptr(), &mut out), CatalogStatus::Ok);
        assert!(take(out).contains("The Verge,720,236 (33%),175 (24%)"));

        assert_eq!(catalog_aspects(&mut out), CatalogStatus::Ok);
        let aspects: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(aspects.as_array().unwrap().len(), 10);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = target_dir();
    assert!(lib_dir.join("libcatalog_ffi.so").exists() || lib_dir.join("libcatalog_ffi.dylib").exists(), "cdylib missing in {}", lib_dir.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lcatalog_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success(), "C smoke program failed to build");
    let run = Command::new(&exe).arg(manifest.join("../core/demo")).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "stdout: {stdout}\nstderr: {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("cards 21"), "{stdout}");
    assert!(stdout.contains("null handle -> 1"), "{stdout}");
}
