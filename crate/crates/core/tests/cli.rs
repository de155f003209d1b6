mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn catalog(db: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_catalog"));
    cmd.env("CATALOG_DB", db).env("RUST_LOG", "warn");
    for (k, _) in std::env::vars() {
        if k.starts_with("CATALOG_") && k != "CATALOG_DB" {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn ok(out: Output) -> (String, String) {
    let stdout = String::from_utf8(out.stdout).unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(out.status.success(), "exit {:?}\nstdout: {stdout}\nstderr: {stderr}", out.status);
    (stdout, stderr)
}

fn corpus(name: &str) -> PathBuf {
    common::corpus().join(name)
}

fn without_timestamps(jsonl: &str) -> Vec<Value> {
    jsonl
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("created_at");
            v
        })
        .collect()
}

fn fixture_cmd(db: &Path) -> Command {
    let mut cmd = catalog(db);
    cmd.arg("--config").arg(corpus("config.toml")).arg("--offline").arg(corpus("manifest.json"));
    cmd
}

#[test]
fn run_reproduces_the_golden_cards() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cards.jsonl");
    let (_, stderr) = ok(fixture_cmd(&dir.path().join("c.db")).args(["run", "--urls"]).arg(corpus("urls.csv")).arg("--out").arg(&out).output().unwrap());
    assert!(stderr.contains("Total,12,7 (58%),4 (33%)"), "{stderr}");
    let golden = std::fs::read_to_string(corpus("golden_cards.jsonl")).unwrap();
    assert_eq!(without_timestamps(&std::fs::read_to_string(&out).unwrap()), without_timestamps(&golden));
}

#[test]
fn bulk_import_export_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("c.db");
    let (stdout, _) = ok(fixture_cmd(&db).args(["bulk-import", "--urls"]).arg(corpus("urls.csv")).output().unwrap());
    let status: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!((status["state"].as_str(), status["published"].as_u64()), (Some("completed"), Some(4)));

    let export = dir.path().join("export");
    ok(fixture_cmd(&db).arg("export").arg(&export).output().unwrap());
    assert_eq!(std::fs::read_to_string(export.join("cards.jsonl")).unwrap().lines().count(), 4);

    let fresh = dir.path().join("fresh.db");
    let (stdout, _) = ok(catalog(&fresh).arg("import").arg(&export).output().unwrap());
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["cards"], 4);
    let (stdout, _) = ok(catalog(&fresh).arg("runs").output().unwrap());
    assert!(stdout.is_empty(), "runs are not part of an export");
    let (stdout, _) = ok(fixture_cmd(&db).arg("runs").output().unwrap());
    assert!(stdout.contains("(bulk)") && stdout.contains("Total,12,7 (58%),4 (33%)"), "{stdout}");
}

#[test]
fn eval_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("c.db");
    let p = |name: &str| dir.path().join(name);

    std::fs::write(p("preds.csv"), "prediction,label\n1,1\n1,0\n0,1\n0,0\n1,1\n").unwrap();
    let (stdout, _) = ok(catalog(&db).args(["eval", "metrics"]).arg(p("preds.csv")).output().unwrap());
    let m: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(m["accuracy"], 0.6);

    std::fs::write(p("ann.csv"), "text,label_a,label_b\na,x,x\nb,x,y\nc,y,x\nd,y,y\n").unwrap();
    let (stdout, _) = ok(catalog(&db).args(["eval", "kappa"]).arg(p("ann.csv")).output().unwrap());
    let k: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!((k["agreement"].as_f64(), k["kappa"].as_f64()), (Some(0.5), Some(0.0)));

    let (stdout, _) = ok(catalog(&db).args(["eval", "split"]).arg(corpus("titles.csv")).arg("--train").arg(p("train.csv")).arg("--test").arg(p("test.csv")).output().unwrap());
    assert!(stdout.contains("train"), "{stdout}");
    let train = std::fs::read_to_string(p("train.csv")).unwrap();
    let test = std::fs::read_to_string(p("test.csv")).unwrap();
    assert_eq!(train.lines().count() + test.lines().count() - 2, 12);

    let (stdout, _) = ok(catalog(&db).args(["eval", "train-title"]).arg(corpus("titles.csv")).arg("--out").arg(p("model.json")).arg("--test").arg(corpus("titles.csv")).output().unwrap());
    let m: Value = serde_json::from_str(&stdout).unwrap();
    assert!(m["f1"].as_f64().unwrap() > 0.0);
    let model: Value = serde_json::from_str(&std::fs::read_to_string(p("model.json")).unwrap()).unwrap();
    assert!(model["vocabulary"].is_object());

    let bad = catalog(&db).args(["eval", "metrics"]).arg(p("missing.csv")).output().unwrap();
    assert!(!bad.status.success());
}

struct Child(std::process::Child);

impl Drop for Child {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serves_the_demo_catalog_offline() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/serve.toml");
    let _child = Child(
        catalog(&dir.path().join("demo.db"))
            .arg("--config")
            .arg(&demo)
            .arg("serve")
            .env("CATALOG_PORT", port.to_string())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let base = format!("http://127.0.0.1:{port}");
    let client = reqwest::blocking::Client::new();
    let deadline = Instant::now() + Duration::from_secs(20);
    let cards: Value = loop {
        match client.get(format!("{base}/cards?limit=200")).send() {
            Ok(r) => break r.json().unwrap(),
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(100)),
            Err(e) => panic!("service did not come up: {e}"),
        }
    };
    assert_eq!(cards["total"], 21);
    let mut aspects: Vec<&str> = cards["cards"].as_array().unwrap().iter().map(|c| c["aspect"].as_str().unwrap()).collect();
    aspects.sort();
    aspects.dedup();
    assert_eq!(aspects.len(), 10, "demo covers every aspect");
    let found: Value = client.get(format!("{base}/cards/search?q=smart+locks+landlords&k=3")).send().unwrap().json().unwrap();
    assert_eq!(found["results"][0]["domain"], "smart homes");
    let unauthorized = client.get(format!("{base}/imports")).send().unwrap();
    assert_eq!(unauthorized.status().as_u16(), 401);
    let listed = client.get(format!("{base}/imports")).bearer_auth("change-me").send().unwrap();
    assert_eq!(listed.status().as_u16(), 200);
}
