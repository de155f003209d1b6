use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use catalog::api::{self, ApiState};
use catalog::app::{BulkSpec, Engine, Scheduler};
use catalog::clock::{Clock, SystemClock};
use chrono::{DateTime, Utc};
use catalog::config::AppConfig;
use catalog::eval::{cohen_kappa, compute_metrics, raw_agreement, read_annotation_csv, read_labeled_csv, render_funnel_table, split_train_test};
use catalog::gateway::train_title_baseline;
use catalog::ingest::{parse_url_csv, Fetcher, HttpFetcher, StaticFetcher};
use catalog::model::{domain_key, Article, TechDomain};
use catalog::pipeline::{golden_card_lines, run_pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "catalog", version, about = "Catalog of undesirable consequences of digital technologies")]
struct Cli {
    /// TOML config file; CATALOG_* environment variables override it.
    #[arg(long, short, global = true, env = "CATALOG_CONFIG")]
    config: Option<PathBuf>,
    /// Serve pages from a `{"pages":[{url,file}]}` manifest instead of the
    /// network. Source rate limits are not enforced in this mode.
    #[arg(long, global = true)]
    offline: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service and the update scheduler.
    Serve {
        #[arg(long)]
        no_scheduler: bool,
    },
    /// Run the pipeline over a URL list without touching the catalog.
    Run {
        /// CSV with `url[,domain]` rows.
        #[arg(long)]
        urls: PathBuf,
        #[arg(long)]
        domain: Option<String>,
        /// Write cards as canonical JSON lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ingest URLs or keyword searches into the catalog and wait for the job.
    BulkImport(BulkArgs),
    /// Run the periodic update once, now.
    Update,
    /// Show recorded runs as funnel tables.
    Runs,
    /// Write the catalog to `cards.jsonl` and `catalog.json` in a directory.
    Export { dir: PathBuf },
    /// Load an exported catalog into the store.
    Import { dir: PathBuf },
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Args)]
struct BulkArgs {
    #[arg(long, conflicts_with = "keywords")]
    urls: Option<PathBuf>,
    /// Comma-separated search keywords.
    #[arg(long, value_delimiter = ',')]
    keywords: Vec<String>,
    #[arg(long)]
    domain: Option<String>,
    /// Restrict keyword search to these sources.
    #[arg(long, value_delimiter = ',')]
    sources: Vec<String>,
    #[arg(long, default_value_t = 20)]
    limit: usize,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Accuracy, precision, recall, F1 and kappa from a `prediction,label` CSV.
    Metrics { file: PathBuf },
    /// Agreement between two annotators from a `text,label_a,label_b` CSV.
    Kappa { file: PathBuf },
    /// Stratified split of a `text,label` CSV.
    Split {
        file: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Train the bag-of-words title classifier on a `text,label` CSV.
    TrainTitle {
        file: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Held-out `text,label` CSV to report metrics on.
        #[arg(long)]
        test: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Wall-clock time without waiting, for runs that never hit the network.
struct NoWaitClock;

impl Clock for NoWaitClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep(&self, _: Duration) {}
}

fn engine(cli: &Cli) -> Result<Engine> {
    let config = AppConfig::load(cli.config.as_deref())?;
    let (fetcher, clock): (Arc<dyn Fetcher>, Arc<dyn Clock>) = match &cli.offline {
        Some(m) => (Arc::new(StaticFetcher::from_manifest(m)?), Arc::new(NoWaitClock)),
        None => (Arc::new(HttpFetcher::new(Duration::from_secs(config.provider.timeout_secs))?), Arc::new(SystemClock)),
    };
    Ok(Engine::from_config(&config, fetcher, clock)?)
}

fn serve(cli: &Cli, no_scheduler: bool) -> Result<()> {
    let config = AppConfig::load(cli.config.as_deref())?;
    let engine = Arc::new(engine(cli)?);
    let addr: SocketAddr = format!("{}:{}", config.server.bind, config.server.port).parse().context("server.bind/port")?;
    let scheduler = (config.updates.enabled && !no_scheduler).then(|| {
        let s = Arc::new(Scheduler::for_engine(&engine, config.updates.cadence_days));
        tracing::info!(next_due = %s.next_due(), "update scheduler armed");
        (s, Duration::from_secs(config.updates.check_interval_secs.max(1)))
    });
    let mut state = ApiState::new(engine, config.server.admin_token.clone());
    state.import_budget = Duration::from_secs(config.server.import_budget_secs);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(api::serve(state, addr, scheduler))?;
    Ok(())
}

fn run(cli: &Cli, urls: &Path, default_domain: Option<&str>, out: Option<&Path>) -> Result<()> {
    let engine = engine(cli)?;
    let rows = parse_url_csv(&read(urls)?)?;
    let mut groups: BTreeMap<String, (TechDomain, Vec<Article>)> = BTreeMap::new();
    for row in rows {
        let Some(domain) = row.domain.as_deref().filter(|d| !d.trim().is_empty()).or(default_domain) else {
            bail!("{}: no domain (pass --domain)", row.url);
        };
        match engine.fetch_article(&row.url) {
            Ok(a) => {
                let d = engine.store.domain(domain).unwrap_or_else(|| TechDomain::new(domain.trim(), &[domain.trim()]));
                groups.entry(domain_key(domain)).or_insert_with(|| (d, Vec::new())).1.push(a);
            }
            Err(e) => eprintln!("skipping {}: {e}", row.url),
        }
    }
    let config = PipelineConfig { created_at: engine.now(), ..engine.pipeline.clone() };
    let mut cards = Vec::new();
    for (domain, articles) in groups.values() {
        let (c, report) = run_pipeline(articles, domain, engine.classifier.as_ref(), &engine.gateway, &config);
        eprintln!("{}\n{}", domain.name, render_funnel_table(&report));
        cards.extend(c);
    }
    let lines = golden_card_lines(&cards);
    match out {
        Some(path) => std::fs::write(path, lines).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{lines}"),
    }
    Ok(())
}

fn bulk(cli: &Cli, args: &BulkArgs) -> Result<()> {
    let spec = match &args.urls {
        Some(path) => BulkSpec::Urls { rows: parse_url_csv(&read(path)?)?, default_domain: args.domain.clone() },
        None => BulkSpec::Keywords {
            domain: args.domain.clone().context("--domain is required with --keywords")?,
            keywords: args.keywords.clone(),
            sources: args.sources.clone(),
            limit: args.limit,
        },
    };
    let engine = Arc::new(engine(cli)?);
    let id = engine.start_bulk(spec)?;
    let status = engine.wait_for_job(&id)?;
    eprint!("{}", render_funnel_table(&status.report));
    println!("{}", serde_json::to_string_pretty(&status)?);
    Ok(())
}

fn eval(cmd: &EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Metrics { file } => {
            let text = read(file)?;
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            #[derive(Deserialize)]
            struct Row {
                prediction: String,
                label: String,
            }
            let (mut preds, mut labels) = (Vec::new(), Vec::new());
            for row in rdr.deserialize::<Row>() {
                let row = row?;
                let parse = |s: &str| catalog::eval::parse_label(s).with_context(|| format!("bad label {s:?}"));
                preds.push(parse(&row.prediction)?);
                labels.push(parse(&row.label)?);
            }
            println!("{}", serde_json::to_string_pretty(&compute_metrics(&preds, &labels)?)?);
        }
        EvalCommand::Kappa { file } => {
            let rows = read_annotation_csv(&read(file)?)?;
            let a: Vec<&str> = rows.iter().map(|r| r.1.as_str()).collect();
            let b: Vec<&str> = rows.iter().map(|r| r.2.as_str()).collect();
            let out = serde_json::json!({ "items": rows.len(), "agreement": raw_agreement(&a, &b)?, "kappa": cohen_kappa(&a, &b)? });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        EvalCommand::Split { file, ratio, seed, train, test } => {
            let rows = read_labeled_csv(&read(file)?)?;
            let (tr, te) = split_train_test(&rows, *ratio, *seed)?;
            for (path, part) in [(train, &tr), (test, &te)] {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["text", "label"])?;
                for (text, label) in part {
                    w.write_record([text.as_str(), if *label { "1" } else { "0" }])?;
                }
                w.flush()?;
            }
            println!("train {} / test {}", tr.len(), te.len());
        }
        EvalCommand::TrainTitle { file, seed, out, test } => {
            let rows = read_labeled_csv(&read(file)?)?;
            let model = train_title_baseline(&rows, *seed)?;
            std::fs::write(out, serde_json::to_string_pretty(&model)?)?;
            if let Some(test) = test {
                let rows = read_labeled_csv(&read(test)?)?;
                let preds: Vec<bool> = rows.iter().map(|(t, _)| catalog::gateway::predict_title(&model, t) >= 0.5).collect();
                let labels: Vec<bool> = rows.iter().map(|(_, l)| *l).collect();
                println!("{}", serde_json::to_string_pretty(&compute_metrics(&preds, &labels)?)?);
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Serve { no_scheduler } => serve(&cli, *no_scheduler),
        Command::Run { urls, domain, out } => run(&cli, urls, domain.as_deref(), out.as_deref()),
        Command::BulkImport(args) => bulk(&cli, args),
        Command::Update => {
            let run = engine(&cli)?.run_weekly_update()?;
            eprint!("{}", render_funnel_table(&run.report));
            println!("{}", serde_json::to_string_pretty(&run)?);
            Ok(())
        }
        Command::Runs => {
            for r in engine(&cli)?.store.runs()? {
                println!("run {} ({}) {} .. {}", r.id, r.kind, r.started_at, r.finished_at);
                print!("{}", render_funnel_table(&r.report));
                for e in &r.errors {
                    println!("  error: {e}");
                }
            }
            Ok(())
        }
        Command::Export { dir } => {
            let s = engine(&cli)?.export(dir)?;
            println!("{}", serde_json::to_string(&s)?);
            Ok(())
        }
        Command::Import { dir } => {
            let e = engine(&cli)?;
            let s = e.store.import_catalog(dir, &e.gateway)?;
            println!("{}", serde_json::to_string(&s)?);
            Ok(())
        }
        Command::Eval(cmd) => eval(cmd),
    }
}
