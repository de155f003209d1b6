//! Distillation cascade: title filter → content filter → summary → aspect.

mod prompts;
mod stages;

use std::collections::HashSet;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, TitleClassifier};
use crate::model::{sha256_hex, Article, CardId, ConsequenceCard, FunnelCounts, PipelineReport, PromptHashes, Provenance, SourceFunnel, TechDomain};

pub use prompts::{aspect_list_line, default_aspect_template, StagePromptSet, ASPECT_QUESTION, CONTENT_FILTER_TEMPLATE, SUMMARY_TEMPLATE};
pub use stages::{
    build_content_filter_prompt, build_summary_prompt, categorize, filter_content, filter_title, parse_yes_no, summarize, truncate_body,
    validate_summary, Categorization, ContentJudgement, Summary, SummaryRule, ASPECT_MAX_TOKENS, CONTENT_MAX_TOKENS, EMPTY_COMPLETION,
    TITLE_THRESHOLD,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("article has an empty title")]
    EmptyTitle,
    #[error("invalid summary: {0}")]
    InvalidSummary(SummaryRule),
    #[error("could not categorize card (model said {raw:?})")]
    UncategorizableCard { raw: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Article bodies are cut to this many characters before prompting.
    pub truncation_chars: usize,
    /// Articles processed concurrently.
    pub parallelism: usize,
    pub summary_max_tokens: u32,
    pub prompts: StagePromptSet,
    /// Timestamp stamped on emitted cards.
    pub created_at: DateTime<Utc>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            truncation_chars: 12_000,
            parallelism: 4,
            summary_max_tokens: 256,
            prompts: StagePromptSet::default(),
            created_at: DateTime::<Utc>::UNIX_EPOCH,
        }
    }
}

/// Where one article left the cascade.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ArticleOutcome {
    TitleRejected,
    ContentRejected,
    ContentUndetermined,
    ProviderError { stage: String, message: String },
    InvalidSummary { rule: SummaryRule },
    Uncategorizable { raw: String },
    Card { card: Box<ConsequenceCard> },
}

impl ArticleOutcome {
    fn passed_title(&self) -> bool {
        !matches!(self, ArticleOutcome::TitleRejected)
            && !matches!(self, ArticleOutcome::ProviderError { stage, .. } if stage == "title")
    }

    fn passed_content(&self) -> bool {
        matches!(
            self,
            ArticleOutcome::InvalidSummary { .. } | ArticleOutcome::Uncategorizable { .. } | ArticleOutcome::Card { .. }
        ) || matches!(self, ArticleOutcome::ProviderError { stage, .. } if stage == "summary" || stage == "aspect")
    }
}

fn provider_error(stage: &str, e: PipelineError) -> ArticleOutcome {
    ArticleOutcome::ProviderError { stage: stage.into(), message: e.to_string() }
}

/// Run one article through every stage.
pub fn process_article(
    article: &Article,
    domain: &TechDomain,
    classifier: &dyn TitleClassifier,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> ArticleOutcome {
    match filter_title(&article.title, classifier) {
        Ok(d) if d.verdict.is_relevant() => {}
        Ok(_) | Err(PipelineError::EmptyTitle) => return ArticleOutcome::TitleRejected,
        Err(e) => return provider_error("title", e),
    }
    let judgement = match filter_content(article, domain, gateway, config) {
        Ok(j) => j,
        Err(e) => return provider_error("content", e),
    };
    match judgement.decision.verdict {
        crate::model::Verdict::Relevant => {}
        crate::model::Verdict::Irrelevant => return ArticleOutcome::ContentRejected,
        crate::model::Verdict::Undetermined => return ArticleOutcome::ContentUndetermined,
    }
    let summary = match summarize(article, domain, gateway, config) {
        Ok(s) => s,
        Err(PipelineError::InvalidSummary(rule)) => return ArticleOutcome::InvalidSummary { rule },
        Err(e) => return provider_error("summary", e),
    };
    let category = match categorize(&article.title, &summary.text, gateway, config) {
        Ok(c) => c,
        Err(PipelineError::UncategorizableCard { raw }) => return ArticleOutcome::Uncategorizable { raw },
        Err(e) => return provider_error("aspect", e),
    };
    let card = ConsequenceCard {
        id: CardId::for_pair(&article.id, &domain.name),
        article_id: article.id.clone(),
        domain: domain.name.clone(),
        summary: summary.text,
        aspect: category.aspect,
        provenance: Provenance {
            provider: gateway.provider_id().into(),
            model: gateway.model_id().into(),
            title_classifier: classifier.id(),
            prompt_hashes: PromptHashes {
                content: sha256_hex(&judgement.prompt),
                summary: sha256_hex(&summary.prompt),
                aspect: sha256_hex(&category.prompt),
            },
            raw_aspect: category.raw,
        },
        created_at: config.created_at,
    };
    ArticleOutcome::Card { card: Box::new(card) }
}

fn tally(report: &mut PipelineReport, source: &str, outcome: &ArticleOutcome) {
    let row = match report.per_source.iter_mut().position(|r| r.source == source) {
        Some(i) => i,
        None => {
            report.per_source.push(SourceFunnel { source: source.into(), counts: FunnelCounts::default() });
            report.per_source.len() - 1
        }
    };
    let mut delta = FunnelCounts { retrieved: 1, ..Default::default() };
    if outcome.passed_title() {
        delta.after_title_filter = 1;
    }
    if outcome.passed_content() {
        delta.after_content_filter = 1;
    }
    if matches!(outcome, ArticleOutcome::Card { .. }) {
        delta.cards_emitted = 1;
    }
    let counts = &mut report.per_source[row].counts;
    counts.retrieved += delta.retrieved;
    counts.after_title_filter += delta.after_title_filter;
    counts.after_content_filter += delta.after_content_filter;
    counts.cards_emitted += delta.cards_emitted;

    let f = &mut report.failures;
    match outcome {
        ArticleOutcome::ContentUndetermined => f.content_undetermined += 1,
        ArticleOutcome::ProviderError { .. } => f.provider_errors += 1,
        ArticleOutcome::InvalidSummary { .. } => f.invalid_summaries += 1,
        ArticleOutcome::Uncategorizable { .. } => f.uncategorizable += 1,
        _ => {}
    }
    let rows = std::mem::take(&mut report.per_source);
    let failures = std::mem::take(&mut report.failures);
    *report = PipelineReport::from_sources(report.domain.clone(), rows);
    report.failures = failures;
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineRun {
    pub cards: Vec<ConsequenceCard>,
    pub report: PipelineReport,
    /// Per-article outcome, in input order (after deduplication).
    pub outcomes: Vec<(String, ArticleOutcome)>,
}

/// Run the cascade over a batch. Per-article failures are counted in the
/// report and never abort the batch.
///
/// When `progress` is given, it is updated as each article finishes so a
/// caller can observe counters live.
pub fn run_pipeline_with_progress(
    articles: &[Article],
    domain: &TechDomain,
    classifier: &dyn TitleClassifier,
    gateway: &Gateway,
    config: &PipelineConfig,
    progress: Option<&Mutex<PipelineReport>>,
) -> PipelineRun {
    let mut seen = HashSet::new();
    let batch: Vec<&Article> = articles.iter().filter(|a| seen.insert(a.id.clone())).collect();

    let work = || -> Vec<ArticleOutcome> {
        batch
            .par_iter()
            .map(|article| {
                let outcome = process_article(article, domain, classifier, gateway, config);
                if let Some(p) = progress {
                    tally(&mut p.lock().unwrap(), &article.source, &outcome);
                }
                outcome
            })
            .collect()
    };
    let outcomes = match rayon::ThreadPoolBuilder::new().num_threads(config.parallelism.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(e) => {
            tracing::warn!("falling back to the global thread pool: {e}");
            work()
        }
    };

    let mut report = PipelineReport { domain: domain.name.clone(), ..Default::default() };
    let mut cards = Vec::new();
    for (article, outcome) in batch.iter().zip(&outcomes) {
        tally(&mut report, &article.source, outcome);
        if let ArticleOutcome::Card { card } = outcome {
            cards.push((**card).clone());
        }
    }
    cards.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    let outcomes = batch.iter().map(|a| a.id.to_string()).zip(outcomes).collect();
    PipelineRun { cards, report, outcomes }
}

pub fn run_pipeline(
    articles: &[Article],
    domain: &TechDomain,
    classifier: &dyn TitleClassifier,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> (Vec<ConsequenceCard>, PipelineReport) {
    let run = run_pipeline_with_progress(articles, domain, classifier, gateway, config, None);
    (run.cards, run.report)
}

/// Golden-file form: canonical card records, one per line, sorted by id.
pub fn golden_card_lines(cards: &[ConsequenceCard]) -> String {
    let mut sorted: Vec<&ConsequenceCard> = cards.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::new();
    for c in sorted {
        out.push_str(std::str::from_utf8(&crate::model::canonical_card_json(c)).expect("canonical JSON is UTF-8"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FakeClock;
    use crate::gateway::{MockProvider, MockRule, RuleTable, StubTitleClassifier};
    use std::sync::Arc;

    fn rule(m: &[&str], r: &str) -> MockRule {
        MockRule { match_substrings: m.iter().map(|s| s.to_string()).collect(), response_text: r.into() }
    }

    fn article(i: usize, marker: &str, source: &str) -> Article {
        Article::new(format!("https://{source}.example/{i}"), source, format!("title {i}"), format!("body {marker} text"), None, Utc::now())
    }

    fn setup() -> (Vec<Article>, StubTitleClassifier, Gateway) {
        let articles = vec![
            article(1, "good", "a"),
            article(2, "good", "a"),
            article(3, "dull", "b"),
            article(4, "unsure", "b"),
            article(5, "junk", "a"),
            article(6, "good", "b"),
            article(7, "odd", "b"),
        ];
        let stub = StubTitleClassifier::new((1..=7).filter(|i| *i != 6).map(|i| (format!("title {i}"), true)));
        let rules = RuleTable {
            rules: vec![
                rule(&["Answer Yes or No.", "good"], "Yes"),
                rule(&["Answer Yes or No.", "junk"], "Yes"),
                rule(&["Answer Yes or No.", "odd"], "Yes"),
                rule(&["Answer Yes or No.", "dull"], "No"),
                rule(&["Answer Yes or No.", "unsure"], "Perhaps"),
                rule(&["being discussed here is", "good"], "People lose sleep because of endless feeds."),
                rule(&["being discussed here is", "junk"], "nope"),
                rule(&["being discussed here is", "odd"], "It shifts how friends relate to each other online."),
                rule(&["Which aspect", "sleep"], "Health & Well-being"),
                rule(&["Which aspect", "friends"], "Friendship"),
            ],
            fallback: String::new(),
        };
        let gw = Gateway::builder(Arc::new(MockProvider::new(rules, 7)), Arc::new(FakeClock::fixed())).build();
        (articles, stub, gw)
    }

    #[test]
    fn funnel_counts_and_failure_isolation() {
        let (articles, stub, gw) = setup();
        let domain = TechDomain::new("social media", &["social media"]);
        let (cards, report) = run_pipeline(&articles, &domain, &stub, &gw, &PipelineConfig::default());
        assert_eq!(cards.len(), 2);
        assert_eq!((report.retrieved, report.after_title_filter, report.after_content_filter, report.cards_emitted), (7, 6, 4, 2));
        assert_eq!(report.failures.content_undetermined, 1);
        assert_eq!(report.failures.invalid_summaries, 1);
        assert_eq!(report.failures.uncategorizable, 1);
        assert!(report.is_monotone());
        assert_eq!(report.per_source.iter().map(|r| r.source.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(report.per_source[0].counts, FunnelCounts { retrieved: 3, after_title_filter: 3, after_content_filter: 3, cards_emitted: 2 });
        for c in &cards {
            c.validate().unwrap();
        }
        assert!(cards.windows(2).all(|w| w[0].article_id <= w[1].article_id));
    }

    #[test]
    fn duplicate_articles_processed_once_and_parallelism_is_invisible() {
        let (mut articles, stub, gw) = setup();
        articles.push(articles[0].clone());
        let domain = TechDomain::new("social media", &["social media"]);
        let mut cfg = PipelineConfig { parallelism: 1, ..Default::default() };
        let (a, ra) = run_pipeline(&articles, &domain, &stub, &gw, &cfg);
        cfg.parallelism = 4;
        let (b, rb) = run_pipeline(&articles, &domain, &stub, &gw, &cfg);
        assert_eq!(golden_card_lines(&a), golden_card_lines(&b));
        assert_eq!(ra, rb);
        assert_eq!(ra.retrieved, 7);
    }

    #[test]
    fn progress_matches_final_report() {
        let (articles, stub, gw) = setup();
        let domain = TechDomain::new("social media", &["social media"]);
        let live = Mutex::new(PipelineReport { domain: domain.name.clone(), ..Default::default() });
        let run = run_pipeline_with_progress(&articles, &domain, &stub, &gw, &PipelineConfig::default(), Some(&live));
        let live = live.into_inner().unwrap();
        assert_eq!(live.totals(), run.report.totals());
        assert_eq!(live.failures, run.report.failures);
    }
}
