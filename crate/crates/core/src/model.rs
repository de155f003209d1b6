//! Domain types shared by every stage of the catalog: the aspect taxonomy,
//! technology domains, articles, stage verdicts, consequence cards and the
//! funnel report.
//!
//! All types are plain immutable values; they are `Send + Sync` and round-trip
//! through serde unchanged.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Minimum accepted summary length, in characters.
pub const SUMMARY_MIN_CHARS: usize = 30;
/// Maximum accepted summary length, in characters.
pub const SUMMARY_MAX_CHARS: usize = 1500;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown aspect: {0:?}")]
    UnknownAspect(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid card: {0}")]
    InvalidCard(String),
    #[error("invalid filter decision: {0}")]
    InvalidDecision(String),
}

/// The ten aspects of life a consequence can affect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Aspect {
    #[serde(rename = "Economy")]
    Economy,
    #[serde(rename = "Environment & Sustainability")]
    EnvironmentSustainability,
    #[serde(rename = "Equality & Justice")]
    EqualityJustice,
    #[serde(rename = "Information & Discourse")]
    InformationDiscourse,
    #[serde(rename = "Health & Well-being")]
    HealthWellbeing,
    #[serde(rename = "Politics")]
    Politics,
    #[serde(rename = "Power")]
    Power,
    #[serde(rename = "Security & Privacy")]
    SecurityPrivacy,
    #[serde(rename = "User Experience & Entertainment")]
    UserExperienceEntertainment,
    #[serde(rename = "Social Norms & Relationships")]
    SocialNormsRelationships,
}

impl Aspect {
    /// Taxonomy in its canonical listing order.
    pub const ALL: [Aspect; 10] = [
        Aspect::Economy,
        Aspect::EnvironmentSustainability,
        Aspect::EqualityJustice,
        Aspect::InformationDiscourse,
        Aspect::HealthWellbeing,
        Aspect::Politics,
        Aspect::Power,
        Aspect::SecurityPrivacy,
        Aspect::UserExperienceEntertainment,
        Aspect::SocialNormsRelationships,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aspect::Economy => "Economy",
            Aspect::EnvironmentSustainability => "Environment & Sustainability",
            Aspect::EqualityJustice => "Equality & Justice",
            Aspect::InformationDiscourse => "Information & Discourse",
            Aspect::HealthWellbeing => "Health & Well-being",
            Aspect::Politics => "Politics",
            Aspect::Power => "Power",
            Aspect::SecurityPrivacy => "Security & Privacy",
            Aspect::UserExperienceEntertainment => "User Experience & Entertainment",
            Aspect::SocialNormsRelationships => "Social Norms & Relationships",
        }
    }

    /// Position in [`Aspect::ALL`].
    pub fn index(self) -> usize {
        Aspect::ALL.iter().position(|a| *a == self).expect("aspect in taxonomy")
    }

    /// Header color used by clients when rendering a card of this aspect.
    pub fn color(self) -> &'static str {
        match self {
            Aspect::Economy => "#E6A23C",
            Aspect::EnvironmentSustainability => "#2E9E5B",
            Aspect::EqualityJustice => "#8E44AD",
            Aspect::InformationDiscourse => "#2D7DD2",
            Aspect::HealthWellbeing => "#E0457B",
            Aspect::Politics => "#C0392B",
            Aspect::Power => "#34495E",
            Aspect::SecurityPrivacy => "#16A085",
            Aspect::UserExperienceEntertainment => "#F39C12",
            Aspect::SocialNormsRelationships => "#7F8C8D",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aspect {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_aspect(s)
    }
}

/// Lowercase, treat "&" as the word "and", collapse whitespace.
fn normalize_label(text: &str) -> String {
    text.replace('&', " and ")
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Map a raw label (as emitted by a model or typed by a user) onto the
/// taxonomy. Matching ignores case, surrounding and repeated whitespace, and
/// treats `&` and `and` as the same word.
pub fn parse_aspect(text: &str) -> Result<Aspect, ModelError> {
    let wanted = normalize_label(text);
    Aspect::ALL
        .into_iter()
        .find(|a| normalize_label(a.name()) == wanted)
        .ok_or_else(|| ModelError::UnknownAspect(text.to_string()))
}

/// A technology area and the search phrases used to retrieve articles on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechDomain {
    pub name: String,
    pub keywords: Vec<String>,
    #[serde(default)]
    pub approved: bool,
}

impl TechDomain {
    pub fn new(name: impl Into<String>, keywords: &[&str]) -> Self {
        TechDomain {
            name: name.into(),
            keywords: keywords.iter().map(|k| k.to_string()).collect(),
            approved: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.name.trim().is_empty() {
            return Err(ModelError::InvalidDomain("empty name".into()));
        }
        if self.keywords.is_empty() {
            return Err(ModelError::InvalidDomain(format!("{}: no keywords", self.name)));
        }
        if self.keywords.iter().any(|k| k.trim().is_empty()) {
            return Err(ModelError::InvalidDomain(format!("{}: blank keyword", self.name)));
        }
        Ok(())
    }

    /// Key under which domain names are compared for uniqueness.
    pub fn key(&self) -> String {
        domain_key(&self.name)
    }
}

pub fn domain_key(name: &str) -> String {
    name.trim().to_lowercase()
}

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

string_id!(ArticleId);
string_id!(CardId);

fn short_digest(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(p.as_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Lowercase hex SHA-256 of `text`.
pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ArticleId {
    /// Article ids are derived from the canonical URL, so the same page always
    /// maps to the same id.
    pub fn for_url(canonical_url: &str) -> Self {
        ArticleId(format!("art-{}", short_digest(&[canonical_url])))
    }
}

impl CardId {
    pub fn for_pair(article: &ArticleId, domain: &str) -> Self {
        CardId(format!("card-{}", short_digest(&[article.as_str(), &domain_key(domain)])))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: ArticleId,
    pub canonical_url: String,
    pub source: String,
    pub title: String,
    pub body: String,
    pub published_at: Option<NaiveDate>,
    pub fetched_at: DateTime<Utc>,
    pub word_count: usize,
}

impl Article {
    pub fn new(
        canonical_url: impl Into<String>,
        source: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
        published_at: Option<NaiveDate>,
        fetched_at: DateTime<Utc>,
    ) -> Self {
        let canonical_url = canonical_url.into();
        let body = body.into();
        Article {
            id: ArticleId::for_url(&canonical_url),
            word_count: count_words(&body),
            canonical_url,
            source: source.into(),
            title: title.into(),
            body,
            published_at,
            fetched_at,
        }
    }
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Title,
    Content,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Relevant,
    Irrelevant,
    Undetermined,
}

impl Verdict {
    pub fn is_relevant(self) -> bool {
        self == Verdict::Relevant
    }
}

impl From<bool> for Verdict {
    fn from(relevant: bool) -> Self {
        if relevant {
            Verdict::Relevant
        } else {
            Verdict::Irrelevant
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub stage: Stage,
    pub verdict: Verdict,
    pub score: Option<f64>,
    pub raw: String,
}

impl FilterDecision {
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(ModelError::InvalidDecision(format!("score {s} outside [0,1]")));
            }
        }
        if self.stage == Stage::Content && self.raw.is_empty() {
            return Err(ModelError::InvalidDecision("content decision without raw output".into()));
        }
        Ok(())
    }
}

/// Prompt digests for each model-backed stage, plus the raw categorizer output.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptHashes {
    pub content: String,
    pub summary: String,
    pub aspect: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub provider: String,
    pub model: String,
    pub title_classifier: String,
    pub prompt_hashes: PromptHashes,
    /// Categorizer output before normalization, kept for audit.
    pub raw_aspect: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsequenceCard {
    pub id: CardId,
    pub article_id: ArticleId,
    pub domain: String,
    pub summary: String,
    pub aspect: Aspect,
    pub provenance: Provenance,
    pub created_at: DateTime<Utc>,
}

impl ConsequenceCard {
    pub fn validate(&self) -> Result<(), ModelError> {
        let len = self.summary.chars().count();
        if !(SUMMARY_MIN_CHARS..=SUMMARY_MAX_CHARS).contains(&len) {
            return Err(ModelError::InvalidCard(format!(
                "summary length {len} outside [{SUMMARY_MIN_CHARS}, {SUMMARY_MAX_CHARS}]"
            )));
        }
        if self.domain.trim().is_empty() {
            return Err(ModelError::InvalidCard("empty domain".into()));
        }
        if self.id != CardId::for_pair(&self.article_id, &self.domain) {
            return Err(ModelError::InvalidCard(format!("id {} does not match (article, domain)", self.id)));
        }
        Ok(())
    }
}

/// Funnel counters for one slice of a run (a single source, or the total).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub retrieved: u64,
    pub after_title_filter: u64,
    pub after_content_filter: u64,
    pub cards_emitted: u64,
}

impl FunnelCounts {
    pub fn is_monotone(&self) -> bool {
        self.retrieved >= self.after_title_filter
            && self.after_title_filter >= self.after_content_filter
            && self.after_content_filter >= self.cards_emitted
    }

    fn add(&mut self, other: &FunnelCounts) {
        self.retrieved += other.retrieved;
        self.after_title_filter += other.after_title_filter;
        self.after_content_filter += other.after_content_filter;
        self.cards_emitted += other.cards_emitted;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFunnel {
    pub source: String,
    #[serde(flatten)]
    pub counts: FunnelCounts,
}

/// Articles that left the funnel for reasons other than a negative verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailures {
    pub content_undetermined: u64,
    pub provider_errors: u64,
    pub invalid_summaries: u64,
    pub uncategorizable: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub domain: String,
    pub retrieved: u64,
    pub after_title_filter: u64,
    pub after_content_filter: u64,
    pub cards_emitted: u64,
    pub pct_title: u64,
    pub pct_content: u64,
    pub per_source: Vec<SourceFunnel>,
    #[serde(default)]
    pub failures: StageFailures,
}

/// Integer percentage of `part / whole`, rounded half up; 0 when `whole` is 0.
pub fn percent(part: u64, whole: u64) -> u64 {
    if whole == 0 {
        return 0;
    }
    (200 * part + whole) / (2 * whole)
}

impl PipelineReport {
    /// Build a report whose totals are given explicitly (e.g. transcribed
    /// from a published table, where rows need not sum to the total).
    pub fn with_totals(domain: impl Into<String>, totals: FunnelCounts, per_source: Vec<SourceFunnel>) -> Self {
        let mut report = PipelineReport {
            domain: domain.into(),
            per_source,
            ..Default::default()
        };
        report.set_totals(&totals);
        report
    }

    /// Build a report whose totals are the sum of its per-source rows.
    pub fn from_sources(domain: impl Into<String>, per_source: Vec<SourceFunnel>) -> Self {
        let mut totals = FunnelCounts::default();
        for row in &per_source {
            totals.add(&row.counts);
        }
        PipelineReport::with_totals(domain, totals, per_source)
    }

    fn set_totals(&mut self, totals: &FunnelCounts) {
        self.retrieved = totals.retrieved;
        self.after_title_filter = totals.after_title_filter;
        self.after_content_filter = totals.after_content_filter;
        self.cards_emitted = totals.cards_emitted;
        self.pct_title = percent(totals.after_title_filter, totals.retrieved);
        self.pct_content = percent(totals.after_content_filter, totals.retrieved);
    }

    pub fn totals(&self) -> FunnelCounts {
        FunnelCounts {
            retrieved: self.retrieved,
            after_title_filter: self.after_title_filter,
            after_content_filter: self.after_content_filter,
            cards_emitted: self.cards_emitted,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.totals().is_monotone() && self.per_source.iter().all(|r| r.counts.is_monotone())
    }

    /// Fold another report into this one, merging rows by source name.
    pub fn merge(&mut self, other: &PipelineReport) {
        let mut totals = self.totals();
        totals.add(&other.totals());
        for row in &other.per_source {
            match self.per_source.iter_mut().find(|r| r.source == row.source) {
                Some(existing) => existing.counts.add(&row.counts),
                None => self.per_source.push(row.clone()),
            }
        }
        self.failures.content_undetermined += other.failures.content_undetermined;
        self.failures.provider_errors += other.failures.provider_errors;
        self.failures.invalid_summaries += other.failures.invalid_summaries;
        self.failures.uncategorizable += other.failures.uncategorizable;
        self.set_totals(&totals);
    }
}

/// Deterministic JSON: object keys sorted, UTF-8, no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("domain types serialize to JSON");
    serde_json::to_vec(&sort_keys(value)).expect("JSON values serialize")
}

fn sort_keys(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn canonical_card_json(card: &ConsequenceCard) -> Vec<u8> {
    canonical_json(card)
}
