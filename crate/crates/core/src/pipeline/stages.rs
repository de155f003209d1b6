use serde::{Deserialize, Serialize};

use super::{PipelineConfig, PipelineError};
use crate::gateway::{CompletionRequest, Gateway, TitleClassifier};
use crate::model::{parse_aspect, Article, Aspect, FilterDecision, ModelError, Stage, TechDomain, Verdict, SUMMARY_MAX_CHARS, SUMMARY_MIN_CHARS};
use crate::text::{max_consecutive_repeat, plain_tokens};

pub const TITLE_THRESHOLD: f64 = 0.5;
pub const CONTENT_MAX_TOKENS: u32 = 3;
pub const ASPECT_MAX_TOKENS: u32 = 8;
pub const MAX_TOKEN_REPEAT: usize = 8;
/// Stored as the raw output when the model returns nothing at all.
pub const EMPTY_COMPLETION: &str = "<empty>";

pub fn filter_title(title: &str, classifier: &dyn TitleClassifier) -> Result<FilterDecision, PipelineError> {
    if title.trim().is_empty() {
        return Err(PipelineError::EmptyTitle);
    }
    let score = classifier.score(title)?.clamp(0.0, 1.0);
    Ok(FilterDecision {
        stage: Stage::Title,
        verdict: Verdict::from(score >= TITLE_THRESHOLD),
        score: Some(score),
        raw: format!("{score}"),
    })
}

/// Head of `body` of at most `budget` characters, cut at a word boundary.
pub fn truncate_body(body: &str, budget: usize) -> &str {
    let body = body.trim();
    let Some((cut, _)) = body.char_indices().nth(budget) else {
        return body;
    };
    let head = &body[..cut];
    if body[cut..].starts_with(char::is_whitespace) {
        return head.trim_end();
    }
    match head.rfind(char::is_whitespace) {
        Some(ws) => head[..ws].trim_end(),
        None => head,
    }
}

fn with_body(article: &Article, cue: &str, budget: usize) -> String {
    format!("{}\n\n{cue}", truncate_body(&article.body, budget))
}

pub fn build_content_filter_prompt(article: &Article, domain: &TechDomain, config: &PipelineConfig) -> String {
    with_body(article, &config.prompts.content_question(&domain.name), config.truncation_chars)
}

pub fn build_summary_prompt(article: &Article, domain: &TechDomain, config: &PipelineConfig) -> String {
    with_body(article, &config.prompts.summary_cue(&domain.name), config.truncation_chars)
}

/// Interpret a yes/no completion by its first word.
pub fn parse_yes_no(text: &str) -> Verdict {
    let first = text
        .split_whitespace()
        .next()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .unwrap_or_default();
    match first.as_str() {
        "yes" => Verdict::Relevant,
        "no" => Verdict::Irrelevant,
        _ => Verdict::Undetermined,
    }
}

/// Decision plus the exact prompt sent, for provenance.
#[derive(Debug, Clone)]
pub struct ContentJudgement {
    pub decision: FilterDecision,
    pub prompt: String,
}

pub fn filter_content(
    article: &Article,
    domain: &TechDomain,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<ContentJudgement, PipelineError> {
    let prompt = build_content_filter_prompt(article, domain, config);
    let response = gateway.complete(&CompletionRequest::new(prompt.clone(), CONTENT_MAX_TOKENS, "content"))?;
    let raw = if response.text.is_empty() { EMPTY_COMPLETION.to_string() } else { response.text };
    Ok(ContentJudgement {
        decision: FilterDecision { stage: Stage::Content, verdict: parse_yes_no(&raw), score: None, raw },
        prompt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryRule {
    TooShort,
    TooLong,
    Degeneration,
    NoSentence,
}

impl std::fmt::Display for SummaryRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SummaryRule::TooShort => "too short",
            SummaryRule::TooLong => "too long",
            SummaryRule::Degeneration => "degeneration",
            SummaryRule::NoSentence => "no sentence terminator",
        })
    }
}

pub fn validate_summary(summary: &str) -> Result<(), SummaryRule> {
    let len = summary.chars().count();
    if len < SUMMARY_MIN_CHARS {
        return Err(SummaryRule::TooShort);
    }
    if len > SUMMARY_MAX_CHARS {
        return Err(SummaryRule::TooLong);
    }
    if max_consecutive_repeat(&plain_tokens(summary)) > MAX_TOKEN_REPEAT {
        return Err(SummaryRule::Degeneration);
    }
    if !summary.contains(['.', '!', '?']) {
        return Err(SummaryRule::NoSentence);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub text: String,
    pub prompt: String,
}

pub fn summarize(article: &Article, domain: &TechDomain, gateway: &Gateway, config: &PipelineConfig) -> Result<Summary, PipelineError> {
    let prompt = build_summary_prompt(article, domain, config);
    let response = gateway.complete(&CompletionRequest::new(prompt.clone(), config.summary_max_tokens, "summary"))?;
    let text = response.text.trim().to_string();
    validate_summary(&text).map_err(PipelineError::InvalidSummary)?;
    Ok(Summary { text, prompt })
}

fn parse_aspect_output(raw: &str) -> Result<Aspect, ModelError> {
    let line = raw.trim().lines().next().unwrap_or("");
    parse_aspect(line.trim().trim_end_matches(['.', ',', ';']))
}

#[derive(Debug, Clone)]
pub struct Categorization {
    pub aspect: Aspect,
    pub raw: String,
    pub prompt: String,
}

/// Ask for the aspect; one retry when the answer is not in the taxonomy.
pub fn categorize(title: &str, summary: &str, gateway: &Gateway, config: &PipelineConfig) -> Result<Categorization, PipelineError> {
    let prompt = config.prompts.aspect_prompt(title, summary);
    let request = CompletionRequest::new(prompt.clone(), ASPECT_MAX_TOKENS, "aspect");
    let mut raw = String::new();
    for _ in 0..2 {
        raw = gateway.complete(&request)?.text;
        if let Ok(aspect) = parse_aspect_output(&raw) {
            return Ok(Categorization { aspect, raw, prompt });
        }
    }
    Err(PipelineError::UncategorizableCard { raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FakeClock;
    use crate::gateway::{MockProvider, MockRule, RuleTable, StubTitleClassifier};
    use chrono::Utc;
    use std::sync::Arc;

    fn gateway(rules: &[(&[&str], &str)]) -> Gateway {
        let table = RuleTable {
            rules: rules
                .iter()
                .map(|(m, r)| MockRule { match_substrings: m.iter().map(|s| s.to_string()).collect(), response_text: r.to_string() })
                .collect(),
            fallback: String::new(),
        };
        Gateway::builder(Arc::new(MockProvider::new(table, 7)), Arc::new(FakeClock::fixed())).build()
    }

    fn article(body: &str) -> Article {
        Article::new("https://a.com/x", "A", "Title", body, None, Utc::now())
    }

    fn config() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn title_filter_uses_threshold() {
        let stub = StubTitleClassifier::new([
            ("Social media is polluting society. Moderation alone won't fix the problem".to_string(), true),
            ("Improbable teams with Google, opens SpatialOS alpha for virtual world development".to_string(), false),
        ]);
        let d = filter_title("Social media is polluting society. Moderation alone won't fix the problem", &stub).unwrap();
        assert_eq!((d.stage, d.verdict, d.score), (Stage::Title, Verdict::Relevant, Some(1.0)));
        let d = filter_title("Improbable teams with Google, opens SpatialOS alpha for virtual world development", &stub).unwrap();
        assert_eq!(d.verdict, Verdict::Irrelevant);
        assert!(matches!(filter_title("  ", &stub), Err(PipelineError::EmptyTitle)));
    }

    #[test]
    fn content_prompt_layout() {
        let a = article("I also got a more in-depth look at simulator sickness.");
        let p = build_content_filter_prompt(&a, &TechDomain::new("virtual reality", &["vr"]), &config());
        assert_eq!(
            p,
            "I also got a more in-depth look at simulator sickness.\n\nDoes the article above discuss unintended or \
undesirable consequences on society of virtual reality? Answer Yes or No."
        );
    }

    #[test]
    fn truncation_cuts_at_word_boundary() {
        let word = "abcdefghi"; // 9 chars + space = 10 per word
        let body = vec![word; 2000].join(" "); // 19,999 chars
        let cut = truncate_body(&body, 12_000);
        assert!(cut.chars().count() <= 12_000);
        assert!(cut.ends_with(word));
        assert_eq!(cut.chars().count(), 11_999);
        let short = "x".repeat(100);
        assert_eq!(truncate_body(&short, 12_000), short);
        assert_eq!(truncate_body("abcdef", 3), "abc");
        assert_eq!(truncate_body("ab cd ef", 5), "ab cd");
        assert_eq!(truncate_body("ab cd ef", 4), "ab");
    }

    #[test]
    fn yes_no_parsing() {
        assert_eq!(parse_yes_no("Yes"), Verdict::Relevant);
        assert_eq!(parse_yes_no(" yes, it does"), Verdict::Relevant);
        assert_eq!(parse_yes_no("no."), Verdict::Irrelevant);
        assert_eq!(parse_yes_no("NO"), Verdict::Irrelevant);
        assert_eq!(parse_yes_no("Maybe"), Verdict::Undetermined);
        assert_eq!(parse_yes_no(""), Verdict::Undetermined);
        assert_eq!(parse_yes_no("Yesterday"), Verdict::Undetermined);
    }

    #[test]
    fn content_filter_records_raw_output() {
        let gw = gateway(&[(&["simulator sickness", "Answer Yes or No."], "Yes"), (&["dull"], "no."), (&["hmm"], "Maybe")]);
        let vr = TechDomain::new("virtual reality", &["vr"]);
        let d = filter_content(&article("a look at simulator sickness"), &vr, &gw, &config()).unwrap().decision;
        assert_eq!((d.verdict, d.raw.as_str()), (Verdict::Relevant, "Yes"));
        let d = filter_content(&article("dull"), &vr, &gw, &config()).unwrap().decision;
        assert_eq!(d.verdict, Verdict::Irrelevant);
        let d = filter_content(&article("hmm"), &vr, &gw, &config()).unwrap().decision;
        assert_eq!(d.verdict, Verdict::Undetermined);
        let d = filter_content(&article("nothing matches"), &vr, &gw, &config()).unwrap().decision;
        assert_eq!((d.verdict, d.raw.as_str()), (Verdict::Undetermined, EMPTY_COMPLETION));
        d.validate().unwrap();
        assert_eq!(gw.usage().by_tag["content"].calls, 4);
    }

    #[test]
    fn summary_validation_rules() {
        let colorism = include_str!("../../tests/fixtures/screening/colorism_summary.txt").trim();
        assert_eq!(validate_summary(colorism), Ok(()));
        assert_eq!(validate_summary(&"bad. bad. bad. ".repeat(20)), Err(SummaryRule::Degeneration));
        assert_eq!(validate_summary("too short."), Err(SummaryRule::TooShort));
        assert_eq!(validate_summary(&"word ".repeat(400)), Err(SummaryRule::TooLong));
        assert_eq!(validate_summary("People are losing their jobs to synthetic voices"), Err(SummaryRule::NoSentence));
    }

    #[test]
    fn summarize_accepts_valid_and_rejects_degenerate() {
        let colorism = include_str!("../../tests/fixtures/screening/colorism_summary.txt").trim();
        let gw = gateway(&[(&["beauty filters", "being discussed here is"], colorism), (&["loop", "being discussed here is"], "bad. bad. bad. bad. bad. bad. bad. bad. bad. bad. bad.")]);
        let sm = TechDomain::new("social media", &["social media"]);
        let s = summarize(&article("beauty filters lighten skin"), &sm, &gw, &config()).unwrap();
        assert_eq!(s.text, colorism);
        assert!(s.prompt.ends_with("the main undesirable consequence of social media being discussed here is"));
        assert!(matches!(
            summarize(&article("loop"), &sm, &gw, &config()),
            Err(PipelineError::InvalidSummary(SummaryRule::Degeneration))
        ));
        assert!(matches!(
            summarize(&article("other"), &sm, &gw, &config()),
            Err(PipelineError::InvalidSummary(SummaryRule::TooShort))
        ));
    }

    #[test]
    fn categorize_parses_and_retries_once() {
        let gw = gateway(&[
            (&["Which aspect of life", "losing their jobs"], "Economy"),
            (&["Which aspect of life", "recordings"], " security & privacy\n"),
            (&["Which aspect of life", "vibes"], "Culture"),
        ]);
        let c = categorize(
            "Synthetic voices now read audiobooks for a fraction of the cost",
            "People are losing their jobs. The technology is becoming so realistic that many people can't tell the difference.",
            &gw,
            &config(),
        )
        .unwrap();
        assert_eq!(c.aspect, Aspect::Economy);
        let c = categorize("t", "Smart speakers keep recordings of private conversations.", &gw, &config()).unwrap();
        assert_eq!(c.aspect, Aspect::SecurityPrivacy);
        let before = gw.usage().by_tag["aspect"].calls;
        let err = categorize("t", "It changes the vibes of online spaces.", &gw, &config()).unwrap_err();
        assert!(matches!(err, PipelineError::UncategorizableCard { ref raw } if raw == "Culture"));
        assert_eq!(gw.usage().by_tag["aspect"].calls - before, 2);
    }
}
