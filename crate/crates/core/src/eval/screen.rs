//! Heuristic screening of generated summaries. Flags are a triage aid for
//! human review; they do not grade a summary.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::{Article, Verdict};
use crate::text::{content_words, max_consecutive_repeat, plain_tokens, words};

/// Below this share of summary content words found in the article, the
/// summary may state facts the article does not.
pub const SUPPORT_THRESHOLD: f64 = 0.3;
pub const MAX_REPEAT: usize = 8;
pub const MIN_DISTINCT_RATIO: f64 = 0.3;
pub const MIN_STANDALONE_CHARS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryFlag {
    HallucinationRisk,
    NoConsequence,
    Degeneration,
    Decontextualized,
}

/// Content words that plausibly name things: at least four letters and not
/// an -ly adverb.
fn noun_like(word: &str) -> bool {
    word.chars().count() >= 4 && !word.ends_with("ly") && word.chars().any(char::is_alphabetic)
}

/// Screen `summary` against its source article.
///
/// `content_verdict` is the content filter's verdict for the article; an
/// irrelevant verdict raises [`SummaryFlag::NoConsequence`].
pub fn screen_summary(summary: &str, article: &Article, content_verdict: Option<Verdict>) -> Vec<SummaryFlag> {
    let mut flags = Vec::new();
    let source_words: HashSet<String> = words(&article.title).into_iter().chain(words(&article.body)).collect();
    let summary_content: HashSet<String> = content_words(summary).into_iter().collect();

    if !summary_content.is_empty() {
        let supported = summary_content.iter().filter(|w| source_words.contains(*w)).count();
        if (supported as f64) / (summary_content.len() as f64) < SUPPORT_THRESHOLD {
            flags.push(SummaryFlag::HallucinationRisk);
        }
    }

    if content_verdict == Some(Verdict::Irrelevant) {
        flags.push(SummaryFlag::NoConsequence);
    }

    let tokens = plain_tokens(summary);
    if !tokens.is_empty() {
        let distinct = tokens.iter().collect::<HashSet<_>>().len() as f64 / tokens.len() as f64;
        if max_consecutive_repeat(&tokens) > MAX_REPEAT || distinct < MIN_DISTINCT_RATIO {
            flags.push(SummaryFlag::Degeneration);
        }
    }

    let shares_noun = summary_content.iter().any(|w| noun_like(w) && source_words.contains(w));
    if summary.trim().chars().count() < MIN_STANDALONE_CHARS || !shares_noun {
        flags.push(SummaryFlag::Decontextualized);
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;

    const COLORISM_SUMMARY: &str = include_str!("../../tests/fixtures/screening/colorism_summary.txt");
    const COLORISM_ARTICLE: &str = include_str!("../../tests/fixtures/screening/colorism_article.txt");
    const INTERPRETER_ARTICLE: &str = include_str!("../../tests/fixtures/screening/interpreter_article.txt");

    fn article(title: &str, body: &str) -> Article {
        Article::new("https://example.com/a", "Fixture", title, body.trim(), None, Utc::now())
    }

    #[test]
    fn faithful_summary_has_no_flags() {
        let a = article("How digital beauty filters perpetuate colorism", COLORISM_ARTICLE);
        assert_eq!(screen_summary(COLORISM_SUMMARY.trim(), &a, Some(Verdict::Relevant)), vec![]);
    }

    #[test]
    fn repetition_is_degeneration() {
        let a = article("How digital beauty filters perpetuate colorism", COLORISM_ARTICLE);
        let flags = screen_summary(&"bad ".repeat(20), &a, None);
        assert!(flags.contains(&SummaryFlag::Degeneration));
    }

    #[test]
    fn terse_summary_is_decontextualized() {
        let a = article("Google Translate's Interpreter Mode", INTERPRETER_ARTICLE);
        let flags = screen_summary("They will probably make us all look like idiots.", &a, None);
        assert!(flags.contains(&SummaryFlag::Decontextualized), "{flags:?}");
    }

    #[test]
    fn unsupported_summary_is_hallucination_risk() {
        let a = article("Google Translate's Interpreter Mode", INTERPRETER_ARTICLE);
        let s = "Cryptocurrency miners overheat rural substations, raising electricity tariffs for farmers nationwide.";
        assert!(screen_summary(s, &a, None).contains(&SummaryFlag::HallucinationRisk));
    }

    #[test]
    fn irrelevant_verdict_is_no_consequence() {
        let a = article("How digital beauty filters perpetuate colorism", COLORISM_ARTICLE);
        assert!(screen_summary(COLORISM_SUMMARY.trim(), &a, Some(Verdict::Irrelevant)).contains(&SummaryFlag::NoConsequence));
    }
}
