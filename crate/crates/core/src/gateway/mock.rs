use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, hashing_embedding, CompletionRequest, CompletionResponse, GatewayError, Provider, ProviderError, MOCK_EMBEDDING_DIM};

/// Canned completion returned when every substring in `match_substrings`
/// occurs in the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub match_substrings: Vec<String>,
    pub response_text: String,
}

/// Ordered rules; the first matching rule wins.
///
/// File form (TOML or JSON):
///
/// ```toml
/// fallback = ""
///
/// [[rules]]
/// match_substrings = ["Answer Yes or No.", "simulator sickness"]
/// response_text = "Yes"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTable {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    /// Completion when no rule matches.
    #[serde(default)]
    pub fallback: String,
}

impl RuleTable {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| GatewayError::InvalidRequest(format!("rule table {}: {e}", path.display())))
    }

    pub fn respond(&self, prompt: &str) -> &str {
        self.rules
            .iter()
            .find(|r| r.match_substrings.iter().all(|s| prompt.contains(s.as_str())))
            .map(|r| r.response_text.as_str())
            .unwrap_or(&self.fallback)
    }
}

/// Offline provider: completions come from a [`RuleTable`], embeddings from
/// seeded feature hashing. Output is a pure function of (prompt, rules, seed).
#[derive(Debug, Clone)]
pub struct MockProvider {
    rules: RuleTable,
    seed: u64,
}

impl MockProvider {
    pub const DEFAULT_SEED: u64 = 7;

    pub fn new(rules: RuleTable, seed: u64) -> Self {
        MockProvider { rules, seed }
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }
}

impl Provider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn model(&self) -> &str {
        "mock-rules-v1"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let text = self.rules.respond(&request.prompt).to_string();
        Ok(CompletionResponse {
            prompt_tokens: estimate_tokens(&request.prompt),
            completion_tokens: estimate_tokens(&text),
            text,
            provider: self.id().into(),
            model: self.model().into(),
            latency_ms: 0,
        })
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        Ok(hashing_embedding(text, self.seed, MOCK_EMBEDDING_DIM))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FakeClock;
    use crate::gateway::Gateway;
    use std::sync::Arc;

    fn table() -> RuleTable {
        toml::from_str(
            r#"
            fallback = "No"
            [[rules]]
            match_substrings = ["Answer Yes or No.", "simulator sickness"]
            response_text = "Yes"
            [[rules]]
            match_substrings = ["Answer Yes or No."]
            response_text = "No"
            "#,
        )
        .unwrap()
    }

    #[test]
    fn first_matching_rule_wins() {
        let gw = Gateway::builder(Arc::new(MockProvider::new(table(), 7)), Arc::new(FakeClock::fixed())).build();
        let yes = gw
            .complete(&CompletionRequest::new("... a look at simulator sickness ...\n\nIs it bad? Answer Yes or No.", 3, "content"))
            .unwrap();
        assert_eq!(yes.text, "Yes");
        let no = gw.complete(&CompletionRequest::new("nothing here. Answer Yes or No.", 3, "content")).unwrap();
        assert_eq!(no.text, "No");
        assert_eq!(table().respond("unrelated"), "No");
    }

    #[test]
    fn usage_totals_match_provider_reports() {
        let gw = Gateway::builder(Arc::new(MockProvider::new(table(), 7)), Arc::new(FakeClock::fixed())).build();
        for (i, tag) in ["content", "summary", "content", "aspect"].iter().enumerate() {
            gw.complete(&CompletionRequest::new(format!("prompt number {i} Answer Yes or No."), 3, *tag)).unwrap();
        }
        let usage = gw.usage();
        assert_eq!(usage.total_tokens(), usage.provider_reported_tokens);
        assert_eq!(usage.by_tag["content"].calls, 2);
    }

    #[test]
    fn embeddings_are_deterministic_unit_vectors() {
        let p = MockProvider::new(RuleTable::default(), 7);
        let gw = Gateway::builder(Arc::new(p), Arc::new(FakeClock::fixed())).build();
        let a = gw.embed("abc").unwrap();
        assert_eq!(a, gw.embed("abc").unwrap());
        assert_eq!(a.len(), MOCK_EMBEDDING_DIM);
        assert!((a.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-6);
        assert!(gw.embed("   ").is_err());
    }

    #[test]
    fn loads_json_tables() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.json");
        std::fs::write(&path, r#"{"rules":[{"match_substrings":["x"],"response_text":"y"}]}"#).unwrap();
        let t = RuleTable::load(&path).unwrap();
        assert_eq!(t.respond("axb"), "y");
        assert_eq!(t.respond("q"), "");
    }
}
