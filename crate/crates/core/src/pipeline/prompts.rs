//! Stage prompt templates.

use serde::{Deserialize, Serialize};

use crate::model::Aspect;

pub const DOMAIN_SLOT: &str = "<domain>";
pub const TITLE_SLOT: &str = "<title>";
pub const SUMMARY_SLOT: &str = "<summary>";

pub const CONTENT_FILTER_TEMPLATE: &str =
    "Does the article above discuss unintended or undesirable consequences on society of <domain>? Answer Yes or No.";
pub const SUMMARY_TEMPLATE: &str = "To summarize in a short paragraph, the main undesirable consequence of <domain> being discussed here is";
pub const ASPECT_QUESTION: &str = "Which aspect of life does the following consequence affect?";

/// `"List of possible aspects: Economy, ..., Social Norms & Relationships"`
pub fn aspect_list_line() -> String {
    let names: Vec<&str> = Aspect::ALL.iter().map(|a| a.name()).collect();
    format!("List of possible aspects: {}", names.join(", "))
}

pub fn default_aspect_template() -> String {
    format!("{}\n{ASPECT_QUESTION}\nTitle: {TITLE_SLOT}\nSummary: {SUMMARY_SLOT}\nAspect:", aspect_list_line())
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid prompt set: {0}")]
pub struct PromptSetError(String);

/// The three model prompts, with `<domain>`, `<title>` and `<summary>` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePromptSet {
    pub content_filter_template: String,
    pub summary_template: String,
    pub aspect_template: String,
}

impl Default for StagePromptSet {
    fn default() -> Self {
        StagePromptSet {
            content_filter_template: CONTENT_FILTER_TEMPLATE.into(),
            summary_template: SUMMARY_TEMPLATE.into(),
            aspect_template: default_aspect_template(),
        }
    }
}

impl StagePromptSet {
    pub fn validate(&self) -> Result<(), PromptSetError> {
        let fail = |m: &str| Err(PromptSetError(m.into()));
        if !self.content_filter_template.ends_with("Answer Yes or No.") {
            return fail("content filter template must end with \"Answer Yes or No.\"");
        }
        if !self.content_filter_template.contains(DOMAIN_SLOT) || !self.summary_template.contains(DOMAIN_SLOT) {
            return fail("content and summary templates need a <domain> slot");
        }
        if !self.summary_template.ends_with("being discussed here is") {
            return fail("summary template must end with \"being discussed here is\"");
        }
        if !self.aspect_template.contains(TITLE_SLOT) || !self.aspect_template.contains(SUMMARY_SLOT) {
            return fail("aspect template needs <title> and <summary> slots");
        }
        if !self.aspect_template.contains(&aspect_list_line()) {
            return fail("aspect template must list all ten aspects");
        }
        Ok(())
    }

    pub fn content_question(&self, domain: &str) -> String {
        self.content_filter_template.replace(DOMAIN_SLOT, domain)
    }

    pub fn summary_cue(&self, domain: &str) -> String {
        self.summary_template.replace(DOMAIN_SLOT, domain)
    }

    pub fn aspect_prompt(&self, title: &str, summary: &str) -> String {
        self.aspect_template.replace(TITLE_SLOT, title.trim()).replace(SUMMARY_SLOT, summary.trim())
    }
}
