use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ClientToken;
use crate::model::{Article, ConsequenceCard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportState {
    Pending,
    Approved,
    Rejected,
}

impl ImportState {
    pub fn as_str(self) -> &'static str {
        match self {
            ImportState::Pending => "pending",
            ImportState::Approved => "approved",
            ImportState::Rejected => "rejected",
        }
    }

    /// Only pending items move, and only to a final state.
    pub fn can_become(self, next: ImportState) -> bool {
        self == ImportState::Pending && next != ImportState::Pending
    }
}

/// Why the pipeline refused a submitted article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// One of `fetch`, `extract`, `title`, `content`, `summary`, `aspect`.
    pub stage: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingImport {
    pub id: String,
    pub submitted_by: ClientToken,
    pub url: String,
    pub proposed_domain: String,
    pub extracted_card: Option<ConsequenceCard>,
    /// Article the card was drawn from; published together with it.
    #[serde(default)]
    pub article: Option<Article>,
    pub state: ImportState,
    pub submitted_at: DateTime<Utc>,
    /// Set when the pipeline turned the article down at submission.
    #[serde(default)]
    pub rejection: Option<Rejection>,
    #[serde(default)]
    pub decided_at: Option<DateTime<Utc>>,
}

impl PendingImport {
    pub fn validate(&self) -> Result<(), String> {
        if self.state == ImportState::Approved && self.extracted_card.is_none() {
            return Err(format!("import {} is approved without a card", self.id));
        }
        Ok(())
    }
}
