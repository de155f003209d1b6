use std::collections::HashMap;
use std::path::Path;

use super::{predict_title, GatewayError, TitleClassifierModel};

/// Scores a title's probability of discussing an undesirable consequence.
pub trait TitleClassifier: Send + Sync {
    fn id(&self) -> String;
    fn score(&self, title: &str) -> Result<f64, GatewayError>;
}

pub struct BaselineTitleClassifier {
    model: TitleClassifierModel,
}

impl BaselineTitleClassifier {
    pub fn new(model: TitleClassifierModel) -> Self {
        BaselineTitleClassifier { model }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
        let model = serde_json::from_str(&text).map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
        Ok(BaselineTitleClassifier { model })
    }

    pub fn model(&self) -> &TitleClassifierModel {
        &self.model
    }
}

impl TitleClassifier for BaselineTitleClassifier {
    fn id(&self) -> String {
        format!("baseline:{}", &self.model.trained_on[..12.min(self.model.trained_on.len())])
    }

    fn score(&self, title: &str) -> Result<f64, GatewayError> {
        Ok(predict_title(&self.model, title))
    }
}

/// Fixed title → label lookup; titles not listed get `default_score`.
#[derive(Debug, Clone, Default)]
pub struct StubTitleClassifier {
    labels: HashMap<String, bool>,
    default_score: f64,
}

impl StubTitleClassifier {
    pub fn new(labels: impl IntoIterator<Item = (String, bool)>) -> Self {
        StubTitleClassifier { labels: labels.into_iter().collect(), default_score: 0.0 }
    }

    /// Read a `title,label` CSV (label: 1/0, true/false, relevant/irrelevant).
    pub fn load_csv(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
        let rows = crate::eval::read_labeled_csv(&text).map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        Ok(Self::new(rows))
    }
}

impl TitleClassifier for StubTitleClassifier {
    fn id(&self) -> String {
        "stub".into()
    }

    fn score(&self, title: &str) -> Result<f64, GatewayError> {
        Ok(match self.labels.get(title.trim()) {
            Some(true) => 1.0,
            Some(false) => 0.0,
            None => self.default_score,
        })
    }
}
