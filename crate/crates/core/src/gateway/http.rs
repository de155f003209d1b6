//! JSON-over-HTTP adapters.
//!
//! Completion: `POST {endpoint}/v1/complete` with
//! `{model, prompt, max_tokens, temperature, stop}` → `{text, prompt_tokens, completion_tokens}`.
//! Embedding: `POST {endpoint}/v1/embed` with `{model, input}` → `{embedding}`.
//! Title classifier: `POST {endpoint}` with `{title}` → `{score}`.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, GatewayError, Provider, ProviderError, TitleClassifier};

fn classify_status(status: StatusCode, body: String) -> ProviderError {
    let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS || status == StatusCode::REQUEST_TIMEOUT {
        ProviderError::Transient(msg)
    } else {
        ProviderError::Fatal(msg)
    }
}

fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    client: &Client,
    url: &str,
    api_key: Option<&str>,
    body: &Req,
) -> Result<Resp, ProviderError> {
    let mut req = client.post(url).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req.send().map_err(|e| ProviderError::Transient(e.to_string()))?;
    let status = resp.status();
    if !status.is_success() {
        return Err(classify_status(status, resp.text().unwrap_or_default()));
    }
    resp.json::<Resp>().map_err(|e| ProviderError::Fatal(format!("bad response body: {e}")))
}

fn client(timeout: Duration) -> Result<Client, GatewayError> {
    Client::builder().timeout(timeout).build().map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))
}

pub struct HttpProvider {
    client: Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct CompleteBody<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    stop: Option<&'a [String]>,
}

#[derive(Deserialize)]
struct CompleteReply {
    text: String,
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Serialize)]
struct EmbedBody<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedReply {
    embedding: Vec<f64>,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, GatewayError> {
        Ok(HttpProvider {
            client: client(timeout)?,
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
        })
    }
}

impl Provider for HttpProvider {
    fn id(&self) -> &str {
        "http"
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let body = CompleteBody {
            model: &self.model,
            prompt: &request.prompt,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            stop: request.stop.as_deref(),
        };
        let reply: CompleteReply = post_json(&self.client, &format!("{}/v1/complete", self.endpoint), self.api_key.as_deref(), &body)?;
        Ok(CompletionResponse {
            text: reply.text,
            prompt_tokens: reply.prompt_tokens,
            completion_tokens: reply.completion_tokens,
            provider: self.id().into(),
            model: self.model.clone(),
            latency_ms: 0,
        })
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let reply: EmbedReply = post_json(
            &self.client,
            &format!("{}/v1/embed", self.endpoint),
            self.api_key.as_deref(),
            &EmbedBody { model: &self.model, input: text },
        )?;
        Ok(reply.embedding)
    }
}

/// Title classifier served by a remote model.
pub struct RemoteTitleClassifier {
    client: Client,
    endpoint: String,
}

#[derive(Serialize)]
struct ClassifyBody<'a> {
    title: &'a str,
}

#[derive(Deserialize)]
struct ClassifyReply {
    score: f64,
}

impl RemoteTitleClassifier {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, GatewayError> {
        Ok(RemoteTitleClassifier { client: client(timeout)?, endpoint: endpoint.into() })
    }
}

impl TitleClassifier for RemoteTitleClassifier {
    fn id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn score(&self, title: &str) -> Result<f64, GatewayError> {
        let reply: ClassifyReply = post_json(&self.client, &self.endpoint, None, &ClassifyBody { title })
            .map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))?;
        if !(0.0..=1.0).contains(&reply.score) {
            return Err(GatewayError::ProviderUnavailable(format!("classifier score {} outside [0,1]", reply.score)));
        }
        Ok(reply.score)
    }
}
