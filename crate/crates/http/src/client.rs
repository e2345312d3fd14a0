use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

use savcd_core::{Backend, BackendError, BackendSession, LogitVector, RasterImage};

use crate::wire::{
    CreateSessionRequest, CreateSessionResponse, ErrorBody, GenerateRequest, GenerateResponse,
    LogitsRequest, LogitsResponse,
};

/// [`Backend`] over the JSON logit-server protocol.
///
/// Blocking; must not be called from inside an async runtime.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    client: Client,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url)
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let response = self
            .client
            .post(self.url(path))
            .json(body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let response = check_status(response)?;
        response
            .json()
            .map_err(|e| BackendError::Transport(format!("malformed response: {e}")))
    }
}

fn check_status(response: Response) -> Result<Response, BackendError> {
    let status = response.status();
    if status.is_success() {
        return Ok(response);
    }
    let text = response.text().unwrap_or_default();
    let message = serde_json::from_str::<ErrorBody>(&text)
        .map(|b| b.error)
        .unwrap_or(text);
    Err(BackendError::Server {
        status: status.as_u16(),
        message,
    })
}

impl Backend for HttpBackend {
    fn open_session(&self, image: Option<&RasterImage>) -> Result<BackendSession, BackendError> {
        let request = CreateSessionRequest::for_image(image)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let created: CreateSessionResponse = self.post("/v1/session", &request)?;
        Ok(BackendSession::new(
            created.session_id,
            created.vocab_size,
            created.end_token,
        ))
    }

    fn next_logits(
        &self,
        session: &mut BackendSession,
        tokens: &[usize],
    ) -> Result<LogitVector, BackendError> {
        let mut next = session.clone();
        next.advance(tokens)?;
        let request = LogitsRequest {
            session_id: session.id().to_string(),
            tokens: tokens.to_vec(),
        };
        let response: LogitsResponse = self.post("/v1/logits", &request)?;
        if response.logits.len() != session.vocab_size() {
            return Err(BackendError::VocabMismatch {
                expected: session.vocab_size(),
                got: response.logits.len(),
            });
        }
        let logits = LogitVector::new(response.logits)?;
        *session = next;
        Ok(logits)
    }

    fn generate_text(
        &self,
        session: &mut BackendSession,
        prompt: &str,
        max_tokens: usize,
        greedy: bool,
    ) -> Result<String, BackendError> {
        let request = GenerateRequest {
            session_id: session.id().to_string(),
            prompt: prompt.to_string(),
            max_tokens,
            greedy,
        };
        let response: GenerateResponse = self.post("/v1/generate", &request)?;
        Ok(response.text)
    }

    fn close_session(&self, session: BackendSession) -> Result<(), BackendError> {
        let response = self
            .client
            .delete(self.url(&format!("/v1/session/{}", session.id())))
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let response = check_status(response)?;
        if response.status() != StatusCode::NO_CONTENT {
            return Err(BackendError::Server {
                status: response.status().as_u16(),
                message: "expected 204 from session delete".into(),
            });
        }
        Ok(())
    }
}
