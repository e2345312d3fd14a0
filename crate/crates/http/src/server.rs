//! Stub logit server that serves a [`SyntheticBackend`] over HTTP.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use savcd_core::{Backend, BackendError, BackendSession, SyntheticBackend};

use crate::wire::{
    CreateSessionRequest, CreateSessionResponse, ErrorBody, GenerateRequest, GenerateResponse,
    LogitsRequest, LogitsResponse,
};

struct StubState {
    backend: SyntheticBackend,
    sessions: Mutex<HashMap<String, BackendSession>>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<BackendError> for ApiError {
    fn from(e: BackendError) -> Self {
        let status = match e {
            BackendError::UnknownContext(_) | BackendError::MissingCompletion => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            BackendError::ContextRewrite => StatusCode::CONFLICT,
            BackendError::EmptyContext | BackendError::InvalidLogits(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

fn unknown_session(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}"))
}

async fn create_session(
    State(state): State<Arc<StubState>>,
    body: Bytes,
) -> Result<Json<CreateSessionResponse>, ApiError> {
    let request: CreateSessionRequest = parse(&body)?;
    let image = request
        .decode_image()
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let session = state.backend.open_session(image.as_ref())?;
    let response = CreateSessionResponse {
        vocab_size: session.vocab_size(),
        end_token: session.end_token(),
        session_id: session.id().to_string(),
    };
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .insert(session.id().to_string(), session);
    Ok(Json(response))
}

async fn logits(
    State(state): State<Arc<StubState>>,
    body: Bytes,
) -> Result<Json<LogitsResponse>, ApiError> {
    let request: LogitsRequest = parse(&body)?;
    let mut sessions = state.sessions.lock().expect("session map poisoned");
    let session = sessions
        .get_mut(&request.session_id)
        .ok_or_else(|| unknown_session(&request.session_id))?;
    let logits = state.backend.next_logits(session, &request.tokens)?;
    Ok(Json(LogitsResponse {
        logits: logits.into_inner(),
    }))
}

async fn generate(
    State(state): State<Arc<StubState>>,
    body: Bytes,
) -> Result<Json<GenerateResponse>, ApiError> {
    let request: GenerateRequest = parse(&body)?;
    let mut sessions = state.sessions.lock().expect("session map poisoned");
    let session = sessions
        .get_mut(&request.session_id)
        .ok_or_else(|| unknown_session(&request.session_id))?;
    let text = state.backend.generate_text(
        session,
        &request.prompt,
        request.max_tokens,
        request.greedy,
    )?;
    Ok(Json(GenerateResponse { text }))
}

async fn delete_session(
    State(state): State<Arc<StubState>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    let removed = state
        .sessions
        .lock()
        .expect("session map poisoned")
        .remove(&id);
    match removed {
        Some(session) => {
            state.backend.close_session(session)?;
            Ok(StatusCode::NO_CONTENT)
        }
        None => Err(unknown_session(&id)),
    }
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "no such route".into())
}

pub fn router(backend: SyntheticBackend) -> Router {
    let state = Arc::new(StubState {
        backend,
        sessions: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/v1/session", post(create_session))
        .route("/v1/session/{id}", delete(delete_session))
        .route("/v1/logits", post(logits))
        .route("/v1/generate", post(generate))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    backend: SyntheticBackend,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(backend))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A stub server running on its own thread and runtime. Stops on drop.
pub struct StubServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl StubServer {
    /// Binds `127.0.0.1` on an ephemeral port.
    pub fn spawn(backend: SyntheticBackend) -> std::io::Result<Self> {
        Self::spawn_on("127.0.0.1:0".parse().expect("static address"), backend)
    }

    pub fn spawn_on(addr: SocketAddr, backend: SyntheticBackend) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(listener, backend, async {
                let _ = rx.await;
            }))
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown_and_join()
    }

    fn shutdown_and_join(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(handle) => handle
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("stub server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        let _ = self.shutdown_and_join();
    }
}
