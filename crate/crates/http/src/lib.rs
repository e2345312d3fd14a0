//! HTTP transport for the decoding engine: the JSON wire format, a
//! blocking [`HttpBackend`] client and a [`StubServer`] that serves a
//! synthetic script for conformance testing.

pub mod client;
pub mod server;
pub mod wire;

pub use client::HttpBackend;
pub use server::{router, serve, StubServer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HttpError {
    #[error("image payload: {0}")]
    Image(String),
}
