//! JSON bodies of the logit-server protocol.
//!
//! | route                      | request                 | response                 |
//! |----------------------------|-------------------------|--------------------------|
//! | `POST /v1/session`         | [`CreateSessionRequest`]| [`CreateSessionResponse`]|
//! | `POST /v1/logits`          | [`LogitsRequest`]       | [`LogitsResponse`]       |
//! | `POST /v1/generate`        | [`GenerateRequest`]     | [`GenerateResponse`]     |
//! | `DELETE /v1/session/{id}`  | none                    | `204 No Content`         |
//!
//! Every non-2xx response carries an [`ErrorBody`].

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use savcd_core::RasterImage;

use crate::HttpError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    /// Base64 (standard alphabet, padded) PNG, or null for text-only.
    pub image_png_b64: Option<String>,
}

impl CreateSessionRequest {
    pub fn for_image(image: Option<&RasterImage>) -> Result<Self, HttpError> {
        let image_png_b64 = image
            .map(|img| img.to_png_bytes().map(|png| STANDARD.encode(png)))
            .transpose()
            .map_err(|e| HttpError::Image(e.to_string()))?;
        Ok(Self { image_png_b64 })
    }

    pub fn decode_image(&self) -> Result<Option<RasterImage>, HttpError> {
        let Some(b64) = &self.image_png_b64 else {
            return Ok(None);
        };
        let png = STANDARD
            .decode(b64)
            .map_err(|e| HttpError::Image(format!("base64: {e}")))?;
        RasterImage::from_png_bytes(&png)
            .map(Some)
            .map_err(|e| HttpError::Image(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub vocab_size: usize,
    pub end_token: usize,
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogitsRequest {
    pub session_id: String,
    pub tokens: Vec<usize>,
}

/// Masked entries (negative infinity) travel as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsResponse {
    #[serde(with = "masked_floats")]
    pub logits: Vec<f64>,
}

mod masked_floats {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(|&v| {
            if v == f64::NEG_INFINITY {
                None
            } else {
                Some(v)
            }
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        raw.into_iter()
            .map(|v| match v {
                Some(x) if x.is_finite() => Ok(x),
                Some(x) => Err(D::Error::custom(format!("non-finite logit {x}"))),
                None => Ok(f64::NEG_INFINITY),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub session_id: String,
    pub prompt: String,
    pub max_tokens: usize,
    pub greedy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
