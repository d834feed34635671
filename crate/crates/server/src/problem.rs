use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use inspectkit_core::Error;
use serde::Serialize;

/// Machine-readable error body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Problem {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub location: String,
}

impl Problem {
    pub fn new(
        status: StatusCode,
        code: impl Into<String>,
        message: impl Into<String>,
        location: impl Into<String>,
    ) -> Self {
        Problem {
            status,
            code: code.into(),
            message: message.into(),
            location: location.into(),
        }
    }

    pub fn not_found(location: impl Into<String>, message: impl Into<String>) -> Self {
        Problem::new(StatusCode::NOT_FOUND, "not-found", message, location)
    }

    pub fn from_core(e: Error) -> Self {
        let status = match &e {
            Error::ImpossibleEvidence | Error::InsufficientData(_) | Error::UndefinedMetric(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Error::Configuration(_) | Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let location = match &e {
            Error::Schema { location, .. } => location.clone(),
            Error::Parse { line, column, .. } => format!("line {line} column {column}"),
            Error::ImpossibleEvidence => "evidence".to_string(),
            _ => String::new(),
        };
        Problem::new(status, e.code(), e.to_string(), location)
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        let body = serde_json::to_string_pretty(&self).expect("problem serializes") + "\n";
        (
            self.status,
            [(header::CONTENT_TYPE, "application/problem+json")],
            body,
        )
            .into_response()
    }
}
