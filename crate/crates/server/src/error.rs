use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cpc_core::{EditError, IngestError, InteractionError, LayoutError, RenderError, StateError};
use serde::Serialize;

/// Error body returned by every endpoint: `{code, message, path?}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                path: None,
            },
        }
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.body.path = Some(path.into());
        self
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} `{id}`"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "edit_conflict", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let path = match &e {
            IngestError::Malformed { path, .. } => Some(path.clone()),
            IngestError::Csv { column, .. } => Some(column.clone()),
            _ => None,
        };
        let err = Self::bad_request("invalid_dataset", e.to_string());
        match path {
            Some(p) => err.with_path(p),
            None => err,
        }
    }
}

impl From<StateError> for ApiError {
    fn from(e: StateError) -> Self {
        let path = match &e {
            StateError::UnknownBranch(p) | StateError::NotExpandable(p) => p.clone(),
            StateError::AncestorCollapsed { path, .. } => path.clone(),
        };
        Self::bad_request("invalid_expansion", e.to_string()).with_path(path)
    }
}

impl From<LayoutError> for ApiError {
    fn from(e: LayoutError) -> Self {
        match e {
            LayoutError::State(s) => s.into(),
            LayoutError::UnknownDimension(ref p) => {
                let p = p.clone();
                Self::bad_request("invalid_layout", e.to_string()).with_path(p)
            }
            other => Self::bad_request("invalid_layout", other.to_string()),
        }
    }
}

impl From<InteractionError> for ApiError {
    fn from(e: InteractionError) -> Self {
        let path = match &e {
            InteractionError::StaleTarget(p)
            | InteractionError::UnknownAxis(p)
            | InteractionError::CategoricalBrush(p) => p.clone(),
            InteractionError::InvalidBrush { path, .. } => path.clone(),
        };
        Self::bad_request("invalid_target", e.to_string()).with_path(path)
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        let message = e.to_string();
        match e {
            EditError::AlreadyActive | EditError::Inactive => Self::conflict(message),
            EditError::UnknownSource(id) => Self::new(StatusCode::NOT_FOUND, "not_found", message).with_path(id),
            EditError::UnknownPath(p) | EditError::IllegalValue { path: p, .. } => {
                Self::bad_request("invalid_selection", message).with_path(p)
            }
            EditError::Incomplete { missing } => {
                let err = Self::bad_request("incomplete_observation", message);
                match missing.first() {
                    Some(p) => err.with_path(p.to_string()),
                    None => err,
                }
            }
            EditError::Invalid(_) => Self::bad_request("invalid_observation", message),
        }
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        Self::bad_request("invalid_layout", e.to_string())
    }
}

/// Deserializes a JSON body, reporting the failing field path.
pub fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let err = ApiError::bad_request("invalid_request", e.inner().to_string());
        if path == "." {
            err
        } else {
            err.with_path(path)
        }
    })
}
