//! JSON-over-HTTP front end for [`AssignmentService`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Deserialize;
use serde_json::json;

use super::{AssignRequest, AssignmentService, FeedbackRequest, ServiceError};
use crate::classify::LearnerSpec;
use crate::corpus::YearMonth;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::ServiceUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            Self::AssignmentImpossible(_) | Self::NoTrainingData(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Self::Conflict(_) => StatusCode::CONFLICT,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct RangeQuery {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct RetrainRequest {
    pub as_of: Option<YearMonth>,
    pub learner: Option<String>,
}

type Shared = State<Arc<AssignmentService>>;

async fn assign(
    State(svc): Shared,
    Json(req): Json<AssignRequest>,
) -> Result<Response, ServiceError> {
    let resp = tokio::task::spawn_blocking(move || svc.assign(req))
        .await
        .expect("assign task")?;
    Ok(Json(resp).into_response())
}

async fn feedback(
    State(svc): Shared,
    Json(req): Json<FeedbackRequest>,
) -> Result<Response, ServiceError> {
    Ok(Json(svc.feedback(req)?).into_response())
}

async fn accuracy(
    State(svc): Shared,
    Query(q): Query<RangeQuery>,
) -> Result<Response, ServiceError> {
    Ok(Json(svc.accuracy(q.from, q.to)?).into_response())
}

async fn model(State(svc): Shared) -> Result<Response, ServiceError> {
    Ok(Json(svc.model_info()?).into_response())
}

async fn retrain(
    State(svc): Shared,
    body: Option<Json<RetrainRequest>>,
) -> Result<Response, ServiceError> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let learner = req
        .learner
        .map(|s| s.parse::<LearnerSpec>())
        .transpose()
        .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let info = tokio::task::spawn_blocking(move || svc.retrain(req.as_of, learner))
        .await
        .expect("retrain task")?;
    Ok(Json(info).into_response())
}

pub fn router(service: Arc<AssignmentService>) -> Router {
    Router::new()
        .route("/assign", post(assign))
        .route("/feedback", post(feedback))
        .route("/accuracy", get(accuracy))
        .route("/model", get(model))
        .route("/admin/retrain", post(retrain))
        .with_state(service)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, service: Arc<AssignmentService>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
