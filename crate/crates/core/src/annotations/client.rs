//! Client for a remote detection/classification service.
//!
//! Contract: `POST <endpoint>` with the PNG as the request body
//! (`content-type: image/png`); a 2xx reply carries the annotation JSON
//! accepted by [`parse_annotations`].

use std::time::Duration;

use thiserror::Error;

use super::{parse_annotations, AnnotationError, AnnotationSet};
use crate::http::{self, HttpError};
use crate::stroke_log::Canvas;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FetchError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("inference service returned invalid annotations: {0}")]
    Invalid(#[from] AnnotationError),
}

impl FetchError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Http(HttpError::Unreachable(_)) => "Unreachable",
            Self::Http(HttpError::Timeout(_)) => "Timeout",
            Self::Http(HttpError::BadResponse { .. }) => "BadResponse",
            Self::Invalid(e) => e.kind(),
        }
    }
}

pub fn fetch_annotations(
    png: &[u8],
    endpoint: &str,
    canvas: Canvas,
    timeout: Duration,
) -> Result<AnnotationSet, FetchError> {
    let body = http::post(endpoint, "image/png", &[], png, timeout)?;
    Ok(parse_annotations(&body, canvas)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::mock::{dead_url, serve_once};

    const FIXTURE: &str = r#"{"objects":[{"label":"tree","box":[10,10,200,300],
        "parts":[{"label":"trunk","box":[80,150,120,300]}]}],"markers":{"dead_tree":false}}"#;

    fn canvas() -> Canvas {
        Canvas::new(640, 480).unwrap()
    }

    #[test]
    fn healthy_server_passes_through() {
        let (url, handle) = serve_once(200, FIXTURE);
        let fetched = fetch_annotations(b"\x89PNG fake", &url, canvas(), Duration::from_secs(5)).unwrap();
        assert_eq!(handle.join().unwrap(), b"\x89PNG fake");
        assert_eq!(fetched, parse_annotations(FIXTURE.as_bytes(), canvas()).unwrap());
    }

    #[test]
    fn server_error_is_bad_response() {
        let (url, _handle) = serve_once(500, "boom");
        let err = fetch_annotations(b"png", &url, canvas(), Duration::from_secs(5)).unwrap_err();
        assert!(
            matches!(err, FetchError::Http(HttpError::BadResponse { status: 500, .. })),
            "{err:?}"
        );
        assert_eq!(err.kind(), "BadResponse");
    }

    #[test]
    fn unreachable_host() {
        let started = std::time::Instant::now();
        let err = fetch_annotations(b"png", &dead_url(), canvas(), Duration::from_secs(2)).unwrap_err();
        assert_eq!(err.kind(), "Unreachable", "{err:?}");
        assert!(started.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn invalid_payload_is_typed() {
        let (url, _handle) = serve_once(200, r#"{"objects":[{"label":"ufo","box":[0,0,1,1]}]}"#);
        let err = fetch_annotations(b"png", &url, canvas(), Duration::from_secs(5)).unwrap_err();
        assert_eq!(err.kind(), "UnknownLabel");
    }
}
