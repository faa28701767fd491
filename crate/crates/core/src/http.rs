//! Minimal blocking HTTP used by the inference and embedding clients.

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HttpError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("bad response (status {status}): {message}")]
    BadResponse { status: u16, message: String },
}

/// POSTs `body` and returns the response body of a 2xx reply.
pub fn post(
    url: &str,
    content_type: &str,
    extra_headers: &[(&str, &str)],
    body: &[u8],
    timeout: Duration,
) -> Result<Vec<u8>, HttpError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut request = agent.post(url).header("content-type", content_type);
    for (name, value) in extra_headers {
        request = request.header(*name, *value);
    }
    let response = request.send(body).map_err(|e| classify(e, timeout))?;
    let status = response.status().as_u16();
    let bytes = response.into_body().read_to_vec().map_err(|e| classify(e, timeout))?;
    if !(200..300).contains(&status) {
        return Err(HttpError::BadResponse {
            status,
            message: String::from_utf8_lossy(&bytes).chars().take(200).collect(),
        });
    }
    Ok(bytes)
}

fn classify(err: ureq::Error, timeout: Duration) -> HttpError {
    match err {
        ureq::Error::Timeout(_) => HttpError::Timeout(timeout),
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => HttpError::Timeout(timeout),
        ureq::Error::StatusCode(status) => HttpError::BadResponse {
            status,
            message: String::new(),
        },
        ureq::Error::Protocol(e) => HttpError::BadResponse {
            status: 0,
            message: e.to_string(),
        },
        other => HttpError::Unreachable(other.to_string()),
    }
}

#[cfg(test)]
pub(crate) mod mock {
    //! One-shot HTTP server for client tests.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread::JoinHandle;

    /// Serves a single request with a fixed reply; returns the url and a handle
    /// yielding the received request body.
    pub fn serve_once(status: u16, body: impl Into<Vec<u8>>) -> (String, JoinHandle<Vec<u8>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let body = body.into();
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut received = vec![0u8; len];
            reader.read_exact(&mut received).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                body.len()
            )
            .unwrap();
            stream.write_all(&body).unwrap();
            received
        });
        (format!("http://{addr}"), handle)
    }

    /// An address nothing listens on.
    pub fn dead_url() -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        format!("http://{addr}")
    }
}
