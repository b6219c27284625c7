//! Pluggable paraphrasing: identity by default, or an HTTP service that
//! accepts {"sentences": [...]} and answers {"paraphrases": [...]}.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Paraphraser {
    /// Returns its input verbatim; lets the pipeline run with no service.
    Identity,
    Remote { endpoint: String, timeout: Duration },
}

impl Paraphraser {
    pub fn run(&self, sentences: &[String]) -> Result<Vec<String>> {
        match self {
            Paraphraser::Identity => Ok(sentences.to_vec()),
            Paraphraser::Remote { endpoint, timeout } => {
                remote_paraphrase(sentences, endpoint, *timeout)
            }
        }
    }
}

#[derive(Serialize)]
struct ParaphraseRequest<'a> {
    sentences: &'a [String],
}

#[derive(Deserialize)]
struct ParaphraseResponse {
    paraphrases: Vec<String>,
}

/// One HTTP POST per batch; the response must echo back exactly one
/// paraphrase per sentence, in order. Transport failures surface as
/// errors, never as a silent identity.
pub fn remote_paraphrase(
    sentences: &[String],
    endpoint: &str,
    timeout: Duration,
) -> Result<Vec<String>> {
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build();
    let agent = ureq::Agent::new_with_config(config);
    let mut response = agent
        .post(endpoint)
        .send_json(&ParaphraseRequest { sentences })
        .map_err(|e| Error::Paraphrase(e.to_string()))?;
    if response.status() != 200 {
        return Err(Error::Paraphrase(format!(
            "endpoint answered status {}",
            response.status()
        )));
    }
    let body: ParaphraseResponse = response
        .body_mut()
        .read_json()
        .map_err(|e| Error::Protocol(format!("bad response body: {e}")))?;
    if body.paraphrases.len() != sentences.len() {
        return Err(Error::Protocol(format!(
            "sent {} sentences, got {} paraphrases",
            sentences.len(),
            body.paraphrases.len()
        )));
    }
    Ok(body.paraphrases)
}

#[cfg(test)]
pub(crate) mod test_server {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Minimal one-shot HTTP server for exercising the wire protocol.
    /// `respond` maps the raw request body to a response body.
    pub fn spawn<F>(respond: F) -> (String, std::thread::JoinHandle<()>)
    where
        F: Fn(&str) -> String + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            if let Ok((stream, _)) = listener.accept() {
                let mut reader = BufReader::new(stream);
                let mut line = String::new();
                let mut content_length = 0usize;
                reader.read_line(&mut line).unwrap();
                loop {
                    let mut header = String::new();
                    reader.read_line(&mut header).unwrap();
                    if header == "\r\n" || header == "\n" || header.is_empty() {
                        break;
                    }
                    let lower = header.to_lowercase();
                    if let Some(rest) = lower.strip_prefix("content-length:") {
                        content_length = rest.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0u8; content_length];
                reader.read_exact(&mut body).unwrap();
                let reply = respond(std::str::from_utf8(&body).unwrap());
                let mut stream = reader.into_inner();
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    reply.len(),
                    reply
                );
            }
        });
        (format!("http://{addr}/paraphrase"), handle)
    }
}
