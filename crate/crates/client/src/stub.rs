//! A minimal in-process chat-completion endpoint for tests and offline
//! dry runs. Speaks just enough HTTP/1.1 for one JSON POST per
//! connection and counts every request it serves.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::wire::{
    ChatRequest, ChatResponse, Choice, ChoiceLogprobs, PositionLogprobs, ResponseMessage,
    TokenLogprob,
};

pub type Handler = dyn Fn(&ChatRequest) -> StubReply + Send + Sync;

/// What the stub sends back for one request.
#[derive(Debug, Clone)]
pub enum StubReply {
    Ok(ChatResponse),
    /// An HTTP error status with a plain body.
    Error(u16, String),
}

/// Builds a response carrying generated text only.
pub fn text_response(text: &str) -> ChatResponse {
    ChatResponse {
        choices: vec![Choice {
            message: ResponseMessage {
                content: text.to_string(),
            },
            logprobs: None,
        }],
    }
}

/// Builds a response with text plus first-position top log-probs, given
/// (token, probability) pairs.
pub fn logprob_response(text: &str, top: &[(&str, f64)]) -> ChatResponse {
    let top_logprobs: Vec<TokenLogprob> = top
        .iter()
        .map(|(token, p)| TokenLogprob {
            token: (*token).to_string(),
            logprob: p.ln(),
        })
        .collect();
    ChatResponse {
        choices: vec![Choice {
            message: ResponseMessage {
                content: text.to_string(),
            },
            logprobs: Some(ChoiceLogprobs {
                content: vec![PositionLogprobs {
                    token: top
                        .first()
                        .map(|(t, _)| (*t).to_string())
                        .unwrap_or_default(),
                    logprob: top.first().map(|(_, p)| p.ln()).unwrap_or(0.0),
                    top_logprobs,
                }],
            }),
        }],
    }
}

pub struct StubServer {
    addr: SocketAddr,
    requests: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds to an ephemeral localhost port and serves until dropped.
    pub fn start(handler: Arc<Handler>) -> std::io::Result<StubServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));

        let thread_requests = Arc::clone(&requests);
        let thread_shutdown = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let handler = Arc::clone(&handler);
                let requests = Arc::clone(&thread_requests);
                std::thread::spawn(move || {
                    let _ = serve_connection(stream, &handler, &requests);
                });
            }
        });

        Ok(StubServer {
            addr,
            requests,
            shutdown,
            handle: Some(handle),
        })
    }

    /// Serves a fixed generated text for every request.
    pub fn with_fixed_text(text: &str) -> std::io::Result<StubServer> {
        let text = text.to_string();
        StubServer::start(Arc::new(move |_req| StubReply::Ok(text_response(&text))))
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests served so far (cache hits on the client never reach us).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_connection(
    mut stream: TcpStream,
    handler: &Arc<Handler>,
    requests: &AtomicUsize,
) -> std::io::Result<()> {
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        buffer.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_header_end(&buffer) {
            break pos;
        }
        if buffer.len() > 1 << 20 {
            return Ok(());
        }
    };

    let headers = String::from_utf8_lossy(&buffer[..header_end]).to_string();
    let content_length = headers
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            name.trim()
                .eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse::<usize>().ok())?
        })
        .unwrap_or(0);

    let body_start = header_end + 4;
    while buffer.len() < body_start + content_length {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        buffer.extend_from_slice(&chunk[..n]);
    }
    let body = &buffer[body_start..(body_start + content_length).min(buffer.len())];

    requests.fetch_add(1, Ordering::SeqCst);
    let reply = match serde_json::from_slice::<ChatRequest>(body) {
        Ok(request) => handler(&request),
        Err(e) => StubReply::Error(400, format!("bad request: {e}")),
    };

    let (status, payload) = match reply {
        StubReply::Ok(response) => (
            "200 OK".to_string(),
            serde_json::to_string(&response).expect("response serializes"),
        ),
        StubReply::Error(code, body) => (format!("{code} Error"), body),
    };
    let message = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    stream.write_all(message.as_bytes())?;
    stream.flush()
}

fn find_header_end(buffer: &[u8]) -> Option<usize> {
    buffer.windows(4).position(|w| w == b"\r\n\r\n")
}
