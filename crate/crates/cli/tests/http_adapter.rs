//! Exercises the HTTP adapter end to end against a scripted local server:
//! template substitution, response extraction, retries, pacing, the
//! concurrency cap, and the disk cache sitting in front of it all.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use biascope::cache::CachedTranslator;
use biascope::httpsvc::{HttpAdapterConfig, HttpMethod, HttpTranslator};
use biascope_core::service::{Lang, ServiceError, TranslationService};

#[derive(Debug, Clone)]
struct Request {
    method: String,
    path: String,
    headers: String,
    body: String,
    at: Instant,
}

type Responder = dyn Fn(&Request) -> String + Send + Sync;

/// A one-listener HTTP server: serves scripted status codes in order (then
/// 200s), records every request, and tracks how many are in flight at once.
struct Server {
    addr: String,
    requests: Arc<Mutex<Vec<Request>>>,
    max_active: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl Server {
    fn start(statuses: Vec<u16>, delay: Duration, respond: Arc<Responder>) -> Server {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind test server");
        let addr = format!("127.0.0.1:{}", listener.local_addr().unwrap().port());
        let requests: Arc<Mutex<Vec<Request>>> = Arc::default();
        let active = Arc::new(AtomicUsize::new(0));
        let max_active = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let script = Arc::new(Mutex::new(VecDeque::from(statuses)));

        let handle = {
            let (requests, active, max_active, stop) =
                (requests.clone(), active.clone(), max_active.clone(), stop.clone());
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { break };
                    let (requests, active, max_active, script, respond) = (
                        requests.clone(),
                        active.clone(),
                        max_active.clone(),
                        script.clone(),
                        respond.clone(),
                    );
                    thread::spawn(move || {
                        handle_connection(stream, &requests, &active, &max_active, &script, respond.as_ref(), delay);
                    });
                }
            })
        };
        Server { addr, requests, max_active, stop, handle: Some(handle) }
    }

    fn base_url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    fn requests(&self) -> Vec<Request> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // unblock the accept loop
        let _ = TcpStream::connect(&self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(
    stream: TcpStream,
    requests: &Mutex<Vec<Request>>,
    active: &AtomicUsize,
    max_active: &AtomicUsize,
    script: &Mutex<VecDeque<u16>>,
    respond: &Responder,
    delay: Duration,
) {
    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
    max_active.fetch_max(now, Ordering::SeqCst);

    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    if reader.read_line(&mut line).is_ok() && !line.trim().is_empty() {
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or("").to_string();
        let path = parts.next().unwrap_or("").to_string();

        let mut headers = String::new();
        let mut content_length = 0usize;
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header).is_err() || header.trim().is_empty() {
                break;
            }
            if let Some(v) = header.to_ascii_lowercase().strip_prefix("content-length:") {
                content_length = v.trim().parse().unwrap_or(0);
            }
            headers.push_str(&header);
        }
        let mut body = vec![0u8; content_length];
        if content_length > 0 {
            let _ = reader.read_exact(&mut body);
        }
        let request = Request {
            method,
            path,
            headers,
            body: String::from_utf8_lossy(&body).into_owned(),
            at: Instant::now(),
        };

        if !delay.is_zero() {
            thread::sleep(delay);
        }
        let status = script.lock().unwrap().pop_front().unwrap_or(200);
        let body = if status == 200 {
            respond(&request)
        } else {
            String::from("{\"error\": \"scripted failure\"}")
        };
        let response = format!(
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len(),
        );
        requests.lock().unwrap().push(request);
        let mut stream = reader.into_inner();
        let _ = stream.write_all(response.as_bytes());
        let _ = stream.flush();
    }

    active.fetch_sub(1, Ordering::SeqCst);
}

/// Responds with the nested shape `data.translations.0.translatedText`,
/// echoing the raw query/body so tests can assert on substitution.
fn nested_echo() -> Arc<Responder> {
    Arc::new(|req: &Request| {
        let echoed = if req.method == "GET" { &req.path } else { &req.body };
        serde_json::json!({
            "data": {"translations": [{"translatedText": format!("echo:{echoed}")}]}
        })
        .to_string()
    })
}

fn config(server: &Server, template: &str) -> HttpAdapterConfig {
    HttpAdapterConfig {
        base_url: server.base_url("/v2/translate"),
        http_method: HttpMethod::Get,
        request_template: template.to_string(),
        response_path: String::from("data.translations.0.translatedText"),
        key_env: None,
        min_interval_ms: 0,
        max_retries: 0,
        max_concurrency: 1,
    }
}

fn translator(cfg: HttpAdapterConfig) -> HttpTranslator {
    HttpTranslator::new(String::from("svc"), Vec::new(), cfg).expect("build translator")
}

#[test]
fn get_substitutes_placeholders_and_walks_the_response_path() {
    let server = Server::start(Vec::new(), Duration::ZERO, nested_echo());
    std::env::set_var("BIASCOPE_TEST_GET_KEY", "sekrit k");
    let mut cfg = config(&server, "?q={text}&source={source}&target={target}&key={key}");
    cfg.key_env = Some(String::from("BIASCOPE_TEST_GET_KEY"));
    let svc = translator(cfg);

    let out = svc.translate("He is a Baker & Co.", &Lang::new("en"), &Lang::new("fr")).unwrap();

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].method, "GET");
    assert_eq!(
        reqs[0].path,
        "/v2/translate?q=He+is+a+Baker+%26+Co.&source=en&target=fr&key=sekrit+k"
    );
    assert_eq!(out, format!("echo:{}", reqs[0].path));
}

#[test]
fn post_sends_escaped_json_and_a_content_type() {
    let server = Server::start(Vec::new(), Duration::ZERO, nested_echo());
    let mut cfg = config(&server, r#"{"q": "{text}", "source": "{source}", "target": "{target}"}"#);
    cfg.http_method = HttpMethod::Post;
    let svc = translator(cfg);

    let tricky = "He said \"hi\".\nShe left.";
    let out = svc.translate(tricky, &Lang::new("en"), &Lang::new("fr")).unwrap();

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].method, "POST");
    assert!(
        reqs[0].headers.to_ascii_lowercase().contains("content-type: application/json"),
        "headers were: {}",
        reqs[0].headers
    );
    let body: serde_json::Value = serde_json::from_str(&reqs[0].body).expect("body is valid JSON");
    assert_eq!(body["q"], tricky);
    assert_eq!(body["source"], "en");
    assert_eq!(out, format!("echo:{}", reqs[0].body));
}

#[test]
fn server_errors_are_retried_until_the_script_clears() {
    let server = Server::start(vec![500, 500], Duration::ZERO, nested_echo());
    let mut cfg = config(&server, "?q={text}");
    cfg.max_retries = 3;
    let svc = translator(cfg);

    svc.translate("x", &Lang::new("en"), &Lang::new("fr")).unwrap();
    assert_eq!(server.requests().len(), 3, "two failures, then the success");
}

#[test]
fn exhausted_retries_surface_a_transport_error() {
    let server = Server::start(vec![500, 500, 500, 500], Duration::ZERO, nested_echo());
    let mut cfg = config(&server, "?q={text}");
    cfg.max_retries = 1;
    let svc = translator(cfg);

    let err = svc.translate("x", &Lang::new("en"), &Lang::new("fr")).unwrap_err();
    assert!(err.is_transport(), "got {err:?}");
    assert!(err.to_string().contains("giving up after 2 attempt(s)"), "got {err}");
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn rate_limit_responses_are_retried_but_client_errors_are_not() {
    let server = Server::start(vec![429], Duration::ZERO, nested_echo());
    let mut cfg = config(&server, "?q={text}");
    cfg.max_retries = 2;
    let svc = translator(cfg);
    svc.translate("x", &Lang::new("en"), &Lang::new("fr")).unwrap();
    assert_eq!(server.requests().len(), 2, "the 429 is retried once");

    let server = Server::start(vec![404], Duration::ZERO, nested_echo());
    let mut cfg = config(&server, "?q={text}");
    cfg.max_retries = 2;
    let svc = translator(cfg);
    let err = svc.translate("x", &Lang::new("en"), &Lang::new("fr")).unwrap_err();
    assert!(matches!(err, ServiceError::Transport { .. }), "got {err:?}");
    assert!(err.to_string().contains("404"), "got {err}");
    assert_eq!(server.requests().len(), 1, "client errors fail fast");
}

#[test]
fn request_starts_respect_the_minimum_interval() {
    let server = Server::start(Vec::new(), Duration::ZERO, nested_echo());
    let mut cfg = config(&server, "?q={text}");
    cfg.min_interval_ms = 50;
    let svc = translator(cfg);

    for text in ["a", "b", "c", "d"] {
        svc.translate(text, &Lang::new("en"), &Lang::new("fr")).unwrap();
    }
    let reqs = server.requests();
    assert_eq!(reqs.len(), 4);
    for pair in reqs.windows(2) {
        let gap = pair[1].at.duration_since(pair[0].at);
        assert!(gap >= Duration::from_millis(40), "requests only {gap:?} apart");
    }
}

#[test]
fn in_flight_requests_respect_the_concurrency_cap() {
    let server = Server::start(Vec::new(), Duration::from_millis(100), nested_echo());
    let mut cfg = config(&server, "?q={text}");
    cfg.max_concurrency = 2;
    let svc = Arc::new(translator(cfg));

    let mut handles = Vec::new();
    for i in 0..6 {
        let svc = svc.clone();
        handles.push(thread::spawn(move || {
            svc.translate(&format!("text {i}"), &Lang::new("en"), &Lang::new("fr")).unwrap();
        }));
    }
    for handle in handles {
        handle.join().unwrap();
    }
    assert_eq!(server.requests().len(), 6);
    let peak = server.max_active.load(Ordering::SeqCst);
    assert!(peak <= 2, "server saw {peak} requests in flight");
}

#[test]
fn the_disk_cache_prevents_repeat_requests() {
    let server = Server::start(Vec::new(), Duration::ZERO, nested_echo());
    let dir = tempfile::tempdir().unwrap();
    let svc = CachedTranslator::new(
        translator(config(&server, "?q={text}")),
        dir.path().to_path_buf(),
    );

    let (en, fr) = (Lang::new("en"), Lang::new("fr"));
    let first = svc.translate("He is a Chef.", &en, &fr).unwrap();
    let second = svc.translate("He is a Chef.", &en, &fr).unwrap();
    assert_eq!(first, second);
    assert_eq!(server.requests().len(), 1, "the repeat was served from disk");

    let third = svc.translate("She is a Chef.", &en, &fr).unwrap();
    assert_ne!(first, third);
    assert_eq!(server.requests().len(), 2);
}
