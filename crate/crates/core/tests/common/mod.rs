//! Shared helpers for integration tests: synthetic techniques and KB
//! profiles, plus a minimal in-process HTTP service that plays the remote
//! assessment endpoint.

#![allow(dead_code)]

use auditor_core::kb::{DatasetProfile, Domain, FeatureGranularity, KnowledgeBase};
use auditor_core::stix::{Matrix, TechniqueRecord};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub fn technique(id: &str) -> TechniqueRecord {
    TechniqueRecord {
        attack_id: id.to_string(),
        name: format!("Technique {id}"),
        matrices: BTreeSet::from([Matrix::Ics]),
        data_sources: vec!["Network Traffic: Network Traffic Content".to_string()],
        is_subtechnique: id.contains('.'),
        description: format!("Synthetic record for {id}."),
        stix_ids: BTreeSet::from([format!("attack-pattern--{}", id.to_lowercase())]),
    }
}

pub fn technique_map(ids: &[&str]) -> BTreeMap<String, TechniqueRecord> {
    ids.iter()
        .map(|id| (id.to_string(), technique(id)))
        .collect()
}

pub fn single_profile_kb(name: &str) -> KnowledgeBase {
    KnowledgeBase {
        schema_version: "1".to_string(),
        profiles: vec![DatasetProfile {
            name: name.to_string(),
            year: 2024,
            domain: Domain::Hybrid,
            industrial_protocols: vec!["Modbus/TCP".to_string()],
            enterprise_protocols: vec!["HTTPS".to_string()],
            attack_classes: vec!["cyber-physical".to_string()],
            scenario_count: 10,
            feature_granularity: FeatureGranularity::Mixed,
            limitations: vec![],
            annotations: BTreeMap::new(),
        }],
    }
}

/// Technique ids embedded in a request body (the prompt is JSON-escaped, so
/// ids terminate at the next non-id character).
pub fn ids_in_body(body: &str) -> Vec<String> {
    let mut ids = Vec::new();
    let marker = "technique: ";
    let mut rest = body;
    while let Some(pos) = rest.find(marker) {
        rest = &rest[pos + marker.len()..];
        let id: String = rest
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '.')
            .collect();
        if !id.is_empty() {
            ids.push(id);
        }
    }
    ids
}

/// Strict-format response text answering `answer` for every criterion of
/// every technique in the request.
pub fn uniform_answer_text(body: &str, answer: &str) -> String {
    let mut text = String::new();
    for id in ids_in_body(body) {
        text.push_str(&format!(
            "{id}:\nattack_type_present: {answer}\nprotocol_recorded: {answer}\ndomain_match: {answer}\nfeature_sufficiency: {answer}\nexample_adequacy: {answer}\n\n"
        ));
    }
    text
}

/// Handle to a running mock service.
pub struct MockService {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
}

impl MockService {
    pub fn request_count(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> String {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        match stream.read(&mut chunk) {
            Ok(0) => return String::from_utf8_lossy(&buf).to_string(),
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(_) => return String::from_utf8_lossy(&buf).to_string(),
        }
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length = headers
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse::<usize>().ok())?
        })
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(_) => break,
        }
    }
    String::from_utf8_lossy(&buf).to_string()
}

/// Start an HTTP service on a loopback port. `responder` maps each request
/// body to (status, response body); the hit counter counts every request.
pub fn start_mock<F>(responder: F) -> MockService
where
    F: Fn(&str) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let worker_hits = Arc::clone(&hits);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let request = read_request(&mut stream);
            let body_start = request.find("\r\n\r\n").map(|p| p + 4).unwrap_or(0);
            let body = &request[body_start..];
            worker_hits.fetch_add(1, Ordering::SeqCst);
            let (status, response_body) = responder(body);
            let reason = match status {
                200 => "OK",
                400 => "Bad Request",
                429 => "Too Many Requests",
                500 => "Internal Server Error",
                _ => "Status",
            };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response_body}",
                response_body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    MockService {
        url: format!("http://{addr}/assess"),
        hits,
    }
}

/// An address on loopback with nothing listening on it.
pub fn dead_endpoint() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/assess")
}
