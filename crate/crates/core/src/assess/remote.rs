//! Remote model-backed assessor with response caching, batching, retry,
//! and rate limiting.
//!
//! Requests carry a fixed prompt template rendered over one dataset profile
//! and a batch of techniques; responses must follow a strict per-technique
//! answer format. Every (technique, dataset) verdict is cached under a key
//! derived from the model name and the single-technique prompt, so warm-cache
//! runs issue zero requests and replay byte-identically. The API credential
//! is read from an environment variable and is never logged or cached.

use crate::assess::{
    build_record, Answer, AssessmentRecord, AssessmentSet, CriteriaVector, LabelThresholds,
    CRITERIA,
};
use crate::kb::{DatasetProfile, KnowledgeBase};
use crate::stix::TechniqueRecord;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Provider wire formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adapter {
    /// POST `{"model", "temperature", "prompt"}` -> `{"text": …}`.
    #[default]
    Generic,
    Anthropic,
    Gemini,
}

impl Adapter {
    fn default_api_key_env(&self) -> &'static str {
        match self {
            Adapter::Generic => "AUDITOR_API_KEY",
            Adapter::Anthropic => "ANTHROPIC_API_KEY",
            Adapter::Gemini => "GEMINI_API_KEY",
        }
    }
}

/// Requests allowed per time window; enforced as minimum request spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLimit {
    pub requests: u32,
    pub per_seconds: f64,
}

impl Default for RateLimit {
    fn default() -> Self {
        RateLimit {
            requests: 30,
            per_seconds: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelServiceConfig {
    pub endpoint: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub rate_limit: RateLimit,
    pub cache_dir: PathBuf,
    #[serde(default)]
    pub adapter: Adapter,
    /// Name of the environment variable holding the API credential;
    /// defaults per adapter. Only the name is configurable — the value is
    /// read from the environment at request time.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

fn default_temperature() -> f64 {
    0.1
}
fn default_batch_size() -> usize {
    5
}
fn default_max_retries() -> u32 {
    2
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("invalid model service config: {0}")]
    InvalidConfig(String),
    #[error("cache I/O failure at {path}: {source}")]
    CacheIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("HTTP client construction failed: {0}")]
    Client(String),
}

/// Outcome of a remote assessment pass. `unavailable` marks a run that fell
/// back to unassessed records after exhausting retries; callers surface it
/// as a distinct exit status while reports still get written.
#[derive(Debug)]
pub struct RemoteOutcome {
    pub records: AssessmentSet,
    pub requests_issued: usize,
    pub malformed_batches: usize,
    pub unavailable: bool,
}

pub const PROMPT_TEMPLATE: &str = "You are auditing one network intrusion detection dataset for coverage of adversary techniques.\n\nDataset profile:\n{profile}\n\nTechniques under assessment:\n{techniques}\nAnswer five questions for each technique above:\n1. attack_type_present: does the dataset already contain a comparable attack type?\n2. protocol_recorded: does it record the protocol the technique relies on?\n3. domain_match: was it captured in the same operational domain?\n4. feature_sufficiency: does it expose the packet or process features needed to detect the attack?\n5. example_adequacy: does it offer more than token examples of the attack?\n\nRespond with one block per technique and nothing else, in exactly this format:\n<technique id>:\nattack_type_present: <yes|no|unknown>\nprotocol_recorded: <yes|no|unknown>\ndomain_match: <yes|no|unknown>\nfeature_sufficiency: <yes|no|unknown>\nexample_adequacy: <yes|no|unknown>\n";

/// Hex SHA-256 of the prompt template; embedded in report metadata so
/// results cite the template version they were produced with.
pub fn prompt_template_hash() -> String {
    hex::encode(Sha256::digest(PROMPT_TEMPLATE.as_bytes()))
}

fn render_profile(profile: &DatasetProfile) -> String {
    let list = |items: &[String]| {
        if items.is_empty() {
            "(none)".to_string()
        } else {
            items.join(", ")
        }
    };
    format!(
        "name: {}\nyear: {}\ndomain: {:?}\nindustrial_protocols: {}\nenterprise_protocols: {}\nattack_classes: {}\nscenario_count: {}\nfeature_granularity: {:?}\nlimitations: {}",
        profile.name,
        profile.year,
        profile.domain,
        list(&profile.industrial_protocols),
        list(&profile.enterprise_protocols),
        list(&profile.attack_classes),
        profile.scenario_count,
        profile.feature_granularity,
        list(&profile.limitations),
    )
}

fn render_technique(technique: &TechniqueRecord) -> String {
    format!(
        "technique: {}\nname: {}\ndescription: {}\ndata_sources: {}\n",
        technique.attack_id,
        technique.name,
        technique.description,
        if technique.data_sources.is_empty() {
            "(none)".to_string()
        } else {
            technique.data_sources.join(", ")
        },
    )
}

/// Render the full prompt for one batch against one profile.
pub fn render_prompt(batch: &[&TechniqueRecord], profile: &DatasetProfile) -> String {
    let techniques = batch
        .iter()
        .map(|t| render_technique(t))
        .collect::<Vec<_>>()
        .join("\n");
    PROMPT_TEMPLATE
        .replace("{profile}", &render_profile(profile))
        .replace("{techniques}", &techniques)
}

/// Cache key for one (technique, dataset) pair: SHA-256 over the model name
/// and the single-technique prompt, which embeds the technique text and the
/// full profile rendering.
pub fn cache_key(
    model_name: &str,
    technique: &TechniqueRecord,
    profile: &DatasetProfile,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_name.as_bytes());
    hasher.update(b"\n");
    hasher.update(render_prompt(&[technique], profile).as_bytes());
    hex::encode(hasher.finalize())
}

fn parse_answer(text: &str) -> Option<Answer> {
    match text.trim().to_lowercase().as_str() {
        "yes" => Some(Answer::Yes),
        "no" => Some(Answer::No),
        "unknown" => Some(Answer::Unknown),
        _ => None,
    }
}

/// Parse a strict-format response covering exactly the batch's techniques.
/// Any deviation (extra text, missing block, reordered criteria) fails.
pub fn parse_response(
    text: &str,
    batch: &[&TechniqueRecord],
) -> Result<BTreeMap<String, CriteriaVector>, String> {
    let expected: BTreeMap<&str, ()> = batch.iter().map(|t| (t.attack_id.as_str(), ())).collect();
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut out: BTreeMap<String, CriteriaVector> = BTreeMap::new();
    while let Some(header) = lines.next() {
        let Some(id) = header.strip_suffix(':') else {
            return Err(format!("unexpected line {header:?}"));
        };
        let id = id.trim();
        if !expected.contains_key(id) {
            return Err(format!("unexpected technique block {id:?}"));
        }
        if out.contains_key(id) {
            return Err(format!("duplicate technique block {id:?}"));
        }
        let mut answers = [Answer::Unknown; 5];
        for (slot, criterion) in CRITERIA.iter().enumerate() {
            let line = lines
                .next()
                .ok_or_else(|| format!("truncated block for {id:?}"))?;
            let Some((name, value)) = line.split_once(':') else {
                return Err(format!("malformed criterion line {line:?}"));
            };
            if name.trim() != *criterion {
                return Err(format!(
                    "expected criterion {criterion:?} for {id:?}, found {:?}",
                    name.trim()
                ));
            }
            answers[slot] = parse_answer(value)
                .ok_or_else(|| format!("unparseable answer {value:?} for {id:?}"))?;
        }
        out.insert(id.to_string(), CriteriaVector::from_answers(answers));
    }
    if out.len() != batch.len() {
        return Err(format!(
            "response covered {} of {} techniques",
            out.len(),
            batch.len()
        ));
    }
    Ok(out)
}

struct RateLimiter {
    min_interval: Duration,
    last: Option<Instant>,
}

impl RateLimiter {
    fn new(limit: &RateLimit) -> Self {
        let min_interval = if limit.requests == 0 || limit.per_seconds <= 0.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(limit.per_seconds / f64::from(limit.requests))
        };
        RateLimiter {
            min_interval,
            last: None,
        }
    }

    fn wait(&mut self) {
        if let Some(last) = self.last {
            let elapsed = last.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        self.last = Some(Instant::now());
    }
}

enum RequestFailure {
    /// Timeouts, connection errors, 429, 5xx — worth retrying.
    Retryable(String),
    /// Anything else (auth failures, bad request) — retrying cannot help.
    Fatal(String),
}

fn extract_text(adapter: Adapter, body: &str) -> Result<String, String> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| format!("response body is not JSON: {e}"))?;
    let text = match adapter {
        Adapter::Generic => value.get("text").and_then(Value::as_str),
        Adapter::Anthropic => value.pointer("/content/0/text").and_then(Value::as_str),
        Adapter::Gemini => value
            .pointer("/candidates/0/content/parts/0/text")
            .and_then(Value::as_str),
    };
    text.map(String::from)
        .ok_or_else(|| "response body lacks the expected text field".to_string())
}

fn send_once(
    client: &reqwest::blocking::Client,
    config: &ModelServiceConfig,
    api_key: Option<&str>,
    prompt: &str,
) -> Result<String, RequestFailure> {
    let mut request = match config.adapter {
        Adapter::Generic => {
            let mut r = client.post(&config.endpoint).json(&json!({
                "model": config.model_name,
                "temperature": config.temperature,
                "prompt": prompt,
            }));
            if let Some(key) = api_key {
                r = r.bearer_auth(key);
            }
            r
        }
        Adapter::Anthropic => {
            let mut r = client.post(&config.endpoint).json(&json!({
                "model": config.model_name,
                "max_tokens": 2048,
                "temperature": config.temperature,
                "messages": [{"role": "user", "content": prompt}],
            }));
            r = r.header("anthropic-version", "2023-06-01");
            if let Some(key) = api_key {
                r = r.header("x-api-key", key);
            }
            r
        }
        Adapter::Gemini => {
            let url = match api_key {
                Some(key) => format!("{}?key={key}", config.endpoint),
                None => config.endpoint.clone(),
            };
            client.post(url).json(&json!({
                "generationConfig": {"temperature": config.temperature},
                "contents": [{"parts": [{"text": prompt}]}],
            }))
        }
    };
    request = request.timeout(Duration::from_secs(30));

    let response = request
        .send()
        .map_err(|e| RequestFailure::Retryable(format!("request failed: {e}")))?;
    let status = response.status();
    let body = response
        .text()
        .map_err(|e| RequestFailure::Retryable(format!("reading response failed: {e}")))?;
    if status.is_success() {
        Ok(body)
    } else if status.as_u16() == 429 || status.is_server_error() {
        Err(RequestFailure::Retryable(format!("HTTP {status}")))
    } else {
        Err(RequestFailure::Fatal(format!("HTTP {status}")))
    }
}

fn send_with_retries(
    client: &reqwest::blocking::Client,
    config: &ModelServiceConfig,
    api_key: Option<&str>,
    prompt: &str,
    limiter: &mut RateLimiter,
    requests_issued: &mut usize,
) -> Result<String, String> {
    let mut attempt = 0;
    loop {
        limiter.wait();
        *requests_issued += 1;
        match send_once(client, config, api_key, prompt) {
            Ok(body) => return Ok(body),
            Err(RequestFailure::Fatal(reason)) => return Err(reason),
            Err(RequestFailure::Retryable(reason)) => {
                if attempt >= config.max_retries {
                    return Err(reason);
                }
                let backoff = Duration::from_millis(100 * (1 << attempt.min(6)));
                log::warn!("remote request failed ({reason}); retrying in {backoff:?}");
                std::thread::sleep(backoff);
                attempt += 1;
            }
        }
    }
}

fn cache_path(cache_dir: &Path, key: &str) -> PathBuf {
    cache_dir.join(format!("{key}.json"))
}

fn load_cached(cache_dir: &Path, key: &str) -> Option<AssessmentRecord> {
    let path = cache_path(cache_dir, key);
    let text = std::fs::read_to_string(&path).ok()?;
    match serde_json::from_str(&text) {
        Ok(record) => Some(record),
        Err(e) => {
            log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
            None
        }
    }
}

/// Atomic per-entry write: temp file in the cache dir, then rename.
fn store_cached(cache_dir: &Path, key: &str, record: &AssessmentRecord) -> Result<(), RemoteError> {
    let path = cache_path(cache_dir, key);
    let tmp = cache_dir.join(format!("{key}.json.tmp.{}", std::process::id()));
    let body = serde_json::to_string_pretty(record).expect("record is serializable");
    std::fs::write(&tmp, body).map_err(|source| RemoteError::CacheIo {
        path: tmp.clone(),
        source,
    })?;
    std::fs::rename(&tmp, &path).map_err(|source| RemoteError::CacheIo { path, source })
}

fn archive_malformed(cache_dir: &Path, raw: &str) {
    let dir = cache_dir.join("malformed");
    if let Err(e) = std::fs::create_dir_all(&dir) {
        log::warn!("cannot create malformed-response archive: {e}");
        return;
    }
    let digest = hex::encode(Sha256::digest(raw.as_bytes()));
    let path = dir.join(format!("{}.txt", &digest[..16]));
    if let Err(e) = std::fs::write(&path, raw) {
        log::warn!("cannot archive malformed response: {e}");
    }
}

/// Assess every technique against every KB profile through the remote
/// service, reusing cached verdicts. Misses are sent in batches of
/// `batch_size`; after retries are exhausted the remaining pairs are
/// recorded all-Unknown with an "unassessed" rationale and the outcome is
/// marked unavailable, so the pipeline can finish and flag the run.
pub fn assess_remote(
    techniques: &BTreeMap<String, TechniqueRecord>,
    kb: &KnowledgeBase,
    config: &ModelServiceConfig,
    thresholds: &LabelThresholds,
) -> Result<RemoteOutcome, RemoteError> {
    if config.batch_size < 1 {
        return Err(RemoteError::InvalidConfig("batch_size must be >= 1".into()));
    }
    if config.temperature.is_nan() || config.temperature < 0.0 {
        return Err(RemoteError::InvalidConfig(
            "temperature must be >= 0".into(),
        ));
    }
    std::fs::create_dir_all(&config.cache_dir).map_err(|source| RemoteError::CacheIo {
        path: config.cache_dir.clone(),
        source,
    })?;

    let assessor_id = format!("remote/{}", config.model_name);
    let env_name = config
        .api_key_env
        .clone()
        .unwrap_or_else(|| config.adapter.default_api_key_env().to_string());
    let api_key = std::env::var(&env_name).ok();
    if api_key.is_none() {
        log::debug!("environment variable {env_name} not set; sending unauthenticated requests");
    }

    let client = reqwest::blocking::Client::builder()
        .build()
        .map_err(|e| RemoteError::Client(e.to_string()))?;
    let mut limiter = RateLimiter::new(&config.rate_limit);

    let mut records = AssessmentSet::new();
    let mut requests_issued = 0usize;
    let mut malformed_batches = 0usize;
    let mut unavailable = false;

    for profile in &kb.profiles {
        // Cache pass: collect misses in deterministic technique order.
        let mut misses: Vec<(&TechniqueRecord, String)> = Vec::new();
        for technique in techniques.values() {
            let key = cache_key(&config.model_name, technique, profile);
            if let Some(record) = load_cached(&config.cache_dir, &key) {
                records.insert((profile.name.clone(), technique.attack_id.clone()), record);
            } else {
                misses.push((technique, key));
            }
        }

        for batch in misses.chunks(config.batch_size) {
            let batch_techniques: Vec<&TechniqueRecord> = batch.iter().map(|(t, _)| *t).collect();
            let record_unassessed = |records: &mut AssessmentSet| {
                for (technique, key) in batch {
                    let record = build_record(
                        &technique.attack_id,
                        &profile.name,
                        &assessor_id,
                        CriteriaVector::all(Answer::Unknown),
                        "unassessed: service unavailable".into(),
                        key.clone(),
                        thresholds,
                    );
                    records.insert((profile.name.clone(), technique.attack_id.clone()), record);
                }
            };
            if unavailable {
                record_unassessed(&mut records);
                continue;
            }

            let prompt = render_prompt(&batch_techniques, profile);
            match send_with_retries(
                &client,
                config,
                api_key.as_deref(),
                &prompt,
                &mut limiter,
                &mut requests_issued,
            ) {
                Err(reason) => {
                    log::error!(
                        "remote service unavailable for {:?}: {reason}; remaining pairs recorded as unassessed",
                        profile.name
                    );
                    unavailable = true;
                    record_unassessed(&mut records);
                }
                Ok(body) => {
                    let parsed = extract_text(config.adapter, &body)
                        .and_then(|text| parse_response(&text, &batch_techniques));
                    match parsed {
                        Ok(vectors) => {
                            for (technique, key) in batch {
                                let criteria = vectors[&technique.attack_id];
                                let record = build_record(
                                    &technique.attack_id,
                                    &profile.name,
                                    &assessor_id,
                                    criteria,
                                    "remote assessment".into(),
                                    key.clone(),
                                    thresholds,
                                );
                                store_cached(&config.cache_dir, key, &record)?;
                                records.insert(
                                    (profile.name.clone(), technique.attack_id.clone()),
                                    record,
                                );
                            }
                        }
                        Err(reason) => {
                            log::warn!(
                                "malformed response for {:?} batch: {reason}; recording all-Unknown",
                                profile.name
                            );
                            malformed_batches += 1;
                            archive_malformed(&config.cache_dir, &body);
                            for (technique, key) in batch {
                                let record = build_record(
                                    &technique.attack_id,
                                    &profile.name,
                                    &assessor_id,
                                    CriteriaVector::all(Answer::Unknown),
                                    "malformed response; raw archived".into(),
                                    key.clone(),
                                    thresholds,
                                );
                                records.insert(
                                    (profile.name.clone(), technique.attack_id.clone()),
                                    record,
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(RemoteOutcome {
        records,
        requests_issued,
        malformed_batches,
        unavailable,
    })
}
