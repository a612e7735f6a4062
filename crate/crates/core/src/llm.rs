//! Chat-style completion providers: live HTTP, replay from a hash-keyed
//! store, and a recorder that fills such a store from a live provider.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system: Option<String>,
    pub user: String,
    pub temperature: f64,
    pub model_id: String,
    pub max_output_tokens: Option<u32>,
}

impl CompletionRequest {
    /// Request at temperature 0.
    pub fn new(model_id: impl Into<String>, system: Option<String>, user: impl Into<String>) -> Self {
        CompletionRequest {
            system,
            user: user.into(),
            temperature: 0.0,
            model_id: model_id.into(),
            max_output_tokens: None,
        }
    }

    /// Content hash of `(system, user)`; the replay key.
    pub fn hash(&self) -> String {
        request_hash(self.system.as_deref(), &self.user)
    }
}

/// Hex SHA-256 of the JSON array `[system, user]` (`system` may be null).
pub fn request_hash(system: Option<&str>, user: &str) -> String {
    let key = serde_json::json!([system, user]);
    hex::encode(Sha256::digest(key.to_string().as_bytes()))
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String>;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for &P {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        (**self).complete(req)
    }
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for Box<P> {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        (**self).complete(req)
    }
}

/// One replay store file, `<hash>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub system: Option<String>,
    pub user: String,
    pub response: String,
}

impl ReplayEntry {
    pub fn hash(&self) -> String {
        request_hash(self.system.as_deref(), &self.user)
    }
}

fn write_entry(dir: &Path, entry: &ReplayEntry) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(format!("{}.json", entry.hash()));
    let mut text = serde_json::to_string_pretty(entry)
        .map_err(|e| Error::Provider(format!("cannot serialize replay entry: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Returns canned responses keyed by request hash; fails on a miss.
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    store: BTreeMap<String, String>,
}

impl ReplayProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        let mut p = Self::new();
        for e in entries {
            p.insert(e);
        }
        p
    }

    /// Loads every `*.json` entry of a replay directory.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut p = Self::new();
        let listing = fs::read_dir(dir).map_err(|e| Error::io(format!("reading replay dir {}", dir.display()), e))?;
        let mut paths: Vec<PathBuf> = listing
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let entry: ReplayEntry = serde_json::from_str(&text)
                .map_err(|e| Error::Provider(format!("bad replay entry {}: {e}", path.display())))?;
            p.insert(entry);
        }
        Ok(p)
    }

    pub fn insert(&mut self, entry: ReplayEntry) {
        self.store.insert(entry.hash(), entry.response);
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }
}

impl CompletionProvider for ReplayProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        let hash = req.hash();
        self.store
            .get(&hash)
            .cloned()
            .ok_or(Error::ReplayMiss { hash })
    }
}

/// Forwards to a live provider and writes every exchange into a replay
/// directory.
pub struct RecordingProvider<P> {
    inner: P,
    dir: PathBuf,
    recorded: RwLock<Vec<ReplayEntry>>,
}

impl<P: CompletionProvider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        RecordingProvider {
            inner,
            dir: dir.into(),
            recorded: RwLock::new(Vec::new()),
        }
    }

    pub fn recorded(&self) -> Vec<ReplayEntry> {
        self.recorded.read().expect("recording lock poisoned").clone()
    }
}

impl<P: CompletionProvider> CompletionProvider for RecordingProvider<P> {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        let response = self.inner.complete(req)?;
        let entry = ReplayEntry {
            system: req.system.clone(),
            user: req.user.clone(),
            response: response.clone(),
        };
        write_entry(&self.dir, &entry)?;
        self.recorded.write().expect("recording lock poisoned").push(entry);
        Ok(response)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    /// Environment variable holding the API key; sent as a bearer token.
    pub api_key_env: Option<String>,
    /// Dot path to the completion text in the response JSON.
    pub response_path: String,
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        HttpProviderConfig {
            endpoint: String::new(),
            api_key_env: None,
            response_path: "choices.0.message.content".into(),
            max_retries: 3,
            timeout_secs: 300,
        }
    }
}

/// Posts `{"model", "temperature", "messages"}` and reads the text at the
/// configured response path.
pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

/// Follows a dot path (`choices.0.message.content`) through JSON objects
/// and arrays.
pub fn lookup_path<'v>(value: &'v serde_json::Value, path: &str) -> Option<&'v serde_json::Value> {
    path.split('.')
        .filter(|s| !s.is_empty())
        .try_fold(value, |v, seg| match v {
            serde_json::Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
            serde_json::Value::Object(map) => map.get(seg),
            _ => None,
        })
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider { config, agent }
    }

    fn body(req: &CompletionRequest) -> serde_json::Value {
        let mut messages = Vec::new();
        if let Some(system) = &req.system {
            messages.push(serde_json::json!({"role": "system", "content": system}));
        }
        messages.push(serde_json::json!({"role": "user", "content": req.user}));
        let mut body = serde_json::json!({
            "model": req.model_id,
            "temperature": req.temperature,
            "messages": messages,
        });
        if let Some(max) = req.max_output_tokens {
            body["max_tokens"] = serde_json::json!(max);
        }
        body
    }

    /// `Err((transient, message))` on failure.
    fn attempt(&self, body: &serde_json::Value) -> std::result::Result<String, (bool, String)> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = self
            .config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
        {
            request = request.header("Authorization", format!("Bearer {key}").as_str());
        }
        let mut resp = request
            .send_json(body)
            .map_err(|e| (true, format!("request failed: {e}")))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err((status == 429 || status >= 500, format!("HTTP status {status}")));
        }
        let json: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("response is not JSON: {e}")))?;
        match lookup_path(&json, &self.config.response_path) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            _ => Err((
                false,
                format!("no string at response path {}", self.config.response_path),
            )),
        }
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        let body = Self::body(req);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((transient, msg)) => {
                    if !transient || attempt >= self.config.max_retries {
                        return Err(Error::Provider(msg));
                    }
                    std::thread::sleep(Duration::from_millis(250 * (1 << attempt)));
                    attempt += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(user: &str) -> CompletionRequest {
        CompletionRequest::new("m", None, user)
    }

    #[test]
    fn replay_returns_stored_response() {
        let p = ReplayProvider::from_entries([ReplayEntry {
            system: None,
            user: "p".into(),
            response: "```package a;```".into(),
        }]);
        assert_eq!(p.complete(&req("p")).unwrap(), "```package a;```");
    }

    #[test]
    fn replay_miss_names_the_hash() {
        let p = ReplayProvider::new();
        match p.complete(&req("q")) {
            Err(Error::ReplayMiss { hash }) => assert_eq!(hash, request_hash(None, "q")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn system_prompt_changes_the_hash() {
        assert_ne!(request_hash(None, "u"), request_hash(Some(""), "u"));
        assert_ne!(request_hash(Some("a"), "u"), request_hash(Some("b"), "u"));
    }

    #[test]
    fn temperature_defaults_to_zero() {
        assert_eq!(req("x").temperature, 0.0);
    }

    #[test]
    fn dot_paths() {
        let v = serde_json::json!({"choices": [{"message": {"content": "hi"}}]});
        assert_eq!(lookup_path(&v, "choices.0.message.content"), Some(&serde_json::json!("hi")));
        assert_eq!(lookup_path(&v, "choices.1.message"), None);
    }

    #[test]
    fn recording_then_replay_round_trips() {
        struct Echo;
        impl CompletionProvider for Echo {
            fn complete(&self, req: &CompletionRequest) -> Result<String> {
                Ok(format!("echo:{}", req.user))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingProvider::new(Echo, dir.path());
        assert_eq!(rec.complete(&req("one")).unwrap(), "echo:one");
        let replay = ReplayProvider::from_dir(dir.path()).unwrap();
        assert_eq!(replay.len(), 1);
        assert_eq!(replay.complete(&req("one")).unwrap(), "echo:one");
    }
}
