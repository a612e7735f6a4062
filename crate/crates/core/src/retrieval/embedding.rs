//! Text embeddings and cosine similarity.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::retrieval::tokenize;
use crate::scalar::{clamp, Real, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: String,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        (**self).embed(text)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        (**self).embed(text)
    }
}

/// Raw cosine similarity in `[-1, 1]`; zero vectors give 0.
pub fn cosine<S: Real>(a: &[S], b: &[S]) -> S {
    let mut dot = S::zero();
    let mut na = S::zero();
    let mut nb = S::zero();
    for (x, y) in a.iter().zip(b) {
        dot = dot + *x * *y;
        na = na + *x * *x;
        nb = nb + *y * *y;
    }
    if na == S::zero() || nb == S::zero() {
        return S::zero();
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): for identical inputs
    // dot == na and sqrt(na * na) == na exactly, so the result is exactly 1.
    dot / (na * nb).sqrt()
}

/// Similarities are used as non-negative weights, so negatives clamp to 0.
pub fn clamp_similarity<S: Scalar>(raw: S) -> S {
    clamp(raw, S::zero(), S::one())
}

/// Cosine of the two embeddings clamped to `[0, 1]`; exactly 1 when `a == b`.
pub fn semantic_sim(provider: &dyn EmbeddingProvider, a: &str, b: &str) -> Result<f64> {
    if a == b {
        return Ok(1.0);
    }
    let ea = provider.embed(a)?;
    let eb = provider.embed(b)?;
    if ea.dim() != eb.dim() {
        return Err(Error::EmbeddingProvider(format!(
            "dimension mismatch: {} vs {}",
            ea.dim(),
            eb.dim()
        )));
    }
    Ok(clamp_similarity(cosine(&ea.values, &eb.values)))
}

pub const HASHING_DIM: usize = 256;

/// Deterministic offline embedder: character trigrams of each token (with
/// `^`/`$` boundary markers) hashed with signed feature hashing into 256
/// buckets, then L2-normalized.
#[derive(Debug, Clone, Default)]
pub struct HashingEmbedder;

impl HashingEmbedder {
    pub const ID: &'static str = "offline-trigram-256";

    pub fn new() -> Self {
        HashingEmbedder
    }

    fn features(text: &str) -> Vec<String> {
        let mut feats = Vec::new();
        let tokens = tokenize(text);
        let sources: Vec<String> = if tokens.is_empty() {
            let trimmed = text.trim();
            if trimmed.is_empty() {
                vec![text.to_string()]
            } else {
                vec![trimmed.to_string()]
            }
        } else {
            tokens
        };
        for tok in sources {
            let padded: Vec<char> = format!("^{tok}$").chars().collect();
            if padded.len() < 3 {
                feats.push(padded.iter().collect());
                continue;
            }
            for w in padded.windows(3) {
                feats.push(w.iter().collect());
            }
        }
        feats
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashingEmbedder {
    fn provider_id(&self) -> &str {
        Self::ID
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut values = vec![0.0f64; HASHING_DIM];
        for feat in Self::features(text) {
            let h = fnv1a64(feat.as_bytes());
            let bucket = (h % HASHING_DIM as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        } else if !text.is_empty() {
            // Signed collisions cancelled out completely; keep the vector non-zero.
            values[(fnv1a64(text.as_bytes()) % HASHING_DIM as u64) as usize] = 1.0;
        }
        Ok(EmbeddingVector {
            values,
            provider_id: Self::ID.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    /// Header carrying the credential, e.g. `Authorization`.
    pub auth_header: String,
    /// Environment variable holding the credential; the header is omitted when unset.
    pub api_key_env: Option<String>,
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl Default for HttpEmbedderConfig {
    fn default() -> Self {
        HttpEmbedderConfig {
            endpoint: String::new(),
            auth_header: "Authorization".into(),
            api_key_env: None,
            max_retries: 3,
            timeout_secs: 60,
        }
    }
}

/// Posts `{"input": text}` and expects `{"embedding": [...]}` back.
pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    agent: ureq::Agent,
    dim: OnceLock<usize>,
    id: String,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let id = format!("http:{}", config.endpoint);
        HttpEmbedder {
            config,
            agent,
            dim: OnceLock::new(),
            id,
        }
    }

    fn request_once(&self, text: &str) -> std::result::Result<Vec<f64>, (bool, String)> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = self
            .config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
        {
            let value = if self.config.auth_header.eq_ignore_ascii_case("authorization") {
                format!("Bearer {key}")
            } else {
                key
            };
            req = req.header(self.config.auth_header.as_str(), value.as_str());
        }
        let mut resp = req
            .send_json(serde_json::json!({ "input": text }))
            .map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let transient = status == 429 || status >= 500;
            return Err((transient, format!("HTTP status {status}")));
        }
        let body: EmbeddingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("bad embedding response: {e}")))?;
        Ok(body.embedding)
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut attempt = 0;
        let values = loop {
            match self.request_once(text) {
                Ok(v) => break v,
                Err((transient, msg)) => {
                    if !transient || attempt >= self.config.max_retries {
                        return Err(Error::EmbeddingProvider(msg));
                    }
                    std::thread::sleep(Duration::from_millis(200 * (1 << attempt)));
                    attempt += 1;
                }
            }
        };
        if values.is_empty() {
            return Err(Error::EmbeddingProvider("empty embedding".into()));
        }
        let expected = *self.dim.get_or_init(|| values.len());
        if values.len() != expected {
            return Err(Error::EmbeddingProvider(format!(
                "embedding dimension changed from {expected} to {}",
                values.len()
            )));
        }
        Ok(EmbeddingVector {
            values,
            provider_id: self.id.clone(),
        })
    }
}

/// Memoizes another provider keyed by the SHA-256 of the input text, so
/// results do not depend on call order.
pub struct CachedEmbedder<P> {
    inner: P,
    cache: Mutex<HashMap<[u8; 32], EmbeddingVector>>,
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn new(inner: P) -> Self {
        CachedEmbedder {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let key: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        if let Some(hit) = self.cache.lock().expect("embedding cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let v = self.inner.embed(text)?;
        self.cache
            .lock()
            .expect("embedding cache poisoned")
            .insert(key, v.clone());
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_strings_are_one() {
        let p = HashingEmbedder::new();
        assert_eq!(semantic_sim(&p, "creates server", "creates server").unwrap(), 1.0);
        let v = p.embed("creates server").unwrap();
        assert_eq!(cosine(&v.values, &v.values), 1.0);
    }

    #[test]
    fn disjoint_vocabulary_is_near_zero() {
        let p = HashingEmbedder::new();
        // Signed hashing into 256 buckets leaves cross-talk with a standard
        // deviation of about 1/16 between unrelated texts, so not every
        // disjoint pair lands inside 0.05.
        let s = semantic_sim(&p, "start the embedded server", "validate quartz cron expressions").unwrap();
        assert!(s <= 0.05, "{s}");
    }

    #[test]
    fn negative_cosine_clamps_to_zero() {
        assert_eq!(clamp_similarity(-0.2), 0.0);
        let a = [1.0, 0.0];
        let b = [-1.0, 0.2];
        assert!(cosine(&a, &b) < 0.0);
        assert_eq!(clamp_similarity(cosine(&a, &b)), 0.0);
    }

    #[test]
    fn embeddings_are_fixed_dim_and_nonzero() {
        let p = HashingEmbedder::new();
        for text in ["a", "!!!", " ", "createServer(ThreadPool pool)"] {
            let v = p.embed(text).unwrap();
            assert_eq!(v.dim(), HASHING_DIM);
            assert!(v.values.iter().any(|x| *x != 0.0), "{text:?}");
        }
    }

    #[test]
    fn related_strings_score_higher_than_unrelated() {
        let p = HashingEmbedder::new();
        let near = semantic_sim(&p, "create server with thread pool", "creates a server using a thread pool").unwrap();
        let far = semantic_sim(&p, "create server with thread pool", "parse cron expression").unwrap();
        assert!(near > far);
    }

    #[test]
    fn cache_returns_identical_vectors() {
        let p = CachedEmbedder::new(HashingEmbedder::new());
        assert_eq!(p.embed("x y").unwrap(), p.embed("x y").unwrap());
        assert_eq!(p.provider_id(), HashingEmbedder::ID);
    }
}
