//! Sentence embeddings for demonstration selection.
//!
//! The default [`HashingEmbedder`] is an offline bag-of-tokens feature
//! hasher: text is lower-cased and split into maximal alphanumeric runs, with
//! every CJK ideograph as its own token. Each token is hashed with 64-bit
//! FNV-1a, seeded by first feeding the eight little-endian bytes of the seed,
//! and counted in bucket `hash % dimension`. The count vector is scaled to
//! unit length; the empty text maps to the zero vector.

use std::sync::Arc;
use std::time::Duration;

use serde_json::json;

use crate::backend::{BackendError, HttpTransport, Transport};

pub const DEFAULT_DIMENSION: usize = 256;
pub const DEFAULT_HASH_SEED: u64 = 0x6b67_7465_616d_0001;

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError>;
}

#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    pub dimension: usize,
    pub seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dimension: DEFAULT_DIMENSION, seed: DEFAULT_HASH_SEED }
    }
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32, 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF)
}

/// Tokens as hashed by [`HashingEmbedder`].
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if is_cjk(c) {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        } else if c.is_alphanumeric() {
            current.push(c);
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a_extend(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    fnv1a_extend(fnv1a_extend(FNV_OFFSET, &seed.to_le_bytes()), bytes)
}

impl HashingEmbedder {
    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(self.seed, token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError> {
        let mut v = vec![0f32; self.dimension];
        for token in tokens(text) {
            v[self.bucket(&token)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Euclidean distance, accumulated in f64 in index order.
pub fn euclidean_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbedder {
    pub endpoint_url: String,
    pub model_name: String,
    pub timeout: Duration,
    api_key: String,
    transport: Arc<dyn Transport>,
}

impl RemoteEmbedder {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self::with_transport(endpoint_url, model_name, api_key, Arc::new(HttpTransport::new()))
    }

    pub fn with_transport(
        endpoint_url: impl Into<String>,
        model_name: impl Into<String>,
        api_key: impl Into<String>,
        transport: Arc<dyn Transport>,
    ) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            timeout: Duration::from_secs(60),
            api_key: api_key.into(),
            transport,
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f32>, BackendError> {
        let body = json!({"model": self.model_name, "input": text});
        let response = self
            .transport
            .post_json(&self.endpoint_url, Some(&self.api_key), &body, self.timeout)?;
        response.check_status()?;
        let value: serde_json::Value = serde_json::from_str(&response.body)
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        value["data"][0]["embedding"]
            .as_array()
            .and_then(|xs| xs.iter().map(|x| x.as_f64().map(|f| f as f32)).collect::<Option<Vec<_>>>())
            .ok_or_else(|| BackendError::MalformedResponse("missing data[0].embedding".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_length() {
        let e = HashingEmbedder::default();
        let a = e.embed("Six Palestinian police officers").unwrap();
        assert_eq!(a, e.embed("Six Palestinian police officers").unwrap());
        assert_eq!(a.len(), DEFAULT_DIMENSION);
        let norm: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_text_is_zero() {
        let v = HashingEmbedder::default().embed("").unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(HashingEmbedder::default().embed("  ,.; ").unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tokenization() {
        assert_eq!(tokens("Israeli troops, the border!"), vec!["israeli", "troops", "the", "border"]);
        assert_eq!(tokens("杭州abc"), vec!["杭", "州", "abc"]);
    }

    #[test]
    fn disjoint_sentences_are_apart() {
        let e = HashingEmbedder::default();
        let (s1, s2) = ("Officers returned home", "Troops seized crossing");
        // Independent check of the bucket layout.
        let buckets = |s: &str| {
            let mut b: Vec<usize> = tokens(s).iter().map(|t| e.bucket(t)).collect();
            b.sort();
            b
        };
        assert_ne!(buckets(s1), buckets(s2));
        let d = euclidean_distance(&e.embed(s1).unwrap(), &e.embed(s2).unwrap());
        assert!(d > 0.0);
    }

    #[test]
    fn fnv_reference_value() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a_extend(FNV_OFFSET, b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a_extend(FNV_OFFSET, b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a_extend(FNV_OFFSET, b"foobar"), 0x8594_4171_f739_67e8);
    }
}
