//! Remote embedding provider client with an append-only on-disk cache.
//!
//! Wire protocol: `POST {endpoint}/embed` with JSON body
//! `{"model": string, "texts": [string]}`; the response is
//! `{"dimension": int, "vectors": [[number]]}`. Results are cached under
//! `(model_name, SHA-256 of normalized text)` so interrupted runs resume
//! without re-fetching; cached entries are never requested again.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingProvider {
    pub endpoint: String,
    pub model_name: String,
    pub batch_size: usize,
    pub cache_path: PathBuf,
}

impl EmbeddingProvider {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("provider batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dimension: usize,
    vectors: Vec<Vec<f64>>,
}

/// Whitespace-normalized form used for cache hashing.
fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Cache key: SHA-256 over the model name and the normalized text.
pub fn cache_key(model_name: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_name.as_bytes());
    hasher.update(b"\n");
    hasher.update(normalize(text).as_bytes());
    format!("{:x}", hasher.finalize())
}

fn load_cache(path: &PathBuf) -> Result<HashMap<String, (usize, Vec<f64>)>> {
    let mut cache = HashMap::new();
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
        Err(e) => return Err(e.into()),
    };
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (hash, dim, values) = match (fields.next(), fields.next(), fields.next()) {
            (Some(h), Some(d), Some(v)) => (h, d, v),
            _ => {
                return Err(Error::Format(format!(
                    "cache line {} is not hash<TAB>dimension<TAB>floats",
                    idx + 1
                )))
            }
        };
        let dim: usize = dim
            .parse()
            .map_err(|_| Error::Format(format!("cache line {}: bad dimension", idx + 1)))?;
        let values: Vec<f64> = values
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("cache line {}: bad float", idx + 1)))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Format(format!(
                "cache line {}: {} floats for declared dimension {}",
                idx + 1,
                values.len(),
                dim
            )));
        }
        cache.insert(hash.to_string(), (dim, values));
    }
    Ok(cache)
}

fn append_cache(path: &PathBuf, entries: &[(String, usize, &Vec<f64>)]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for (hash, dim, values) in entries {
        let rendered: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        writeln!(file, "{hash}\t{dim}\t{}", rendered.join(" "))?;
    }
    file.flush()?;
    Ok(())
}

fn retry_after_from(resp: &reqwest::blocking::Response) -> u64 {
    resp.headers()
        .get("retry-after")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse().ok())
        .unwrap_or(30)
}

/// Embeds `texts` in input order, serving cached entries and fetching only
/// the misses in `batch_size` chunks. Every fetched vector is appended to
/// the cache before this function returns.
pub fn remote_embed(texts: &[String], provider: &EmbeddingProvider) -> Result<Vec<Vec<f64>>> {
    provider.validate()?;
    let mut cache = load_cache(&provider.cache_path)?;

    let keys: Vec<String> = texts
        .iter()
        .map(|t| cache_key(&provider.model_name, t))
        .collect();
    let mut expected_dim: Option<usize> = keys
        .iter()
        .find_map(|k| cache.get(k).map(|(dim, _)| *dim));

    let mut missing: Vec<(usize, &String)> = Vec::new();
    let mut seen_missing: HashMap<&str, ()> = HashMap::new();
    for (i, key) in keys.iter().enumerate() {
        if !cache.contains_key(key.as_str()) && seen_missing.insert(key.as_str(), ()).is_none() {
            missing.push((i, &texts[i]));
        }
    }

    if !missing.is_empty() {
        let client = reqwest::blocking::Client::builder()
            .connect_timeout(Duration::from_secs(5))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Protocol(format!("http client: {e}")))?;
        let url = format!("{}/embed", provider.endpoint.trim_end_matches('/'));

        for chunk in missing.chunks(provider.batch_size) {
            let batch: Vec<String> = chunk.iter().map(|(_, t)| normalize(t)).collect();
            let resp = client
                .post(&url)
                .json(&EmbedRequest {
                    model: &provider.model_name,
                    texts: &batch,
                })
                .send()
                .map_err(|e| Error::Provider {
                    message: format!("transport failure with cold cache: {e}"),
                    retry_after_secs: 30,
                })?;
            if !resp.status().is_success() {
                let retry = retry_after_from(&resp);
                return Err(Error::Provider {
                    message: format!("provider returned HTTP {}", resp.status()),
                    retry_after_secs: retry,
                });
            }
            let body: EmbedResponse = resp
                .json()
                .map_err(|e| Error::Protocol(format!("malformed response body: {e}")))?;
            if body.vectors.len() != batch.len() {
                return Err(Error::Protocol(format!(
                    "asked for {} vectors, got {}",
                    batch.len(),
                    body.vectors.len()
                )));
            }
            match expected_dim {
                None => expected_dim = Some(body.dimension),
                Some(dim) if dim != body.dimension => {
                    return Err(Error::Protocol(format!(
                        "dimension drift: {} then {}",
                        dim, body.dimension
                    )))
                }
                _ => {}
            }
            let mut new_entries = Vec::with_capacity(chunk.len());
            for ((i, _), vector) in chunk.iter().zip(body.vectors) {
                if vector.len() != body.dimension {
                    return Err(Error::Protocol(format!(
                        "vector length {} does not match declared dimension {}",
                        vector.len(),
                        body.dimension
                    )));
                }
                cache.insert(keys[*i].clone(), (body.dimension, vector));
            }
            for (i, _) in chunk {
                let (dim, v) = &cache[&keys[*i]];
                new_entries.push((keys[*i].clone(), *dim, v));
            }
            append_cache(&provider.cache_path, &new_entries)?;
        }
    }

    texts
        .iter()
        .zip(&keys)
        .map(|(text, key)| {
            cache
                .get(key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Protocol(format!("no vector produced for {text:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_key_ignores_whitespace_runs() {
        assert_eq!(
            cache_key("m", "  oil   falls \n"),
            cache_key("m", "oil falls")
        );
        assert_ne!(cache_key("m", "oil falls"), cache_key("other", "oil falls"));
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let v = vec![0.25, -1.5];
        append_cache(&path, &[("abc".to_string(), 2, &v)]).unwrap();
        let cache = load_cache(&path).unwrap();
        assert_eq!(cache["abc"], (2, v));
    }

    #[test]
    fn malformed_cache_line_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        std::fs::write(&path, "notenough\t2\n").unwrap();
        assert!(matches!(load_cache(&path).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn offline_with_cold_cache_is_provider_error() {
        let dir = tempfile::tempdir().unwrap();
        let provider = EmbeddingProvider {
            // closed local port: connection refused immediately
            endpoint: "http://127.0.0.1:1".into(),
            model_name: "m".into(),
            batch_size: 8,
            cache_path: dir.path().join("cache.tsv"),
        };
        let err = remote_embed(&["oil".to_string()], &provider).unwrap_err();
        match err {
            Error::Provider { retry_after_secs, .. } => assert!(retry_after_secs > 0),
            other => panic!("expected provider error, got {other}"),
        }
    }

    #[test]
    fn warm_cache_serves_without_network() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let texts = vec!["oil up".to_string(), "oil down".to_string()];
        let v1 = vec![1.0, 2.0];
        let v2 = vec![3.0, 4.0];
        append_cache(
            &path,
            &[
                (cache_key("m", &texts[0]), 2, &v1),
                (cache_key("m", &texts[1]), 2, &v2),
            ],
        )
        .unwrap();
        let provider = EmbeddingProvider {
            endpoint: "http://127.0.0.1:1".into(),
            model_name: "m".into(),
            batch_size: 8,
            cache_path: path,
        };
        let vectors = remote_embed(&texts, &provider).unwrap();
        assert_eq!(vectors, vec![v1, v2]);
    }
}
