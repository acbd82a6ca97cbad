//! Snippet retrieval: the search-backend contract, a persistent response
//! cache, a deterministic local-corpus backend and a configurable HTTP one.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, InputError, Result};
use crate::jsonl;

const MODULE: &str = "retrieval";

/// Maximum snippet length in characters for the local backend.
pub const SNIPPET_CHARS: usize = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub text: String,
    pub rank: usize,
    pub source_id: String,
}

pub trait SearchBackend: Send + Sync {
    fn name(&self) -> &str;

    fn max_results(&self) -> usize {
        10
    }

    /// Raw retrieval; `search` handles caching, truncation and ranks.
    fn fetch(&self, query: &str, k: usize) -> Result<Vec<Snippet>>;

    /// Live backends return their write-through cache here.
    fn cache(&self) -> Option<&SnippetCache> {
        None
    }
}

/// Fetches at most `k` snippets for `query`, going through the backend's
/// cache when it has one. Ranks in the result are `0..n`.
pub fn search(backend: &dyn SearchBackend, query: &str, k: usize) -> Result<Vec<Snippet>> {
    if k == 0 {
        return Err(Error::input(MODULE, InputError::Empty("k must be at least 1")));
    }
    if query.is_empty() {
        return Err(Error::input(MODULE, InputError::Empty("query")));
    }
    let mut snippets = match backend.cache() {
        Some(cache) => {
            if let Some(hit) = cache.get(backend.name(), query, k)? {
                hit
            } else {
                let fetched = backend.fetch(query, k).map_err(|e| match e {
                    e @ Error::Retrieval { .. } => e,
                    other => Error::Retrieval {
                        query: query.to_string(),
                        message: other.to_string(),
                    },
                })?;
                let fetched = rerank(fetched, k);
                cache.put(backend.name(), query, k, &fetched)?;
                fetched
            }
        }
        None => backend.fetch(query, k)?,
    };
    snippets = rerank(snippets, k);
    Ok(snippets)
}

fn rerank(mut snippets: Vec<Snippet>, k: usize) -> Vec<Snippet> {
    snippets.retain(|s| !s.text.is_empty());
    snippets.truncate(k);
    for (i, s) in snippets.iter_mut().enumerate() {
        s.rank = i;
    }
    snippets
}

/// One JSON file per (backend, query, k) under a directory.
#[derive(Debug)]
pub struct SnippetCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl SnippetCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex SHA-256 of the JSON array `[backend, query, k]`.
    pub fn key(backend: &str, query: &str, k: usize) -> String {
        let canonical = serde_json::to_string(&(backend, query, k)).expect("key serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    fn path_for(&self, backend: &str, query: &str, k: usize) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(backend, query, k)))
    }

    pub fn get(&self, backend: &str, query: &str, k: usize) -> Result<Option<Vec<Snippet>>> {
        let path = self.path_for(backend, query, k);
        if !path.exists() {
            return Ok(None);
        }
        jsonl::read_json(&path, MODULE).map(Some)
    }

    pub fn put(&self, backend: &str, query: &str, k: usize, snippets: &[Snippet]) -> Result<()> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(MODULE, &self.dir, e))?;
        let path = self.path_for(backend, query, k);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string(snippets).expect("snippets serialize");
        std::fs::write(&tmp, text).map_err(|e| Error::io(MODULE, &tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(MODULE, &path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    Ok(jsonl::read(path, MODULE)?.into_iter().map(|(_, d)| d).collect())
}

fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{20000}'..='\u{2FA1F}'
        | '\u{3040}'..='\u{30FF}'
        | '\u{AC00}'..='\u{D7AF}')
}

/// Splits on whitespace; every CJK character is its own term. Each term is
/// returned with its starting character offset.
pub fn tokenize(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (pos, c) in text.chars().enumerate() {
        if c.is_whitespace() || is_cjk(c) {
            if !current.is_empty() {
                out.push((start, std::mem::take(&mut current)));
            }
            if is_cjk(c) {
                out.push((pos, c.to_string()));
            }
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push(c);
        }
    }
    if !current.is_empty() {
        out.push((start, current));
    }
    out
}

/// Scores each document by the number of distinct query terms it contains
/// and returns the top `k` with a positive score, lower index first on ties.
pub fn local_rank(corpus: &[Document], query: &str, k: usize) -> Vec<Snippet> {
    let terms: HashSet<String> = tokenize(query).into_iter().map(|(_, t)| t).collect();
    let mut scored: Vec<(usize, usize, usize)> = Vec::new();
    for (idx, doc) in corpus.iter().enumerate() {
        let tokens = tokenize(&doc.text);
        let mut matched = HashSet::new();
        let mut first: Option<(usize, usize)> = None;
        for (pos, tok) in &tokens {
            if terms.contains(tok) {
                matched.insert(tok.as_str());
                if first.is_none() {
                    first = Some((*pos, tok.chars().count()));
                }
            }
        }
        if let Some((pos, len)) = first {
            scored.push((matched.len(), idx, pos + len / 2));
        }
    }
    // stable sort keeps index order among equal scores
    scored.sort_by_key(|s| std::cmp::Reverse(s.0));
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, (_, idx, center))| Snippet {
            text: window(&corpus[idx].text, center, SNIPPET_CHARS),
            rank,
            source_id: corpus[idx].id.clone(),
        })
        .collect()
}

fn window(text: &str, center: usize, width: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= width {
        return text.to_string();
    }
    let start = center.saturating_sub(width / 2).min(chars.len() - width);
    chars[start..start + width].iter().collect()
}

pub struct LocalBackend {
    corpus: Vec<Document>,
}

impl LocalBackend {
    pub fn new(corpus: Vec<Document>) -> Self {
        Self { corpus }
    }

    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        Self::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document {
                    id: format!("doc{i}"),
                    text: t.as_ref().to_string(),
                })
                .collect(),
        )
    }
}

impl SearchBackend for LocalBackend {
    fn name(&self) -> &str {
        "local"
    }

    fn fetch(&self, query: &str, k: usize) -> Result<Vec<Snippet>> {
        Ok(local_rank(&self.corpus, query, k))
    }
}

/// HTTP search endpoint returning JSON.
#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// URL with a `{query}` placeholder, substituted percent-encoded.
    pub endpoint: String,
    pub results_per_page: usize,
    /// JSON pointer to the result array, e.g. `/results`.
    pub result_path: String,
    /// Field holding snippet text when results are objects.
    pub text_field: String,
}

pub struct HttpBackend {
    name: String,
    config: HttpConfig,
    cache: SnippetCache,
}

impl HttpBackend {
    pub fn new(name: impl Into<String>, config: HttpConfig, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            config,
            cache: SnippetCache::new(cache_dir),
        }
    }

    fn url_for(&self, query: &str) -> String {
        let encoded: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
        self.config.endpoint.replace("{query}", &encoded)
    }

    fn parse_results(&self, query: &str, body: &str) -> Result<Vec<Snippet>> {
        let fail = |message: String| Error::Retrieval {
            query: query.to_string(),
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(body).map_err(|e| fail(format!("response is not JSON: {e}")))?;
        let results = value
            .pointer(&self.config.result_path)
            .and_then(|v| v.as_array())
            .ok_or_else(|| fail(format!("no array at {}", self.config.result_path)))?;
        let mut out = Vec::new();
        for (i, item) in results.iter().enumerate() {
            let (text, source) = match item {
                serde_json::Value::String(s) => (s.clone(), format!("result{i}")),
                serde_json::Value::Object(map) => {
                    let text = map
                        .get(&self.config.text_field)
                        .and_then(|v| v.as_str())
                        .unwrap_or_default()
                        .to_string();
                    let source = ["url", "id", "link"]
                        .iter()
                        .find_map(|f| map.get(*f).and_then(|v| v.as_str()))
                        .map(str::to_string)
                        .unwrap_or_else(|| format!("result{i}"));
                    (text, source)
                }
                _ => continue,
            };
            out.push(Snippet {
                text,
                rank: i,
                source_id: source,
            });
        }
        Ok(out)
    }
}

impl SearchBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn max_results(&self) -> usize {
        self.config.results_per_page
    }

    fn fetch(&self, query: &str, k: usize) -> Result<Vec<Snippet>> {
        let url = self.url_for(query);
        let mut response = ureq::get(&url).call().map_err(|e| Error::Retrieval {
            query: query.to_string(),
            message: format!("backend unreachable ({url}): {e}"),
        })?;
        let body = response.body_mut().read_to_string().map_err(|e| Error::Retrieval {
            query: query.to_string(),
            message: format!("reading response: {e}"),
        })?;
        let mut results = self.parse_results(query, &body)?;
        results.truncate(k.min(self.config.results_per_page.max(1)));
        Ok(results)
    }

    fn cache(&self) -> Option<&SnippetCache> {
        Some(&self.cache)
    }
}
