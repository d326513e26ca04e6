//! Deterministic offline adapters: a scripted chat model and a hashed
//! character-trigram embedder.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{ChatModel, CompletionRequest, Embedder, EmbeddingVector, TemplateId};
use crate::error::{Error, Result};

/// Matches any request of the entry's template.
pub const WILDCARD: &str = "*";

/// Separator between the question and the old SQL in revision digests.
const PART_SEPARATOR: &str = " || ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub template_id: TemplateId,
    pub match_digest: String,
    pub response: String,
}

/// Normalized match key: lowercased, whitespace collapsed, trailing `;` dropped.
pub fn digest_text(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed.trim_end_matches(';').trim_end().to_string()
}

fn normalize_digest(digest: &str) -> String {
    if digest.trim() == WILDCARD {
        return WILDCARD.to_string();
    }
    digest
        .split(PART_SEPARATOR.trim())
        .map(digest_text)
        .collect::<Vec<_>>()
        .join(PART_SEPARATOR)
}

/// Candidate digests for a request, most specific first.
fn request_digests(request: &CompletionRequest) -> Vec<String> {
    let key = match request.template_id {
        TemplateId::FuzzyDetection => request.binding("keyword"),
        _ => request.binding("query"),
    }
    .map(digest_text)
    .unwrap_or_default();
    let mut out = Vec::with_capacity(3);
    if request.template_id == TemplateId::SqlRevision {
        if let Some(old) = request.binding("old_sql") {
            out.push(format!("{key}{PART_SEPARATOR}{}", digest_text(old)));
        }
    }
    out.push(key);
    out.push(WILDCARD.to_string());
    out
}

/// Chat model answering from a fixed script keyed on template and a digest
/// of the `{query}` (or `{keyword}`) binding. Revision requests first try
/// `query || old_sql` so multi-round scripts can differ per round.
#[derive(Debug, Default)]
pub struct MockChatModel {
    script: HashMap<(TemplateId, String), String>,
    calls: AtomicUsize,
}

impl MockChatModel {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut script = HashMap::new();
        for entry in entries {
            script
                .entry((entry.template_id, normalize_digest(&entry.match_digest)))
                .or_insert(entry.response);
        }
        Self {
            script,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<ScriptEntry> = serde_json::from_str(text)?;
        Ok(Self::new(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Number of `complete` calls served so far, including failed lookups.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ChatModel for MockChatModel {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let digests = request_digests(request);
        for digest in &digests {
            if let Some(response) = self.script.get(&(request.template_id, digest.clone())) {
                return Ok(response.clone());
            }
        }
        Err(Error::NoScriptedResponse {
            template: request.template_id.to_string(),
            digest: digests[0].clone(),
        })
    }
}

/// Bag of hashed character trigrams over the lowercased, space-padded text.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dimension: usize,
}

impl MockEmbedder {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self { dimension })
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self { dimension: 256 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::EmptyEmbeddingInput);
        }
        let padded: Vec<char> = format!("  {}  ", text.to_lowercase()).chars().collect();
        let mut values = vec![0.0; self.dimension];
        let mut buf = [0u8; 12];
        for window in padded.windows(3) {
            let mut len = 0;
            for c in window {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let slot = (fnv1a(&buf[..len]) % self.dimension as u64) as usize;
            values[slot] += 1.0;
        }
        EmbeddingVector::new(values)
    }
}
