//! Chat-completion and embedding adapters plus the prompt template registry.

mod mock;
mod openai;
mod templates;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mock::{digest_text, MockChatModel, MockEmbedder, ScriptEntry};
pub use openai::{OpenAiChat, OpenAiEmbedder, RetryPolicy, API_KEY_ENV};
pub use templates::{render_template, template_slots, template_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    KeywordExtraction,
    FuzzyDetection,
    SqlGeneration,
    SqlRevision,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [
        TemplateId::KeywordExtraction,
        TemplateId::FuzzyDetection,
        TemplateId::SqlGeneration,
        TemplateId::SqlRevision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::KeywordExtraction => "KeywordExtraction",
            TemplateId::FuzzyDetection => "FuzzyDetection",
            TemplateId::SqlGeneration => "SqlGeneration",
            TemplateId::SqlRevision => "SqlRevision",
        }
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sampling parameters shared by every completion call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

/// A fully bound prompt. Construction checks the bindings against the
/// template's slots, so a request that exists always renders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub template_id: TemplateId,
    pub bindings: BTreeMap<String, String>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Extra instruction appended after the rendered template on a reprompt.
    pub reprompt: Option<String>,
}

impl CompletionRequest {
    pub fn new(template_id: TemplateId, bindings: BTreeMap<String, String>, params: GenerationParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&params.temperature) {
            return Err(Error::Config(format!(
                "temperature {} outside [0, 1]",
                params.temperature
            )));
        }
        if params.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        // Validates slot coverage.
        render_template(template_id, &bindings)?;
        Ok(Self {
            template_id,
            bindings,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            reprompt: None,
        })
    }

    pub fn with_reprompt(&self, note: &str) -> Self {
        let mut next = self.clone();
        next.reprompt = Some(note.to_string());
        next
    }

    pub fn binding(&self, slot: &str) -> Option<&str> {
        self.bindings.get(slot).map(String::as_str)
    }

    /// The prompt text sent to the model.
    pub fn prompt(&self) -> String {
        let mut text = render_template(self.template_id, &self.bindings).expect("bindings validated at construction");
        if let Some(note) = &self.reprompt {
            text.push_str("\n### Note: ");
            text.push_str(note);
            text.push('\n');
        }
        text
    }
}

/// Convenience for building binding maps in call sites and tests.
pub fn bindings<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidEmbedding("dimension must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding("non-finite component".into()));
        }
        Ok(Self { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// The pair of models a pipeline run talks to.
#[derive(Clone)]
pub struct Adapters {
    pub chat: Arc<dyn ChatModel>,
    pub embedder: Arc<dyn Embedder>,
    pub params: GenerationParams,
}

impl Adapters {
    pub fn new(chat: Arc<dyn ChatModel>, embedder: Arc<dyn Embedder>, params: GenerationParams) -> Self {
        Self { chat, embedder, params }
    }

    pub fn request(&self, template_id: TemplateId, bindings: BTreeMap<String, String>) -> Result<CompletionRequest> {
        CompletionRequest::new(template_id, bindings, self.params)
    }
}

impl std::fmt::Debug for Adapters {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Adapters")
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}
