//! Run configuration, read from a TOML file. Relative paths in the file are
//! resolved against the file's directory. API keys are never read from here;
//! see [`crate::llm::API_KEY_ENV`].

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::db::QueryLimits;
use crate::error::{Error, Result};
use crate::fuzzer::FuzzConfig;
use crate::knowledge::RelationMapping;
use crate::llm::{
    Adapters, ChatModel, Embedder, GenerationParams, MockChatModel, MockEmbedder, OpenAiChat, OpenAiEmbedder,
    RetryPolicy,
};
use crate::parallel::ExecutionMode;
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    /// Scripted replies; when set, no endpoint is contacted.
    pub mock_script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retries: u32,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            mock_script: None,
            endpoint: None,
            model: "gpt-3.5-turbo-0125".into(),
            temperature: 0.0,
            max_tokens: 1024,
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderConfig {
    /// Without an endpoint the hashed-trigram mock is used.
    pub endpoint: Option<String>,
    pub model: String,
    pub mock_dimension: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "text-embedding-3-small".into(),
            mock_dimension: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub llm: LlmConfig,
    pub embedder: EmbedderConfig,
    pub seed: u64,
    pub content_samples: usize,
    pub max_synonyms: usize,
    pub row_limit: usize,
    pub max_revisions: usize,
    pub workers: usize,
    pub knowledge_path: Option<PathBuf>,
    pub accept_empty: bool,
    pub min_similarity: Option<f64>,
    pub statement_timeout_ms: u64,
    pub max_result_rows: usize,
    pub mode: ExecutionMode,
    pub relation_mapping: Option<RelationMapping>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            llm: LlmConfig::default(),
            embedder: EmbedderConfig::default(),
            seed: 42,
            content_samples: 6,
            max_synonyms: 5,
            row_limit: 20,
            max_revisions: 3,
            workers: 4,
            knowledge_path: None,
            accept_empty: false,
            min_similarity: None,
            statement_timeout_ms: 2000,
            max_result_rows: 1000,
            mode: ExecutionMode::default(),
            relation_mapping: None,
        }
    }
}

fn resolve(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config = Self::parse(text)?;
        config.validate()?;
        Ok(config)
    }

    fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a file without validating, so that overrides can be applied
    /// first. Call [`RunConfig::validate`] afterwards.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut config.llm.mock_script);
        resolve(base, &mut config.knowledge_path);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.llm.temperature) {
            return bad(format!("temperature {} outside [0, 1]", self.llm.temperature));
        }
        for (name, v) in [
            ("content_samples", self.content_samples),
            ("max_synonyms", self.max_synonyms),
            ("row_limit", self.row_limit),
            ("workers", self.workers),
            ("max_result_rows", self.max_result_rows),
            ("embedder.mock_dimension", self.embedder.mock_dimension),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.llm.max_tokens == 0 {
            return bad("llm.max_tokens must be positive".into());
        }
        if self.statement_timeout_ms == 0 {
            return bad("statement_timeout_ms must be positive".into());
        }
        if let Some(m) = self.min_similarity {
            if !(-1.0..=1.0).contains(&m) {
                return bad(format!("min_similarity {m} outside [-1, 1]"));
            }
        }
        if self.llm.mock_script.is_none() && self.llm.endpoint.is_none() {
            return bad("llm needs either mock_script or endpoint".into());
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let timeout = Duration::from_millis(self.statement_timeout_ms);
        PipelineConfig {
            content_samples: self.content_samples,
            seed: self.seed,
            fuzz: FuzzConfig {
                max_synonyms: self.max_synonyms,
                row_limit: self.row_limit,
                statement_timeout: timeout,
            },
            max_revisions: self.max_revisions,
            accept_empty: self.accept_empty,
            min_similarity: self.min_similarity,
            limits: QueryLimits {
                max_rows: self.max_result_rows,
                timeout,
            },
            relation_mapping: self.relation_mapping.clone(),
            mode: self.mode,
        }
    }

    pub fn build_adapters(&self) -> Result<Adapters> {
        let retry = RetryPolicy {
            retries: self.llm.retries,
            ..RetryPolicy::default()
        };
        let chat: Arc<dyn ChatModel> = match (&self.llm.mock_script, &self.llm.endpoint) {
            (Some(script), _) => Arc::new(MockChatModel::load(script)?),
            (None, Some(endpoint)) => Arc::new(OpenAiChat::new(endpoint, &self.llm.model, retry)?),
            (None, None) => return Err(Error::Config("llm needs either mock_script or endpoint".into())),
        };
        let embedder: Arc<dyn Embedder> = match &self.embedder.endpoint {
            Some(endpoint) => Arc::new(OpenAiEmbedder::new(endpoint, &self.embedder.model, retry)?),
            None => Arc::new(MockEmbedder::new(self.embedder.mock_dimension)?),
        };
        Ok(Adapters::new(
            chat,
            embedder,
            GenerationParams {
                temperature: self.llm.temperature,
                max_tokens: self.llm.max_tokens,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::TargetColumn;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.llm.temperature, 0.0);
        assert_eq!(
            (c.content_samples, c.max_synonyms, c.row_limit, c.max_revisions),
            (6, 5, 20, 3)
        );
        assert!(!c.accept_empty);
    }

    #[test]
    fn parses_sections() {
        let c = RunConfig::from_toml(
            r#"
            max_revisions = 1
            mode = "sequential"
            [llm]
            mock_script = "script.json"
            [relation_mapping]
            table = "code_rel"
            keyword_column = "synonym"
            target_table = "nationalecodata"
            target_column_from = "target_column"
            target_value_column = "target_value"
            "#,
        )
        .unwrap();
        assert_eq!(c.max_revisions, 1);
        assert_eq!(c.mode, ExecutionMode::Sequential);
        assert_eq!(
            c.relation_mapping.unwrap().target_column,
            TargetColumn::FromColumn("target_column".into())
        );
        assert_eq!(c.content_samples, 6);
    }

    #[test]
    fn rejects_bad_values() {
        let base = "[llm]\nmock_script = \"s.json\"\n";
        assert!(RunConfig::from_toml(&format!("{base}temperature = 1.5")).is_err());
        assert!(RunConfig::from_toml(&format!("content_samples = 0\n{base}")).is_err());
        assert!(RunConfig::from_toml(&format!("bogus = 1\n{base}")).is_err());
        assert!(RunConfig::from_toml("seed = 1").is_err());
        assert!(RunConfig::from_toml(&format!("{base}api_key = \"sk\"")).is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "knowledge_path = \"k.jsonl\"\n[llm]\nmock_script = \"s.json\"\n").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.knowledge_path.unwrap(), dir.path().join("k.jsonl"));
        assert_eq!(c.llm.mock_script.unwrap(), dir.path().join("s.json"));
    }
}
