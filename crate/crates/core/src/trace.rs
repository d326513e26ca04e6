//! Audit trail of every model call, probe and SQL execution in one run.

use serde::Serialize;

use crate::error::Result;
use crate::llm::{ChatModel, CompletionRequest, TemplateId};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    LlmCall {
        template: TemplateId,
        prompt: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        reply: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Probe {
        sql: String,
        values: Vec<String>,
        truncated: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Execution {
        sql: String,
        status: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
        /// Wall-clock milliseconds; the only non-deterministic trace field.
        elapsed_ms: u64,
    },
    Note {
        message: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sends `request` to `chat` and records the exchange.
    pub fn complete(&mut self, chat: &dyn ChatModel, request: &CompletionRequest) -> Result<String> {
        let result = chat.complete(request);
        self.events.push(TraceEvent::LlmCall {
            template: request.template_id,
            prompt: request.prompt(),
            reply: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        });
        result
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.events.push(TraceEvent::Note {
            message: message.into(),
        });
    }

    pub fn llm_calls(&self, template: TemplateId) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::LlmCall { template: t, .. } if *t == template))
            .count()
    }

    pub fn executions(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::Execution { .. }))
            .count()
    }
}
