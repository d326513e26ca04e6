//! End-to-end question answering: extraction, fuzzy detection, knowledge
//! retrieval and alignment, then the generate / revise / execute loop.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::db::{Database, QueryLimits};
use crate::error::{Error, Result};
use crate::extraction::{extract_keywords, KeywordSet, REPROMPT_NOTE};
use crate::fuzzer::{fuzzy_detect, FuzzConfig};
use crate::knowledge::{
    align, classify, import_relation_knowledge, normalize, render_knowledge_prompt, AlignmentResult, EncodingKnowledge,
    KnowledgeTable, RelationMapping,
};
use crate::llm::{bindings, Adapters, TemplateId};
use crate::parallel::ExecutionMode;
use crate::schema::{introspect, sample_all, SchemaPrompt};
use crate::trace::{Trace, TraceEvent};
use crate::value::SqlValue;

pub const EMPTY_RESULT_MESSAGE: &str = "query returned an empty result";
pub const APPLY_KNOWLEDGE_MESSAGE: &str = "no execution yet — apply encoding knowledge";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub content_samples: usize,
    pub seed: u64,
    pub fuzz: FuzzConfig,
    pub max_revisions: usize,
    pub accept_empty: bool,
    /// Alignments scoring below this are ignored. Off by default.
    pub min_similarity: Option<f64>,
    pub limits: QueryLimits,
    pub relation_mapping: Option<RelationMapping>,
    pub mode: ExecutionMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            content_samples: 6,
            seed: 42,
            fuzz: FuzzConfig::default(),
            max_revisions: 3,
            accept_empty: false,
            min_similarity: None,
            limits: QueryLimits::default(),
            relation_mapping: None,
            mode: ExecutionMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum OutcomeKind {
    RowsReturned {
        columns: Vec<String>,
        rows: Vec<Vec<SqlValue>>,
    },
    EmptyResult,
    ExecutionError {
        class: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionOutcome {
    #[serde(flatten)]
    pub kind: OutcomeKind,
    /// Not serialized; trace events carry the timing.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ExecutionOutcome {
    pub fn status(&self) -> &'static str {
        match self.kind {
            OutcomeKind::RowsReturned { .. } => "RowsReturned",
            OutcomeKind::EmptyResult => "EmptyResult",
            OutcomeKind::ExecutionError { .. } => "ExecutionError",
        }
    }

    pub fn is_rows(&self) -> bool {
        matches!(self.kind, OutcomeKind::RowsReturned { .. })
    }

    pub fn rows(&self) -> &[Vec<SqlValue>] {
        match &self.kind {
            OutcomeKind::RowsReturned { rows, .. } => rows,
            _ => &[],
        }
    }
}

/// Index of the first `;` outside quotes and comments, if any.
fn statement_end(sql: &str) -> Option<usize> {
    let bytes = sql.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            q @ (b'\'' | b'"' | b'`') => {
                i += 1;
                while i < bytes.len() {
                    if bytes[i] == q {
                        if bytes.get(i + 1) == Some(&q) {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    i += 1;
                }
            }
            b'[' => {
                while i < bytes.len() && bytes[i] != b']' {
                    i += 1;
                }
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i += 2;
                while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                    i += 1;
                }
                i += 1;
            }
            b';' => return Some(i),
            _ => {}
        }
        i += 1;
    }
    None
}

/// Keeps only the first statement of `sql`.
pub fn first_statement(sql: &str) -> &str {
    match statement_end(sql) {
        Some(end) => sql[..end].trim(),
        None => sql.trim(),
    }
}

fn fenced_block(reply: &str) -> Option<&str> {
    let start = reply.find("```")?;
    let after = &reply[start + 3..];
    // Skip a language tag such as `sql` or `sqlite`.
    let body_start = after.find('\n').map_or(0, |n| {
        if after[..n].trim().chars().all(|c| c.is_ascii_alphanumeric()) {
            n + 1
        } else {
            0
        }
    });
    let body = &after[body_start..];
    Some(match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    })
}

fn starts_with_keyword(text: &str, keyword: &str) -> bool {
    text.len() >= keyword.len()
        && text[..keyword.len()].eq_ignore_ascii_case(keyword)
        && text[keyword.len()..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_ascii_alphanumeric() && c != '_')
}

fn find_statement_start(text: &str) -> Option<usize> {
    text.char_indices()
        .filter(|(i, _)| *i == 0 || !text[..*i].ends_with(|c: char| c.is_ascii_alphanumeric() || c == '_'))
        .map(|(i, _)| i)
        .find(|&i| starts_with_keyword(&text[i..], "select") || is_cte_start(&text[i..]))
}

/// `WITH name AS (`, `WITH name(cols) AS (` or `WITH RECURSIVE`.
fn is_cte_start(text: &str) -> bool {
    if !starts_with_keyword(text, "with") {
        return false;
    }
    let rest = text[4..].trim_start();
    if starts_with_keyword(rest, "recursive") {
        return true;
    }
    let name_len = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '"'))
        .unwrap_or(rest.len());
    if name_len == 0 {
        return false;
    }
    let mut after = rest[name_len..].trim_start();
    if after.starts_with('(') {
        match after.find(')') {
            Some(close) => after = after[close + 1..].trim_start(),
            None => return false,
        }
    }
    starts_with_keyword(after, "as")
}

/// Pulls one SQL statement out of a model reply. With `primed`, a reply that
/// does not start with `SELECT`/`WITH` is taken as the continuation of a
/// prompt ending in `SELECT `.
pub fn extract_sql(reply: &str, primed: bool) -> Option<String> {
    let body = fenced_block(reply).unwrap_or(reply).trim();
    let sql = if let Some(start) = find_statement_start(body).filter(|&s| !primed || s == 0) {
        first_statement(&body[start..]).to_string()
    } else if primed {
        let cont = first_statement(body);
        if cont.is_empty() {
            return None;
        }
        format!("SELECT {cont}")
    } else {
        return None;
    };
    let sql = sql.split_whitespace().collect::<Vec<_>>().join(" ");
    if sql.is_empty() {
        None
    } else {
        Some(sql)
    }
}

/// Generates the first SQL draft, reprompting once on an empty reply.
pub fn generate_fuzzy_sql(
    question: &str,
    prompt: &SchemaPrompt,
    knowledge: &[EncodingKnowledge],
    adapters: &Adapters,
    trace: &mut Trace,
) -> Result<String> {
    let request = adapters.request(
        TemplateId::SqlGeneration,
        bindings([
            ("desc_str", prompt.desc_str.clone()),
            ("fk_str", prompt.fk_str.clone()),
            ("query", question.to_string()),
            ("related_prompt", render_knowledge_prompt(knowledge)),
        ]),
    )?;
    let reply = trace.complete(adapters.chat.as_ref(), &request)?;
    if let Some(sql) = extract_sql(&reply, true) {
        return Ok(sql);
    }
    let reply = trace.complete(adapters.chat.as_ref(), &request.with_reprompt(REPROMPT_NOTE))?;
    extract_sql(&reply, true).ok_or(Error::NoStatement { raw: reply })
}

/// Runs `sql` read-only and sorts the result into one of three outcomes.
pub fn execute_and_judge(db: &Database, sql: &str, limits: &QueryLimits) -> ExecutionOutcome {
    let started = Instant::now();
    let kind = match db.query(sql, limits) {
        Ok(rows) if rows.rows.is_empty() => OutcomeKind::EmptyResult,
        Ok(rows) => OutcomeKind::RowsReturned {
            columns: rows.columns,
            rows: rows.rows,
        },
        Err(e) => OutcomeKind::ExecutionError {
            class: e.class().to_string(),
            message: e.message(),
        },
    };
    ExecutionOutcome {
        kind,
        elapsed: started.elapsed(),
    }
}

fn record_execution(trace: &mut Trace, sql: &str, outcome: &ExecutionOutcome) {
    let detail = match &outcome.kind {
        OutcomeKind::RowsReturned { rows, .. } => Some(format!("{} row(s)", rows.len())),
        OutcomeKind::EmptyResult => None,
        OutcomeKind::ExecutionError { class, message } => Some(format!("{class}: {message}")),
    };
    trace.events.push(TraceEvent::Execution {
        sql: sql.to_string(),
        status: outcome.status().to_string(),
        detail,
        elapsed_ms: outcome.elapsed.as_millis() as u64,
    });
}

/// What the revision prompt reports about the old SQL.
#[derive(Debug, Clone, Copy)]
pub enum RevisionFeedback<'a> {
    /// The knowledge-application pass before anything has run.
    ApplyKnowledge,
    Outcome(&'a ExecutionOutcome),
}

impl RevisionFeedback<'_> {
    fn slots(&self) -> (String, String) {
        match self {
            RevisionFeedback::ApplyKnowledge => (APPLY_KNOWLEDGE_MESSAGE.to_string(), "None".to_string()),
            RevisionFeedback::Outcome(o) => match &o.kind {
                OutcomeKind::EmptyResult => (EMPTY_RESULT_MESSAGE.to_string(), "EmptyResult".to_string()),
                OutcomeKind::ExecutionError { class, message } => (message.clone(), class.clone()),
                OutcomeKind::RowsReturned { .. } => (String::new(), "None".to_string()),
            },
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn revise_with(
    question: &str,
    knowledge: &[EncodingKnowledge],
    prompt: &SchemaPrompt,
    old_sql: &str,
    feedback: RevisionFeedback<'_>,
    adapters: &Adapters,
    trace: &mut Trace,
) -> Result<String> {
    let (error_text, class) = feedback.slots();
    let request = adapters.request(
        TemplateId::SqlRevision,
        bindings([
            ("query", question.to_string()),
            ("related_prompt", render_knowledge_prompt(knowledge)),
            ("desc_str", prompt.desc_str.clone()),
            ("fk_str", prompt.fk_str.clone()),
            ("old_sql", old_sql.to_string()),
            ("sqlite_error", error_text),
            ("exception_class", class),
        ]),
    )?;
    let reply = trace.complete(adapters.chat.as_ref(), &request)?;
    if let Some(sql) = extract_sql(&reply, false) {
        return Ok(sql);
    }
    let reply = trace.complete(adapters.chat.as_ref(), &request.with_reprompt(REPROMPT_NOTE))?;
    extract_sql(&reply, false).ok_or(Error::NoStatement { raw: reply })
}

/// Asks for a corrected statement given a failed or empty execution.
#[allow(clippy::too_many_arguments)]
pub fn revise(
    question: &str,
    knowledge: &[EncodingKnowledge],
    prompt: &SchemaPrompt,
    old_sql: &str,
    outcome: &ExecutionOutcome,
    adapters: &Adapters,
    trace: &mut Trace,
) -> Result<String> {
    if outcome.is_rows() {
        return Err(Error::Config("revise called on a successful execution".into()));
    }
    revise_with(
        question,
        knowledge,
        prompt,
        old_sql,
        RevisionFeedback::Outcome(outcome),
        adapters,
        trace,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub sql: String,
    pub outcome: ExecutionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub question_id: String,
    pub question: String,
    pub database: String,
    pub keywords: KeywordSet,
    pub alignments: Vec<AlignmentResult>,
    pub knowledge_used: Vec<EncodingKnowledge>,
    pub fuzzy_sql: Option<String>,
    pub revisions: Vec<Attempt>,
    pub precise_sql: Option<String>,
    pub gave_up: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace: Trace,
}

impl PipelineResult {
    fn new(question_id: &str, question: &str, database: &str) -> Self {
        Self {
            question_id: question_id.to_string(),
            question: question.to_string(),
            database: database.to_string(),
            keywords: KeywordSet::default(),
            alignments: Vec::new(),
            knowledge_used: Vec::new(),
            fuzzy_sql: None,
            revisions: Vec::new(),
            precise_sql: None,
            gave_up: true,
            error: None,
            trace: Trace::new(),
        }
    }

    /// A result for a question that could not be started.
    pub fn failed(question_id: &str, question: &str, database: &str, error: &Error) -> Self {
        let mut result = Self::new(question_id, question, database);
        result.error = Some(error.to_string());
        result
    }

    /// Rows of the accepted statement.
    pub fn final_rows(&self) -> Option<&[Vec<SqlValue>]> {
        self.precise_sql.as_ref()?;
        self.revisions.last().map(|a| a.outcome.rows())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline results serialize")
    }
}

/// Answers one question. Never fails: hard errors end the run with
/// `gave_up = true` and the error recorded.
pub fn run_pipeline(
    question_id: &str,
    question: &str,
    db: &Database,
    knowledge: &mut KnowledgeTable,
    adapters: &Adapters,
    config: &PipelineConfig,
) -> PipelineResult {
    let mut result = PipelineResult::new(question_id, question, db.name());
    if let Err(e) = run_inner(question, db, knowledge, adapters, config, &mut result) {
        result.trace.note(format!("aborted: {e}"));
        result.error = Some(e.to_string());
        result.precise_sql = None;
        result.gave_up = true;
    }
    result
}

fn run_inner(
    question: &str,
    db: &Database,
    knowledge: &mut KnowledgeTable,
    adapters: &Adapters,
    config: &PipelineConfig,
    result: &mut PipelineResult,
) -> Result<()> {
    let schema = introspect(db)?;
    let samples = sample_all(db, &schema, config.content_samples, config.seed)?;
    let prompt = SchemaPrompt::build(&schema, &samples);
    let trace = &mut result.trace;

    result.keywords = extract_keywords(&result.question_id, question, &schema, &prompt, adapters, trace)?;

    if let Some(mapping) = &config.relation_mapping {
        match import_relation_knowledge(db, mapping) {
            Ok(records) => {
                let added = records.into_iter().filter(|ek| knowledge.upsert(ek.clone())).count();
                trace.note(format!("imported {added} relation knowledge record(s)"));
            }
            Err(Error::RelationMapping(why)) => trace.note(format!("relation mapping skipped: {why}")),
            Err(e) => return Err(e),
        }
    }

    let probed = fuzzy_detect(&result.keywords, db, adapters, &samples, &schema, &config.fuzz, trace)?;
    for (keyword, results) in &probed {
        for sr in results {
            if !classify(sr).is_discard() {
                let ek = normalize(keyword, &schema.database_name, sr)?;
                if knowledge.upsert(ek.clone()) {
                    trace.note(format!(
                        "mined {} -> {}.{} = {:?}",
                        ek.keyword, ek.table_name, ek.column_name, ek.stored_value
                    ));
                }
            }
        }
    }

    let candidates = knowledge.entries_for(&schema.database_name);
    for keyword in result.keywords.data_content() {
        let alignment = align(&keyword.surface, &candidates, adapters.embedder.as_ref(), config.mode)?;
        let keep = match (alignment.score, config.min_similarity) {
            (Some(score), Some(min)) => score >= min,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if keep {
            if let Some(best) = &alignment.best {
                if !result.knowledge_used.contains(best) {
                    result.knowledge_used.push(best.clone());
                }
            }
        }
        result.alignments.push(alignment);
    }

    let fuzzy = generate_fuzzy_sql(question, &prompt, &result.knowledge_used, adapters, trace)?;
    result.fuzzy_sql = Some(fuzzy.clone());
    let mut sql = revise_with(
        question,
        &result.knowledge_used,
        &prompt,
        &fuzzy,
        RevisionFeedback::ApplyKnowledge,
        adapters,
        trace,
    )?;

    let mut rounds = 0;
    loop {
        let outcome = execute_and_judge(db, &sql, &config.limits);
        record_execution(trace, &sql, &outcome);
        let accepted = outcome.is_rows() || (config.accept_empty && outcome.kind == OutcomeKind::EmptyResult);
        result.revisions.push(Attempt {
            sql: sql.clone(),
            outcome: outcome.clone(),
        });
        if accepted {
            result.precise_sql = Some(sql);
            result.gave_up = false;
            return Ok(());
        }
        if rounds == config.max_revisions {
            trace.note(format!("giving up after {rounds} revision(s)"));
            return Ok(());
        }
        rounds += 1;
        sql = revise(
            question,
            &result.knowledge_used,
            &prompt,
            &sql,
            &outcome,
            adapters,
            trace,
        )?;
    }
}
