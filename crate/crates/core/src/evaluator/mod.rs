//! Scoring with execution accuracy (EX) and exact-set-match (EM), and the
//! benchmark runner over Spider-format datasets.

pub mod sql;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::db::{Database, QueryLimits};
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeTable;
use crate::llm::Adapters;
use crate::parallel::{map_slice, with_workers};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineResult};
use crate::value::SqlValue;

pub use sql::{has_top_level_order_by, parse_clauses, ClauseSet};

const SCORING_LIMITS: QueryLimits = QueryLimits {
    max_rows: 1_000_000,
    timeout: Duration::from_secs(30),
};

fn row_keys(rows: &[Vec<SqlValue>]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(SqlValue::comparison_key).collect())
        .collect()
}

/// Whether `pred` and `gold` return the same rows. Order matters only when
/// the gold query has a top-level ORDER BY.
pub fn execution_accuracy(pred_sql: &str, gold_sql: &str, db: &Database) -> Result<bool> {
    let gold = db
        .query(gold_sql, &SCORING_LIMITS)
        .map_err(|e| Error::Dataset(format!("gold query failed on {}: {e}", db.name())))?;
    let Ok(pred) = db.query(pred_sql, &SCORING_LIMITS) else {
        return Ok(false);
    };
    let (mut g, mut p) = (row_keys(&gold.rows), row_keys(&pred.rows));
    if !has_top_level_order_by(gold_sql) {
        g.sort();
        p.sort();
    }
    Ok(g == p)
}

/// Clause-level equality with literals ignored. A prediction that does not
/// parse never matches.
pub fn exact_set_match(pred_sql: &str, gold_sql: &str) -> bool {
    match (parse_clauses(pred_sql), parse_clauses(gold_sql)) {
        (Ok(p), Ok(g)) => p == g,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchmarkExample {
    pub id: String,
    pub question: String,
    pub database_id: String,
    pub gold_sql: String,
}

#[derive(Deserialize)]
struct RawExample {
    #[serde(default)]
    id: Option<serde_json::Value>,
    question: String,
    db_id: String,
    query: String,
}

/// Reads a JSON array of `{question, db_id, query}` objects. An optional
/// `id` is kept; otherwise examples are numbered from 0.
pub fn load_dataset(path: &Path) -> Result<Vec<BenchmarkExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<RawExample> =
        serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let width = raw.len().saturating_sub(1).to_string().len().max(3);
    let examples: Vec<BenchmarkExample> = raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| BenchmarkExample {
            id: match r.id {
                Some(serde_json::Value::String(s)) => s,
                Some(other) => other.to_string(),
                None => format!("{i:0width$}"),
            },
            question: r.question,
            database_id: r.db_id,
            gold_sql: r.query,
        })
        .collect();
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = examples.iter().find(|e| !seen.insert(e.id.as_str())) {
        return Err(Error::Dataset(format!("duplicate example id {}", dup.id)));
    }
    Ok(examples)
}

pub fn database_path(root: &Path, db_id: &str) -> PathBuf {
    root.join(db_id).join(format!("{db_id}.sqlite"))
}

/// Resolves every database up front, listing all failures together.
pub fn resolve_databases(examples: &[BenchmarkExample], root: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut resolved = BTreeMap::new();
    let mut failures = Vec::new();
    for ex in examples {
        if resolved.contains_key(&ex.database_id) {
            continue;
        }
        let path = database_path(root, &ex.database_id);
        match Database::open(&path) {
            Ok(_) => {
                resolved.insert(ex.database_id.clone(), path);
            }
            Err(e) => failures.push(format!("{}: {e}", ex.database_id)),
        }
    }
    failures.dedup();
    if failures.is_empty() {
        Ok(resolved)
    } else {
        Err(Error::Dataset(format!("unresolved databases: {}", failures.join("; "))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleScore {
    pub id: String,
    pub db_id: String,
    pub ex: bool,
    pub em: bool,
    pub precise_sql: Option<String>,
    pub gave_up: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub n: usize,
    pub ex_accuracy: f64,
    pub em_accuracy: f64,
    pub per_example: Vec<ExampleScore>,
}

impl Report {
    pub fn from_scores(per_example: Vec<ExampleScore>) -> Self {
        let n = per_example.len();
        let mean = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
        Self {
            n,
            ex_accuracy: mean(per_example.iter().filter(|s| s.ex).count()),
            em_accuracy: mean(per_example.iter().filter(|s| s.em).count()),
            per_example,
        }
    }

    pub fn ex_count(&self) -> usize {
        self.per_example.iter().filter(|s| s.ex).count()
    }

    pub fn em_count(&self) -> usize {
        self.per_example.iter().filter(|s| s.em).count()
    }

    /// `EX a/n (p%)  EM b/n (q%)`
    pub fn summary(&self) -> String {
        format!(
            "EX {}/{} ({:.1}%)  EM {}/{} ({:.1}%)",
            self.ex_count(),
            self.n,
            self.ex_accuracy * 100.0,
            self.em_count(),
            self.n,
            self.em_accuracy * 100.0
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// Scores one pipeline result against its gold query.
pub fn score_example(example: &BenchmarkExample, result: &PipelineResult, db: &Database) -> ExampleScore {
    let mut error = result.error.clone();
    let (ex, em) = match &result.precise_sql {
        Some(pred) if !result.gave_up => {
            let ex = execution_accuracy(pred, &example.gold_sql, db).unwrap_or_else(|e| {
                error = Some(e.to_string());
                false
            });
            (ex, exact_set_match(pred, &example.gold_sql))
        }
        _ => (false, false),
    };
    ExampleScore {
        id: example.id.clone(),
        db_id: example.database_id.clone(),
        ex,
        em,
        precise_sql: result.precise_sql.clone(),
        gave_up: result.gave_up,
        error,
    }
}

fn trace_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

fn prepare_out_dir(out_dir: &Path) -> Result<PathBuf> {
    let traces = out_dir.join("traces");
    fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
    let probe = out_dir.join(".write-check");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))?;
    Ok(traces)
}

pub struct BenchmarkRun<'a> {
    pub dataset_path: &'a Path,
    pub databases_root: &'a Path,
    pub out_dir: &'a Path,
    pub config: &'a PipelineConfig,
    pub workers: usize,
}

/// Runs every example, scores it, and writes `report.json` plus
/// `traces/<id>.json` under the output directory.
///
/// Each question sees the knowledge table as it was before the run plus what
/// it mines itself; newly mined entries are merged back in dataset order, so
/// results do not depend on scheduling.
pub fn run_benchmark(run: &BenchmarkRun<'_>, adapters: &Adapters, knowledge: &mut KnowledgeTable) -> Result<Report> {
    let examples = load_dataset(run.dataset_path)?;
    if examples.is_empty() {
        return Err(Error::Dataset("no examples".into()));
    }
    let databases = resolve_databases(&examples, run.databases_root)?;
    let traces_dir = prepare_out_dir(run.out_dir)?;

    let base = knowledge.clone();
    let mode = run.config.mode;
    let outcomes: Vec<(ExampleScore, PipelineResult, KnowledgeTable)> = with_workers(mode, run.workers, || {
        map_slice(mode, &examples, |example| {
            let mut local = base.clone();
            let path = &databases[&example.database_id];
            match Database::open(path) {
                Ok(db) => {
                    let result = run_pipeline(&example.id, &example.question, &db, &mut local, adapters, run.config);
                    (score_example(example, &result, &db), result, local)
                }
                Err(e) => {
                    let mut result = PipelineResult::failed(&example.id, &example.question, &example.database_id, &e);
                    result.trace.note(format!("database open failed: {e}"));
                    let score = ExampleScore {
                        id: example.id.clone(),
                        db_id: example.database_id.clone(),
                        ex: false,
                        em: false,
                        precise_sql: None,
                        gave_up: true,
                        error: Some(e.to_string()),
                    };
                    (score, result, local)
                }
            }
        })
    });

    let mut scores = Vec::with_capacity(outcomes.len());
    for (score, result, local) in outcomes {
        for entry in local.entries() {
            knowledge.upsert(entry.clone());
        }
        let path = traces_dir.join(trace_file_name(&result.question_id));
        fs::write(&path, result.to_json()).map_err(|e| Error::io(&path, e))?;
        scores.push(score);
    }
    let report = Report::from_scores(scores);
    let path = run.out_dir.join("report.json");
    fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
