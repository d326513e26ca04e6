//! Fuzzy detection: seed pools, type-aware mutation into probe queries, and
//! read-only execution of every probe.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;

use crate::db::{quote_ident, quote_literal, Database, QueryLimits};
use crate::error::{Error, Result};
use crate::extraction::{Keyword, KeywordKind, KeywordSet};
use crate::llm::{bindings, Adapters, TemplateId};
use crate::schema::ContentSamples;
use crate::trace::{Trace, TraceEvent};

/// Sample values shown to the model per keyword.
const MAX_PROMPT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzConfig {
    pub max_synonyms: usize,
    pub row_limit: usize,
    pub statement_timeout: Duration,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            max_synonyms: 5,
            row_limit: 20,
            statement_timeout: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SqlSkeleton {
    ExactMatch,
    LikeMatch,
}

impl SqlSkeleton {
    pub const ALL: [SqlSkeleton; 2] = [SqlSkeleton::ExactMatch, SqlSkeleton::LikeMatch];

    pub fn pattern(self) -> &'static str {
        match self {
            SqlSkeleton::ExactMatch => "SELECT DISTINCT {CN} FROM {TN} WHERE {CN} = {DC}",
            SqlSkeleton::LikeMatch => "SELECT DISTINCT {CN} FROM {TN} WHERE {CN} LIKE '%{DC}%'",
        }
    }
}

/// Renders one probe. Identifiers are double-quoted; in `LIKE` probes the
/// wildcards `%` and `_` in the value are escaped with `\`.
pub fn render_seed(skeleton: SqlSkeleton, table: &str, column: &str, value: &str) -> String {
    let col = quote_ident(column);
    let tab = quote_ident(table);
    match skeleton {
        SqlSkeleton::ExactMatch => {
            format!(
                "SELECT DISTINCT {col} FROM {tab} WHERE {col} = {}",
                quote_literal(value)
            )
        }
        SqlSkeleton::LikeMatch => {
            let needs_escape = value.contains(['%', '_', '\\']);
            let escaped: String = if needs_escape {
                value
                    .chars()
                    .flat_map(|c| match c {
                        '%' | '_' | '\\' => vec!['\\', c],
                        _ => vec![c],
                    })
                    .collect()
            } else {
                value.to_string()
            };
            let pattern = quote_literal(&format!("%{escaped}%"));
            if needs_escape {
                format!("SELECT DISTINCT {col} FROM {tab} WHERE {col} LIKE {pattern} ESCAPE '\\'")
            } else {
                format!("SELECT DISTINCT {col} FROM {tab} WHERE {col} LIKE {pattern}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedPool {
    keyword: Keyword,
    columns: Vec<String>,
    values: Vec<String>,
    skeletons: Vec<SqlSkeleton>,
}

impl SeedPool {
    /// Validates a pool: non-empty columns and values, values unique ignoring
    /// case, the keyword surface among them, at most `1 + max_synonyms` values.
    pub fn new(
        keyword: Keyword,
        columns: Vec<String>,
        values: Vec<String>,
        skeletons: Vec<SqlSkeleton>,
        max_synonyms: usize,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidSeedPool("no columns".into()));
        }
        if values.is_empty() {
            return Err(Error::InvalidSeedPool("no values".into()));
        }
        if values.len() > 1 + max_synonyms {
            return Err(Error::InvalidSeedPool(format!(
                "{} values exceed 1 + {max_synonyms}",
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].iter().any(|w| w.to_lowercase() == v.to_lowercase()) {
                return Err(Error::InvalidSeedPool(format!("duplicate value {v:?}")));
            }
        }
        if !values.iter().any(|v| v == &keyword.surface) {
            return Err(Error::InvalidSeedPool("keyword surface missing from values".into()));
        }
        Ok(Self {
            keyword,
            columns,
            values,
            skeletons,
        })
    }

    /// Pool for a keyword from its candidate columns, its surface plus the
    /// proposed synonyms (deduplicated), and both skeletons.
    pub fn for_keyword(keyword: &Keyword, synonyms: &[String], max_synonyms: usize) -> Result<Self> {
        let mut values = vec![keyword.surface.clone()];
        for s in synonyms.iter().take(max_synonyms) {
            if !values.iter().any(|v| v.to_lowercase() == s.to_lowercase()) {
                values.push(s.clone());
            }
        }
        Self::new(
            keyword.clone(),
            keyword.candidate_columns.clone(),
            values,
            SqlSkeleton::ALL.to_vec(),
            max_synonyms,
        )
    }

    pub fn keyword(&self) -> &Keyword {
        &self.keyword
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedSql {
    pub keyword_surface: String,
    pub table: String,
    pub column: String,
    pub probe_value: String,
    pub skeleton: SqlSkeleton,
    pub sql_text: String,
}

/// Every (column, value, skeleton) combination, column-major, without
/// duplicate SQL text.
pub fn enumerate_seed_sql(pool: &SeedPool) -> Vec<SeedSql> {
    let mut out: Vec<SeedSql> = Vec::with_capacity(pool.columns.len() * pool.values.len() * pool.skeletons.len());
    let table = &pool.keyword.table;
    for column in &pool.columns {
        for value in &pool.values {
            for &skeleton in &pool.skeletons {
                let sql_text = render_seed(skeleton, table, column, value);
                if out.iter().any(|s| s.sql_text == sql_text) {
                    continue;
                }
                out.push(SeedSql {
                    keyword_surface: pool.keyword.surface.clone(),
                    table: table.clone(),
                    column: column.clone(),
                    probe_value: value.clone(),
                    skeleton,
                    sql_text,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchResult {
    pub seed: SeedSql,
    pub distinct_values: Vec<String>,
    pub truncated: bool,
    pub row_limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs one probe. SQL failures become an empty result carrying the error.
pub fn execute_seed(db: &Database, seed: SeedSql, config: &FuzzConfig) -> SearchResult {
    let limits = QueryLimits {
        max_rows: config.row_limit,
        timeout: config.statement_timeout,
    };
    match db.query(&seed.sql_text, &limits) {
        Ok(rows) => {
            let mut values: Vec<String> = Vec::with_capacity(rows.rows.len());
            for row in &rows.rows {
                if let Some(text) = row.first().and_then(|v| v.as_text()) {
                    if !values.contains(&text) {
                        values.push(text);
                    }
                }
            }
            SearchResult {
                seed,
                distinct_values: values,
                truncated: rows.truncated,
                row_limit: config.row_limit,
                error: None,
            }
        }
        Err(e) => SearchResult {
            seed,
            distinct_values: Vec::new(),
            truncated: false,
            row_limit: config.row_limit,
            error: Some(e.to_string()),
        },
    }
}

/// Reads a list of candidate values from a model reply: a JSON array if one
/// is present, otherwise one value per line.
pub fn parse_value_list(reply: &str) -> Vec<String> {
    let mut candidates: Vec<String> = Vec::new();
    let json_list = reply.find('[').and_then(|start| {
        let end = reply[start..].find(']')? + start;
        let slice = &reply[start..=end];
        serde_json::from_str::<Vec<serde_json::Value>>(slice)
            .ok()
            .or_else(|| serde_json::from_str(&slice.replace('\'', "\"")).ok())
    });
    match json_list {
        Some(items) => {
            for item in items {
                match item {
                    serde_json::Value::String(s) => candidates.push(s),
                    serde_json::Value::Null => {}
                    other => candidates.push(other.to_string()),
                }
            }
        }
        None => {
            for line in reply.lines() {
                let line = line.trim();
                if line.starts_with("```") {
                    continue;
                }
                let line = line
                    .trim_start_matches(|c: char| c.is_ascii_digit())
                    .trim_start_matches(['-', '*', '.', ')'])
                    .trim();
                candidates.push(line.trim_matches(['"', '\'', ',']).to_string());
            }
        }
    }
    candidates
}

/// Asks the model for likely stored forms of the keyword. Failures degrade to
/// an empty list since the surface itself still probes.
pub fn propose_synonyms(
    keyword: &Keyword,
    column_samples: &[String],
    adapters: &Adapters,
    max_synonyms: usize,
    trace: &mut Trace,
) -> Vec<String> {
    let samples = format!(
        "[{}]",
        column_samples
            .iter()
            .map(|s| quote_literal(s))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let request = match adapters.request(
        TemplateId::FuzzyDetection,
        bindings([
            ("keyword", keyword.surface.clone()),
            ("column", keyword.candidate_columns.join(", ")),
            ("datasamples", samples),
        ]),
    ) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("synonym request for {:?} not built: {e}", keyword.surface);
            return Vec::new();
        }
    };
    let reply = match trace.complete(adapters.chat.as_ref(), &request) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("no synonyms for {:?}: {e}", keyword.surface);
            return Vec::new();
        }
    };
    let mut out: Vec<String> = Vec::new();
    for candidate in parse_value_list(&reply) {
        let candidate = candidate.trim().to_string();
        if candidate.is_empty() || out.iter().any(|o| o.to_lowercase() == candidate.to_lowercase()) {
            continue;
        }
        out.push(candidate);
        if out.len() == max_synonyms {
            break;
        }
    }
    out
}

/// Distinct sample values of the keyword's candidate columns.
pub fn column_samples(
    keyword: &Keyword,
    samples: &BTreeMap<String, ContentSamples>,
    table_columns: &[String],
) -> Vec<String> {
    let Some(s) = samples.get(&keyword.table) else {
        return Vec::new();
    };
    let mut out: Vec<String> = Vec::new();
    for col in &keyword.candidate_columns {
        if let Some(idx) = table_columns.iter().position(|c| c == col) {
            for v in s.column_values(idx) {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
    }
    out.truncate(MAX_PROMPT_SAMPLES);
    out
}

/// Builds the pool for every data-content keyword and executes every seed.
/// Schema keywords are not probed.
pub fn fuzzy_detect(
    keywords: &KeywordSet,
    db: &Database,
    adapters: &Adapters,
    samples: &BTreeMap<String, ContentSamples>,
    schema: &crate::schema::DatabaseSchema,
    config: &FuzzConfig,
    trace: &mut Trace,
) -> Result<Vec<(Keyword, Vec<SearchResult>)>> {
    let mut out = Vec::new();
    for keyword in keywords.keywords.iter().filter(|k| k.kind == KeywordKind::DataContent) {
        let table_columns: Vec<String> = schema
            .table(&keyword.table)
            .map(|t| t.columns.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default();
        let shown = column_samples(keyword, samples, &table_columns);
        let synonyms = propose_synonyms(keyword, &shown, adapters, config.max_synonyms, trace);
        let pool = SeedPool::for_keyword(keyword, &synonyms, config.max_synonyms)?;
        let mut results = Vec::new();
        for seed in enumerate_seed_sql(&pool) {
            let result = execute_seed(db, seed, config);
            trace.events.push(TraceEvent::Probe {
                sql: result.seed.sql_text.clone(),
                values: result.distinct_values.clone(),
                truncated: result.truncated,
                error: result.error.clone(),
            });
            results.push(result);
        }
        out.push((keyword.clone(), results));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keyword(surface: &str, cols: &[&str]) -> Keyword {
        Keyword {
            surface: surface.into(),
            kind: KeywordKind::DataContent,
            table: "nationalecodata".into(),
            candidate_columns: cols.iter().map(|c| c.to_string()).collect(),
        }
    }

    #[test]
    fn exact_and_like_rendering() {
        assert_eq!(
            render_seed(SqlSkeleton::ExactMatch, "nationalecodata", "indexname", "GDP growth"),
            r#"SELECT DISTINCT "indexname" FROM "nationalecodata" WHERE "indexname" = 'GDP growth'"#
        );
        assert_eq!(
            render_seed(SqlSkeleton::LikeMatch, "nationalecodata", "indexname", "GDP growth"),
            r#"SELECT DISTINCT "indexname" FROM "nationalecodata" WHERE "indexname" LIKE '%GDP growth%'"#
        );
    }

    #[test]
    fn quotes_and_wildcards_are_escaped() {
        assert!(render_seed(SqlSkeleton::ExactMatch, "t", "c", "O'Neil").ends_with("= 'O''Neil'"));
        assert!(render_seed(SqlSkeleton::LikeMatch, "t", "c", "50%").ends_with(r"LIKE '%50\%%' ESCAPE '\'"));
        assert!(render_seed(SqlSkeleton::LikeMatch, "t", "c", "a_b").contains(r"'%a\_b%'"));
        assert!(render_seed(SqlSkeleton::ExactMatch, "we\"ird", "c", "x").contains(r#"FROM "we""ird""#));
    }

    #[test]
    fn product_counts() {
        let kw = keyword("a", &["c1", "c2"]);
        let pool = SeedPool::for_keyword(&kw, &["b".into(), "c".into()], 5).unwrap();
        assert_eq!(enumerate_seed_sql(&pool).len(), 12);

        let kw = keyword("a", &["c1"]);
        let pool = SeedPool::for_keyword(&kw, &[], 5).unwrap();
        let seeds = enumerate_seed_sql(&pool);
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds[0].skeleton, SqlSkeleton::ExactMatch);
        assert_eq!(seeds[1].skeleton, SqlSkeleton::LikeMatch);
    }

    #[test]
    fn enumeration_is_column_major() {
        let kw = keyword("a", &["c1", "c2"]);
        let pool = SeedPool::for_keyword(&kw, &["b".into()], 5).unwrap();
        let order: Vec<_> = enumerate_seed_sql(&pool)
            .into_iter()
            .map(|s| (s.column, s.probe_value, s.skeleton))
            .collect();
        assert_eq!(order[0], ("c1".into(), "a".into(), SqlSkeleton::ExactMatch));
        assert_eq!(order[1], ("c1".into(), "a".into(), SqlSkeleton::LikeMatch));
        assert_eq!(order[2], ("c1".into(), "b".into(), SqlSkeleton::ExactMatch));
        assert_eq!(order[4], ("c2".into(), "a".into(), SqlSkeleton::ExactMatch));
    }

    #[test]
    fn pool_invariants() {
        let kw = keyword("a", &["c1"]);
        let dup = SeedPool::new(
            kw.clone(),
            vec!["c1".into()],
            vec!["a".into(), "a".into()],
            SqlSkeleton::ALL.to_vec(),
            5,
        );
        assert!(dup.is_err());
        let case_dup = SeedPool::new(
            kw.clone(),
            vec!["c1".into()],
            vec!["a".into(), "A".into()],
            SqlSkeleton::ALL.to_vec(),
            5,
        );
        assert!(case_dup.is_err());
        let no_surface = SeedPool::new(
            kw.clone(),
            vec!["c1".into()],
            vec!["b".into()],
            SqlSkeleton::ALL.to_vec(),
            5,
        );
        assert!(no_surface.is_err());
        let too_many: Vec<String> = (0..7)
            .map(|i| if i == 0 { "a".into() } else { format!("v{i}") })
            .collect();
        assert!(SeedPool::new(kw.clone(), vec!["c1".into()], too_many, SqlSkeleton::ALL.to_vec(), 5).is_err());
        // Synonym equal to the surface collapses.
        let pool = SeedPool::for_keyword(&kw, &["A".into(), "b".into()], 5).unwrap();
        assert_eq!(pool.values(), ["a", "b"]);
    }

    #[test]
    fn value_list_parsing() {
        assert_eq!(
            parse_value_list(r#"["GDP growth", "GDP growth(%)"]"#),
            ["GDP growth", "GDP growth(%)"]
        );
        assert_eq!(parse_value_list("['USA', 'usa']"), ["USA", "usa"]);
        assert_eq!(parse_value_list("- one\n- two\n"), ["one", "two"]);
        assert_eq!(parse_value_list("1. one\n2) two"), ["one", "two"]);
    }
}
