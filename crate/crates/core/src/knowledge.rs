//! Encoding knowledge: classification of probe results, the five-field
//! knowledge table, import from relationship-matching tables, and cosine
//! alignment of keywords to knowledge records.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::db::{quote_ident, Database};
use crate::error::{Error, Result};
use crate::extraction::Keyword;
use crate::fuzzer::SearchResult;
use crate::llm::{Embedder, EmbeddingVector};
use crate::parallel::{map_slice, ExecutionMode};
use crate::schema::{introspect, DatabaseSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    RelationTable,
    FuzzMined,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodingKnowledge {
    pub keyword: String,
    #[serde(rename = "database")]
    pub database_name: String,
    #[serde(rename = "table")]
    pub table_name: String,
    #[serde(rename = "column")]
    pub column_name: String,
    #[serde(rename = "value")]
    pub stored_value: String,
    pub provenance: Provenance,
}

impl EncodingKnowledge {
    pub fn new(
        keyword: impl Into<String>,
        database_name: impl Into<String>,
        table_name: impl Into<String>,
        column_name: impl Into<String>,
        stored_value: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        let ek = Self {
            keyword: keyword.into(),
            database_name: database_name.into(),
            table_name: table_name.into(),
            column_name: column_name.into(),
            stored_value: stored_value.into(),
            provenance,
        };
        ek.check_fields()?;
        Ok(ek)
    }

    fn check_fields(&self) -> Result<()> {
        let fields = [
            ("keyword", &self.keyword),
            ("database", &self.database_name),
            ("table", &self.table_name),
            ("column", &self.column_name),
            ("value", &self.stored_value),
        ];
        match fields.iter().find(|(_, v)| v.trim().is_empty()) {
            Some((name, _)) => Err(Error::InvalidKnowledge(format!("empty {name}"))),
            None => Ok(()),
        }
    }

    /// Checks that the (table, column) binding exists in `schema`.
    pub fn validate_against(&self, schema: &DatabaseSchema) -> Result<()> {
        if self.database_name != schema.database_name {
            return Err(Error::InvalidKnowledge(format!(
                "record is for database {}, not {}",
                self.database_name, schema.database_name
            )));
        }
        if !schema.has_column(&self.table_name, &self.column_name) {
            return Err(Error::UnknownColumn {
                table: self.table_name.clone(),
                column: self.column_name.clone(),
            });
        }
        Ok(())
    }

    fn content_key(&self) -> (&str, &str, &str, &str, &str) {
        (
            &self.keyword,
            &self.database_name,
            &self.table_name,
            &self.column_name,
            &self.stored_value,
        )
    }

    /// Text embedded for alignment: `keyword | table.column | value`.
    pub fn embedding_text(&self) -> String {
        format!(
            "{} | {}.{} | {}",
            self.keyword, self.table_name, self.column_name, self.stored_value
        )
    }

    /// The JSON object shown to the model (provenance omitted).
    pub fn prompt_json(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("strings serialize");
        format!(
            "{{\"keyword\": {}, \"database\": {}, \"table\": {}, \"column\": {}, \"value\": {}}}",
            q(&self.keyword),
            q(&self.database_name),
            q(&self.table_name),
            q(&self.column_name),
            q(&self.stored_value)
        )
    }
}

/// One line per record, or `none`.
pub fn render_knowledge_prompt(knowledge: &[EncodingKnowledge]) -> String {
    if knowledge.is_empty() {
        return "none".to_string();
    }
    let mut out = String::new();
    for (i, ek) in knowledge.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{}", ek.prompt_json());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    UniqueValue(String),
    /// More than one distinct value, or a truncated result.
    Multiple,
    NoValue,
}

impl Classification {
    pub fn is_discard(&self) -> bool {
        !matches!(self, Classification::UniqueValue(_))
    }
}

pub fn classify(result: &SearchResult) -> Classification {
    let mut seen: Vec<&String> = Vec::new();
    for v in &result.distinct_values {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    match (seen.len(), result.truncated) {
        (0, false) => Classification::NoValue,
        (1, false) => Classification::UniqueValue(seen[0].clone()),
        _ => Classification::Multiple,
    }
}

/// Turns a unique probe hit into a mined knowledge record.
pub fn normalize(keyword: &Keyword, database_name: &str, result: &SearchResult) -> Result<EncodingKnowledge> {
    match classify(result) {
        Classification::UniqueValue(value) => EncodingKnowledge::new(
            keyword.surface.clone(),
            database_name,
            result.seed.table.clone(),
            result.seed.column.clone(),
            value,
            Provenance::FuzzMined,
        ),
        _ => Err(Error::NotUnique),
    }
}

/// Append-ordered knowledge store with exact-duplicate suppression.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KnowledgeTable {
    entries: Vec<EncodingKnowledge>,
}

impl KnowledgeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[EncodingKnowledge] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends `ek` unless a record with the same five content fields exists.
    /// Returns whether the table grew.
    pub fn upsert(&mut self, ek: EncodingKnowledge) -> bool {
        if self.entries.iter().any(|e| e.content_key() == ek.content_key()) {
            return false;
        }
        self.entries.push(ek);
        true
    }

    pub fn entries_for(&self, database_name: &str) -> Vec<EncodingKnowledge> {
        self.entries
            .iter()
            .filter(|e| e.database_name == database_name)
            .cloned()
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("knowledge records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut table = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ek: EncodingKnowledge =
                serde_json::from_str(line).map_err(|e| Error::InvalidKnowledge(format!("line {}: {e}", i + 1)))?;
            ek.check_fields()
                .map_err(|e| Error::InvalidKnowledge(format!("line {}: {e}", i + 1)))?;
            table.upsert(ek);
        }
        Ok(table)
    }

    /// Loads a JSON Lines file; a missing file is an empty table.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_jsonl(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// Where the encoded column name of a relationship-matching row comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetColumn {
    /// Every row maps onto this column.
    Fixed(String),
    /// Each row names its column in this mapping-table column.
    FromColumn(String),
}

/// Describes a relationship-matching table: each row maps a domain phrase
/// to a value of an encoded column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRelationMapping")]
pub struct RelationMapping {
    pub table: String,
    pub keyword_column: String,
    pub target_table: String,
    pub target_column: TargetColumn,
    pub target_value_column: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelationMapping {
    table: String,
    keyword_column: String,
    target_table: String,
    target_column: Option<String>,
    target_column_from: Option<String>,
    target_value_column: String,
}

impl TryFrom<RawRelationMapping> for RelationMapping {
    type Error = String;

    fn try_from(raw: RawRelationMapping) -> std::result::Result<Self, String> {
        let target_column = match (raw.target_column, raw.target_column_from) {
            (Some(c), None) => TargetColumn::Fixed(c),
            (None, Some(c)) => TargetColumn::FromColumn(c),
            _ => return Err("set exactly one of target_column or target_column_from".into()),
        };
        Ok(Self {
            table: raw.table,
            keyword_column: raw.keyword_column,
            target_table: raw.target_table,
            target_column,
            target_value_column: raw.target_value_column,
        })
    }
}

/// Reads one knowledge record per row of the relationship-matching table.
pub fn import_relation_knowledge(db: &Database, mapping: &RelationMapping) -> Result<Vec<EncodingKnowledge>> {
    let schema = introspect(db)?;
    let missing = |what: String| Error::RelationMapping(what);
    let source = schema
        .table(&mapping.table)
        .ok_or_else(|| missing(format!("no table {}", mapping.table)))?;
    let col = |name: &str| {
        source
            .column(name)
            .map(|c| c.name.clone())
            .ok_or_else(|| missing(format!("no column {}.{name}", source.name)))
    };
    let keyword_col = col(&mapping.keyword_column)?;
    let value_col = col(&mapping.target_value_column)?;
    let target = schema
        .table(&mapping.target_table)
        .ok_or_else(|| missing(format!("no target table {}", mapping.target_table)))?;
    let target_col_expr = match &mapping.target_column {
        TargetColumn::Fixed(name) => {
            let c = target
                .column(name)
                .ok_or_else(|| missing(format!("no target column {}.{name}", target.name)))?;
            crate::db::quote_literal(&c.name)
        }
        TargetColumn::FromColumn(name) => quote_ident(&col(name)?),
    };

    let sql = format!(
        "SELECT {}, {}, {} FROM {} ORDER BY rowid",
        quote_ident(&keyword_col),
        target_col_expr,
        quote_ident(&value_col),
        quote_ident(&source.name)
    );
    let conn = db.connection();
    let mut stmt = conn
        .prepare(&sql)
        .or_else(|_| conn.prepare(sql.trim_end_matches(" ORDER BY rowid")))?;
    let rows: Vec<[Option<String>; 3]> = stmt
        .query_map([], |r| {
            let text = |i: usize| -> rusqlite::Result<Option<String>> {
                Ok(crate::value::SqlValue::from_ref(r.get_ref(i)?).as_text())
            };
            Ok([text(0)?, text(1)?, text(2)?])
        })?
        .collect::<std::result::Result<_, _>>()?;

    let mut out = Vec::with_capacity(rows.len());
    for [keyword, column, value] in rows {
        let (Some(keyword), Some(column), Some(value)) = (keyword, column, value) else {
            log::warn!("skipping relation row with NULL field in {}", source.name);
            continue;
        };
        let column = target
            .column(&column)
            .ok_or_else(|| missing(format!("row names unknown column {}.{column}", target.name)))?;
        match EncodingKnowledge::new(
            keyword,
            schema.database_name.clone(),
            target.name.clone(),
            column.name.clone(),
            value,
            Provenance::RelationTable,
        ) {
            Ok(ek) => out.push(ek),
            Err(e) => log::warn!("skipping relation row: {e}"),
        }
    }
    Ok(out)
}

pub fn cosine(v: &EmbeddingVector, w: &EmbeddingVector) -> Result<f64> {
    if v.dimension() != w.dimension() {
        return Err(Error::DimensionMismatch(v.dimension(), w.dimension()));
    }
    let (mut dot, mut nv, mut nw) = (0.0, 0.0, 0.0);
    for (a, b) in v.values().iter().zip(w.values()) {
        dot += a * b;
        nv += a * a;
        nw += b * b;
    }
    if nv == 0.0 || nw == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nv.sqrt() * nw.sqrt())).clamp(-1.0, 1.0))
}

/// Index and score of the candidate most similar to `query`; the earliest
/// wins ties. `None` for no candidates.
pub fn argmax_cosine(
    query: &EmbeddingVector,
    candidates: &[EmbeddingVector],
    mode: ExecutionMode,
) -> Result<Option<(usize, f64)>> {
    let scores = map_slice(mode, candidates, |c| cosine(query, c));
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scores.into_iter().enumerate() {
        let score = score?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult {
    pub keyword: String,
    pub best: Option<EncodingKnowledge>,
    pub score: Option<f64>,
}

/// Picks the record whose embedding is closest to the keyword surface.
pub fn align(
    keyword: &str,
    entries: &[EncodingKnowledge],
    embedder: &dyn Embedder,
    mode: ExecutionMode,
) -> Result<AlignmentResult> {
    if entries.is_empty() {
        return Ok(AlignmentResult {
            keyword: keyword.to_string(),
            best: None,
            score: None,
        });
    }
    let query = embedder.embed(keyword)?;
    let vectors = map_slice(mode, entries, |e| embedder.embed(&e.embedding_text()))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let best = argmax_cosine(&query, &vectors, mode)?;
    Ok(AlignmentResult {
        keyword: keyword.to_string(),
        best: best.map(|(i, _)| entries[i].clone()),
        score: best.map(|(_, s)| s),
    })
}

/// Convenience over a whole table.
pub fn align_table(
    keyword: &Keyword,
    table: &KnowledgeTable,
    embedder: &dyn Embedder,
    mode: ExecutionMode,
) -> Result<AlignmentResult> {
    align(&keyword.surface, table.entries(), embedder, mode)
}

/// Brute-force distinct count, kept apart from [`classify`] for
/// cross-checking.
pub fn distinct_count(values: &[String]) -> usize {
    values.iter().collect::<HashSet<_>>().len()
}
