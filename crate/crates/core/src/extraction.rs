//! Keyword extraction: asks the model for data-content and schema keywords
//! and binds each to one table and its candidate columns.
//!
//! The model answers one keyword per line:
//!
//! ```text
//! GDP growth rate | data | nationalecodata | indexname, indexcode
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::llm::{bindings, Adapters, TemplateId};
use crate::schema::{DatabaseSchema, SchemaPrompt};
use crate::trace::Trace;

pub const REPROMPT_NOTE: &str = "answer strictly in the specified format";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum KeywordKind {
    DataContent,
    Schema,
}

impl KeywordKind {
    fn parse(field: &str) -> Option<Self> {
        match field.trim().to_ascii_lowercase().as_str() {
            "data" | "data content" | "datacontent" | "content" | "value" => Some(KeywordKind::DataContent),
            "schema" => Some(KeywordKind::Schema),
            _ => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            KeywordKind::DataContent => "data",
            KeywordKind::Schema => "schema",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Keyword {
    pub surface: String,
    pub kind: KeywordKind,
    pub table: String,
    pub candidate_columns: Vec<String>,
}

impl Keyword {
    /// Renders the keyword in the extraction answer format.
    pub fn to_line(&self) -> String {
        format!(
            "{} | {} | {} | {}",
            self.surface,
            self.kind.label(),
            self.table,
            self.candidate_columns.join(", ")
        )
    }

    /// Whether the binding names an existing table and existing columns.
    pub fn is_valid_for(&self, schema: &DatabaseSchema) -> bool {
        !self.surface.trim().is_empty()
            && !self.candidate_columns.is_empty()
            && schema.table(&self.table).is_some()
            && self.candidate_columns.iter().all(|c| schema.has_column(&self.table, c))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KeywordSet {
    pub question_id: String,
    pub keywords: Vec<Keyword>,
}

impl KeywordSet {
    /// Builds a set, merging keywords that share a (surface, table) pair.
    pub fn new(question_id: impl Into<String>, keywords: Vec<Keyword>) -> Self {
        let mut merged: Vec<Keyword> = Vec::with_capacity(keywords.len());
        for kw in keywords {
            match merged
                .iter_mut()
                .find(|m| m.surface.eq_ignore_ascii_case(&kw.surface) && m.table == kw.table)
            {
                Some(existing) => {
                    for c in kw.candidate_columns {
                        if !existing.candidate_columns.contains(&c) {
                            existing.candidate_columns.push(c);
                        }
                    }
                }
                None => merged.push(kw),
            }
        }
        Self {
            question_id: question_id.into(),
            keywords: merged,
        }
    }

    pub fn data_content(&self) -> impl Iterator<Item = &Keyword> {
        self.keywords.iter().filter(|k| k.kind == KeywordKind::DataContent)
    }

    pub fn to_text(&self) -> String {
        self.keywords.iter().map(|k| k.to_line() + "\n").collect()
    }
}

fn is_skippable(line: &str) -> bool {
    line.is_empty() || line.starts_with("```") || line.eq_ignore_ascii_case("### answer:")
}

/// Parses the line-oriented extraction answer against `schema`.
///
/// Malformed lines are errors. Well-formed lines whose bindings do not fit the
/// schema are repaired: extra tables after the first valid one are ignored,
/// unknown columns are dropped, and a keyword with no valid column left is
/// dropped entirely.
pub fn parse_extraction(response: &str, schema: &DatabaseSchema) -> Result<Vec<Keyword>> {
    let mut out = Vec::new();
    for (idx, raw) in response.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if is_skippable(line) {
            continue;
        }
        let line = line.trim_start_matches(['-', '*']).trim();
        let fields: Vec<&str> = line.split('|').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::ExtractionParse {
                line: line_no,
                message: format!("expected 4 '|'-separated fields, found {}", fields.len()),
            });
        }
        let surface = fields[0].trim_matches(['"', '\'']).trim();
        if surface.is_empty() {
            return Err(Error::ExtractionParse {
                line: line_no,
                message: "empty keyword".into(),
            });
        }
        let kind = KeywordKind::parse(fields[1]).ok_or_else(|| Error::ExtractionParse {
            line: line_no,
            message: format!("unknown keyword kind {:?}", fields[1]),
        })?;

        let listed: Vec<&str> = fields[2].split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
        let Some(table) = listed.iter().find_map(|t| schema.table(t)) else {
            log::warn!(
                "line {line_no}: dropping {surface:?}, no known table in {:?}",
                fields[2]
            );
            continue;
        };
        if listed.len() > 1 {
            log::warn!(
                "line {line_no}: {surface:?} lists several tables, keeping {}",
                table.name
            );
        }

        let mut columns: Vec<String> = Vec::new();
        for col in fields[3].split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let bare = match col.split_once('.') {
                Some((prefix, rest)) if prefix.eq_ignore_ascii_case(&table.name) => rest,
                _ => col,
            };
            match table.column(bare) {
                Some(info) if !columns.contains(&info.name) => columns.push(info.name.clone()),
                Some(_) => {}
                None => log::warn!("line {line_no}: dropping unknown column {}.{bare}", table.name),
            }
        }
        if columns.is_empty() {
            log::warn!("line {line_no}: dropping {surface:?}, no valid column");
            continue;
        }
        out.push(Keyword {
            surface: surface.to_string(),
            kind,
            table: table.name.clone(),
            candidate_columns: columns,
        });
    }
    Ok(out)
}

/// Runs the extraction prompt, reprompting once if the answer does not parse.
pub fn extract_keywords(
    question_id: &str,
    question: &str,
    schema: &DatabaseSchema,
    prompt: &SchemaPrompt,
    adapters: &Adapters,
    trace: &mut Trace,
) -> Result<KeywordSet> {
    let request = adapters.request(
        TemplateId::KeywordExtraction,
        bindings([
            ("desc_str", prompt.desc_str.clone()),
            ("fk_str", prompt.fk_str.clone()),
            ("query", question.to_string()),
        ]),
    )?;
    let reply = trace.complete(adapters.chat.as_ref(), &request)?;
    let keywords = match parse_extraction(&reply, schema) {
        Ok(k) => k,
        Err(first) => {
            log::warn!("extraction answer did not parse ({first}); reprompting");
            let retry = request.with_reprompt(REPROMPT_NOTE);
            let reply = trace.complete(adapters.chat.as_ref(), &retry)?;
            parse_extraction(&reply, schema).map_err(|_| Error::ExtractionFailed { raw: reply })?
        }
    };
    Ok(KeywordSet::new(question_id, keywords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ColumnInfo, TableInfo};
    use proptest::prelude::*;

    fn schema() -> DatabaseSchema {
        let cols = |names: &[&str]| {
            names
                .iter()
                .map(|n| ColumnInfo {
                    name: n.to_string(),
                    declared_type: "TEXT".into(),
                })
                .collect()
        };
        DatabaseSchema {
            database_name: "econ".into(),
            tables: vec![
                TableInfo {
                    name: "nationalecodata".into(),
                    columns: cols(&["indexcode", "indexname", "roworder", "reportperiod", "cumulative"]),
                    foreign_keys: vec![],
                },
                TableInfo {
                    name: "code_rel".into(),
                    columns: cols(&["indexcode", "synonym", "target_column", "target_value"]),
                    foreign_keys: vec![],
                },
            ],
        }
    }

    #[test]
    fn parses_one_line() {
        let k = parse_extraction("GDP growth rate | data | nationalecodata | indexname", &schema()).unwrap();
        assert_eq!(
            k,
            vec![Keyword {
                surface: "GDP growth rate".into(),
                kind: KeywordKind::DataContent,
                table: "nationalecodata".into(),
                candidate_columns: vec!["indexname".into()],
            }]
        );
    }

    #[test]
    fn canonicalizes_identifier_case() {
        let k = parse_extraction(
            "x | Schema | NationalEcoData | IndexName, nationalecodata.ROWORDER",
            &schema(),
        )
        .unwrap();
        assert_eq!(k[0].table, "nationalecodata");
        assert_eq!(k[0].candidate_columns, ["indexname", "roworder"]);
        assert_eq!(k[0].kind, KeywordKind::Schema);
    }

    #[test]
    fn garbage_line_reports_line_number() {
        let err = parse_extraction(
            "a | data | nationalecodata | indexname\n\nI think the answer is",
            &schema(),
        )
        .unwrap_err();
        match err {
            Error::ExtractionParse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_extraction("a | blob | nationalecodata | indexname", &schema()).is_err());
    }

    #[test]
    fn repairs_bad_bindings() {
        let text = "GDP growth rate | data | nationalecodata | indexname, gdp_label\n\
                    bogus | data | nationalecodata | nope\n\
                    other | data | missing_table | indexname\n\
                    two tables | data | missing_table, code_rel, nationalecodata | synonym";
        let k = parse_extraction(text, &schema()).unwrap();
        assert_eq!(k.len(), 2);
        assert_eq!(k[0].candidate_columns, ["indexname"]);
        assert_eq!(k[1].table, "code_rel");
        assert!(k.iter().all(|kw| kw.is_valid_for(&schema())));
    }

    #[test]
    fn fences_and_blank_lines_are_ignored() {
        let text = "```\n\na | data | code_rel | synonym\n```";
        assert_eq!(parse_extraction(text, &schema()).unwrap().len(), 1);
        assert!(parse_extraction("", &schema()).unwrap().is_empty());
    }

    #[test]
    fn set_merges_duplicate_pairs() {
        let kw = |cols: &[&str]| Keyword {
            surface: "x".into(),
            kind: KeywordKind::DataContent,
            table: "t".into(),
            candidate_columns: cols.iter().map(|c| c.to_string()).collect(),
        };
        let set = KeywordSet::new("q", vec![kw(&["a"]), kw(&["b", "a"])]);
        assert_eq!(set.keywords.len(), 1);
        assert_eq!(set.keywords[0].candidate_columns, ["a", "b"]);
    }

    fn arb_keyword() -> impl Strategy<Value = Keyword> {
        let tables = schema().tables;
        (
            "[A-Za-z][A-Za-z0-9 ()%]{0,20}[A-Za-z0-9)]",
            prop::bool::ANY,
            0..tables.len(),
            prop::collection::vec(0usize..5, 1..4),
        )
            .prop_map(move |(surface, data, t, cols)| {
                let table = &tables[t];
                let mut candidate_columns: Vec<String> = Vec::new();
                for c in cols {
                    let name = table.columns[c % table.columns.len()].name.clone();
                    if !candidate_columns.contains(&name) {
                        candidate_columns.push(name);
                    }
                }
                Keyword {
                    surface,
                    kind: if data {
                        KeywordKind::DataContent
                    } else {
                        KeywordKind::Schema
                    },
                    table: table.name.clone(),
                    candidate_columns,
                }
            })
    }

    proptest! {
        #[test]
        fn reserialized_set_parses_back(keywords in prop::collection::vec(arb_keyword(), 0..6)) {
            let set = KeywordSet::new("q", keywords);
            let reparsed = KeywordSet::new("q", parse_extraction(&set.to_text(), &schema()).unwrap());
            prop_assert_eq!(&reparsed, &set);
            prop_assert!(reparsed.keywords.iter().all(|k| k.is_valid_for(&schema())));
        }
    }
}
