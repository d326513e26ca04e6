//! Schema introspection, content sampling and the schema prompt fragments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::db::{quote_ident, Database};
use crate::error::{Error, Result};
use crate::value::SqlValue;

/// Cells longer than this are cut in prompt renderings.
pub const MAX_CELL_CHARS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnInfo {
    pub name: String,
    pub declared_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForeignKey {
    pub local_column: String,
    pub referenced_table: String,
    pub referenced_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableInfo {
    pub name: String,
    pub columns: Vec<ColumnInfo>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl TableInfo {
    /// Case-insensitive column lookup.
    pub fn column(&self, name: &str) -> Option<&ColumnInfo> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatabaseSchema {
    pub database_name: String,
    pub tables: Vec<TableInfo>,
}

impl DatabaseSchema {
    /// Case-insensitive table lookup.
    pub fn table(&self, name: &str) -> Option<&TableInfo> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.table(table).and_then(|t| t.column(column)).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentSamples {
    pub table: String,
    pub rows: Vec<Vec<SqlValue>>,
    pub sample_count: usize,
}

impl ContentSamples {
    /// Distinct non-null values of one column, in sample order.
    pub fn column_values(&self, column_index: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for row in &self.rows {
            if let Some(text) = row.get(column_index).and_then(SqlValue::as_text) {
                if !out.contains(&text) {
                    out.push(text);
                }
            }
        }
        out
    }
}

/// Reads all user tables, their columns and foreign keys in catalog order.
pub fn introspect(db: &Database) -> Result<DatabaseSchema> {
    let conn = db.connection();
    let mut stmt = conn.prepare(
        "SELECT name FROM sqlite_master \
         WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' \
         ORDER BY rowid",
    )?;
    let names: Vec<String> = stmt
        .query_map([], |r| r.get(0))?
        .collect::<std::result::Result<_, _>>()?;
    if names.is_empty() {
        return Err(Error::NoUserTables);
    }

    let mut tables = Vec::with_capacity(names.len());
    for name in &names {
        let mut stmt = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(name)))?;
        let columns: Vec<ColumnInfo> = stmt
            .query_map([], |r| {
                Ok(ColumnInfo {
                    name: r.get(1)?,
                    declared_type: r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                })
            })?
            .collect::<std::result::Result<_, _>>()?;
        let mut stmt = conn.prepare(&format!("PRAGMA foreign_key_list({})", quote_ident(name)))?;
        // (referenced table, local column, referenced column or NULL for the parent key)
        let raw_fks: Vec<(String, String, Option<String>)> = stmt
            .query_map([], |r| Ok((r.get(2)?, r.get(3)?, r.get(4)?)))?
            .collect::<std::result::Result<_, _>>()?;
        tables.push((
            TableInfo {
                name: name.clone(),
                columns,
                foreign_keys: Vec::new(),
            },
            raw_fks,
        ));
    }

    let infos: Vec<TableInfo> = tables.iter().map(|(t, _)| t.clone()).collect();
    let partial = DatabaseSchema {
        database_name: db.name().to_string(),
        tables: infos,
    };
    let mut resolved = Vec::with_capacity(tables.len());
    for (mut table, raw_fks) in tables {
        for (ref_table, local, ref_col) in raw_fks {
            match resolve_fk(&partial, &table, &ref_table, &local, ref_col.as_deref(), conn) {
                Some(fk) => table.foreign_keys.push(fk),
                None => log::warn!(
                    "dropping dangling foreign key {}.{} -> {}.{}",
                    table.name,
                    local,
                    ref_table,
                    ref_col.as_deref().unwrap_or("?")
                ),
            }
        }
        resolved.push(table);
    }

    Ok(DatabaseSchema {
        database_name: db.name().to_string(),
        tables: resolved,
    })
}

fn resolve_fk(
    schema: &DatabaseSchema,
    table: &TableInfo,
    ref_table: &str,
    local: &str,
    ref_col: Option<&str>,
    conn: &rusqlite::Connection,
) -> Option<ForeignKey> {
    let local = table.column(local)?;
    let parent = schema.table(ref_table)?;
    let parent_col = match ref_col {
        Some(c) => parent.column(c)?.name.clone(),
        None => primary_key_column(conn, &parent.name)?,
    };
    Some(ForeignKey {
        local_column: local.name.clone(),
        referenced_table: parent.name.clone(),
        referenced_column: parent_col,
    })
}

fn primary_key_column(conn: &rusqlite::Connection, table: &str) -> Option<String> {
    let mut stmt = conn
        .prepare(&format!("PRAGMA table_info({})", quote_ident(table)))
        .ok()?;
    let rows: Vec<(String, i64)> = stmt
        .query_map([], |r| Ok((r.get(1)?, r.get(5)?)))
        .ok()?
        .filter_map(|r| r.ok())
        .collect();
    rows.into_iter().find(|(_, pk)| *pk == 1).map(|(n, _)| n)
}

/// Draws up to `n` distinct rows of `table` in a seeded pseudo-random order.
pub fn sample_contents(db: &Database, table: &str, n: usize, seed: u64) -> Result<ContentSamples> {
    let schema_table = {
        let exists: Option<String> = db
            .connection()
            .query_row(
                "SELECT name FROM sqlite_master WHERE type = 'table' AND lower(name) = lower(?1)",
                [table],
                |r| r.get(0),
            )
            .ok();
        exists.ok_or_else(|| Error::UnknownTable(table.to_string()))?
    };
    let conn = db.connection();
    let quoted = quote_ident(&schema_table);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let rows = match conn.prepare(&format!("SELECT rowid FROM {quoted} ORDER BY rowid")) {
        Ok(mut stmt) => {
            let mut rowids: Vec<i64> = stmt
                .query_map([], |r| r.get(0))?
                .collect::<std::result::Result<_, _>>()?;
            rowids.shuffle(&mut rng);
            rowids.truncate(n);
            let mut fetch = conn.prepare(&format!("SELECT * FROM {quoted} WHERE rowid = ?1"))?;
            let width = fetch.column_count();
            let mut rows = Vec::with_capacity(rowids.len());
            for rowid in rowids {
                let row = fetch.query_row([rowid], |r| read_row(r, width))?;
                rows.push(row);
            }
            rows
        }
        // WITHOUT ROWID tables: shuffle the full scan instead.
        Err(_) => {
            let mut stmt = conn.prepare(&format!("SELECT * FROM {quoted}"))?;
            let width = stmt.column_count();
            let mut all: Vec<Vec<SqlValue>> = stmt
                .query_map([], |r| read_row(r, width))?
                .collect::<std::result::Result<_, _>>()?;
            all.shuffle(&mut rng);
            all.truncate(n);
            all
        }
    };

    Ok(ContentSamples {
        table: schema_table,
        sample_count: rows.len(),
        rows,
    })
}

fn read_row(row: &rusqlite::Row<'_>, width: usize) -> rusqlite::Result<Vec<SqlValue>> {
    (0..width).map(|i| row.get_ref(i).map(SqlValue::from_ref)).collect()
}

/// Samples every table of the schema with the same seed.
pub fn sample_all(
    db: &Database,
    schema: &DatabaseSchema,
    n: usize,
    seed: u64,
) -> Result<BTreeMap<String, ContentSamples>> {
    schema
        .tables
        .iter()
        .map(|t| Ok((t.name.clone(), sample_contents(db, &t.name, n, seed)?)))
        .collect()
}

/// Renders the table/column/sample description used in every prompt.
pub fn render_schema_prompt(schema: &DatabaseSchema, samples: &BTreeMap<String, ContentSamples>) -> String {
    let mut out = String::new();
    for (i, table) in schema.tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "# Table: {}", table.name);
        let columns = table
            .columns
            .iter()
            .map(|c| {
                if c.declared_type.is_empty() {
                    c.name.clone()
                } else {
                    format!("{} {}", c.name, c.declared_type)
                }
            })
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "## Columns: {columns}");
        match samples.get(&table.name).filter(|s| !s.rows.is_empty()) {
            None => out.push_str("## Samples: none\n"),
            Some(s) => {
                let _ = writeln!(out, "## Samples ({}):", s.sample_count);
                for row in &s.rows {
                    let cells = row
                        .iter()
                        .map(|v| v.render_for_prompt(MAX_CELL_CHARS))
                        .collect::<Vec<_>>()
                        .join(", ");
                    let _ = writeln!(out, "({cells})");
                }
            }
        }
    }
    out
}

/// One `table.col = table.col` line per foreign key, or `none`.
pub fn render_foreign_keys(schema: &DatabaseSchema) -> String {
    let mut out = String::new();
    for table in &schema.tables {
        for fk in &table.foreign_keys {
            let _ = writeln!(
                out,
                "{}.{} = {}.{}",
                table.name, fk.local_column, fk.referenced_table, fk.referenced_column
            );
        }
    }
    if out.is_empty() {
        out.push_str("none\n");
    }
    out
}

/// The two schema fragments bound into every prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaPrompt {
    pub desc_str: String,
    pub fk_str: String,
}

impl SchemaPrompt {
    pub fn build(schema: &DatabaseSchema, samples: &BTreeMap<String, ContentSamples>) -> Self {
        Self {
            desc_str: render_schema_prompt(schema, samples),
            fk_str: render_foreign_keys(schema),
        }
    }
}
