//! Read-only SQLite handle with bounded query execution.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rusqlite::{Connection, OpenFlags};

use crate::error::{Error, Result};
use crate::value::SqlValue;

/// A read-only connection to one SQLite database file.
///
/// Each concurrent caller opens its own handle; the type is `Send` but not
/// shared across threads.
#[derive(Debug)]
pub struct Database {
    path: PathBuf,
    name: String,
    conn: Connection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryLimits {
    pub max_rows: usize,
    pub timeout: Duration,
}

impl Default for QueryLimits {
    fn default() -> Self {
        Self {
            max_rows: 1000,
            timeout: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
    /// More rows existed than `max_rows`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryError {
    /// The statement would modify the database and was never run.
    WriteRejected,
    Timeout,
    Engine {
        class: String,
        message: String,
    },
}

impl QueryError {
    pub fn class(&self) -> &str {
        match self {
            QueryError::WriteRejected => "ReadOnlyViolation",
            QueryError::Timeout => "Timeout",
            QueryError::Engine { class, .. } => class,
        }
    }

    pub fn message(&self) -> String {
        match self {
            QueryError::WriteRejected => "write statements are not allowed".to_string(),
            QueryError::Timeout => "statement timed out".to_string(),
            QueryError::Engine { message, .. } => message.clone(),
        }
    }
}

impl std::fmt::Display for QueryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.class(), self.message())
    }
}

impl Database {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let open_err = |message: String| Error::DatabaseOpen {
            path: path.clone(),
            message,
        };
        if !path.is_file() {
            return Err(open_err("no such file".to_string()));
        }
        let conn = Connection::open_with_flags(
            &path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(|e| open_err(e.to_string()))?;
        // Forces a read of the header so non-database files fail here.
        conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
            .map_err(|e| open_err(e.to_string()))?;
        conn.pragma_update(None, "query_only", true)
            .map_err(|e| open_err(e.to_string()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "main".to_string());
        Ok(Self { path, name, conn })
    }

    /// Database name as used in knowledge records: the file stem.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }

    /// Runs one read-only statement, fetching at most `limits.max_rows` rows.
    pub fn query(&self, sql: &str, limits: &QueryLimits) -> std::result::Result<QueryRows, QueryError> {
        let deadline = Instant::now() + limits.timeout;
        self.conn
            .progress_handler(1000, Some(move || Instant::now() > deadline));
        let result = self.query_inner(sql, limits.max_rows);
        self.conn.progress_handler(0, None::<fn() -> bool>);
        result
    }

    fn query_inner(&self, sql: &str, max_rows: usize) -> std::result::Result<QueryRows, QueryError> {
        let mut stmt = self.conn.prepare(sql).map_err(engine_error)?;
        if !stmt.readonly() {
            return Err(QueryError::WriteRejected);
        }
        let columns: Vec<String> = stmt.column_names().iter().map(|c| c.to_string()).collect();
        let width = columns.len();
        let mut rows = stmt.query([]).map_err(engine_error)?;
        let mut out = Vec::new();
        let mut truncated = false;
        while let Some(row) = rows.next().map_err(engine_error)? {
            if out.len() == max_rows {
                truncated = true;
                break;
            }
            let mut cells = Vec::with_capacity(width);
            for i in 0..width {
                cells.push(SqlValue::from_ref(row.get_ref(i).map_err(engine_error)?));
            }
            out.push(cells);
        }
        Ok(QueryRows {
            columns,
            rows: out,
            truncated,
        })
    }
}

/// Double-quotes an identifier, doubling embedded quotes.
pub fn quote_ident(ident: &str) -> String {
    format!("\"{}\"", ident.replace('"', "\"\""))
}

/// Single-quotes a string literal, doubling embedded quotes.
pub fn quote_literal(value: &str) -> String {
    format!("'{}'", value.replace('\'', "''"))
}

fn engine_error(err: rusqlite::Error) -> QueryError {
    use rusqlite::ErrorCode;
    match &err {
        rusqlite::Error::SqliteFailure(code, message) => {
            if code.code == ErrorCode::OperationInterrupted {
                return QueryError::Timeout;
            }
            let class = match code.code {
                ErrorCode::ReadOnly => "ReadOnlyViolation",
                ErrorCode::ConstraintViolation => "IntegrityError",
                _ => "OperationalError",
            };
            QueryError::Engine {
                class: class.to_string(),
                message: message.clone().unwrap_or_else(|| code.to_string()),
            }
        }
        rusqlite::Error::MultipleStatement => QueryError::Engine {
            class: "ProgrammingError".to_string(),
            message: "only one statement may be executed at a time".to_string(),
        },
        other => QueryError::Engine {
            class: "OperationalError".to_string(),
            message: other.to_string(),
        },
    }
}
