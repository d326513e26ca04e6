//! Command-line front end. Every command returns an exit code:
//! 0 on success, 1 when the pipeline gives up, 2 on configuration or path
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use valueprobe_core::config::RunConfig;
use valueprobe_core::evaluator::{run_benchmark, BenchmarkRun};
use valueprobe_core::knowledge::{import_relation_knowledge, KnowledgeTable, RelationMapping, TargetColumn};
use valueprobe_core::parallel::ExecutionMode;
use valueprobe_core::pipeline::{run_pipeline, OutcomeKind, PipelineResult};
use valueprobe_core::schema::{introspect, sample_all, SchemaPrompt};
use valueprobe_core::{Database, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GAVE_UP: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "valueprobe", version, about = "Table-content-aware text-to-SQL")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the configuration file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for content sampling
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Scripted mock replies (JSON) instead of a live endpoint
    #[arg(long, global = true)]
    pub mock_script: Option<PathBuf>,
    /// OpenAI-compatible base URL; the key is read from TCSR_API_KEY
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Chat model name
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Sampling temperature in [0, 1]
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Completion token limit
    #[arg(long, global = true)]
    pub max_tokens: Option<u32>,
    /// Retries for transient HTTP failures
    #[arg(long, global = true)]
    pub retries: Option<u32>,
    /// Embedding endpoint; the offline hashing embedder is used when unset
    #[arg(long, global = true)]
    pub embedder_endpoint: Option<String>,
    /// Embedding model name
    #[arg(long, global = true)]
    pub embedder_model: Option<String>,
    /// Sample rows per table in the schema prompt
    #[arg(long, global = true)]
    pub content_samples: Option<usize>,
    /// Synonyms probed per keyword
    #[arg(long, global = true)]
    pub max_synonyms: Option<usize>,
    /// Row cap per value probe
    #[arg(long, global = true)]
    pub row_limit: Option<usize>,
    /// Execute-and-revise rounds after the first attempt
    #[arg(long, global = true)]
    pub max_revisions: Option<usize>,
    /// Worker threads for parallel work
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Knowledge table (JSON lines)
    #[arg(long = "knowledge", global = true)]
    pub knowledge_path: Option<PathBuf>,
    /// Accept an empty result as final
    #[arg(long, global = true)]
    pub accept_empty: bool,
    /// Minimum cosine score for a knowledge match
    #[arg(long, global = true)]
    pub min_similarity: Option<f64>,
    /// Run data-parallel work on one thread
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question against a database
    Ask {
        question: String,
        #[arg(long)]
        db: PathBuf,
        /// Write the full trace as JSON
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run and score a Spider-format dataset
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding <db_id>/<db_id>.sqlite
        #[arg(long)]
        db_root: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manage the knowledge table
    Knowledge {
        #[command(subcommand)]
        action: KnowledgeAction,
    },
    /// Print the schema prompt for a database
    Introspect {
        #[arg(long)]
        db: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum KnowledgeAction {
    /// Import records from a relationship-matching table
    Import {
        #[arg(long)]
        db: PathBuf,
        #[command(flatten)]
        mapping: MappingArgs,
    },
    /// Print all records
    List,
    /// Remove all records
    Clear {
        #[arg(long)]
        yes: bool,
    },
}

/// Mapping flags; any unset field falls back to `[relation_mapping]`.
#[derive(Debug, Default, Args)]
pub struct MappingArgs {
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub keyword_column: Option<String>,
    #[arg(long)]
    pub target_table: Option<String>,
    #[arg(long, conflicts_with = "target_column_from")]
    pub target_column: Option<String>,
    #[arg(long)]
    pub target_column_from: Option<String>,
    #[arg(long)]
    pub target_value_column: Option<String>,
}

impl MappingArgs {
    fn resolve(&self, base: Option<&RelationMapping>) -> Result<RelationMapping, String> {
        let pick = |flag: &Option<String>, from_base: Option<&String>, name: &str| {
            flag.clone()
                .or_else(|| from_base.cloned())
                .ok_or_else(|| format!("relation mapping needs --{name}"))
        };
        let target_column = match (&self.target_column, &self.target_column_from, base) {
            (Some(c), _, _) => TargetColumn::Fixed(c.clone()),
            (None, Some(c), _) => TargetColumn::FromColumn(c.clone()),
            (None, None, Some(b)) => b.target_column.clone(),
            (None, None, None) => return Err("relation mapping needs --target-column or --target-column-from".into()),
        };
        Ok(RelationMapping {
            table: pick(&self.table, base.map(|b| &b.table), "table")?,
            keyword_column: pick(&self.keyword_column, base.map(|b| &b.keyword_column), "keyword-column")?,
            target_table: pick(&self.target_table, base.map(|b| &b.target_table), "target-table")?,
            target_column,
            target_value_column: pick(
                &self.target_value_column,
                base.map(|b| &b.target_value_column),
                "target-value-column",
            )?,
        })
    }
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(format!("write failed: {e}"))
    }
}

/// Applies flags over the file over defaults and validates the result.
pub fn resolve_config(o: &Overrides) -> Result<RunConfig, Error> {
    let mut c = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = &o.$flag { c.$($field).+ = v.clone().into(); })*
        };
    }
    set!(
        seed => seed,
        mock_script => llm.mock_script,
        endpoint => llm.endpoint,
        model => llm.model,
        temperature => llm.temperature,
        max_tokens => llm.max_tokens,
        retries => llm.retries,
        embedder_endpoint => embedder.endpoint,
        embedder_model => embedder.model,
        content_samples => content_samples,
        max_synonyms => max_synonyms,
        row_limit => row_limit,
        max_revisions => max_revisions,
        workers => workers,
        knowledge_path => knowledge_path,
        min_similarity => min_similarity,
    );
    if o.accept_empty {
        c.accept_empty = true;
    }
    if o.sequential {
        c.mode = ExecutionMode::Sequential;
    }
    Ok(c)
}

fn load_knowledge(config: &RunConfig) -> Result<KnowledgeTable, Error> {
    match &config.knowledge_path {
        Some(path) => KnowledgeTable::load(path),
        None => Ok(KnowledgeTable::default()),
    }
}

fn save_knowledge(config: &RunConfig, table: &KnowledgeTable) -> Result<(), Error> {
    match &config.knowledge_path {
        Some(path) => table.save(path),
        None => Ok(()),
    }
}

fn open_db(path: &Path) -> Result<Database, Failure> {
    Database::open(path).map_err(Failure::from)
}

fn print_result(out: &mut dyn Write, result: &PipelineResult) -> std::io::Result<()> {
    if let Some(fuzzy) = &result.fuzzy_sql {
        writeln!(out, "Fuzzy SQL: {fuzzy}")?;
    }
    for k in &result.knowledge_used {
        writeln!(
            out,
            "Knowledge: {} -> {}.{} = {:?}",
            k.keyword, k.table_name, k.column_name, k.stored_value
        )?;
    }
    for (i, attempt) in result.revisions.iter().enumerate() {
        writeln!(out, "Attempt {}: {}", i + 1, attempt.sql)?;
        match &attempt.outcome.kind {
            OutcomeKind::RowsReturned { rows, .. } => writeln!(out, "  RowsReturned ({} rows)", rows.len())?,
            OutcomeKind::EmptyResult => writeln!(out, "  EmptyResult")?,
            OutcomeKind::ExecutionError { class, message } => writeln!(out, "  ExecutionError {class}: {message}")?,
        }
    }
    match (&result.precise_sql, result.revisions.last()) {
        (Some(sql), Some(last)) => {
            writeln!(out, "Precise SQL: {sql}")?;
            if let OutcomeKind::RowsReturned { columns, rows } = &last.outcome.kind {
                writeln!(out, "{}", columns.join(" | "))?;
                for row in rows {
                    let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
                    writeln!(out, "{}", cells.join(" | "))?;
                }
            }
        }
        _ => match &result.error {
            Some(e) => writeln!(out, "Gave up: {e}")?,
            None => writeln!(out, "Gave up after {} attempt(s)", result.revisions.len())?,
        },
    }
    Ok(())
}

pub fn cmd_ask(
    config: &RunConfig,
    question: &str,
    db_path: &Path,
    trace_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    config.validate()?;
    let db = open_db(db_path)?;
    let adapters = config.build_adapters()?;
    let mut knowledge = load_knowledge(config)?;
    let result = run_pipeline(
        "ask",
        question,
        &db,
        &mut knowledge,
        &adapters,
        &config.pipeline_config(),
    );
    save_knowledge(config, &knowledge)?;
    if let Some(path) = trace_out {
        std::fs::write(path, result.to_json()).map_err(|e| Error::io(path, e))?;
    }
    print_result(out, &result)?;
    Ok(if result.gave_up { EXIT_GAVE_UP } else { EXIT_OK })
}

pub fn cmd_bench(
    config: &RunConfig,
    dataset: &Path,
    db_root: &Path,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    config.validate()?;
    let adapters = config.build_adapters()?;
    let mut knowledge = load_knowledge(config)?;
    let pipeline = config.pipeline_config();
    let report = run_benchmark(
        &BenchmarkRun {
            dataset_path: dataset,
            databases_root: db_root,
            out_dir,
            config: &pipeline,
            workers: config.workers,
        },
        &adapters,
        &mut knowledge,
    )?;
    save_knowledge(config, &knowledge)?;
    writeln!(out, "{}", report.summary())?;
    Ok(EXIT_OK)
}

fn knowledge_path(config: &RunConfig) -> Result<&Path, Failure> {
    config
        .knowledge_path
        .as_deref()
        .ok_or_else(|| Failure::usage("no knowledge path: pass --knowledge or set knowledge_path"))
}

pub fn cmd_knowledge(config: &RunConfig, action: &KnowledgeAction, out: &mut dyn Write) -> Result<i32, Failure> {
    let path = knowledge_path(config)?;
    match action {
        KnowledgeAction::Import { db, mapping } => {
            let mapping = mapping
                .resolve(config.relation_mapping.as_ref())
                .map_err(Failure::usage)?;
            let db = open_db(db)?;
            let records = import_relation_knowledge(&db, &mapping)?;
            let mut table = KnowledgeTable::load(path)?;
            let total = records.len();
            let added = records.into_iter().filter(|r| table.upsert(r.clone())).count();
            table.save(path)?;
            writeln!(out, "imported {total} entries ({added} new), {} total", table.len())?;
        }
        KnowledgeAction::List => {
            let table = KnowledgeTable::load(path)?;
            for k in table.entries() {
                writeln!(
                    out,
                    "{} | {}.{}.{} = {:?} | {:?}",
                    k.keyword, k.database_name, k.table_name, k.column_name, k.stored_value, k.provenance
                )?;
            }
            writeln!(out, "{} entries", table.len())?;
        }
        KnowledgeAction::Clear { yes } => {
            if !yes {
                return Err(Failure::usage("refusing to clear the knowledge table without --yes"));
            }
            let n = KnowledgeTable::load(path)?.len();
            KnowledgeTable::default().save(path)?;
            writeln!(out, "cleared {n} entries")?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_introspect(config: &RunConfig, db_path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let db = open_db(db_path)?;
    let schema = introspect(&db)?;
    let samples = sample_all(&db, &schema, config.content_samples, config.seed)?;
    let prompt = SchemaPrompt::build(&schema, &samples);
    writeln!(out, "{}", prompt.desc_str.trim_end())?;
    writeln!(out, "\n# Foreign keys:\n{}", prompt.fk_str.trim_end())?;
    Ok(EXIT_OK)
}

/// Runs an already-parsed command line.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = resolve_config(&cli.overrides)
        .map_err(Failure::from)
        .and_then(|config| match &cli.command {
            Command::Ask {
                question,
                db,
                trace_out,
            } => cmd_ask(&config, question, db, trace_out.as_deref(), out),
            Command::Bench {
                dataset,
                db_root,
                out: dir,
            } => cmd_bench(&config, dataset, db_root, dir, out),
            Command::Knowledge { action } => cmd_knowledge(&config, action, out),
            Command::Introspect { db } => cmd_introspect(&config, db, out),
        });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, out, err),
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}
