//! Text-to-SQL for questions whose wording does not match what the database
//! stores. Data-content keywords are probed against the database with mutated
//! seed queries, exact stored values are collected into an encoding knowledge
//! table, and SQL is generated and revised against execution feedback.

pub mod config;
pub mod db;
pub mod error;
pub mod evaluator;
pub mod extraction;
pub mod fuzzer;
pub mod knowledge;
pub mod llm;
pub mod parallel;
pub mod pipeline;
pub mod schema;
pub mod trace;
pub mod value;

pub use db::{Database, QueryLimits};
pub use error::{Error, Result};
pub use value::SqlValue;
