#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use valueprobe_core::config::RunConfig;
use valueprobe_core::llm::{Adapters, GenerationParams, MockChatModel, MockEmbedder};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Builds `<root>/<db_id>/<db_id>.sqlite` from `fixtures/sql/<db_id>.sql`.
pub fn build_db(root: &Path, db_id: &str) -> PathBuf {
    let script = std::fs::read_to_string(fixtures().join("sql").join(format!("{db_id}.sql"))).unwrap();
    let dir = root.join(db_id);
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(format!("{db_id}.sqlite"));
    let conn = rusqlite::Connection::open(&path).unwrap();
    conn.execute_batch(&script).unwrap();
    path
}

pub fn build_all(root: &Path) {
    for db in ["econ", "singer", "car_1"] {
        build_db(root, db);
    }
}

pub fn sha256(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    format!("{:x}", Sha256::digest(bytes))
}

pub fn mock_adapters(script: &str) -> (Adapters, Arc<MockChatModel>) {
    let chat = Arc::new(MockChatModel::load(fixtures().join("mock").join(script)).unwrap());
    let adapters = Adapters::new(
        chat.clone(),
        Arc::new(MockEmbedder::default()),
        GenerationParams::default(),
    );
    (adapters, chat)
}

pub fn config(name: &str) -> RunConfig {
    let c = RunConfig::load(fixtures().join("config").join(name)).unwrap();
    c.validate().unwrap();
    c
}
