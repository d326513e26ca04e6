#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const DATABASES: [&str; 3] = ["econ", "singer", "car_1"];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn config_path(name: &str) -> PathBuf {
    fixtures().join("config").join(name)
}

/// Builds `<root>/<db_id>/<db_id>.sqlite` for every fixture script.
pub fn build_all(root: &Path) {
    for db_id in DATABASES {
        let script = std::fs::read_to_string(fixtures().join("sql").join(format!("{db_id}.sql"))).unwrap();
        let dir = root.join(db_id);
        std::fs::create_dir_all(&dir).unwrap();
        let conn = rusqlite::Connection::open(dir.join(format!("{db_id}.sqlite"))).unwrap();
        conn.execute_batch(&script).unwrap();
    }
}

pub fn db_path(root: &Path, db_id: &str) -> PathBuf {
    root.join(db_id).join(format!("{db_id}.sqlite"))
}

pub fn sha256(path: &Path) -> String {
    format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
}

pub fn checksums(root: &Path) -> Vec<String> {
    DATABASES.iter().map(|db| sha256(&db_path(root, db))).collect()
}

/// Runs the CLI in-process and returns (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = valueprobe_cli::run(
        std::iter::once("valueprobe").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
