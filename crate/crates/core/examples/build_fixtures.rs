//! Builds `<out>/<db_id>/<db_id>.sqlite` for each script in `fixtures/sql`.
//!
//! cargo run -p valueprobe-core --example build_fixtures -- [out_dir]

use std::path::{Path, PathBuf};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let out: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join("db"));
    let mut scripts: Vec<PathBuf> = std::fs::read_dir(fixtures.join("sql"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sql"))
        .collect();
    scripts.sort();
    for script in scripts {
        let id = script.file_stem().unwrap().to_string_lossy().into_owned();
        let dir = out.join(&id);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{id}.sqlite"));
        if path.exists() {
            std::fs::remove_file(&path)?;
        }
        let conn = rusqlite::Connection::open(&path)?;
        conn.execute_batch(&std::fs::read_to_string(&script)?)?;
        println!("{}", path.display());
    }
    Ok(())
}
