//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use valueprobe_cli::{cmd_ask, cmd_bench, resolve_config, Overrides};
use valueprobe_core::config::RunConfig;
use valueprobe_core::evaluator::{exact_set_match, execution_accuracy};
use valueprobe_core::extraction::{Keyword, KeywordKind};
use valueprobe_core::fuzzer::{
    enumerate_seed_sql, execute_seed, FuzzConfig, SearchResult, SeedPool, SeedSql, SqlSkeleton,
};
use valueprobe_core::knowledge::{
    argmax_cosine, classify, cosine, Classification, EncodingKnowledge, KnowledgeTable, Provenance,
};
use valueprobe_core::llm::EmbeddingVector;
use valueprobe_core::parallel::ExecutionMode;
use valueprobe_core::pipeline::{run_pipeline, PipelineConfig};
use valueprobe_core::Database;

type Outcome = Result<(), String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

const GDP_Q: &str = "What is the cumulative GDP growth rate for the first quarter of 2023?";
const GDP_GOLD: &str = "SELECT cumulative FROM nationalecodata WHERE roworder = 5 AND reportperiod = '2023-03-31'";

fn config(name: &str) -> RunConfig {
    resolve_config(&Overrides {
        config: Some(config_path(name)),
        ..Overrides::default()
    })
    .unwrap()
}

/// Rows from a plain rusqlite connection, rendered so that 5 and 5.0 agree.
fn raw_rows(path: &Path, sql: &str) -> Result<Vec<Vec<String>>, String> {
    let conn = rusqlite::Connection::open_with_flags(path, rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY)
        .map_err(|e| e.to_string())?;
    let mut stmt = conn.prepare(sql).map_err(|e| e.to_string())?;
    let n = stmt.column_count();
    let rows = stmt
        .query_map([], |row| {
            (0..n)
                .map(|i| {
                    row.get::<_, rusqlite::types::Value>(i).map(|v| match v {
                        rusqlite::types::Value::Null => "NULL".to_string(),
                        rusqlite::types::Value::Integer(i) => format!("{}", i as f64),
                        rusqlite::types::Value::Real(r) => format!("{r}"),
                        rusqlite::types::Value::Text(t) => format!("'{t}'"),
                        rusqlite::types::Value::Blob(b) => format!("{b:?}"),
                    })
                })
                .collect::<rusqlite::Result<Vec<String>>>()
        })
        .map_err(|e| e.to_string())?
        .collect::<rusqlite::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Ok(rows)
}

fn ask(root: &Path, cfg: &str, db: &str, question: &str) -> Result<(i32, Value), String> {
    let trace = root.join(format!("{db}-trace.json"));
    let mut out = Vec::new();
    let code = cmd_ask(&config(cfg), question, &db_path(root, db), Some(&trace), &mut out).map_err(|f| f.message)?;
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    Ok((code, json))
}

fn gdp(root: &Path) -> Outcome {
    let start = Instant::now();
    let (code, result) = ask(root, "gdp.toml", "econ", GDP_Q)?;
    let elapsed = start.elapsed();
    ensure!(code == 0, "exit code {code}");
    let precise = result["precise_sql"].as_str().ok_or("no precise SQL")?;
    let path = db_path(root, "econ");
    let (got, want) = (raw_rows(&path, precise)?, raw_rows(&path, GDP_GOLD)?);
    ensure!(got == want, "{got:?} != {want:?}");
    ensure!(want == [["4.5"]], "gold rows {want:?}");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(())
}

fn case_studies(root: &Path) -> Outcome {
    let (code, r1) = ask(root, "case1.toml", "singer", "How many singers are from Holland?")?;
    ensure!(code == 0, "case 1 exit {code}");
    let p1 = r1["precise_sql"].as_str().unwrap_or_default();
    ensure!(p1.contains("'Netherlands'"), "case 1 precise SQL {p1}");
    ensure!(raw_rows(&db_path(root, "singer"), p1)? == [["2"]], "case 1 rows");

    let (code, r2) = ask(
        root,
        "case2.toml",
        "car_1",
        "What is the weight of the hornet sportabout?",
    )?;
    ensure!(code == 0, "case 2 exit {code}");
    let statuses: Vec<&str> = r2["revisions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["outcome"]["status"].as_str().unwrap())
        .collect();
    ensure!(statuses.first() == Some(&"EmptyResult"), "case 2 statuses {statuses:?}");
    ensure!(statuses.last() == Some(&"RowsReturned"), "case 2 statuses {statuses:?}");
    let p2 = r2["precise_sql"].as_str().unwrap_or_default();
    ensure!(raw_rows(&db_path(root, "car_1"), p2)? == [["3672"]], "case 2 rows");
    Ok(())
}

fn seed(value: &str) -> SeedSql {
    SeedSql {
        keyword_surface: value.into(),
        table: "t".into(),
        column: "c".into(),
        probe_value: value.into(),
        skeleton: SqlSkeleton::ExactMatch,
        sql_text: String::new(),
    }
}

fn trichotomy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let alphabet = ["a", "b", "c", "A", "a "];
    for trial in 0..200 {
        let n = rng.gen_range(0..6);
        let values: Vec<String> = (0..n)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string())
            .collect();
        let truncated = n > 0 && rng.gen_bool(0.2);
        let result = SearchResult {
            seed: seed("a"),
            distinct_values: values.clone(),
            truncated,
            row_limit: 20,
            error: None,
        };
        let mut distinct: Vec<&String> = Vec::new();
        for v in &values {
            if !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        let expected = match (distinct.len(), truncated) {
            (0, false) => Classification::NoValue,
            (1, false) => Classification::UniqueValue(distinct[0].clone()),
            _ => Classification::Multiple,
        };
        let got = classify(&result);
        ensure!(
            got == expected,
            "trial {trial}: {values:?} truncated={truncated}: {got:?} != {expected:?}"
        );
    }
    Ok(())
}

fn fuzzer_enumeration(root: &Path) -> Outcome {
    let path = db_path(root, "singer");
    let db = Database::open(&path).map_err(|e| e.to_string())?;
    let columns = ["Name", "Country", "Song_Name", "Is_male", "Age"];
    let values = ["Netherlands", "France", "an", "o", "Love", "T", "Joe Sharp", "e"];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let c = rng.gen_range(1..=5);
        let v = rng.gen_range(1..=6);
        let mut cols: Vec<String> = columns.iter().map(|s| s.to_string()).collect();
        let mut vals: Vec<String> = values.iter().map(|s| s.to_string()).collect();
        cols.shuffle(&mut rng);
        vals.shuffle(&mut rng);
        cols.truncate(c);
        vals.truncate(v);
        let keyword = Keyword {
            surface: vals[0].clone(),
            kind: KeywordKind::DataContent,
            table: "singer".into(),
            candidate_columns: cols.clone(),
        };
        let pool = SeedPool::new(keyword, cols, vals, SqlSkeleton::ALL.to_vec(), 5).map_err(|e| e.to_string())?;
        let seeds = enumerate_seed_sql(&pool);
        ensure!(
            seeds.len() == c * v * 2,
            "trial {trial}: {} seeds for c={c} v={v}",
            seeds.len()
        );

        for s in seeds {
            let (column, probe, skeleton) = (s.column.clone(), s.probe_value.clone(), s.skeleton);
            let result = execute_seed(&db, s, &FuzzConfig::default());
            ensure!(result.error.is_none(), "probe failed: {:?}", result.error);
            for found in &result.distinct_values {
                let matches = match skeleton {
                    SqlSkeleton::ExactMatch => found == &probe,
                    SqlSkeleton::LikeMatch => found.to_lowercase().contains(&probe.to_lowercase()),
                };
                ensure!(matches, "{found:?} does not match probe {probe:?} ({skeleton:?})");
                let sql = format!(
                    "SELECT count(*) FROM singer WHERE CAST(\"{column}\" AS TEXT) = '{}'",
                    found.replace('\'', "''")
                );
                let count = raw_rows(&path, &sql)?;
                ensure!(count[0][0] != "0", "{found:?} not stored in singer.{column}");
            }
        }
    }
    Ok(())
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().any(|x| x.abs() > 1e-6) {
            return v;
        }
    }
}

fn ev(v: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::new(v).unwrap()
}

fn cosine_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..1000 {
        let dim = rng.gen_range(2..64);
        let (a, b) = (random_vector(&mut rng, dim), random_vector(&mut rng, dim));
        let self_sim = cosine(&ev(a.clone()), &ev(a.clone())).unwrap();
        ensure!(
            (self_sim - 1.0).abs() <= 1e-9,
            "trial {trial}: self-similarity {self_sim}"
        );
        let (ab, ba) = (
            cosine(&ev(a.clone()), &ev(b.clone())).unwrap(),
            cosine(&ev(b.clone()), &ev(a.clone())).unwrap(),
        );
        ensure!(ab == ba, "trial {trial}: asymmetric {ab} {ba}");

        let candidates: Vec<Vec<f64>> = (0..rng.gen_range(1..8)).map(|_| random_vector(&mut rng, dim)).collect();
        let scale = |v: &[f64], k: f64| ev(v.iter().map(|x| x * k).collect());
        let plain: Vec<EmbeddingVector> = candidates.iter().map(|c| ev(c.clone())).collect();
        let scaled: Vec<EmbeddingVector> = candidates
            .iter()
            .map(|c| scale(c, rng.gen_range(0.01..100.0)))
            .collect();
        let before = argmax_cosine(&ev(a.clone()), &plain, ExecutionMode::Sequential)
            .unwrap()
            .unwrap()
            .0;
        let after = argmax_cosine(&scale(&a, rng.gen_range(0.01..100.0)), &scaled, ExecutionMode::Parallel)
            .unwrap()
            .unwrap()
            .0;
        ensure!(before == after, "trial {trial}: argmax moved {before} -> {after}");

        let split = rng.gen_range(1..dim);
        let mut u = vec![0.0; dim];
        let mut w = vec![0.0; dim];
        for i in 0..dim {
            if i < split {
                u[i] = rng.gen_range(0.1..1.0);
            } else {
                w[i] = rng.gen_range(0.1..1.0);
            }
        }
        let zero = cosine(&ev(u), &ev(w)).unwrap();
        ensure!(zero == 0.0, "trial {trial}: orthogonal cosine {zero}");
    }
    Ok(())
}

fn metric_oracles(root: &Path) -> Outcome {
    let text = std::fs::read_to_string(fixtures().join("bench/gold_corpus.json")).unwrap();
    let corpus: Vec<(String, String)> = serde_json::from_str::<Vec<Value>>(&text)
        .unwrap()
        .iter()
        .map(|g| {
            (
                g["db_id"].as_str().unwrap().to_string(),
                g["query"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    ensure!(corpus.len() >= 20, "only {} gold queries", corpus.len());
    for (db_id, g) in &corpus {
        let db = Database::open(db_path(root, db_id)).map_err(|e| e.to_string())?;
        ensure!(
            execution_accuracy(g, g, &db).map_err(|e| e.to_string())?,
            "EX not reflexive: {g}"
        );
        ensure!(exact_set_match(g, g), "EM not reflexive: {g}");
        for (_, h) in &corpus {
            ensure!(
                exact_set_match(g, h) == exact_set_match(h, g),
                "EM not symmetric: {g} / {h}"
            );
        }
    }

    let literal_pairs = [
        (
            "SELECT Name FROM singer WHERE Age > 40",
            "SELECT Name FROM singer WHERE Age > 20",
        ),
        (
            "SELECT count(*) FROM singer WHERE Country = 'Holland'",
            "SELECT count(*) FROM singer WHERE Country = 'Netherlands'",
        ),
        (
            GDP_GOLD,
            "SELECT cumulative FROM nationalecodata WHERE roworder = 7 AND reportperiod = '2022-06-30'",
        ),
    ];
    for (a, b) in literal_pairs {
        ensure!(exact_set_match(a, b), "EM should ignore literals: {a} / {b}");
    }
    ensure!(
        !exact_set_match("SELECT Name FROM singer", "SELECT Country FROM singer"),
        "EM matched different columns"
    );

    let singer = Database::open(db_path(root, "singer")).map_err(|e| e.to_string())?;
    let ex = |p: &str, g: &str| execution_accuracy(p, g, &singer).map_err(|e| e.to_string());
    ensure!(
        ex("SELECT Name FROM singer ORDER BY Age DESC", "SELECT Name FROM singer")?,
        "unordered gold should ignore order"
    );
    ensure!(
        !ex(
            "SELECT Name FROM singer ORDER BY Age DESC",
            "SELECT Name FROM singer ORDER BY Age"
        )?,
        "ordered gold should compare order"
    );
    ensure!(
        ex(
            "SELECT Name FROM singer ORDER BY Age",
            "SELECT Name FROM singer ORDER BY Age"
        )?,
        "same order should match"
    );
    ensure!(
        !ex("SELECT Country FROM singer", "SELECT DISTINCT Country FROM singer")?,
        "multiset comparison should count duplicates"
    );
    Ok(())
}

fn caps(root: &Path) -> Outcome {
    let db = Database::open(db_path(root, "econ")).map_err(|e| e.to_string())?;
    let adapters = config("always_error.toml")
        .build_adapters()
        .map_err(|e| e.to_string())?;
    for max_revisions in [0, 1, 3] {
        let cfg = PipelineConfig {
            max_revisions,
            ..PipelineConfig::default()
        };
        let mut knowledge = KnowledgeTable::default();
        let result = run_pipeline("q", "anything", &db, &mut knowledge, &adapters, &cfg);
        ensure!(
            result.revisions.len() == 1 + max_revisions,
            "max_revisions={max_revisions}: {} attempts",
            result.revisions.len()
        );
        ensure!(result.gave_up, "max_revisions={max_revisions}: did not give up");
    }
    Ok(())
}

fn knowledge_round_trip(root: &Path) -> Outcome {
    let ek = |kw: &str, col: &str, val: &str, p: Provenance| {
        EncodingKnowledge::new(kw, "econ", "nationalecodata", col, val, p).unwrap()
    };
    let mut table = KnowledgeTable::default();
    ensure!(
        table.upsert(ek("GDP growth rate", "roworder", "5", Provenance::RelationTable)),
        "first insert"
    );
    ensure!(
        table.upsert(ek("Q1 2023", "reportperiod", "2023-03-31", Provenance::FuzzMined)),
        "second insert"
    );
    ensure!(
        !table.upsert(ek("GDP growth rate", "roworder", "5", Provenance::RelationTable)),
        "duplicate accepted"
    );
    ensure!(
        table.upsert(ek("GDP growth rate", "roworder", "6", Provenance::RelationTable)),
        "distinct value rejected"
    );
    ensure!(table.len() == 3, "len {}", table.len());

    let path = root.join("knowledge.jsonl");
    table.save(&path).map_err(|e| e.to_string())?;
    let loaded = KnowledgeTable::load(&path).map_err(|e| e.to_string())?;
    ensure!(loaded == table, "round trip changed the table");

    let doubled = format!("{}{}", table.to_jsonl(), table.to_jsonl());
    let dedup = KnowledgeTable::from_jsonl(&doubled).map_err(|e| e.to_string())?;
    ensure!(dedup == table, "duplicate lines survived loading");
    ensure!(
        KnowledgeTable::load(root.join("absent.jsonl"))
            .map_err(|e| e.to_string())?
            .is_empty(),
        "missing file not empty"
    );
    Ok(())
}

fn toy_bench(root: &Path) -> Outcome {
    let cfg = config("toy_bench.toml");
    let dataset = fixtures().join("bench/toy_dev.json");
    let mut reports = Vec::new();
    for run in ["run1", "run2"] {
        let mut out = Vec::new();
        let code = cmd_bench(&cfg, &dataset, root, &root.join(run), &mut out).map_err(|f| f.message)?;
        ensure!(code == 0, "{run} exit {code}");
        reports.push(std::fs::read_to_string(root.join(run).join("report.json")).unwrap());
    }
    ensure!(reports[0] == reports[1], "report.json differs between runs");

    let report: Value = serde_json::from_str(&reports[0]).unwrap();
    let examples: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(&dataset).unwrap()).unwrap();
    let scored: HashMap<&str, &Value> = report["per_example"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["id"].as_str().unwrap(), s))
        .collect();

    let em_expected = ["fig1", "retail", "holland", "hornet"];
    let mut ex_total = 0;
    for example in &examples {
        let id = example["id"].as_str().unwrap();
        let gold = example["query"].as_str().unwrap();
        let db = db_path(root, example["db_id"].as_str().unwrap());
        let trace: Value = serde_json::from_str(
            &std::fs::read_to_string(root.join("run1/traces").join(format!("{id}.json"))).unwrap(),
        )
        .unwrap();
        let ex = match trace["precise_sql"].as_str() {
            Some(pred) if !trace["gave_up"].as_bool().unwrap() => match raw_rows(&db, pred) {
                Ok(mut p) => {
                    let mut g = raw_rows(&db, gold)?;
                    if !gold.to_uppercase().contains("ORDER BY") {
                        p.sort();
                        g.sort();
                    }
                    p == g
                }
                Err(_) => false,
            },
            _ => false,
        };
        ex_total += usize::from(ex);
        let score = scored.get(id).ok_or(format!("{id} missing from report"))?;
        ensure!(
            score["ex"].as_bool() == Some(ex),
            "{id}: report EX {} vs manual {ex}",
            score["ex"]
        );
        let em = em_expected.contains(&id);
        ensure!(
            score["em"].as_bool() == Some(em),
            "{id}: report EM {} vs expected {em}",
            score["em"]
        );
    }
    ensure!(ex_total == 8, "manual EX {ex_total}/10");
    ensure!(
        report["ex_accuracy"].as_f64() == Some(0.8),
        "ex_accuracy {}",
        report["ex_accuracy"]
    );
    ensure!(
        report["em_accuracy"].as_f64() == Some(0.4),
        "em_accuracy {}",
        report["em_accuracy"]
    );
    Ok(())
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    build_all(root);
    let before = checksums(root);

    let criteria: Vec<Criterion> = vec![
        ("GDP growth question end-to-end under 5 s", Box::new(|| gdp(root))),
        ("value-synonym and Make-vs-Model cases", Box::new(|| case_studies(root))),
        (
            "classification trichotomy vs brute-force distinct count",
            Box::new(trichotomy),
        ),
        (
            "seed enumeration count and probe soundness",
            Box::new(|| fuzzer_enumeration(root)),
        ),
        ("cosine properties over 1000 trials", Box::new(cosine_properties)),
        ("EX and EM metric oracles", Box::new(|| metric_oracles(root))),
        ("revision caps for max_revisions 0, 1, 3", Box::new(|| caps(root))),
        (
            "knowledge round trip and duplicate suppression",
            Box::new(|| knowledge_round_trip(root)),
        ),
        (
            "toy benchmark determinism and manual EX/EM",
            Box::new(|| toy_bench(root)),
        ),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        report(name, check(), &mut failed);
    }
    let after = checksums(root);
    let read_only = if before == after {
        Ok(())
    } else {
        Err("database checksum changed".to_string())
    };
    report("database files unchanged by every check above", read_only, &mut failed);

    println!(
        "{} of {} criteria passed",
        criteria.len() + 1 - failed,
        criteria.len() + 1
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn report(name: &str, outcome: Outcome, failed: &mut usize) {
    match outcome {
        Ok(()) => println!("PASS  {name}"),
        Err(e) => {
            *failed += 1;
            println!("FAIL  {name}: {e}");
        }
    }
}
