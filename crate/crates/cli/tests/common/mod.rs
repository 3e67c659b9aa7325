//! Helpers for driving the `parlvote` binary from tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parlvote_core::store::PredictionStore;

pub fn fixture_corpus() -> PathBuf {
    parlvote_testkit::fixture("corpus")
}

pub fn parlvote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parlvote"))
        .args(args)
        .env("PARLVOTE_LOG", "warn")
        .output()
        .expect("spawn parlvote")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn eval(store: &Path, extra: &[&str]) -> Output {
    let corpus = fixture_corpus();
    let mut args = vec![
        "eval",
        "--task",
        "vote",
        "--models",
        "stub/alpha,stub/beta",
        "--corpus",
        p(&corpus),
        "--store",
        p(store),
    ];
    args.extend_from_slice(extra);
    parlvote(&args)
}

pub fn record_count(store: &Path) -> usize {
    PredictionStore::open(store).expect("store").len()
}

/// The parts of a store that a sweep determines, in a canonical order.
pub type SweepRow = (String, String, String, String, u8, String);

pub fn sweep_state(store: &Path) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = PredictionStore::open(store)
        .expect("store")
        .all()
        .into_iter()
        .map(|r| {
            (
                r.speech_id,
                r.model.to_string(),
                r.context_fingerprint.as_str().to_string(),
                r.parsed.label.to_string(),
                r.parsed.confidence,
                r.parsed.reasoning,
            )
        })
        .collect();
    rows.sort();
    rows
}

/// All files under `dir` with their bytes, by name.
pub fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .expect("report dir")
        .map(|e| {
            let e = e.expect("dir entry");
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("report file"))
        })
        .collect();
    out.sort();
    out
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

/// The stub sweep criterion: 10 records over the fixture, deterministic
/// reports, idempotent reruns and resume after an interrupted run.
pub fn end_to_end_sweep() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = dir.path().join("store.jsonl");

    let first = eval(&store, &[]);
    ensure!(code(&first) == 0, "eval exited {}: {}", code(&first), String::from_utf8_lossy(&first.stderr));
    ensure!(record_count(&store) == 10, "first sweep wrote {} records", record_count(&store));

    let again = eval(&store, &[]);
    ensure!(code(&again) == 0, "rerun exited {}", code(&again));
    ensure!(record_count(&store) == 10, "rerun appended {} records", record_count(&store) - 10);
    ensure!(
        stdout(&again).lines().all(|l| l.contains(" new=0 skipped=5 ")),
        "rerun summary: {}",
        stdout(&again)
    );

    let mut reports = Vec::new();
    for name in ["r1", "r2"] {
        let out = dir.path().join(name);
        let o = parlvote(&["analyze", "--store", p(&store), "--report", p(&out)]);
        ensure!(code(&o) == 0, "analyze exited {}", code(&o));
        reports.push(read_dir_bytes(&out));
    }
    ensure!(!reports[0].is_empty(), "analyze wrote nothing");
    ensure!(reports[0] == reports[1], "analyze output differs between runs");

    let resumed = dir.path().join("resumed.jsonl");
    let partial = eval(&resumed, &["--limit", "2"]);
    ensure!(code(&partial) == 0, "limited eval exited {}", code(&partial));
    ensure!(record_count(&resumed) == 4, "--limit 2 wrote {} records", record_count(&resumed));
    let mut bytes = fs::read(&resumed).map_err(|e| e.to_string())?;
    bytes.extend_from_slice(br#"{"record_id":"p-00000005","task":"vo"#);
    fs::write(&resumed, bytes).map_err(|e| e.to_string())?;
    let finish = eval(&resumed, &[]);
    ensure!(code(&finish) == 0, "resume exited {}", code(&finish));
    ensure!(
        sweep_state(&resumed) == sweep_state(&store),
        "resumed store differs from the uninterrupted one"
    );
    Ok(())
}
