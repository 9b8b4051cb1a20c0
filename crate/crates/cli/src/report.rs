//! Running a command and writing its artifacts.
//!
//! `results.json` and the CSV files depend only on the configuration; the
//! timing lives in `report.json` alone.

use std::path::{Path, PathBuf};
use std::time::Instant;

use prlab_core::{Error, Result};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::commands;
use crate::config::ExperimentConfig;

pub const SCHEMA: &str = "prlab.report/1";

pub struct Done {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
    pub report_json: String,
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_validation() || matches!(e, Error::Io(_)) {
        2
    } else {
        3
    }
}

fn write(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::write(dir.join(name), content)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", dir.join(name).display())))
}

pub fn execute(name: &str, config: &Path, out: Option<&Path>, env_out: Option<&Path>) -> Result<Done> {
    let (cfg, bytes) = ExperimentConfig::load(config)?;
    if let Some(c) = &cfg.command {
        if c != name {
            return Err(Error::invalid(format!("config is for `{c}`, not `{name}`")));
        }
    }
    let hash = format!("{:x}", Sha256::digest(&bytes));
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| env_out.map(Path::to_path_buf))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("prlab-out").join(name));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::invalid(format!("cannot create output directory {}: {e}", dir.display())))?;

    let start = Instant::now();
    let outcome = match commands::run(name, &cfg) {
        Ok(o) => o,
        Err(e) => {
            // An unresolved tail still has a survival curve worth keeping.
            if let Error::InsufficientTail { thresholds, survival, .. } = &e {
                let mut csv = String::from("t,survival\n");
                for (t, s) in thresholds.iter().zip(survival) {
                    csv.push_str(&format!("{t:?},{s:?}\n"));
                }
                write(&dir, "survival.csv", &csv)?;
            }
            return Err(e);
        }
    };
    let elapsed = start.elapsed().as_secs_f64();

    let results = json!({
        "schema": SCHEMA,
        "command": name,
        "seed": cfg.seed,
        "config_sha256": hash,
        "result": outcome.result,
    });
    let mut files = vec!["results.json".to_string()];
    write(&dir, "results.json", &serde_json::to_string_pretty(&results)?)?;
    for (file, content) in &outcome.artifacts {
        write(&dir, file, content)?;
        files.push(file.clone());
    }
    files.push("report.json".into());
    let report = json!({
        "schema": SCHEMA,
        "command": name,
        "seed": cfg.seed,
        "config_sha256": hash,
        "config": serde_json::to_value(&cfg)?,
        "summary": outcome.summary,
        "artifacts": files,
        "result": results["result"].clone(),
        "timing": { "elapsed_seconds": elapsed },
    });
    let report_json = serde_json::to_string_pretty(&report)?;
    write(&dir, "report.json", &report_json)?;
    Ok(Done { dir, files, summary: outcome.summary, report_json })
}
