//! File emission for experiment commands. Everything is written
//! temp-then-rename so a crash never leaves a half-written file under a
//! final name, and nothing embeds timestamps, so reruns are byte-stable.

use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::experiment::config::ExperimentConfig;
use crate::scoring::ScoreReport;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Scores as comma-delimited text: one row per sample, diagonal entries
/// after the ground-truth flag. Floats print in shortest round-trip
/// form, so the file preserves exact values.
pub fn scores_csv(reports: &[ScoreReport], is_majority: &[bool]) -> String {
    let n = reports.first().map_or(0, |r| r.diagonal.len());
    let mut out = String::from("sample_id,score,is_majority");
    for i in 1..=n {
        write!(out, ",d{i}").unwrap();
    }
    out.push('\n');
    for (r, maj) in reports.iter().zip(is_majority) {
        write!(out, "{},{},{}", r.sample_id, r.score, *maj as u8).unwrap();
        for d in &r.diagonal {
            write!(out, ",{d}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn loss_csv(loss_curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, loss) in loss_curve.iter().enumerate() {
        writeln!(out, "{},{loss}", i + 1).unwrap();
    }
    out
}

pub fn curve_csv(header: (&str, &str), points: &[(f64, f64)]) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (x, y) in points {
        writeln!(out, "{x},{y}").unwrap();
    }
    out
}

/// Summary rows keyed by an experiment axis (transform set, train size).
pub fn summary_csv(
    key_name: &str,
    rows: &[(String, Option<EvalReport>, Option<String>)],
) -> String {
    let mut out = format!(
        "{key_name},runs,auc_mean,auc_std,aupr_maj_mean,aupr_maj_std,\
         aupr_min_mean,aupr_min_std,error\n"
    );
    for (key, report, error) in rows {
        match report {
            Some(r) => writeln!(
                out,
                "{key},{},{},{},{},{},{},{},",
                r.runs,
                r.auc.mean,
                r.auc.std,
                r.aupr_majority.mean,
                r.aupr_majority.std,
                r.aupr_minority.mean,
                r.aupr_minority.std,
            )
            .unwrap(),
            None => {
                // keep the row parseable: errors may contain commas
                let msg = error.as_deref().unwrap_or("unknown").replace(',', ";");
                writeln!(out, "{key},0,,,,,,,{msg}").unwrap();
            }
        }
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Machine-readable record of what produced a directory's outputs: the
/// resolved config, the dataset identity, and the model files' digests.
#[derive(serde::Serialize)]
struct ProvenanceDoc<'a> {
    dataset_hash: &'a str,
    config: &'a ExperimentConfig,
    models: BTreeMap<String, String>,
}

pub fn write_provenance(
    out_dir: &Path,
    config: &ExperimentConfig,
    dataset_hash: &str,
    model_paths: &[PathBuf],
) -> Result<PathBuf> {
    let mut models = BTreeMap::new();
    for p in model_paths {
        let name = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        models.insert(name, sha256_file(p)?);
    }
    let doc = ProvenanceDoc {
        dataset_hash,
        config,
        models,
    };
    let text = toml::to_string(&doc)
        .map_err(|e| Error::InvalidConfig(format!("provenance serialization failed: {e}")))?;
    let path = out_dir.join("provenance.txt");
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
