//! CSV and JSON emission of batch results.
//!
//! * `tau.csv`: `run_id,strategy,tau,correct,answer,prop_1..prop_K`, one row
//!   per completed run (`answer` is empty for truncated runs).
//! * `props.csv`: `run_id,strategy,t,prop_1..prop_K`, one row per snapshot.
//! * `aggregate.json`: the [`Aggregate`](super::Aggregate).
//!
//! Rows are in strategy order, then run order, so the files are reproducible
//! byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use super::BatchResult;
use crate::error::{Error, Result};

pub const TAU_CSV: &str = "tau.csv";
pub const PROPS_CSV: &str = "props.csv";
pub const AGGREGATE_JSON: &str = "aggregate.json";

fn out_err(e: impl std::fmt::Display) -> Error {
    Error::Output(e.to_string())
}

fn prop_header(k: usize) -> impl Iterator<Item = String> {
    (1..=k).map(|j| format!("prop_{j}"))
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

pub fn tau_csv(batch: &BatchResult) -> Result<String> {
    let k = batch.plan.mu.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = ["run_id", "strategy", "tau", "correct", "answer"]
        .into_iter()
        .map(String::from)
        .chain(prop_header(k))
        .collect();
    w.write_record(&header).map_err(out_err)?;
    for s in &batch.strategies {
        for (id, r) in s.completed() {
            let mut row = vec![
                id.to_string(),
                s.label.clone(),
                r.tau.to_string(),
                r.correct.to_string(),
                r.answer_label.clone().unwrap_or_default(),
            ];
            row.extend(r.final_props.iter().copied().map(fmt_f));
            w.write_record(&row).map_err(out_err)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(out_err)?).map_err(out_err)
}

pub fn props_csv(batch: &BatchResult) -> Result<String> {
    let k = batch.plan.mu.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = ["run_id", "strategy", "t"]
        .into_iter()
        .map(String::from)
        .chain(prop_header(k))
        .collect();
    w.write_record(&header).map_err(out_err)?;
    for s in &batch.strategies {
        for (id, r) in s.completed() {
            for snap in &r.snapshots {
                let mut row = vec![id.to_string(), s.label.clone(), snap.t.to_string()];
                row.extend(snap.props.iter().copied().map(fmt_f));
                w.write_record(&row).map_err(out_err)?;
            }
        }
    }
    String::from_utf8(w.into_inner().map_err(out_err)?).map_err(out_err)
}

pub fn aggregate_json(batch: &BatchResult) -> Result<String> {
    serde_json::to_string_pretty(&batch.aggregate).map_err(out_err)
}

/// Writes the three output files into `dir` (created if missing) and returns their paths.
pub fn write_outputs(batch: &BatchResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Output(format!("{}: {e}", dir.display())))?;
    let files = [
        (TAU_CSV, tau_csv(batch)?),
        (PROPS_CSV, props_csv(batch)?),
        (AGGREGATE_JSON, aggregate_json(batch)?),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::Output(format!("{}: {e}", p.display())))?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_batch;
    use crate::sim::scenario::fig3;

    #[test]
    fn csv_shapes() {
        let mut plan = fig3(0.2);
        plan.replications = 3;
        plan.strategies[0].max_rounds = 400;
        plan.collect.snapshots = vec![100, 300];
        let b = run_batch(&plan, Some(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_outputs(&b, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let mut r = csv::Reader::from_path(dir.path().join(TAU_CSV)).unwrap();
        assert_eq!(r.headers().unwrap().len(), 7);
        let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows
            .iter()
            .all(|row| row.len() == 7 && &row[2] == "400" && row[4].is_empty()));
        let mut r = csv::Reader::from_path(dir.path().join(PROPS_CSV)).unwrap();
        let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 6);
        for row in &rows {
            let p: f64 = row[3].parse::<f64>().unwrap() + row[4].parse::<f64>().unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
        let agg: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(AGGREGATE_JSON)).unwrap()).unwrap();
        assert_eq!(agg["strategies"][0]["truncated"], 3);
    }
}
