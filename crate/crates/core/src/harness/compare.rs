//! Side-by-side comparison of result directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::run::{seed_csv, RunSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub higher_is_better: bool,
    /// Mean value per directory, in argument order.
    pub values: Vec<f64>,
    /// `values[i] - values[0]`.
    pub deltas: Vec<f64>,
    /// Indices of the directories holding the best value.
    pub winners: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub dirs: Vec<PathBuf>,
    pub metrics: Vec<MetricComparison>,
    /// Numeric CSV columns shared by all directories.
    pub columns: Vec<String>,
    /// `table[row][dir][col]`: seed-averaged value, rows aligned by position.
    pub table: Vec<Vec<Vec<f64>>>,
}

impl Comparison {
    /// Bit `i` is set when the first directory is not among the winners of
    /// metric `i` (in [`Comparison::metrics`] order). Zero means the first
    /// directory is at least as good as every other one on every metric.
    pub fn exit_code(&self) -> i32 {
        self.metrics
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.winners.contains(&0))
            .fold(0, |acc, (i, _)| acc | (1 << i.min(30)))
    }

    pub fn metrics_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "directories:");
        for (i, d) in self.dirs.iter().enumerate() {
            let _ = writeln!(out, "  [{i}] {}", d.display());
        }
        for m in &self.metrics {
            let vals: Vec<String> = m.values.iter().map(|v| format!("{v:.6}")).collect();
            let deltas: Vec<String> = m.deltas.iter().map(|v| format!("{v:+.6}")).collect();
            let _ = writeln!(
                out,
                "{:<18} values [{}] deltas [{}] winner {:?}",
                m.metric,
                vals.join(", "),
                deltas.join(", "),
                m.winners
            );
        }
        out
    }

    /// Aligned per-row table as CSV: `row`, then `<column>_<dir>` for every
    /// directory and `<column>_delta<dir>` against the first.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row".to_string()];
        for c in &self.columns {
            for d in 0..self.dirs.len() {
                header.push(format!("{c}_{d}"));
            }
            for d in 1..self.dirs.len() {
                header.push(format!("{c}_delta{d}"));
            }
        }
        w.write_record(&header)?;
        for (r, row) in self.table.iter().enumerate() {
            let mut rec = vec![(r + 1).to_string()];
            for c in 0..self.columns.len() {
                for dir in row {
                    rec.push(dir[c].to_string());
                }
                for dir in &row[1..] {
                    rec.push((dir[c] - row[0][c]).to_string());
                }
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Validation(e.to_string()))
    }
}

fn load_summary(dir: &Path) -> Result<RunSummary> {
    let p = dir.join("summary.json");
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: p,
        message: e.to_string(),
    })
}

/// Seed-averaged numeric columns of a directory's CSVs.
fn load_table(dir: &Path, summary: &RunSummary) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header: Option<Vec<String>> = None;
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for s in &summary.seeds {
        let path = seed_csv(dir, s.seed);
        let mut rdr = csv::Reader::from_path(&path)?;
        let h: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        match &header {
            None => header = Some(h.clone()),
            Some(prev) if *prev != h => {
                return Err(Error::Schema(format!(
                    "{} has columns {h:?}, expected {prev:?}",
                    path.display()
                )))
            }
            _ => {}
        }
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec.iter().map(|v| v.parse::<f64>().unwrap_or(f64::NAN)).collect();
            if sums.len() <= i {
                sums.push(vec![0.0; vals.len()]);
                counts.push(0);
            }
            for (a, v) in sums[i].iter_mut().zip(&vals) {
                *a += v;
            }
            counts[i] += 1;
        }
    }
    let header = header.unwrap_or_default();
    // keep columns that parse as numbers everywhere
    let numeric: Vec<usize> = (0..header.len())
        .filter(|&c| sums.iter().all(|row| row[c].is_finite()))
        .collect();
    let rows = sums
        .iter()
        .zip(&counts)
        .map(|(row, &n)| numeric.iter().map(|&c| row[c] / n as f64).collect())
        .collect();
    Ok((numeric.iter().map(|&c| header[c].clone()).collect(), rows))
}

pub fn compare(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(Error::Config("compare needs at least two result directories".into()));
    }
    let summaries = dirs.iter().map(|d| load_summary(d)).collect::<Result<Vec<_>>>()?;
    let first = &summaries[0];
    for (d, s) in dirs.iter().zip(&summaries).skip(1) {
        if s.schema_version != first.schema_version {
            return Err(Error::Schema(format!(
                "{} has schema version {}, expected {}",
                d.display(),
                s.schema_version,
                first.schema_version
            )));
        }
        if s.mode.produces_training_rows() != first.mode.produces_training_rows() {
            return Err(Error::Schema(format!(
                "{} holds {:?} results, expected {:?}",
                d.display(),
                s.mode,
                first.mode
            )));
        }
        let a: Vec<&String> = s.metrics.keys().collect();
        let b: Vec<&String> = first.metrics.keys().collect();
        if a != b {
            return Err(Error::Schema(format!(
                "{} reports metrics {a:?}, expected {b:?}",
                d.display()
            )));
        }
    }

    let mut metrics = Vec::new();
    for (name, m0) in &first.metrics {
        let values: Vec<f64> = summaries.iter().map(|s| s.metrics[name].mean).collect();
        let best = if m0.higher_is_better {
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            values.iter().copied().fold(f64::INFINITY, f64::min)
        };
        metrics.push(MetricComparison {
            metric: name.clone(),
            higher_is_better: m0.higher_is_better,
            deltas: values.iter().map(|v| v - values[0]).collect(),
            winners: (0..values.len()).filter(|&i| values[i] == best).collect(),
            values,
        });
    }

    let tables = dirs
        .iter()
        .zip(&summaries)
        .map(|(d, s)| load_table(d, s))
        .collect::<Result<Vec<_>>>()?;
    let columns = tables[0].0.clone();
    for ((cols, _), d) in tables.iter().zip(dirs).skip(1) {
        if *cols != columns {
            return Err(Error::Schema(format!(
                "{} has CSV columns {cols:?}, expected {columns:?}",
                d.display()
            )));
        }
    }
    let n_rows = tables.iter().map(|(_, rows)| rows.len()).min().unwrap_or(0);
    let table = (0..n_rows)
        .map(|r| tables.iter().map(|(_, rows)| rows[r].clone()).collect())
        .collect();
    let mut by_metric = BTreeMap::new();
    for m in &metrics {
        by_metric.insert(m.metric.clone(), m.winners.clone());
    }
    log::debug!("winners {by_metric:?}");
    Ok(Comparison {
        dirs: dirs.to_vec(),
        metrics,
        columns,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::preset;
    use crate::harness::run::run;

    #[test]
    fn self_comparison_has_zero_deltas() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset("fig3-auto").unwrap();
        cfg.out_dir = dir.path().join("a");
        run(&cfg).unwrap();
        let c = compare(&[cfg.out_dir.clone(), cfg.out_dir.clone()]).unwrap();
        assert!(c.metrics.iter().all(|m| m.deltas.iter().all(|d| *d == 0.0)));
        assert_eq!(c.exit_code(), 0);
        assert!(c.table_csv().unwrap().starts_with("row,step_0,step_1,step_delta1"));
    }

    #[test]
    fn replay_vs_auto_sign() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = preset("fig3-replay").unwrap();
        a.out_dir = dir.path().join("replay");
        let mut b = preset("fig3-auto").unwrap();
        b.out_dir = dir.path().join("auto");
        run(&a).unwrap();
        run(&b).unwrap();
        let c = compare(&[a.out_dir.clone(), b.out_dir.clone()]).unwrap();
        let t = c.metrics.iter().find(|m| m.metric == "t_diss_s").unwrap();
        // the autonomous schedule beats the scripted one
        assert!(t.deltas[1] < 0.0);
        assert_ne!(c.exit_code(), 0);
    }

    #[test]
    fn mismatched_modes_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = preset("fig3-auto").unwrap();
        a.out_dir = dir.path().join("a");
        run(&a).unwrap();
        let b = dir.path().join("b");
        std::fs::create_dir_all(&b).unwrap();
        let text = std::fs::read_to_string(a.out_dir.join("summary.json"))
            .unwrap()
            .replace("\"disseminate\"", "\"train\"");
        std::fs::write(b.join("summary.json"), text).unwrap();
        assert!(matches!(compare(&[a.out_dir, b]), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_dir_is_io_error() {
        let err = compare(&[PathBuf::from("/nonexistent/a"), PathBuf::from("/nonexistent/b")]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
