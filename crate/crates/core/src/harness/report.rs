use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::Method;

/// Score reported for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    Rmse,
    Accuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "RMSE",
            Metric::Accuracy => "accuracy",
        }
    }
}

/// Outcome of one method in one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub method: Method,
    pub repeat: usize,
    pub metric: Metric,
    pub lambda: f64,
    pub gamma: f64,
    pub inner_gamma: Option<f64>,
    pub val_score: f64,
    pub test_score: f64,
    pub seconds: f64,
    /// Number of validation scores the selector compared.
    pub cells_evaluated: usize,
}

impl TrialResult {
    pub fn chosen_gammas(&self) -> String {
        match self.inner_gamma {
            Some(inner) => format!("gamma={};inner={}", self.gamma, inner),
            None => format!("gamma={}", self.gamma),
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    method: &'a str,
    repeat: usize,
    chosen_lambda: f64,
    chosen_gammas: String,
    val_score: f64,
    test_score: f64,
    seconds: f64,
}

/// Mean and standard deviation of the test score for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub metric: Metric,
    pub repeats: usize,
    pub mean: f64,
    /// Population standard deviation over repeats.
    pub sd: f64,
    pub mean_val: f64,
}

/// Per-method aggregates in order of first appearance.
pub fn summarize(results: &[TrialResult]) -> Vec<Summary> {
    let mut order: Vec<Method> = Vec::new();
    for r in results {
        if !order.contains(&r.method) {
            order.push(r.method);
        }
    }
    order
        .into_iter()
        .map(|method| {
            let rows: Vec<&TrialResult> = results.iter().filter(|r| r.method == method).collect();
            let k = rows.len() as f64;
            let mean = rows.iter().map(|r| r.test_score).sum::<f64>() / k;
            let var = rows.iter().map(|r| (r.test_score - mean).powi(2)).sum::<f64>() / k;
            Summary {
                method,
                metric: rows[0].metric,
                repeats: rows.len(),
                mean,
                sd: var.sqrt(),
                mean_val: rows.iter().map(|r| r.val_score).sum::<f64>() / k,
            }
        })
        .collect()
}

pub fn csv_string(results: &[TrialResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(CsvRow {
            method: r.method.name(),
            repeat: r.repeat,
            chosen_lambda: r.lambda,
            chosen_gammas: r.chosen_gammas(),
            val_score: r.val_score,
            test_score: r.test_score,
            seconds: r.seconds,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Markdown table with one `mean (sd)` column per method.
pub fn markdown_summary(results: &[TrialResult], title: &str) -> String {
    let summaries = summarize(results);
    let mut md = String::new();
    let _ = writeln!(md, "# {title}\n");
    let metric = summaries.first().map_or("score", |s| s.metric.name());
    let _ = writeln!(md, "Test {metric}, mean (sd) over repeats.\n");
    let _ = writeln!(md, "| method | test {metric} | mean validation | repeats |");
    let _ = writeln!(md, "|---|---|---|---|");
    for s in &summaries {
        let _ = writeln!(md, "| {} | {:.2} ({:.2}) | {:.4} | {} |", s.method, s.mean, s.sd, s.mean_val, s.repeats);
    }
    md
}

/// Writes `results.csv` and `summary.md` into `dir`.
pub fn emit_report(results: &[TrialResult], dir: &Path, title: &str) -> Result<(PathBuf, PathBuf)> {
    if results.is_empty() {
        return Err(Error::invalid("no results to report"));
    }
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    let md_path = dir.join("summary.md");
    fs::write(&csv_path, csv_string(results)?)?;
    fs::write(&md_path, markdown_summary(results, title))?;
    Ok((csv_path, md_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(method: Method, repeat: usize, test: f64) -> TrialResult {
        TrialResult {
            method,
            repeat,
            metric: Metric::Rmse,
            lambda: 1e-3,
            gamma: 0.5,
            inner_gamma: (method == Method::Mmd).then_some(2.0),
            val_score: test * 0.9,
            test_score: test,
            seconds: 0.25,
            cells_evaluated: 10,
        }
    }

    fn sample() -> Vec<TrialResult> {
        let mut v = Vec::new();
        for rep in 0..5 {
            for (k, m) in [Method::Mmd, Method::Sw2, Method::Sw1].into_iter().enumerate() {
                v.push(result(m, rep, 0.4 + 0.1 * k as f64 + 0.01 * rep as f64));
            }
        }
        v
    }

    #[test]
    fn row_and_summary_counts() {
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, md_path) = emit_report(&sample(), dir.path(), "modes").unwrap();
        let csv = fs::read_to_string(csv_path).unwrap();
        assert_eq!(csv.lines().count(), 16);
        assert!(csv.starts_with("method,repeat,chosen_lambda,chosen_gammas,val_score,test_score,seconds"));
        let md = fs::read_to_string(md_path).unwrap();
        assert_eq!(md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| method")).count(), 3);
    }

    #[test]
    fn summary_recomputable_from_csv() {
        let results = sample();
        let csv = csv_string(&results).unwrap();
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        let mut sw2 = Vec::new();
        for rec in reader.records() {
            let rec = rec.unwrap();
            if &rec[0] == "SW2" {
                sw2.push(rec[5].parse::<f64>().unwrap());
            }
        }
        let mean = sw2.iter().sum::<f64>() / sw2.len() as f64;
        let sd = (sw2.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / sw2.len() as f64).sqrt();
        let s = summarize(&results).into_iter().find(|s| s.method == Method::Sw2).unwrap();
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.sd - sd).abs() < 1e-12);
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], dir.path(), "x").is_err());
    }

    #[test]
    fn gamma_column_format() {
        assert_eq!(result(Method::Mmd, 0, 1.0).chosen_gammas(), "gamma=0.5;inner=2");
        assert_eq!(result(Method::Sw2, 0, 1.0).chosen_gammas(), "gamma=0.5");
    }
}
