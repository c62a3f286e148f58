//! Run reports (JSON), the append-only results table (CSV) and the
//! side-by-side comparison view.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub variant: Variant,
    pub seed: u64,
    pub fingerprint: String,
    pub config: RunConfig,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub parameters: usize,
    pub epochs: Vec<EpochMetrics>,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub wall_clock_secs: f64,
    /// Always true: training is single-threaded with a fixed reduction order.
    pub deterministic: bool,
}

impl RunReport {
    /// Every metric as raw bits, for exact run-to-run comparison.
    pub fn metric_bits(&self) -> Vec<u64> {
        let mut bits = Vec::with_capacity(self.epochs.len() * 4 + 2);
        for e in &self.epochs {
            bits.extend(
                [e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy].map(f64::to_bits),
            );
        }
        bits.extend([self.test_loss, self.test_accuracy].map(f64::to_bits));
        bits
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn summary(&self) -> SummaryRow {
        SummaryRow {
            dataset: self.dataset.clone(),
            variant: self.variant,
            seed: self.seed,
            epochs: self.epochs.len(),
            test_loss: self.test_loss,
            test_accuracy: self.test_accuracy,
        }
    }

    /// Writes `<dir>/<stem>.report.json` and appends to `<dir>/results.csv`.
    /// Returns the JSON path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join(format!("{stem}.report.json"));
        fs::write(&path, self.to_json()?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        append_csv(&dir.join(RESULTS_CSV), &self.summary())?;
        Ok(path)
    }
}

pub fn load_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    RunReport::from_json(&text)
}

pub const RESULTS_CSV: &str = "results.csv";

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub variant: Variant,
    pub seed: u64,
    pub epochs: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// Appends one row, writing the header first if the file is new or empty.
pub fn append_csv(path: &Path, row: &SummaryRow) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    w.serialize(row)?;
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Mean test loss and accuracy of both variants on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub dataset: String,
    pub max2x2: Option<(f64, f64, usize)>,
    pub nirmal: Option<(f64, f64, usize)>,
}

/// Groups rows by dataset and averages each variant over its runs.
pub fn compare_rows(rows: &[SummaryRow]) -> Vec<Comparison> {
    let mut datasets: Vec<&str> = Vec::new();
    for r in rows {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }
    let mean = |dataset: &str, variant: Variant| {
        let picked: Vec<&SummaryRow> = rows
            .iter()
            .filter(|r| r.dataset == dataset && r.variant == variant)
            .collect();
        (!picked.is_empty()).then(|| {
            let n = picked.len() as f64;
            (
                picked.iter().map(|r| r.test_loss).sum::<f64>() / n,
                picked.iter().map(|r| r.test_accuracy).sum::<f64>() / n,
                picked.len(),
            )
        })
    };
    datasets
        .into_iter()
        .map(|d| Comparison {
            dataset: d.to_string(),
            max2x2: mean(d, Variant::Max2x2),
            nirmal: mean(d, Variant::Nirmal),
        })
        .collect()
}

/// Plain-text table with Loss and Accuracy columns for each variant.
pub fn format_table(rows: &[Comparison]) -> String {
    let cell = |m: Option<(f64, f64, usize)>| match m {
        Some((loss, acc, _)) => (format!("{loss:.4}"), format!("{:.2}%", acc * 100.0)),
        None => ("-".into(), "-".into()),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>10} {:>10} {:>12} {:>12} {:>5}",
        "Dataset", "Max Loss", "Max Acc", "NIRMAL Loss", "NIRMAL Acc", "Runs"
    );
    for r in rows {
        let (ml, ma) = cell(r.max2x2);
        let (nl, na) = cell(r.nirmal);
        let runs = r.max2x2.map_or(0, |m| m.2).max(r.nirmal.map_or(0, |m| m.2));
        let _ = writeln!(
            out,
            "{:<14} {ml:>10} {ma:>10} {nl:>12} {na:>12} {runs:>5}",
            r.dataset
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(variant: Variant, seed: u64, acc: f64) -> SummaryRow {
        SummaryRow {
            dataset: "synthetic".into(),
            variant,
            seed,
            epochs: 3,
            test_loss: 1.0 - acc,
            test_accuracy: acc,
        }
    }

    #[test]
    fn csv_appends_with_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RESULTS_CSV);
        append_csv(&path, &row(Variant::Nirmal, 1, 0.5)).unwrap();
        append_csv(&path, &row(Variant::Max2x2, 1, 0.25)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "dataset,variant,seed,epochs,test_loss,test_accuracy"
        );
        assert_eq!(text.lines().count(), 3);
        assert_eq!(
            read_csv(&path).unwrap(),
            vec![row(Variant::Nirmal, 1, 0.5), row(Variant::Max2x2, 1, 0.25)]
        );
    }

    #[test]
    fn comparison_averages_per_variant() {
        let rows = [
            row(Variant::Nirmal, 1, 0.5),
            row(Variant::Nirmal, 2, 1.0),
            row(Variant::Max2x2, 1, 0.25),
        ];
        let c = compare_rows(&rows);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].nirmal, Some((0.25, 0.75, 2)));
        assert_eq!(c[0].max2x2, Some((0.75, 0.25, 1)));
        let table = format_table(&c);
        assert!(table.contains("Max Loss") && table.contains("NIRMAL Acc"));
        assert!(table.contains("75.00%"));
    }
}
