//! Metrics CSV files.
//!
//! The first line is a `#` comment naming the run manifest; the rest is a
//! plain CSV with one row per metrics window.

use std::io::Write;
use std::path::Path;

use optit_core::learn::MetricsRow;

pub const COLUMNS: [&str; 6] =
    ["total_env_steps", "windowed_return_mean", "windowed_return_ci95", "loss_policy", "loss_value", "sigma_bar"];

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}: unexpected columns")]
    Columns(String),
}

pub struct MetricsWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl MetricsWriter<std::fs::File> {
    pub fn create(path: &Path, manifest: &str) -> Result<Self, MetricsError> {
        Self::new(std::fs::File::create(path)?, manifest)
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W, manifest: &str) -> Result<Self, MetricsError> {
        writeln!(out, "# manifest: {manifest}")?;
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(COLUMNS)?;
        Ok(MetricsWriter { csv })
    }

    pub fn write(&mut self, r: &MetricsRow) -> Result<(), MetricsError> {
        let f = |v: f64| v.to_string();
        self.csv.write_record([
            r.total_env_steps.to_string(),
            f(r.windowed_return_mean),
            f(r.windowed_return_ci95),
            f(r.loss_policy),
            f(r.loss_value),
            f(r.sigma_bar),
        ])?;
        self.csv.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, MetricsError> {
        self.csv.into_inner().map_err(|e| MetricsError::Io(e.into_error()))
    }
}

fn parse(name: &str, rdr: impl std::io::Read) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(rdr);
    if rdr.headers()?.iter().ne(COLUMNS) {
        return Err(MetricsError::Columns(name.into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let (total_env_steps, windowed_return_mean, windowed_return_ci95, loss_policy, loss_value, sigma_bar): (u64, f64, f64, f64, f64, f64) =
            rec?;
        rows.push(MetricsRow { total_env_steps, windowed_return_mean, windowed_return_ci95, loss_policy, loss_value, sigma_bar });
    }
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, MetricsError> {
    parse(&path.display().to_string(), std::fs::File::open(path)?)
}

/// Manifest named by a metrics file's first line.
pub fn manifest_reference(path: &Path) -> Result<Option<String>, MetricsError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().next().and_then(|l| l.strip_prefix("# manifest: ")).map(str::to_owned))
}

/// Mean windowed return over rows in the trailing `fraction` of training.
pub fn trailing_mean(rows: &[MetricsRow], total_steps: u64, fraction: f64) -> f64 {
    let from = total_steps as f64 * (1.0 - fraction);
    let tail: Vec<f64> =
        rows.iter().filter(|r| r.total_env_steps as f64 > from && r.windowed_return_mean.is_finite()).map(|r| r.windowed_return_mean).collect();
    if tail.is_empty() {
        f64::NAN
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, ret: f64) -> MetricsRow {
        MetricsRow { total_env_steps: step, windowed_return_mean: ret, windowed_return_ci95: 0.1, loss_policy: f64::NAN, loss_value: 0.25, sigma_bar: 1.0 }
    }

    #[test]
    fn write_read_round_trip() {
        let mut w = MetricsWriter::new(Vec::new(), "manifest.json").unwrap();
        let rows = [row(10, 0.5), row(20, -1.0 / 3.0)];
        for r in &rows {
            w.write(r).unwrap();
        }
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# manifest: manifest.json\ntotal_env_steps,windowed_return_mean,"));
        let back = parse("mem", &bytes[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].windowed_return_mean, -1.0 / 3.0);
        assert!(back[0].loss_policy.is_nan());
    }

    #[test]
    fn trailing_window() {
        let rows: Vec<_> = (1..=10).map(|i| row(i * 10, i as f64)).collect();
        assert_eq!(trailing_mean(&rows, 100, 0.2), 9.5);
        assert_eq!(trailing_mean(&rows, 100, 1.0), 5.5);
    }
}
