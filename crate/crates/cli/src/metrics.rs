//! Per-step metrics rows, written as CSV or JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::MetricsFormat;
use crate::{CliError, CliResult};

/// One row per optimizer step. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub update_norm: f64,
    pub projector_rebuilt: bool,
    pub projector_build_seconds: f64,
    pub state_elements: usize,
    pub cumulative_seconds: f64,
}

pub const COLUMNS: [&str; 8] = [
    "step",
    "loss",
    "grad_norm",
    "update_norm",
    "projector_rebuilt",
    "projector_build_seconds",
    "state_elements",
    "cumulative_seconds",
];

/// Streams records to disk, flushing after every row so a run that fails
/// part-way leaves its completed steps behind.
pub struct MetricsWriter {
    inner: Inner,
    path: String,
}

enum Inner {
    Csv(Box<csv::Writer<File>>),
    Jsonl(BufWriter<File>),
}

impl MetricsWriter {
    pub fn create(path: &Path, format: MetricsFormat) -> CliResult<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        }
        let file = File::create(path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
        let inner = match format {
            MetricsFormat::Csv => Inner::Csv(Box::new(csv::Writer::from_writer(file))),
            MetricsFormat::Jsonl => Inner::Jsonl(BufWriter::new(file)),
        };
        Ok(Self {
            inner,
            path: path.display().to_string(),
        })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> CliResult<()> {
        let res = match &mut self.inner {
            Inner::Csv(w) => w
                .serialize(record)
                .map_err(std::io::Error::other)
                .and_then(|_| w.flush()),
            Inner::Jsonl(w) => serde_json::to_writer(&mut *w, record)
                .map_err(std::io::Error::other)
                .and_then(|_| w.write_all(b"\n"))
                .and_then(|_| w.flush()),
        };
        res.map_err(|e| CliError::io(format!("writing {}", self.path), e))
    }
}

/// Reads a metrics file in either format; `.jsonl` selects JSON lines.
pub fn read_metrics(path: &Path) -> CliResult<Vec<MetricsRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    let bad = |e: std::io::Error| CliError::io(format!("reading {}", path.display()), e);
    if path.extension().is_some_and(|x| x == "jsonl") {
        BufReader::new(file)
            .lines()
            .map(|line| {
                let line = line.map_err(bad)?;
                serde_json::from_str(&line).map_err(|e| bad(e.into()))
            })
            .collect()
    } else {
        csv::Reader::from_reader(file)
            .deserialize()
            .map(|r| r.map_err(|e| bad(std::io::Error::other(e))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64) -> MetricsRecord {
        MetricsRecord {
            step,
            loss: 1234567.5 / step as f64,
            grad_norm: 1e-300,
            update_norm: 0.0,
            projector_rebuilt: step == 1,
            projector_build_seconds: 0.25,
            state_elements: 1_000_000,
            cumulative_seconds: 1.5,
        }
    }

    #[test]
    fn csv_header_and_plain_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path, MetricsFormat::Csv).unwrap();
        w.write(&record(1)).unwrap();
        w.write(&record(2)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], COLUMNS.join(","));
        assert_eq!(lines[1], "1,1234567.5,1e-300,0.0,true,0.25,1000000,1.5");
        assert_eq!(lines.len(), 3);
        assert_eq!(read_metrics(&path).unwrap(), vec![record(1), record(2)]);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut w = MetricsWriter::create(&path, MetricsFormat::Jsonl).unwrap();
        for s in 1..4 {
            w.write(&record(s)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"step\":1,\"loss\":"));
        assert_eq!(read_metrics(&path).unwrap().len(), 3);
    }
}
