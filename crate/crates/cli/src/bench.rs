//! `deft bench`: projector build times on a shared synthetic gradient.

use std::io::Write;
use std::time::Instant;

use deft_core::projector::projection_error;
use deft_core::zoo::synthetic_gradient;
use deft_core::{Method, ProjectionConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Rank of the signal in the benchmark gradient; the rest is 1% noise.
pub const SIGNAL_RANK: usize = 16;
pub const NOISE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub shapes: Vec<(usize, usize)>,
    pub ranks: Vec<usize>,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            shapes: vec![(2048, 2048)],
            ranks: vec![128],
            reps: 10,
            methods: vec![Method::Deft, Method::Svd, Method::Rsvd, Method::Dct],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub reps: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub projection_error: f64,
}

/// Parses `2048x2048` (also `X` or `×`).
pub fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let s = s.trim();
    let (a, b) = s
        .split_once(['x', 'X', '×'])
        .ok_or_else(|| format!("invalid shape `{s}` (expected ROWSxCOLS)"))?;
    let dim = |t: &str| match t.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("invalid shape `{s}` (dimensions must be positive integers)")),
    };
    Ok((dim(a)?, dim(b)?))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// One row per valid (shape, rank, method). Each cell builds once untimed,
/// then `reps` timed builds. Skipped cells are reported through `note`.
pub fn run_bench(spec: &BenchSpec, mut note: impl FnMut(String)) -> CliResult<Vec<BenchRow>> {
    if spec.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for (si, &(m, n)) in spec.shapes.iter().enumerate() {
        let g = synthetic_gradient(m, n, SIGNAL_RANK, NOISE, spec.seed.wrapping_add(si as u64));
        for &k in &spec.ranks {
            if k == 0 || k > m.min(n) {
                note(format!("skipping k={k} for {m}x{n}: rank must lie in 1..={}", m.min(n)));
                continue;
            }
            for &method in &spec.methods {
                let defaults = ProjectionConfig::default();
                let cfg = ProjectionConfig {
                    method,
                    rank: k,
                    rsvd_oversampling: defaults.rsvd_oversampling.min(m.min(n) - k),
                    rsvd_seed: spec.seed,
                    ..defaults
                };
                let basis = cfg.build(&g, 0)?;
                let mut times = Vec::with_capacity(spec.reps);
                for _ in 0..spec.reps {
                    let t = Instant::now();
                    let b = cfg.build(&g, 0)?;
                    times.push(t.elapsed().as_secs_f64());
                    std::hint::black_box(b);
                }
                rows.push(BenchRow {
                    method,
                    rows: m,
                    cols: n,
                    rank: k,
                    reps: spec.reps,
                    min_seconds: times.iter().copied().fold(f64::INFINITY, f64::min),
                    median_seconds: median(&mut times),
                    projection_error: projection_error(&g, &basis)?,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::io("writing bench table", std::io::Error::other(e));
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::io("writing bench table", e))
}
