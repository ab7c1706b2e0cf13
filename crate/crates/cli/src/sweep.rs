//! `deft rank-sweep`: the same run at several ranks plus a dense reference.

use std::io::Write;

use deft_core::Method;
use serde::{Deserialize, Serialize};

use crate::config::{RankValue, RunConfig};
use crate::run::train;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `2`, `min`, or `dense` for the reference run.
    pub rank: String,
    /// Largest rank actually used by any parameter.
    pub effective_rank: usize,
    pub final_loss: f64,
    pub mean_projection_error: Option<f64>,
    pub state_elements: usize,
}

/// Largest rank any matrix parameter of the configured problem accepts.
pub fn max_rank(cfg: &RunConfig) -> usize {
    cfg.build_problem()
        .shapes()
        .into_iter()
        .filter(|&(r, c)| r.min(c) > 1)
        .map(|(r, c)| r.min(c))
        .max()
        .unwrap_or(1)
}

/// Runs `cfg` once per rank, then once with dense AdamW. Each parameter
/// clamps the rank to its own `min(m, n)`; ranks above every parameter's
/// size are reported through `note`. Nothing is written to disk.
pub fn rank_sweep(cfg: &RunConfig, ranks: &[RankValue], mut note: impl FnMut(String)) -> CliResult<Vec<SweepRow>> {
    let limit = max_rank(cfg);
    let mut rows = Vec::with_capacity(ranks.len() + 1);
    for &rank in ranks {
        if let RankValue::Fixed(k) = rank {
            if k > limit {
                note(format!("rank {k} exceeds every parameter and runs as {limit}"));
            }
        }
        let mut c = cfg.clone();
        c.projection.rank = Some(rank);
        c.projection.rank_fraction = None;
        rows.push(row(rank.to_string(), &c)?);
    }
    let mut dense = cfg.clone();
    dense.projection.method = Method::Identity;
    dense.projection.two_sided = false;
    dense.projection.rank = Some(RankValue::Min);
    dense.projection.rank_fraction = None;
    rows.push(row("dense".into(), &dense)?);
    Ok(rows)
}

fn row(label: String, cfg: &RunConfig) -> CliResult<SweepRow> {
    let s = train(cfg, |_| Ok(()))?;
    let effective_rank = cfg
        .build_problem()
        .shapes()
        .into_iter()
        .filter(|&(r, c)| cfg.projection.method != Method::Identity && r.min(c) > 1)
        .map(|(r, c)| cfg.projection.rank_policy().resolve(r, c))
        .max()
        .unwrap_or_else(|| max_rank(cfg));
    Ok(SweepRow {
        rank: label,
        effective_rank,
        final_loss: s.final_loss,
        mean_projection_error: s.mean_projection_error,
        state_elements: s.state_elements,
    })
}

pub fn write_csv(rows: &[SweepRow], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::io("writing sweep table", std::io::Error::other(e));
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::io("writing sweep table", e))
}
