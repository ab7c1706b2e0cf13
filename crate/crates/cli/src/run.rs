//! `deft train`: one configured run, one metrics row per step.

use std::path::{Path, PathBuf};
use std::time::Instant;

use deft_core::Trainer;

use crate::config::RunConfig;
use crate::metrics::{MetricsRecord, MetricsWriter};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    /// Loss at the parameters left after the last step.
    pub final_loss: f64,
    /// Mean projection error over every step that rebuilt a projector.
    pub mean_projection_error: Option<f64>,
    pub state_elements: usize,
}

/// Trains without writing anything; `on_step` sees each record.
pub fn train(cfg: &RunConfig, mut on_step: impl FnMut(&MetricsRecord) -> CliResult<()>) -> CliResult<RunSummary> {
    let mut trainer = Trainer::new(
        cfg.build_problem(),
        &cfg.projection.core(),
        cfg.projection.rank_policy(),
        cfg.adamw,
        cfg.run.seed,
    )?;
    let start = Instant::now();
    let mut errors = Vec::new();
    for _ in 0..cfg.run.steps {
        let rec = trainer.step()?;
        errors.extend(rec.projection_error);
        let timing = |s: f64| if cfg.run.record_timing { s } else { 0.0 };
        on_step(&MetricsRecord {
            step: rec.step,
            loss: rec.loss,
            grad_norm: rec.grad_norm,
            update_norm: rec.update_norm,
            projector_rebuilt: rec.projector_rebuilt,
            projector_build_seconds: timing(rec.projector_build_seconds),
            state_elements: rec.state_elements,
            cumulative_seconds: timing(start.elapsed().as_secs_f64()),
        })?;
    }
    let final_loss = trainer.loss()?;
    if !final_loss.is_finite() {
        return Err(CliError::Diverged {
            step: cfg.run.steps,
            detail: format!("final loss became {final_loss}"),
        });
    }
    Ok(RunSummary {
        steps: cfg.run.steps,
        final_loss,
        mean_projection_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        state_elements: trainer.state_elements(),
    })
}

/// Runs `cfg` and streams metrics to `output` (default: the configured path
/// under `$DEFT_OUTPUT_DIR`). Rows already written stay on disk if the run
/// diverges.
pub fn train_to_file(cfg: &RunConfig, output: Option<&Path>) -> CliResult<(RunSummary, PathBuf)> {
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_path());
    let mut writer = MetricsWriter::create(&path, cfg.run.format)?;
    let summary = train(cfg, |r| writer.write(r))?;
    Ok((summary, path))
}
