//! Multi-run experiments built on [`Trainer`]: the full pipeline, an
//! equal-epoch baseline, the decorrelation-method comparison and the
//! Eigenlayer width sweep.

use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{evaluate_model, Phase, RriOutcome, RriTrace, Trainer};
use crate::config::RunConfig;
use crate::decorrelate::DecorrMethod;
use crate::diagnostics::s_of_w;
use crate::error::{validation, Result};
use crate::eval::RetrievalDataset;
use crate::network::{EigenModel, FreezeMask};

pub struct SvdnetRun {
    pub model: EigenModel,
    /// Model right after step 0, before any decorrelation.
    pub step0_model: EigenModel,
    pub trace: RriTrace,
    pub outcome: RriOutcome,
}

/// Initializes a model, runs step 0 and then RRI with early stopping.
pub fn train_svdnet(data: &RetrievalDataset, cfg: &RunConfig, checkpoint_dir: Option<&Path>) -> Result<SvdnetRun> {
    let mut trainer = Trainer::new(data, cfg.schedule())?.with_eval(cfg.eval_options());
    if let Some(dir) = checkpoint_dir {
        trainer = trainer.with_checkpoint_dir(dir);
    }
    let mut model = trainer.init_model(&cfg.hidden_dims, cfg.eigen_dim)?;
    trainer.step0(&mut model)?;
    let step0_model = model.clone();
    let outcome = trainer.run_rri(&mut model)?;
    Ok(SvdnetRun { model, step0_model, trace: trainer.trace, outcome })
}

/// Plain fine-tuning with the same initialization, step 0, and epoch count
/// as `iterations` RRI cycles, but without decorrelation or freezing.
/// Records one `relaxation` entry per cycle-equivalent.
pub fn train_baseline(data: &RetrievalDataset, cfg: &RunConfig, iterations: usize) -> Result<(EigenModel, RriTrace)> {
    let mut trainer = Trainer::new(data, cfg.schedule())?.with_eval(cfg.eval_options());
    let mut model = trainer.init_model(&cfg.hidden_dims, cfg.eigen_dim)?;
    trainer.step0(&mut model)?;
    let s = trainer.schedule().clone();
    for t in 1..=iterations {
        trainer.run_epochs(&mut model, s.restraint_epochs, s.lr_restraint, FreezeMask::FREE)?;
        trainer.run_epochs(&mut model, s.relaxation_epochs, s.lr_relaxation, FreezeMask::FREE)?;
        trainer.record(&model, t, Phase::Relaxation)?;
    }
    Ok((model, trainer.trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: DecorrMethod,
    pub rank1: f64,
    pub map: f64,
    pub s_of_w: f64,
    pub iterations: usize,
}

/// Trains one model per method with identical initialization and schedule,
/// running all `max_rri` cycles so every row sees the same number of epochs.
/// `Orig` skips the replacement but keeps the frozen restraint phases.
pub fn run_decorr_comparison(
    data: &RetrievalDataset,
    cfg: &RunConfig,
    methods: &[DecorrMethod],
) -> Result<Vec<ComparisonRow>> {
    let repeated = methods.iter().enumerate().any(|(i, m)| methods[..i].contains(m));
    if repeated || methods.is_empty() {
        return Err(validation("methods must be a non-empty list without repeats"));
    }
    let run = |method: DecorrMethod| -> Result<ComparisonRow> {
        let mut trainer = Trainer::new(data, cfg.schedule())?
            .with_eval(cfg.eval_options())
            .with_method(method);
        let mut model = trainer.init_model(&cfg.hidden_dims, cfg.eigen_dim)?;
        trainer.step0(&mut model)?;
        let outcome = trainer.run_rri_fixed(&mut model, cfg.max_rri)?;
        let report = evaluate_model(&model, data, cfg.eval_options())?;
        Ok(ComparisonRow {
            method,
            rank1: report.rank1(),
            map: report.map,
            s_of_w: s_of_w(&model.eigenlayer)?.value,
            iterations: outcome.iterations,
        })
    };
    thread::scope(|scope| {
        let handles: Vec<_> = methods.iter().map(|&m| scope.spawn(move || run(m))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dim: usize,
    pub step0_rank1: f64,
    pub step0_map: f64,
    pub rri_rank1: f64,
    pub rri_map: f64,
    pub rri_iterations: usize,
    pub converged: bool,
}

/// Trains one SVDNet per Eigenlayer width and reports retrieval quality of
/// the step-0 model (without RRI) and the final model (with RRI).
///
/// The last backbone layer is widened to the largest requested width so
/// that every width fits under the same backbone.
pub fn run_dim_sweep(data: &RetrievalDataset, cfg: &RunConfig, dims: &[usize]) -> Result<Vec<SweepRow>> {
    let max_dim = *dims.iter().max().ok_or_else(|| validation("no sweep dims given"))?;
    let mut hidden = cfg.hidden_dims.clone();
    if let Some(last) = hidden.last_mut() {
        *last = (*last).max(max_dim);
    }
    let run = |dim: usize| -> Result<SweepRow> {
        let run_cfg = RunConfig { hidden_dims: hidden.clone(), eigen_dim: dim, ..cfg.clone() };
        let run = train_svdnet(data, &run_cfg, None)?;
        let before = evaluate_model(&run.step0_model, data, cfg.eval_options())?;
        let after = evaluate_model(&run.model, data, cfg.eval_options())?;
        Ok(SweepRow {
            dim,
            step0_rank1: before.rank1(),
            step0_map: before.map,
            rri_rank1: after.rank1(),
            rri_map: after.map,
            rri_iterations: run.outcome.iterations,
            converged: run.outcome.converged,
        })
    };
    thread::scope(|scope| {
        let handles: Vec<_> = dims.iter().map(|&d| scope.spawn(move || run(d))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}
