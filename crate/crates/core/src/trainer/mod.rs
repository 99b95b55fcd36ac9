//! Step-0 fine-tuning followed by restraint/relaxation iterations (RRI):
//!
//! 1. decorrelate: `W ← U·S` from the SVD of the Eigenlayer weights;
//! 2. restraint: train everything but `W`;
//! 3. relaxation: train everything.
//!
//! Iterations stop once the post-relaxation orthogonality score stabilizes
//! or the budget runs out. Every phase boundary appends a [`TraceRecord`]
//! and, when a checkpoint directory is set, writes `ckpt_rri{t}_{phase}.svdn`.

mod experiments;
mod trace;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::decorrelate::{self, DecorrMethod};
use crate::diagnostics::{rri_converged, s_of_w, CorrelationScore, DEFAULT_EPSILON_S};
use crate::error::{validation, Result, SvdnetError};
use crate::eval::{evaluate_features, RankingReport, RetrievalDataset, Split};
use crate::linalg::Matrix;
use crate::network::{EigenModel, FeatureKind, FreezeMask, ModelDims};
use crate::rng::{seeded, SeededRng};

pub use experiments::{
    run_decorr_comparison, run_dim_sweep, train_baseline, train_svdnet, ComparisonRow, SvdnetRun, SweepRow,
};
pub use trace::{Phase, RriTrace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RriSchedule {
    pub step0_epochs: usize,
    pub restraint_epochs: usize,
    pub relaxation_epochs: usize,
    /// Iteration budget `T`.
    pub max_rri: usize,
    pub lr_step0: f64,
    pub lr_restraint: f64,
    pub lr_relaxation: f64,
    pub batch_size: usize,
    pub epsilon_s: f64,
    pub seed: u64,
}

impl Default for RriSchedule {
    fn default() -> Self {
        Self {
            step0_epochs: 30,
            restraint_epochs: 10,
            relaxation_epochs: 10,
            max_rri: 15,
            lr_step0: 0.05,
            lr_restraint: 0.02,
            lr_relaxation: 0.02,
            batch_size: 32,
            epsilon_s: DEFAULT_EPSILON_S,
            seed: 1,
        }
    }
}

impl RriSchedule {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("step0_epochs", self.step0_epochs),
            ("restraint_epochs", self.restraint_epochs),
            ("relaxation_epochs", self.relaxation_epochs),
            ("max_rri", self.max_rri),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(validation(format!("{name} must be at least 1")));
            }
        }
        let rates = [
            ("lr_step0", self.lr_step0),
            ("lr_restraint", self.lr_restraint),
            ("lr_relaxation", self.lr_relaxation),
            ("epsilon_s", self.epsilon_s),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Model initialization seed, separate from the shuffling stream.
    pub fn init_seed(&self) -> u64 {
        self.seed
    }

    fn shuffle_seed(&self) -> u64 {
        self.seed ^ 0x5EED_5F1E_u64
    }
}

/// How retrieval metrics are computed during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub feature: FeatureKind,
    pub normalize: bool,
}

/// Retrieval quality of `model` on the query/gallery splits of `data`.
pub fn evaluate_model(model: &EigenModel, data: &RetrievalDataset, opts: EvalOptions) -> Result<RankingReport> {
    let q = model.extract_features(&data.split_features(Split::Query), opts.feature)?;
    let g = model.extract_features(&data.split_features(Split::Gallery), opts.feature)?;
    evaluate_features(
        &q,
        &g,
        &data.split_labels(Split::Query),
        &data.split_labels(Split::Gallery),
        opts.normalize,
    )
}

/// Outcome of the RRI loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RriOutcome {
    pub iterations: usize,
    pub converged: bool,
}

/// Drives training of one model over one dataset. Owns the shuffling RNG so
/// that consecutive phases continue a single reproducible stream.
pub struct Trainer<'a> {
    data: &'a RetrievalDataset,
    schedule: RriSchedule,
    eval: EvalOptions,
    method: DecorrMethod,
    checkpoint_dir: Option<PathBuf>,
    train_x: Matrix,
    train_y: Vec<usize>,
    classes: usize,
    rng: SeededRng,
    epochs_done: usize,
    pub trace: RriTrace,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a RetrievalDataset, schedule: RriSchedule) -> Result<Self> {
        schedule.validate()?;
        let (train_x, train_y, classes) = data.train_set();
        if train_y.is_empty() {
            return Err(validation("training split is empty"));
        }
        if classes < 2 {
            return Err(validation("training split needs at least two identities"));
        }
        let rng = seeded(schedule.shuffle_seed());
        Ok(Self {
            data,
            schedule,
            eval: EvalOptions::default(),
            method: DecorrMethod::Us,
            checkpoint_dir: None,
            train_x,
            train_y,
            classes,
            rng,
            epochs_done: 0,
            trace: RriTrace::default(),
        })
    }

    pub fn with_eval(mut self, eval: EvalOptions) -> Self {
        self.eval = eval;
        self
    }

    pub fn with_method(mut self, method: DecorrMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_checkpoint_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.checkpoint_dir = Some(dir.into());
        self
    }

    pub fn schedule(&self) -> &RriSchedule {
        &self.schedule
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// A freshly initialized model matching this dataset.
    pub fn init_model(&self, hidden_dims: &[usize], eigen_dim: usize) -> Result<EigenModel> {
        let dims = ModelDims {
            input_dim: self.data.feature_dim(),
            hidden_dims: hidden_dims.to_vec(),
            eigen_dim,
            classes: self.classes,
        };
        EigenModel::init(&dims, self.schedule.init_seed())
    }

    pub fn train_loss(&self, model: &EigenModel) -> Result<f64> {
        model.loss(&self.train_x, &self.train_y)
    }

    /// Runs `epochs` shuffled sweeps over the training split.
    pub fn run_epochs(&mut self, model: &mut EigenModel, epochs: usize, lr: f64, mask: FreezeMask) -> Result<()> {
        if model.classes() != self.classes || model.input_dim() != self.train_x.cols() {
            return Err(validation("model shape does not match the training data"));
        }
        let n = self.train_y.len();
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.schedule.batch_size) {
                let batch = self.train_x.select_rows(chunk)?;
                let labels: Vec<usize> = chunk.iter().map(|&i| self.train_y[i]).collect();
                let step = model
                    .loss_and_grads(&batch, &labels, mask)
                    .and_then(|(loss, grads)| {
                        if !loss.is_finite() {
                            return Err(SvdnetError::NumericFailure("loss is not finite".into()));
                        }
                        model.sgd_step(&grads, lr)
                    });
                if let Err(e) = step {
                    return Err(match e {
                        SvdnetError::NumericFailure(msg) => SvdnetError::NumericFailure(format!(
                            "training diverged in epoch {}: {msg}",
                            self.epochs_done + 1
                        )),
                        other => other,
                    });
                }
            }
            self.epochs_done += 1;
        }
        Ok(())
    }

    /// Alg. step 0: fine-tune everything for `step0_epochs`.
    pub fn step0(&mut self, model: &mut EigenModel) -> Result<TraceRecord> {
        let (epochs, lr) = (self.schedule.step0_epochs, self.schedule.lr_step0);
        self.run_epochs(model, epochs, lr, FreezeMask::FREE)?;
        self.record(model, 0, Phase::Step0)
    }

    /// Up to `max_rri` decorrelate/restraint/relaxation cycles, stopping
    /// early once the post-relaxation score has stabilized.
    pub fn run_rri(&mut self, model: &mut EigenModel) -> Result<RriOutcome> {
        self.run_rri_inner(model, self.schedule.max_rri, true)
    }

    /// Exactly `iterations` cycles, ignoring the convergence test.
    pub fn run_rri_fixed(&mut self, model: &mut EigenModel, iterations: usize) -> Result<RriOutcome> {
        self.run_rri_inner(model, iterations, false)
    }

    fn run_rri_inner(&mut self, model: &mut EigenModel, budget: usize, stop_early: bool) -> Result<RriOutcome> {
        let mut history: Vec<CorrelationScore> = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        for t in 1..=budget {
            model.eigenlayer = decorrelate::apply(&model.eigenlayer, self.method)?;
            self.record(model, t, Phase::Decorrelate)?;

            let (e, lr) = (self.schedule.restraint_epochs, self.schedule.lr_restraint);
            self.run_epochs(model, e, lr, FreezeMask::FROZEN)?;
            self.record(model, t, Phase::Restraint)?;

            let (e, lr) = (self.schedule.relaxation_epochs, self.schedule.lr_relaxation);
            self.run_epochs(model, e, lr, FreezeMask::FREE)?;
            let rec = self.record(model, t, Phase::Relaxation)?;
            history.push(CorrelationScore { value: rec.s_of_w, k: model.eigenlayer.cols() });
            iterations = t;

            converged = rri_converged(&history, self.schedule.epsilon_s);
            log::info!(
                "rri {t}: S(W) = {:.5}, rank-1 = {:.4}, mAP = {:.4}",
                rec.s_of_w,
                rec.rank1,
                rec.map
            );
            if converged && stop_early {
                break;
            }
        }
        self.trace.converged = converged;
        Ok(RriOutcome { iterations, converged })
    }

    /// Measures `model`, appends a trace record and writes a checkpoint.
    pub fn record(&mut self, model: &EigenModel, rri_index: usize, phase: Phase) -> Result<TraceRecord> {
        let report = evaluate_model(model, self.data, self.eval)?;
        let rec = TraceRecord {
            rri_index,
            phase,
            s_of_w: s_of_w(&model.eigenlayer)?.value,
            train_loss: self.train_loss(model)?,
            rank1: report.rank1(),
            map: report.map,
        };
        if let Some(dir) = &self.checkpoint_dir {
            model.save(dir.join(checkpoint_name(rri_index, phase)))?;
        }
        self.trace.records.push(rec.clone());
        Ok(rec)
    }
}

pub fn checkpoint_name(rri_index: usize, phase: Phase) -> String {
    format!("ckpt_rri{rri_index}_{}.svdn", phase.as_str())
}

/// Inverse of [`checkpoint_name`]; `None` for files not following the pattern.
pub fn parse_checkpoint_name(path: &Path) -> Option<(usize, Phase)> {
    let stem = path.file_name()?.to_str()?.strip_suffix(".svdn")?;
    let rest = stem.strip_prefix("ckpt_rri")?;
    let (idx, phase) = rest.split_once('_')?;
    Some((idx.parse().ok()?, phase.parse().ok()?))
}

/// Step 0 with a fresh trainer: returns the fine-tuned model and its record.
pub fn train_step0(
    model: EigenModel,
    data: &RetrievalDataset,
    schedule: &RriSchedule,
) -> Result<(EigenModel, TraceRecord)> {
    let mut trainer = Trainer::new(data, schedule.clone())?;
    let mut model = model;
    let rec = trainer.step0(&mut model)?;
    Ok((model, rec))
}

/// RRI with a fresh trainer on a model that has completed step 0.
pub fn run_rri(model: EigenModel, data: &RetrievalDataset, schedule: &RriSchedule) -> Result<(EigenModel, RriTrace)> {
    let mut trainer = Trainer::new(data, schedule.clone())?;
    let mut model = model;
    trainer.run_rri(&mut model)?;
    Ok((model, trainer.trace))
}
