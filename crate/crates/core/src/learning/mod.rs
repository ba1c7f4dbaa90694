//! Parameter estimation: EM for unlabelled data and complete-data fits for
//! labelled data.

mod estep;
mod init;
mod mstep;
mod supervised;

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::messages::MessageOptions;
use crate::model::validate_model;
use crate::{ModelParams, Real, Sequence};

pub use estep::{e_step, e_step_with, SuffStats};
pub use init::{default_unsupervised_init, resonator_weights, InitConfig};
pub use mstep::{m_step, solve_nu, update_sigma, NuSolution, DURATION_SMOOTHING, MIN_REGIME_MASS, NU_BRACKET};
pub use supervised::{dirac_stats, robust_ar_fit, supervised_fit, SupervisedFit};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Stop once the relative log-likelihood improvement drops below this.
    pub rel_tol: f64,
    pub min_sigma: f64,
    /// Worker threads for the E-step; `None` uses the global pool.
    pub workers: Option<usize>,
    pub messages: MessageOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iters: 100, rel_tol: 1e-6, min_sigma: 1e-6, workers: None, messages: MessageOptions::default() }
    }
}

/// Things that happened during a fit and deserve a line in the log.
#[derive(Debug, Clone, PartialEq)]
pub enum FitFlag {
    FrozenRegime { regime: usize },
    TransitionRowKept { regime: usize },
    DurationRowKept { regime: usize },
    NuClamped { regime: usize, nu: f64 },
    Ridge { regime: usize },
    SigmaFloored { regime: usize },
    DurationsClipped { runs: usize },
    InnerLoopUnconverged { regime: usize },
    LoglikDecreased { by: f64 },
}

impl fmt::Display for FitFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitFlag::FrozenRegime { regime } => write!(f, "frozen_regime={regime}"),
            FitFlag::TransitionRowKept { regime } => write!(f, "transition_row_kept={regime}"),
            FitFlag::DurationRowKept { regime } => write!(f, "duration_row_kept={regime}"),
            FitFlag::NuClamped { regime, nu } => write!(f, "nu_clamped={regime}:{nu}"),
            FitFlag::Ridge { regime } => write!(f, "ridge={regime}"),
            FitFlag::SigmaFloored { regime } => write!(f, "sigma_floored={regime}"),
            FitFlag::DurationsClipped { runs } => write!(f, "durations_clipped={runs}"),
            FitFlag::InnerLoopUnconverged { regime } => write!(f, "inner_loop_unconverged={regime}"),
            FitFlag::LoglikDecreased { by } => write!(f, "loglik_decreased={by}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    /// Log-likelihood of the parameters entering this iteration.
    pub loglik: f64,
    pub rel_change: f64,
    pub flags: Vec<FitFlag>,
}

impl IterRecord {
    /// `iteration,loglik,rel_change,flags` with flags separated by `;`.
    pub fn log_line(&self) -> String {
        let flags: Vec<String> = self.flags.iter().map(|f| f.to_string()).collect();
        format!("{},{},{},{}", self.iter, self.loglik, self.rel_change, flags.join(";"))
    }
}

pub const FIT_LOG_HEADER: &str = "iteration,loglik,rel_change,flags";

#[derive(Debug, Clone)]
pub struct FitResult<F> {
    pub model: ModelParams<F>,
    pub trace: Vec<IterRecord>,
    pub converged: bool,
}

impl<F> FitResult<F> {
    pub fn loglik_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.loglik).collect()
    }

    pub fn flags(&self) -> impl Iterator<Item = &FitFlag> {
        self.trace.iter().flat_map(|r| r.flags.iter())
    }
}

fn batch_e_step<F: Real>(model: &ModelParams<F>, seqs: &[Sequence<F>], opts: &FitOptions) -> Result<Vec<SuffStats<F>>> {
    let run = || seqs.par_iter().map(|s| e_step_with(model, s, &opts.messages)).collect::<Result<Vec<_>>>();
    match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Batch EM. Each iteration runs the E-step on every sequence under the
/// current parameters, sums the statistics and applies one M-step. The
/// trace records the log-likelihood of the parameters entering each
/// iteration; the returned model is the one whose log-likelihood was
/// recorded last.
pub fn em_fit<F: Real>(seqs: &[Sequence<F>], init: &ModelParams<F>, opts: &FitOptions) -> Result<FitResult<F>> {
    if seqs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    validate_model(init).map_err(Error::InvalidModel)?;
    let mut model = init.clone().validated()?;
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut pending: Vec<FitFlag> = Vec::new();
    let mut converged = false;
    for iter in 0..=opts.max_iters {
        let stats = batch_e_step(&model, seqs, opts)?;
        let ll: f64 = stats.iter().map(|s| s.loglik.as_f64()).sum();
        let mut flags = std::mem::take(&mut pending);
        let rel = match trace.last() {
            Some(prev) => {
                if ll < prev.loglik - 1e-6 {
                    flags.push(FitFlag::LoglikDecreased { by: prev.loglik - ll });
                }
                (ll - prev.loglik) / prev.loglik.abs()
            }
            None => f64::NAN,
        };
        trace.push(IterRecord { iter, loglik: ll, rel_change: rel, flags });
        if iter > 0 && rel < opts.rel_tol {
            converged = true;
            break;
        }
        if iter == opts.max_iters {
            break;
        }
        let (next, step_flags) = m_step(&stats, seqs, &model, opts)?;
        pending = step_flags;
        model = next;
    }
    Ok(FitResult { model, trace, converged })
}
