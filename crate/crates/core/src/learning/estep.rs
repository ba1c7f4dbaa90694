use crate::error::Result;
use crate::messages::{backward_sweep, forward_with, LogParams, MessageOptions};
use crate::observation::{log_tau_shift, residual_at, tau_mean};
use crate::{ModelParams, Real, Sequence};

/// Posterior expectations of one sequence, sufficient for an M-step.
///
/// Per-step arrays are `T × K` row major, where row `t` is sample
/// `order + t`; the conditioning samples before `order` have no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats<F> {
    pub n_regimes: usize,
    pub max_duration: usize,
    pub order: usize,
    /// Posterior regime probabilities γ.
    pub gamma: Vec<F>,
    /// γ at the first chain step; the π statistic.
    pub first: Vec<F>,
    /// `K × K` expected renewals from row regime to column regime.
    pub xi_agg: Vec<F>,
    /// `K × D` expected regime entries with each initial counter, including
    /// the first chain step.
    pub dur_stats: Vec<F>,
    /// Posterior mean precision ω per step and regime.
    pub omega: Vec<F>,
    /// Posterior mean log precision per step and regime.
    pub elogtau: Vec<F>,
    pub loglik: F,
}

impl<F: Real> SuffStats<F> {
    pub fn steps(&self) -> usize {
        self.gamma.len() / self.n_regimes
    }

    pub fn gamma_row(&self, t: usize) -> &[F] {
        &self.gamma[t * self.n_regimes..(t + 1) * self.n_regimes]
    }

    /// Fills ω and E[log τ] from the residuals under `model`.
    pub(crate) fn fill_precisions(&mut self, model: &ModelParams<F>, seq: &Sequence<F>) {
        let k = self.n_regimes;
        let p = self.order;
        let steps = self.steps();
        self.omega.resize(steps * k, F::zero());
        self.elogtau.resize(steps * k, F::zero());
        for (i, reg) in model.regimes.iter().enumerate() {
            let shift = log_tau_shift(reg.nu);
            for t in 0..steps {
                let w = tau_mean(residual_at(&seq.samples, p + t, &reg.ar), reg.sigma, reg.nu);
                self.omega[t * k + i] = w;
                self.elogtau[t * k + i] = w.ln() + shift;
            }
        }
    }
}

pub fn e_step<F: Real>(model: &ModelParams<F>, seq: &Sequence<F>) -> Result<SuffStats<F>> {
    e_step_with(model, seq, &MessageOptions::default())
}

/// Forward pass, then one backward sweep that accumulates γ, the renewal
/// statistics and the duration statistics on the fly.
pub fn e_step_with<F: Real>(model: &ModelParams<F>, seq: &Sequence<F>, opts: &MessageOptions) -> Result<SuffStats<F>> {
    let fwd = forward_with(model, seq, opts)?;
    let lp = LogParams::new(model);
    let (k, d) = (model.n_regimes, model.max_duration);
    let steps = fwd.steps();
    let ll = fwd.loglik;

    let mut gamma = vec![F::zero(); steps * k];
    let mut first = vec![F::zero(); k];
    let mut xi_agg = vec![F::zero(); k * k];
    let mut dur_stats = vec![F::zero(); k * d];

    backward_sweep(model, &fwd, |v| {
        let t = v.t;
        for r in 0..k {
            let mut g = F::zero();
            for i in 0..d {
                let eta = (v.alpha[r * d + i] + v.beta[r * d + i] - ll).exp();
                g = g + eta;
                if t == 0 {
                    dur_stats[r * d + i] = dur_stats[r * d + i] + eta;
                }
            }
            gamma[t * k + r] = g;
            if t == 0 {
                first[r] = g;
            }
        }
        if let Some(prev) = v.prev_alpha {
            for to in 0..k {
                for from in 0..k {
                    let x = (prev[from * d] + lp.log_trans[from * k + to] + v.tail[to] - ll).exp();
                    xi_agg[from * k + to] = xi_agg[from * k + to] + x;
                }
                let renew = lp.renewal(prev, to);
                if renew == F::neg_infinity() {
                    continue;
                }
                let base = renew + v.emission[to] - ll;
                for i in 0..d {
                    let x = (base + lp.log_lambda[to * d + i] + v.beta[to * d + i]).exp();
                    dur_stats[to * d + i] = dur_stats[to * d + i] + x;
                }
            }
        }
    })?;

    let mut stats = SuffStats {
        n_regimes: k,
        max_duration: d,
        order: model.order,
        gamma,
        first,
        xi_agg,
        dur_stats,
        omega: Vec::new(),
        elogtau: Vec::new(),
        loglik: ll,
    };
    stats.fill_precisions(model, seq);
    Ok(stats)
}
