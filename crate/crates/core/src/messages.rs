//! Exact forward/backward message passing for the explicit-duration chain.
//!
//! The hidden state at chain step `t` (sample `order + t`) is a pair
//! `(k, d)`: regime `k` with `d` samples left including the current one.
//! A counter above 1 decrements deterministically; a counter of 1 renews the
//! state by drawing the next regime from the transition matrix and a fresh
//! duration from that regime's `lambda`. All messages are stored in the log
//! domain as `K × D` slices, row major by regime, where column `i` holds
//! counter `i + 1`.
//!
//! Forward slices are kept either in full or as checkpoints every
//! `⌈√T⌉` steps; the backward sweep recomputes one segment at a time, so
//! memory is `O(√T · K · D)` in the checkpointed case.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::observation::emission_table;
use crate::special::{log_add, safe_ln};
use crate::{ModelParams, Real, Sequence};

/// Log-domain copy of the discrete parameters.
#[derive(Debug, Clone)]
pub struct LogParams<F> {
    pub n_regimes: usize,
    pub max_duration: usize,
    pub log_pi: Vec<F>,
    /// `K × K`, row = from, column = to.
    pub log_trans: Vec<F>,
    /// `K × D`.
    pub log_lambda: Vec<F>,
}

impl<F: Real> LogParams<F> {
    pub fn new(model: &ModelParams<F>) -> Self {
        Self {
            n_regimes: model.n_regimes,
            max_duration: model.max_duration,
            log_pi: model.pi.iter().map(|&x| safe_ln(x)).collect(),
            log_trans: model.transition.iter().flatten().map(|&x| safe_ln(x)).collect(),
            log_lambda: model.regimes.iter().flat_map(|r| r.lambda.iter().map(|&x| safe_ln(x))).collect(),
        }
    }

    #[inline]
    pub fn slice_len(&self) -> usize {
        self.n_regimes * self.max_duration
    }

    pub(crate) fn init_slice(&self, em: &[F], out: &mut [F]) {
        let d = self.max_duration;
        for k in 0..self.n_regimes {
            for i in 0..d {
                out[k * d + i] = self.log_pi[k] + self.log_lambda[k * d + i] + em[k];
            }
        }
    }

    /// Log mass renewing into regime `to` from the counter-1 cells of `prev`.
    #[inline]
    pub(crate) fn renewal(&self, prev: &[F], to: usize) -> F {
        let (k, d) = (self.n_regimes, self.max_duration);
        (0..k).fold(F::neg_infinity(), |acc, j| log_add(acc, self.log_trans[j * k + to] + prev[j * d]))
    }

    pub(crate) fn forward_step(&self, prev: &[F], em: &[F], out: &mut [F]) {
        let d = self.max_duration;
        for k in 0..self.n_regimes {
            let renew = self.renewal(prev, k);
            let lam = &self.log_lambda[k * d..(k + 1) * d];
            let stay = &prev[k * d..(k + 1) * d];
            let row = &mut out[k * d..(k + 1) * d];
            let e = em[k];
            for i in 0..d {
                let dec = if i + 1 < d { stay[i + 1] } else { F::neg_infinity() };
                row[i] = e + log_add(dec, lam[i] + renew);
            }
        }
    }

    /// `em[k] + log Σ_i λ_k(i) β(k, i)`: log probability of the samples from
    /// this step on, given a renewal into `k` at this step.
    pub(crate) fn renewal_tail(&self, beta: &[F], em: &[F], out: &mut [F]) {
        let d = self.max_duration;
        for k in 0..self.n_regimes {
            let lam = &self.log_lambda[k * d..(k + 1) * d];
            let b = &beta[k * d..(k + 1) * d];
            let mut max = F::neg_infinity();
            for i in 0..d {
                max = max.max(lam[i] + b[i]);
            }
            out[k] = if max == F::neg_infinity() {
                max
            } else {
                let s: F = (0..d).map(|i| (lam[i] + b[i] - max).exp()).sum();
                em[k] + max + s.ln()
            };
        }
    }

    /// β at step `t − 1` from β and the renewal tail at step `t`.
    pub(crate) fn backward_step(&self, beta: &[F], em: &[F], tail: &[F], out: &mut [F]) {
        let (k, d) = (self.n_regimes, self.max_duration);
        for j in 0..k {
            out[j * d] = (0..k).fold(F::neg_infinity(), |acc, to| log_add(acc, self.log_trans[j * k + to] + tail[to]));
            for i in 1..d {
                out[j * d + i] = em[j] + beta[j * d + i - 1];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageOptions {
    /// Forward slices are stored in full when they fit in this many bytes,
    /// otherwise checkpointed.
    pub memory_budget_bytes: usize,
}

impl Default for MessageOptions {
    fn default() -> Self {
        Self { memory_budget_bytes: 256 << 20 }
    }
}

#[derive(Debug, Clone)]
enum AlphaStore<F> {
    Full(Vec<F>),
    /// `slices[i]` is α at step `(i + 1) * stride − 1`.
    Checkpoints { stride: usize, slices: Vec<Vec<F>> },
}

#[derive(Debug, Clone)]
pub struct ForwardResult<F> {
    pub loglik: F,
    pub final_slice: Vec<F>,
    n_regimes: usize,
    max_duration: usize,
    order: usize,
    steps: usize,
    emissions: Vec<F>,
    store: AlphaStore<F>,
}

impl<F: Real> ForwardResult<F> {
    /// Number of chain steps, `N − order`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Emission log densities, `T × K` row major.
    pub fn emissions(&self) -> &[F] {
        &self.emissions
    }

    pub fn is_checkpointed(&self) -> bool {
        matches!(self.store, AlphaStore::Checkpoints { .. })
    }

    fn stride(&self) -> usize {
        match &self.store {
            AlphaStore::Full(_) => self.steps,
            AlphaStore::Checkpoints { stride, .. } => *stride,
        }
    }
}

pub(crate) fn check_dims<F: Real>(model: &ModelParams<F>, seq: &Sequence<F>) -> Result<()> {
    let k = model.n_regimes;
    if k == 0 || model.max_duration == 0 {
        return Err(Error::Dimension("model needs at least one regime and duration".into()));
    }
    if model.pi.len() != k || model.transition.len() != k || model.regimes.len() != k {
        return Err(Error::Dimension(format!("model arrays do not match {k} regimes")));
    }
    if model.transition.iter().any(|r| r.len() != k)
        || model.regimes.iter().any(|r| r.ar.len() != model.order || r.lambda.len() != model.max_duration)
    {
        return Err(Error::Dimension("regime parameter lengths do not match order/max_duration".into()));
    }
    if seq.len() <= model.order {
        return Err(Error::SequenceTooShort { len: seq.len(), needed: model.order });
    }
    Ok(())
}

pub fn forward<F: Real>(model: &ModelParams<F>, seq: &Sequence<F>) -> Result<ForwardResult<F>> {
    forward_with(model, seq, &MessageOptions::default())
}

pub fn forward_with<F: Real>(model: &ModelParams<F>, seq: &Sequence<F>, opts: &MessageOptions) -> Result<ForwardResult<F>> {
    check_dims(model, seq)?;
    let lp = LogParams::new(model);
    let k = model.n_regimes;
    let kd = lp.slice_len();
    let steps = seq.len() - model.order;
    let emissions = emission_table(model, &seq.samples);

    let full = steps
        .checked_mul(kd)
        .and_then(|n| n.checked_mul(std::mem::size_of::<F>()))
        .is_some_and(|bytes| bytes <= opts.memory_budget_bytes);

    let mut cur = vec![F::zero(); kd];
    let mut next = vec![F::zero(); kd];
    lp.init_slice(&emissions[..k], &mut cur);
    let store = if full {
        let mut all = Vec::with_capacity(steps * kd);
        all.extend_from_slice(&cur);
        for t in 1..steps {
            lp.forward_step(&cur, &emissions[t * k..(t + 1) * k], &mut next);
            all.extend_from_slice(&next);
            std::mem::swap(&mut cur, &mut next);
        }
        AlphaStore::Full(all)
    } else {
        let stride = (steps as f64).sqrt().ceil() as usize;
        let mut slices = Vec::with_capacity(steps / stride + 1);
        for t in 1..steps {
            if t % stride == 0 {
                slices.push(cur.clone());
            }
            lp.forward_step(&cur, &emissions[t * k..(t + 1) * k], &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        AlphaStore::Checkpoints { stride, slices }
    };
    let loglik = crate::special::log_sum_exp(&cur);
    Ok(ForwardResult {
        loglik,
        final_slice: cur,
        n_regimes: k,
        max_duration: model.max_duration,
        order: model.order,
        steps,
        emissions,
        store,
    })
}

/// Everything known at one step of the backward sweep.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a, F> {
    pub t: usize,
    pub alpha: &'a [F],
    pub beta: &'a [F],
    /// α at step `t − 1`; `None` at the first step.
    pub prev_alpha: Option<&'a [F]>,
    /// Emission log densities at step `t`, one per regime.
    pub emission: &'a [F],
    /// Renewal tail at step `t` (see [`LogParams`]), one per regime.
    pub tail: &'a [F],
}

/// Walks the chain from the last step to the first, handing each step's
/// forward and backward slices to `visit`.
pub fn backward_sweep<F, V>(model: &ModelParams<F>, fwd: &ForwardResult<F>, mut visit: V) -> Result<()>
where
    F: Real,
    V: FnMut(StepView<'_, F>),
{
    if model.n_regimes != fwd.n_regimes || model.max_duration != fwd.max_duration || model.order != fwd.order {
        return Err(Error::Dimension("forward result was computed for a different model shape".into()));
    }
    let lp = LogParams::new(model);
    let k = fwd.n_regimes;
    let kd = lp.slice_len();
    let steps = fwd.steps;
    let stride = fwd.stride();
    let n_segs = steps.div_ceil(stride);
    let em = &fwd.emissions;

    let mut beta = vec![F::zero(); kd];
    let mut scratch = vec![F::zero(); kd];
    let mut tail = vec![F::zero(); k];
    let mut seg_buf: Vec<F> = Vec::new();

    for seg in (0..n_segs).rev() {
        let start = seg * stride;
        let end = (start + stride).min(steps);
        let (alphas, before): (&[F], Option<&[F]>) = match &fwd.store {
            AlphaStore::Full(all) => {
                let before = (start > 0).then(|| &all[(start - 1) * kd..start * kd]);
                (&all[start * kd..end * kd], before)
            }
            AlphaStore::Checkpoints { slices, .. } => {
                seg_buf.resize((end - start) * kd, F::zero());
                let before = if start == 0 {
                    lp.init_slice(&em[..k], &mut seg_buf[..kd]);
                    None
                } else {
                    let ck = slices[seg - 1].as_slice();
                    lp.forward_step(ck, &em[start * k..(start + 1) * k], &mut seg_buf[..kd]);
                    Some(ck)
                };
                for t in start + 1..end {
                    let o = (t - start) * kd;
                    let (done, rest) = seg_buf.split_at_mut(o);
                    lp.forward_step(&done[o - kd..], &em[t * k..(t + 1) * k], &mut rest[..kd]);
                }
                (seg_buf.as_slice(), before)
            }
        };
        for t in (start..end).rev() {
            let emission = &em[t * k..(t + 1) * k];
            lp.renewal_tail(&beta, emission, &mut tail);
            let o = (t - start) * kd;
            let prev_alpha = if t > start { Some(&alphas[o - kd..o]) } else { before };
            visit(StepView { t, alpha: &alphas[o..o + kd], beta: &beta, prev_alpha, emission, tail: &tail });
            if t > 0 {
                lp.backward_step(&beta, emission, &tail, &mut scratch);
                std::mem::swap(&mut beta, &mut scratch);
            }
        }
    }
    Ok(())
}

/// Streams log β slices from the last step to the first.
pub fn backward<F, V>(model: &ModelParams<F>, fwd: &ForwardResult<F>, mut each: V) -> Result<()>
where
    F: Real,
    V: FnMut(usize, &[F]),
{
    backward_sweep(model, fwd, |v| each(v.t, v.beta))
}

/// One `K × D` log-message slice per chain step.
pub type Slices<F> = Vec<Vec<F>>;

/// All forward and backward slices in time order. Intended for small
/// instances and diagnostics.
pub fn message_slices<F: Real>(model: &ModelParams<F>, fwd: &ForwardResult<F>) -> Result<(Slices<F>, Slices<F>)> {
    let mut alphas = vec![Vec::new(); fwd.steps];
    let mut betas = vec![Vec::new(); fwd.steps];
    backward_sweep(model, fwd, |v| {
        alphas[v.t] = v.alpha.to_vec();
        betas[v.t] = v.beta.to_vec();
    })?;
    Ok((alphas, betas))
}

/// Summed log-likelihood of a batch of sequences.
pub fn loglikelihood<F: Real>(model: &ModelParams<F>, seqs: &[Sequence<F>]) -> Result<F> {
    if seqs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let lls = seqs.par_iter().map(|s| forward(model, s).map(|f| f.loglik)).collect::<Result<Vec<F>>>()?;
    Ok(lls.into_iter().sum())
}
