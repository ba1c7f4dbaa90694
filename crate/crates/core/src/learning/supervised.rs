use crate::error::{Error, Result};
use crate::preprocess::LabelTrack;
use crate::{ModelParams, Real, RegimeParams, Sequence};

use super::mstep::{discrete_update, fit_emission, RegimeRows};
use super::{FitFlag, FitOptions, SuffStats};

const INNER_MAX_ITERS: usize = 2000;
const INNER_REL_TOL: f64 = 1e-8;
const INITIAL_NU: f64 = 30.0;

/// Statistics with point-mass posteriors read off label tracks.
///
/// Each maximal run of one label in the chain part of a sequence is a
/// regime entry. Runs longer than `max_duration` are clipped to it and the
/// overflow is counted as `⌈L/D⌉ − 1` self-renewals. ω is set to 1 and the
/// log-likelihood to 0; call sites fill them as needed. Returns the stats
/// and the number of clipped runs.
pub fn dirac_stats<F: Real>(
    n_regimes: usize,
    order: usize,
    max_duration: usize,
    seqs: &[Sequence<F>],
    labels: &[LabelTrack],
) -> Result<(Vec<SuffStats<F>>, usize)> {
    if seqs.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: seqs.len(), got: labels.len() });
    }
    if seqs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (k, d) = (n_regimes, max_duration);
    let mut clipped = 0;
    let mut out = Vec::with_capacity(seqs.len());
    for (seq, track) in seqs.iter().zip(labels) {
        if track.len() != seq.len() {
            return Err(Error::LengthMismatch { expected: seq.len(), got: track.len() });
        }
        if seq.len() <= order {
            return Err(Error::SequenceTooShort { len: seq.len(), needed: order });
        }
        if let Some(&bad) = track.labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {k} regimes")));
        }
        let chain = &track.labels[order..];
        let steps = chain.len();
        let mut gamma = vec![F::zero(); steps * k];
        for (t, &l) in chain.iter().enumerate() {
            gamma[t * k + l] = F::one();
        }
        let mut first = vec![F::zero(); k];
        first[chain[0]] = F::one();
        let mut xi_agg = vec![F::zero(); k * k];
        let mut dur_stats = vec![F::zero(); k * d];
        let mut start = 0;
        let mut prev_regime: Option<usize> = None;
        while start < steps {
            let r = chain[start];
            let len = chain[start..].iter().take_while(|&&l| l == r).count();
            if let Some(p) = prev_regime {
                xi_agg[p * k + r] = xi_agg[p * k + r] + F::one();
            }
            if len > d {
                clipped += 1;
                let renewals = len.div_ceil(d) - 1;
                xi_agg[r * k + r] = xi_agg[r * k + r] + F::lit(renewals as f64);
            }
            let idx = r * d + len.min(d) - 1;
            dur_stats[idx] = dur_stats[idx] + F::one();
            prev_regime = Some(r);
            start += len;
        }
        out.push(SuffStats {
            n_regimes: k,
            max_duration: d,
            order,
            gamma,
            first,
            xi_agg,
            dur_stats,
            omega: vec![F::one(); steps * k],
            elogtau: vec![F::zero(); steps * k],
            loglik: F::zero(),
        });
    }
    Ok((out, clipped))
}

#[derive(Debug, Clone)]
pub struct SupervisedFit<F> {
    pub model: ModelParams<F>,
    pub flags: Vec<FitFlag>,
}

/// Robust AR fit of pooled rows: alternates the precision posteriors with
/// the weighted least squares, σ and ν updates until σ and ν settle.
fn robust_rows_fit<F: Real>(
    rows: &mut RegimeRows<F>,
    regime: usize,
    min_sigma: f64,
    flags: &mut Vec<FitFlag>,
) -> Result<(Vec<F>, F, F)> {
    let order = rows.order();
    let mut cur = RegimeParams { ar: vec![F::zero(); order], sigma: F::one(), nu: F::lit(INITIAL_NU), lambda: Vec::new() };
    // Ordinary least squares start: ω ≡ 1 for the first pass.
    rows.omega.iter_mut().for_each(|w| *w = F::one());
    let mut scratch = Vec::new();
    let (ar, sigma, _) = fit_emission(rows, &cur, regime, min_sigma, &mut scratch)?;
    cur.ar = ar;
    cur.sigma = sigma;
    let tol = F::lit(INNER_REL_TOL);
    for _ in 0..INNER_MAX_ITERS {
        rows.refresh_omega(&cur.ar, cur.sigma, cur.nu);
        scratch.clear();
        let (ar, sigma, nu) = fit_emission(rows, &cur, regime, min_sigma, &mut scratch)?;
        let settled = (sigma - cur.sigma).abs() <= tol * cur.sigma && (nu - cur.nu).abs() <= tol * cur.nu;
        cur = RegimeParams { ar, sigma, nu, lambda: Vec::new() };
        if settled {
            flags.append(&mut scratch);
            return Ok((cur.ar, cur.sigma, cur.nu));
        }
    }
    flags.append(&mut scratch);
    flags.push(FitFlag::InnerLoopUnconverged { regime });
    Ok((cur.ar, cur.sigma, cur.nu))
}

/// Robust (Student-t) autoregression of a single series.
/// Returns `(ar weights, sigma, nu)`.
pub fn robust_ar_fit<F: Real>(y: &[F], order: usize, min_sigma: f64) -> Result<(Vec<F>, F, F)> {
    let seq = Sequence { samples: y.to_vec(), sample_rate: F::one() };
    let labels = LabelTrack { labels: vec![0; y.len()], sample_rate: 1.0 };
    let (stats, _) = dirac_stats(1, order, 1, std::slice::from_ref(&seq), std::slice::from_ref(&labels))?;
    let mut rows = RegimeRows::collect(&stats, std::slice::from_ref(&seq), 0);
    robust_rows_fit(&mut rows, 0, min_sigma, &mut Vec::new())
}

/// Complete-data fit from label tracks.
///
/// π, A and λ come from the point-mass statistics; each regime's emission
/// parameters come from a robust AR fit over its labelled samples.
pub fn supervised_fit<F: Real>(
    seqs: &[Sequence<F>],
    labels: &[LabelTrack],
    n_regimes: usize,
    order: usize,
    max_duration: usize,
    opts: &FitOptions,
) -> Result<SupervisedFit<F>> {
    let (stats, clipped) = dirac_stats(n_regimes, order, max_duration, seqs, labels)?;
    let k = n_regimes;
    let uniform = |n: usize| vec![F::one() / F::lit(n as f64); n];
    let blank = ModelParams {
        n_regimes: k,
        order,
        max_duration,
        sample_rate: seqs[0].sample_rate,
        pi: uniform(k),
        transition: vec![uniform(k); k],
        regimes: vec![
            RegimeParams { ar: vec![F::zero(); order], sigma: F::one(), nu: F::lit(INITIAL_NU), lambda: uniform(max_duration) };
            k
        ],
    };
    let mut flags = Vec::new();
    if clipped > 0 {
        flags.push(FitFlag::DurationsClipped { runs: clipped });
    }
    let mut model = discrete_update(&stats, &blank, &mut flags);
    for r in 0..k {
        let mut rows = RegimeRows::collect(&stats, seqs, r);
        if rows.targets.is_empty() {
            return Err(Error::RegimeAbsent(r));
        }
        let (ar, sigma, nu) = robust_rows_fit(&mut rows, r, opts.min_sigma, &mut flags)?;
        model.regimes[r].ar = ar;
        model.regimes[r].sigma = sigma;
        model.regimes[r].nu = nu;
    }
    Ok(SupervisedFit { model, flags })
}
