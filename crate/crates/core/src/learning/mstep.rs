use crate::error::{Error, Result};
use crate::linalg::weighted_least_squares;
use crate::observation::{log_tau_shift, residual_at};
use crate::special::digamma;
use crate::{ModelParams, Real, RegimeParams, Sequence};

use super::{FitFlag, FitOptions, SuffStats};

/// Regimes with less posterior mass than this keep their emission
/// parameters.
pub const MIN_REGIME_MASS: f64 = 1e-8;
/// Added to every duration cell before normalizing.
pub const DURATION_SMOOTHING: f64 = 1e-8;
pub const NU_BRACKET: (f64, f64) = (1e-2, 1e3);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuSolution<F> {
    pub nu: F,
    /// The root lies outside the bracket and `nu` is the nearest endpoint.
    pub clamped: bool,
}

/// Degrees-of-freedom update.
///
/// Finds the root in ν of
/// `1 + c − Ψ(ν/2) + log(ν/2) + Ψ((ν' + 1)/2) − log((ν' + 1)/2)`
/// where `c` is the γ-weighted mean of `log ω − ω` and `ν'` the previous
/// value. `log x − Ψ(x)` is strictly decreasing, so the left side is too and
/// bisection on the bracket converges to the unique root. Bisection runs
/// until the bracket cannot shrink further in floating point.
pub fn solve_nu<F: Real>(mean_log_omega_minus_omega: F, nu_prev: F) -> NuSolution<F> {
    let half = F::lit(0.5);
    let constant = F::one() + mean_log_omega_minus_omega + log_tau_shift(nu_prev);
    let f = |nu: F| constant - digamma(nu * half) + (nu * half).ln();
    let (mut lo, mut hi) = (F::lit(NU_BRACKET.0), F::lit(NU_BRACKET.1));
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo <= F::zero() {
        return NuSolution { nu: lo, clamped: f_lo < F::zero() };
    }
    if f_hi >= F::zero() {
        return NuSolution { nu: hi, clamped: f_hi > F::zero() };
    }
    for _ in 0..400 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == F::zero() {
            return NuSolution { nu: mid, clamped: false };
        }
        if fm > F::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    NuSolution { nu, clamped: false }
}

/// Weighted regression data of one regime, pooled across a batch.
#[derive(Debug, Clone, Default)]
pub(crate) struct RegimeRows<F> {
    pub design: Vec<F>,
    pub targets: Vec<F>,
    pub gamma: Vec<F>,
    pub omega: Vec<F>,
}

impl<F: Real> RegimeRows<F> {
    pub(crate) fn collect(stats: &[SuffStats<F>], seqs: &[Sequence<F>], regime: usize) -> Self {
        let mut rows = Self::default();
        for (st, seq) in stats.iter().zip(seqs) {
            let (k, p) = (st.n_regimes, st.order);
            for t in 0..st.steps() {
                let g = st.gamma[t * k + regime];
                if g <= F::zero() {
                    continue;
                }
                let n = p + t;
                rows.design.extend((0..p).map(|j| seq.samples[n - 1 - j]));
                rows.targets.push(seq.samples[n]);
                rows.gamma.push(g);
                rows.omega.push(st.omega[t * k + regime]);
            }
        }
        rows
    }

    pub(crate) fn mass(&self) -> F {
        self.gamma.iter().copied().sum()
    }

    pub(crate) fn order(&self) -> usize {
        self.design.len().checked_div(self.targets.len()).unwrap_or(0)
    }

    fn residual(&self, i: usize, a: &[F]) -> F {
        let p = a.len();
        let row = &self.design[i * p..(i + 1) * p];
        self.targets[i] - row.iter().zip(a).fold(F::zero(), |acc, (&x, &w)| acc + x * w)
    }

    /// γω-weighted mean squared residual under `a`.
    pub(crate) fn sigma2(&self, a: &[F]) -> F {
        let num: F = (0..self.targets.len()).map(|i| self.gamma[i] * self.omega[i] * self.residual(i, a).powi(2)).sum();
        num / self.mass()
    }

    pub(crate) fn mean_log_omega_minus_omega(&self) -> F {
        let num: F = self.gamma.iter().zip(&self.omega).map(|(&g, &w)| g * (w.ln() - w)).sum();
        num / self.mass()
    }

    pub(crate) fn refresh_omega(&mut self, a: &[F], sigma: F, nu: F) {
        for i in 0..self.targets.len() {
            self.omega[i] = crate::observation::tau_mean(self.residual(i, a), sigma, nu);
        }
    }
}

/// σ per regime: square root of the γω-weighted mean squared residual under
/// the new AR weights.
pub fn update_sigma<F: Real>(stats: &[SuffStats<F>], seqs: &[Sequence<F>], ar: &[Vec<F>]) -> Result<Vec<F>> {
    let k = stats.first().ok_or(Error::EmptyBatch)?.n_regimes;
    (0..k)
        .map(|r| {
            let mut num = F::zero();
            let mut den = F::zero();
            for (st, seq) in stats.iter().zip(seqs) {
                for t in 0..st.steps() {
                    let g = st.gamma[t * k + r];
                    let e = residual_at(&seq.samples, st.order + t, &ar[r]);
                    num = num + g * st.omega[t * k + r] * e * e;
                    den = den + g;
                }
            }
            if den <= F::zero() {
                return Err(Error::RegimeAbsent(r));
            }
            Ok((num / den).sqrt())
        })
        .collect()
}

/// AR weights, σ and ν for one regime from pooled rows.
pub(crate) fn fit_emission<F: Real>(
    rows: &RegimeRows<F>,
    prev: &RegimeParams<F>,
    regime: usize,
    min_sigma: f64,
    flags: &mut Vec<FitFlag>,
) -> Result<(Vec<F>, F, F)> {
    let p = prev.ar.len();
    let ar = if p == 0 {
        Vec::new()
    } else {
        let w: Vec<F> = rows.gamma.iter().zip(&rows.omega).map(|(&g, &o)| (g * o).sqrt()).collect();
        let sol = weighted_least_squares(&rows.design, &rows.targets, &w)?;
        if sol.ridge {
            flags.push(FitFlag::Ridge { regime });
        }
        sol.coef
    };
    let mut sigma = rows.sigma2(&ar).sqrt();
    let floor = F::lit(min_sigma);
    if !(sigma >= floor) {
        sigma = floor;
        flags.push(FitFlag::SigmaFloored { regime });
    }
    let nu = solve_nu(rows.mean_log_omega_minus_omega(), prev.nu);
    if nu.clamped {
        flags.push(FitFlag::NuClamped { regime, nu: nu.nu.as_f64() });
    }
    Ok((ar, sigma, nu.nu))
}

/// π, transition rows and duration distributions from pooled statistics.
/// Rows without mass keep the values of `prev`.
pub(crate) fn discrete_update<F: Real>(stats: &[SuffStats<F>], prev: &ModelParams<F>, flags: &mut Vec<FitFlag>) -> ModelParams<F> {
    let (k, d) = (prev.n_regimes, prev.max_duration);
    let mut out = prev.clone();
    let mut first = vec![F::zero(); k];
    let mut xi = vec![F::zero(); k * k];
    let mut dur = vec![F::zero(); k * d];
    for st in stats {
        for (a, &b) in first.iter_mut().zip(&st.first) {
            *a = *a + b;
        }
        for (a, &b) in xi.iter_mut().zip(&st.xi_agg) {
            *a = *a + b;
        }
        for (a, &b) in dur.iter_mut().zip(&st.dur_stats) {
            *a = *a + b;
        }
    }
    let total: F = first.iter().copied().sum();
    if total > F::zero() {
        out.pi = first.iter().map(|&x| x / total).collect();
    }
    let tiny = F::lit(MIN_REGIME_MASS);
    for j in 0..k {
        let row = &xi[j * k..(j + 1) * k];
        let s: F = row.iter().copied().sum();
        if s > tiny {
            out.transition[j] = row.iter().map(|&x| x / s).collect();
        } else {
            flags.push(FitFlag::TransitionRowKept { regime: j });
        }
        let row = &dur[j * d..(j + 1) * d];
        let s: F = row.iter().copied().sum();
        if s > tiny {
            let eps = F::lit(DURATION_SMOOTHING);
            let norm = s + eps * F::lit(d as f64);
            out.regimes[j].lambda = row.iter().map(|&x| (x + eps) / norm).collect();
        } else {
            flags.push(FitFlag::DurationRowKept { regime: j });
        }
    }
    out
}

/// One M-step over a batch: closed-form π, A, λ, weighted least squares for
/// the AR weights, the σ update and the ν root, all from statistics
/// computed under `prev`.
pub fn m_step<F: Real>(
    stats: &[SuffStats<F>],
    seqs: &[Sequence<F>],
    prev: &ModelParams<F>,
    opts: &FitOptions,
) -> Result<(ModelParams<F>, Vec<FitFlag>)> {
    if stats.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if stats.len() != seqs.len() {
        return Err(Error::LengthMismatch { expected: seqs.len(), got: stats.len() });
    }
    let mut flags = Vec::new();
    let mut out = discrete_update(stats, prev, &mut flags);
    for r in 0..prev.n_regimes {
        let rows = RegimeRows::collect(stats, seqs, r);
        if rows.mass() < F::lit(MIN_REGIME_MASS) || rows.targets.len() < prev.order.max(1) {
            flags.push(FitFlag::FrozenRegime { regime: r });
            continue;
        }
        match fit_emission(&rows, &prev.regimes[r], r, opts.min_sigma, &mut flags) {
            Ok((ar, sigma, nu)) => {
                let reg = &mut out.regimes[r];
                reg.ar = ar;
                reg.sigma = sigma;
                reg.nu = nu;
            }
            Err(Error::InsufficientRows { .. }) => flags.push(FitFlag::FrozenRegime { regime: r }),
            Err(e) => return Err(e),
        }
    }
    Ok((out, flags))
}
