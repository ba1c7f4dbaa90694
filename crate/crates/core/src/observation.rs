//! Generalized-t autoregressive emissions and precision posteriors.
//!
//! Given regime `k`, the sample `y_n` is normal around the AR prediction
//! with precision scaled by a latent `τ_n ~ Gamma(ν/2, ν/2)`. Marginally the
//! residual is Student-t with scale `σ` and `ν` degrees of freedom, and the
//! posterior mean of `τ_n` is the robustness weight used by the M-step.

use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma};
use crate::{ModelParams, Real};

/// Inner product of AR weights with the preceding samples.
///
/// `context` holds the `p` samples before the target, oldest first, so
/// `a[j]` multiplies `context[p - 1 - j]` (the sample `j + 1` steps back).
pub fn ar_predict<F: Real>(context: &[F], a: &[F]) -> Result<F> {
    if context.len() != a.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: context.len() });
    }
    Ok(predict_unchecked(context, a))
}

#[inline]
pub(crate) fn predict_unchecked<F: Real>(context: &[F], a: &[F]) -> F {
    let p = a.len();
    a.iter().enumerate().fold(F::zero(), |acc, (j, &w)| acc + w * context[p - 1 - j])
}

/// Residual of sample `n` under AR weights `a`; requires `n >= a.len()`.
#[inline]
pub(crate) fn residual_at<F: Real>(y: &[F], n: usize, a: &[F]) -> F {
    y[n] - predict_unchecked(&y[n - a.len()..n], a)
}

/// Log density of the location-scale Student-t distribution.
pub fn gen_t_logpdf<F: Real>(y: F, mean: F, sigma: F, nu: F) -> Result<F> {
    check_scale(sigma, nu)?;
    Ok(TConstants::new(sigma, nu).logpdf(y - mean))
}

fn check_scale<F: Real>(sigma: F, nu: F) -> Result<()> {
    if !(sigma > F::zero()) || !(nu > F::zero()) {
        return Err(Error::InvalidArgument(format!("sigma={sigma}, nu={nu} must be positive")));
    }
    Ok(())
}

/// Residual-independent parts of the t log density, hoisted out of the
/// per-sample loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TConstants<F> {
    log_norm: F,
    half_nu_plus_one: F,
    inv_nu_sigma2: F,
}

impl<F: Real> TConstants<F> {
    pub(crate) fn new(sigma: F, nu: F) -> Self {
        let half = F::lit(0.5);
        let pi = F::lit(std::f64::consts::PI);
        let log_norm = ln_gamma((nu + F::one()) * half) - ln_gamma(nu * half) - half * (nu * pi).ln() - sigma.ln();
        Self { log_norm, half_nu_plus_one: (nu + F::one()) * half, inv_nu_sigma2: (nu * sigma * sigma).recip() }
    }

    #[inline]
    pub(crate) fn logpdf(&self, residual: F) -> F {
        self.log_norm - self.half_nu_plus_one * (residual * residual * self.inv_nu_sigma2).ln_1p()
    }
}

/// Posterior mean of the precision: ω = (ν + 1) / (ν + r²/σ²).
pub fn tau_mean<F: Real>(residual: F, sigma: F, nu: F) -> F {
    (nu + F::one()) / (nu + (residual / sigma).powi(2))
}

/// Posterior mean of log τ: log ω + Ψ((ν + 1)/2) − log((ν + 1)/2).
pub fn tau_mean_log<F: Real>(residual: F, sigma: F, nu: F) -> F {
    tau_mean(residual, sigma, nu).ln() + log_tau_shift(nu)
}

/// Ψ((ν + 1)/2) − log((ν + 1)/2), always negative.
pub(crate) fn log_tau_shift<F: Real>(nu: F) -> F {
    let h = (nu + F::one()) * F::lit(0.5);
    digamma(h) - h.ln()
}

/// Emission log densities for every chain step and regime, `T × K` row
/// major, where step `t` is sample `order + t`.
pub fn emission_table<F: Real>(model: &ModelParams<F>, y: &[F]) -> Vec<F> {
    let k = model.n_regimes;
    let p = model.order;
    let steps = y.len().saturating_sub(p);
    let consts: Vec<TConstants<F>> = model.regimes.iter().map(|r| TConstants::new(r.sigma, r.nu)).collect();
    let mut out = vec![F::zero(); steps * k];
    for t in 0..steps {
        for (i, reg) in model.regimes.iter().enumerate() {
            out[t * k + i] = consts[i].logpdf(residual_at(y, p + t, &reg.ar));
        }
    }
    out
}
