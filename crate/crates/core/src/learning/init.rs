use crate::error::{Error, Result};
use crate::linalg::weighted_least_squares;
use crate::{ModelParams, Real, RegimeParams, Sequence};

/// Settings of the two-regime (background / spindle) initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub sample_rate: f64,
    pub order: usize,
    /// In samples.
    pub max_duration: usize,
    /// Length of the leading window used for the background AR fit.
    pub seed_seconds: f64,
    pub spindle_hz: f64,
    pub resonator_radius: f64,
    pub spindle_mean_seconds: f64,
    pub spindle_sd_seconds: f64,
    pub nu: f64,
}

impl InitConfig {
    /// Order 5, durations up to 30 s, a 13 Hz spindle resonator and
    /// N(1 s, 0.15 s) spindle durations.
    pub fn spindle_default(sample_rate: f64) -> Self {
        Self {
            sample_rate,
            order: 5,
            max_duration: (30.0 * sample_rate).round() as usize,
            seed_seconds: 5.0,
            spindle_hz: 13.0,
            resonator_radius: 0.9,
            spindle_mean_seconds: 1.0,
            spindle_sd_seconds: 0.15,
            nu: 10.0,
        }
    }
}

/// AR weights of a damped two-pole resonator centred at `freq_hz`, padded
/// with zeros to `order`.
pub fn resonator_weights<F: Real>(order: usize, freq_hz: f64, sample_rate: f64, radius: f64) -> Vec<F> {
    let theta = 2.0 * std::f64::consts::PI * freq_hz / sample_rate;
    let mut a = vec![F::zero(); order];
    a[0] = F::lit(2.0 * radius * theta.cos());
    a[1] = F::lit(-radius * radius);
    a
}

/// Two-regime starting point for EM: regime 0 is background activity,
/// regime 1 the spindle.
///
/// - π = [1, 0]; A = [[0.5, 0.5], [1, 0]] (spindles never renew into
///   themselves);
/// - regime 0 AR weights by least squares on the leading
///   `seed_seconds` of every sequence, σ from the residuals;
/// - regime 1 AR weights from a resonator at `spindle_hz`, same σ;
/// - λ₀ uniform on 1..=D, λ₁ a normal density sampled at every duration
///   and renormalized.
pub fn default_unsupervised_init<F: Real>(seqs: &[Sequence<F>], cfg: &InitConfig) -> Result<ModelParams<F>> {
    if seqs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let p = cfg.order;
    if p < 2 {
        return Err(Error::InvalidArgument("the spindle resonator needs order >= 2".into()));
    }
    let window = (cfg.seed_seconds * cfg.sample_rate).round() as usize;
    let mut design = Vec::new();
    let mut targets = Vec::new();
    for seq in seqs {
        if seq.len() < window || window <= p {
            return Err(Error::SequenceTooShort { len: seq.len(), needed: window.max(p + 1) });
        }
        for n in p..window {
            design.extend((0..p).map(|j| seq.samples[n - 1 - j]));
            targets.push(seq.samples[n]);
        }
    }
    let ones = vec![F::one(); targets.len()];
    let ar0 = weighted_least_squares(&design, &targets, &ones)?.coef;
    let sse: F = targets
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let pred = (0..p).fold(F::zero(), |acc, j| acc + ar0[j] * design[i * p + j]);
            (y - pred).powi(2)
        })
        .sum();
    let sigma = (sse / F::lit(targets.len() as f64)).sqrt().max(F::lit(1e-6));

    let d = cfg.max_duration;
    let uniform = vec![F::one() / F::lit(d as f64); d];
    let dens: Vec<f64> = (1..=d)
        .map(|i| {
            let z = (i as f64 / cfg.sample_rate - cfg.spindle_mean_seconds) / cfg.spindle_sd_seconds;
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = dens.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("spindle duration prior has no mass below max_duration".into()));
    }
    let spindle_lambda: Vec<F> = dens.iter().map(|&x| F::lit(x / total)).collect();
    let nu = F::lit(cfg.nu);
    let model = ModelParams {
        n_regimes: 2,
        order: p,
        max_duration: d,
        sample_rate: F::lit(cfg.sample_rate),
        pi: vec![F::one(), F::zero()],
        transition: vec![vec![F::lit(0.5), F::lit(0.5)], vec![F::one(), F::zero()]],
        regimes: vec![
            RegimeParams { ar: ar0, sigma, nu, lambda: uniform },
            RegimeParams {
                ar: resonator_weights(p, cfg.spindle_hz, cfg.sample_rate, cfg.resonator_radius),
                sigma,
                nu,
                lambda: spindle_lambda,
            },
        ],
    };
    model.validated()
}
