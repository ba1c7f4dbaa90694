//! Ancestral sampling from the generative model.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::validate_model;
use crate::rng::CounterRng;
use crate::{HiddenPath, ModelParams, Real, Sequence};

#[derive(Debug, Clone)]
pub struct Simulated<F> {
    pub sequence: Sequence<F>,
    pub path: HiddenPath<F>,
}

fn categorical(weights: &[impl Real]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights.iter().map(|w| w.as_f64()))
        .map_err(|e| Error::InvalidArgument(format!("probability vector: {e}")))
}

/// Draws `n_samples` observations and the hidden path that produced them.
///
/// The first `order` samples are standard normal conditioning context. The
/// chain starts at sample `order` with `z ~ π`, `d ~ λ_z`; counters above 1
/// decrement, a counter of 1 renews through the transition matrix. Each
/// emitted sample draws `τ ~ Gamma(ν/2, rate ν/2)` and
/// `y = ⟨a, context⟩ + σ ε / √τ`.
pub fn sample_sequence<F: Real>(model: &ModelParams<F>, n_samples: usize, seed: u64) -> Result<Simulated<F>> {
    validate_model(model).map_err(Error::InvalidModel)?;
    let p = model.order;
    if n_samples <= p {
        return Err(Error::SequenceTooShort { len: n_samples, needed: p });
    }
    let mut rng = CounterRng::new(seed);
    let init = categorical(&model.pi)?;
    let rows = model.transition.iter().map(|r| categorical(r)).collect::<Result<Vec<_>>>()?;
    let durations = model.regimes.iter().map(|r| categorical(&r.lambda)).collect::<Result<Vec<_>>>()?;
    let precisions = model
        .regimes
        .iter()
        .map(|r| {
            let nu = r.nu.as_f64();
            Gamma::new(nu / 2.0, 2.0 / nu).map_err(|e| Error::InvalidArgument(format!("nu={nu}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let regimes: Vec<(Vec<f64>, f64)> =
        model.regimes.iter().map(|r| (r.ar.iter().map(|a| a.as_f64()).collect(), r.sigma.as_f64())).collect();

    let mut y = Vec::with_capacity(n_samples);
    let mut z = vec![0usize; n_samples];
    let mut d = vec![1usize; n_samples];
    let mut tau = vec![1.0f64; n_samples];
    for _ in 0..p {
        y.push(rng.sample::<f64, _>(StandardNormal));
    }
    let mut regime = init.sample(&mut rng);
    let mut counter = durations[regime].sample(&mut rng) + 1;
    for n in p..n_samples {
        z[n] = regime;
        d[n] = counter;
        let (a, sigma) = &regimes[regime];
        let mean: f64 = a.iter().enumerate().map(|(j, w)| w * y[n - 1 - j]).sum();
        let t = precisions[regime].sample(&mut rng);
        let eps: f64 = rng.sample(StandardNormal);
        tau[n] = t;
        y.push(mean + sigma * eps / t.sqrt());
        if counter > 1 {
            counter -= 1;
        } else {
            regime = rows[regime].sample(&mut rng);
            counter = durations[regime].sample(&mut rng) + 1;
        }
    }
    for n in 0..p {
        z[n] = z[p];
    }
    let samples: Vec<F> = y.into_iter().map(F::lit).collect();
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(Simulated {
        sequence: Sequence { samples, sample_rate: model.sample_rate },
        path: HiddenPath { z, d, tau: Some(tau.into_iter().map(F::lit).collect()) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RegimeParams;

    fn model() -> ModelParams<f64> {
        ModelParams {
            n_regimes: 2,
            order: 2,
            max_duration: 5,
            sample_rate: 10.0,
            pi: vec![0.5, 0.5],
            transition: vec![vec![0.0, 1.0], vec![0.6, 0.4]],
            regimes: vec![
                RegimeParams { ar: vec![0.5, -0.2], sigma: 1.0, nu: 4.0, lambda: vec![0.0, 0.1, 0.2, 0.3, 0.4] },
                RegimeParams { ar: vec![0.0, 0.0], sigma: 2.0, nu: 9.0, lambda: vec![0.5, 0.5, 0.0, 0.0, 0.0] },
            ],
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_sequence(&model(), 300, 11).unwrap();
        let b = sample_sequence(&model(), 300, 11).unwrap();
        let c = sample_sequence(&model(), 300, 12).unwrap();
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(a.path, b.path);
        assert_ne!(a.sequence, c.sequence);
    }

    #[test]
    fn emitted_path_is_legal() {
        for seed in 0..20 {
            let s = sample_sequence(&model(), 200, seed).unwrap();
            s.path.check_legal(2, 5).unwrap();
            // regime 0 never repeats itself directly: transition[0][0] = 0
            assert!(s.path.tau.as_ref().unwrap().iter().all(|&t| t > 0.0));
        }
    }

    #[test]
    fn rejects_invalid() {
        let mut m = model();
        m.regimes[0].sigma = -1.0;
        assert!(sample_sequence(&m, 100, 0).is_err());
        assert!(sample_sequence(&model(), 2, 0).is_err());
    }
}
