//! Viterbi decoding of the joint regime/counter path.

use bitvec::prelude::*;

use crate::error::Result;
use crate::messages::{check_dims, LogParams};
use crate::observation::emission_table;
use crate::preprocess::LabelTrack;
use crate::{HiddenPath, ModelParams, Real, Sequence};

#[derive(Debug, Clone)]
pub struct Decoded<F> {
    pub path: HiddenPath<F>,
    /// Joint log probability of the decoded path and the observations.
    pub log_prob: F,
}

/// Most probable `(z, d)` path given the observations.
///
/// Ties prefer the predecessor with the smaller regime index, then the
/// smaller counter, which makes the output a total function of its inputs.
pub fn viterbi<F: Real>(model: &ModelParams<F>, seq: &Sequence<F>) -> Result<Decoded<F>> {
    check_dims(model, seq)?;
    let lp = LogParams::new(model);
    let (k, d) = (model.n_regimes, model.max_duration);
    let kd = k * d;
    let p = model.order;
    let steps = seq.len() - p;
    let em = emission_table(model, &seq.samples);

    // renewed[t, k, i]: the best way into (k, i + 1) at step t is a renewal.
    let mut renewed: BitVec = bitvec![0; steps * kd];
    // best_from[t, k]: regime whose counter-1 cell renews best into k at t.
    let mut best_from = vec![0u32; steps * k];

    let mut cur = vec![F::zero(); kd];
    let mut next = vec![F::zero(); kd];
    lp.init_slice(&em[..k], &mut cur);
    for t in 1..steps {
        for to in 0..k {
            let mut best = F::neg_infinity();
            let mut arg = 0usize;
            for j in 0..k {
                let v = lp.log_trans[j * k + to] + cur[j * d];
                if v > best {
                    best = v;
                    arg = j;
                }
            }
            best_from[t * k + to] = arg as u32;
            let e = em[t * k + to];
            for i in 0..d {
                let renew = lp.log_lambda[to * d + i] + best;
                let dec = if i + 1 < d { cur[to * d + i + 1] } else { F::neg_infinity() };
                // Decrement predecessor is (to, i + 2), renewal predecessor is (arg, 1).
                let take_renewal = renew > dec || (renew == dec && arg <= to);
                next[to * d + i] = e + if take_renewal { renew } else { dec };
                renewed.set((t * k + to) * d + i, take_renewal);
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }

    let mut state = 0usize;
    for s in 1..kd {
        if cur[s] > cur[state] {
            state = s;
        }
    }
    let log_prob = cur[state];

    let n = seq.len();
    let mut z = vec![0usize; n];
    let mut dd = vec![0usize; n];
    for t in (0..steps).rev() {
        let (kk, i) = (state / d, state % d);
        z[p + t] = kk;
        dd[p + t] = i + 1;
        if t > 0 {
            state = if renewed[(t * k + kk) * d + i] { best_from[t * k + kk] as usize * d } else { kk * d + i + 1 };
        }
    }
    for n0 in 0..p {
        z[n0] = z[p];
        dd[n0] = 1;
    }
    Ok(Decoded { path: HiddenPath { z, d: dd, tau: None }, log_prob })
}

/// Per-sample regime labels of a decoded path.
pub fn labels_from_path<F: Real>(path: &HiddenPath<F>, sample_rate: f64) -> LabelTrack {
    LabelTrack { labels: path.z.clone(), sample_rate }
}
