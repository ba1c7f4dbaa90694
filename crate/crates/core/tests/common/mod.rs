//! Test-only oracles and fixtures shared by the integration targets.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rarhsmm::{Model, Regime, Signal};
use statrs::distribution::{Continuous, StudentsT};

/// Posterior quantities computed by summing over every legal hidden path.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub loglik: f64,
    /// `T × K`
    pub gamma: Vec<f64>,
    /// `K × K`
    pub xi: Vec<f64>,
    /// `K × D`, entries with each initial counter including the first step.
    pub dur: Vec<f64>,
    pub best_log_prob: f64,
    /// Regime of the best path at each chain step.
    pub best_z: Vec<usize>,
    pub best_d: Vec<usize>,
    pub n_paths: usize,
}

fn emission(m: &Model, y: &[f64], n: usize, k: usize) -> f64 {
    let r = &m.regimes[k];
    let mean: f64 = (0..m.order).map(|j| r.ar[j] * y[n - 1 - j]).sum();
    StudentsT::new(mean, r.sigma, r.nu).unwrap().ln_pdf(y[n])
}

/// Enumerates every `(z, d)` path over the chain steps and accumulates
/// exact posteriors. Only feasible for tiny `N`, `K`, `D`.
pub fn enumerate(m: &Model, seq: &Signal) -> Enumerated {
    let (k, dmax, p) = (m.n_regimes, m.max_duration, m.order);
    let steps = seq.len() - p;
    let e: Vec<Vec<f64>> = (0..steps).map(|t| (0..k).map(|j| emission(m, &seq.samples, p + t, j)).collect()).collect();

    // Each path: its log weight plus the visited states.
    let mut paths: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    let mut stack: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    for z in 0..k {
        for d in 1..=dmax {
            let w = m.pi[z] * m.regimes[z].lambda[d - 1];
            if w > 0.0 {
                stack.push((w.ln() + e[0][z], vec![(z, d)]));
            }
        }
    }
    while let Some((lw, path)) = stack.pop() {
        let t = path.len();
        if t == steps {
            paths.push((lw, path));
            continue;
        }
        let (z, d) = path[t - 1];
        if d > 1 {
            let mut next = path.clone();
            next.push((z, d - 1));
            stack.push((lw + e[t][z], next));
        } else {
            for to in 0..k {
                for nd in 1..=dmax {
                    let w = m.transition[z][to] * m.regimes[to].lambda[nd - 1];
                    if w > 0.0 {
                        let mut next = path.clone();
                        next.push((to, nd));
                        stack.push((lw + w.ln() + e[t][to], next));
                    }
                }
            }
        }
    }

    let top = paths.iter().map(|(w, _)| *w).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = paths.iter().map(|(w, _)| (w - top).exp()).sum();
    let loglik = top + total.ln();
    let mut gamma = vec![0.0; steps * k];
    let mut xi = vec![0.0; k * k];
    let mut dur = vec![0.0; k * dmax];
    for (lw, path) in &paths {
        let pr = (lw - loglik).exp();
        for (t, &(z, d)) in path.iter().enumerate() {
            gamma[t * k + z] += pr;
            let entry = t == 0 || path[t - 1].1 == 1;
            if entry {
                dur[z * dmax + d - 1] += pr;
            }
            if t > 0 && path[t - 1].1 == 1 {
                xi[path[t - 1].0 * k + z] += pr;
            }
        }
    }
    let (best_log_prob, best) = paths
        .iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|(w, p)| (*w, p.clone()))
        .unwrap();
    Enumerated {
        loglik,
        gamma,
        xi,
        dur,
        best_log_prob,
        best_z: best.iter().map(|s| s.0).collect(),
        best_d: best.iter().map(|s| s.1).collect(),
        n_paths: paths.len(),
    }
}

/// A random probability vector; with `sparse` some entries are zeroed while
/// keeping at least one positive.
pub fn random_simplex(rng: &mut StdRng, n: usize, sparse: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    if sparse && n > 1 {
        let keep = rng.random_range(0..n);
        for (i, x) in v.iter_mut().enumerate() {
            if i != keep && rng.random_bool(0.25) {
                *x = 0.0;
            }
        }
    }
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Random AR weights inside the stationarity region (orders up to 2).
pub fn stationary_ar(rng: &mut StdRng, p: usize) -> Vec<f64> {
    match p {
        0 => vec![],
        1 => vec![rng.random_range(-0.9..0.9)],
        2 => {
            let a2: f64 = rng.random_range(-0.9..0.9);
            let a1 = rng.random_range(-0.95..0.95) * (1.0 - a2);
            vec![a1, a2]
        }
        _ => panic!("order {p} not supported"),
    }
}

pub fn random_model(rng: &mut StdRng, k: usize, p: usize, d: usize, sparse: bool) -> Model {
    Model {
        n_regimes: k,
        order: p,
        max_duration: d,
        sample_rate: 100.0,
        pi: random_simplex(rng, k, sparse),
        transition: (0..k).map(|_| random_simplex(rng, k, sparse)).collect(),
        regimes: (0..k)
            .map(|_| Regime {
                ar: stationary_ar(rng, p),
                sigma: rng.random_range(0.3..2.0),
                nu: rng.random_range(0.5..20.0),
                lambda: random_simplex(rng, d, sparse),
            })
            .collect(),
    }
}

/// One random tiny instance in the enumeration-friendly size range.
pub fn tiny_instance(seed: u64) -> (Model, Signal) {
    let mut rng = StdRng::seed_from_u64(seed);
    let k = rng.random_range(1..=3);
    let d = rng.random_range(1..=3);
    let p = rng.random_range(0..=1);
    let n = rng.random_range(p + 1..=6);
    let m = random_model(&mut rng, k, p, d, seed.is_multiple_of(3));
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    (m, Signal::new(y, 100.0).unwrap())
}

/// `|a − b| ≤ tol · |b|`, with exact zeros required to match.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if b == 0.0 {
        return a.abs() <= f64::MIN_POSITIVE;
    }
    (a - b).abs() <= tol * b.abs()
}

/// Two-regime configuration with separated dynamics: a broadband regime and
/// a quiet narrowband resonator. The scale contrast pins regime boundaries
/// to about one sample, so the duration laws are identifiable.
pub fn two_regime(max_duration: usize, nu: (f64, f64)) -> Model {
    let d = max_duration;
    let bump = |mean: f64, sd: f64| -> Vec<f64> { (1..=d).map(|i| (-(i as f64 - mean).powi(2) / (2.0 * sd * sd)).exp()).collect() };
    let lam0 = bump(d as f64 * 0.7, d as f64 * 0.1);
    let lam1 = bump(d as f64 * 0.4, d as f64 * 0.08);
    let norm = |v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    Model {
        n_regimes: 2,
        order: 2,
        max_duration: d,
        sample_rate: 50.0,
        pi: vec![0.5, 0.5],
        transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        regimes: vec![
            Regime { ar: vec![0.5, -0.2], sigma: 1.0, nu: nu.0, lambda: norm(lam0) },
            Regime { ar: vec![1.6, -0.9], sigma: 0.05, nu: nu.1, lambda: norm(lam1) },
        ],
    }
}

/// Joint log probability of a chain-step path `(z, d)` and the observations;
/// `-inf` if the path is illegal.
pub fn path_log_prob(m: &Model, seq: &Signal, z: &[usize], d: &[usize]) -> f64 {
    let p = m.order;
    let mut lw = (m.pi[z[0]] * m.regimes[z[0]].lambda[d[0] - 1]).ln();
    for t in 0..z.len() {
        if t > 0 {
            if d[t - 1] > 1 {
                if z[t] != z[t - 1] || d[t] != d[t - 1] - 1 {
                    return f64::NEG_INFINITY;
                }
            } else {
                lw += (m.transition[z[t - 1]][z[t]] * m.regimes[z[t]].lambda[d[t] - 1]).ln();
            }
        }
        lw += emission(m, &seq.samples, p + t, z[t]);
    }
    lw
}
