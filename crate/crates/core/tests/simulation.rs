mod common;

use common::two_regime;
use rarhsmm::simulate::sample_sequence;
use rarhsmm::{Model, Regime};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn duration_histogram_passes_chi_square() {
    let lambda = vec![0.1, 0.2, 0.4, 0.2, 0.1];
    let m = Model {
        n_regimes: 2,
        order: 0,
        max_duration: 5,
        sample_rate: 1.0,
        pi: vec![0.5, 0.5],
        transition: vec![vec![0.3, 0.7], vec![0.6, 0.4]],
        regimes: (0..2).map(|_| Regime { ar: vec![], sigma: 1.0, nu: 5.0, lambda: lambda.clone() }).collect(),
    };
    let sim = sample_sequence(&m, 40_000, 99).unwrap();
    let path = &sim.path;
    let mut counts = [0.0f64; 5];
    for n in 0..path.len() - 1 {
        // Entries are where the previous counter was 1; skip a final entry
        // that may be cut off by the end of the sequence.
        if n == 0 || path.d[n - 1] == 1 {
            counts[path.d[n] - 1] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    assert!(total >= 1e4, "{total} renewals");
    let stat: f64 = counts.iter().zip(&lambda).map(|(c, p)| (c - total * p).powi(2) / (total * p)).sum();
    let critical = ChiSquared::new(4.0).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn transition_frequencies_follow_the_matrix() {
    let m = two_regime(10, (4.0, 9.0));
    let mut m = m;
    m.transition = vec![vec![0.25, 0.75], vec![0.5, 0.5]];
    let sim = sample_sequence(&m, 200_000, 5).unwrap();
    let p = &sim.path;
    let mut c = [[0.0f64; 2]; 2];
    for n in m.order + 1..p.len() {
        if p.d[n - 1] == 1 {
            c[p.z[n - 1]][p.z[n]] += 1.0;
        }
    }
    for (j, row) in c.iter().enumerate() {
        let s = row[0] + row[1];
        assert!((row[1] / s - m.transition[j][1]).abs() < 0.02, "row {j}: {row:?}");
    }
}

#[test]
fn gaussian_limit_moments() {
    let m = Model {
        n_regimes: 1,
        order: 0,
        max_duration: 1,
        sample_rate: 1.0,
        pi: vec![1.0],
        transition: vec![vec![1.0]],
        regimes: vec![Regime { ar: vec![], sigma: 1.7, nu: 1e6, lambda: vec![1.0] }],
    };
    let y = sample_sequence(&m, 1_000_000, 7).unwrap().sequence.samples;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.01, "{mean}");
    assert!((var / (1.7 * 1.7) - 1.0).abs() < 0.02, "{var}");
}

#[test]
fn precisions_have_unit_mean() {
    let m = two_regime(10, (4.0, 9.0));
    let sim = sample_sequence(&m, 200_000, 12).unwrap();
    let tau = sim.path.tau.unwrap();
    let mean = tau[m.order..].iter().sum::<f64>() / (tau.len() - m.order) as f64;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
}

#[test]
fn reproducible_and_seed_sensitive() {
    let m = two_regime(10, (4.0, 9.0));
    let a = sample_sequence(&m, 1000, 1).unwrap();
    let b = sample_sequence(&m, 1000, 1).unwrap();
    let c = sample_sequence(&m, 1000, 2).unwrap();
    assert_eq!(a.sequence, b.sequence);
    assert_eq!(a.path, b.path);
    assert_ne!(a.sequence, c.sequence);
    a.path.check_legal(2, 10).unwrap();
}
