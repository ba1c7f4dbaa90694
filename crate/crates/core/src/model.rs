//! Model parameterization, validation and the JSON model document.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Per-regime emission and duration parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct RegimeParams<F> {
    /// AR weights; entry `j` multiplies the sample `j + 1` steps in the past.
    pub ar: Vec<F>,
    pub sigma: F,
    pub nu: F,
    /// Duration probabilities; entry `i` is the probability of `i + 1` samples.
    pub lambda: Vec<F>,
}

/// Full parameter set of the model plus its dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ModelParams<F> {
    pub n_regimes: usize,
    pub order: usize,
    /// Longest explicit duration, in samples.
    pub max_duration: usize,
    pub sample_rate: F,
    pub pi: Vec<F>,
    /// Row-stochastic regime transition matrix, used only on renewals.
    pub transition: Vec<Vec<F>>,
    pub regimes: Vec<RegimeParams<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Itemized list of violated invariants.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { field: field.into(), message: message.into() });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

fn simplex_tol<F: Real>() -> f64 {
    1e-12_f64.max(64.0 * F::epsilon().as_f64())
}

fn check_simplex<F: Real>(report: &mut ValidationReport, field: &str, xs: &[F], len: usize) {
    if xs.len() != len {
        report.push(field, format!("has length {}, expected {len}", xs.len()));
        return;
    }
    for (i, &x) in xs.iter().enumerate() {
        if !x.is_finite() || x < F::zero() {
            report.push(format!("{field}[{i}]"), format!("must be finite and >= 0, got {x}"));
        }
    }
    let sum: f64 = xs.iter().map(|x| x.as_f64()).sum();
    if (sum - 1.0).abs() > simplex_tol::<F>() {
        report.push(field, format!("{field} sums to {sum}"));
    }
}

/// Checks every parameter invariant and reports all violations found.
pub fn validate_model<F: Real>(m: &ModelParams<F>) -> std::result::Result<(), ValidationReport> {
    let mut r = ValidationReport::default();
    let k = m.n_regimes;
    if k == 0 {
        r.push("n_regimes", "must be >= 1");
    }
    if m.max_duration == 0 {
        r.push("max_duration", "must be >= 1");
    }
    if !(m.sample_rate.is_finite() && m.sample_rate > F::zero()) {
        r.push("sample_rate", format!("must be > 0, got {}", m.sample_rate));
    }
    check_simplex(&mut r, "pi", &m.pi, k);
    if m.transition.len() != k {
        r.push("transition", format!("has {} rows, expected {k}", m.transition.len()));
    } else {
        for (j, row) in m.transition.iter().enumerate() {
            check_simplex(&mut r, &format!("transition[{j}]"), row, k);
        }
    }
    if m.regimes.len() != k {
        r.push("regimes", format!("has {} entries, expected {k}", m.regimes.len()));
    }
    for (i, reg) in m.regimes.iter().enumerate() {
        if reg.ar.len() != m.order {
            r.push(
                format!("regimes[{i}].ar"),
                format!("has length {}, expected order {}", reg.ar.len(), m.order),
            );
        }
        for (j, &w) in reg.ar.iter().enumerate() {
            if !w.is_finite() {
                r.push(format!("regimes[{i}].ar[{j}]"), format!("must be finite, got {w}"));
            }
        }
        if !(reg.sigma.is_finite() && reg.sigma > F::zero()) {
            r.push(format!("regimes[{i}].sigma"), format!("sigma must be > 0, got {}", reg.sigma));
        }
        if !(reg.nu.is_finite() && reg.nu > F::zero()) {
            r.push(format!("regimes[{i}].nu"), format!("nu must be > 0, got {}", reg.nu));
        }
        check_simplex(&mut r, &format!("regimes[{i}].lambda"), &reg.lambda, m.max_duration);
    }
    if r.is_empty() {
        Ok(())
    } else {
        Err(r)
    }
}

fn renormalize<F: Real>(xs: &mut [F]) {
    let sum: F = xs.iter().copied().sum();
    for x in xs.iter_mut() {
        *x = *x / sum;
    }
}

impl<F: Real> ModelParams<F> {
    /// Validates and renormalizes every probability vector that passed the
    /// simplex tolerance.
    pub fn validated(mut self) -> Result<Self> {
        validate_model(&self).map_err(Error::InvalidModel)?;
        renormalize(&mut self.pi);
        for row in &mut self.transition {
            renormalize(row);
        }
        for reg in &mut self.regimes {
            renormalize(&mut reg.lambda);
        }
        Ok(self)
    }

    pub fn to_document(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a model document. The result is not validated.
    pub fn from_document(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Converts every scalar to another precision.
    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        let c = |x: F| G::lit(x.as_f64());
        let cv = |xs: &[F]| xs.iter().map(|&x| c(x)).collect::<Vec<G>>();
        ModelParams {
            n_regimes: self.n_regimes,
            order: self.order,
            max_duration: self.max_duration,
            sample_rate: c(self.sample_rate),
            pi: cv(&self.pi),
            transition: self.transition.iter().map(|r| cv(r)).collect(),
            regimes: self
                .regimes
                .iter()
                .map(|r| RegimeParams {
                    ar: cv(&r.ar),
                    sigma: c(r.sigma),
                    nu: c(r.nu),
                    lambda: cv(&r.lambda),
                })
                .collect(),
        }
    }
}

/// One single-channel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<F> {
    pub samples: Vec<F>,
    pub sample_rate: F,
}

impl<F: Real> Sequence<F> {
    pub fn new(samples: Vec<F>, sample_rate: F) -> Result<Self> {
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if !(sample_rate.is_finite() && sample_rate > F::zero()) {
            return Err(Error::InvalidRate(format!("{sample_rate}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-sample regime labels and remaining-duration counters.
///
/// The chain starts at sample `order`; the conditioning samples before it
/// carry the first decoded regime with counter 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenPath<F> {
    pub z: Vec<usize>,
    pub d: Vec<usize>,
    pub tau: Option<Vec<F>>,
}

impl<F> HiddenPath<F> {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Checks the counter dynamics: a counter above 1 forces the next sample
    /// to keep the regime and decrement, and every regime entry starts with a
    /// counter in `1..=max_duration`.
    pub fn check_legal(&self, n_regimes: usize, max_duration: usize) -> std::result::Result<(), String> {
        if self.z.len() != self.d.len() {
            return Err(format!("z has {} entries but d has {}", self.z.len(), self.d.len()));
        }
        let mut entry = true;
        for n in 0..self.z.len() {
            if self.z[n] >= n_regimes {
                return Err(format!("z[{n}] = {} out of range", self.z[n]));
            }
            if self.d[n] == 0 {
                return Err(format!("d[{n}] = 0"));
            }
            if entry && self.d[n] > max_duration {
                return Err(format!("regime entry at {n} with counter {} > {max_duration}", self.d[n]));
            }
            if self.d[n] > 1 && n + 1 < self.z.len() {
                if self.z[n + 1] != self.z[n] || self.d[n + 1] != self.d[n] - 1 {
                    return Err(format!("illegal counter step at sample {n}"));
                }
                entry = false;
            } else {
                entry = true;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn two_regime_model() -> ModelParams<f64> {
        ModelParams {
            n_regimes: 2,
            order: 2,
            max_duration: 3,
            sample_rate: 50.0,
            pi: vec![1.0, 0.0],
            transition: vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            regimes: vec![
                RegimeParams { ar: vec![0.5, -0.3], sigma: 1.0, nu: 4.0, lambda: vec![0.2, 0.3, 0.5] },
                RegimeParams {
                    ar: vec![1.2, -0.8],
                    sigma: 0.1 + 0.2,
                    nu: 9.0,
                    lambda: vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                },
            ],
        }
    }

    #[test]
    fn accepts_spindle_initialization_shape() {
        assert_eq!(validate_model(&two_regime_model()), Ok(()));
    }

    #[test]
    fn reports_pi_sum() {
        let mut m = two_regime_model();
        m.pi = vec![0.5, 0.6];
        let report = validate_model(&m).unwrap_err();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "pi");
        assert!(report.violations[0].message.contains("pi sums to 1.1"), "{report}");
    }

    #[test]
    fn reports_zero_sigma() {
        let mut m = two_regime_model();
        m.regimes[1].sigma = 0.0;
        let report = validate_model(&m).unwrap_err();
        assert_eq!(report.violations[0].field, "regimes[1].sigma");
        assert!(report.violations[0].message.contains("sigma must be > 0"));
    }

    #[test]
    fn single_field_perturbations_are_each_caught() {
        type Edit = Box<dyn Fn(&mut ModelParams<f64>)>;
        let perturb: Vec<Edit> = vec![
            Box::new(|m| m.n_regimes = 3),
            Box::new(|m| m.max_duration = 0),
            Box::new(|m| m.sample_rate = -1.0),
            Box::new(|m| m.pi[0] = -0.1),
            Box::new(|m| m.pi.push(0.0)),
            Box::new(|m| m.transition[0][1] = 0.6),
            Box::new(|m| m.transition[1] = vec![1.0]),
            Box::new(|m| m.regimes[0].ar.pop().map(|_| ()).unwrap_or(())),
            Box::new(|m| m.regimes[0].ar[0] = f64::NAN),
            Box::new(|m| m.regimes[0].nu = 0.0),
            Box::new(|m| m.regimes[0].sigma = f64::INFINITY),
            Box::new(|m| m.regimes[1].lambda[2] = 0.4),
            Box::new(|m| m.regimes[1].lambda = vec![1.0]),
            Box::new(|m| m.regimes.pop().map(|_| ()).unwrap_or(())),
        ];
        for (i, p) in perturb.iter().enumerate() {
            let mut m = two_regime_model();
            p(&mut m);
            assert!(validate_model(&m).is_err(), "perturbation {i} not caught");
        }
    }

    #[test]
    fn validated_renormalizes_drift() {
        let mut m = two_regime_model();
        m.pi = vec![1.0 - 1e-13, 0.0];
        let v = m.validated().unwrap();
        assert_eq!(v.pi.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let m = two_regime_model();
        let text = m.to_document().unwrap();
        let back = ModelParams::<f64>::from_document(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.regimes[1].sigma.to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn minimal_model_round_trips() {
        let m = ModelParams {
            n_regimes: 1,
            order: 0,
            max_duration: 1,
            sample_rate: 1.0,
            pi: vec![1.0],
            transition: vec![vec![1.0]],
            regimes: vec![RegimeParams { ar: vec![], sigma: 1.0, nu: 3.0, lambda: vec![1.0] }],
        };
        let back = ModelParams::<f64>::from_document(&m.to_document().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_field_names_it() {
        let text = two_regime_model().to_document().unwrap().replacen("\"nu\"", "\"nu_\"", 1);
        let err = ModelParams::<f64>::from_document(&text).unwrap_err();
        assert!(err.to_string().contains("`nu`"), "{err}");
    }

    #[test]
    fn path_legality() {
        let ok: HiddenPath<f64> = HiddenPath { z: vec![0, 0, 1, 1, 1, 0], d: vec![2, 1, 3, 2, 1, 1], tau: None };
        assert!(ok.check_legal(2, 3).is_ok());
        let bad: HiddenPath<f64> = HiddenPath { z: vec![0, 1], d: vec![2, 1], tau: None };
        assert!(bad.check_legal(2, 3).is_err());
        let long: HiddenPath<f64> = HiddenPath { z: vec![0; 4], d: vec![4, 3, 2, 1], tau: None };
        assert!(long.check_legal(1, 3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.01f64..10.0, n).prop_map(|v| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
        }

        prop_compose! {
            fn arb_model()(k in 1usize..4, p in 0usize..4, d in 1usize..6)
                (pi in simplex(k),
                 rows in prop::collection::vec(simplex(k), k),
                 lambdas in prop::collection::vec(simplex(d), k),
                 ars in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, p), k),
                 scales in prop::collection::vec((1e-3f64..1e3, 1e-2f64..1e3), k),
                 p in Just(p), d in Just(d), k in Just(k))
                -> ModelParams<f64> {
                ModelParams {
                    n_regimes: k, order: p, max_duration: d, sample_rate: 50.0, pi,
                    transition: rows,
                    regimes: (0..k).map(|i| RegimeParams {
                        ar: ars[i].clone(), sigma: scales[i].0, nu: scales[i].1, lambda: lambdas[i].clone(),
                    }).collect(),
                }
            }
        }

        proptest! {
            #[test]
            fn any_model_round_trips(m in arb_model()) {
                let back = ModelParams::<f64>::from_document(&m.to_document().unwrap()).unwrap();
                prop_assert_eq!(back, m);
            }
        }
    }
}
