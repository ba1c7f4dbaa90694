//! Householder QR least squares.

use crate::error::{Error, Result};
use crate::Real;

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution<F> {
    pub coef: Vec<F>,
    /// The weighted design was rank deficient and `1e-8·I` was added to the
    /// normal equations.
    pub ridge: bool,
}

/// Minimizes Σ w_i² (y_i − ⟨x_i, β⟩)² over β.
///
/// `design` is row major with `targets.len()` rows. Rows with zero weight
/// are dropped before factorization.
pub fn weighted_least_squares<F: Real>(design: &[F], targets: &[F], weights: &[F]) -> Result<WlsSolution<F>> {
    let m = targets.len();
    if weights.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: weights.len() });
    }
    if m == 0 {
        return Err(Error::InsufficientRows { got: 0, order: 0 });
    }
    if !design.len().is_multiple_of(m) {
        return Err(Error::Dimension(format!("design of {} values for {m} rows", design.len())));
    }
    let n = design.len() / m;
    let keep: Vec<usize> = (0..m).filter(|&i| weights[i] > F::zero()).collect();
    if keep.len() < n {
        return Err(Error::InsufficientRows { got: keep.len(), order: n });
    }
    if n == 0 {
        return Ok(WlsSolution { coef: Vec::new(), ridge: false });
    }
    let rows = keep.len();
    // Column-major weighted copy with room for n ridge rows.
    let ld = rows + n;
    let mut a = vec![F::zero(); ld * n];
    let mut b = vec![F::zero(); ld];
    for (r, &i) in keep.iter().enumerate() {
        let w = weights[i];
        for j in 0..n {
            a[j * ld + r] = w * design[i * n + j];
        }
        b[r] = w * targets[i];
    }
    let (a0, b0) = (a.clone(), b.clone());
    if let Some(coef) = qr_solve(&mut a, &mut b, rows, n, ld) {
        return Ok(WlsSolution { coef, ridge: false });
    }
    let (mut a, mut b) = (a0, b0);
    let shrink = F::lit(RIDGE.sqrt());
    for j in 0..n {
        a[j * ld + rows + j] = shrink;
    }
    let coef = qr_solve(&mut a, &mut b, ld, n, ld)
        .ok_or_else(|| Error::Dimension("ridge-regularized design still singular".into()))?;
    Ok(WlsSolution { coef, ridge: true })
}

/// In-place Householder QR of the leading `m × n` block of a column-major
/// matrix with leading dimension `ld`, then back substitution. Returns
/// `None` when R is numerically singular.
fn qr_solve<F: Real>(a: &mut [F], b: &mut [F], m: usize, n: usize, ld: usize) -> Option<Vec<F>> {
    let mut diag = vec![F::zero(); n];
    for j in 0..n {
        let col = j * ld;
        let norm = a[col + j..col + m].iter().fold(F::zero(), |acc, &x| acc.hypot(x));
        if norm == F::zero() {
            diag[j] = F::zero();
            continue;
        }
        let alpha = if a[col + j] > F::zero() { -norm } else { norm };
        // v = x − alpha e1, stored in place
        a[col + j] = a[col + j] - alpha;
        let vnorm2: F = a[col + j..col + m].iter().map(|&x| x * x).sum();
        diag[j] = alpha;
        if vnorm2 == F::zero() {
            continue;
        }
        let two = F::lit(2.0);
        for c in j + 1..n {
            let cc = c * ld;
            let dot: F = (j..m).map(|i| a[col + i] * a[cc + i]).sum();
            let s = two * dot / vnorm2;
            for i in j..m {
                a[cc + i] = a[cc + i] - s * a[col + i];
            }
        }
        let dot: F = (j..m).map(|i| a[col + i] * b[i]).sum();
        let s = two * dot / vnorm2;
        for i in j..m {
            b[i] = b[i] - s * a[col + i];
        }
    }
    let rmax = diag.iter().fold(F::zero(), |acc, d| acc.max(d.abs()));
    let tol = rmax * F::epsilon() * F::lit(m.max(n) as f64);
    if rmax == F::zero() || diag.iter().any(|d| d.abs() <= tol) {
        return None;
    }
    let mut x = vec![F::zero(); n];
    for j in (0..n).rev() {
        let mut s = b[j];
        for c in j + 1..n {
            s = s - a[c * ld + j] * x[c];
        }
        x[j] = s / diag[j];
    }
    Some(x)
}
