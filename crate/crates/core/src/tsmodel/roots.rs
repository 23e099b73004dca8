//! Stationarity and invertibility of lag polynomials.
//!
//! Coefficients are in autoregressive form: `c` stands for the polynomial
//! `1 - c[0] z - c[1] z^2 - ...`. Moving-average coefficients `theta`
//! (polynomial `1 + theta[0] z + ...`) are checked as `-theta`.

use nalgebra::{Complex, DMatrix};

/// True when every root of the polynomial lies strictly outside the unit circle.
///
/// Uses the step-down (Schur-Cohn) recursion: the polynomial is stable iff all
/// partial autocorrelations it implies have magnitude below one.
pub fn is_stable(c: &[f64]) -> bool {
    let mut a = c.to_vec();
    while let Some(&kappa) = a.last() {
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - kappa * kappa;
        let next: Vec<f64> = (0..k - 1).map(|i| (a[i] + kappa * a[k - 2 - i]) / denom).collect();
        a = next;
    }
    true
}

pub fn is_stationary(ar: &[f64]) -> bool {
    is_stable(ar)
}

pub fn is_invertible(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|t| -t).collect();
    is_stable(&neg)
}

/// Inverse roots of `1 - c[0] z - ...`, as eigenvalues of the companion matrix.
pub fn inverse_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let k = c.len();
    if k == 0 {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(k, k);
    for (j, v) in c.iter().enumerate() {
        m[(0, j)] = *v;
    }
    for i in 1..k {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Mirrors inverse roots outside the unit disk to `1 / conj(root)` and rebuilds
/// the coefficients. `None` when a root sits on the unit circle.
pub fn reflect_inside(c: &[f64]) -> Option<Vec<f64>> {
    const UNIT_TOL: f64 = 1e-9;
    let roots = inverse_roots(c);
    let mut poly = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let modulus = r.norm();
        if (modulus - 1.0).abs() <= UNIT_TOL {
            return None;
        }
        let r = if modulus > 1.0 { Complex::new(1.0, 0.0) / r.conj() } else { r };
        // poly *= (1 - r z)
        let mut next = vec![Complex::new(0.0, 0.0); poly.len() + 1];
        for (i, a) in poly.iter().enumerate() {
            next[i] += *a;
            next[i + 1] -= *a * r;
        }
        poly = next;
    }
    let out: Vec<f64> = poly[1..].iter().map(|a| -a.re).collect();
    is_stable(&out).then_some(out)
}
