//! Characteristic polynomials of small matrices and their root moduli.
//!
//! This is the fallback path for the spectral radius of product operators
//! when power iteration stalls; it is only ever invoked for order <= 6.

use crate::matrix::SquareMatrix;

/// Monic characteristic polynomial coefficients `[1, c1, ..., cn]` of `m`,
/// i.e. `det(x I - m) = x^n + c1 x^(n-1) + ... + cn`, via the
/// Faddeev-LeVerrier recursion.
pub(crate) fn characteristic_polynomial(m: &SquareMatrix) -> Vec<f64> {
    let n = m.order();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut work = SquareMatrix::zeros(n); // M_0 = 0
    for k in 1..=n {
        // M_k = A * (M_{k-1} + c_{k-1} I)
        let mut shifted = work.clone();
        let c_prev = *coeffs.last().unwrap();
        for i in 0..n {
            shifted[(i, i)] += c_prev;
        }
        work = m.matmul(&shifted);
        let trace: f64 = (0..n).map(|i| work[(i, i)]).sum();
        coeffs.push(-trace / k as f64);
    }
    coeffs
}

/// Largest root modulus of a monic real polynomial, by Durand-Kerner
/// iteration on all roots simultaneously. Returns `None` when the
/// iteration fails to settle.
pub(crate) fn max_root_modulus(coeffs: &[f64]) -> Option<f64> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Some(0.0);
    }
    // Cauchy bound on the root moduli.
    let bound = 1.0 + coeffs[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let eval = |re: f64, im: f64| -> (f64, f64) {
        let mut pr = 0.0;
        let mut pi = 0.0;
        for &c in coeffs {
            let nr = pr * re - pi * im + c;
            let ni = pr * im + pi * re;
            pr = nr;
            pi = ni;
        }
        (pr, pi)
    };

    // Standard non-real starting spread (0.4 + 0.9i)^k, scaled to the bound.
    let mut roots: Vec<(f64, f64)> = Vec::with_capacity(deg);
    let (mut sr, mut si) = (1.0, 0.0);
    for _ in 0..deg {
        let nr = sr * 0.4 - si * 0.9;
        let ni = sr * 0.9 + si * 0.4;
        sr = nr;
        si = ni;
        roots.push((sr * bound, si * bound));
    }

    for _ in 0..500 {
        let mut worst_step = 0.0f64;
        for i in 0..deg {
            let (ri, ii) = roots[i];
            let (mut dr, mut di) = (1.0, 0.0);
            for (j, &(rj, ij)) in roots.iter().enumerate() {
                if i == j {
                    continue;
                }
                let (er, ei) = (ri - rj, ii - ij);
                let nr = dr * er - di * ei;
                let ni = dr * ei + di * er;
                dr = nr;
                di = ni;
            }
            let den = dr * dr + di * di;
            if den == 0.0 {
                return None;
            }
            let (pr, pi) = eval(ri, ii);
            let qr = (pr * dr + pi * di) / den;
            let qi = (pi * dr - pr * di) / den;
            roots[i] = (ri - qr, ii - qi);
            worst_step = worst_step.max((qr * qr + qi * qi).sqrt());
        }
        if worst_step <= 1e-13 * bound.max(1.0) {
            let radius = roots
                .iter()
                .map(|(r, i)| (r * r + i * i).sqrt())
                .fold(0.0f64, f64::max);
            return Some(radius);
        }
    }
    None
}
