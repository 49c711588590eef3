//! Spectra of network operators on the zero-average subspace.
//!
//! Consensus analysis splits agent states into the constant (average)
//! direction and its orthogonal complement `H1`, the zero-sum subspace.
//! For a connected network the Laplacian restricted to `H1` has `n - 1`
//! strictly negative eigenvalues; the two extreme magnitudes
//!
//! ```text
//! ||D||        = |smallest eigenvalue on H1|
//! ||D^-1||^-1  = |largest  eigenvalue on H1|
//! ```
//!
//! drive every delay margin in [`crate::bounds`]. This module computes
//! them with a cyclic Jacobi eigensolver, and evaluates the pairwise
//! product norms `||L_i L_j||` needed by the non-uniform time-varying
//! margin.
//!
//! Product operators `L_i L_j` are generally not symmetric, and two norm
//! conventions disagree on them: the spectral radius and the operator
//! two-norm (largest singular value). The closed-form totals for complete
//! and ring networks come out of the spectral radius, so that is the
//! default; the two-norm is the conservative alternative and never
//! smaller.

use std::fmt;

use thiserror::Error;

use crate::graph::{AgentGraph, LaplacianMatrix};
use crate::matrix::SquareMatrix;
use crate::poly;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not symmetric (defect {defect:e} exceeds tolerance {tol:e})")]
    NotSymmetric { defect: f64, tol: f64 },
    #[error("matrix orders differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("graph is disconnected; the spectrum on the zero-sum subspace touches zero")]
    GraphDisconnected,
    #[error("eigenvalue iteration failed to converge ({context})")]
    ConvergenceFailure { context: &'static str },
}

/// Which norm to apply to (non-symmetric) product operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Largest eigenvalue modulus on the zero-sum subspace. Reproduces the
    /// closed-form totals for the complete and ring families.
    SpectralRadius,
    /// Largest singular value on the zero-sum subspace; submultiplicative,
    /// hence the safer choice inside worst-case bounds.
    OperatorTwoNorm,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormMode::SpectralRadius => write!(f, "radius"),
            NormMode::OperatorTwoNorm => write!(f, "two-norm"),
        }
    }
}

/// All eigenvalues of a symmetric matrix, ascending.
///
/// Cyclic Jacobi rotations with a deterministic sweep order; the
/// off-diagonal Frobenius norm is driven below `1e-12` relative to the
/// matrix scale.
///
/// ```
/// use delay_consensus::matrix::SquareMatrix;
/// use delay_consensus::spectral::symmetric_eigenvalues;
///
/// let m = SquareMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]);
/// let eigs = symmetric_eigenvalues(&m)?;
/// assert!((eigs[0] + 2.0).abs() < 1e-12);
/// assert!(eigs[1].abs() < 1e-12);
/// # Ok::<(), delay_consensus::SpectralError>(())
/// ```
pub fn symmetric_eigenvalues(m: &SquareMatrix) -> Result<Vec<f64>, SpectralError> {
    let scale = m.max_abs();
    let tol = 1e-12 * scale.max(1.0);
    let defect = m.symmetry_defect();
    if defect > tol {
        return Err(SpectralError::NotSymmetric { defect, tol });
    }
    jacobi_eigenvalues(m.clone())
}

fn off_diagonal_frobenius(a: &SquareMatrix) -> f64 {
    let n = a.order();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    sum.sqrt()
}

fn jacobi_eigenvalues(mut a: SquareMatrix) -> Result<Vec<f64>, SpectralError> {
    let n = a.order();
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = JACOBI_TOL * scale;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_frobenius(&a) <= target {
            let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            eigs.sort_by(f64::total_cmp);
            return Ok(eigs);
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(p, i)] = a[(i, p)];
                    a[(i, q)] = s * aip + c * aiq;
                    a[(q, i)] = a[(i, q)];
                }
                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    Err(SpectralError::ConvergenceFailure {
        context: "jacobi sweeps exhausted",
    })
}

/// Spectrum of the network operator on the zero-sum subspace, plus the two
/// extreme magnitudes every delay bound depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    /// The `n - 1` eigenvalues on the zero-sum subspace, ascending. All are
    /// strictly negative for a connected network. In the stacked operator
    /// each appears `multiplicity_factor` times.
    pub eigenvalues_h1: Vec<f64>,
    /// `|lambda_min|`, the largest eigenvalue magnitude.
    pub norm_delta: f64,
    /// `|lambda_max|`, the smallest nonzero eigenvalue magnitude.
    pub norm_delta_inv_inv: f64,
    /// Number of (numerically) zero eigenvalues in the full spectrum;
    /// exactly one for a connected network.
    pub zero_multiplicity: usize,
    /// Per-agent state dimension `d` carried through from the graph.
    pub multiplicity_factor: usize,
}

/// Eigenvalues of the Laplacian restricted to the zero-sum subspace,
/// dropping the structural zero of the constant direction.
///
/// The eigenvalue closest to zero is removed rather than thresholded, so a
/// tiny spectral gap cannot be misclassified.
///
/// ```
/// use delay_consensus::{spectral_summary, AgentGraph};
///
/// let g = AgentGraph::build(3, 2, &[(1, 2, 1.0, 1), (2, 3, 1.0, 1), (1, 3, 1.0, 2)])?;
/// let s = spectral_summary(&g).unwrap();
/// assert!((s.norm_delta - 3.0).abs() < 1e-12);
/// # Ok::<(), Box<dyn std::error::Error>>(())
/// ```
pub fn spectral_summary(g: &AgentGraph) -> Result<SpectralSummary, SpectralError> {
    if !g.is_connected() {
        return Err(SpectralError::GraphDisconnected);
    }
    let lap = g.laplacian();
    let eigs = symmetric_eigenvalues(lap.entries())?;
    let largest = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-9 * largest.max(1.0);
    let zero_multiplicity = eigs.iter().filter(|v| v.abs() <= zero_tol).count();
    let closest = eigs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.abs().total_cmp(&b.abs()))
        .map(|(i, _)| i)
        .expect("spectrum is nonempty");
    let mut eigenvalues_h1 = eigs;
    eigenvalues_h1.remove(closest);
    let norm_delta = eigenvalues_h1.first().map(|v| v.abs()).unwrap_or(0.0);
    let norm_delta_inv_inv = eigenvalues_h1.last().map(|v| v.abs()).unwrap_or(0.0);
    Ok(SpectralSummary {
        eigenvalues_h1,
        norm_delta,
        norm_delta_inv_inv,
        zero_multiplicity,
        multiplicity_factor: lap.multiplicity_factor(),
    })
}

/// `P m P` where `P = I - (1/n) 11^T` is the orthogonal projector onto the
/// zero-sum subspace.
pub fn project_h1(m: &SquareMatrix, n: usize) -> Result<SquareMatrix, SpectralError> {
    if m.order() != n {
        return Err(SpectralError::DimensionMismatch {
            left: m.order(),
            right: n,
        });
    }
    let nf = n as f64;
    let row_sums = m.row_sums();
    let col_sums: Vec<f64> = (0..n).map(|j| (0..n).map(|i| m[(i, j)]).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[(i, j)] - row_sums[i] / nf - col_sums[j] / nf + total / (nf * nf);
        }
    }
    Ok(out)
}

/// Expresses `m` in an orthonormal basis of the zero-sum subspace,
/// returning the `(n-1) x (n-1)` restriction. The restriction of a
/// symmetric matrix is symmetric, and its eigenvalues are exactly those of
/// `m` on the subspace, with the constant direction gone.
pub fn restrict_to_zero_sum(m: &SquareMatrix) -> SquareMatrix {
    let n = m.order();
    assert!(n >= 2, "restriction needs order >= 2");
    // Helmert basis: column k (1-based) has k entries 1/sqrt(k(k+1))
    // followed by -k/sqrt(k(k+1)).
    let basis_entry = |i: usize, k: usize| -> f64 {
        let kf = k as f64;
        let norm = (kf * (kf + 1.0)).sqrt();
        if i < k {
            1.0 / norm
        } else if i == k {
            -kf / norm
        } else {
            0.0
        }
    };
    // T = m * Q, then B = Q^T * T.
    let mut t = vec![vec![0.0; n - 1]; n];
    for (i, t_i) in t.iter_mut().enumerate() {
        for (k_idx, t_row) in t_i.iter_mut().enumerate() {
            let k = k_idx + 1;
            let mut acc = 0.0;
            for j in 0..=k {
                acc += m[(i, j)] * basis_entry(j, k);
            }
            *t_row = acc;
        }
    }
    let mut b = SquareMatrix::zeros(n - 1);
    for k_idx in 0..(n - 1) {
        let k = k_idx + 1;
        for l_idx in 0..(n - 1) {
            let mut acc = 0.0;
            for (i, t_i) in t.iter().enumerate().take(k + 1) {
                acc += basis_entry(i, k) * t_i[l_idx];
            }
            b[(k_idx, l_idx)] = acc;
        }
    }
    b
}

/// Norm of the product operator `a * b` on the zero-sum subspace.
///
/// With [`NormMode::SpectralRadius`]: power iteration on the projected
/// product, started from the zero-sum projection of `(1, 2, ..., n)`. If
/// the iteration stalls, the spectral radius is recovered from the
/// characteristic polynomial for orders up to 6.
pub fn product_norm(
    a: &LaplacianMatrix,
    b: &LaplacianMatrix,
    mode: NormMode,
) -> Result<f64, SpectralError> {
    if a.order() != b.order() {
        return Err(SpectralError::DimensionMismatch {
            left: a.order(),
            right: b.order(),
        });
    }
    let n = a.order();
    let product = a.entries().matmul(b.entries());
    let projected = project_h1(&product, n)?;
    match mode {
        NormMode::SpectralRadius => spectral_radius(&projected),
        NormMode::OperatorTwoNorm => {
            let gram = projected.transpose().matmul(&projected);
            let eigs = jacobi_eigenvalues(gram)?;
            Ok(eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt())
        }
    }
}

enum PowerOutcome {
    Converged(f64),
    /// The orbit fell into the numerical kernel.
    Collapsed,
    Stalled,
}

fn spectral_radius(m: &SquareMatrix) -> Result<f64, SpectralError> {
    let n = m.order();
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    // A single fixed start can be exactly orthogonal to the dominant
    // eigenspace (the projected ramp hits an interior eigenvector of path
    // graphs dead on), and the iteration would then converge cleanly to a
    // sub-dominant eigenvalue. Running the ramp plus every projected
    // coordinate direction spans the zero-sum subspace, so the maximum of
    // the converged estimates is the radius.
    let nf = n as f64;
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mean = (nf + 1.0) / 2.0;
    starts.push((0..n).map(|i| (i + 1) as f64 - mean).collect());
    for k in 0..n {
        starts.push(
            (0..n)
                .map(|i| if i == k { 1.0 - 1.0 / nf } else { -1.0 / nf })
                .collect(),
        );
    }
    let mut best: Option<f64> = None;
    let mut stalled = false;
    for start in starts {
        match power_iterate(m, start, scale) {
            PowerOutcome::Converged(radius) => {
                best = Some(best.map_or(radius, |b: f64| b.max(radius)));
            }
            PowerOutcome::Collapsed => {
                // Orbit died inside the numerical kernel; contributes zero.
                best = best.or(Some(0.0));
            }
            PowerOutcome::Stalled => stalled = true,
        }
    }
    if !stalled {
        if let Some(radius) = best {
            return Ok(radius);
        }
    }
    if n <= 6 {
        let coeffs = poly::characteristic_polynomial(m);
        if let Some(radius) = poly::max_root_modulus(&coeffs) {
            return Ok(radius);
        }
    }
    Err(SpectralError::ConvergenceFailure {
        context: "power iteration stalled on a product operator",
    })
}

fn power_iterate(m: &SquareMatrix, start: Vec<f64>, scale: f64) -> PowerOutcome {
    let mut x = start;
    let norm = vec_norm(&x);
    if norm == 0.0 {
        return PowerOutcome::Collapsed;
    }
    for v in &mut x {
        *v /= norm;
    }
    let mut estimate = f64::NAN;
    let mut stable_iters = 0usize;
    for _ in 0..POWER_MAX_ITERS {
        let y = m.matvec(&x);
        let y_norm = vec_norm(&y);
        // x has unit norm here, so a tiny image means the orbit reached
        // the numerical kernel.
        if y_norm <= 1e-14 * scale {
            return PowerOutcome::Collapsed;
        }
        let rayleigh: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        x = y;
        for v in &mut x {
            *v /= y_norm;
        }
        if (rayleigh - estimate).abs() <= POWER_TOL * estimate.abs().max(1.0) {
            stable_iters += 1;
            if stable_iters >= 3 {
                return PowerOutcome::Converged(rayleigh.abs());
            }
        } else {
            stable_iters = 0;
        }
        estimate = rayleigh;
    }
    PowerOutcome::Stalled
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The `r x r` table of pairwise product norms over delay classes, and its
/// grand total (the denominator of the non-uniform time-varying margin).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductNormTable {
    pub entries: Vec<Vec<f64>>,
    pub mode: NormMode,
    pub total: f64,
}

/// Evaluates `||L_i L_j||` for every ordered pair of delay classes.
///
/// `L_i L_j` and `L_j L_i` share their spectrum, and (because each factor
/// is symmetric) also their singular values, so the table is symmetric and
/// only the upper triangle is computed.
pub fn sum_product_norms(
    g: &AgentGraph,
    mode: NormMode,
) -> Result<ProductNormTable, SpectralError> {
    let subs = g.sub_laplacians();
    let r = subs.len();
    let mut entries = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in i..r {
            let value = product_norm(&subs[i], &subs[j], mode)?;
            entries[i][j] = value;
            entries[j][i] = value;
        }
    }
    let total = entries.iter().flatten().sum();
    Ok(ProductNormTable {
        entries,
        mode,
        total,
    })
}
