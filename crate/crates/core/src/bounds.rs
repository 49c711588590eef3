//! Worst-case delay margins for the consensus protocol.
//!
//! For a connected network with operator norm `||D|| = |lambda_min|` the
//! margins are, by delay model:
//!
//! ```text
//!                    uniform             non-uniform
//! constant delays    pi / (2 ||D||)      pi / (2 ||D||)
//! time-varying       3 / (2 ||D||)       1 / (sum_{i,i'} ||D_i D_i'|| * ||D^-1||)
//! ```
//!
//! The three spectral bounds are exact: consensus holds for every delay
//! pattern bounded by `tau < margin` and fails for some pattern at any
//! larger bound. The non-uniform time-varying bound is sufficient only.
//! All margins are open intervals: stability is guaranteed strictly
//! below the value, never at it.
//!
//! Two further diagnostics live here: the largest delay that still
//! guarantees a prescribed exponential decay rate `h`, obtained by solving
//!
//! ```text
//! ||D|| e^(h tau) cos(tau sqrt(||D||^2 e^(2 h tau) - h^2)) = h
//! ```
//!
//! for the smallest nonnegative root, and the delay-independent condition:
//! when one class has zero delay and its quadratic form strictly dominates
//! the sum of the others on the zero-sum subspace, consensus survives
//! arbitrarily large delays on the remaining classes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::graph::AgentGraph;
use crate::spectral::{
    restrict_to_zero_sum, spectral_summary, sum_product_norms, symmetric_eigenvalues, NormMode,
    SpectralError, SpectralSummary,
};

/// Verdict tolerance for the delay-independent eigenvalue test.
const INDEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("decay rate {h} exceeds the operator norm {norm_delta}; no delay achieves it")]
    DecayRateTooLarge { h: f64, norm_delta: f64 },
    #[error("delay class {class} outside 1..={num_classes}")]
    UnknownClass { class: usize, num_classes: usize },
    #[error("{family} family undefined for n = {n} (needs n >= {min})")]
    BadSize {
        family: GraphFamily,
        n: usize,
        min: usize,
    },
    #[error("root search did not converge")]
    NoConvergence,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// The two benchmark families with closed-form margins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFamily {
    Complete,
    Loop,
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFamily::Complete => write!(f, "complete"),
            GraphFamily::Loop => write!(f, "loop"),
        }
    }
}

/// Outcome of the delay-independent dominance test for one zero-delay class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayIndependence {
    /// Strict dominance: consensus for arbitrary delays on the other
    /// classes, with exponential convergence.
    HoldsStrict,
    /// The non-strict necessary condition holds but strict dominance
    /// fails; no sufficiency conclusion.
    HoldsWeak,
    /// Dominance fails; delay-independent consensus is impossible.
    Fails,
}

impl fmt::Display for DelayIndependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayIndependence::HoldsStrict => write!(f, "HoldsStrict"),
            DelayIndependence::HoldsWeak => write!(f, "HoldsWeak"),
            DelayIndependence::Fails => write!(f, "Fails"),
        }
    }
}

/// Every margin for one network, plus optional decay-rate and
/// delay-independent diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub constant_uniform: f64,
    pub timevarying_uniform: f64,
    /// Equal to `constant_uniform`: robustness to non-uniform constant
    /// delays costs nothing.
    pub constant_nonuniform: f64,
    pub timevarying_nonuniform: f64,
    /// Which product-norm convention produced `timevarying_nonuniform`.
    pub norm_mode: NormMode,
    /// `(h, tau_h)` pairs: the largest delay guaranteeing decay rate `h`.
    pub decay_margins: Option<Vec<(f64, f64)>>,
    /// Delay-independent verdict per tested zero-delay class.
    pub delay_independent: BTreeMap<usize, DelayIndependence>,
}

impl MarginReport {
    /// Renders the report as `key = value` lines. Margins are open bounds:
    /// consensus is guaranteed for delays strictly below each value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("constant_uniform = {}\n", self.constant_uniform));
        out.push_str(&format!(
            "timevarying_uniform = {}\n",
            self.timevarying_uniform
        ));
        out.push_str(&format!(
            "constant_nonuniform = {}\n",
            self.constant_nonuniform
        ));
        out.push_str(&format!(
            "timevarying_nonuniform = {}\n",
            self.timevarying_nonuniform
        ));
        out.push_str(&format!("norm_mode = {}\n", self.norm_mode));
        match &self.decay_margins {
            None => out.push_str("decay_margins = none\n"),
            Some(pairs) => {
                let body: Vec<String> = pairs
                    .iter()
                    .map(|(h, tau)| format!("({h}, {tau})"))
                    .collect();
                out.push_str(&format!("decay_margins = [{}]\n", body.join(", ")));
            }
        }
        let verdicts: Vec<String> = self
            .delay_independent
            .iter()
            .map(|(class, verdict)| format!("{class}: {verdict}"))
            .collect();
        out.push_str(&format!(
            "delay_independent = {{{}}}\n",
            verdicts.join(", ")
        ));
        out
    }
}

/// Margin for a single constant network-wide delay: `pi / (2 ||D||)`.
/// Exact: the slowest mode crosses the imaginary axis precisely there.
pub fn margin_constant_uniform(s: &SpectralSummary) -> f64 {
    PI / (2.0 * s.norm_delta)
}

/// Margin for one arbitrarily time-varying bounded delay: `3 / (2 ||D||)`.
/// Exact over the whole class of bounded measurable delays, and necessarily
/// smaller than the constant-delay margin.
pub fn margin_timevarying_uniform(s: &SpectralSummary) -> f64 {
    1.5 / s.norm_delta
}

/// Sufficient margin for per-class time-varying delays:
/// `||D^-1||^-1 / (sum over class pairs of ||D_i D_i'||)`.
pub fn margin_timevarying_nonuniform(g: &AgentGraph, mode: NormMode) -> Result<f64, BoundsError> {
    let summary = spectral_summary(g)?;
    let table = sum_product_norms(g, mode)?;
    Ok(summary.norm_delta_inv_inv / table.total)
}

/// Largest delay under which the disagreement still decays like
/// `e^(-h t)`, for `0 <= h <= ||D||`.
///
/// The endpoints are exact: `tau_0` is the constant-uniform margin and
/// `tau_{||D||}` is zero. In between the defining equation is bracketed on
/// `[0, pi/(2||D||)]` and bisected to an absolute tolerance of `1e-10`.
pub fn margin_decay_rate(s: &SpectralSummary, h: f64) -> Result<f64, BoundsError> {
    assert!(h >= 0.0, "decay rate must be nonnegative");
    let nd = s.norm_delta;
    if h > nd {
        return Err(BoundsError::DecayRateTooLarge { h, norm_delta: nd });
    }
    if h == 0.0 {
        return Ok(PI / (2.0 * nd));
    }
    if h == nd {
        return Ok(0.0);
    }
    let residual = |tau: f64| -> f64 {
        let omega = (nd * nd * (2.0 * h * tau).exp() - h * h).sqrt();
        nd * (h * tau).exp() * (tau * omega).cos() - h
    };
    // The residual starts at nd - h > 0 and oscillates with a growing
    // frequency; march to the first sign change so the bisection cannot
    // skip to a later crossing, then tighten.
    let right = PI / (2.0 * nd);
    let segments = 4096;
    let mut lo = 0.0;
    let mut hi = right;
    let mut bracketed = false;
    for k in 1..=segments {
        let tau = right * k as f64 / segments as f64;
        if residual(tau) <= 0.0 {
            lo = right * (k - 1) as f64 / segments as f64;
            hi = tau;
            bracketed = true;
            break;
        }
    }
    if !bracketed {
        return Err(BoundsError::NoConvergence);
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Tests whether the zero-delay class `zero_class` dominates the remaining
/// classes strictly on the zero-sum subspace.
///
/// Forms `D = sum_{i != zero_class} L_i - L_zero_class`, restricts it to
/// the zero-sum subspace and inspects the smallest eigenvalue `mu`:
/// positive means dominance holds strictly (consensus for arbitrary delays
/// on the other classes), zero within tolerance means only the non-strict
/// necessary condition holds, negative means the condition fails.
pub fn delay_independent_check(
    g: &AgentGraph,
    zero_class: usize,
) -> Result<DelayIndependence, BoundsError> {
    if zero_class == 0 || zero_class > g.num_classes() {
        return Err(BoundsError::UnknownClass {
            class: zero_class,
            num_classes: g.num_classes(),
        });
    }
    if !g.is_connected() {
        return Err(BoundsError::Spectral(SpectralError::GraphDisconnected));
    }
    let subs = g.sub_laplacians();
    let n = g.agent_count();
    let mut diff = crate::matrix::SquareMatrix::zeros(n);
    for (idx, sub) in subs.iter().enumerate() {
        let sign = if idx + 1 == zero_class { -1.0 } else { 1.0 };
        diff.add_scaled(sub.entries(), sign);
    }
    let restricted = restrict_to_zero_sum(&diff);
    let eigs = symmetric_eigenvalues(&restricted)?;
    let mu = eigs[0];
    Ok(if mu > INDEPENDENCE_TOL {
        DelayIndependence::HoldsStrict
    } else if mu >= -INDEPENDENCE_TOL {
        DelayIndependence::HoldsWeak
    } else {
        DelayIndependence::Fails
    })
}

/// Closed-form margins for the complete and ring families with uniform
/// weight `delta` and one delay class per edge; no eigensolve involved.
///
/// For the complete graph on `n` agents, `||D|| = ||D^-1||^-1 = n delta`
/// and the product-norm total is `delta^2 n^2 (n-1)`. For the ring,
/// `||D|| = 4 delta sin^2(floor(n/2) pi / n)`,
/// `||D^-1||^-1 = 4 delta sin^2(pi / n)` and the total is `6 delta^2 n`.
pub fn closed_form_margins(
    family: GraphFamily,
    n: usize,
    delta: f64,
) -> Result<MarginReport, BoundsError> {
    assert!(delta > 0.0, "weight must be positive");
    let min = match family {
        GraphFamily::Complete => 2,
        GraphFamily::Loop => 3,
    };
    if n < min {
        return Err(BoundsError::BadSize { family, n, min });
    }
    let nf = n as f64;
    let (norm_delta, timevarying_nonuniform) = match family {
        GraphFamily::Complete => (nf * delta, 1.0 / (delta * nf * (nf - 1.0))),
        GraphFamily::Loop => {
            let norm = 4.0 * delta * ((n / 2) as f64 * PI / nf).sin().powi(2);
            let inv = 2.0 * (PI / nf).sin().powi(2) / (3.0 * delta * nf);
            (norm, inv)
        }
    };
    let constant = PI / (2.0 * norm_delta);
    Ok(MarginReport {
        constant_uniform: constant,
        timevarying_uniform: 1.5 / norm_delta,
        constant_nonuniform: constant,
        timevarying_nonuniform,
        norm_mode: NormMode::SpectralRadius,
        decay_margins: None,
        delay_independent: BTreeMap::new(),
    })
}

/// Runs the whole margin pipeline on one network: the four margins, the
/// decay-rate curve at the requested rates, and the delay-independent
/// verdict for an optional zero-delay class.
pub fn margin_report(
    g: &AgentGraph,
    mode: NormMode,
    decay_rates: &[f64],
    zero_class: Option<usize>,
) -> Result<MarginReport, BoundsError> {
    let summary = spectral_summary(g)?;
    let constant = margin_constant_uniform(&summary);
    let table = sum_product_norms(g, mode)?;
    let timevarying_nonuniform = summary.norm_delta_inv_inv / table.total;
    let decay_margins = if decay_rates.is_empty() {
        None
    } else {
        let mut pairs = Vec::with_capacity(decay_rates.len());
        for &h in decay_rates {
            pairs.push((h, margin_decay_rate(&summary, h)?));
        }
        Some(pairs)
    };
    let mut delay_independent = BTreeMap::new();
    if let Some(class) = zero_class {
        delay_independent.insert(class, delay_independent_check(g, class)?);
    }
    Ok(MarginReport {
        constant_uniform: constant,
        timevarying_uniform: margin_timevarying_uniform(&summary),
        constant_nonuniform: constant,
        timevarying_nonuniform,
        norm_mode: mode,
        decay_margins,
        delay_independent,
    })
}

/// A root of the scalar mode equation, as a point in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalRoot {
    pub re: f64,
    pub im: f64,
}

/// Rightmost root of `s = lambda e^(-s tau)` for a single negative mode.
///
/// Each Laplacian eigenvalue `lambda < 0` contributes one scalar delayed
/// mode; its rightmost characteristic root crosses the imaginary axis
/// exactly at `tau = pi / (2 |lambda|)`, which makes this a simulation-free
/// oracle for the constant-delay margin. Newton iteration from a seed grid
/// over `Re in [-5|lambda|, |lambda|]`, `Im in [0, 2 pi / tau]`.
pub fn modal_rightmost_root(lambda: f64, tau: f64) -> Result<ModalRoot, BoundsError> {
    assert!(lambda < 0.0, "mode must be stable without delay");
    assert!(tau >= 0.0, "delay must be nonnegative");
    if tau == 0.0 {
        return Ok(ModalRoot {
            re: lambda,
            im: 0.0,
        });
    }
    let mag = lambda.abs();
    let im_span = 2.0 * PI / tau.max(1e-9);
    let mut best: Option<ModalRoot> = None;
    for re_idx in 0..=10 {
        let re_seed = -5.0 * mag + (re_idx as f64) * 0.6 * mag;
        for im_idx in 0..=12 {
            let im_seed = (im_idx as f64) / 12.0 * im_span;
            if let Some(root) = newton_mode_root(lambda, tau, re_seed, im_seed) {
                let better = match best {
                    None => true,
                    Some(b) => root.re > b.re + 1e-12,
                };
                if better {
                    best = Some(root);
                }
            }
        }
    }
    best.ok_or(BoundsError::NoConvergence)
}

fn newton_mode_root(lambda: f64, tau: f64, mut re: f64, mut im: f64) -> Option<ModalRoot> {
    let scale = lambda.abs().max(1.0);
    for _ in 0..100 {
        // e^(-tau s)
        let er = (-tau * re).exp();
        let (c, s) = ((-tau * im).cos(), (-tau * im).sin());
        let (exp_re, exp_im) = (er * c, er * s);
        let f_re = re - lambda * exp_re;
        let f_im = im - lambda * exp_im;
        let f_mag = (f_re * f_re + f_im * f_im).sqrt();
        let s_mag = (re * re + im * im).sqrt();
        if f_mag <= 1e-12 * (1.0 + s_mag) * scale {
            return Some(ModalRoot { re, im: im.abs() });
        }
        // F'(s) = 1 + lambda tau e^(-tau s)
        let d_re = 1.0 + lambda * tau * exp_re;
        let d_im = lambda * tau * exp_im;
        let denom = d_re * d_re + d_im * d_im;
        if denom < 1e-30 {
            return None;
        }
        let step_re = (f_re * d_re + f_im * d_im) / denom;
        let step_im = (f_im * d_re - f_re * d_im) / denom;
        re -= step_re;
        im -= step_im;
        if !re.is_finite() || !im.is_finite() {
            return None;
        }
    }
    None
}
