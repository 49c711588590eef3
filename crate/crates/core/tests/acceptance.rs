//! Acceptance suite: one test per numbered criterion, each printing a
//! PASS line (run with `-- --nocapture` to see them all); a failing
//! criterion panics with the measured values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use delay_consensus::bounds::{
    closed_form_margins, delay_independent_check, margin_constant_uniform, margin_decay_rate,
    margin_report, margin_timevarying_nonuniform, margin_timevarying_uniform, modal_rightmost_root,
    DelayIndependence, GraphFamily,
};
use delay_consensus::sim::{
    average_drift, classify, empirical_critical_delay, randomized_bounded_family, simulate,
    uniform_constant_family, Classification, DelaySignal, InitialCondition, SweepConfig,
};
use delay_consensus::{spectral_summary, AgentGraph, DelayPartition, NormMode};

fn triangle() -> AgentGraph {
    AgentGraph::build(3, 2, &[(1, 2, 1.0, 1), (2, 3, 1.0, 1), (1, 3, 1.0, 2)]).unwrap()
}

fn experiment_initial() -> InitialCondition {
    InitialCondition::Constant(vec![vec![2.0, 2.0], vec![2.0, -2.0], vec![1.0, 3.0]])
}

fn constant_pair(tau1: f64, tau2: f64) -> BTreeMap<usize, DelaySignal> {
    [
        (1, DelaySignal::constant(tau1)),
        (2, DelaySignal::constant(tau2)),
    ]
    .into()
}

#[test]
fn acceptance_1_triangle_margin() {
    let start = Instant::now();
    let g = triangle();
    let summary = spectral_summary(&g).unwrap();
    let margin = margin_constant_uniform(&summary);
    let elapsed = start.elapsed();

    assert!(
        (summary.norm_delta - 3.0).abs() < 1e-12,
        "norm {} != 3",
        summary.norm_delta
    );
    assert!((margin - PI / 6.0).abs() < 1e-12, "margin {margin} != pi/6");
    assert!(
        elapsed.as_secs_f64() < 1e-3,
        "pipeline took {elapsed:?}, limit 1 ms"
    );
    println!("acceptance 1: PASS (norm 3, margin pi/6, {elapsed:?})");
}

// The three reference experiments on the triangle, h = 1e-3, horizon 60.
//
// Measured behaviour of the delayed dynamics: at tau = 0.51 the rightmost
// characteristic root is about -0.0365, so over 60 time units the
// disagreement only contracts from ~3.0 to ~5.5e-2; reaching 1e-4 needs a
// horizon near 300 (see `dynamics_checks::experiment_one_reaches_1e4_by_300`).
// The `final < 1e-4` clause therefore cannot hold at horizon 60 and this
// test is expected to fail on part (a); parts (b) and (c) pass.
//
// Divergence at tau = 0.53 grows like e^(0.016 t): a factor of 2.87 over
// the window, far short of the default 1000x threshold, so the divergence
// threshold here is set to 2x the initial disagreement (the convergent
// runs peak at 1.03x, so the two regimes are cleanly separated).
#[test]
fn acceptance_2_reference_experiments() {
    let g = triangle();
    let initial = experiment_initial();
    let start = Instant::now();

    let run = |tau1: f64, tau2: f64| {
        let tr = simulate(&g, &constant_pair(tau1, tau2), &initial, 60.0, 1e-3).unwrap();
        let verdict = classify(&tr, 1e-4, 2.0 * tr.initial_disagreement());
        (verdict, tr)
    };

    let (v_a, tr_a) = run(0.51, 0.51);
    let (v_b, _) = run(0.53, 0.53);
    let (v_c, _) = run(0.1, 0.7);
    let elapsed = start.elapsed();

    assert_eq!(
        v_b.classification,
        Classification::Diverged,
        "experiment (b) tau = 0.53 must diverge"
    );
    println!("acceptance 2b: PASS (0.53 diverges)");
    assert_eq!(
        v_c.classification,
        Classification::Converged,
        "experiment (c) tau = (0.1, 0.7) must converge, final {}",
        v_c.final_disagreement
    );
    println!(
        "acceptance 2c: PASS (mixed delays converge, final {:.3e})",
        v_c.final_disagreement
    );
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "experiments took {elapsed:?}, limit 5 s"
    );

    assert_eq!(
        v_a.classification,
        Classification::Converged,
        "experiment (a) tau = 0.51: slow contraction (rightmost root -0.0365) \
         leaves final disagreement at {:.3e} by t = 60; the 1e-4 target needs \
         horizon ~300",
        tr_a.final_disagreement()
    );
    assert!(
        v_a.final_disagreement < 1e-4,
        "experiment (a) final disagreement {:.3e} >= 1e-4 at horizon 60",
        v_a.final_disagreement
    );
    println!("acceptance 2a: PASS");
}

#[test]
fn acceptance_3_closed_form_crosscheck() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut check = |family: GraphFamily, n: usize, delta: f64| {
        let g = match family {
            GraphFamily::Complete => {
                AgentGraph::complete(n, 1, delta, DelayPartition::PerEdge).unwrap()
            }
            GraphFamily::Loop => AgentGraph::ring(n, 1, delta, DelayPartition::PerEdge).unwrap(),
        };
        let summary = spectral_summary(&g).unwrap();
        let closed = closed_form_margins(family, n, delta).unwrap();
        let numeric = [
            margin_constant_uniform(&summary),
            margin_timevarying_uniform(&summary),
            margin_constant_uniform(&summary),
            margin_timevarying_nonuniform(&g, NormMode::SpectralRadius).unwrap(),
        ];
        let reference = [
            closed.constant_uniform,
            closed.timevarying_uniform,
            closed.constant_nonuniform,
            closed.timevarying_nonuniform,
        ];
        for (num, re) in numeric.iter().zip(&reference) {
            let rel = (num - re).abs() / re.abs();
            worst = worst.max(rel);
            assert!(
                rel < 1e-9,
                "{family} n={n} delta={delta}: numeric {num} vs closed {re} (rel {rel:.2e})"
            );
        }
    };
    for &delta in &[0.5, 1.0, 2.0] {
        for n in 2..=12 {
            check(GraphFamily::Complete, n, delta);
        }
        for n in 3..=24 {
            check(GraphFamily::Loop, n, delta);
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "crosscheck took {elapsed:?}, limit 1 s"
    );
    println!("acceptance 3: PASS (worst relative error {worst:.2e}, {elapsed:?})");
}

#[test]
fn acceptance_4_empirical_crossing() {
    let start = Instant::now();
    let cfg = SweepConfig {
        horizon: 300.0,
        h_step: 2e-3,
        ..Default::default()
    };

    let g = triangle();
    let initial = experiment_initial();
    let critical = empirical_critical_delay(
        &g,
        &initial,
        uniform_constant_family(g.num_classes()),
        (0.3, 0.8),
        &cfg,
    )
    .unwrap();
    let target = PI / 6.0;
    assert!(
        (critical - target).abs() < 0.01,
        "triangle crossing {critical} vs pi/6 {target}"
    );

    let k4 = AgentGraph::complete(4, 1, 1.0, DelayPartition::Uniform).unwrap();
    let k4_initial = InitialCondition::Constant(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
    let critical_k4 = empirical_critical_delay(
        &k4,
        &k4_initial,
        uniform_constant_family(1),
        (0.1, 0.6),
        &cfg,
    )
    .unwrap();
    let target_k4 = PI / 8.0;
    assert!(
        (critical_k4 - target_k4).abs() < 0.01,
        "K4 crossing {critical_k4} vs pi/8 {target_k4}"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "crossing search took {elapsed:?}, limit 30 s"
    );
    println!(
        "acceptance 4: PASS (triangle {critical:.4} ~ {target:.4}, K4 {critical_k4:.4} ~ {target_k4:.4}, {elapsed:?})"
    );
}

// Average invariance. The integrator preserves the network average
// structurally (every sub-Laplacian has zero column sums), so the measured
// drift is rounding noise near 1e-13 at any step size -- far below the
// 1e-6 requirement, but with no h^4 component left to shrink: halving the
// step moves the noise floor sideways (measured ~6.4e-14 at h = 1e-3 vs
// ~4.1e-14 at h = 5e-4, a factor of 1.6). The >= 8x reduction clause
// assumes a truncation-dominated drift and cannot hold here; this test is
// expected to fail on that final assertion.
#[test]
fn acceptance_5_average_invariance() {
    let g = triangle();
    let initial = experiment_initial();

    let convergent_runs = [(0.51, 0.51, 60.0), (0.1, 0.7, 60.0), (0.0, 0.0, 60.0)];
    for &(tau1, tau2, horizon) in &convergent_runs {
        let tr = simulate(&g, &constant_pair(tau1, tau2), &initial, horizon, 1e-3).unwrap();
        let drift = average_drift(&tr);
        assert!(drift < 1e-6, "drift {drift:.3e} at delays ({tau1}, {tau2})");
    }
    println!("acceptance 5 (bound): PASS (all convergent runs drift < 1e-6)");

    let drift_full =
        average_drift(&simulate(&g, &constant_pair(0.51, 0.51), &initial, 60.0, 1e-3).unwrap());
    let drift_half =
        average_drift(&simulate(&g, &constant_pair(0.51, 0.51), &initial, 60.0, 5e-4).unwrap());
    assert!(
        drift_half <= drift_full / 8.0,
        "halving h: drift {drift_full:.3e} -> {drift_half:.3e}; the average is \
         conserved structurally, so both are rounding noise and no 8x \
         truncation-order reduction exists"
    );
    println!("acceptance 5 (order): PASS");
}

#[test]
fn acceptance_6_constant_delay_grid() {
    let start = Instant::now();
    let g = triangle();
    let initial = experiment_initial();
    let top = 0.97 * PI / 6.0;
    let mut converged = 0;
    for i in 0..5 {
        for j in 0..5 {
            let tau1 = top * i as f64 / 4.0;
            let tau2 = top * j as f64 / 4.0;
            let tr = simulate(&g, &constant_pair(tau1, tau2), &initial, 450.0, 1e-3).unwrap();
            let verdict = classify(&tr, 1e-6, 1e3 * tr.initial_disagreement());
            assert_eq!(
                verdict.classification,
                Classification::Converged,
                "grid point ({tau1:.4}, {tau2:.4}) final {:.3e}",
                verdict.final_disagreement
            );
            converged += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "grid took {elapsed:?}, limit 60 s"
    );
    println!("acceptance 6: PASS ({converged}/25 converged, {elapsed:?})");
}

#[test]
fn acceptance_7_delay_independent() {
    let start = Instant::now();

    // Strongly weighted zero-delay path dominates the delayed unit edge.
    let dominant =
        AgentGraph::build(3, 1, &[(1, 2, 10.0, 1), (2, 3, 10.0, 1), (1, 3, 1.0, 2)]).unwrap();
    assert_eq!(
        delay_independent_check(&dominant, 1).unwrap(),
        DelayIndependence::HoldsStrict
    );
    let initial = InitialCondition::Constant(vec![vec![3.0], vec![-1.0], vec![1.0]]);
    for &(tau, horizon, h) in &[(1.0, 60.0, 0.02), (10.0, 200.0, 0.05), (50.0, 1000.0, 0.05)] {
        let signals: BTreeMap<usize, DelaySignal> = [
            (1, DelaySignal::constant(0.0)),
            (2, DelaySignal::constant(tau)),
        ]
        .into();
        let tr = simulate(&dominant, &signals, &initial, horizon, h).unwrap();
        let verdict = classify(&tr, 1e-6, 1e3 * tr.initial_disagreement());
        assert_eq!(
            verdict.classification,
            Classification::Converged,
            "delayed edge at tau = {tau} must still converge, final {:.3e}",
            verdict.final_disagreement
        );
    }

    // Equal weights: a single zero-delay edge cannot dominate the path.
    assert_eq!(
        delay_independent_check(&triangle(), 2).unwrap(),
        DelayIndependence::Fails
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "delay-independent checks took {elapsed:?}, limit 10 s"
    );
    println!("acceptance 7: PASS (HoldsStrict converges at tau up to 50, equal-weight case Fails, {elapsed:?})");
}

#[test]
fn acceptance_8_decay_rate_curve() {
    let g = triangle();
    let summary = spectral_summary(&g).unwrap();
    let nd = summary.norm_delta;

    let mut prev = f64::INFINITY;
    for k in 0..=10 {
        let h = 0.3 * k as f64;
        let tau = margin_decay_rate(&summary, h).unwrap();
        assert!(tau < prev, "curve not strictly decreasing at h = {h}");
        prev = tau;
        if k == 0 {
            assert!((tau - PI / 6.0).abs() < 1e-12, "tau_0 = {tau}");
        }
        if k == 10 {
            assert!(tau == 0.0, "tau at h = ||D|| is {tau}");
        }
        // Residual of the defining equation at the returned delay.
        if h > 0.0 && h < nd {
            let omega = (nd * nd * (2.0 * h * tau).exp() - h * h).sqrt();
            let residual = nd * (h * tau).exp() * (tau * omega).cos() - h;
            assert!(residual.abs() < 1e-8, "residual {residual:.2e} at h = {h}");
        }
    }
    println!("acceptance 8 (curve): PASS (strictly decreasing, endpoints pi/6 and 0)");

    // Guaranteed decay: run at 0.9 tau_{1.5} and fit the disagreement
    // envelope over the final half of a 16-unit horizon (long enough for
    // the slow mode to dominate, short enough to stay above the floating
    // point floor).
    let tau_run = 0.9 * margin_decay_rate(&summary, 1.5).unwrap();
    let initial = experiment_initial();
    let tr = simulate(&g, &constant_pair(tau_run, tau_run), &initial, 16.0, 1e-3).unwrap();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &t) in tr.times.iter().enumerate() {
        if t >= 8.0 {
            let worst = tr.disagreement[i].iter().copied().fold(0.0, f64::max);
            xs.push(t);
            ys.push(worst.ln());
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let limit = -0.8 * 1.5 * 0.9;
    assert!(
        slope <= limit,
        "log-disagreement slope {slope:.3} above {limit:.3}"
    );
    println!("acceptance 8 (rate): PASS (slope {slope:.3} <= {limit:.3})");
}

#[test]
fn acceptance_9_modal_oracle() {
    let below = modal_rightmost_root(-3.0, 0.51).unwrap();
    let above = modal_rightmost_root(-3.0, 0.53).unwrap();
    assert!(
        below.re < 0.0 && above.re > 0.0,
        "roots {below:?} / {above:?} do not bracket the crossing"
    );
    // Bisect the sign change of the rightmost root's real part: it must
    // sit at pi/6, confirming the margin without any simulation.
    let (mut lo, mut hi) = (0.51, 0.53);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if modal_rightmost_root(-3.0, mid).unwrap().re < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let crossing = 0.5 * (lo + hi);
    assert!(
        (crossing - PI / 6.0).abs() < 1e-6,
        "modal crossing {crossing} vs pi/6"
    );
    println!(
        "acceptance 9: PASS (re {:.4} < 0 < re {:.4}, crossing {crossing:.8} = pi/6)",
        below.re, above.re
    );
}

// Tightness of the time-varying bounds in the destabilizing direction has
// no constructible worst-case signal; the substitute is one-sided: across
// randomized sinusoidal/sawtooth signals bounded strictly below the
// respective margin, no run may diverge.
#[test]
fn acceptance_one_sided_time_varying() {
    let runs_per_case = 20;
    let mut checked = 0;

    let mut check = |g: &AgentGraph, initial: &InitialCondition, bound: f64, shared: bool| {
        let family = randomized_bounded_family(g.num_classes(), shared);
        for seed in 0..runs_per_case {
            let signals = family(bound, 0xACCE_0000 + seed);
            let tr = simulate(g, &signals, initial, 40.0, 5e-3).unwrap();
            let verdict = classify(&tr, 1e-6, 1e3 * tr.initial_disagreement());
            assert_ne!(
                verdict.classification,
                Classification::Diverged,
                "bound {bound} seed {seed} diverged"
            );
            checked += 1;
        }
    };

    let g = triangle();
    let initial = experiment_initial();
    let s = spectral_summary(&g).unwrap();
    check(&g, &initial, 0.97 * margin_timevarying_uniform(&s), true);
    let nonuniform = margin_timevarying_nonuniform(&g, NormMode::SpectralRadius).unwrap();
    check(&g, &initial, 0.97 * nonuniform, false);

    let k4 = AgentGraph::complete(4, 1, 1.0, DelayPartition::PerEdge).unwrap();
    let k4_initial = InitialCondition::Constant(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
    let s4 = spectral_summary(&k4).unwrap();
    check(
        &k4,
        &k4_initial,
        0.97 * margin_timevarying_uniform(&s4),
        true,
    );
    let nonuniform4 = margin_timevarying_nonuniform(&k4, NormMode::SpectralRadius).unwrap();
    check(&k4, &k4_initial, 0.97 * nonuniform4, false);

    println!("acceptance one-sided: PASS ({checked} randomized bounded runs, none diverged)");
}

// Sanity check on the margin report shape used by the front end.
#[test]
fn acceptance_report_fields() {
    let report = margin_report(&triangle(), NormMode::SpectralRadius, &[], None).unwrap();
    assert_eq!(report.constant_uniform, report.constant_nonuniform);
    assert!(report.timevarying_uniform < report.constant_uniform);
    let text = report.to_text();
    for field in [
        "constant_uniform",
        "timevarying_uniform",
        "constant_nonuniform",
        "timevarying_nonuniform",
        "norm_mode",
        "decay_margins",
        "delay_independent",
    ] {
        assert!(text.contains(field));
    }
}
