use satstack_core::saturation::quartic_reference;
use satstack_core::simulate::{
    derivative_discrepancy, integrate_closed_loop, run_counterexample, settle_time, simulate_and_verify,
    verify_linear_region_entry, verify_p_bounded, Counterexample, DerivativeMethod, SimConfig,
};
use satstack_core::synthesis::{assemble_feedback, NestedFeedbackLaw, SynthesisConfig};

const X0: [f64; 3] = [446.7937, -69.875, 11.05];
const BUDGETS: [f64; 3] = [2.0, 20.0, 18.0];

fn law() -> NestedFeedbackLaw {
    let mut cfg = SynthesisConfig::new(vec![quartic_reference(2); 3], BUDGETS.to_vec());
    cfg.inner_max_overrides = vec![Some(1.0 / 12.0), None];
    cfg.lambda_override = Some(6.5);
    assemble_feedback(&cfg).unwrap()
}

fn cfg(step: f64, horizon: f64, method: DerivativeMethod) -> SimConfig {
    SimConfig {
        step,
        horizon,
        settle_tolerance: 1e-3,
        derivative_method: method,
    }
}

#[test]
fn origin_is_an_equilibrium() {
    let law = law();
    let t = integrate_closed_loop(&law, &[0.0; 3], &cfg(0.01, 10.0, DerivativeMethod::Analytic)).unwrap();
    assert!(t.states.iter().all(|x| x.iter().all(|v| v.abs() <= 1e-12)));
    assert!(t.u.iter().all(|u| *u == 0.0));
    let r = verify_p_bounded(&t, &law, &BUDGETS, Some(&law.bounds), 1e-3);
    assert_eq!(r.sup_abs_u_deriv, vec![0.0, 0.0]);
    assert_eq!(r.settle_time, Some(0.0));
    assert_eq!(verify_linear_region_entry(&t, &law), Some(0.0));
    assert_eq!(r.linear_region_entry, Some(0.0));
}

#[test]
fn reference_run_is_consistent() {
    let law = law();
    let t = integrate_closed_loop(&law, &X0, &cfg(0.005, 150.0, DerivativeMethod::Both)).unwrap();
    // stored u is the feedback of the stored state
    for (x, u) in t.states.iter().zip(&t.u) {
        assert!((law.eval(x).unwrap() - u).abs() <= 1e-12);
        assert!(u.abs() <= 2.0);
    }
    let r = verify_p_bounded(&t, &law, &BUDGETS, Some(&law.bounds), 1e-3);
    assert!(r.all_budgets_pass() && r.all_bounds_sound());
    assert_eq!(r.settle_time, settle_time(&t, 1e-3));
    assert_eq!(r.linear_region_entry, verify_linear_region_entry(&t, &law));
    let (disc, _) = derivative_discrepancy(&t, &law);
    assert!(disc.iter().all(|d| *d <= 1e-4), "{disc:?}");

    let streamed = simulate_and_verify(&law, &X0, &cfg(0.005, 150.0, DerivativeMethod::Analytic), &BUDGETS).unwrap();
    assert_eq!(streamed, r);
}

#[test]
fn closed_loop_is_linear_after_entry() {
    let law = law();
    let t = integrate_closed_loop(&law, &X0, &cfg(0.01, 40.0, DerivativeMethod::Analytic)).unwrap();
    let entry = verify_linear_region_entry(&t, &law).expect("enters linear region");
    let a = law.alpha();
    let k0 = t.times.iter().position(|&s| s >= entry).unwrap();
    let lin = law.linear_thresholds();
    for k in k0..t.len() {
        let y = law.coords.apply(&t.states[k]);
        assert!((t.u[k] + a * y.iter().sum::<f64>()).abs() <= 1e-12);
        assert!(t.nested_args[k].iter().zip(&lin).all(|(z, l)| z.abs() <= *l));
    }
}

#[test]
fn small_states_stay_linear() {
    let law = law();
    let x0 = [1e-3, -1e-3, 1e-3];
    let t = integrate_closed_loop(&law, &x0, &cfg(0.01, 50.0, DerivativeMethod::Analytic)).unwrap();
    assert_eq!(verify_linear_region_entry(&t, &law), Some(0.0));
}

#[test]
fn single_integrator_approaches_without_overshoot() {
    let cfg_s = SynthesisConfig::new(vec![quartic_reference(2)], vec![1.0, 1.0, 1.0]);
    let law = assemble_feedback(&cfg_s).unwrap();
    let t = integrate_closed_loop(&law, &[5.0], &cfg(0.01, 60.0, DerivativeMethod::Analytic)).unwrap();
    let xs: Vec<f64> = t.states.iter().map(|x| x[0]).collect();
    assert!(xs.windows(2).all(|w| w[1] <= w[0] && w[1] >= 0.0));
}

#[test]
fn harmonic_oscillator_rate_grows() {
    let sigma = quartic_reference(2);
    let r = run_counterexample(
        &Counterexample::HarmonicOscillator,
        &sigma,
        &[0.0, 10.0, 100.0, 1000.0],
        1e-3,
        2.0,
    )
    .unwrap();
    assert_eq!(r.rows[0].sup_rate, 0.0);
    // |u̇(0)| = σ'(0)|x_1| with σ'(0) = 1
    for row in &r.rows[1..] {
        assert!((row.initial_rate - row.scale).abs() < 1e-9);
    }
    assert!(r.strictly_increasing());
}

#[test]
fn rk4_observed_order() {
    let law = law();
    let x0 = [0.5, -0.2, 0.1];
    let end = |h: f64| {
        integrate_closed_loop(&law, &x0, &cfg(h, 8.0, DerivativeMethod::Analytic))
            .unwrap()
            .final_state()
            .to_vec()
    };
    let (a, b, c) = (end(0.2), end(0.1), end(0.05));
    let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!((d(&a, &b) / d(&b, &c)).log2() >= 3.5);
}

#[test]
fn finite_difference_alone_fills_derivatives() {
    let law = law();
    let t = integrate_closed_loop(&law, &X0, &cfg(0.01, 5.0, DerivativeMethod::FiniteDifference)).unwrap();
    assert_eq!(t.u_derivs.len(), 2);
    assert!(t.u_derivs[0][0].is_nan());
    assert!(t.u_derivs[0][10].is_finite());
}
