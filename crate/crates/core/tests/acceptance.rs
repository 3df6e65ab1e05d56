//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satstack_core::bell::{bell_eval, enumerate_partitions, BellTable};
use satstack_core::bounds::tables_at_lambda;
use satstack_core::saturation::{quartic_reference, SpCondition};
use satstack_core::simulate::{
    integrate_closed_loop, nested_ladder, rk4, run_counterexample, simulate_and_verify, Counterexample,
    DerivativeMethod, SimConfig,
};
use satstack_core::synthesis::{
    assemble_feedback, bound_polynomials, choose_inner_constants, coordinate_change, inner_analyses, inner_chain,
    outer_profile, NestedFeedbackLaw, SynthesisConfig,
};
use satstack_core::{Polynomial, SaturationConstants, SaturationFunction};

const REFERENCE_X0: [f64; 3] = [446.7937, -69.875, 11.05];
const BUDGETS: [f64; 3] = [2.0, 20.0, 18.0];
const BATTERY_SEED: u64 = 0x5a75;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_config() -> SynthesisConfig {
    let mut cfg = SynthesisConfig::new(vec![quartic_reference(2); 3], BUDGETS.to_vec());
    cfg.inner_max_overrides = vec![Some(1.0 / 12.0), None];
    cfg.lambda_override = Some(6.5);
    cfg
}

fn reference_law() -> NestedFeedbackLaw {
    assemble_feedback(&reference_config()).expect("reference law")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn reference_u1(l: f64) -> f64 {
    (7.91 + 4.35 * l) / (l * l)
}

fn reference_u2(l: f64) -> f64 {
    (26.2 * l.powi(3) + 396.0 * l * l + 1147.2 * l + 125.2) / l.powi(4)
}

fn criterion_1() -> Outcome {
    let cfg = reference_config();
    let inner = choose_inner_constants(&cfg).unwrap();
    let polys = bound_polynomials(&cfg, &inner).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for l in [2.0, 6.5, 10.0] {
        let e1 = rel(polys[0].eval(l), reference_u1(l));
        let e2 = rel(polys[1].eval(l), reference_u2(l));
        worst = worst.max(e1).max(e2);
        parts.push(format!(
            "λ={l}: u1 {:.4} vs {:.4} ({:+.1}%), u2 {:.3} vs {:.3} ({:+.1}%)",
            polys[0].eval(l),
            reference_u1(l),
            100.0 * (polys[0].eval(l) / reference_u1(l) - 1.0),
            polys[1].eval(l),
            reference_u2(l),
            100.0 * (polys[1].eval(l) / reference_u2(l) - 1.0)
        ));
    }
    outcome(
        worst <= 0.05,
        format!(
            "worst relative error {:.1}% (limit 5%); {}",
            100.0 * worst,
            parts.join("; ")
        ),
    )
}

fn criterion_2() -> Outcome {
    let law = reference_law();
    let (u1, u2) = (law.bounds.u_bound(1), law.bounds.u_bound(2));
    outcome(
        u1 <= 0.9 && u2 <= 18.0,
        format!("u_bound[1] = {u1:.4} (≤ 0.9), u_bound[2] = {u2:.4} (≤ 18)"),
    )
}

fn criterion_3() -> Outcome {
    let law = reference_law();
    let l = 6.5;
    let outer_scale = law.k[2][2];
    let middle = law.a[1] / outer_scale;
    let middle_scale = law.k[1][2];
    let inner_gain = law.a[0] / middle_scale;
    let inner_scale = law.k[0][2];
    let checks = [
        (law.a[2], 1.0),
        (outer_scale, 1.0 / l),
        (law.k[2][0], 0.0),
        (law.k[2][1], 0.0),
        (middle, 1.0 / 5.0),
        (middle_scale, 5.0),
        (law.k[1][0], 0.0),
        (law.k[1][1] / middle_scale, 1.0 / l),
        (inner_gain, 1.0 / 24.0),
        (inner_scale, 24.0),
        (law.k[0][1] / inner_scale, 2.0 / l),
        (law.k[0][0] / inner_scale, 1.0 / (l * l)),
    ];
    let worst = checks.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 1e-12,
        format!(
            "a3 = {}, outer scale = {}, middle gain = {}, inner gain = {}, k rows {:?}; worst deviation {worst:.1e}",
            law.a[2], outer_scale, middle, inner_gain, law.k
        ),
    )
}

fn criterion_4() -> Outcome {
    let law = reference_law();
    let cfg = SimConfig {
        step: 1e-3,
        horizon: 600.0,
        settle_tolerance: 1e-3,
        derivative_method: DerivativeMethod::Analytic,
    };
    let start = Instant::now();
    let r = simulate_and_verify(&law, &REFERENCE_X0, &cfg, &BUDGETS).unwrap();
    let elapsed = start.elapsed();
    let pass = r.settled()
        && r.sup_abs_u <= 2.0
        && r.sup_abs_u_deriv[0] <= 0.9
        && r.sup_abs_u_deriv[1] <= 2.1
        && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "settle time {:?}, sup|u| = {:.4}, sup|u'| = {:.4}, sup|u''| = {:.4}, {:.2?}",
            r.settle_time, r.sup_abs_u, r.sup_abs_u_deriv[0], r.sup_abs_u_deriv[1], elapsed
        ),
    )
}

fn battery_states(count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    // uniform in the ball by rejection from the cube
    while out.len() < count {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-radius..=radius)).collect();
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius {
            out.push(x);
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let law = reference_law();
    let cfg = SimConfig::for_law(&law);
    let states = battery_states(100, 1e3, BATTERY_SEED);
    let start = Instant::now();
    let reports: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = states
            .chunks(13)
            .map(|chunk| {
                let law = &law;
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|x| simulate_and_verify(law, x, &cfg, &BUDGETS).unwrap())
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let elapsed = start.elapsed();
    let settled = reports.iter().filter(|r| r.settled()).count();
    let budgets = reports.iter().filter(|r| r.all_budgets_pass()).count();
    let sound = reports.iter().filter(|r| r.all_bounds_sound()).count();
    let mut norms: Vec<f64> = reports.iter().map(|r| r.final_state_norm).collect();
    norms.sort_by(f64::total_cmp);
    let pass = settled == 100 && budgets == 100 && sound == 100 && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "settled {settled}/100 within {} (step {}), budgets {budgets}/100, soundness {sound}/100, median final ‖x‖ = {:.3e}, {:.2?}",
            cfg.horizon, cfg.step, norms[50], elapsed
        ),
    )
}

fn brute_force_partitions(k: usize, a: usize) -> Vec<Vec<u32>> {
    let len = k - a + 1;
    let mut out = Vec::new();
    let total = (a + 1).pow(len as u32);
    for code in 0..total {
        let mut c = code;
        let delta: Vec<u32> = (0..len)
            .map(|_| {
                let d = (c % (a + 1)) as u32;
                c /= a + 1;
                d
            })
            .collect();
        let count: u32 = delta.iter().sum();
        let weight: u32 = delta.iter().enumerate().map(|(l, d)| (l as u32 + 1) * d).sum();
        if count as usize == a && weight as usize == k {
            out.push(delta);
        }
    }
    out.sort_by(|x, y| y.cmp(x));
    out
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    for k in 1..=8 {
        for a in 1..=k {
            let got: Vec<Vec<u32>> = enumerate_partitions(k, a)
                .unwrap()
                .into_iter()
                .map(|t| t.delta)
                .collect();
            ok &= got == brute_force_partitions(k, a);
        }
    }
    let bell_numbers = [1.0, 2.0, 5.0, 15.0, 52.0, 203.0, 877.0, 4140.0];
    for (k, &b) in (1..=8).zip(&bell_numbers) {
        let s: f64 = (1..=k).map(|a| bell_eval(k, a, &[1.0; 8]).unwrap()).sum();
        ok &= s == b;
    }
    // ρ polynomial, φ(t) = A sin(ωt + c) + B cos(ωt)
    let table = BellTable::new(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rho = Polynomial::new((0..5).map(|_| rng.random_range(-1.0..1.0)).collect());
        let (amp, b, w, c): (f64, f64, f64, f64) = (
            rng.random_range(0.2..1.5),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.0..3.0),
        );
        let phi_d = |t: f64, m: usize| {
            let wm = w.powi(m as i32);
            let s = (w * t + c + m as f64 * std::f64::consts::FRAC_PI_2).sin();
            let co = (w * t + m as f64 * std::f64::consts::FRAC_PI_2).cos();
            wm * (amp * s + b * co)
        };
        let t0 = rng.random_range(-2.0..2.0);
        let k = rng.random_range(1..=4usize);
        let inner: Vec<f64> = (1..=k).map(|m| phi_d(t0, m)).collect();
        let outer: Vec<f64> = (1..=k).map(|a| rho.eval_derivative(phi_d(t0, 0), a)).collect();
        let exact = table.faa_di_bruno(k, &outer, &inner).unwrap();
        let h = 1e-2;
        let weights = satstack_core::simulate::central_weights(k).unwrap();
        let r = satstack_core::simulate::stencil_radius(k) as i32;
        let fd: f64 = weights
            .iter()
            .zip(-r..=r)
            .map(|(wt, o)| wt * rho.eval(phi_d(t0 + o as f64 * h, 0)))
            .sum::<f64>()
            / h.powi(k as i32);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    ok &= worst <= 1e-5;
    outcome(
        ok,
        format!(
            "partitions match exhaustive search for k ≤ 8, Bell numbers match, worst Faà di Bruno vs FD {worst:.2e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let shapes = [(2.0, 1.0, 2.0, 1.0), (2.0, 1.0, 3.0, 1.0), (1.0, 0.5, 1.2, 1.0)];
    for p in 0..=4 {
        for &(m, l, s, a) in &shapes {
            let c = SaturationConstants::new(m, l, s, a, p).unwrap();
            let f = SaturationFunction::smooth(c).unwrap();
            let report = f.validate(1e-9);
            ok &= report.passed();
            if let Some(check) = report.check(SpCondition::Smoothness) {
                worst = worst.max(check.violation);
            }
        }
    }
    let at2 = quartic_reference(2).validate(1e-9);
    let at3 = quartic_reference(3).validate(1e-9);
    let c3 = at3.check(SpCondition::Smoothness).unwrap();
    ok &= at2.passed() && !c3.passed && c3.derivative_order == Some(3);
    outcome(
        ok,
        format!(
            "smooth constructions p = 0..4 pass (worst knot mismatch {worst:.1e}); reference σ passes at p = 2: {}, fails C³ check at p = 3: {} (order {:?}, at r = {:?})",
            at2.passed(),
            !c3.passed,
            c3.derivative_order,
            c3.location
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut conj: f64 = 0.0;
    let mut input: f64 = 0.0;
    for n in 1..=6 {
        for alpha in [1.0, 1.0 / 6.5, 0.01] {
            let h = coordinate_change(n, alpha);
            conj = conj.max(h.conjugation_residual());
            input = input.max(h.input_residual());
        }
    }
    let law = reference_law();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fact: f64 = 0.0;
    for _ in 0..1000 {
        let mag = 10f64.powf(rng.random_range(-3.0..8.0));
        let dir: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = dir.iter().map(|v| v * mag / norm).collect();
        let a = law.eval(&x).unwrap();
        let b = law.eval_via_coordinates(&x).unwrap().u;
        let scale = a.abs().max(b.abs());
        if scale > 0.0 {
            fact = fact.max((a - b).abs() / scale);
        }
    }
    let cfg = reference_config();
    let inner = choose_inner_constants(&cfg).unwrap();
    let profile = outer_profile(&cfg, &inner);
    let analyses = inner_analyses(&inner_chain(&cfg, &inner));
    let polys = bound_polynomials(&cfg, &inner).unwrap();
    let sigma = &cfg.saturations[2];
    let mut scaling: f64 = 0.0;
    for l in [1.0, 1.5, 3.0, 6.5, 20.0] {
        let a = sigma.rescale(cfg.r0(), l).analyze(inner.mu_max[1]);
        scaling = scaling.max(rel(a.constants.alpha, profile.alpha_tilde / l));
        for q in 1..=2 {
            scaling = scaling.max(rel(a.deriv_sup(q), profile.mu_tilde[q - 1] / l.powi(q as i32)));
        }
        scaling = scaling.max(rel(a.secant_sup, profile.secant_sup_scaled / l));
        scaling = scaling.max(rel(a.secant_inf, profile.secant_inf_scaled / l));
        let direct = tables_at_lambda(&analyses, sigma, cfg.r0(), l, 2).unwrap();
        for j in 1..=2 {
            scaling = scaling.max(rel(polys[j - 1].eval(l), direct.u_bound(j)));
        }
    }
    let pass = conj <= 1e-10 && input <= 1e-12 && fact <= 1e-9 && scaling <= 1e-9;
    outcome(
        pass,
        format!(
            "‖HJH⁻¹ − αN‖ ≤ {conj:.1e}, ‖He_n − 1‖ ≤ {input:.1e}, ν vs Υ(Hx) ≤ {fact:.1e}, λ-scaling identities ≤ {scaling:.1e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let sigma = quartic_reference(2);
    let scenario = Counterexample::LinearCombination {
        a: 1.0,
        b: 1.0,
        c: 0.5,
        d: 1.0,
    };
    let scales = [10.0, 100.0, 1000.0];
    let growth = run_counterexample(&scenario, &sigma, &scales, 1e-3, 1.0).unwrap();
    let ratios = growth.initial_rate_ratios();
    let growth_ok = ratios.iter().all(|&r| r >= 8.0);

    let mut cfg = SynthesisConfig::new(vec![quartic_reference(2); 2], vec![2.0, 1.0]);
    cfg.p = 1;
    let law = assemble_feedback(&cfg).unwrap();
    // long enough for every rung to leave saturation and enter the linear zone
    let sim = SimConfig {
        step: 0.02,
        horizon: 4000.0,
        settle_tolerance: 1e-3,
        derivative_method: DerivativeMethod::Analytic,
    };
    let rows = nested_ladder(&law, &scales, &sim).unwrap();
    let bound = law.bounds.u_bound(1);
    let bounded = rows.iter().all(|r| r.sup_rate <= bound * (1.0 + 1e-6));
    outcome(
        growth_ok && bounded,
        format!(
            "|u'(0)| = {:?}, ratios {:?} (≥ 8); nested law sup|u'| = {:?} ≤ u_bound[1] = {bound:.4}",
            growth.rows.iter().map(|r| r.initial_rate).collect::<Vec<_>>(),
            ratios,
            rows.iter().map(|r| r.sup_rate).collect::<Vec<_>>()
        ),
    )
}

fn criterion_10() -> Outcome {
    let law = reference_law();
    // a segment inside the linear region of the reference run
    let pre = SimConfig {
        step: 1e-3,
        horizon: 10.0,
        settle_tolerance: 1e-3,
        derivative_method: DerivativeMethod::Analytic,
    };
    let start = integrate_closed_loop(&law, &REFERENCE_X0, &pre)
        .unwrap()
        .final_state()
        .to_vec();
    let terminal = |h: f64| {
        let steps = (20.0 / h).round() as usize;
        let mut last = Vec::new();
        rk4(
            |x, dx| {
                dx[..2].copy_from_slice(&x[1..]);
                dx[2] = law.eval(x).unwrap();
            },
            &start,
            h,
            steps,
            |_, _, x| {
                last = x.to_vec();
                Ok(())
            },
        )
        .unwrap();
        last
    };
    let h = 0.2;
    let (a, b, c) = (terminal(h), terminal(h / 2.0), terminal(h / 4.0));
    let dist = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let order = (dist(&a, &b) / dist(&b, &c)).log2();
    outcome(
        order >= 3.5,
        format!("observed order {order:.3} (steps {h}, {}, {})", h / 2.0, h / 4.0),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("bound polynomials reproduce reference coefficients", criterion_1),
        ("bound endpoint values at λ = 6.5", criterion_2),
        ("gain reproduction", criterion_3),
        ("reference simulation", criterion_4),
        ("convergence battery", criterion_5),
        ("Bell and Faà di Bruno oracles", criterion_6),
        ("saturation construction", criterion_7),
        ("structural identities", criterion_8),
        ("counterexample growth", criterion_9),
        ("integrator order", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{tag}] {name}: {} ({:.2?})",
            i + 1,
            o.detail,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
