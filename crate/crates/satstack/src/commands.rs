//! The subcommands, independent of argument parsing.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use satstack_core::bounds::tables_at_lambda;
use satstack_core::saturation::{quartic_reference, SaturationFunction};
use satstack_core::simulate::{
    integrate_closed_loop, nested_ladder, norm2, run_counterexample, simulate_and_verify, verify_p_bounded,
    Counterexample, DerivativeMethod, SimConfig,
};
use satstack_core::synthesis::{
    assemble_feedback, bound_polynomials, choose_inner_constants, inner_analyses, inner_chain, NestedFeedbackLaw,
};

use crate::io::{num, opt_num, out_path, read_json, write_json, CsvTable};
use crate::manifest::RunManifest;
use crate::schema::{BatteryFile, BatteryRow, ConfigFile, LawFile, PolicySpec, ReportFile};
use crate::{CliError, Outcome};

pub const DEFAULT_SEED: u64 = 0x5a75;

fn summary_err(e: std::io::Error) -> CliError {
    CliError::io(Path::new("<stdout>"), e)
}

fn finish_manifest(mut m: RunManifest, out: &Path, started: Instant) -> Result<(), CliError> {
    m.finish(started.elapsed());
    let path = out_path(out, &format!("{}.manifest.json", m.subcommand));
    write_json(&path, &m)
}

fn load_config(path: &Path, policy: Option<PolicySpec>) -> Result<(ConfigFile, Vec<u8>), CliError> {
    let (mut file, bytes): (ConfigFile, _) = read_json(path)?;
    if policy.is_some() {
        file.policy = policy;
    }
    Ok((file, bytes))
}

pub fn load_law(path: &Path) -> Result<(NestedFeedbackLaw, LawFile, Vec<u8>), CliError> {
    let (file, bytes): (LawFile, _) = read_json(path)?;
    let law = file.to_law()?;
    Ok((law, file, bytes))
}

#[derive(Debug, Clone)]
pub struct SynthesizeArgs {
    pub config: PathBuf,
    pub policy: Option<PolicySpec>,
    pub out: PathBuf,
}

/// Config → `law.json` and `bounds.json`, with a summary on `summary`.
pub fn synthesize(args: &SynthesizeArgs, summary: &mut dyn Write) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (file, bytes) = load_config(&args.config, args.policy)?;
    let cfg = file.to_config()?;
    let law = assemble_feedback(&cfg)?;
    let law_file = LawFile::from_law(&law, &cfg.budgets);

    let mut m = RunManifest::new("synthesize", &bytes, &format!("{:?}", args.policy)).input(&args.config);
    let law_path = out_path(&args.out, "law.json");
    let bounds_path = out_path(&args.out, "bounds.json");
    write_json(&law_path, &law_file)?;
    write_json(&bounds_path, &law_file.bounds)?;
    m.output(&law_path);
    m.output(&bounds_path);

    let targets = cfg.targets();
    let w = &mut *summary;
    (|| -> std::io::Result<()> {
        writeln!(
            w,
            "n = {}, p = {}, lambda = {}, alpha = {}",
            law.n(),
            law.p,
            law.lambda,
            law.alpha()
        )?;
        writeln!(w, "a = {:?}", law.a)?;
        for (i, k) in law.k.iter().enumerate() {
            writeln!(w, "k_{} = {:?}", i + 1, k)?;
        }
        writeln!(w, "|u| <= {} (budget {})", law.r0(), cfg.budgets[0])?;
        for (j, (b, t)) in law.bounds.u_bound.iter().zip(&targets).enumerate() {
            writeln!(
                w,
                "|u^({})| <= {b:.6} (target {t}, budget {})",
                j + 1,
                cfg.budgets[j + 1]
            )?;
        }
        Ok(())
    })()
    .map_err(summary_err)?;
    finish_manifest(m, &args.out, started)?;
    Ok(Outcome::Pass)
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub law: PathBuf,
    pub x0: Option<Vec<f64>>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub out: PathBuf,
    /// Number of random initial states; `None` runs the single `x0`.
    pub battery: Option<usize>,
    pub seed: u64,
    pub radius: f64,
}

fn sim_config(law: &NestedFeedbackLaw, step: Option<f64>, horizon: Option<f64>) -> Result<SimConfig, CliError> {
    let mut c = SimConfig::for_law(law);
    if let Some(s) = step {
        c.step = s;
    }
    if let Some(h) = horizon {
        c.horizon = h;
    }
    c.validate()?;
    Ok(c)
}

fn check_x0(law: &NestedFeedbackLaw, x0: &[f64]) -> Result<(), CliError> {
    if x0.len() != law.n() {
        return Err(CliError::Validation(format!(
            "x0 has {} entries but the law has n = {}",
            x0.len(),
            law.n()
        )));
    }
    Ok(())
}

/// Trajectory CSV with columns `t, x_1..x_n, u, du_1..du_p, z_1..z_n` and
/// `report.json`; battery mode writes `battery.csv` and `battery.json`.
pub fn simulate(args: &SimulateArgs, summary: &mut dyn Write) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (law, file, bytes) = load_law(&args.law)?;
    let sim = sim_config(&law, args.step, args.horizon)?;
    let canon = format!(
        "{:?} {:?} {:?} {} {}",
        args.x0, sim, args.battery, args.seed, args.radius
    );
    let mut m = RunManifest::new("simulate", &bytes, &canon).input(&args.law);
    let outcome = match args.battery {
        Some(runs) => battery(
            &law,
            &file.budgets,
            &sim,
            runs,
            args.seed,
            args.radius,
            &args.out,
            &mut m,
            summary,
        )?,
        None => {
            let x0 = args
                .x0
                .as_deref()
                .ok_or_else(|| CliError::Validation(String::from("--x0 is required without --battery")))?;
            check_x0(&law, x0)?;
            single_run(&law, &file.budgets, x0, &sim, &args.out, &mut m, summary)?
        }
    };
    finish_manifest(m, &args.out, started)?;
    Ok(outcome)
}

pub fn trajectory_header(n: usize, p: usize) -> Vec<String> {
    let mut h = vec![String::from("t")];
    h.extend((1..=n).map(|i| format!("x_{i}")));
    h.push(String::from("u"));
    h.extend((1..=p).map(|j| format!("du_{j}")));
    h.extend((1..=n).map(|i| format!("z_{i}")));
    h
}

fn single_run(
    law: &NestedFeedbackLaw,
    budgets: &[f64],
    x0: &[f64],
    sim: &SimConfig,
    out: &Path,
    m: &mut RunManifest,
    summary: &mut dyn Write,
) -> Result<Outcome, CliError> {
    let traj = integrate_closed_loop(law, x0, sim)?;
    let report = verify_p_bounded(&traj, law, budgets, Some(&law.bounds), sim.settle_tolerance);

    let mut csv = CsvTable::new(trajectory_header(law.n(), law.p));
    for k in 0..traj.len() {
        let mut row = vec![num(traj.times[k])];
        row.extend(traj.states[k].iter().copied().map(num));
        row.push(num(traj.u[k]));
        row.extend(traj.u_derivs.iter().map(|d| num(d[k])));
        row.extend(traj.nested_args[k].iter().copied().map(num));
        csv.row(row);
    }
    let csv_path = out_path(out, "trajectory.csv");
    csv.write(&csv_path)?;
    let report_file = ReportFile::new(&report, x0, sim.step, sim.horizon, budgets);
    let report_path = out_path(out, "report.json");
    write_json(&report_path, &report_file)?;
    m.output(&csv_path);
    m.output(&report_path);
    write_report_summary(&report_file, summary)?;
    Ok(outcome_of(report_file.pass))
}

fn outcome_of(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::BudgetViolation
    }
}

fn write_report_summary(r: &ReportFile, w: &mut dyn Write) -> Result<(), CliError> {
    (|| -> std::io::Result<()> {
        writeln!(w, "sup|u| = {} (budget {})", num(r.sup_abs_u), r.budgets[0])?;
        for (j, s) in r.sup_abs_u_deriv.iter().enumerate() {
            writeln!(w, "sup|u^({})| = {} (budget {})", j + 1, num(*s), r.budgets[j + 1])?;
        }
        writeln!(
            w,
            "settle time {}, linear region from {}, final |x| = {}",
            r.settle_time.map_or_else(|| String::from("never"), num),
            r.linear_region_entry.map_or_else(|| String::from("never"), num),
            num(r.final_state_norm)
        )?;
        writeln!(w, "{}", if r.pass { "PASS" } else { "BUDGET VIOLATION" })
    })()
    .map_err(summary_err)
}

/// Uniform samples in the ball of radius `radius`, by rejection from the cube.
pub fn battery_states(n: usize, runs: usize, seed: u64, radius: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..runs)
        .map(|_| loop {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if norm2(&x) <= 1.0 {
                break x.into_iter().map(|v| v * radius).collect();
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn battery(
    law: &NestedFeedbackLaw,
    budgets: &[f64],
    sim: &SimConfig,
    runs: usize,
    seed: u64,
    radius: f64,
    out: &Path,
    m: &mut RunManifest,
    summary: &mut dyn Write,
) -> Result<Outcome, CliError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CliError::Validation(format!("radius must be positive, got {radius}")));
    }
    m.seed = Some(seed);
    let states = battery_states(law.n(), runs, seed, radius);
    let reports = states
        .par_iter()
        .map(|x0| simulate_and_verify(law, x0, sim, budgets))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<BatteryRow> = states
        .iter()
        .zip(&reports)
        .enumerate()
        .map(|(run, (x0, r))| BatteryRow {
            run,
            x0: x0.clone(),
            sup_abs_u: r.sup_abs_u,
            sup_abs_u_deriv: r.sup_abs_u_deriv.clone(),
            budgets_pass: r.all_budgets_pass(),
            bounds_sound: r.all_bounds_sound(),
            settle_time: r.settle_time,
            final_state_norm: r.final_state_norm,
        })
        .collect();
    let file = BatteryFile {
        schema_version: crate::schema::SCHEMA_VERSION,
        seed,
        radius,
        step: sim.step,
        horizon: sim.horizon,
        runs,
        budgets_pass: rows.iter().filter(|r| r.budgets_pass).count(),
        bounds_sound: rows.iter().filter(|r| r.bounds_sound).count(),
        settled: rows.iter().filter(|r| r.settle_time.is_some()).count(),
        rows,
    };

    let n = law.n();
    let mut header = vec![String::from("run")];
    header.extend((1..=n).map(|i| format!("x0_{i}")));
    header.push(String::from("sup_u"));
    header.extend((1..=law.p).map(|j| format!("sup_du_{j}")));
    header.extend(["budgets_pass", "bounds_sound", "settle_time", "final_norm"].map(String::from));
    let mut csv = CsvTable::new(header);
    for r in &file.rows {
        let mut row = vec![r.run.to_string()];
        row.extend(r.x0.iter().copied().map(num));
        row.push(num(r.sup_abs_u));
        row.extend(r.sup_abs_u_deriv.iter().copied().map(num));
        row.push(r.budgets_pass.to_string());
        row.push(r.bounds_sound.to_string());
        row.push(opt_num(r.settle_time));
        row.push(num(r.final_state_norm));
        csv.row(row);
    }
    let csv_path = out_path(out, "battery.csv");
    let json_path = out_path(out, "battery.json");
    csv.write(&csv_path)?;
    write_json(&json_path, &file)?;
    m.output(&csv_path);
    m.output(&json_path);
    writeln!(
        summary,
        "{runs} runs: budgets pass {}, bounds sound {}, settled {}",
        file.budgets_pass, file.bounds_sound, file.settled
    )
    .map_err(summary_err)?;
    Ok(outcome_of(file.budgets_pass == runs))
}

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub law: PathBuf,
    pub x0: Vec<f64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    /// Without a directory the report goes to `summary`.
    pub out: Option<PathBuf>,
}

/// Streams one run and emits the report together with the bound tables.
pub fn verify(args: &VerifyArgs, summary: &mut dyn Write) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (law, file, bytes) = load_law(&args.law)?;
    check_x0(&law, &args.x0)?;
    let sim = sim_config(&law, args.step, args.horizon)?;
    let report = simulate_and_verify(&law, &args.x0, &sim, &file.budgets)?;
    let mut rf = ReportFile::new(&report, &args.x0, sim.step, sim.horizon, &file.budgets);
    rf.bounds = Some((&law.bounds).into());
    match &args.out {
        Some(out) => {
            let mut m = RunManifest::new("verify", &bytes, &format!("{:?} {:?}", args.x0, sim)).input(&args.law);
            let path = out_path(out, "report.json");
            write_json(&path, &rf)?;
            m.output(&path);
            write_report_summary(&rf, summary)?;
            finish_manifest(m, out, started)?;
        }
        None => summary.write_all(&crate::io::json_bytes(&rf)).map_err(summary_err)?,
    }
    Ok(outcome_of(rf.pass))
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub config: PathBuf,
    pub lambdas: Vec<f64>,
    pub policy: Option<PolicySpec>,
    pub out: PathBuf,
}

/// One row per `λ`: tables computed from the chain (`u_bound_j`) and from the
/// closed-form `λ` polynomials (`poly_bound_j`), plus feasibility.
pub fn sweep_lambda(args: &SweepArgs, summary: &mut dyn Write) -> Result<Outcome, CliError> {
    let started = Instant::now();
    if args.lambdas.is_empty() {
        return Err(CliError::Validation(String::from("empty lambda grid")));
    }
    if let Some(l) = args.lambdas.iter().find(|l| **l < 1.0) {
        return Err(CliError::Validation(format!("lambda must be >= 1, got {l}")));
    }
    let (file, bytes) = load_config(&args.config, args.policy)?;
    let cfg = file.to_config()?;
    let inner = choose_inner_constants(&cfg)?;
    let analyses = inner_analyses(&inner_chain(&cfg, &inner));
    let polys = bound_polynomials(&cfg, &inner)?;
    let sigma_n = cfg.saturations.last().expect("validated chain");
    let targets = cfg.targets();

    let p = cfg.p;
    let mut header = vec![String::from("lambda")];
    header.extend((1..=p).map(|j| format!("u_bound_{j}")));
    header.extend((1..=p).map(|j| format!("poly_bound_{j}")));
    header.push(String::from("feasible"));
    let mut csv = CsvTable::new(header);
    for &lambda in &args.lambdas {
        let t = tables_at_lambda(&analyses, sigma_n, cfg.r0(), lambda, p)?;
        let mut row = vec![num(lambda)];
        row.extend(t.u_bound.iter().copied().map(num));
        row.extend(polys.iter().map(|b| num(b.eval(lambda))));
        let feasible = t.u_bound.iter().zip(&targets).all(|(b, t)| b <= t);
        row.push(feasible.to_string());
        csv.row(row);
    }
    let mut m =
        RunManifest::new("sweep-lambda", &bytes, &format!("{:?} {:?}", args.lambdas, args.policy)).input(&args.config);
    let path = out_path(&args.out, "sweep.csv");
    csv.write(&path)?;
    m.output(&path);
    writeln!(
        summary,
        "{} lambda values written to {}",
        args.lambdas.len(),
        path.display()
    )
    .map_err(summary_err)?;
    finish_manifest(m, &args.out, started)?;
    Ok(Outcome::Pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    LinearCombination,
    HarmonicOscillator,
}

#[derive(Debug, Clone)]
pub struct CounterexampleArgs {
    pub scenario: Scenario,
    pub scales: Vec<f64>,
    /// Gains `(a, b, c, d)` of the linear combination.
    pub gains: [f64; 4],
    pub step: f64,
    pub horizon: f64,
    /// Optional nested law for the contrast column; its outer saturation is
    /// also used for the scenario.
    pub law: Option<PathBuf>,
    pub contrast_horizon: f64,
    pub out: PathBuf,
}

/// Growth ladder `scale, initial_rate, sup_rate`, plus `nested_sup_rate` and
/// `nested_u_bound_1` when a law is given.
pub fn demo_counterexample(args: &CounterexampleArgs, summary: &mut dyn Write) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let [a, b, c, d] = args.gains;
    let scenario = match args.scenario {
        Scenario::LinearCombination => Counterexample::LinearCombination { a, b, c, d },
        Scenario::HarmonicOscillator => Counterexample::HarmonicOscillator,
    };
    let (law, bytes) = match &args.law {
        Some(p) => {
            let (law, _, bytes) = load_law(p)?;
            (Some(law), bytes)
        }
        None => (None, Vec::new()),
    };
    let sigma: SaturationFunction = law
        .as_ref()
        .and_then(|l| l.sats.last().cloned())
        .unwrap_or_else(|| quartic_reference(2));
    let report = run_counterexample(&scenario, &sigma, &args.scales, args.step, args.horizon)?;

    let mut header: Vec<String> = ["scale", "initial_rate", "sup_rate"].map(String::from).to_vec();
    let mut outcome = Outcome::Pass;
    let contrast = match &law {
        Some(law) if law.p >= 1 => {
            let mut sim = SimConfig::for_law(law);
            sim.horizon = args.contrast_horizon;
            sim.derivative_method = DerivativeMethod::Analytic;
            sim.validate()?;
            header.extend(["nested_sup_rate", "nested_u_bound_1"].map(String::from));
            let rows = nested_ladder(law, &args.scales, &sim)?;
            let bound = law.bounds.u_bound(1);
            if rows.iter().any(|r| r.sup_rate > bound * (1.0 + 1e-6)) {
                outcome = Outcome::BudgetViolation;
            }
            Some((rows, bound))
        }
        _ => None,
    };
    let mut csv = CsvTable::new(header);
    for (k, r) in report.rows.iter().enumerate() {
        let mut row = vec![num(r.scale), num(r.initial_rate), num(r.sup_rate)];
        if let Some((rows, bound)) = &contrast {
            row.push(num(rows[k].sup_rate));
            row.push(num(*bound));
        }
        csv.row(row);
    }
    let canon = format!(
        "{:?} {:?} {:?} {} {} {}",
        args.scenario, args.scales, args.gains, args.step, args.horizon, args.contrast_horizon
    );
    let mut m = RunManifest::new("demo-counterexample", &bytes, &canon);
    if let Some(p) = &args.law {
        m = m.input(p);
    }
    let path = out_path(&args.out, "growth.csv");
    csv.write(&path)?;
    m.output(&path);
    writeln!(
        summary,
        "{}: |u'(0)| = {:?}, growth ratios {:?}",
        report.scenario,
        report.rows.iter().map(|r| r.initial_rate).collect::<Vec<_>>(),
        report.initial_rate_ratios()
    )
    .map_err(summary_err)?;
    finish_manifest(m, &args.out, started)?;
    Ok(outcome)
}
