//! Closed-loop simulation of `ẋ = J_n x + e_n ν(x)` and the measurements
//! taken along it.
//!
//! Integration is classical fixed-step RK4. Control derivatives are
//! computed exactly at every grid point by pushing time derivatives
//! through the nested layers with Faà di Bruno's formula; finite
//! differences on the sampled `u` are available as an independent check.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bell::BellTable;
use crate::bounds::BoundTables;
use crate::float::{abs, sqrt};
use crate::linalg::{self, Matrix};
use crate::saturation::SaturationFunction;
use crate::synthesis::NestedFeedbackLaw;
use crate::{Error, Result};

/// Default `‖x‖` threshold for settling.
pub const DEFAULT_SETTLE_TOLERANCE: f64 = 1e-3;
/// Default horizon in time units.
pub const DEFAULT_HORIZON: f64 = 600.0;
/// Relative slack for comparing measured suprema with the a-priori bounds.
pub const SOUNDNESS_SLACK: f64 = 1e-6;
/// Number of local maxima kept per derivative order.
pub const PEAKS_KEPT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMethod {
    #[default]
    Analytic,
    FiniteDifference,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub settle_tolerance: f64,
    pub derivative_method: DerivativeMethod,
}

impl SimConfig {
    /// Step `0.01/α_{μ_n}` (capped at 0.01), horizon 600, tolerance `1e−3`.
    pub fn for_law(law: &NestedFeedbackLaw) -> Self {
        Self {
            step: (0.01 / law.alpha()).min(0.01),
            horizon: DEFAULT_HORIZON,
            settle_tolerance: DEFAULT_SETTLE_TOLERANCE,
            derivative_method: DerivativeMethod::Analytic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("step", self.step),
            ("horizon", self.horizon),
            ("settle tolerance", self.settle_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Number of RK4 steps covering the horizon.
    pub fn steps(&self) -> usize {
        let s = self.horizon / self.step;
        let r = libm::round(s);
        if abs(s - r) < 1e-9 * s.max(1.0) {
            r as usize
        } else {
            libm::ceil(s) as usize
        }
    }
}

/// Samples of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    /// `u_derivs[j − 1][k] = u^{(j)}(t_k)`; empty until derivatives are filled.
    pub u_derivs: Vec<Vec<f64>>,
    /// `nested_args[k][i − 1] = z_i(t_k)`.
    pub nested_args: Vec<Vec<f64>>,
    /// Finite-difference estimates when requested (`NaN` near the ends).
    pub fd_derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has the initial sample")
    }
}

/// Generic fixed-step RK4; `visit(k, t, x)` sees every grid point.
pub fn rk4<F, V>(mut f: F, x0: &[f64], step: f64, steps: usize, mut visit: V) -> Result<()>
where
    F: FnMut(&[f64], &mut [f64]),
    V: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    visit(0, 0.0, &x)?;
    for s in 1..=steps {
        f(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * step * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * step * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + step * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = s as f64 * step;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: s, time: t });
        }
        visit(s, t, &x)?;
    }
    Ok(())
}

fn chain_rhs(law: &NestedFeedbackLaw) -> impl FnMut(&[f64], &mut [f64]) + '_ {
    move |x, dx| {
        let n = x.len();
        dx[..n - 1].copy_from_slice(&x[1..]);
        dx[n - 1] = law.eval(x).expect("dimension checked");
    }
}

/// States, `u` and nested arguments on the grid; derivatives are filled
/// according to `cfg.derivative_method`.
pub fn integrate_closed_loop(law: &NestedFeedbackLaw, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = law.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let steps = cfg.steps();
    let mut traj = Trajectory {
        step: cfg.step,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        u_derivs: Vec::new(),
        nested_args: Vec::with_capacity(steps + 1),
        fd_derivs: Vec::new(),
    };
    rk4(chain_rhs(law), x0, cfg.step, steps, |_, t, x| {
        let e = law.eval_with_args(x)?;
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.u.push(e.u);
        traj.nested_args.push(e.z);
        Ok(())
    })?;
    control_derivatives_along(&mut traj, law, law.p, cfg.derivative_method)?;
    Ok(traj)
}

/// Exact `u^{(1)}, …, u^{(p)}` at state `x`.
///
/// With `w_i` the argument of `σ_i`, `w_i = k_iᵀx + a_{i−1}σ_{i−1}(w_{i−1})`
/// and `x_i^{(m)} = x_{i+m}` or `u^{(i+m−n−1)}` once the index leaves the
/// chain, so every order only needs lower orders of `u`.
pub fn control_derivatives_at(law: &NestedFeedbackLaw, bell: &BellTable, x: &[f64], p: usize) -> Result<Vec<f64>> {
    let n = law.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let max_order = law.sats.iter().map(SaturationFunction::order).min().unwrap_or(0);
    if p > max_order {
        return Err(Error::OrderTooHigh {
            requested: p,
            max: max_order,
        });
    }
    if p == 0 {
        return Ok(Vec::new());
    }
    // sigma_d[i][m] = σ_i^{(m)}(w_i), m ∈ [0, p]
    let mut sigma_d = vec![vec![0.0; p + 1]; n];
    let mut carry = 0.0;
    for i in 0..n {
        let w = dot(&law.k[i], x) + carry;
        law.sats[i].derivatives_into(w, &mut sigma_d[i]);
        carry = law.a[i] * sigma_d[i][0];
    }
    let u0 = -carry;

    let mut ud = vec![0.0; p + 1];
    ud[0] = u0;
    // wd[i][m − 1] = w_i^{(m)}
    let mut wd = vec![vec![0.0; p]; n];
    let mut xm = vec![0.0; n];
    for m in 1..=p {
        for (i, v) in xm.iter_mut().enumerate() {
            *v = if i + m < n { x[i + m] } else { ud[i + m - n] };
        }
        let mut layer = 0.0;
        for i in 0..n {
            wd[i][m - 1] = dot(&law.k[i], &xm) + layer;
            layer = law.a[i] * bell.faa_di_bruno(m, &sigma_d[i][1..], &wd[i][..m])?;
        }
        ud[m] = -layer;
    }
    ud.remove(0);
    Ok(ud)
}

/// Fills `traj.u_derivs` (and `traj.fd_derivs` when asked).
pub fn control_derivatives_along(
    traj: &mut Trajectory,
    law: &NestedFeedbackLaw,
    p: usize,
    method: DerivativeMethod,
) -> Result<()> {
    let bell = BellTable::new(p.max(1))?;
    let max_order = law.sats.iter().map(SaturationFunction::order).min().unwrap_or(0);
    if p > max_order {
        return Err(Error::OrderTooHigh {
            requested: p,
            max: max_order,
        });
    }
    if matches!(method, DerivativeMethod::Analytic | DerivativeMethod::Both) {
        let mut out = vec![Vec::with_capacity(traj.len()); p];
        for x in &traj.states {
            let d = control_derivatives_at(law, &bell, x, p)?;
            for (j, v) in d.into_iter().enumerate() {
                out[j].push(v);
            }
        }
        traj.u_derivs = out;
    }
    if matches!(method, DerivativeMethod::FiniteDifference | DerivativeMethod::Both) {
        traj.fd_derivs = finite_difference_derivatives(&traj.u, traj.step, p)?;
        if method == DerivativeMethod::FiniteDifference {
            traj.u_derivs = traj.fd_derivs.clone();
        }
    }
    Ok(())
}

/// Half-width of the fourth-order central stencil for derivative `j`.
pub fn stencil_radius(j: usize) -> usize {
    j.div_ceil(2) + 1
}

/// Central finite-difference weights on offsets `−r..=r` for derivative `j`.
pub fn central_weights(j: usize) -> Result<Vec<f64>> {
    let r = stencil_radius(j) as i32;
    let m = (2 * r + 1) as usize;
    let mut a = Matrix::zeros(m, m);
    for q in 0..m {
        for (col, o) in (-r..=r).enumerate() {
            a[(q, col)] = crate::float::powi(o as f64, q as i32);
        }
    }
    let mut rhs = vec![0.0; m];
    rhs[j] = crate::float::factorial(j);
    linalg::solve(&a, &rhs).ok_or_else(|| Error::InvalidConfig(String::from("singular stencil system")))
}

/// Fourth-order central differences of a uniformly sampled signal;
/// samples too close to either end are `NaN`.
pub fn finite_difference_derivatives(u: &[f64], step: f64, p: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(p);
    for j in 1..=p {
        let w = central_weights(j)?;
        let r = stencil_radius(j);
        let scale = crate::float::powi(step, -(j as i32));
        let mut d = vec![f64::NAN; u.len()];
        if u.len() > 2 * r {
            for k in r..u.len() - r {
                let s: f64 = w.iter().zip(&u[k - r..=k + r]).map(|(a, b)| a * b).sum();
                d[k] = s * scale;
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// Largest `|analytic − fd|` relative to `max |analytic|`, per order.
///
/// Stencils that straddle a knot of any layer (where `u^{(p+1)}` jumps)
/// are skipped; the number of skipped samples is returned alongside.
pub fn derivative_discrepancy(traj: &Trajectory, law: &NestedFeedbackLaw) -> (Vec<f64>, usize) {
    let p = traj.u_derivs.len().min(traj.fd_derivs.len());
    let seg: Vec<Vec<usize>> = traj
        .states
        .iter()
        .map(|x| {
            let mut carry = 0.0;
            (0..law.n())
                .map(|i| {
                    let w = dot(&law.k[i], x) + carry;
                    carry = law.a[i] * law.sats[i].value(w);
                    law.sats[i].segment_index(w)
                })
                .collect()
        })
        .collect();
    let mut skipped = 0;
    let mut worst = vec![0.0_f64; p];
    for j in 1..=p {
        let r = stencil_radius(j);
        let scale = traj.u_derivs[j - 1].iter().fold(0.0_f64, |m, v| m.max(abs(*v)));
        for k in r..traj.len().saturating_sub(r) {
            if seg[k - r..=k + r].iter().any(|s| s != &seg[k]) {
                skipped += 1;
                continue;
            }
            let d = abs(traj.u_derivs[j - 1][k] - traj.fd_derivs[j - 1][k]);
            if scale > 0.0 {
                worst[j - 1] = worst[j - 1].max(d / scale);
            }
        }
    }
    (worst, skipped)
}

/// A refined local maximum of `|signal|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub time: f64,
    pub value: f64,
}

/// Running supremum of `|signal|` plus the largest local maxima, each refined
/// by the vertex of the parabola through the three samples around it.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakTracker {
    sup: f64,
    peaks: Vec<Peak>,
    window: [(f64, f64); 2],
    seen: usize,
}

impl Default for PeakTracker {
    fn default() -> Self {
        Self {
            sup: 0.0,
            peaks: Vec::new(),
            window: [(0.0, 0.0); 2],
            seen: 0,
        }
    }
}

impl PeakTracker {
    pub fn push(&mut self, t: f64, v: f64) {
        let v = abs(v);
        self.sup = self.sup.max(v);
        if self.seen >= 2 {
            let (t0, v0) = self.window[0];
            let (t1, v1) = self.window[1];
            if v1 > v0 && v1 >= v && v1 > 0.0 {
                let curv = v0 - 2.0 * v1 + v;
                let (dt, dv) = if curv < 0.0 {
                    let shift = 0.5 * (v0 - v) / curv;
                    (shift * (t1 - t0), -0.125 * (v - v0) * (v - v0) / curv)
                } else {
                    (0.0, 0.0)
                };
                self.insert(Peak {
                    time: t1 + dt,
                    value: v1 + dv,
                });
            }
        }
        self.window = [self.window[1], (t, v)];
        self.seen += 1;
    }

    fn insert(&mut self, peak: Peak) {
        let pos = self
            .peaks
            .iter()
            .position(|p| p.value < peak.value)
            .unwrap_or(self.peaks.len());
        if pos < PEAKS_KEPT {
            self.peaks.insert(pos, peak);
            self.peaks.truncate(PEAKS_KEPT);
        }
    }

    /// Maximum over the grid and the refined peaks.
    pub fn sup(&self) -> f64 {
        self.peaks.first().map_or(self.sup, |p| self.sup.max(p.value))
    }

    pub fn grid_sup(&self) -> f64 {
        self.sup
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }
}

/// Suprema, budget and bound checks, and convergence events of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// Refined `sup |u|`.
    pub sup_abs_u: f64,
    /// `sup_abs_u_deriv[j − 1]`, refined.
    pub sup_abs_u_deriv: Vec<f64>,
    /// Unrefined grid suprema, same layout.
    pub grid_sup_abs_u_deriv: Vec<f64>,
    pub peaks: Vec<Vec<Peak>>,
    /// `budget_pass[j]` for `j ∈ [0, p]` (`j = 0` is the amplitude).
    pub budget_pass: Vec<bool>,
    /// `sup |u^{(j)}| ≤ u_bound[j](1 + 1e−6)`; empty without tables.
    pub bound_soundness: Vec<bool>,
    pub settle_time: Option<f64>,
    pub linear_region_entry: Option<f64>,
    pub final_state_norm: f64,
}

impl VerificationReport {
    pub fn all_budgets_pass(&self) -> bool {
        self.budget_pass.iter().all(|&b| b)
    }

    pub fn all_bounds_sound(&self) -> bool {
        self.bound_soundness.iter().all(|&b| b)
    }

    pub fn settled(&self) -> bool {
        self.settle_time.is_some()
    }
}

/// Streaming form of the per-run measurements.
#[derive(Debug, Clone)]
struct RunAccumulator {
    u: PeakTracker,
    derivs: Vec<PeakTracker>,
    last_unsettled: Option<usize>,
    last_nonlinear: Option<usize>,
    count: usize,
    step: f64,
    final_norm: f64,
    tol: f64,
}

impl RunAccumulator {
    fn new(p: usize, step: f64, tol: f64) -> Self {
        Self {
            u: PeakTracker::default(),
            derivs: vec![PeakTracker::default(); p],
            last_unsettled: None,
            last_nonlinear: None,
            count: 0,
            step,
            final_norm: 0.0,
            tol,
        }
    }

    fn push(&mut self, t: f64, x: &[f64], u: f64, d: &[f64], z: &[f64], lin: &[f64]) {
        self.u.push(t, u);
        for (tr, &v) in self.derivs.iter_mut().zip(d) {
            tr.push(t, v);
        }
        let norm = norm2(x);
        if norm >= self.tol {
            self.last_unsettled = Some(self.count);
        }
        if z.iter().zip(lin).any(|(zi, l)| abs(*zi) > *l) {
            self.last_nonlinear = Some(self.count);
        }
        self.count += 1;
        self.final_norm = norm;
    }

    fn finish(self, budgets: &[f64], bounds: Option<&BoundTables>) -> VerificationReport {
        // grid times are k·step, matching the integrator
        let event = |last: Option<usize>| match last {
            None => Some(0.0),
            Some(k) if k + 1 >= self.count => None,
            Some(k) => Some((k + 1) as f64 * self.step),
        };
        let sup_abs_u_deriv: Vec<f64> = self.derivs.iter().map(PeakTracker::sup).collect();
        let mut budget_pass = Vec::with_capacity(budgets.len());
        if let Some(&r0) = budgets.first() {
            budget_pass.push(self.u.sup() <= r0);
        }
        for (j, &r) in budgets.iter().enumerate().skip(1) {
            budget_pass.push(sup_abs_u_deriv.get(j - 1).is_some_and(|&s| s <= r));
        }
        let bound_soundness = bounds.map_or_else(Vec::new, |b| {
            sup_abs_u_deriv
                .iter()
                .zip(&b.u_bound)
                .map(|(&s, &ub)| s <= ub * (1.0 + SOUNDNESS_SLACK))
                .collect()
        });
        VerificationReport {
            sup_abs_u: self.u.sup(),
            grid_sup_abs_u_deriv: self.derivs.iter().map(PeakTracker::grid_sup).collect(),
            peaks: self.derivs.iter().map(|d| d.peaks().to_vec()).collect(),
            sup_abs_u_deriv,
            budget_pass,
            bound_soundness,
            settle_time: event(self.last_unsettled),
            linear_region_entry: event(self.last_nonlinear),
            final_state_norm: self.final_norm,
        }
    }
}

/// Report for a stored trajectory. `budgets = (R_0, …, R_p)`.
pub fn verify_p_bounded(
    traj: &Trajectory,
    law: &NestedFeedbackLaw,
    budgets: &[f64],
    bounds: Option<&BoundTables>,
    settle_tolerance: f64,
) -> VerificationReport {
    let p = traj.u_derivs.len();
    let lin = law.linear_thresholds();
    let mut acc = RunAccumulator::new(p, traj.step, settle_tolerance);
    let mut d = vec![0.0; p];
    for k in 0..traj.len() {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = traj.u_derivs[j][k];
        }
        acc.push(
            traj.times[k],
            &traj.states[k],
            traj.u[k],
            &d,
            &traj.nested_args[k],
            &lin,
        );
    }
    acc.finish(budgets, bounds)
}

/// First grid time after which every nested argument stays inside its
/// linear zone; `None` if that never happens within the horizon.
pub fn verify_linear_region_entry(traj: &Trajectory, law: &NestedFeedbackLaw) -> Option<f64> {
    let lin = law.linear_thresholds();
    match traj
        .nested_args
        .iter()
        .rposition(|z| z.iter().zip(&lin).any(|(zi, l)| abs(*zi) > *l))
    {
        None => Some(0.0),
        Some(k) => traj.times.get(k + 1).copied(),
    }
}

/// First grid time after which `‖x‖ < tol` holds to the end of the run.
pub fn settle_time(traj: &Trajectory, tol: f64) -> Option<f64> {
    match traj.states.iter().rposition(|x| norm2(x) >= tol) {
        None => Some(0.0),
        Some(k) => traj.times.get(k + 1).copied(),
    }
}

/// Simulates and verifies without storing the trajectory (analytic derivatives).
pub fn simulate_and_verify(
    law: &NestedFeedbackLaw,
    x0: &[f64],
    cfg: &SimConfig,
    budgets: &[f64],
) -> Result<VerificationReport> {
    cfg.validate()?;
    let n = law.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let p = law.p;
    let bell = BellTable::new(p.max(1))?;
    let lin = law.linear_thresholds();
    let mut acc = RunAccumulator::new(p, cfg.step, cfg.settle_tolerance);
    rk4(chain_rhs(law), x0, cfg.step, cfg.steps(), |_, t, x| {
        let e = law.eval_with_args(x)?;
        let d = control_derivatives_at(law, &bell, x, p)?;
        acc.push(t, x, e.u, &d, &e.z, &lin);
        Ok(())
    })?;
    Ok(acc.finish(budgets, Some(&law.bounds)))
}

/// The two feedbacks shown not to be `p`-bounded.
#[derive(Debug, Clone, PartialEq)]
pub enum Counterexample {
    /// `ν = −a σ(b x_2) − c σ(d(x_1 + x_2))` on the double integrator,
    /// started from `(−s, s)`.
    LinearCombination { a: f64, b: f64, c: f64, d: f64 },
    /// `u = −σ(x_2)` on `ẋ_1 = x_2, ẋ_2 = −x_1 + u`, started from `(s, 0)`.
    HarmonicOscillator,
}

impl Counterexample {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearCombination { .. } => "linear-combination",
            Self::HarmonicOscillator => "harmonic-oscillator",
        }
    }

    pub fn initial_state(&self, scale: f64) -> [f64; 2] {
        match self {
            Self::LinearCombination { .. } => [-scale, scale],
            Self::HarmonicOscillator => [scale, 0.0],
        }
    }

    fn rhs(&self, sigma: &SaturationFunction, x: &[f64], dx: &mut [f64]) {
        let u = self.control(sigma, x);
        dx[0] = x[1];
        dx[1] = match self {
            Self::LinearCombination { .. } => u,
            Self::HarmonicOscillator => -x[0] + u,
        };
    }

    pub fn control(&self, sigma: &SaturationFunction, x: &[f64]) -> f64 {
        match *self {
            Self::LinearCombination { a, b, c, d } => -a * sigma.value(b * x[1]) - c * sigma.value(d * (x[0] + x[1])),
            Self::HarmonicOscillator => -sigma.value(x[1]),
        }
    }

    /// `u̇ = ∇ν · ẋ`.
    pub fn control_rate(&self, sigma: &SaturationFunction, x: &[f64]) -> f64 {
        let u = self.control(sigma, x);
        match *self {
            Self::LinearCombination { a, b, c, d } => {
                let s1 = sigma.derivative_at(b * x[1], 1);
                let s2 = sigma.derivative_at(d * (x[0] + x[1]), 1);
                -a * b * s1 * u - c * d * s2 * (x[1] + u)
            }
            Self::HarmonicOscillator => -sigma.derivative_at(x[1], 1) * (-x[0] + u),
        }
    }
}

/// One rung of a growth ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthRow {
    pub scale: f64,
    pub initial_rate: f64,
    pub sup_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub scenario: String,
    pub rows: Vec<GrowthRow>,
}

impl GrowthReport {
    /// Successive ratios of `|u̇(0)|` along the ladder.
    pub fn initial_rate_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[1].initial_rate / w[0].initial_rate)
            .collect()
    }

    pub fn strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_rate > w[0].sup_rate)
    }
}

/// Simulates the scenario from each scale of the ladder and records
/// `|u̇(0)|` and `sup |u̇|` over the horizon.
pub fn run_counterexample(
    scenario: &Counterexample,
    sigma: &SaturationFunction,
    scales: &[f64],
    step: f64,
    horizon: f64,
) -> Result<GrowthReport> {
    let cfg = SimConfig {
        step,
        horizon,
        settle_tolerance: DEFAULT_SETTLE_TOLERANCE,
        derivative_method: DerivativeMethod::Analytic,
    };
    cfg.validate()?;
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let x0 = scenario.initial_state(scale);
        let initial_rate = abs(scenario.control_rate(sigma, &x0));
        let mut sup_rate = 0.0_f64;
        rk4(
            |x, dx| scenario.rhs(sigma, x, dx),
            &x0,
            step,
            cfg.steps(),
            |_, _, x| {
                sup_rate = sup_rate.max(abs(scenario.control_rate(sigma, x)));
                Ok(())
            },
        )?;
        rows.push(GrowthRow {
            scale,
            initial_rate,
            sup_rate,
        });
    }
    Ok(GrowthReport {
        scenario: String::from(scenario.name()),
        rows,
    })
}

/// The same ladder under a nested law: `sup |u̇|` per scale, started from
/// `(−s, s, 0, …)`.
pub fn nested_ladder(law: &NestedFeedbackLaw, scales: &[f64], cfg: &SimConfig) -> Result<Vec<GrowthRow>> {
    let n = law.n();
    let bell = BellTable::new(law.p.max(1))?;
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut x0 = vec![0.0; n];
        x0[0] = -scale;
        if n > 1 {
            x0[1] = scale;
        }
        let initial_rate = abs(first_derivative(law, &bell, &x0)?);
        let mut sup_rate = 0.0_f64;
        rk4(chain_rhs(law), &x0, cfg.step, cfg.steps(), |_, _, x| {
            sup_rate = sup_rate.max(abs(first_derivative(law, &bell, x)?));
            Ok(())
        })?;
        rows.push(GrowthRow {
            scale,
            initial_rate,
            sup_rate,
        });
    }
    Ok(rows)
}

fn first_derivative(law: &NestedFeedbackLaw, bell: &BellTable, x: &[f64]) -> Result<f64> {
    Ok(control_derivatives_at(law, bell, x, 1)?[0])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    sqrt(x.iter().map(|v| v * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_exact_on_cubic_time_signals() {
        // ẋ = (y, z, 1) integrates t³/6 exactly with RK4
        let mut last = vec![];
        rk4(
            |x, dx| {
                dx[0] = x[1];
                dx[1] = x[2];
                dx[2] = 1.0;
            },
            &[0.0, 0.0, 0.0],
            0.1,
            10,
            |_, _, x| {
                last = x.to_vec();
                Ok(())
            },
        )
        .unwrap();
        assert!((last[0] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn central_weights_known_rows() {
        let w = central_weights(1).unwrap();
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = central_weights(2).unwrap();
        let expect = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(central_weights(3).unwrap().len(), 7);
    }

    #[test]
    fn peak_refinement_recovers_parabola_vertex() {
        let mut tr = PeakTracker::default();
        for k in 0..=10 {
            let t = k as f64 * 0.3;
            tr.push(t, 5.0 - (t - 1.4) * (t - 1.4));
        }
        let p = tr.peaks()[0];
        assert!((p.time - 1.4).abs() < 1e-12);
        assert!((p.value - 5.0).abs() < 1e-12);
        assert!(tr.sup() >= tr.grid_sup());
    }

    #[test]
    fn sim_config_step_count() {
        let cfg = SimConfig {
            step: 0.1,
            horizon: 1.0,
            settle_tolerance: 1e-3,
            derivative_method: DerivativeMethod::Analytic,
        };
        assert_eq!(cfg.steps(), 10);
        assert!(SimConfig { step: 0.0, ..cfg }.validate().is_err());
    }
}
