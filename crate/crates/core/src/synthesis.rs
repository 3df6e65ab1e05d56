//! Gain construction for the nested-saturation law.
//!
//! In the coordinates `y = Hx` the chain reads `ẏ_i = α Σ_{l>i} y_l + u`
//! with `α = α_{μ_n}`, and the law is
//! `Υ(y) = −μ_n(y_n + μ_{n−1}(y_{n−1} + … + μ_1(y_1)))` where
//! `μ_i(s) = (μ_i^max/σ_i^max) σ_i(s L_{σ_i}/L_{μ_i})`. Expanding the
//! rescalings gives the gains `a_i`, `k_i` of the `x`-form
//! `ν(x) = −a_n σ_n(k_nᵀx + a_{n−1} σ_{n−1}(… + a_1 σ_1(k_1ᵀx)))`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::{self, BoundTables, LambdaBoundPolynomial, OuterProfile};
use crate::float::{abs, binomial, powi};
use crate::linalg::Matrix;
use crate::saturation::{SaturationAnalysis, SaturationFunction, DEFAULT_VALIDATION_TOL};
use crate::{Error, Result};

/// Default fraction of each strict upper bound used for the inner levels.
pub const DEFAULT_SAFETY_FACTOR: f64 = 0.8;

/// Bisection stops once the bracket is this narrow.
pub const LAMBDA_TOLERANCE: f64 = 1e-6;

/// Relative slack accepted when checking that an inner slope equals one.
const UNIT_SLOPE_TOL: f64 = 1e-12;

/// How the derivative bounds are compared against the budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaPolicy {
    /// Every bound against `min_{j ≥ 1} R_j`.
    Uniform,
    /// Bound `j` against `R_j`.
    #[default]
    PerOrder,
}

/// Everything the synthesis needs.
#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Derivative order `p`.
    pub p: usize,
    /// `budgets[j] = R_j`, `j ∈ [0, p]`.
    pub budgets: Vec<f64>,
    /// `σ_1, …, σ_n`.
    pub saturations: Vec<SaturationFunction>,
    pub safety_factor: f64,
    pub lambda_policy: LambdaPolicy,
    /// Optional fixed `μ_i^max` for `i ∈ [1, n − 1]` (index `i − 1`).
    pub inner_max_overrides: Vec<Option<f64>>,
    /// Skip the search and use this `λ` (still checked against the budgets).
    pub lambda_override: Option<f64>,
}

impl SynthesisConfig {
    pub fn new(saturations: Vec<SaturationFunction>, budgets: Vec<f64>) -> Self {
        let p = budgets.len().saturating_sub(1);
        Self {
            p,
            budgets,
            saturations,
            safety_factor: DEFAULT_SAFETY_FACTOR,
            lambda_policy: LambdaPolicy::default(),
            inner_max_overrides: Vec::new(),
            lambda_override: None,
        }
    }

    pub fn n(&self) -> usize {
        self.saturations.len()
    }

    pub fn r0(&self) -> f64 {
        self.budgets[0]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidConfig(String::from("chain length must be at least 1")));
        }
        if self.budgets.len() != self.p + 1 {
            return Err(Error::InvalidConfig(format!(
                "expected {} budgets R_0..R_{}, got {}",
                self.p + 1,
                self.p,
                self.budgets.len()
            )));
        }
        if let Some(r) = self.budgets.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "budgets must be positive and finite, got {r}"
            )));
        }
        if !(self.safety_factor > 0.0 && self.safety_factor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "safety factor must lie in (0, 1), got {}",
                self.safety_factor
            )));
        }
        if self.inner_max_overrides.len() > n.saturating_sub(1) {
            return Err(Error::InvalidConfig(format!(
                "{} inner overrides given for {} inner saturations",
                self.inner_max_overrides.len(),
                n - 1
            )));
        }
        if let Some(l) = self.lambda_override {
            if !(l.is_finite() && l >= 1.0) {
                return Err(Error::InvalidConfig(format!("lambda must be at least 1, got {l}")));
            }
        }
        for (i, s) in self.saturations.iter().enumerate() {
            if s.order() < self.p {
                return Err(Error::OrderTooHigh {
                    requested: self.p,
                    max: s.order(),
                });
            }
            let report = s.validate(DEFAULT_VALIDATION_TOL);
            let failure = report.failures().next().map(|f| f.detail.clone());
            if let Some(detail) = failure {
                return Err(Error::NotClassSp {
                    order: s.order(),
                    reason: format!("saturation {}: {detail}", i + 1),
                });
            }
        }
        Ok(())
    }

    /// Per-order targets for `u_bound[j]`, `j ∈ [1, p]`.
    pub fn targets(&self) -> Vec<f64> {
        let rest = &self.budgets[1..];
        match self.lambda_policy {
            LambdaPolicy::PerOrder => rest.to_vec(),
            LambdaPolicy::Uniform => {
                let min = rest.iter().copied().fold(f64::INFINITY, f64::min);
                vec![min; rest.len()]
            }
        }
    }
}

/// `μ_i^max` and `L_{μ_i}` for `i ∈ [1, n − 1]` (index `i − 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct InnerConstants {
    pub mu_max: Vec<f64>,
    pub linear_threshold: Vec<f64>,
}

/// Levels and linearity thresholds of the inner chain, from the outside in:
/// `μ_{n−1}^max = θ/2`, `L_{μ_i} = μ_i^max L_{σ_i} α_{σ_i}/σ_i^max` (unit
/// slope), `μ_{i−1}^max = θ L_{μ_i}/2`, with `θ` the safety factor.
pub fn choose_inner_constants(cfg: &SynthesisConfig) -> Result<InnerConstants> {
    let n = cfg.n();
    let m = n.saturating_sub(1);
    let mut mu_max = vec![0.0; m];
    let mut lin = vec![0.0; m];
    // strict bound on μ_i^max: L_{μ_{i+1}}/2, and 1/2 for the outermost (λ ≥ 1)
    let mut upper = 0.5;
    for i in (0..m).rev() {
        let level = match cfg.inner_max_overrides.get(i).copied().flatten() {
            Some(v) => {
                if !(v > 0.0 && v < upper) {
                    return Err(Error::StabilityConditions(format!(
                        "mu_{}^max = {v} must lie in (0, {upper})",
                        i + 1
                    )));
                }
                v
            }
            None => cfg.safety_factor * upper,
        };
        let c = cfg.saturations[i].constants();
        mu_max[i] = level;
        lin[i] = level * c.linear_threshold * c.alpha / c.sigma_max;
        upper = lin[i] / 2.0;
    }
    Ok(InnerConstants {
        mu_max,
        linear_threshold: lin,
    })
}

/// `μ_1, …, μ_{n−1}`.
pub fn inner_chain(cfg: &SynthesisConfig, inner: &InnerConstants) -> Vec<SaturationFunction> {
    inner
        .mu_max
        .iter()
        .zip(&inner.linear_threshold)
        .zip(&cfg.saturations)
        .map(|((&m, &l), s)| s.rescale(m, l))
        .collect()
}

/// Analyses of the inner chain, each in the context of its predecessor.
pub fn inner_analyses(chain: &[SaturationFunction]) -> Vec<SaturationAnalysis> {
    let mut prev = 0.0;
    chain
        .iter()
        .map(|mu| {
            let a = mu.analyze(prev);
            prev = mu.constants().sigma_max;
            a
        })
        .collect()
}

pub fn outer_profile(cfg: &SynthesisConfig, inner: &InnerConstants) -> OuterProfile {
    let sigma_n = cfg.saturations.last().expect("nonempty chain");
    let prev = inner.mu_max.last().copied().unwrap_or(0.0);
    OuterProfile::new(&sigma_n.analyze(prev), cfg.r0(), prev)
}

/// The `λ`-dependence of every derivative bound for this configuration.
pub fn bound_polynomials(cfg: &SynthesisConfig, inner: &InnerConstants) -> Result<Vec<LambdaBoundPolynomial>> {
    let analyses = inner_analyses(&inner_chain(cfg, inner));
    bounds::lambda_bound_polynomials(&analyses, &outer_profile(cfg, inner), cfg.p)
}

fn meets_targets(polys: &[LambdaBoundPolynomial], targets: &[f64], lambda: f64) -> bool {
    polys.iter().zip(targets).all(|(b, &t)| b.eval(lambda) <= t)
}

/// Smallest `λ ≥ 1` (to [`LAMBDA_TOLERANCE`]) at which every bound meets
/// its target: doubling from 1 for a bracket, then bisection.
pub fn select_lambda(cfg: &SynthesisConfig, inner: &InnerConstants) -> Result<f64> {
    if cfg.p == 0 {
        return Ok(1.0);
    }
    let polys = bound_polynomials(cfg, inner)?;
    let targets = cfg.targets();
    if meets_targets(&polys, &targets, 1.0) {
        return Ok(1.0);
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while !meets_targets(&polys, &targets, hi) {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(Error::InvalidConfig(String::from("no lambda meets the budgets")));
        }
    }
    while hi - lo > LAMBDA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if meets_targets(&polys, &targets, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `y = Hx` with `y_{n−i} = Σ_{k=0}^{i} C(i, k) α^k x_{n−k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateChange {
    pub h: Matrix,
    pub alpha: f64,
}

pub fn coordinate_change(n: usize, alpha: f64) -> CoordinateChange {
    let mut h = Matrix::zeros(n, n);
    for r in 0..n {
        let i = n - 1 - r;
        for k in 0..=i {
            h[(r, n - 1 - k)] = binomial(i, k) * powi(alpha, k as i32);
        }
    }
    CoordinateChange { h, alpha }
}

impl CoordinateChange {
    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.h.mul_vec(x)
    }

    /// Closed-form inverse. `H = P D` with `P` the reversed Pascal matrix
    /// and `D = diag(α^{n−j})`, so `H⁻¹ = D⁻¹ P⁻¹` and
    /// `(P⁻¹)_{rc} = (−1)^{c−r} C(n−1−r, n−1−c)`.
    pub fn inverse(&self) -> Matrix {
        let n = self.n();
        let mut inv = Matrix::zeros(n, n);
        for r in 0..n {
            let scale = powi(self.alpha, -((n - 1 - r) as i32));
            for c in r..n {
                let sign = if (c - r) % 2 == 0 { 1.0 } else { -1.0 };
                inv[(r, c)] = scale * sign * binomial(n - 1 - r, n - 1 - c);
            }
        }
        inv
    }

    /// `‖H J_n H⁻¹ − α N‖_max`.
    pub fn conjugation_residual(&self) -> f64 {
        let n = self.n();
        let hj = &self.h * &Matrix::jordan(n);
        let lhs = &hj * &self.inverse();
        lhs.max_abs_diff(&Matrix::strict_upper_ones(n).scale(self.alpha))
    }

    /// `‖H e_n − 𝟙‖_max`.
    pub fn input_residual(&self) -> f64 {
        let n = self.n();
        self.h.column(n - 1).iter().fold(0.0, |m, v| m.max(abs(v - 1.0)))
    }
}

/// One stability-condition check for `i ∈ [1, n − 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheck {
    pub index: usize,
    pub alpha: f64,
    pub unit_slope: bool,
    pub level: f64,
    /// `L_{μ_{i+1}}/2`.
    pub level_bound: f64,
    /// `L_{μ_{i+1}}/2 − μ_i^max`; must be positive.
    pub margin: f64,
}

impl StabilityCheck {
    pub fn passed(&self) -> bool {
        self.unit_slope && self.margin > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StabilityReport {
    pub checks: Vec<StabilityCheck>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(StabilityCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &StabilityCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// `α_{μ_i} = 1` and `μ_i^max < L_{μ_{i+1}}/2` for `i ∈ [1, n − 1]`.
///
/// The slope check allows relative rounding of `1e−12`, since the inner
/// slopes are produced by floating-point rescaling.
pub fn validate_stability_conditions(mu_chain: &[SaturationFunction]) -> StabilityReport {
    let checks = mu_chain
        .windows(2)
        .enumerate()
        .map(|(idx, pair)| {
            let c = pair[0].constants();
            let bound = pair[1].constants().linear_threshold / 2.0;
            StabilityCheck {
                index: idx + 1,
                alpha: c.alpha,
                unit_slope: abs(c.alpha - 1.0) <= UNIT_SLOPE_TOL,
                level: c.sigma_max,
                level_bound: bound,
                margin: bound - c.sigma_max,
            }
        })
        .collect();
    StabilityReport { checks }
}

/// A synthesized law together with the data it was built from.
#[derive(Debug, Clone)]
pub struct NestedFeedbackLaw {
    pub p: usize,
    /// `a[i − 1] = a_i`.
    pub a: Vec<f64>,
    /// `k[i − 1] = k_i`.
    pub k: Vec<Vec<f64>>,
    pub sats: Vec<SaturationFunction>,
    pub mu_chain: Vec<SaturationFunction>,
    pub inner: InnerConstants,
    pub coords: CoordinateChange,
    pub lambda: f64,
    /// Tables computed directly from the chain at the chosen `λ`.
    pub bounds: BoundTables,
}

/// Control value and the nested arguments `z_i` (in `y`-scale, so that the
/// linear zone of layer `i` is `|z_i| ≤ L_{μ_i}`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackEval {
    pub u: f64,
    pub z: Vec<f64>,
}

/// Runs the full construction: inner constants, `λ`, gains, checks.
pub fn assemble_feedback(cfg: &SynthesisConfig) -> Result<NestedFeedbackLaw> {
    cfg.validate()?;
    let inner = choose_inner_constants(cfg)?;
    let lambda = match cfg.lambda_override {
        Some(l) => l,
        None => select_lambda(cfg, &inner)?,
    };
    let law = NestedFeedbackLaw::build(cfg.saturations.clone(), inner, cfg.r0(), lambda, cfg.p)?;
    for (j, (&b, t)) in law.bounds.u_bound.iter().zip(cfg.targets()).enumerate() {
        // the search works on the polynomial form; allow its rounding
        if b > t * (1.0 + 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "at lambda = {lambda}, bound on u^({}) is {b} > target {t}",
                j + 1
            )));
        }
    }
    Ok(law)
}

impl NestedFeedbackLaw {
    /// Deterministic construction from the free parameters.
    pub fn build(sats: Vec<SaturationFunction>, inner: InnerConstants, r0: f64, lambda: f64, p: usize) -> Result<Self> {
        let n = sats.len();
        if n == 0 {
            return Err(Error::InvalidConfig(String::from("chain length must be at least 1")));
        }
        if inner.mu_max.len() != n - 1 || inner.linear_threshold.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                expected: n - 1,
                got: inner.mu_max.len(),
            });
        }
        let sigma_n = &sats[n - 1];
        let mut mu_chain: Vec<SaturationFunction> = sats[..n - 1]
            .iter()
            .zip(inner.mu_max.iter().zip(&inner.linear_threshold))
            .map(|(s, (&m, &l))| s.rescale(m, l))
            .collect();
        mu_chain.push(sigma_n.rescale(r0, lambda));

        let report = validate_stability_conditions(&mu_chain);
        if let Some(f) = report.failures().next() {
            return Err(Error::StabilityConditions(format!(
                "layer {}: alpha = {}, mu^max = {} vs L_next/2 = {}",
                f.index, f.alpha, f.level, f.level_bound
            )));
        }

        let alpha = mu_chain[n - 1].constants().alpha;
        let coords = coordinate_change(n, alpha);
        let l_mu = |i: usize| mu_chain[i].constants().linear_threshold;
        let l_sigma = |i: usize| sats[i].constants().linear_threshold;

        let mut a = vec![0.0; n];
        a[n - 1] = r0 / sigma_n.constants().sigma_max;
        for i in 0..n - 1 {
            a[i] = l_sigma(i + 1) * inner.mu_max[i] / (l_mu(i + 1) * sats[i].constants().sigma_max);
        }
        let k = (0..n)
            .map(|i| {
                let scale = l_sigma(i) / l_mu(i);
                coords.h.row(i).iter().map(|h| scale * h).collect()
            })
            .collect();

        let mut analyses = inner_analyses(&mu_chain[..n - 1]);
        let prev = inner.mu_max.last().copied().unwrap_or(0.0);
        analyses.push(mu_chain[n - 1].analyze(prev));
        let bounds = bounds::compute_bound_tables(&analyses, p)?;

        Ok(Self {
            p,
            a,
            k,
            sats,
            mu_chain,
            inner,
            coords,
            lambda,
            bounds,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn r0(&self) -> f64 {
        self.mu_chain[self.n() - 1].constants().sigma_max
    }

    /// `α_{μ_n}`.
    pub fn alpha(&self) -> f64 {
        self.coords.alpha
    }

    /// `ν(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_with_args(x)?.u)
    }

    /// Nested evaluation of the `x`-form, innermost layer first.
    pub fn eval_with_args(&self, x: &[f64]) -> Result<FeedbackEval> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut z = Vec::with_capacity(n);
        let mut carry = 0.0;
        let mut out = 0.0;
        for i in 0..n {
            let w = dot(&self.k[i], x) + carry;
            z.push(w * self.mu_chain[i].constants().linear_threshold / self.sats[i].constants().linear_threshold);
            out = self.a[i] * self.sats[i].value(w);
            carry = out;
        }
        Ok(FeedbackEval { u: -out, z })
    }

    /// `Υ(y) = −μ_n(y_n + μ_{n−1}(… + μ_1(y_1)))`.
    pub fn eval_upsilon(&self, y: &[f64]) -> Result<FeedbackEval> {
        let n = self.n();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let mut z = Vec::with_capacity(n);
        let mut carry = 0.0;
        for i in 0..n {
            let zi = y[i] + carry;
            z.push(zi);
            carry = self.mu_chain[i].value(zi);
        }
        Ok(FeedbackEval { u: -carry, z })
    }

    /// `Υ(Hx)`.
    pub fn eval_via_coordinates(&self, x: &[f64]) -> Result<FeedbackEval> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        self.eval_upsilon(&self.coords.apply(x))
    }

    /// `L_{μ_i}` for every layer (the outermost is `λ`).
    pub fn linear_thresholds(&self) -> Vec<f64> {
        self.mu_chain.iter().map(|m| m.constants().linear_threshold).collect()
    }
}

/// Free-function form of [`NestedFeedbackLaw::eval_with_args`].
pub fn eval_feedback(law: &NestedFeedbackLaw, x: &[f64]) -> Result<FeedbackEval> {
    law.eval_with_args(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saturation::quartic_reference;

    fn reference_config() -> SynthesisConfig {
        let mut cfg = SynthesisConfig::new(vec![quartic_reference(2); 3], vec![2.0, 20.0, 18.0]);
        cfg.inner_max_overrides = vec![Some(1.0 / 12.0), None];
        cfg
    }

    #[test]
    fn inner_constants_of_reference_chain() {
        let mut cfg = reference_config();
        cfg.inner_max_overrides.clear();
        let c = choose_inner_constants(&cfg).unwrap();
        assert!((c.mu_max[1] - 0.4).abs() < 1e-15);
        assert!((c.linear_threshold[1] - 0.2).abs() < 1e-15);
        assert!((c.mu_max[0] - 0.08).abs() < 1e-15);
        let c = choose_inner_constants(&reference_config()).unwrap();
        assert_eq!(c.mu_max[0], 1.0 / 12.0);
        assert!((c.linear_threshold[0] - 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn single_integrator_has_no_inner_constants() {
        let cfg = SynthesisConfig::new(vec![quartic_reference(2)], vec![1.0, 1.0]);
        let c = choose_inner_constants(&cfg).unwrap();
        assert!(c.mu_max.is_empty() && c.linear_threshold.is_empty());
    }

    #[test]
    fn override_at_the_strict_bound_is_rejected() {
        let mut cfg = reference_config();
        cfg.inner_max_overrides = vec![Some(0.1), None];
        assert!(matches!(
            choose_inner_constants(&cfg),
            Err(Error::StabilityConditions(_))
        ));
    }

    #[test]
    fn stability_check_is_strict() {
        let s = quartic_reference(2);
        let chain = vec![s.rescale(0.1, 0.05), s.rescale(0.4, 0.2), s.rescale(2.0, 6.5)];
        let report = validate_stability_conditions(&chain);
        assert!(!report.passed());
        assert_eq!(report.failures().next().unwrap().index, 1);
        assert_eq!(report.checks[0].margin, 0.0);
        assert!(validate_stability_conditions(&chain[2..]).passed());
    }

    #[test]
    fn zero_order_selects_unit_lambda() {
        let cfg = SynthesisConfig::new(vec![quartic_reference(2); 2], vec![1.0]);
        let inner = choose_inner_constants(&cfg).unwrap();
        assert_eq!(select_lambda(&cfg, &inner).unwrap(), 1.0);
    }

    #[test]
    fn coordinate_change_rows() {
        let a = 1.0 / 6.5;
        let h = coordinate_change(3, a);
        assert_eq!(h.h.row(2), &[0.0, 0.0, 1.0]);
        assert_eq!(h.h.row(1), &[0.0, a, 1.0]);
        assert_eq!(h.h.row(0), &[a * a, 2.0 * a, 1.0]);
        assert_eq!(coordinate_change(1, a).h, Matrix::identity(1));
        let round = &h.h * &h.inverse();
        assert!(round.max_abs_diff(&Matrix::identity(3)) < 1e-14);
    }

    #[test]
    fn law_is_odd_and_vanishes_at_origin() {
        let mut cfg = reference_config();
        cfg.lambda_override = Some(6.5);
        let law = assemble_feedback(&cfg).unwrap();
        assert_eq!(law.eval(&[0.0; 3]).unwrap(), 0.0);
        let x = [0.3, -1.1, 4.0];
        let xm: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(law.eval(&x).unwrap(), -law.eval(&xm).unwrap());
        assert_eq!(law.eval(&[0.0, 0.0, 1e6]).unwrap(), -2.0);
        assert!(law.eval(&[1.0, 2.0]).is_err());
    }
}
