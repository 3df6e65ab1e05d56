//! A-priori bounds on the control derivatives of a nested-saturation loop.
//!
//! For the chain `μ_1, …, μ_n` in the `y`-coordinates, the tables
//! `Y_{i,j}`, `Z_{i,j}` bound `|y_i^{(j)}|` and `|z_i^{(j)}|` on the region
//! where the inner saturations can be active, and
//! `u_bound[j] = Σ_q G_{q,j} μ̄_{n,q}` bounds `sup_t |u^{(j)}(t)|` along every
//! closed-loop trajectory. None of the entries depend on initial conditions.
//!
//! The recursion is written once over [`BoundScalar`], so the same code
//! produces numeric tables (`f64`) and the `λ`-dependence of the bound as a
//! polynomial in `1/λ` ([`Polynomial`]).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bell::BellTable;
use crate::float::abs;
use crate::poly::Polynomial;
use crate::saturation::{SaturationAnalysis, SaturationFunction};
use crate::{Error, Result};

/// One application of the composition bound: `M + Σ_a σ̄_a B_{k,a}(Q_1, …)`.
///
/// Bounds `|h^{(k)}|` for `h = g + σ(f)` given `|g^{(k)}| ≤ M`,
/// `|f^{(l)}| ≤ Q_l` wherever `σ` is not flat, and `σ̄_a = sup |σ^{(a)}|`.
pub fn composed_derivative_bound(k: usize, m: f64, q: &[f64], sigma_sups: &[f64]) -> Result<f64> {
    if k < 1 {
        return Err(Error::BellIndex { k, a: 0 });
    }
    for len in [q.len(), sigma_sups.len()] {
        if len < k {
            return Err(Error::TooFewArguments { needed: k, got: len });
        }
    }
    for &v in core::iter::once(&m).chain(&q[..k]).chain(&sigma_sups[..k]) {
        if v.is_nan() || v < 0.0 {
            return Err(Error::NegativeBound(v));
        }
    }
    let table = BellTable::new(k)?;
    let mut acc = m;
    for a in 1..=k {
        acc += sigma_sups[a - 1] * table.eval_upper(k, a, q)?;
    }
    Ok(acc)
}

/// Values the bound recursion can run on.
pub trait BoundScalar: Clone {
    fn constant(c: f64) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
}

impl BoundScalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }

    fn plus(&self, other: &Self) -> Self {
        self + other
    }

    fn times(&self, other: &Self) -> Self {
        self * other
    }
}

impl BoundScalar for Polynomial {
    fn constant(c: f64) -> Self {
        Polynomial::constant(c)
    }

    fn plus(&self, other: &Self) -> Self {
        self + other
    }

    fn times(&self, other: &Self) -> Self {
        self * other
    }
}

/// What the recursion needs from the chain, independent of representation.
#[derive(Debug, Clone)]
struct RecursionInputs<T> {
    p: usize,
    /// `μ_i^max`, 0-based over `i ∈ [1, n]`.
    mu_max: Vec<f64>,
    /// `μ̄_{i,j}`, `[i − 1][j − 1]`.
    mu_bar: Vec<Vec<T>>,
    /// `b_{μ_i}` for `i ∈ [1, n − 1]`.
    linear_gap: Vec<f64>,
    /// `α_{μ_n}`.
    alpha_outer: T,
    /// `(b̄_{μ_n} − B̲_{μ_n}) (S_{μ_n} + 2 μ_{n−1}^max)`.
    outer_gap: T,
}

#[derive(Debug, Clone)]
struct Tables<T> {
    y: Vec<Vec<T>>,
    z: Vec<Vec<T>>,
    g: Vec<Vec<T>>,
    u: Vec<T>,
}

fn bell_generic<T: BoundScalar>(bell: &BellTable, k: usize, a: usize, args: &[T]) -> Result<T> {
    let mut acc = T::constant(0.0);
    for term in bell.terms(k, a)? {
        let mut prod = T::constant(term.coeff as f64);
        for (l, &d) in term.delta.iter().enumerate() {
            for _ in 0..d {
                prod = prod.times(&args[l]);
            }
        }
        acc = acc.plus(&prod);
    }
    Ok(acc)
}

fn run_recursion<T: BoundScalar>(inp: &RecursionInputs<T>) -> Result<Tables<T>> {
    let n = inp.mu_max.len();
    let p = inp.p;
    let zero = T::constant(0.0);
    let mut y = vec![vec![zero.clone(); p]; n];
    let mut z = vec![vec![zero.clone(); p]; n];
    let mut g: Vec<Vec<T>> = (1..=p).map(|j| vec![zero.clone(); j]).collect();
    let mut u = vec![zero.clone(); p];
    if p == 0 {
        return Ok(Tables { y, z, g, u });
    }
    let bell = BellTable::new(p.max(1))?;

    // j = 1
    y[n - 1][0] = T::constant(inp.mu_max[n - 1]);
    for i in 0..n - 1 {
        let gaps: f64 = inp.linear_gap[i + 1..n - 1].iter().sum();
        let inner = inp.alpha_outer.times(&T::constant(gaps + inp.mu_max[i]));
        y[i][0] = inp.outer_gap.plus(&inner);
    }
    z[0][0] = y[0][0].clone();
    for i in 1..n {
        z[i][0] = y[i][0].plus(&inp.mu_bar[i - 1][0].times(&z[i - 1][0]));
    }
    g[0][0] = z[n - 1][0].clone();
    u[0] = g[0][0].times(&inp.mu_bar[n - 1][0]);

    for j in 2..=p {
        for i in 0..n {
            let mut acc = u[j - 2].clone();
            for b in (i + 1)..n {
                acc = acc.plus(&inp.alpha_outer.times(&y[b][j - 2]));
            }
            y[i][j - 1] = acc;
        }
        z[0][j - 1] = y[0][j - 1].clone();
        for i in 1..n {
            let mut acc = y[i][j - 1].clone();
            for a in 1..=j {
                let b = bell_generic(&bell, j, a, &z[i - 1][..j - a + 1])?;
                acc = acc.plus(&inp.mu_bar[i - 1][a - 1].times(&b));
            }
            z[i][j - 1] = acc;
        }
        let mut total = zero.clone();
        for q in 1..=j {
            let gq = bell_generic(&bell, j, q, &z[n - 1][..j - q + 1])?;
            total = total.plus(&gq.times(&inp.mu_bar[n - 1][q - 1]));
            g[j - 1][q - 1] = gq;
        }
        u[j - 1] = total;
    }
    Ok(Tables { y, z, g, u })
}

/// The `Y`, `Z`, `G` tables and the resulting control-derivative bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTables {
    pub n: usize,
    pub p: usize,
    /// `y[i − 1][j − 1] = Y_{i,j}`.
    pub y: Vec<Vec<f64>>,
    /// `z[i − 1][j − 1] = Z_{i,j}`.
    pub z: Vec<Vec<f64>>,
    /// `g[j − 1][q − 1] = G_{q,j}` for `q ≤ j`.
    pub g: Vec<Vec<f64>>,
    /// `u_bound[j − 1]` bounds `sup_t |u^{(j)}(t)|`.
    pub u_bound: Vec<f64>,
}

impl BoundTables {
    /// Bound on `sup |u^{(j)}|` for `j ∈ [1, p]`.
    pub fn u_bound(&self, j: usize) -> f64 {
        self.u_bound[j - 1]
    }

    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.y[i - 1][j - 1]
    }

    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i - 1][j - 1]
    }

    pub fn g(&self, q: usize, j: usize) -> f64 {
        self.g[j - 1][q - 1]
    }
}

/// Fills the tables from one analysis per saturation `μ_1, …, μ_n`.
///
/// Each analysis must carry derivative suprema up to order `p`; the outer
/// one must have been analysed in the context of `μ_{n−1}^max`.
pub fn compute_bound_tables(analyses: &[SaturationAnalysis], p: usize) -> Result<BoundTables> {
    let n = analyses.len();
    if n == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "bound tables need at least one saturation",
        )));
    }
    for (i, a) in analyses.iter().enumerate() {
        if a.deriv_sup.len() < p {
            return Err(Error::InvalidConfig(format!(
                "analysis of saturation {} carries {} derivative bounds, {p} needed",
                i + 1,
                a.deriv_sup.len()
            )));
        }
    }
    let outer = &analyses[n - 1];
    let prev_max = if n >= 2 {
        analyses[n - 2].constants.sigma_max
    } else {
        0.0
    };
    if abs(outer.context_prev_max - prev_max) > 1e-12 * prev_max.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "outer saturation analysed with previous level {} but the chain has {prev_max}",
            outer.context_prev_max
        )));
    }
    let radius = outer.constants.saturation_threshold + 2.0 * prev_max;
    let inputs = RecursionInputs {
        p,
        mu_max: analyses.iter().map(|a| a.constants.sigma_max).collect(),
        mu_bar: analyses.iter().map(|a| a.deriv_sup[..p].to_vec()).collect(),
        linear_gap: analyses[..n - 1].iter().map(|a| a.linear_gap).collect(),
        alpha_outer: outer.constants.alpha,
        outer_gap: (outer.secant_sup - outer.secant_inf_clamped) * radius,
    };
    let t = run_recursion(&inputs)?;
    Ok(BoundTables {
        n,
        p,
        y: t.y,
        z: t.z,
        g: t.g,
        u_bound: t.u,
    })
}

/// The `λ`-free data of the outer saturation `μ_n(s) = (R_0/σ_n^max) σ_n(s L_{σ_n}/λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterProfile {
    /// Amplitude budget `R_0 = μ_n^max`.
    pub r0: f64,
    /// `α_μ̃ = R_0 L_{σ_n} α_{σ_n} / σ_n^max`, so that `α_{μ_n} = α_μ̃/λ`.
    pub alpha_tilde: f64,
    /// `μ̃_{n,q} = R_0 σ̄_{n,q} L_{σ_n}^q / σ_n^max`, so that `μ̄_{n,q} = μ̃_{n,q}/λ^q`.
    pub mu_tilde: Vec<f64>,
    /// `α_μ̃ b̄_{σ_n} / α_{σ_n}`, so that `b̄_{μ_n} = secant_sup_scaled/λ`.
    pub secant_sup_scaled: f64,
    /// `α_μ̃ b̲_{σ_n} / α_{σ_n}`.
    pub secant_inf_scaled: f64,
    /// `S_{σ_n} / L_{σ_n}`, so that `S_{μ_n} = λ · s_over_l`.
    pub s_over_l: f64,
    /// `μ_{n−1}^max` (0 for a single integrator).
    pub prev_max: f64,
}

impl OuterProfile {
    /// From an analysis of the user saturation `σ_n` itself.
    pub fn new(sigma_n: &SaturationAnalysis, r0: f64, prev_max: f64) -> Self {
        let c = &sigma_n.constants;
        let alpha_tilde = r0 * c.linear_threshold * c.alpha / c.sigma_max;
        let mu_tilde = sigma_n
            .deriv_sup
            .iter()
            .enumerate()
            .map(|(idx, &s)| r0 * s * crate::float::powi(c.linear_threshold, idx as i32 + 1) / c.sigma_max)
            .collect();
        Self {
            r0,
            alpha_tilde,
            mu_tilde,
            secant_sup_scaled: alpha_tilde * sigma_n.secant_sup / c.alpha,
            secant_inf_scaled: alpha_tilde * sigma_n.secant_inf / c.alpha,
            s_over_l: c.saturation_threshold / c.linear_threshold,
            prev_max,
        }
    }
}

/// `λ ↦ Σ_q G_{q,j}(λ) μ̃_{n,q}/λ^q` as polynomials in `w = 1/λ`.
///
/// The clamp `B̲_{μ_n} = min{b̲_{μ_n}, R_0/(S_{μ_n} + 2μ_{n−1}^max)}` switches
/// branch at most once in `λ`; the recursion is monotone in the outer gap
/// term, so the bound is the larger of the two branch polynomials. Each
/// branch has nonnegative coefficients and no constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaBoundPolynomial {
    pub order: usize,
    branches: Vec<Polynomial>,
}

impl LambdaBoundPolynomial {
    pub fn eval(&self, lambda: f64) -> f64 {
        let w = 1.0 / lambda;
        self.branches.iter().map(|b| b.eval(w)).fold(0.0, f64::max)
    }

    /// Polynomials in `w = 1/λ`; the bound is their pointwise maximum.
    pub fn branches(&self) -> &[Polynomial] {
        &self.branches
    }

    /// The branch active at `λ`.
    pub fn active_branch(&self, lambda: f64) -> &Polynomial {
        let w = 1.0 / lambda;
        self.branches
            .iter()
            .max_by(|a, b| a.eval(w).total_cmp(&b.eval(w)))
            .expect("at least one branch")
    }
}

/// Bound polynomials for every order `j ∈ [1, p]`.
///
/// `inner` holds the analyses of `μ_1, …, μ_{n−1}` (each in its chain
/// context); the outer saturation enters only through `outer`.
pub fn lambda_bound_polynomials(
    inner: &[SaturationAnalysis],
    outer: &OuterProfile,
    p: usize,
) -> Result<Vec<LambdaBoundPolynomial>> {
    let n = inner.len() + 1;
    for (i, a) in inner.iter().enumerate() {
        if a.deriv_sup.len() < p {
            return Err(Error::InvalidConfig(format!(
                "analysis of saturation {} carries {} derivative bounds, {p} needed",
                i + 1,
                a.deriv_sup.len()
            )));
        }
    }
    if outer.mu_tilde.len() < p {
        return Err(Error::InvalidConfig(format!(
            "outer profile carries {} derivative bounds, {p} needed",
            outer.mu_tilde.len()
        )));
    }
    let m = outer.prev_max;
    // S_{μ_n} + 2m = λ (s_over_l + 2m w), so products with the secants are polynomial in w
    let radius_w = Polynomial::new(vec![outer.s_over_l, 2.0 * m]);
    let gap_unclamped = radius_w.scale(outer.secant_sup_scaled - outer.secant_inf_scaled);
    let gap_clamped = &radius_w.scale(outer.secant_sup_scaled) + &Polynomial::constant(-outer.r0);

    let mut mu_max: Vec<f64> = inner.iter().map(|a| a.constants.sigma_max).collect();
    mu_max.push(outer.r0);
    let mut mu_bar: Vec<Vec<Polynomial>> = inner
        .iter()
        .map(|a| a.deriv_sup[..p].iter().map(|&s| Polynomial::constant(s)).collect())
        .collect();
    mu_bar.push(
        outer.mu_tilde[..p]
            .iter()
            .enumerate()
            .map(|(idx, &mt)| Polynomial::monomial(mt, idx + 1))
            .collect(),
    );

    let mut branches_per_order: Vec<Vec<Polynomial>> = vec![Vec::new(); p];
    let gap_branches = if n == 1 {
        vec![Polynomial::zero()]
    } else {
        vec![gap_unclamped, gap_clamped]
    };
    for gap in gap_branches {
        let inputs = RecursionInputs {
            p,
            mu_max: mu_max.clone(),
            mu_bar: mu_bar.clone(),
            linear_gap: inner.iter().map(|a| a.linear_gap).collect(),
            alpha_outer: Polynomial::monomial(outer.alpha_tilde, 1),
            outer_gap: gap,
        };
        let t = run_recursion(&inputs)?;
        for (j, poly) in t.u.into_iter().enumerate() {
            branches_per_order[j].push(poly);
        }
    }
    Ok(branches_per_order
        .into_iter()
        .enumerate()
        .map(|(j, branches)| LambdaBoundPolynomial { order: j + 1, branches })
        .collect())
}

/// Builds `μ_n` for a given `λ` and computes the tables directly from the
/// analyses of the rescaled saturation (no `λ`-scaling identities used).
pub fn tables_at_lambda(
    inner: &[SaturationAnalysis],
    sigma_n: &SaturationFunction,
    r0: f64,
    lambda: f64,
    p: usize,
) -> Result<BoundTables> {
    let prev_max = inner.last().map_or(0.0, |a| a.constants.sigma_max);
    let mu_n = sigma_n.rescale(r0, lambda);
    let mut analyses = inner.to_vec();
    analyses.push(mu_n.analyze(prev_max));
    compute_bound_tables(&analyses, p)
}
