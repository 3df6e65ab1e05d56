//! Saturation functions of class `S(p)`.
//!
//! A saturation is odd, `C^p`, exactly linear with slope `α` on `[−L, L]`
//! and exactly `±σ^max` outside `[−S, S]`. Only the restriction to `[0, S]`
//! is stored, as contiguous polynomial pieces in `r`; the negative half-line
//! and the flat tail are handled analytically, so oddness and the flat
//! saturation zone hold by construction.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::float::{abs, factorial};
use crate::linalg::{self, Matrix};
use crate::poly::Polynomial;
use crate::{Error, Result};

/// Samples per piece used when the root-based extremum search cannot be trusted.
const DENSE_SAMPLES_PER_PIECE: usize = 100_000;

/// Default tolerance for validating explicitly supplied pieces.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-9;

/// The constants `(σ^max, L, S, α)` together with the smoothness order `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationConstants {
    /// Saturation level `σ^max`.
    pub sigma_max: f64,
    /// Linearity threshold `L`.
    pub linear_threshold: f64,
    /// Saturation threshold `S`.
    pub saturation_threshold: f64,
    /// Slope `α` on the linear zone.
    pub alpha: f64,
    /// Smoothness order `p`.
    pub order: usize,
}

impl SaturationConstants {
    pub fn new(
        sigma_max: f64,
        linear_threshold: f64,
        saturation_threshold: f64,
        alpha: f64,
        order: usize,
    ) -> Result<Self> {
        let c = Self {
            sigma_max,
            linear_threshold,
            saturation_threshold,
            alpha,
            order,
        };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        let named = [
            ("sigma_max", self.sigma_max),
            ("L", self.linear_threshold),
            ("S", self.saturation_threshold),
            ("alpha", self.alpha),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConstants(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.saturation_threshold < self.linear_threshold {
            return Err(Error::InvalidConstants(format!(
                "S = {} is below L = {}",
                self.saturation_threshold, self.linear_threshold
            )));
        }
        if self.saturation_threshold == self.linear_threshold && self.order >= 1 {
            return Err(Error::InvalidConstants(format!(
                "S = L = {} leaves no room for a C^{} blend",
                self.linear_threshold, self.order
            )));
        }
        let linear_peak = self.alpha * self.linear_threshold;
        if linear_peak > self.sigma_max * (1.0 + 1e-12) {
            return Err(Error::InvalidConstants(format!(
                "alpha * L = {linear_peak} exceeds sigma_max = {}",
                self.sigma_max
            )));
        }
        Ok(())
    }
}

/// One polynomial piece on `[from, to] ⊆ [0, S]`.
///
/// `poly` is in powers of `r`; evaluation goes through a copy centred at
/// `from`, which keeps high-degree blends accurate away from the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub from: f64,
    pub to: f64,
    pub poly: Polynomial,
    local: Polynomial,
}

impl Piece {
    /// From coefficients in powers of `r`.
    pub fn new(from: f64, to: f64, coeffs: Vec<f64>) -> Self {
        let poly = Polynomial::new(coeffs);
        let local = poly.compose_affine(1.0, from);
        Self { from, to, poly, local }
    }

    /// From coefficients in powers of `r − from`.
    pub fn from_local(from: f64, to: f64, local: Polynomial) -> Self {
        let poly = local.compose_affine(1.0, -from);
        Self { from, to, poly, local }
    }

    /// The piece in powers of `r − from`.
    pub fn local(&self) -> &Polynomial {
        &self.local
    }

    /// `j`-th derivative of the piece polynomial at `r`.
    pub fn eval_derivative(&self, r: f64, j: usize) -> f64 {
        self.local.eval_derivative(r - self.from, j)
    }
}

/// An odd piecewise-polynomial saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationFunction {
    constants: SaturationConstants,
    pieces: Vec<Piece>,
}

/// Secant quantities `max/min σ(r)/r` over `0 < |r| ≤ S` and the clamped infimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecantBounds {
    pub sup: f64,
    pub inf: f64,
    /// `min { inf, σ^max / (S + 2·prev_max) }`.
    pub inf_clamped: f64,
}

/// Scalar quantities of one saturation in its chain context.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationAnalysis {
    pub constants: SaturationConstants,
    /// `deriv_sup[j − 1] = sup |f^{(j)}|` for `j ∈ [1, p]`.
    pub deriv_sup: Vec<f64>,
    /// `max |r − f(r)|` over `|r| ≤ S + 2·prev_max`.
    pub linear_gap: f64,
    pub secant_sup: f64,
    pub secant_inf: f64,
    pub secant_inf_clamped: f64,
    /// Saturation level of the previous saturation in the chain (0 for the first).
    pub context_prev_max: f64,
}

impl SaturationAnalysis {
    /// `sup |f^{(j)}|`, 1-based; zero beyond the analysed order.
    pub fn deriv_sup(&self, j: usize) -> f64 {
        assert!(j >= 1, "derivative orders are 1-based");
        self.deriv_sup.get(j - 1).copied().unwrap_or(0.0)
    }
}

/// Which part of the `S(p)` definition a validation check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpCondition {
    /// Constants satisfy their own invariants.
    Constants,
    /// Pieces cover `[0, S]` contiguously.
    Coverage,
    /// `r σ(r) > 0` for `r ≠ 0`.
    Sign,
    /// `σ(r) = α r` on `|r| ≤ L`.
    LinearZone,
    /// `|σ(r)| = σ^max` for `|r| ≥ S`.
    SaturationZone,
    /// `σ(−r) = −σ(r)`, including smoothness across the origin.
    OddSymmetry,
    /// Derivatives up to order `p` continuous at every knot.
    Smoothness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpCheck {
    pub condition: SpCondition,
    pub passed: bool,
    /// Worst violation found (0 when the check passes exactly).
    pub violation: f64,
    /// Where the worst violation happened, when meaningful.
    pub location: Option<f64>,
    /// Derivative order involved, for smoothness checks.
    pub derivative_order: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpReport {
    pub order: usize,
    pub tol: f64,
    pub checks: Vec<SpCheck>,
}

impl SpReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SpCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, condition: SpCondition) -> Option<&SpCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }

    fn into_result(self) -> Result<()> {
        if let Some(f) = self.failures().next() {
            return Err(Error::NotClassSp {
                order: self.order,
                reason: f.detail.clone(),
            });
        }
        Ok(())
    }
}

impl SaturationFunction {
    /// Linear on `[0, L]`, then a single Hermite polynomial of degree `2p + 1`
    /// on `[L, S]` matching value and `p` derivatives at both ends.
    ///
    /// Rejects constant sets where the blend is not monotone.
    pub fn smooth(constants: SaturationConstants) -> Result<Self> {
        constants.check()?;
        let SaturationConstants {
            sigma_max,
            linear_threshold: l,
            saturation_threshold: s,
            alpha,
            order: p,
        } = constants;

        let mut pieces = vec![Piece::new(0.0, l, vec![0.0, alpha])];
        if s > l {
            let blend = hermite_blend(p, l, s, alpha, sigma_max)
                .ok_or_else(|| Error::InvalidConstants(String::from("Hermite blend system is singular")))?;
            let slope = blend.derivative();
            let (min_slope, _) = slope.range_on(0.0, s - l);
            let slope_scale = alpha.max(sigma_max / (s - l));
            if min_slope < -1e-9 * slope_scale {
                return Err(Error::NonMonotoneBlend {
                    from: l,
                    to: s,
                    min_slope,
                });
            }
            pieces.push(Piece::from_local(l, s, blend));
        } else if abs(alpha * l - sigma_max) > 1e-12 * sigma_max {
            return Err(Error::InvalidConstants(format!(
                "hard saturation (S = L) needs alpha * L = sigma_max, got {} vs {sigma_max}",
                alpha * l
            )));
        }
        let f = Self { constants, pieces };
        f.validate(DEFAULT_VALIDATION_TOL).into_result()?;
        Ok(f)
    }

    /// Builds a saturation from explicit pieces on `[0, S]` and validates it.
    pub fn from_pieces(pieces: Vec<Piece>, constants: SaturationConstants) -> Result<Self> {
        constants.check()?;
        let f = Self::from_pieces_unvalidated(pieces, constants);
        f.validate(DEFAULT_VALIDATION_TOL).into_result()?;
        Ok(f)
    }

    /// Same as [`from_pieces`](Self::from_pieces) but skips validation, so
    /// that a candidate can be inspected with [`validate`](Self::validate).
    pub fn from_pieces_unvalidated(mut pieces: Vec<Piece>, constants: SaturationConstants) -> Self {
        pieces.sort_by(|a, b| a.from.total_cmp(&b.from));
        Self { constants, pieces }
    }

    pub fn constants(&self) -> &SaturationConstants {
        &self.constants
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn order(&self) -> usize {
        self.constants.order
    }

    /// Value of the `j`-th derivative at `r`; `j = 0` is the function value.
    pub fn eval(&self, r: f64, j: usize) -> Result<f64> {
        if j > self.constants.order {
            return Err(Error::OrderTooHigh {
                requested: j,
                max: self.constants.order,
            });
        }
        Ok(self.derivative_at(r, j))
    }

    /// Function value.
    pub fn value(&self, r: f64) -> f64 {
        self.derivative_at(r, 0)
    }

    /// `j`-th derivative without the smoothness-order check. Beyond order
    /// `p` this is a one-sided piecewise derivative.
    pub fn derivative_at(&self, r: f64, j: usize) -> f64 {
        let x = abs(r);
        let v = if x > self.constants.saturation_threshold {
            if j == 0 {
                self.constants.sigma_max
            } else {
                0.0
            }
        } else {
            self.piece_at(x).eval_derivative(x, j)
        };
        // f(−r) = −f(r)  ⇒  f^{(j)}(−r) = (−1)^{j+1} f^{(j)}(r)
        if r < 0.0 && j.is_multiple_of(2) {
            -v
        } else {
            v
        }
    }

    /// Fills `out[m] = f^{(m)}(r)` for `m = 0..out.len()`.
    pub fn derivatives_into(&self, r: f64, out: &mut [f64]) {
        let x = abs(r);
        if x > self.constants.saturation_threshold {
            for (m, o) in out.iter_mut().enumerate() {
                *o = if m == 0 { self.constants.sigma_max } else { 0.0 };
            }
        } else {
            let piece = self.piece_at(x);
            for (m, o) in out.iter_mut().enumerate() {
                *o = piece.eval_derivative(x, m);
            }
        }
        if r < 0.0 {
            for o in out.iter_mut().step_by(2) {
                *o = -*o;
            }
        }
    }

    /// Index of the piece containing `|r|`; `pieces().len()` on the flat tail.
    pub fn segment_index(&self, r: f64) -> usize {
        let x = abs(r);
        if x > self.constants.saturation_threshold {
            return self.pieces.len();
        }
        self.pieces
            .iter()
            .position(|p| x <= p.to)
            .unwrap_or(self.pieces.len() - 1)
    }

    fn piece_at(&self, x: f64) -> &Piece {
        self.pieces
            .iter()
            .find(|p| x <= p.to)
            .or(self.pieces.last())
            .expect("saturation has at least one piece")
    }

    /// Checks every `S(p)` condition at absolute tolerance `tol`.
    pub fn validate(&self, tol: f64) -> SpReport {
        let c = &self.constants;
        let p = c.order;
        let mut checks = Vec::new();

        checks.push(match c.check() {
            Ok(()) => pass(SpCondition::Constants, "constants are consistent"),
            Err(e) => fail(SpCondition::Constants, f64::INFINITY, None, None, format!("{e}")),
        });

        checks.push(self.check_coverage(tol));
        if !checks.iter().all(|c| c.passed) {
            // the remaining checks assume a well-formed piece list
            return SpReport { order: p, tol, checks };
        }
        checks.push(self.check_sign());
        checks.push(self.check_linear_zone(tol));
        checks.push(self.check_saturation_zone(tol));
        checks.push(self.check_odd_symmetry(tol));
        checks.push(self.check_smoothness(tol));
        SpReport { order: p, tol, checks }
    }

    fn check_coverage(&self, tol: f64) -> SpCheck {
        let s = self.constants.saturation_threshold;
        let Some(first) = self.pieces.first() else {
            return fail(
                SpCondition::Coverage,
                f64::INFINITY,
                None,
                None,
                String::from("no pieces"),
            );
        };
        if abs(first.from) > tol {
            return fail(
                SpCondition::Coverage,
                abs(first.from),
                Some(first.from),
                None,
                format!("first piece starts at {} instead of 0", first.from),
            );
        }
        for w in self.pieces.windows(2) {
            let gap = abs(w[1].from - w[0].to);
            if gap > tol {
                return fail(
                    SpCondition::Coverage,
                    gap,
                    Some(w[0].to),
                    None,
                    format!("gap or overlap between {} and {}", w[0].to, w[1].from),
                );
            }
        }
        for piece in &self.pieces {
            if piece.to.partial_cmp(&piece.from).is_none_or(|o| o.is_lt()) || !piece.poly.is_finite() {
                return fail(
                    SpCondition::Coverage,
                    f64::INFINITY,
                    Some(piece.from),
                    None,
                    format!("malformed piece on [{}, {}]", piece.from, piece.to),
                );
            }
        }
        let last = self.pieces.last().unwrap();
        if abs(last.to - s) > tol {
            return fail(
                SpCondition::Coverage,
                abs(last.to - s),
                Some(last.to),
                None,
                format!("last piece ends at {} instead of S = {s}", last.to),
            );
        }
        pass(SpCondition::Coverage, "pieces cover [0, S]")
    }

    fn check_sign(&self) -> SpCheck {
        let mut worst = f64::INFINITY;
        let mut at = None;
        for piece in &self.pieces {
            // on a piece touching the origin, f(r) = r·g(r) and the sign of g decides
            let (lo, loc) = if piece.from == 0.0 {
                let g = Polynomial::new(piece.poly.coeffs().iter().skip(1).copied().collect());
                let (lo, _) = g.range_on(0.0, piece.to);
                (lo, piece.from)
            } else {
                let (lo, _) = piece.poly.range_on(piece.from, piece.to);
                (lo, piece.from)
            };
            if lo < worst {
                worst = lo;
                at = Some(loc);
            }
        }
        if worst > 0.0 {
            pass(SpCondition::Sign, "r·σ(r) > 0 on (0, S]")
        } else {
            fail(
                SpCondition::Sign,
                -worst,
                at,
                None,
                format!("r·σ(r) > 0 fails on the piece starting at {:?}", at),
            )
        }
    }

    fn check_linear_zone(&self, tol: f64) -> SpCheck {
        let l = self.constants.linear_threshold;
        let linear = Polynomial::new(vec![0.0, self.constants.alpha]);
        let mut worst = 0.0_f64;
        let mut at = None;
        for piece in self.pieces.iter().filter(|p| p.from < l) {
            let diff = &piece.poly + &linear.scale(-1.0);
            let dev = diff.abs_max_on(piece.from, piece.to.min(l));
            if dev > worst {
                worst = dev;
                at = Some(piece.from);
            }
        }
        if worst <= tol {
            pass(SpCondition::LinearZone, "σ(r) = αr on [0, L]")
        } else {
            fail(
                SpCondition::LinearZone,
                worst,
                at,
                None,
                format!("σ(r) deviates from αr by {worst:.3e} on [0, L]"),
            )
        }
    }

    fn check_saturation_zone(&self, tol: f64) -> SpCheck {
        let s = self.constants.saturation_threshold;
        let end = self.pieces.last().unwrap().eval_derivative(s, 0);
        let dev = abs(end - self.constants.sigma_max);
        if dev <= tol {
            pass(SpCondition::SaturationZone, "σ(S) = σ^max")
        } else {
            fail(
                SpCondition::SaturationZone,
                dev,
                Some(s),
                None,
                format!("σ(S) = {end} differs from sigma_max = {}", self.constants.sigma_max),
            )
        }
    }

    fn check_odd_symmetry(&self, tol: f64) -> SpCheck {
        let at_origin = self.pieces[0].poly.eval(0.0);
        if abs(at_origin) <= tol {
            pass(SpCondition::OddSymmetry, "σ(0) = 0, odd extension")
        } else {
            fail(
                SpCondition::OddSymmetry,
                abs(at_origin),
                Some(0.0),
                Some(0),
                format!("σ(0) = {at_origin} is not 0"),
            )
        }
    }

    fn check_smoothness(&self, tol: f64) -> SpCheck {
        let p = self.constants.order;
        let s = self.constants.saturation_threshold;
        let mut worst = 0.0_f64;
        let mut at = None;
        let mut order_at = None;
        let mut record = |mismatch: f64, x: f64, j: usize| {
            if mismatch > worst {
                worst = mismatch;
                at = Some(x);
                order_at = Some(j);
            }
        };

        // across the origin: even derivatives of an odd function must vanish
        let first = &self.pieces[0];
        for j in (0..=p).step_by(2) {
            record(2.0 * abs(first.eval_derivative(0.0, j)), 0.0, j);
        }
        for w in self.pieces.windows(2) {
            let x = w[0].to;
            for j in 0..=p {
                let left = w[0].eval_derivative(x, j);
                let right = w[1].eval_derivative(w[1].from, j);
                record(abs(left - right), x, j);
            }
        }
        let last = self.pieces.last().unwrap();
        for j in 0..=p {
            let tail = if j == 0 { self.constants.sigma_max } else { 0.0 };
            record(abs(last.eval_derivative(s, j) - tail), s, j);
        }

        if worst <= tol {
            pass(SpCondition::Smoothness, "derivatives up to order p match at every knot")
        } else {
            let j = order_at.unwrap_or(0);
            fail(
                SpCondition::Smoothness,
                worst,
                at,
                order_at,
                format!(
                    "not C^{p}: derivative of order {j} jumps by {worst:.3e} at r = {}",
                    at.unwrap_or(f64::NAN)
                ),
            )
        }
    }

    /// `sup_r |f^{(j)}(r)|` for `j ∈ [1, p]`.
    ///
    /// Per piece, the extremes of `f^{(j)}` sit at the endpoints or at real
    /// roots of `f^{(j+1)}`. If that search yields a non-finite value the
    /// piece is densely sampled instead.
    pub fn derivative_sup(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.constants.order {
            return Err(Error::OrderTooHigh {
                requested: j,
                max: self.constants.order,
            });
        }
        Ok(self.derivative_sup_unchecked(j))
    }

    pub(crate) fn derivative_sup_unchecked(&self, j: usize) -> f64 {
        let mut sup = 0.0_f64;
        for piece in &self.pieces {
            let d = piece.local.nth_derivative(j);
            let width = piece.to - piece.from;
            let mut m = d.abs_max_on(0.0, width);
            if !m.is_finite() {
                m = dense_abs_max(|x| d.eval(x), 0.0, width, DENSE_SAMPLES_PER_PIECE);
            }
            sup = sup.max(m);
        }
        sup
    }

    /// `max |r − f(r)|` over `|r| ≤ S + 2·prev_max`.
    pub fn linear_gap_bound(&self, prev_max: f64) -> f64 {
        let s = self.constants.saturation_threshold;
        let radius = s + 2.0 * prev_max.max(0.0);
        let identity = Polynomial::new(vec![0.0, 1.0]);
        let mut gap = 0.0_f64;
        for piece in self.pieces.iter().filter(|p| p.from < radius) {
            let g = &identity + &piece.poly.scale(-1.0);
            gap = gap.max(g.abs_max_on(piece.from, piece.to.min(radius)));
        }
        if radius > s {
            let sm = self.constants.sigma_max;
            gap = gap.max(abs(s - sm)).max(abs(radius - sm));
        }
        gap
    }

    /// Extremes of `f(r)/r` over `0 < |r| ≤ S` (by oddness the negative side
    /// is identical), with the limit `α` at the origin included.
    pub fn secant_bounds(&self, prev_max: f64) -> SecantBounds {
        let alpha = self.constants.alpha;
        let (mut sup, mut inf) = (alpha, alpha);
        for piece in &self.pieces {
            let coeffs = piece.poly.coeffs();
            let (lo, hi) = if piece.from == 0.0 {
                // f(r)/r = c1 + c2 r + … once f(0) = 0 (checked by validation)
                let g = Polynomial::new(coeffs.iter().skip(1).copied().collect());
                g.range_on(0.0, piece.to)
            } else {
                // critical points of f(r)/r solve r f'(r) − f(r) = 0
                let crit = Polynomial::new(coeffs.iter().enumerate().map(|(k, &c)| (k as f64 - 1.0) * c).collect());
                let q = |r: f64| piece.poly.eval(r) / r;
                let mut lo = q(piece.from).min(q(piece.to));
                let mut hi = q(piece.from).max(q(piece.to));
                for r in crit.real_roots_in(piece.from, piece.to) {
                    lo = lo.min(q(r));
                    hi = hi.max(q(r));
                }
                (lo, hi)
            };
            sup = sup.max(hi);
            inf = inf.min(lo);
        }
        let s = self.constants.saturation_threshold;
        let clamp = self.constants.sigma_max / (s + 2.0 * prev_max.max(0.0));
        SecantBounds {
            sup,
            inf,
            inf_clamped: inf.min(clamp),
        }
    }

    /// `s ↦ (new_max/σ^max) · σ(s · L/new_L)`, rescaled exactly piece by piece.
    pub fn rescale(&self, new_max: f64, new_linear_threshold: f64) -> SaturationFunction {
        let c = self.constants;
        let amp = new_max / c.sigma_max;
        let stretch = c.linear_threshold / new_linear_threshold;
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                from: p.from / stretch,
                to: p.to / stretch,
                poly: p.poly.compose_affine(stretch, 0.0).scale(amp),
                local: p.local.compose_affine(stretch, 0.0).scale(amp),
            })
            .collect();
        let constants = SaturationConstants {
            sigma_max: new_max,
            linear_threshold: new_linear_threshold,
            saturation_threshold: c.saturation_threshold / stretch,
            alpha: c.alpha * amp * stretch,
            order: c.order,
        };
        SaturationFunction { constants, pieces }
    }

    /// All chain quantities for this saturation, with `prev_max` the level
    /// of the previous saturation in the chain.
    pub fn analyze(&self, prev_max: f64) -> SaturationAnalysis {
        let secant = self.secant_bounds(prev_max);
        SaturationAnalysis {
            constants: self.constants,
            deriv_sup: (1..=self.constants.order)
                .map(|j| self.derivative_sup_unchecked(j))
                .collect(),
            linear_gap: self.linear_gap_bound(prev_max),
            secant_sup: secant.sup,
            secant_inf: secant.inf,
            secant_inf_clamped: secant.inf_clamped,
            context_prev_max: prev_max,
        }
    }
}

/// Degree `2p + 1` polynomial on `[l, s]` with value `αl`, slope `α` and
/// zero higher derivatives at `l`; value `σ^max` and zero derivatives at `s`.
/// Returned in powers of `r − l`.
fn hermite_blend(p: usize, l: f64, s: f64, alpha: f64, sigma_max: f64) -> Option<Polynomial> {
    let h = s - l;
    // Work in τ = (r − l)/h ∈ [0, 1]; derivative data scale by h^m.
    let mut start = vec![0.0; p + 1];
    start[0] = alpha * l;
    if p >= 1 {
        start[1] = alpha * h;
    }
    let mut end = vec![0.0; p + 1];
    end[0] = sigma_max;

    // q(τ) = Σ_m start[m] τ^m / m! + Σ_i u_i τ^{p+1+i}
    let mut q = vec![0.0; 2 * p + 2];
    for (m, &v) in start.iter().enumerate() {
        q[m] = v / factorial(m);
    }
    let taylor = Polynomial::new(q.clone());
    let mut system = Matrix::zeros(p + 1, p + 1);
    let mut rhs = vec![0.0; p + 1];
    for m in 0..=p {
        for i in 0..=p {
            let k = p + 1 + i;
            system[(m, i)] = ((k - m + 1)..=k).fold(1.0, |f, t| f * t as f64);
        }
        rhs[m] = end[m] - taylor.eval_derivative(1.0, m);
    }
    let u = linalg::solve(&system, &rhs)?;
    for (i, ui) in u.into_iter().enumerate() {
        q[p + 1 + i] = ui;
    }
    Some(Polynomial::new(q).compose_affine(1.0 / h, 0.0))
}

fn dense_abs_max(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    (0..=n)
        .map(|i| abs(f(a + (b - a) * i as f64 / n as f64)))
        .fold(0.0, f64::max)
}

fn pass(condition: SpCondition, detail: &str) -> SpCheck {
    SpCheck {
        condition,
        passed: true,
        violation: 0.0,
        location: None,
        derivative_order: None,
        detail: String::from(detail),
    }
}

fn fail(
    condition: SpCondition,
    violation: f64,
    location: Option<f64>,
    derivative_order: Option<usize>,
    detail: String,
) -> SpCheck {
    SpCheck {
        condition,
        passed: false,
        violation,
        location,
        derivative_order,
        detail,
    }
}

/// The `S(2)` saturation with constants `(2, 1, 2, 1)` built from a linear
/// piece and two quartic blends, a standard reference shape for the
/// three-integrator design.
pub fn quartic_reference(order: usize) -> SaturationFunction {
    let constants = SaturationConstants {
        sigma_max: 2.0,
        linear_threshold: 1.0,
        saturation_threshold: 2.0,
        alpha: 1.0,
        order,
    };
    SaturationFunction::from_pieces_unvalidated(quartic_reference_pieces(), constants)
}

/// Pieces of [`quartic_reference`] on `[0, 2]`.
pub fn quartic_reference_pieces() -> Vec<Piece> {
    vec![
        Piece::new(0.0, 1.0, vec![0.0, 1.0]),
        Piece::new(1.0, 1.5, vec![-4.0, 15.0, -18.0, 10.0, -2.0]),
        Piece::new(1.5, 2.0, vec![50.0, -120.0, 108.0, -42.0, 6.0]),
    ]
}
