//! Partial Bell polynomials and Faà di Bruno's formula.
//!
//! `B_{k,a}(x_1, …, x_{k−a+1}) = Σ_δ c_δ Π_l x_l^{δ_l}` where `δ` ranges
//! over tuples of nonnegative integers with `Σ δ_l = a` and `Σ l·δ_l = k`,
//! and `c_δ = k! / Π_l (δ_l! (l!)^{δ_l})`.
//!
//! With these, `d^k/dt^k ρ(φ(t)) = Σ_{a=1}^k ρ^{(a)}(φ(t)) B_{k,a}(φ', …, φ^{(k−a+1)})`.

use alloc::vec;
use alloc::vec::Vec;

use crate::float::powi;
use crate::{Error, Result};

/// Orders memoized by [`BellTable::default`].
pub const DEFAULT_MAX_ORDER: usize = 12;

/// An index tuple `δ = (δ_1, …, δ_{k−a+1})` of `B_{k,a}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTuple {
    pub delta: Vec<u32>,
    pub k: usize,
    pub a: usize,
}

impl PartitionTuple {
    /// `c_δ`, exact; errors if it does not fit in 64 bits.
    pub fn coefficient(&self) -> Result<u64> {
        let overflow = Error::CoefficientOverflow { k: self.k };
        let mut numer: u128 = 1;
        for i in 2..=self.k as u128 {
            numer = numer.checked_mul(i).ok_or(overflow.clone())?;
        }
        let mut denom: u128 = 1;
        for (idx, &d) in self.delta.iter().enumerate() {
            let l = idx as u128 + 1;
            let l_fact: u128 = (1..=l).product();
            for i in 1..=d as u128 {
                denom = denom.checked_mul(i).ok_or(overflow.clone())?;
                denom = denom.checked_mul(l_fact).ok_or(overflow.clone())?;
            }
        }
        u64::try_from(numer / denom).map_err(|_| overflow)
    }
}

/// Every `δ` of `B_{k,a}`, in decreasing lexicographic order.
pub fn enumerate_partitions(k: usize, a: usize) -> Result<Vec<PartitionTuple>> {
    if a < 1 || a > k {
        return Err(Error::BellIndex { k, a });
    }
    let len = k - a + 1;
    let mut out = Vec::new();
    let mut delta = vec![0u32; len];
    fill(&mut delta, 0, a, k, &mut |d| {
        out.push(PartitionTuple {
            delta: d.to_vec(),
            k,
            a,
        })
    });
    Ok(out)
}

/// Assigns `delta[pos..]` so that the remaining count and weight are met.
fn fill(delta: &mut [u32], pos: usize, count: usize, weight: usize, emit: &mut impl FnMut(&[u32])) {
    let len = delta.len();
    if pos == len {
        if count == 0 && weight == 0 {
            emit(delta);
        }
        return;
    }
    let l = pos + 1;
    // remaining positions carry weights l..=len per unit
    if count * l > weight || weight > count * len {
        return;
    }
    let max_here = count.min(weight / l);
    for d in (0..=max_here).rev() {
        delta[pos] = d as u32;
        fill(delta, pos + 1, count - d, weight - d * l, emit);
    }
    delta[pos] = 0;
}

/// One term `c_δ Π x_l^{δ_l}` of a partial Bell polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BellTerm {
    pub coeff: u64,
    pub delta: Vec<u32>,
}

impl BellTerm {
    pub fn eval(&self, vals: &[f64]) -> f64 {
        self.delta
            .iter()
            .zip(vals)
            .filter(|(&d, _)| d > 0)
            .fold(self.coeff as f64, |acc, (&d, &x)| acc * powi(x, d as i32))
    }
}

/// Memoized terms of `B_{k,a}` for `1 ≤ a ≤ k ≤ max_order`.
#[derive(Debug, Clone)]
pub struct BellTable {
    max_order: usize,
    // terms[k − 1][a − 1]
    terms: Vec<Vec<Vec<BellTerm>>>,
}

impl Default for BellTable {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_ORDER).expect("default Bell table fits in u64")
    }
}

impl BellTable {
    pub fn new(max_order: usize) -> Result<Self> {
        let mut terms = Vec::with_capacity(max_order);
        for k in 1..=max_order {
            let mut row = Vec::with_capacity(k);
            for a in 1..=k {
                let tuples = enumerate_partitions(k, a)?;
                let mut entry = Vec::with_capacity(tuples.len());
                for t in tuples {
                    entry.push(BellTerm {
                        coeff: t.coefficient()?,
                        delta: t.delta,
                    });
                }
                row.push(entry);
            }
            terms.push(row);
        }
        Ok(Self { max_order, terms })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn terms(&self, k: usize, a: usize) -> Result<&[BellTerm]> {
        if a < 1 || a > k || k > self.max_order {
            return Err(Error::BellIndex { k, a });
        }
        Ok(&self.terms[k - 1][a - 1])
    }

    /// `B_{k,a}(vals[0], …, vals[k − a])`.
    pub fn eval(&self, k: usize, a: usize, vals: &[f64]) -> Result<f64> {
        let terms = self.terms(k, a)?;
        let needed = k - a + 1;
        if vals.len() < needed {
            return Err(Error::TooFewArguments {
                needed,
                got: vals.len(),
            });
        }
        Ok(terms.iter().map(|t| t.eval(vals)).sum())
    }

    /// [`eval`](Self::eval) on magnitude bounds `Q_l ≥ 0`.
    pub fn eval_upper(&self, k: usize, a: usize, bounds: &[f64]) -> Result<f64> {
        if let Some(&neg) = bounds.iter().find(|&&b| b.is_nan() || b < 0.0) {
            return Err(Error::NegativeBound(neg));
        }
        self.eval(k, a, bounds)
    }

    /// `d^k/dt^k ρ(φ(t))` from `outer[a − 1] = ρ^{(a)}(φ(t))` and
    /// `inner[l − 1] = φ^{(l)}(t)`.
    pub fn faa_di_bruno(&self, k: usize, outer: &[f64], inner: &[f64]) -> Result<f64> {
        if k < 1 {
            return Err(Error::BellIndex { k, a: 0 });
        }
        for len in [outer.len(), inner.len()] {
            if len < k {
                return Err(Error::TooFewArguments { needed: k, got: len });
            }
        }
        let mut acc = 0.0;
        for a in 1..=k {
            if outer[a - 1] != 0.0 {
                acc += outer[a - 1] * self.eval(k, a, inner)?;
            }
        }
        Ok(acc)
    }
}

fn direct_terms(k: usize, a: usize) -> Result<Vec<BellTerm>> {
    enumerate_partitions(k, a)?
        .into_iter()
        .map(|t| {
            Ok(BellTerm {
                coeff: t.coefficient()?,
                delta: t.delta,
            })
        })
        .collect()
}

/// `B_{k,a}(vals)` without a precomputed table.
pub fn bell_eval(k: usize, a: usize, vals: &[f64]) -> Result<f64> {
    let terms = direct_terms(k, a)?;
    let needed = k - a + 1;
    if vals.len() < needed {
        return Err(Error::TooFewArguments {
            needed,
            got: vals.len(),
        });
    }
    Ok(terms.iter().map(|t| t.eval(vals)).sum())
}

/// `B_{k,a}(Q_1, …)` for nonnegative bounds `Q_l`.
pub fn bell_eval_upper(k: usize, a: usize, bounds: &[f64]) -> Result<f64> {
    if let Some(&neg) = bounds.iter().find(|&&b| b.is_nan() || b < 0.0) {
        return Err(Error::NegativeBound(neg));
    }
    bell_eval(k, a, bounds)
}

/// Faà di Bruno's formula without a precomputed table.
pub fn faa_di_bruno(k: usize, outer: &[f64], inner: &[f64]) -> Result<f64> {
    if k < 1 {
        return Err(Error::BellIndex { k, a: 0 });
    }
    for len in [outer.len(), inner.len()] {
        if len < k {
            return Err(Error::TooFewArguments { needed: k, got: len });
        }
    }
    let mut acc = 0.0;
    for a in 1..=k {
        acc += outer[a - 1] * bell_eval(k, a, inner)?;
    }
    Ok(acc)
}
