//! Nested-saturation feedback laws for chains of integrators.
//!
//! The crate synthesizes static feedbacks
//! `ν(x) = −a_n σ_n(k_nᵀx + a_{n−1} σ_{n−1}(… + a_1 σ_1(k_1ᵀx)))`
//! that globally stabilize `ẋ = J_n x + e_n u` while keeping the control
//! amplitude and its first `p` time derivatives below prescribed budgets,
//! and provides the tooling needed to check that claim numerically:
//!
//! - [`saturation`]: smooth piecewise-polynomial saturations of class `S(p)`,
//!   their validation and the scalar quantities the bounds are built from.
//! - [`bell`]: partial Bell polynomials and Faà di Bruno composition.
//! - [`bounds`]: a-priori bounds on `sup |u^{(j)}|` and their dependence on
//!   the outer linearity width `λ`.
//! - [`synthesis`]: gain construction, `λ` selection, coordinate change.
//! - [`simulate`]: fixed-step RK4 closed loop, exact control derivatives,
//!   verification and the counterexample scenarios.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod bell;
pub mod bounds;
mod error;
pub mod float;
pub mod linalg;
pub mod poly;
pub mod saturation;
pub mod simulate;
pub mod synthesis;

pub use error::{Error, Result};
pub use poly::Polynomial;
pub use saturation::{SaturationAnalysis, SaturationConstants, SaturationFunction};
pub use synthesis::{NestedFeedbackLaw, SynthesisConfig};
