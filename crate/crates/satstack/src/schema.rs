//! JSON file formats. Every top-level document carries `schema_version`.

use serde::{Deserialize, Serialize};

use satstack_core::bounds::BoundTables;
use satstack_core::saturation::{Piece, SaturationConstants, SaturationFunction};
use satstack_core::simulate::{Peak, VerificationReport};
use satstack_core::synthesis::{InnerConstants, LambdaPolicy, NestedFeedbackLaw, SynthesisConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Core(#[from] satstack_core::Error),
    #[error("{0}")]
    Invalid(String),
}

fn check_version(found: u32) -> Result<(), SchemaError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(SchemaError::Version { found })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub from: f64,
    pub to: f64,
    /// Coefficients in powers of `r`, constant term first.
    pub coeffs: Vec<f64>,
}

/// A saturation on `[0, S]`. Without `pieces` the Hermite construction is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationSpec {
    pub p: usize,
    pub sigma_max: f64,
    #[serde(rename = "L")]
    pub linear_threshold: f64,
    #[serde(rename = "S")]
    pub saturation_threshold: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceSpec>>,
}

impl SaturationSpec {
    fn constants(&self) -> Result<SaturationConstants, SchemaError> {
        Ok(SaturationConstants::new(
            self.sigma_max,
            self.linear_threshold,
            self.saturation_threshold,
            self.alpha,
            self.p,
        )?)
    }

    pub fn build(&self) -> Result<SaturationFunction, SchemaError> {
        let c = self.constants()?;
        Ok(match &self.pieces {
            None => SaturationFunction::smooth(c)?,
            Some(ps) => {
                let pieces = ps.iter().map(|p| Piece::new(p.from, p.to, p.coeffs.clone())).collect();
                SaturationFunction::from_pieces(pieces, c)?
            }
        })
    }

    /// Pieces are dropped when the Hermite construction reproduces the function,
    /// so that reloading rebuilds it bit for bit.
    pub fn from_function(f: &SaturationFunction) -> Self {
        let c = *f.constants();
        let hermite = SaturationFunction::smooth(c).is_ok_and(|h| h == *f);
        let pieces = (!hermite).then(|| {
            f.pieces()
                .iter()
                .map(|p| PieceSpec {
                    from: p.from,
                    to: p.to,
                    coeffs: p.poly.coeffs().to_vec(),
                })
                .collect()
        });
        Self {
            p: c.order,
            sigma_max: c.sigma_max,
            linear_threshold: c.linear_threshold,
            saturation_threshold: c.saturation_threshold,
            alpha: c.alpha,
            pieces,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySpec {
    /// Every derivative bound against the smallest derivative budget.
    #[serde(rename = "paper")]
    #[value(name = "paper")]
    Uniform,
    /// Bound `j` against `R_j`.
    #[default]
    PerOrder,
}

impl From<PolicySpec> for LambdaPolicy {
    fn from(p: PolicySpec) -> Self {
        match p {
            PolicySpec::Uniform => LambdaPolicy::Uniform,
            PolicySpec::PerOrder => LambdaPolicy::PerOrder,
        }
    }
}

/// Input of `synthesize` and `sweep-lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub schema_version: u32,
    /// `σ_1, …, σ_n`.
    pub saturations: Vec<SaturationSpec>,
    /// `R_0, …, R_p`.
    pub budgets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
    /// Fixed `μ_i^max` for `i = 1..n−1`; `null` entries use the default rule.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner_max_overrides: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl ConfigFile {
    pub fn to_config(&self) -> Result<SynthesisConfig, SchemaError> {
        check_version(self.schema_version)?;
        let sats = self
            .saturations
            .iter()
            .map(SaturationSpec::build)
            .collect::<Result<Vec<_>, _>>()?;
        let mut cfg = SynthesisConfig::new(sats, self.budgets.clone());
        if let Some(s) = self.safety_factor {
            cfg.safety_factor = s;
        }
        if let Some(p) = self.policy {
            cfg.lambda_policy = p.into();
        }
        cfg.inner_max_overrides = self.inner_max_overrides.clone();
        cfg.lambda_override = self.lambda;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTablesFile {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    /// `y[i−1][j−1]`.
    pub y: Vec<Vec<f64>>,
    /// `z[i−1][j−1]`.
    pub z: Vec<Vec<f64>>,
    /// `g[j−1][q−1]`, `q ≤ j`.
    pub g: Vec<Vec<f64>>,
    /// `u_bound[j−1]`.
    pub u_bound: Vec<f64>,
}

impl From<&BoundTables> for BoundTablesFile {
    fn from(t: &BoundTables) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: t.n,
            p: t.p,
            y: t.y.clone(),
            z: t.z.clone(),
            g: t.g.clone(),
            u_bound: t.u_bound.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSpec {
    /// `μ_i^max`, `i = 1..n−1`.
    pub mu_max: Vec<f64>,
    /// `L_{μ_i}`, `i = 1..n−1`.
    pub linear_threshold: Vec<f64>,
}

/// Output of `synthesize`. The law is rebuilt on load from `saturations`,
/// `inner`, `r0`, `lambda` and `p`; the derived fields are checked against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawFile {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub r0: f64,
    pub alpha: f64,
    /// `R_0, …, R_p` the law was synthesized for.
    pub budgets: Vec<f64>,
    pub saturations: Vec<SaturationSpec>,
    pub inner: InnerSpec,
    /// `a_1, …, a_n`.
    pub a: Vec<f64>,
    /// Rows `k_1, …, k_n`.
    pub k: Vec<Vec<f64>>,
    pub bounds: BoundTablesFile,
}

impl LawFile {
    pub fn from_law(law: &NestedFeedbackLaw, budgets: &[f64]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: law.n(),
            p: law.p,
            lambda: law.lambda,
            r0: law.r0(),
            alpha: law.alpha(),
            budgets: budgets.to_vec(),
            saturations: law.sats.iter().map(SaturationSpec::from_function).collect(),
            inner: InnerSpec {
                mu_max: law.inner.mu_max.clone(),
                linear_threshold: law.inner.linear_threshold.clone(),
            },
            a: law.a.clone(),
            k: law.k.clone(),
            bounds: (&law.bounds).into(),
        }
    }

    pub fn to_law(&self) -> Result<NestedFeedbackLaw, SchemaError> {
        check_version(self.schema_version)?;
        let sats = self
            .saturations
            .iter()
            .map(SaturationSpec::build)
            .collect::<Result<Vec<_>, _>>()?;
        if self.budgets.len() != self.p + 1 {
            return Err(SchemaError::Invalid(format!(
                "p = {} needs {} budgets, got {}",
                self.p,
                self.p + 1,
                self.budgets.len()
            )));
        }
        if sats.len() != self.n {
            return Err(SchemaError::Invalid(format!(
                "n = {} but {} saturations",
                self.n,
                sats.len()
            )));
        }
        let inner = InnerConstants {
            mu_max: self.inner.mu_max.clone(),
            linear_threshold: self.inner.linear_threshold.clone(),
        };
        let law = NestedFeedbackLaw::build(sats, inner, self.r0, self.lambda, self.p)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        let gains_match = law.a.len() == self.a.len()
            && law.a.iter().zip(&self.a).all(|(x, y)| close(*x, *y))
            && law.k.len() == self.k.len()
            && law
                .k
                .iter()
                .flatten()
                .zip(self.k.iter().flatten())
                .all(|(x, y)| close(*x, *y));
        if !gains_match {
            return Err(SchemaError::Invalid(String::from(
                "stored gains disagree with the rebuilt law",
            )));
        }
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub time: f64,
    pub value: f64,
}

impl From<&Peak> for PeakSpec {
    fn from(p: &Peak) -> Self {
        Self {
            time: p.time,
            value: p.value,
        }
    }
}

/// `VerificationReport` plus the budgets it was checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub x0: Vec<f64>,
    pub step: f64,
    pub horizon: f64,
    pub budgets: Vec<f64>,
    pub sup_abs_u: f64,
    pub sup_abs_u_deriv: Vec<f64>,
    pub grid_sup_abs_u_deriv: Vec<f64>,
    pub peaks: Vec<Vec<PeakSpec>>,
    pub budget_pass: Vec<bool>,
    pub bound_soundness: Vec<bool>,
    pub settle_time: Option<f64>,
    pub linear_region_entry: Option<f64>,
    pub final_state_norm: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundTablesFile>,
}

impl ReportFile {
    pub fn new(r: &VerificationReport, x0: &[f64], step: f64, horizon: f64, budgets: &[f64]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            x0: x0.to_vec(),
            step,
            horizon,
            budgets: budgets.to_vec(),
            sup_abs_u: r.sup_abs_u,
            sup_abs_u_deriv: r.sup_abs_u_deriv.clone(),
            grid_sup_abs_u_deriv: r.grid_sup_abs_u_deriv.clone(),
            peaks: r
                .peaks
                .iter()
                .map(|ps| ps.iter().map(PeakSpec::from).collect())
                .collect(),
            budget_pass: r.budget_pass.clone(),
            bound_soundness: r.bound_soundness.clone(),
            settle_time: r.settle_time,
            linear_region_entry: r.linear_region_entry,
            final_state_norm: r.final_state_norm,
            pass: r.all_budgets_pass(),
            bounds: None,
        }
    }
}

/// One row of a battery summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub run: usize,
    pub x0: Vec<f64>,
    pub sup_abs_u: f64,
    pub sup_abs_u_deriv: Vec<f64>,
    pub budgets_pass: bool,
    pub bounds_sound: bool,
    pub settle_time: Option<f64>,
    pub final_state_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryFile {
    pub schema_version: u32,
    pub seed: u64,
    pub radius: f64,
    pub step: f64,
    pub horizon: f64,
    pub runs: usize,
    pub budgets_pass: usize,
    pub bounds_sound: usize,
    pub settled: usize,
    pub rows: Vec<BatteryRow>,
}
