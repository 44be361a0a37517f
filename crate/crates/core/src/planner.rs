//! A-priori sample allocation.
//!
//! Given the standard deviation `delta`, fine-level error `e`, convergence
//! rate `alpha` and amplification exponent `sigma`, each strategy fixes the
//! number of levels `L` and the per-term sample sizes `M_l`:
//!
//! | strategy | `M_l` (before rounding)                              | error bound   |
//! |----------|------------------------------------------------------|---------------|
//! | classical| `delta^2 / e^2` (single level)                       | `2 e`         |
//! | S1       | `A * 2^(2 alpha (l-1))`                              | `(L + 2) e`   |
//! | S2       | `A * 4^((l-1)(alpha+1))`                             | `4 e`         |
//! | S3       | `A * (L-l+1)^(2(1+sigma)) * 2^(2 alpha (l-1))`       | `(3+1/sigma) e` |
//! | S4       | `A * l^(2(1+sigma)) * 2^(2 alpha (l-1))`             | `(3+1/sigma) e` |
//!
//! with `A = 2 (1 + 4^alpha)`. `L` is chosen so the coarsest term satisfies
//! `delta / sqrt(M_L) = e`; it is rounded up and `M_l` is rounded to nearest
//! (half up). Both are clamped to at least 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{relative_dof, ResolutionHierarchy};
use crate::stats::{difference_amplification, total_samples_per_level, SolutionParameters};

/// Largest level count the strategy 4 scan will consider.
pub const MAX_SCAN_LEVELS: u32 = 64;

/// Slack applied before taking the ceiling of a real-valued level count, so
/// that a value which is an integer up to rounding error is not bumped up.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyId {
    ClassicalMC,
    S1,
    S2,
    S3,
    S4,
}

impl StrategyId {
    pub const ALL: [StrategyId; 5] = [Self::ClassicalMC, Self::S1, Self::S2, Self::S3, Self::S4];

    pub fn label(&self) -> &'static str {
        match self {
            Self::ClassicalMC => "Classical MC",
            Self::S1 => "Strategy #1",
            Self::S2 => "Strategy #2",
            Self::S3 => "Strategy #3",
            Self::S4 => "Strategy #4",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::ClassicalMC => "ClassicalMC",
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
            Self::S4 => "S4",
        };
        f.write_str(s)
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classicalmc" | "classical" | "mc" => Ok(Self::ClassicalMC),
            "s1" | "1" => Ok(Self::S1),
            "s2" | "2" => Ok(Self::S2),
            "s3" | "3" => Ok(Self::S3),
            "s4" | "4" => Ok(Self::S4),
            _ => Err(Error::InvalidInput(format!("unknown strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub strategy: StrategyId,
    #[serde(rename = "L")]
    pub levels: usize,
    #[serde(rename = "M")]
    pub samples: Vec<u64>,
    #[serde(rename = "M_total")]
    pub totals: Vec<u64>,
    pub error_bound_multiplier: f64,
    pub relative_load: f64,
    pub inputs: SolutionParameters,
}

impl LevelPlan {
    fn build(
        strategy: StrategyId,
        samples: Vec<u64>,
        error_bound_multiplier: f64,
        inputs: SolutionParameters,
    ) -> Result<Self> {
        let totals = total_samples_per_level(&samples)?;
        let mut plan = Self {
            strategy,
            levels: samples.len(),
            samples,
            totals,
            error_bound_multiplier,
            relative_load: 0.0,
            inputs,
        };
        plan.relative_load = predicted_load(&plan)?;
        Ok(plan)
    }

    /// Structural checks for plans read back from disk.
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.samples.len() != self.levels {
            return Err(Error::InvalidInput(format!(
                "plan declares L = {} but lists {} sample sizes",
                self.levels,
                self.samples.len()
            )));
        }
        if self.strategy == StrategyId::ClassicalMC && self.levels != 1 {
            return Err(Error::InvalidInput("a classical MC plan has exactly one level".into()));
        }
        if total_samples_per_level(&self.samples)? != self.totals {
            return Err(Error::InvalidInput("M_total is inconsistent with M".into()));
        }
        self.inputs.validate()
    }

    /// The a-priori error bound, `multiplier * e`.
    pub fn error_bound(&self) -> f64 {
        self.error_bound_multiplier * self.inputs.e
    }
}

/// Cost in units of one finest-level run: `sum_{l<L} M_l (N_l + N_{l+1}) + M_L N_L`
/// with `N_l / N_1 = 8^-(l-1)`. A classical MC plan costs `M_1`.
pub fn predicted_load(plan: &LevelPlan) -> Result<f64> {
    if plan.strategy == StrategyId::ClassicalMC {
        return Ok(plan.samples[0] as f64);
    }
    let l_max = plan.samples.len();
    let mut load = 0.0;
    for (i, &m) in plan.samples.iter().enumerate() {
        let level = i as u32 + 1;
        let per_sample =
            if i + 1 < l_max { relative_dof(level)? + relative_dof(level + 1)? } else { relative_dof(level)? };
        load += m as f64 * per_sample;
    }
    Ok(load)
}

fn check_params(p: &SolutionParameters) -> Result<()> {
    p.validate()
}

fn round_size(x: f64) -> Result<u64> {
    if !x.is_finite() || x >= 9.0e15 {
        return Err(Error::InvalidInput(format!("sample size {x:e} is not representable")));
    }
    Ok(x.round().max(1.0) as u64)
}

fn ceil_levels(raw: f64) -> Result<usize> {
    if !raw.is_finite() {
        return Err(Error::InvalidInput(format!("level count {raw} is not finite")));
    }
    let l = (raw - CEIL_SLACK).ceil().max(1.0);
    if l > f64::from(u32::MAX) {
        return Err(Error::InvalidInput(format!("level count {raw:e} is too large")));
    }
    Ok(l as usize)
}

/// `ln(delta^2 / (e^2 * 2 (1 + 4^alpha)))`, the log of the coarse-term target
/// relative to the level-1 sample size.
fn log_target_ratio(p: &SolutionParameters) -> f64 {
    2.0 * p.delta.ln() - 2.0 * p.e.ln() - difference_amplification(p.alpha).ln()
}

/// Real-valued level count before the ceiling, for the strategies that have
/// a closed form (S1, S2, S3).
pub fn raw_level_count(strategy: StrategyId, p: &SolutionParameters) -> Result<f64> {
    check_params(p)?;
    let ln2 = std::f64::consts::LN_2;
    match strategy {
        StrategyId::S1 | StrategyId::S3 => {
            if p.alpha == 0.0 {
                return Err(Error::NoRefinementGain);
            }
            Ok(1.0 + log_target_ratio(p) / (2.0 * p.alpha * ln2))
        }
        StrategyId::S2 => Ok(log_target_ratio(p) / ((p.alpha + 1.0) * 2.0 * ln2) + 1.0),
        other => Err(Error::InvalidInput(format!("{other} has no closed-form level count"))),
    }
}

/// Per-term sample sizes before rounding for an `L`-level plan.
pub fn unrounded_sizes(strategy: StrategyId, p: &SolutionParameters, levels: usize) -> Result<Vec<f64>> {
    check_params(p)?;
    let a = difference_amplification(p.alpha);
    let amp_exp = 2.0 * (1.0 + p.sigma);
    let sizes = (1..=levels)
        .map(|l| {
            let lf = l as f64;
            let geometric = 2f64.powf(2.0 * p.alpha * (lf - 1.0));
            match strategy {
                StrategyId::ClassicalMC => (p.delta / p.e).powi(2),
                StrategyId::S1 => a * geometric,
                StrategyId::S2 => a * 4f64.powf((lf - 1.0) * (p.alpha + 1.0)),
                StrategyId::S3 => a * ((levels - l + 1) as f64).powf(amp_exp) * geometric,
                StrategyId::S4 => a * lf.powf(amp_exp) * geometric,
            }
        })
        .collect();
    Ok(sizes)
}

fn finish(strategy: StrategyId, p: &SolutionParameters, levels: usize, multiplier: f64) -> Result<LevelPlan> {
    let samples = unrounded_sizes(strategy, p, levels)?.into_iter().map(round_size).collect::<Result<Vec<_>>>()?;
    LevelPlan::build(strategy, samples, multiplier, *p)
}

pub fn plan_classical_mc(p: &SolutionParameters) -> Result<LevelPlan> {
    check_params(p)?;
    finish(StrategyId::ClassicalMC, p, 1, 2.0)
}

pub fn plan_strategy1(p: &SolutionParameters) -> Result<LevelPlan> {
    let levels = ceil_levels(raw_level_count(StrategyId::S1, p)?)?;
    finish(StrategyId::S1, p, levels, levels as f64 + 2.0)
}

pub fn plan_strategy2(p: &SolutionParameters) -> Result<LevelPlan> {
    let levels = ceil_levels(raw_level_count(StrategyId::S2, p)?)?;
    finish(StrategyId::S2, p, levels, 4.0)
}

pub fn plan_strategy3(p: &SolutionParameters) -> Result<LevelPlan> {
    let levels = ceil_levels(raw_level_count(StrategyId::S3, p)?)?;
    finish(StrategyId::S3, p, levels, 3.0 + 1.0 / p.sigma)
}

/// Smallest `L` with `L^(2(1+sigma)) * 2^(2 alpha (L-1)) >= delta^2 / (e^2 2 (1+4^alpha))`.
///
/// The left side is compared in log space so large `L` cannot overflow.
pub fn strategy4_level_count(p: &SolutionParameters) -> Result<usize> {
    check_params(p)?;
    let target = log_target_ratio(p);
    let ln2 = std::f64::consts::LN_2;
    for l in 1..=MAX_SCAN_LEVELS {
        let lf = f64::from(l);
        let lhs = 2.0 * (1.0 + p.sigma) * lf.ln() + 2.0 * p.alpha * (lf - 1.0) * ln2;
        if lhs >= target - CEIL_SLACK {
            return Ok(l as usize);
        }
    }
    Err(Error::LevelCapExceeded(MAX_SCAN_LEVELS))
}

pub fn plan_strategy4(p: &SolutionParameters) -> Result<LevelPlan> {
    let levels = strategy4_level_count(p)?;
    finish(StrategyId::S4, p, levels, 3.0 + 1.0 / p.sigma)
}

pub fn plan(strategy: StrategyId, p: &SolutionParameters) -> Result<LevelPlan> {
    match strategy {
        StrategyId::ClassicalMC => plan_classical_mc(p),
        StrategyId::S1 => plan_strategy1(p),
        StrategyId::S2 => plan_strategy2(p),
        StrategyId::S3 => plan_strategy3(p),
        StrategyId::S4 => plan_strategy4(p),
    }
}

/// Plans on an explicit ladder; only the standard factor-2 / exponent-3
/// ladder is supported.
pub fn plan_on(hierarchy: &ResolutionHierarchy, strategy: StrategyId, p: &SolutionParameters) -> Result<LevelPlan> {
    hierarchy.ensure_standard()?;
    plan(strategy, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Growth {
    Linear,
    Quasilinear,
    Polynomial,
}

/// One cell of the asymptotic cost table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRegime {
    pub growth: Growth,
    pub threshold_note: String,
    pub formula: String,
    /// Exponent of `N` in polynomial regimes.
    pub n_exponent: Option<f64>,
    /// Exponent of the `(log delta + log N)` factor, when present.
    pub log_exponent: Option<f64>,
}

fn regime(growth: Growth, note: &str, formula: &str, n_exponent: Option<f64>, log_exponent: Option<f64>) -> CostRegime {
    CostRegime { growth, threshold_note: note.to_string(), formula: formula.to_string(), n_exponent, log_exponent }
}

/// Growth of total cost in the finest-level cost `N`.
///
/// S1, S3 and S4 switch at `alpha = 3/2`, S2 at `alpha = 1/2`; the equality
/// cases are exact comparisons.
pub fn classify_cost_regime(strategy: StrategyId, alpha: f64, sigma: f64) -> CostRegime {
    use std::cmp::Ordering;
    let cmp = |threshold: f64| alpha.partial_cmp(&threshold).unwrap_or(Ordering::Greater);
    let log_big = 2.0 * (1.0 + sigma);
    let log_mid = 2.0 * sigma + 3.0;
    let high_alpha = 1.0 + (2.0 * alpha - 3.0) / 3.0;
    match strategy {
        StrategyId::ClassicalMC => {
            regime(Growth::Polynomial, "any alpha", "O(delta^2 N^(1+2alpha/3))", Some(1.0 + 2.0 * alpha / 3.0), None)
        }
        StrategyId::S1 => match cmp(1.5) {
            Ordering::Less => regime(Growth::Linear, "alpha < 3/2", "O(N)", Some(1.0), None),
            Ordering::Equal => {
                regime(Growth::Quasilinear, "alpha = 3/2", "O(N (log delta + log N))", Some(1.0), Some(1.0))
            }
            Ordering::Greater => regime(
                Growth::Polynomial,
                "alpha > 3/2",
                "O(delta^((2alpha-3)/alpha) N^(1+(2alpha-3)/3))",
                Some(high_alpha),
                None,
            ),
        },
        StrategyId::S2 => match cmp(0.5) {
            Ordering::Less => regime(Growth::Linear, "alpha < 1/2", "O(N)", Some(1.0), None),
            Ordering::Equal => {
                regime(Growth::Quasilinear, "alpha = 1/2", "O(N (log delta + log N))", Some(1.0), Some(1.0))
            }
            Ordering::Greater => regime(
                Growth::Polynomial,
                "alpha > 1/2",
                "O(delta^((2alpha-1)/(alpha+1)) N^(1+alpha(2alpha-1)/(3(alpha+1))))",
                Some(1.0 + alpha * (2.0 * alpha - 1.0) / (3.0 * (alpha + 1.0))),
                None,
            ),
        },
        StrategyId::S3 => match cmp(1.5) {
            Ordering::Less => regime(
                Growth::Quasilinear,
                "alpha < 3/2",
                "O(N (log delta + log N)^(2(1+sigma)))",
                Some(1.0),
                Some(log_big),
            ),
            Ordering::Equal => regime(
                Growth::Quasilinear,
                "alpha = 3/2",
                "O(N (log delta + log N)^(2sigma+3))",
                Some(1.0),
                Some(log_mid),
            ),
            Ordering::Greater => regime(
                Growth::Polynomial,
                "alpha > 3/2",
                "O((log delta + log N)^(2(1+sigma)) delta^((2alpha-3)/alpha) N^(1+(2alpha-3)/3))",
                Some(high_alpha),
                Some(log_big),
            ),
        },
        StrategyId::S4 => match cmp(1.5) {
            Ordering::Less => regime(Growth::Linear, "alpha < 3/2", "O(N)", Some(1.0), None),
            Ordering::Equal => regime(
                Growth::Quasilinear,
                "alpha = 3/2",
                "O(N (log delta + log N)^(2sigma+3))",
                Some(1.0),
                Some(log_mid),
            ),
            Ordering::Greater => regime(
                Growth::Polynomial,
                "alpha > 3/2",
                "O((log delta + log N)^(2(1+sigma)) delta^((2alpha-3)/alpha) N^(1+(2alpha-3)/3))",
                Some(high_alpha),
                Some(log_big),
            ),
        },
    }
}
