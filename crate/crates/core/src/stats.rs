//! Sample statistics, the telescoping multilevel estimator, and pilot-data
//! estimation of the planning parameters.
//!
//! Every accumulation runs in index order with Neumaier-compensated
//! summation so identical inputs give bit-identical outputs no matter how
//! the samples were produced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Realizations of one quantity, tagged with the level (and optionally the
/// estimator term) they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub level: u32,
    pub term: Option<u32>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, level: u32) -> Self {
        Self { values, level, term: None }
    }

    pub fn with_term(mut self, term: u32) -> Self {
        self.term = Some(term);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn mc_mean(s: &SampleSet) -> Result<f64> {
    mean_of(&s.values)
}

pub fn unbiased_variance(s: &SampleSet) -> Result<f64> {
    variance_of(&s.values)
}

pub(crate) fn mean_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(compensated_sum(values.iter().copied()) / values.len() as f64)
}

/// Two-pass unbiased variance `(1/(M-1)) * sum (x - mean)^2`.
pub(crate) fn variance_of(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples(values.len()));
    }
    let mean = mean_of(values)?;
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    Ok(ss / (values.len() - 1) as f64)
}

/// Summary of one estimator term. Term `L` is the plain mean of the coarsest
/// level; terms `1..L` are means of adjacent-level differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTermStats {
    pub term_index: u32,
    pub fine_level: u32,
    /// `None` for the coarse term, which is a plain single-level mean.
    pub coarse_level: Option<u32>,
    pub mean: f64,
    /// Unbiased variance; absent when fewer than 2 samples were drawn.
    pub variance: Option<f64>,
    pub count: usize,
}

impl LevelTermStats {
    pub fn from_values(term_index: u32, fine_level: u32, coarse_level: Option<u32>, values: &[f64]) -> Result<Self> {
        let mean = mean_of(values)?;
        let variance = if values.len() >= 2 { Some(variance_of(values)?) } else { None };
        Ok(Self { term_index, fine_level, coarse_level, mean, variance, count: values.len() })
    }

    /// Variance of the term mean, `variance / count`.
    pub fn mean_variance(&self) -> Option<f64> {
        self.variance.map(|v| v / self.count as f64)
    }
}

fn check_terms(terms: &[LevelTermStats]) -> Result<Vec<&LevelTermStats>> {
    let l = terms.len();
    if l == 0 {
        return Err(Error::BadTerms { expected: 0, detail: "no terms".into() });
    }
    let mut slots: Vec<Option<&LevelTermStats>> = vec![None; l];
    for t in terms {
        let idx = t.term_index as usize;
        if idx < 1 || idx > l {
            return Err(Error::BadTerms { expected: l, detail: format!("term index {idx} out of range") });
        }
        if slots[idx - 1].replace(t).is_some() {
            return Err(Error::BadTerms { expected: l, detail: format!("duplicate term index {idx}") });
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("every slot filled")).collect())
}

/// `sum_{l<L} E[U_l - U_{l+1}] + E[U_L]`, summed in ascending term order.
pub fn multilevel_estimate(terms: &[LevelTermStats]) -> Result<f64> {
    let ordered = check_terms(terms)?;
    Ok(compensated_sum(ordered.iter().map(|t| t.mean)))
}

/// A-posteriori standard error `sqrt(sum variance_l / M_l)`; `None` if any
/// term has fewer than two samples.
pub fn multilevel_std_error(terms: &[LevelTermStats]) -> Result<Option<f64>> {
    let ordered = check_terms(terms)?;
    let mut acc = CompensatedSum::new();
    for t in ordered {
        match t.mean_variance() {
            Some(v) => acc.add(v),
            None => return Ok(None),
        }
    }
    Ok(Some(acc.value().sqrt()))
}

/// Per-level run totals: `[M_1, M_1 + M_2, ..., M_{L-1} + M_L]`.
pub fn total_samples_per_level(m: &[u64]) -> Result<Vec<u64>> {
    if m.is_empty() {
        return Err(Error::InvalidInput("sample-size list is empty".into()));
    }
    if m.contains(&0) {
        return Err(Error::InvalidInput("sample sizes must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(m.len());
    out.push(m[0]);
    out.extend(m.windows(2).map(|w| w[0] + w[1]));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Set when the finer pair varies more than the coarser pair, i.e. the
    /// hierarchy does not converge.
    pub nonconvergent: bool,
}

/// Convergence rate from the deviations of the two finest level differences:
/// `delta_12 / delta_23 = 2^-alpha`.
pub fn estimate_alpha(delta_12: f64, delta_23: f64) -> Result<AlphaEstimate> {
    for (name, v) in [("delta_12", delta_12), ("delta_23", delta_23)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let alpha = (delta_23 / delta_12).log2();
    Ok(AlphaEstimate { alpha, nonconvergent: alpha < 0.0 })
}

/// `2 (1 + 4^alpha)`: the squared amplification between the fine-level error
/// and the deviation of the finest level difference.
pub fn difference_amplification(alpha: f64) -> f64 {
    2.0 * (1.0 + 4f64.powf(alpha))
}

/// Fine-level error `e = delta_12 / sqrt(2 (1 + 4^alpha))`.
pub fn estimate_fine_error(delta_12: f64, alpha: f64) -> Result<f64> {
    if !(delta_12.is_finite() && delta_12 > 0.0) {
        return Err(Error::InvalidInput(format!("delta_12 must be positive and finite, got {delta_12}")));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    Ok(delta_12 / difference_amplification(alpha).sqrt())
}

pub const DEFAULT_SIGMA: f64 = 1.0;

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

/// The scalars every planner formula consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionParameters {
    /// Standard deviation of the true quantity of interest.
    pub delta: f64,
    /// Fine-level discretization error.
    pub e: f64,
    /// Convergence rate of the quantity with resolution.
    pub alpha: f64,
    /// Amplification exponent used by strategies 3 and 4.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(rename = "C2", default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

impl SolutionParameters {
    pub fn new(delta: f64, e: f64, alpha: f64, sigma: f64) -> Result<Self> {
        let p = Self { delta, e, alpha, sigma, c2: None };
        p.validate()?;
        Ok(p)
    }

    /// Builds the parameters from the error law `e = C2 * r1^alpha`.
    pub fn from_error_law(delta: f64, c2: f64, r1: f64, alpha: f64, sigma: f64) -> Result<Self> {
        if !(c2.is_finite() && c2 > 0.0 && r1.is_finite() && r1 > 0.0) {
            return Err(Error::InvalidInput("C2 and r1 must be positive".into()));
        }
        let p = Self { delta, e: c2 * r1.powf(alpha), alpha, sigma, c2: Some(c2) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("delta", self.delta)?;
        positive("e", self.e)?;
        positive("sigma", self.sigma)?;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be finite and non-negative, got {}", self.alpha)));
        }
        if let Some(c2) = self.c2 {
            positive("C2", c2)?;
        }
        Ok(())
    }
}
