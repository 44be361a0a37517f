//! Resolution ladder: level `l` has resolution `2^(l-1) * r1` and a
//! space-time degree-of-freedom count `C1 * r_l^-3`.
//!
//! Level 1 is the finest level. All cost accounting in the crate is done in
//! units of one finest-level run via [`relative_dof`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REFINEMENT_FACTOR: f64 = 2.0;
pub const DOF_EXPONENT: f64 = 3.0;

fn check_level(l: u32) -> Result<()> {
    if l < 1 {
        return Err(Error::InvalidLevel(i64::from(l)));
    }
    Ok(())
}

/// `8^-(l-1)`, the cost of one level-`l` run relative to a level-1 run.
///
/// Powers of two are exact in binary floating point, so the result is exact
/// for every level a plan can reach.
pub fn relative_dof(l: u32) -> Result<f64> {
    check_level(l)?;
    Ok(pow2(-3 * (l as i64 - 1)))
}

/// `2^k` built by exponent manipulation so it is exact over the normal range.
fn pow2(k: i64) -> f64 {
    if k < -1022 {
        // subnormal tail; precision is irrelevant for cost ratios this small
        return 2f64.powf(k as f64);
    }
    if k > 1023 {
        return f64::INFINITY;
    }
    f64::from_bits(((k + 1023) as u64) << 52)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionHierarchy {
    pub r1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(skip, default = "default_refinement")]
    pub refinement_factor: f64,
    #[serde(skip, default = "default_exponent")]
    pub dof_exponent: f64,
}

fn default_refinement() -> f64 {
    REFINEMENT_FACTOR
}

fn default_exponent() -> f64 {
    DOF_EXPONENT
}

impl Default for ResolutionHierarchy {
    /// 10 km finest resolution with `C1` chosen so that `N_1 = 480_000`.
    fn default() -> Self {
        Self { r1: 1.0e4, c1: 4.8e5 * 1.0e12, refinement_factor: REFINEMENT_FACTOR, dof_exponent: DOF_EXPONENT }
    }
}

impl ResolutionHierarchy {
    pub fn new(r1: f64, c1: f64) -> Result<Self> {
        Self::with_factors(r1, c1, REFINEMENT_FACTOR, DOF_EXPONENT)
    }

    /// Builds a ladder with non-standard factors. Such ladders can be
    /// inspected but are rejected by [`ResolutionHierarchy::ensure_standard`].
    pub fn with_factors(r1: f64, c1: f64, refinement_factor: f64, dof_exponent: f64) -> Result<Self> {
        if !(r1.is_finite() && r1 > 0.0) {
            return Err(Error::InvalidInput(format!("r1 must be positive and finite, got {r1}")));
        }
        if !(c1.is_finite() && c1 > 0.0) {
            return Err(Error::InvalidInput(format!("C1 must be positive and finite, got {c1}")));
        }
        if !(refinement_factor > 1.0 && dof_exponent > 0.0) {
            return Err(Error::InvalidInput(
                "refinement factor must exceed 1 and dof exponent must be positive".into(),
            ));
        }
        Ok(Self { r1, c1, refinement_factor, dof_exponent })
    }

    /// The planner's closed forms assume factor 2 and exponent 3.
    pub fn ensure_standard(&self) -> Result<()> {
        if self.refinement_factor != REFINEMENT_FACTOR || self.dof_exponent != DOF_EXPONENT {
            return Err(Error::UnsupportedLadder { refinement: self.refinement_factor, exponent: self.dof_exponent });
        }
        Ok(())
    }

    pub fn resolution_at_level(&self, l: u32) -> Result<f64> {
        check_level(l)?;
        Ok(self.refinement_factor.powi(l as i32 - 1) * self.r1)
    }

    /// `C1 * r_l^-3`. Real-valued; round if a count is needed.
    pub fn dof_at_level(&self, l: u32) -> Result<f64> {
        let r = self.resolution_at_level(l)?;
        Ok(self.c1 * r.powf(-self.dof_exponent))
    }

    pub fn finest_dof(&self) -> f64 {
        self.c1 * self.r1.powf(-self.dof_exponent)
    }
}
