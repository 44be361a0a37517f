//! Geometric Brownian motion `dS = r S dt + vol S dW`, integrated with
//! Euler-Maruyama. The quantity of interest is `S(T)`, whose exact mean is
//! `S0 exp(r T)`.
//!
//! Level `l` uses `steps_at_finest / 2^(l-1)` steps. Each sample draws the
//! coarsest-level increments first and refines them by Brownian bridge
//! midpoints, one stage per level, consuming the seeded stream in a fixed
//! order. A level-`l` path therefore costs O(its own step count) and is, up
//! to rounding, the pairwise sum of the level-`l-1` path for the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{ModelError, QoIModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmSpec {
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "r")]
    pub r_drift: f64,
    pub vol: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub steps_at_finest: u32,
    pub max_level: u32,
}

impl Default for GbmSpec {
    fn default() -> Self {
        Self { s0: 1.0, r_drift: 0.05, vol: 0.2, t: 1.0, steps_at_finest: 256, max_level: 4 }
    }
}

impl GbmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.t > 0.0 && self.vol >= 0.0 && self.r_drift.is_finite()) {
            return Err(Error::InvalidInput("GBM needs S0 > 0, T > 0, vol >= 0".into()));
        }
        if self.max_level < 1 {
            return Err(Error::InvalidInput("GBM max_level must be at least 1".into()));
        }
        self.steps_at_level(self.max_level)?;
        Ok(())
    }

    pub fn steps_at_level(&self, level: u32) -> Result<u32> {
        if level < 1 {
            return Err(Error::InvalidLevel(i64::from(level)));
        }
        let div = 1u64 << (level - 1).min(63);
        let steps = u64::from(self.steps_at_finest);
        if steps == 0 || steps % div != 0 {
            return Err(Error::InvalidInput(format!(
                "{} finest steps cannot be halved down to level {level}",
                self.steps_at_finest
            )));
        }
        Ok((steps / div) as u32)
    }

    /// `S0 exp(r T)`.
    pub fn exact_mean(&self) -> f64 {
        self.s0 * (self.r_drift * self.t).exp()
    }
}

#[derive(Debug, Clone)]
pub struct GbmModel {
    spec: GbmSpec,
}

impl GbmModel {
    pub fn new(spec: GbmSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &GbmSpec {
        &self.spec
    }

    /// Brownian increments of the level-`level` path for this sample.
    pub fn brownian_increments(&self, level: u32, seed: u64) -> Result<Vec<f64>> {
        self.spec.steps_at_level(level)?;
        if level > self.spec.max_level {
            return Err(Error::InvalidLevel(i64::from(level)));
        }
        let coarse_steps = self.spec.steps_at_level(self.spec.max_level)? as usize;
        let mut dt = self.spec.t / coarse_steps as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
        let mut dw: Vec<f64> = (0..coarse_steps).map(|_| normal() * dt.sqrt()).collect();
        for _ in level..self.spec.max_level {
            // split each increment at its midpoint: the left half is
            // N(parent / 2, dt / 4) given the parent
            let half_sd = 0.5 * dt.sqrt();
            dw = dw
                .iter()
                .flat_map(|&parent| {
                    let left = 0.5 * parent + half_sd * normal();
                    [left, parent - left]
                })
                .collect();
            dt *= 0.5;
        }
        Ok(dw)
    }

    pub fn gbm_evaluate(&self, level: u32, seed: u64) -> Result<f64> {
        let dw = self.brownian_increments(level, seed)?;
        let dt = self.spec.t / dw.len() as f64;
        let drift = self.spec.r_drift * dt;
        Ok(dw.iter().fold(self.spec.s0, |s, w| s * (1.0 + drift + self.spec.vol * w)))
    }
}

impl QoIModel for GbmModel {
    fn evaluate(&self, level: u32, sample_id: u64) -> std::result::Result<f64, ModelError> {
        self.gbm_evaluate(level, sample_id).map_err(|e| ModelError::new(e.to_string()))
    }

    fn max_level(&self) -> u32 {
        self.spec.max_level
    }

    fn name(&self) -> &str {
        "gbm"
    }
}
