//! Built-in quantity-of-interest models.

pub mod burgers;
pub mod gbm;
pub mod topography;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{ModelError, QoIModel};

pub use burgers::{BurgersModel, BurgersSpec};
pub use gbm::{GbmModel, GbmSpec};
pub use topography::{sample_topography, TopographySample, TopographySpec};

/// Returns the same value at every level and for every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub value: f64,
    pub max_level: u32,
}

impl ConstantModel {
    pub fn new(value: f64, max_level: u32) -> Self {
        Self { value, max_level }
    }
}

impl QoIModel for ConstantModel {
    fn evaluate(&self, _level: u32, _sample_id: u64) -> std::result::Result<f64, ModelError> {
        Ok(self.value)
    }

    fn max_level(&self) -> u32 {
        self.max_level
    }

    fn name(&self) -> &str {
        "constant"
    }
}

/// `U_l = X + eps * 2^(l-1) * Z_l` with `X ~ N(0, x_std^2)` and one
/// independent `Z_l ~ N(0, 1)` per level. The level error grows linearly
/// with resolution, so `sd(U_l - U_{l+1}) = sqrt(5) eps 2^(l-1)` and the
/// difference deviations halve per refinement: `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleModel {
    pub x_std: f64,
    pub eps: f64,
    pub max_level: u32,
}

impl TwoScaleModel {
    pub fn new(x_std: f64, eps: f64, max_level: u32) -> Self {
        Self { x_std, eps, max_level }
    }
}

impl QoIModel for TwoScaleModel {
    fn evaluate(&self, level: u32, sample_id: u64) -> std::result::Result<f64, ModelError> {
        if level < 1 || level > self.max_level {
            return Err(ModelError::new(format!("level {level} outside 1..={}", self.max_level)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample_id);
        let x: f64 = StandardNormal.sample(&mut rng);
        let z: f64 = (0..level).map(|_| StandardNormal.sample(&mut rng)).last().unwrap_or(0.0);
        Ok(self.x_std * x + self.eps * f64::from(1u32 << (level - 1).min(31)) * z)
    }

    fn max_level(&self) -> u32 {
        self.max_level
    }

    fn name(&self) -> &str {
        "two_scale"
    }
}

/// Model selection as it appears in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Gbm(GbmSpec),
    Burgers(BurgersSpec),
    TwoScale(TwoScaleModel),
    Constant(ConstantModel),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn QoIModel>> {
        Ok(match self {
            Self::Gbm(s) => Box::new(GbmModel::new(*s)?),
            Self::Burgers(s) => Box::new(BurgersModel::new(*s)?),
            Self::TwoScale(m) => {
                if !(m.x_std >= 0.0 && m.eps >= 0.0) || m.max_level < 1 {
                    return Err(Error::InvalidInput("two_scale needs x_std, eps >= 0 and max_level >= 1".into()));
                }
                Box::new(*m)
            }
            Self::Constant(m) => {
                if m.max_level < 1 {
                    return Err(Error::InvalidInput("constant model needs max_level >= 1".into()));
                }
                Box::new(*m)
            }
        })
    }
}
