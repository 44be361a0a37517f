//! Forced viscous Burgers equation on a periodic interval,
//!
//! ```text
//! u_t + (u^2 / 2)_x = nu u_xx + f(x)
//! ```
//!
//! discretized with cell-centred finite volumes: Godunov (upwind) flux for
//! the convective term, central second difference for diffusion, forward
//! Euler in time. The step is `dt = cfl / (max|u| / dx + 2 nu / dx^2)`,
//! which keeps the combined scheme monotone for `cfl <= 1`.
//!
//! The forcing `f` is the random topography profile with its `y` factor
//! dropped, drawn from the sample id and cell-averaged onto each grid, so
//! every level sees the same forcing function. The quantity of interest is
//! the time average of the spatial mean of `u^2` over the second half of the
//! horizon. Level `l` uses `cells_at_finest / 2^(l-1)` cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{ModelError, QoIModel};
use crate::models::topography::{sample_topography, TopographySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersSpec {
    pub viscosity: f64,
    pub length: f64,
    pub cells_at_finest: u32,
    pub horizon: f64,
    /// Coefficient law of the forcing; its `Lx` is replaced by `length`.
    pub forcing: TopographySpec,
    pub max_level: u32,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Abort a solve that needs more steps than this.
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_max_steps() -> u64 {
    10_000_000
}

impl Default for BurgersSpec {
    fn default() -> Self {
        Self {
            viscosity: 0.01,
            length: 1.0,
            cells_at_finest: 256,
            horizon: 1.0,
            forcing: TopographySpec { amplitude: 100.0, lx: 1.0, ly: 1.0, k_range: [4, 20], j_range: [4, 20] },
            max_level: 4,
            cfl: 0.4,
            max_steps: default_max_steps(),
        }
    }
}

impl BurgersSpec {
    pub fn validate(&self) -> Result<()> {
        let positive =
            [("viscosity", self.viscosity), ("length", self.length), ("horizon", self.horizon), ("cfl", self.cfl)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("Burgers {name} must be positive, got {v}")));
            }
        }
        if self.cfl > 1.0 {
            return Err(Error::InvalidInput(format!("Burgers cfl must not exceed 1, got {}", self.cfl)));
        }
        if self.max_level < 1 {
            return Err(Error::InvalidInput("Burgers max_level must be at least 1".into()));
        }
        self.forcing_spec().validate()?;
        self.cells_at_level(self.max_level)?;
        Ok(())
    }

    pub fn cells_at_level(&self, level: u32) -> Result<usize> {
        if level < 1 {
            return Err(Error::InvalidLevel(i64::from(level)));
        }
        let div = 1u64 << (level - 1).min(63);
        let cells = u64::from(self.cells_at_finest);
        if cells % div != 0 || cells / div < 4 {
            return Err(Error::InvalidInput(format!(
                "{} finest cells cannot be halved to at least 4 cells at level {level}",
                self.cells_at_finest
            )));
        }
        Ok((cells / div) as usize)
    }

    fn forcing_spec(&self) -> TopographySpec {
        TopographySpec { lx: self.length, ..self.forcing }
    }
}

/// Godunov flux for `f(u) = u^2 / 2`.
fn godunov_flux(ul: f64, ur: f64) -> f64 {
    if ul <= ur {
        if ul > 0.0 {
            0.5 * ul * ul
        } else if ur < 0.0 {
            0.5 * ur * ur
        } else {
            0.0
        }
    } else {
        0.5 * ul.max(-ur).powi(2)
    }
}

fn mean_square(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>() / u.len() as f64
}

/// Periodic finite-volume solver on a fixed grid.
#[derive(Debug, Clone)]
pub struct BurgersSolver {
    pub viscosity: f64,
    pub length: f64,
    pub cfl: f64,
    pub max_steps: u64,
}

impl BurgersSolver {
    /// Advances `u` to `horizon`, calling `observe(t, u)` at `t = 0` and
    /// after every step. A step is shortened so that `t = split` is hit
    /// exactly, which lets observers integrate over `[split, horizon]`.
    pub fn simulate(
        &self,
        u: &mut [f64],
        forcing: &[f64],
        horizon: f64,
        split: f64,
        mut observe: impl FnMut(f64, &[f64]),
    ) -> Result<()> {
        let n = u.len();
        if n < 2 || forcing.len() != n {
            return Err(Error::InvalidInput("grid and forcing must have matching length >= 2".into()));
        }
        let dx = self.length / n as f64;
        let diff = self.viscosity / (dx * dx);
        let mut flux = vec![0.0; n];
        let mut t = 0.0;
        let mut steps = 0u64;
        observe(t, u);
        while t < horizon {
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !umax.is_finite() {
                return Err(Error::InvalidInput(format!("solution blew up at t = {t}")));
            }
            let mut dt = self.cfl / (umax / dx + 2.0 * diff);
            let next_stop = if t < split { split } else { horizon };
            if t + dt >= next_stop {
                dt = next_stop - t;
            }
            // flux[i] is the flux through the right face of cell i
            for i in 0..n {
                flux[i] = godunov_flux(u[i], u[(i + 1) % n]);
            }
            let mut left = u[n - 1];
            let first = u[0];
            for i in 0..n {
                let right = if i + 1 == n { first } else { u[i + 1] };
                let centre = u[i];
                let flux_in = if i == 0 { flux[n - 1] } else { flux[i - 1] };
                u[i] = centre - dt / dx * (flux[i] - flux_in)
                    + dt * diff * (right - 2.0 * centre + left)
                    + dt * forcing[i];
                left = centre;
            }
            t = if t + dt >= next_stop { next_stop } else { t + dt };
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::InvalidInput(format!("step budget of {} exceeded at t = {t}", self.max_steps)));
            }
            observe(t, u);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BurgersModel {
    spec: BurgersSpec,
}

impl BurgersModel {
    pub fn new(spec: BurgersSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &BurgersSpec {
        &self.spec
    }

    fn solver(&self) -> BurgersSolver {
        BurgersSolver {
            viscosity: self.spec.viscosity,
            length: self.spec.length,
            cfl: self.spec.cfl,
            max_steps: self.spec.max_steps,
        }
    }

    /// Cell-averaged forcing for this sample on the level-`level` grid.
    pub fn forcing(&self, level: u32, seed: u64) -> Result<Vec<f64>> {
        let n = self.spec.cells_at_level(level)?;
        let sample = sample_topography(&self.spec.forcing_spec(), seed);
        let dx = self.spec.length / n as f64;
        Ok((0..n).map(|i| sample.profile_cell_average(i as f64 * dx, dx)).collect())
    }

    /// Solves from rest under the given forcing and returns the window
    /// average of the spatial mean of `u^2`.
    pub fn qoi_for_forcing(&self, forcing: &[f64]) -> Result<f64> {
        let horizon = self.spec.horizon;
        let split = 0.5 * horizon;
        let mut u = vec![0.0; forcing.len()];
        let mut integral = 0.0;
        let mut last: Option<(f64, f64)> = None;
        self.solver().simulate(&mut u, forcing, horizon, split, |t, u| {
            let e = mean_square(u);
            if let Some((t0, e0)) = last {
                if t0 >= split {
                    integral += 0.5 * (e0 + e) * (t - t0);
                }
            }
            last = Some((t, e));
        })?;
        Ok(integral / (horizon - split))
    }

    pub fn burgers_evaluate(&self, level: u32, seed: u64) -> Result<f64> {
        let forcing = self.forcing(level, seed)?;
        self.qoi_for_forcing(&forcing)
    }
}

impl QoIModel for BurgersModel {
    fn evaluate(&self, level: u32, sample_id: u64) -> std::result::Result<f64, ModelError> {
        self.burgers_evaluate(level, sample_id).map_err(|e| ModelError::new(e.to_string()))
    }

    fn max_level(&self) -> u32 {
        self.spec.max_level
    }

    fn name(&self) -> &str {
        "burgers"
    }
}
