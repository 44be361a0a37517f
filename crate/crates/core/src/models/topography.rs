//! Random bottom topography.
//!
//! ```text
//! b(x, y) = sum_{k in K} sum_{j in J} H / (k^2 + j^2)
//!           * (a_kj cos(2 pi k x / Lx) + b_kj sin(2 pi k x / Lx)) * sin(j pi y / Ly)
//! ```
//!
//! with `K = J = 4..=20` by default, giving 578 coefficients drawn i.i.d.
//! standard normal in k-major, j-minor order, `a` before `b` for each pair.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopographySpec {
    /// Amplitude scale in meters.
    #[serde(rename = "H")]
    pub amplitude: f64,
    /// Zonal (re-entrant) extent.
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    /// Inclusive x-wavenumber range.
    pub k_range: [u32; 2],
    /// Inclusive y-wavenumber range.
    #[serde(rename = "l_range")]
    pub j_range: [u32; 2],
}

impl Default for TopographySpec {
    fn default() -> Self {
        Self { amplitude: 500.0, lx: 2.0e6, ly: 1.733e6, k_range: [4, 20], j_range: [4, 20] }
    }
}

impl TopographySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("H", self.amplitude), ("Lx", self.lx), ("Ly", self.ly)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("topography {name} must be positive, got {v}")));
            }
        }
        for (name, [lo, hi]) in [("k_range", self.k_range), ("l_range", self.j_range)] {
            if lo < 1 || lo > hi {
                return Err(Error::InvalidInput(format!("topography {name} [{lo}, {hi}] is not a valid interval")));
            }
        }
        Ok(())
    }

    pub fn k_count(&self) -> usize {
        (self.k_range[1] - self.k_range[0] + 1) as usize
    }

    pub fn j_count(&self) -> usize {
        (self.j_range[1] - self.j_range[0] + 1) as usize
    }

    /// Total number of random coefficients, `2 |K| |J|`.
    pub fn coefficient_count(&self) -> usize {
        2 * self.k_count() * self.j_count()
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (self.k_range[0]..=self.k_range[1]).flat_map(move |k| (self.j_range[0]..=self.j_range[1]).map(move |j| (k, j)))
    }

    /// `H / (k^2 + j^2)`.
    pub fn weight(&self, k: u32, j: u32) -> f64 {
        self.amplitude / f64::from(k * k + j * j)
    }
}

/// `sin(pi t)`, exactly zero at integer `t`.
pub(crate) fn sin_pi(t: f64) -> f64 {
    let r = t - 2.0 * (t / 2.0).floor();
    if r == 0.0 || r == 1.0 {
        0.0
    } else {
        (std::f64::consts::PI * r).sin()
    }
}

/// `cos(pi t)`, exactly zero at half-integer `t`.
pub(crate) fn cos_pi(t: f64) -> f64 {
    let r = t - 2.0 * (t / 2.0).floor();
    if r == 0.5 || r == 1.5 {
        0.0
    } else {
        (std::f64::consts::PI * r).cos()
    }
}

/// One realization of the coefficients. Both arrays are indexed
/// `(k - k_min) * |J| + (j - j_min)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopographySample {
    pub spec: TopographySpec,
    pub a: Vec<f64>,
    #[serde(rename = "b")]
    pub b_coef: Vec<f64>,
}

pub fn sample_topography(spec: &TopographySpec, seed: u64) -> TopographySample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.k_count() * spec.j_count();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        a.push(StandardNormal.sample(&mut rng));
        b.push(StandardNormal.sample(&mut rng));
    }
    TopographySample { spec: *spec, a, b_coef: b }
}

impl TopographySample {
    pub fn zeros(spec: &TopographySpec) -> Self {
        let n = spec.k_count() * spec.j_count();
        Self { spec: *spec, a: vec![0.0; n], b_coef: vec![0.0; n] }
    }

    pub fn index(&self, k: u32, j: u32) -> usize {
        (k - self.spec.k_range[0]) as usize * self.spec.j_count() + (j - self.spec.j_range[0]) as usize
    }

    /// All coefficients in draw order (`a_kj`, `b_kj` interleaved).
    pub fn coefficients(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b_coef).flat_map(|(&a, &b)| [a, b]).collect()
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        let s = &self.spec;
        if !(0.0..=s.lx).contains(&x) || !(0.0..=s.ly).contains(&y) {
            return Err(Error::InvalidInput(format!("point ({x}, {y}) lies outside [0, {}] x [0, {}]", s.lx, s.ly)));
        }
        let xr = x / s.lx;
        let yr = y / s.ly;
        let sin_y: Vec<f64> = (s.j_range[0]..=s.j_range[1]).map(|j| sin_pi(f64::from(j) * yr)).collect();
        let mut total = 0.0;
        for k in s.k_range[0]..=s.k_range[1] {
            let arg = 2.0 * f64::from(k) * xr;
            let (c, sn) = (cos_pi(arg), sin_pi(arg));
            for (jj, j) in (s.j_range[0]..=s.j_range[1]).enumerate() {
                let i = self.index(k, j);
                total += s.weight(k, j) * (self.a[i] * c + self.b_coef[i] * sn) * sin_y[jj];
            }
        }
        Ok(total)
    }

    /// The field with the `y` factor dropped, averaged over `[x0, x0 + dx]`.
    ///
    /// Used as a one-dimensional random forcing profile. Cell averages are
    /// exact, so every grid sees the same underlying function without
    /// aliasing.
    pub fn profile_cell_average(&self, x0: f64, dx: f64) -> f64 {
        let s = &self.spec;
        let mut total = 0.0;
        for k in s.k_range[0]..=s.k_range[1] {
            let w = 2.0 * std::f64::consts::PI * f64::from(k) / s.lx;
            let t0 = 2.0 * f64::from(k) * x0 / s.lx;
            let t1 = 2.0 * f64::from(k) * (x0 + dx) / s.lx;
            // integrals of cos(w x) and sin(w x) over the cell, divided by dx
            let cos_avg = (sin_pi(t1) - sin_pi(t0)) / (w * dx);
            let sin_avg = (cos_pi(t0) - cos_pi(t1)) / (w * dx);
            for j in s.j_range[0]..=s.j_range[1] {
                let i = self.index(k, j);
                total += s.weight(k, j) * (self.a[i] * cos_avg + self.b_coef[i] * sin_avg);
            }
        }
        total
    }

    /// Writes the field on an `nx` x `ny` grid spanning the closed domain.
    pub fn write_csv<W: Write>(&self, nx: usize, ny: usize, mut w: W) -> Result<()> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput("grid needs at least 2 points per direction".into()));
        }
        let io = |e: std::io::Error| Error::InvalidInput(format!("write failed: {e}"));
        writeln!(w, "x,y,height").map_err(io)?;
        for iy in 0..ny {
            let y = if iy + 1 == ny { self.spec.ly } else { self.spec.ly * iy as f64 / (ny - 1) as f64 };
            for ix in 0..nx {
                let x = if ix + 1 == nx { self.spec.lx } else { self.spec.lx * ix as f64 / (nx - 1) as f64 };
                writeln!(w, "{x},{y},{}", self.evaluate(x, y)?).map_err(io)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_spec() -> TopographySpec {
        TopographySpec { amplitude: 1.0, lx: 1.0, ly: 1.0, ..TopographySpec::default() }
    }

    #[test]
    fn draws_578_coefficients() {
        let spec = TopographySpec::default();
        assert_eq!(spec.coefficient_count(), 578);
        let t = sample_topography(&spec, 3);
        assert_eq!(t.coefficients().len(), 578);
    }

    #[test]
    fn draw_order_is_interleaved() {
        let spec = TopographySpec::default();
        let t = sample_topography(&spec, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let raw: Vec<f64> = (0..578).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert_eq!(t.coefficients(), raw);
        assert_eq!(t.a[t.index(4, 5)], raw[2]);
        assert_eq!(t.b_coef[t.index(5, 4)], raw[2 * 17 + 1]);
    }

    #[test]
    fn golden_first_coefficients_seed_0() {
        let t = sample_topography(&TopographySpec::default(), 0);
        let first: Vec<f64> = t.coefficients().into_iter().take(5).collect();
        assert_eq!(first, GOLDEN_SEED0);
    }

    const GOLDEN_SEED0: [f64; 5] =
        [0.6999607946268154, -0.14406163542784764, 0.30288628024558556, -1.374513899829971, 1.200341661914451];

    #[test]
    fn zero_field() {
        let t = TopographySample::zeros(&TopographySpec::default());
        assert_eq!(t.evaluate(1.0e5, 3.0e5).unwrap(), 0.0);
    }

    #[test]
    fn vanishes_on_walls() {
        let spec = TopographySpec::default();
        let t = sample_topography(&spec, 12);
        for x in [0.0, 1234.5, 1.0e6, spec.lx] {
            assert_eq!(t.evaluate(x, 0.0).unwrap(), 0.0);
            assert_eq!(t.evaluate(x, spec.ly).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_mode_by_hand() {
        let spec = unit_spec();
        let mut t = TopographySample::zeros(&spec);
        let i = t.index(4, 4);
        t.a[i] = 1.0;
        // sin(4 pi / 2) = 0
        assert_eq!(t.evaluate(0.0, 0.5).unwrap(), 0.0);
        // sin(4 pi / 8) = 1, cos(0) = 1
        assert_relative_eq!(t.evaluate(0.0, 0.125).unwrap(), 1.0 / 32.0, max_relative = 1e-15);
        // x = 1/32: cos(2 pi 4 / 32) = cos(pi / 4)
        let expected = (std::f64::consts::FRAC_PI_4).cos() * (std::f64::consts::PI * 4.0 * 0.3).sin() / 32.0;
        assert_relative_eq!(t.evaluate(1.0 / 32.0, 0.3).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn rejects_points_outside() {
        let t = sample_topography(&TopographySpec::default(), 1);
        assert!(t.evaluate(-1.0, 0.0).is_err());
        assert!(t.evaluate(0.0, 2.0e6).is_err());
    }

    #[test]
    fn exact_trig_helpers() {
        for n in -6..6 {
            assert_eq!(sin_pi(f64::from(n)), 0.0);
            assert_eq!(cos_pi(f64::from(n) + 0.5), 0.0);
        }
        assert_relative_eq!(sin_pi(0.25), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_relative_eq!(cos_pi(1.0 / 3.0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn cell_average_matches_quadrature() {
        let spec = unit_spec();
        let t = sample_topography(&spec, 5);
        let x0 = 0.137;
        let dx = 0.01;
        // composite midpoint rule on the y-free profile
        let n = 2000;
        let h = dx / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let x = x0 + (i as f64 + 0.5) * h;
            for (k, j) in spec.wavenumbers() {
                let idx = t.index(k, j);
                let arg = 2.0 * std::f64::consts::PI * f64::from(k) * x;
                acc += spec.weight(k, j) * (t.a[idx] * arg.cos() + t.b_coef[idx] * arg.sin()) * h;
            }
        }
        assert_relative_eq!(t.profile_cell_average(x0, dx), acc / dx, max_relative = 1e-6, epsilon = 1e-9);
    }

    #[test]
    fn csv_grid() {
        let t = sample_topography(&TopographySpec::default(), 2);
        let mut buf = Vec::new();
        t.write_csv(3, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,height");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], "0,0,0");
    }

    #[test]
    fn spec_validation() {
        assert!(TopographySpec::default().validate().is_ok());
        let bad = TopographySpec { k_range: [5, 4], ..TopographySpec::default() };
        assert!(bad.validate().is_err());
        let bad = TopographySpec { amplitude: 0.0, ..TopographySpec::default() };
        assert!(bad.validate().is_err());
    }
}
