use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PathsError;
use crate::fpk::Grid;

/// Initial law `ν` of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialLaw {
    /// `N(mean, var I)`.
    Gaussian { mean: Vec<f64>, var: f64 },
    /// Point mass.
    Dirac { point: Vec<f64> },
    /// Piecewise constant density on a grid, sampled uniformly within cells.
    GridDensity { grid: Grid, density: Vec<f64> },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::Dirac { point } => point.len(),
            Self::GridDensity { grid, .. } => grid.dim,
        }
    }

    pub fn validate(&self) -> Result<(), PathsError> {
        let ok = match self {
            Self::Gaussian { mean, var } => !mean.is_empty() && *var > 0.0 && mean.iter().all(|m| m.is_finite()),
            Self::Dirac { point } => !point.is_empty() && point.iter().all(|m| m.is_finite()),
            Self::GridDensity { grid, density } => {
                grid.validate().is_ok()
                    && density.len() == grid.len()
                    && density.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && density.iter().sum::<f64>() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(PathsError::InvalidArgument(format!("malformed initial law {self:?}")))
        }
    }

    /// Draws `n` points (row-major `n × d`) from one stream, in order.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, n: usize, out: &mut Vec<f64>) {
        let d = self.dim();
        out.clear();
        out.reserve(n * d);
        match self {
            Self::Gaussian { mean, var } => {
                let s = var.sqrt();
                for _ in 0..n {
                    for m in mean {
                        let z: f64 = rng.sample(StandardNormal);
                        out.push(m + s * z);
                    }
                }
            }
            Self::Dirac { point } => {
                for _ in 0..n {
                    out.extend_from_slice(point);
                }
            }
            Self::GridDensity { grid, density } => {
                let mut cdf = Vec::with_capacity(density.len());
                let mut acc = 0.0;
                for p in density {
                    acc += p;
                    cdf.push(acc);
                }
                let total = acc;
                let h = grid.h();
                let mut x = vec![0.0; d];
                for _ in 0..n {
                    let u: f64 = rng.random::<f64>() * total;
                    let k = cdf.partition_point(|&c| c <= u).min(density.len() - 1);
                    grid.center_into(k, &mut x);
                    for xi in x.iter_mut() {
                        *xi += (rng.random::<f64>() - 0.5) * h;
                    }
                    out.extend_from_slice(&x);
                }
            }
        }
    }

    /// `(F(x-), F(x))` for one-dimensional laws.
    pub fn cdf_1d(&self, x: f64) -> Option<(f64, f64)> {
        if self.dim() != 1 {
            return None;
        }
        Some(match self {
            Self::Gaussian { mean, var } => {
                let f = std_normal_cdf((x - mean[0]) / var.sqrt());
                (f, f)
            }
            Self::Dirac { point } => (if x > point[0] { 1.0 } else { 0.0 }, if x >= point[0] { 1.0 } else { 0.0 }),
            Self::GridDensity { grid, density } => {
                let f = grid_cdf(grid, density, x);
                (f, f)
            }
        })
    }

    /// `∫ f dν`: exact for point masses, a cell sum for grid densities, and a
    /// tensor midpoint rule on `mean ± 9σ` for Gaussians.
    pub fn expectation(&self, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        match self {
            Self::Dirac { point } => f(point),
            Self::GridDensity { grid, density } => {
                let total: f64 = density.iter().sum();
                crate::fpk::expectation_of(grid, density, f) / (total * grid.cell_volume())
            }
            Self::Gaussian { mean, var } => {
                let d = mean.len();
                let s = var.sqrt();
                let m = if d == 1 { 4000 } else { 400 };
                let h = 18.0 * s / m as f64;
                let w: Vec<f64> = (0..m)
                    .map(|i| {
                        let z = -9.0 + (i as f64 + 0.5) * 18.0 / m as f64;
                        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * h / s
                    })
                    .collect();
                let node = |i: usize, k: usize| mean[k] + (-9.0 + (i as f64 + 0.5) * 18.0 / m as f64) * s;
                match d {
                    1 => (0..m).map(|i| w[i] * f(&[node(i, 0)])).sum(),
                    2 => {
                        let mut acc = 0.0;
                        for j in 0..m {
                            for i in 0..m {
                                acc += w[i] * w[j] * f(&[node(i, 0), node(j, 1)]);
                            }
                        }
                        acc
                    }
                    _ => f(mean),
                }
            }
        }
    }
}

/// CDF of a normalized piecewise-constant one-dimensional grid density.
pub fn grid_cdf(grid: &Grid, density: &[f64], x: f64) -> f64 {
    let h = grid.h();
    let total: f64 = density.iter().sum::<f64>() * h;
    if x <= -grid.r_dom {
        return 0.0;
    }
    if x >= grid.r_dom {
        return 1.0;
    }
    let pos = (x + grid.r_dom) / h;
    let k = (pos.floor() as usize).min(density.len() - 1);
    let below: f64 = density[..k].iter().sum::<f64>() * h;
    (below + density[k] * (pos - k as f64) * h) / total
}
