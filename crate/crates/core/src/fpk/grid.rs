use serde::{Deserialize, Serialize};

use super::FpkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Zero flux through the outer faces.
    Reflecting,
    /// Zero density just outside; outflow is booked as leak.
    Absorbing,
}

/// Uniform cell-centred grid on `[-R, R]^d`, `d ∈ {1, 2}`. Cells are indexed
/// with the first axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub r_dom: f64,
    pub n_cells: usize,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(dim: usize, r_dom: f64, n_cells: usize, boundary: Boundary) -> Result<Self, FpkError> {
        let g = Self { dim, r_dom, n_cells, boundary };
        g.validate()?;
        Ok(g)
    }

    /// Grid with spacing `h` (rounded so that `2R/h` is an integer).
    pub fn with_spacing(dim: usize, r_dom: f64, h: f64, boundary: Boundary) -> Result<Self, FpkError> {
        Self::new(dim, r_dom, (2.0 * r_dom / h).round() as usize, boundary)
    }

    pub fn validate(&self) -> Result<(), FpkError> {
        if !(1..=2).contains(&self.dim) {
            return Err(FpkError::InvalidGrid(format!("dimension {} not in {{1, 2}}", self.dim)));
        }
        if !(self.r_dom > 0.0 && self.r_dom.is_finite()) {
            return Err(FpkError::InvalidGrid(format!("domain half-width {} must be positive", self.r_dom)));
        }
        if self.n_cells < 16 {
            return Err(FpkError::InvalidGrid(format!("{} cells per axis, need at least 16", self.n_cells)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        2.0 * self.r_dom / self.n_cells as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n_cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Centre coordinate of cell `i` along one axis.
    #[inline]
    pub fn axis_center(&self, i: usize) -> f64 {
        -self.r_dom + (i as f64 + 0.5) * self.h()
    }

    /// Coordinate of face `i` (between cells `i-1` and `i`) along one axis.
    #[inline]
    pub fn axis_face(&self, i: usize) -> f64 {
        -self.r_dom + i as f64 * self.h()
    }

    /// Centre of flat cell index `k`, written into `out` (`dim` entries).
    #[inline]
    pub fn center_into(&self, k: usize, out: &mut [f64]) {
        let n = self.n_cells;
        out[0] = self.axis_center(k % n);
        if self.dim == 2 {
            out[1] = self.axis_center(k / n);
        }
    }

    pub fn center(&self, k: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.center_into(k, &mut x);
        x
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    /// Whether the closed ball `(c, r)` stays at least `margin_cells` cells
    /// away from the outer boundary.
    pub fn contains_ball(&self, center: &[f64], radius: f64, margin_cells: f64) -> bool {
        let lim = self.r_dom - margin_cells * self.h();
        center.iter().all(|&c| c - radius >= -lim && c + radius <= lim)
    }

    /// Midpoint-sampled density, renormalized to unit mass.
    pub fn sample_density(&self, f: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>, FpkError> {
        let mut x = vec![0.0; self.dim];
        let mut v: Vec<f64> = (0..self.len())
            .map(|k| {
                self.center_into(k, &mut x);
                f(&x)
            })
            .collect();
        if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(FpkError::InvalidInitial("sampled density must be finite and nonnegative".into()));
        }
        let mass: f64 = v.iter().sum::<f64>() * self.cell_volume();
        if !(mass > 0.0) {
            return Err(FpkError::InvalidInitial("sampled density has no mass on the grid".into()));
        }
        v.iter_mut().for_each(|p| *p /= mass);
        Ok(v)
    }

    /// Isotropic Gaussian `N(mean, var I)`.
    pub fn gaussian(&self, mean: &[f64], var: f64) -> Result<Vec<f64>, FpkError> {
        if mean.len() != self.dim || !(var > 0.0) {
            return Err(FpkError::InvalidInitial(format!("gaussian needs {}-dim mean and var > 0", self.dim)));
        }
        self.sample_density(|x| {
            let r2: f64 = x.iter().zip(mean).map(|(a, m)| (a - m) * (a - m)).sum();
            (-0.5 * r2 / var).exp()
        })
    }

    /// Point mass at `x0`, represented by a Gaussian of standard deviation `2h`.
    pub fn delta(&self, x0: &[f64]) -> Result<Vec<f64>, FpkError> {
        let s = 2.0 * self.h();
        self.gaussian(x0, s * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_centres() {
        let g = Grid::new(1, 8.0, 800, Boundary::Reflecting).unwrap();
        assert!((g.h() - 0.02).abs() < 1e-15);
        assert!((g.axis_center(0) + 7.99).abs() < 1e-12);
        let g2 = Grid::new(2, 1.0, 16, Boundary::Absorbing).unwrap();
        assert_eq!(g2.len(), 256);
        assert_eq!(g2.center(17), vec![g2.axis_center(1), g2.axis_center(1)]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(3, 1.0, 32, Boundary::Reflecting).is_err());
        assert!(Grid::new(1, 1.0, 15, Boundary::Reflecting).is_err());
        assert!(Grid::new(1, 0.0, 32, Boundary::Reflecting).is_err());
    }

    #[test]
    fn gaussian_is_normalized() {
        let g = Grid::new(2, 5.0, 64, Boundary::Reflecting).unwrap();
        let p = g.gaussian(&[0.5, -0.5], 0.3).unwrap();
        assert!((p.iter().sum::<f64>() * g.cell_volume() - 1.0).abs() < 1e-12);
    }
}
