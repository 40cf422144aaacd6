use serde::{Deserialize, Serialize};

use super::{FpkError, Grid};

/// A curve `t ↦ μ_t` stored as cell densities at increasing time nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalFlow {
    grid: Grid,
    times: Vec<f64>,
    densities: Vec<Vec<f64>>,
    /// Cumulative mass that left through the boundary, per node.
    leak: Vec<f64>,
    /// Cumulative mass added by flooring negative cells at zero, per node.
    floored: Vec<f64>,
}

impl MarginalFlow {
    pub fn new(grid: Grid, times: Vec<f64>, densities: Vec<Vec<f64>>, leak: Vec<f64>, floored: Vec<f64>) -> Result<Self, FpkError> {
        grid.validate()?;
        let k = times.len();
        if k == 0 || densities.len() != k || leak.len() != k || floored.len() != k {
            return Err(FpkError::Format("times, densities, leak and floor logs must have equal nonzero length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FpkError::Format("times must be strictly increasing".into()));
        }
        if densities.iter().any(|d| d.len() != grid.len()) {
            return Err(FpkError::Format(format!("each density needs {} cells", grid.len())));
        }
        if densities.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FpkError::Format("densities must be finite and nonnegative".into()));
        }
        Ok(Self { grid, times, densities, leak, floored })
    }

    /// The same density at every time node.
    pub fn stationary(grid: Grid, density: Vec<f64>, times: Vec<f64>) -> Result<Self, FpkError> {
        let k = times.len();
        Self::new(grid, times, vec![density; k], vec![0.0; k], vec![0.0; k])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("flow has nodes")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn density(&self, k: usize) -> &[f64] {
        &self.densities[k]
    }

    pub fn densities(&self) -> &[Vec<f64>] {
        &self.densities
    }

    pub fn leak(&self) -> &[f64] {
        &self.leak
    }

    pub fn floored(&self) -> &[f64] {
        &self.floored
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.densities[k].iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `mass + leak - floored - 1` at node `k`; zero up to rounding.
    pub fn accounting_defect(&self, k: usize) -> f64 {
        self.mass(k) + self.leak[k] - self.floored[k] - 1.0
    }

    /// Index of the node equal to `t` (to 1e-12 relative), if any.
    pub fn node_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + t.abs());
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Linear interpolation of the density between the enclosing nodes.
    pub fn density_at(&self, t: f64) -> Result<Vec<f64>, FpkError> {
        let (k, w) = self.bracket(t)?;
        if w == 0.0 {
            return Ok(self.densities[k].clone());
        }
        let (a, b) = (&self.densities[k], &self.densities[k + 1]);
        Ok(a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect())
    }

    /// `(k, w)` with `t = (1-w) t_k + w t_{k+1}`.
    pub fn bracket(&self, t: f64) -> Result<(usize, f64), FpkError> {
        if let Some(k) = self.node_of(t) {
            return Ok((k, 0.0));
        }
        let (t0, t1) = (self.times[0], self.horizon());
        if !(t >= t0 && t <= t1) {
            return Err(FpkError::TimeNotCovered { t, from: t0, to: t1 });
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok((k, w))
    }

    /// `∫ f dμ_{t_k}` by the midpoint rule.
    pub fn expectation(&self, k: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
        expectation_of(&self.grid, &self.densities[k], f)
    }

    /// Re-indexes time: `μ'_t = μ_{t + offset}` on `[0, horizon - offset]`,
    /// keeping the stored nodes at or after `offset` plus an interpolated
    /// node at `offset` itself.
    pub fn shifted(&self, offset: f64) -> Result<Self, FpkError> {
        if offset == 0.0 {
            return Ok(self.clone());
        }
        let (t0, t1) = (self.times[0], self.horizon());
        if !(offset > 0.0 && offset < t1 - t0) {
            return Err(FpkError::TimeNotCovered { t: offset, from: t0, to: t1 });
        }
        let start = t0 + offset;
        let (k, w) = self.bracket(start)?;
        let lerp = |a: f64, b: f64| (1.0 - w) * a + w * b;
        let mut times = vec![0.0];
        let mut dens = vec![self.density_at(start)?];
        let at = |v: &[f64]| if w == 0.0 { v[k] } else { lerp(v[k], v[k + 1]) };
        let mut leak = vec![at(&self.leak)];
        let mut floored = vec![at(&self.floored)];
        for j in k + 1..self.len() {
            times.push(self.times[j] - start);
            dens.push(self.densities[j].clone());
            leak.push(self.leak[j]);
            floored.push(self.floored[j]);
        }
        Self::new(self.grid, times, dens, leak, floored)
    }

    /// The flow restricted to the nodes with `t ≤ horizon` (which must be a node).
    pub fn truncated(&self, horizon: f64) -> Result<Self, FpkError> {
        let k = self.node_of(horizon).ok_or(FpkError::TimeNotCovered {
            t: horizon,
            from: self.times[0],
            to: self.horizon(),
        })?;
        Self::new(
            self.grid,
            self.times[..=k].to_vec(),
            self.densities[..=k].to_vec(),
            self.leak[..=k].to_vec(),
            self.floored[..=k].to_vec(),
        )
    }
}

/// `∫ f ρ dx` by the midpoint rule on `grid`.
pub fn expectation_of(grid: &Grid, density: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut x = vec![0.0; grid.dim];
    let mut acc = 0.0;
    for (k, &p) in density.iter().enumerate() {
        if p != 0.0 {
            grid.center_into(k, &mut x);
            acc += f(&x) * p;
        }
    }
    acc * grid.cell_volume()
}

/// `Σ |p - q| h^d`.
pub fn l1_distance(grid: &Grid, p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.cell_volume()
}
