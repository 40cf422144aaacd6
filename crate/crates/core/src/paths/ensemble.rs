use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InitialLaw, PathsError};
use crate::coeffs::CoefficientField;
use crate::linalg;
use crate::scalar::dot;
use crate::testfn::SmoothFunction;

/// Symmetric PSD `σ` with `σσᵀ = 2A`, and the magnitude of negative
/// eigenvalues of `A` clipped to zero.
pub fn sqrt_diffusion(a: &[f64], d: usize) -> Result<(Vec<f64>, f64), PathsError> {
    if a.len() != d * d {
        return Err(PathsError::InvalidArgument(format!("matrix has {} entries, need {}", a.len(), d * d)));
    }
    let norm = linalg::operator_norm(a, d);
    let asym = linalg::max_asymmetry(a, d);
    if asym > 1e-12 * norm.max(1.0) {
        return Err(PathsError::NotSymmetric(asym));
    }
    let min_eig = linalg::min_eigenvalue(a, d);
    if min_eig < -1e-10 {
        return Err(PathsError::NotPsd(min_eig));
    }
    let mut s = vec![0.0; d * d];
    let clip = linalg::scaled_psd_sqrt_into(a, d, 2.0, &mut s);
    Ok((s, clip / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// States are stored every `record_stride` steps and at the final step.
    pub record_stride: usize,
}

/// A test function whose running integral `Σ_k Lf(t_k, X_k) dt` is
/// accumulated at full time resolution during simulation. `generator`
/// overrides the field used for `L`; by default it is the simulated field.
#[derive(Clone, Copy)]
pub struct Tracked<'a> {
    pub f: &'a dyn SmoothFunction<f64>,
    pub generator: Option<&'a CoefficientField<f64>>,
}

impl<'a> Tracked<'a> {
    pub fn new(f: &'a dyn SmoothFunction<f64>) -> Self {
        Self { f, generator: None }
    }

    pub fn with_generator(f: &'a dyn SmoothFunction<f64>, field: &'a CoefficientField<f64>) -> Self {
        Self { f, generator: Some(field) }
    }
}

/// Immutable output of [`simulate`]. Arrays are path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub(super) n_paths: usize,
    pub(super) dim: usize,
    pub(super) dt: f64,
    pub(super) n_steps: usize,
    pub(super) seed: u64,
    pub(super) stride: usize,
    pub(super) record_steps: Vec<usize>,
    /// `N × R × d`.
    pub(super) states: Vec<f64>,
    /// `N × R`: `max_{k ≤ k_r} |X_k|²` over every step, not only records.
    pub(super) max_norm_sq: Vec<f64>,
    pub(super) tracked_labels: Vec<String>,
    /// `N × n_tracked × R`.
    pub(super) integrals: Vec<f64>,
    pub(super) blown: Vec<bool>,
    pub(super) max_clip: f64,
}

fn record_steps(n_steps: usize, stride: usize) -> Vec<usize> {
    let mut r: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *r.last().unwrap() != n_steps {
        r.push(n_steps);
    }
    r
}

pub(super) fn step_count(dt: f64, horizon: f64) -> Result<usize, PathsError> {
    if !(dt > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err(PathsError::InvalidArgument(format!("need dt > 0 and T > 0, got dt={dt}, T={horizon}")));
    }
    let k = (horizon / dt).round() as usize;
    if k == 0 || (k as f64 * dt - horizon).abs() > 1e-9 * horizon {
        return Err(PathsError::InvalidArgument(format!("T = {horizon} is not a multiple of dt = {dt}")));
    }
    Ok(k)
}

struct Scratch {
    x: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    sigma: Vec<f64>,
    xi: Vec<f64>,
    a2: Vec<f64>,
    b2: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self {
            x: vec![0.0; d],
            a: vec![0.0; d * d],
            b: vec![0.0; d],
            sigma: vec![0.0; d * d],
            xi: vec![0.0; d],
            a2: vec![0.0; d * d],
            b2: vec![0.0; d],
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
        }
    }
}

/// Euler–Maruyama ensemble `X_{k+1} = X_k + b dt + σ ξ √dt`, `σσᵀ = 2A`.
///
/// Path `i` draws its noise from the ChaCha8 stream `i` of the master seed;
/// initial points come from stream `u64::MAX`, in path order. The result is
/// therefore independent of the worker count.
pub fn simulate(
    field: &CoefficientField<f64>,
    law: &InitialLaw,
    cfg: &SimConfig,
    tracked: &[Tracked<'_>],
) -> Result<PathEnsemble, PathsError> {
    let d = field.dim();
    law.validate()?;
    if law.dim() != d {
        return Err(PathsError::InvalidArgument(format!("law has dimension {}, field {}", law.dim(), d)));
    }
    if !(cfg.dt <= 1e-2) {
        return Err(PathsError::InvalidArgument(format!("dt = {} exceeds 1e-2", cfg.dt)));
    }
    if cfg.n_paths < 1000 {
        return Err(PathsError::InvalidArgument(format!("{} paths, need at least 1000", cfg.n_paths)));
    }
    if cfg.record_stride == 0 {
        return Err(PathsError::InvalidArgument("record stride must be positive".into()));
    }
    for t in tracked {
        if t.f.dim() != d || t.generator.is_some_and(|g| g.dim() != d) {
            return Err(PathsError::InvalidArgument(format!("tracked function {} has the wrong dimension", t.f.label())));
        }
    }
    let n_steps = step_count(cfg.dt, cfg.horizon)?;
    let steps = record_steps(n_steps, cfg.record_stride);
    let r = steps.len();
    let n = cfg.n_paths;
    let nt = tracked.len();

    let mut init = Vec::new();
    let mut rng0 = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng0.set_stream(u64::MAX);
    law.sample_into(&mut rng0, n, &mut init);

    let mut states = vec![0.0; n * r * d];
    let mut max_norm_sq = vec![0.0; n * r];
    let int_stride = (nt * r).max(1);
    let mut integrals = vec![0.0; n * int_stride];
    let mut blown = vec![false; n];
    let mut clips = vec![0.0; n];
    let dt = cfg.dt;
    let sq = dt.sqrt();

    states
        .par_chunks_mut(r * d)
        .zip(max_norm_sq.par_chunks_mut(r))
        .zip(integrals.par_chunks_mut(int_stride))
        .zip(blown.par_iter_mut())
        .zip(clips.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((((st, mx), ints), bl), clip))| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let mut s = Scratch::new(d);
            s.x.copy_from_slice(&init[i * d..(i + 1) * d]);
            let mut acc = vec![0.0; nt];
            let mut running_max = dot(&s.x, &s.x);
            let mut next = 0;
            for k in 0..=n_steps {
                let t = k as f64 * dt;
                if next < r && steps[next] == k {
                    st[next * d..(next + 1) * d].copy_from_slice(&s.x);
                    mx[next] = running_max;
                    for (j, v) in acc.iter().enumerate() {
                        ints[j * r + next] = *v;
                    }
                    next += 1;
                }
                if k == n_steps || *bl {
                    continue;
                }
                field.diffusion_into(t, &s.x, &mut s.a);
                field.drift_into(t, &s.x, &mut s.b);
                for (j, tr) in tracked.iter().enumerate() {
                    tr.f.derivatives(&s.x, &mut s.grad, &mut s.hess);
                    let lf = match tr.generator {
                        None => linalg::frobenius_inner(&s.a, &s.hess) + dot(&s.b, &s.grad),
                        Some(g) => {
                            g.diffusion_into(t, &s.x, &mut s.a2);
                            g.drift_into(t, &s.x, &mut s.b2);
                            linalg::frobenius_inner(&s.a2, &s.hess) + dot(&s.b2, &s.grad)
                        }
                    };
                    acc[j] += lf * dt;
                }
                if d == 1 {
                    let a = s.a[0];
                    *clip = f64::max(*clip, (-a).max(0.0));
                    s.sigma[0] = (2.0 * a.max(0.0)).sqrt();
                } else {
                    let c = linalg::scaled_psd_sqrt_into(&s.a, d, 2.0, &mut s.sigma);
                    *clip = f64::max(*clip, c / 2.0);
                }
                for z in s.xi.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                let mut finite = true;
                for p in 0..d {
                    let noise: f64 = (0..d).map(|q| s.sigma[p * d + q] * s.xi[q]).sum();
                    s.x[p] += s.b[p] * dt + noise * sq;
                    finite &= s.x[p].is_finite();
                }
                running_max = running_max.max(dot(&s.x, &s.x));
                if !finite || acc.iter().any(|v| !v.is_finite()) {
                    *bl = true;
                    s.x.iter_mut().for_each(|v| *v = f64::NAN);
                    acc.iter_mut().for_each(|v| *v = f64::NAN);
                    running_max = f64::NAN;
                }
            }
        });

    if nt == 0 {
        integrals.clear();
    }
    let n_blown = blown.iter().filter(|b| **b).count();
    if n_blown * 1000 > n {
        return Err(PathsError::NonFinite { blown: n_blown, n_paths: n });
    }
    Ok(PathEnsemble {
        n_paths: n,
        dim: d,
        dt,
        n_steps,
        seed: cfg.seed,
        stride: cfg.record_stride,
        record_steps: steps,
        states,
        max_norm_sq,
        tracked_labels: tracked.iter().map(|t| t.f.label()).collect(),
        integrals,
        blown,
        max_clip: clips.iter().fold(0.0, |m: f64, c| m.max(*c)),
    })
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Number of paths that blew up (excluded from every statistic).
    pub fn n_blown(&self) -> usize {
        self.blown.iter().filter(|b| **b).count()
    }

    pub fn n_valid(&self) -> usize {
        self.n_paths - self.n_blown()
    }

    /// Largest negative diffusion eigenvalue clipped during simulation.
    pub fn max_clip(&self) -> f64 {
        self.max_clip
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record_steps.iter().map(|&k| k as f64 * self.dt).collect()
    }

    pub fn tracked_labels(&self) -> &[String] {
        &self.tracked_labels
    }

    /// Record index of time `t`, which must be a recorded step.
    pub fn record_index(&self, t: f64) -> Result<usize, PathsError> {
        let k = (t / self.dt).round();
        if !(t >= 0.0) || (k * self.dt - t).abs() > 1e-9 * (1.0 + t) {
            return Err(PathsError::TimeNotCovered { t });
        }
        let k = k as usize;
        self.record_steps.binary_search(&k).map_err(|_| PathsError::TimeNotCovered { t })
    }

    #[inline]
    pub fn state(&self, path: usize, record: usize) -> &[f64] {
        let r = self.record_steps.len();
        let o = (path * r + record) * self.dim;
        &self.states[o..o + self.dim]
    }

    /// `max_{s ≤ t_r} |X_s|²` along `path`, over every simulated step.
    pub fn max_norm_sq(&self, path: usize, record: usize) -> f64 {
        self.max_norm_sq[path * self.record_steps.len() + record]
    }

    /// `Σ_{k < k_r} Lf(t_k, X_k) dt` for tracked function `j`.
    pub fn integral(&self, j: usize, path: usize, record: usize) -> f64 {
        let r = self.record_steps.len();
        self.integrals[(path * self.tracked_labels.len() + j) * r + record]
    }

    /// Indices of the paths that stayed finite.
    pub fn valid_paths(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_paths).filter(move |&i| !self.blown[i])
    }

    /// Finite first coordinates at record `r`, in path order.
    pub fn first_coordinates(&self, record: usize) -> Vec<f64> {
        self.valid_paths().map(|i| self.state(i, record)[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, Params};

    fn cfg(n: usize, dt: f64, t: f64, seed: u64) -> SimConfig {
        SimConfig { n_paths: n, dt, horizon: t, seed, record_stride: 100 }
    }

    #[test]
    fn sqrt_diffusion_examples() {
        let (s, c) = sqrt_diffusion(&[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        assert!((s[0] - r2).abs() < 1e-14 && s[1].abs() < 1e-14 && (s[3] - r2).abs() < 1e-14 && c == 0.0);
        let (s, _) = sqrt_diffusion(&[2.0, 0.0, 0.0, 8.0], 2).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-14 && (s[3] - 4.0).abs() < 1e-14);
        let (s, _) = sqrt_diffusion(&[0.0; 4], 2).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
        assert!(matches!(sqrt_diffusion(&[1.0, 0.5, 0.0, 1.0], 2), Err(PathsError::NotSymmetric(_))));
        let (s, c) = sqrt_diffusion(&[-1e-11], 1).unwrap();
        assert!(s[0] == 0.0 && c > 0.0);
    }

    #[test]
    fn sqrt_diffusion_squares_back() {
        let a = [1.0, 0.3, 0.3, 0.5];
        let (s, _) = sqrt_diffusion(&a, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| s[i * 2 + k] * s[j * 2 + k]).sum();
                assert!((v - 2.0 * a[i * 2 + j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_noise_follows_the_ode() {
        let f = CoefficientField::new(1, "decay", |_, _, a: &mut [f64]| a[0] = 0.0, |_, x: &[f64], b: &mut [f64]| b[0] = -x[0]);
        let law = InitialLaw::Dirac { point: vec![2.0] };
        let ens = simulate(&f, &law, &cfg(1000, 1e-3, 1.0, 3), &[]).unwrap();
        let last = ens.record_times().len() - 1;
        let exact = 2.0 * (-1.0f64).exp();
        let err = ens.valid_paths().map(|i| (ens.state(i, last)[0] - exact).abs()).fold(0.0, f64::max);
        assert!(err <= 5e-3 * 2.0, "{err}");
    }

    #[test]
    fn zero_field_keeps_paths_constant() {
        let f = CoefficientField::<f64>::zero(2);
        let law = InitialLaw::Gaussian { mean: vec![0.0, 1.0], var: 1.0 };
        let ens = simulate(&f, &law, &cfg(1000, 1e-2, 1.0, 9), &[]).unwrap();
        let r = ens.record_times().len();
        for i in 0..1000 {
            assert_eq!(ens.state(i, 0), ens.state(i, r - 1));
        }
    }

    #[test]
    fn ou_stationary_moments() {
        let f = builtin_field("ou", &Params::new()).unwrap();
        let law = InitialLaw::Gaussian { mean: vec![0.0], var: 1.0 };
        let n = 20_000;
        let ens = simulate(&f, &law, &cfg(n, 1e-3, 1.0, 11), &[]).unwrap();
        let xs = ens.first_coordinates(ens.record_times().len() - 1);
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        let nn = n as f64;
        assert!(m.abs() <= 4.0 / nn.sqrt(), "{m}");
        assert!((v - 1.0).abs() <= 4.0 * (2.0 / nn).sqrt(), "{v}");
    }

    #[test]
    fn regeneration_is_bit_identical_across_thread_counts() {
        let f = builtin_field("ou", &Params::new()).unwrap();
        let law = InitialLaw::Gaussian { mean: vec![0.3], var: 0.5 };
        let c = cfg(1500, 1e-2, 0.5, 42);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| simulate(&f, &law, &c, &[]).unwrap())
        };
        assert_eq!(run(1), run(3));
        let other = simulate(&f, &law, &SimConfig { seed: 43, ..c }, &[]).unwrap();
        assert_ne!(run(1).states, other.states);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = CoefficientField::new(1, "explode", |_, _, a: &mut [f64]| a[0] = 1.0, |_, x: &[f64], b: &mut [f64]| b[0] = x[0].powi(5));
        let law = InitialLaw::Gaussian { mean: vec![3.0], var: 1.0 };
        assert!(matches!(simulate(&f, &law, &cfg(1000, 1e-2, 1.0, 1), &[]), Err(PathsError::NonFinite { .. })));
    }

    #[test]
    fn preconditions() {
        let f = CoefficientField::<f64>::zero(1);
        let law = InitialLaw::Dirac { point: vec![0.0] };
        assert!(simulate(&f, &law, &cfg(999, 1e-3, 1.0, 1), &[]).is_err());
        assert!(simulate(&f, &law, &cfg(1000, 2e-2, 1.0, 1), &[]).is_err());
        assert!(simulate(&f, &law, &cfg(1000, 3e-3, 1.0, 1), &[]).is_err());
    }
}
