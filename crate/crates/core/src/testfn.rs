//! Smooth functions with analytic derivatives and the generator `L` acting on them.

use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientField;
use crate::linalg;
use crate::scalar::{dot, norm_sq, Scalar};

/// A `C²` function on `R^d` with analytic gradient and Hessian (row-major).
pub trait SmoothFunction<T: Scalar = f64>: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T], out: &mut [T]);
    fn hessian(&self, x: &[T], out: &mut [T]);

    /// Gradient and Hessian in one pass.
    fn derivatives(&self, x: &[T], grad: &mut [T], hess: &mut [T]) {
        self.gradient(x, grad);
        self.hessian(x, hess);
    }

    /// `(center, radius)` of a closed ball containing the support, when compact.
    fn support(&self) -> Option<(Vec<T>, T)> {
        None
    }

    fn label(&self) -> String;
}

/// Scratch buffers for generator evaluations in dimension `d`.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub grad: Vec<T>,
    pub hess: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new(d: usize) -> Self {
        Self { a: vec![T::zero(); d * d], b: vec![T::zero(); d], grad: vec![T::zero(); d], hess: vec![T::zero(); d * d] }
    }
}

/// `L u (t,x) = trace(A D²u) + ⟨b, ∇u⟩`, unchecked, using caller scratch.
#[inline]
pub fn apply_generator_with<T: Scalar, F: SmoothFunction<T> + ?Sized>(
    field: &CoefficientField<T>,
    u: &F,
    t: T,
    x: &[T],
    ws: &mut Workspace<T>,
) -> T {
    field.diffusion_into(t, x, &mut ws.a);
    field.drift_into(t, x, &mut ws.b);
    u.derivatives(x, &mut ws.grad, &mut ws.hess);
    linalg::frobenius_inner(&ws.a, &ws.hess) + dot(&ws.b, &ws.grad)
}

/// `⟨A ∇u, ∇u⟩`, unchecked.
#[inline]
pub fn carre_du_champ_with<T: Scalar, F: SmoothFunction<T> + ?Sized>(
    field: &CoefficientField<T>,
    u: &F,
    t: T,
    x: &[T],
    ws: &mut Workspace<T>,
) -> T {
    field.diffusion_into(t, x, &mut ws.a);
    u.gradient(x, &mut ws.grad);
    linalg::quadratic_form(&ws.a, &ws.grad)
}

/// `exp(1 - 1/(1 - |x-c|²/r²))` on `|x-c| < r`, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump<T = f64> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Scalar> Bump<T> {
    pub fn new(center: Vec<T>, radius: T) -> Self {
        assert!(radius > T::zero(), "bump radius must be positive");
        Self { center, radius }
    }

    /// `(q, y)` with `q = 1 - |y|²/r²`, `y = x - c`; `None` outside the support.
    #[inline]
    fn inside(&self, x: &[T], y: &mut [T]) -> Option<T> {
        for ((yi, &xi), &ci) in y.iter_mut().zip(x).zip(&self.center) {
            *yi = xi - ci;
        }
        let q = T::one() - norm_sq(y) / (self.radius * self.radius);
        (q > T::zero()).then_some(q)
    }

    #[inline]
    fn core(q: T) -> T {
        (T::one() - T::one() / q).exp()
    }

    /// Upper bounds on `sup|∇f|` and `sup‖D²f‖` (operator norm), from
    /// maximizing the closed-form radial profile on a fine grid.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let r = self.radius.as_f64();
        let (mut g, mut h) = (0.0f64, 0.0f64);
        for k in 1..4000 {
            let rho = r * k as f64 / 4000.0;
            let q = 1.0 - rho * rho / (r * r);
            let f = (1.0 - 1.0 / q).exp();
            let gq = -2.0 / (r * r * q * q);
            g = g.max((f * gq * rho).abs());
            let radial = f * ((gq * gq - 8.0 / (r.powi(4) * q.powi(3))) * rho * rho + gq);
            h = h.max(radial.abs()).max((f * gq).abs());
        }
        // grid maximization slightly underestimates; pad
        (1.01 * g, 1.01 * h)
    }
}

impl<T: Scalar> SmoothFunction<T> for Bump<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[T]) -> T {
        let mut y = [T::zero(); 8];
        let d = self.dim();
        if d <= 8 {
            return self.inside(x, &mut y[..d]).map_or(T::zero(), Self::core);
        }
        let mut y = vec![T::zero(); d];
        self.inside(x, &mut y).map_or(T::zero(), Self::core)
    }

    fn gradient(&self, x: &[T], out: &mut [T]) {
        match self.inside(x, out) {
            None => out.fill(T::zero()),
            Some(q) => {
                let r2 = self.radius * self.radius;
                let s = Self::core(q) * (-T::lit(2.0) / (r2 * q * q));
                out.iter_mut().for_each(|v| *v = *v * s);
            }
        }
    }

    fn hessian(&self, x: &[T], out: &mut [T]) {
        let mut g = vec![T::zero(); self.dim()];
        self.derivatives(x, &mut g, out);
    }

    fn derivatives(&self, x: &[T], grad: &mut [T], hess: &mut [T]) {
        let d = self.dim();
        match self.inside(x, grad) {
            None => {
                grad.fill(T::zero());
                hess.fill(T::zero());
            }
            Some(q) => {
                let r2 = self.radius * self.radius;
                let f = Self::core(q);
                let g = -T::lit(2.0) / (r2 * q * q);
                let c = g * g - T::lit(8.0) / (r2 * r2 * q * q * q);
                for i in 0..d {
                    for j in 0..d {
                        let diag = if i == j { g } else { T::zero() };
                        hess[i * d + j] = f * (c * grad[i] * grad[j] + diag);
                    }
                }
                let s = f * g;
                grad.iter_mut().for_each(|v| *v = *v * s);
            }
        }
    }

    fn support(&self) -> Option<(Vec<T>, T)> {
        Some((self.center.clone(), self.radius))
    }

    fn label(&self) -> String {
        let c: Vec<String> = self.center.iter().map(|v| format!("{v}")).collect();
        format!("bump[c=({}),r={}]", c.join(","), self.radius)
    }
}

/// The identically zero function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zero {
    pub dim: usize,
}

impl<T: Scalar> SmoothFunction<T> for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[T]) -> T {
        T::zero()
    }
    fn gradient(&self, _: &[T], out: &mut [T]) {
        out.fill(T::zero())
    }
    fn hessian(&self, _: &[T], out: &mut [T]) {
        out.fill(T::zero())
    }
    fn support(&self) -> Option<(Vec<T>, T)> {
        Some((vec![T::zero(); self.dim], T::zero()))
    }
    fn label(&self) -> String {
        "zero".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant<T = f64> {
    pub dim: usize,
    pub value: T,
}

impl<T: Scalar> SmoothFunction<T> for Constant<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[T]) -> T {
        self.value
    }
    fn gradient(&self, _: &[T], out: &mut [T]) {
        out.fill(T::zero())
    }
    fn hessian(&self, _: &[T], out: &mut [T]) {
        out.fill(T::zero())
    }
    fn label(&self) -> String {
        format!("constant[{}]", self.value)
    }
}

/// `⟨v, x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T = f64> {
    pub direction: Vec<T>,
}

impl<T: Scalar> SmoothFunction<T> for Linear<T> {
    fn dim(&self) -> usize {
        self.direction.len()
    }
    fn value(&self, x: &[T]) -> T {
        dot(&self.direction, x)
    }
    fn gradient(&self, _: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.direction)
    }
    fn hessian(&self, _: &[T], out: &mut [T]) {
        out.fill(T::zero())
    }
    fn label(&self) -> String {
        "linear".into()
    }
}

/// `|x|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub dim: usize,
}

impl<T: Scalar> SmoothFunction<T> for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[T]) -> T {
        norm_sq(x)
    }
    fn gradient(&self, x: &[T], out: &mut [T]) {
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi + xi;
        }
    }
    fn hessian(&self, _: &[T], out: &mut [T]) {
        let d = self.dim;
        out.fill(T::zero());
        for i in 0..d {
            out[i * d + i] = T::lit(2.0);
        }
    }
    fn label(&self) -> String {
        "quadratic".into()
    }
}

/// The seven registry bumps in dimension 1 or 2.
///
/// One dimension: radius 1.5, centers `-1.5, -1, ..., 1.5`. Two dimensions:
/// radius 1.5, the origin plus six centers on the unit circle.
pub fn builtin_bumps(d: usize) -> Vec<Bump<f64>> {
    match d {
        1 => (0..7).map(|k| Bump::new(vec![-1.5 + 0.5 * k as f64], 1.5)).collect(),
        2 => std::iter::once(Bump::new(vec![0.0, 0.0], 1.5))
            .chain((0..6).map(|k| {
                let phi = std::f64::consts::PI * k as f64 / 3.0;
                Bump::new(vec![phi.cos(), phi.sin()], 1.5)
            }))
            .collect(),
        _ => (0..7)
            .map(|k| {
                let mut c = vec![0.0; d];
                c[0] = -1.5 + 0.5 * k as f64;
                Bump::new(c, 1.5)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, Params};

    fn fd_check<F: SmoothFunction<f64>>(f: &F, x: &[f64]) {
        let d = f.dim();
        let h = 1e-5;
        let mut g = vec![0.0; d];
        let mut hs = vec![0.0; d * d];
        f.gradient(x, &mut g);
        f.hessian(x, &mut hs);
        for i in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "grad {i}: {fd} vs {}", g[i]);
            let mut gp = vec![0.0; d];
            let mut gm = vec![0.0; d];
            f.gradient(&xp, &mut gp);
            f.gradient(&xm, &mut gm);
            for j in 0..d {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                assert!((fd - hs[j * d + i]).abs() < 1e-5, "hess {i}{j}: {fd} vs {}", hs[j * d + i]);
            }
        }
    }

    #[test]
    fn bump_derivatives_match_fd() {
        let b = Bump::new(vec![0.3, -0.2], 1.2);
        for x in [[0.0, 0.0], [0.9, 0.1], [-0.5, -0.7], [0.3, 0.7]] {
            fd_check(&b, &x);
        }
        fd_check(&Bump::new(vec![0.0], 1.5), &[1.1]);
    }

    #[test]
    fn bump_vanishes_outside() {
        let b = Bump::new(vec![0.0], 1.0);
        assert_eq!(b.value(&[1.0]), 0.0);
        assert_eq!(b.value(&[0.0]), 1.0);
    }

    #[test]
    fn derivative_bounds_dominate_samples() {
        let b = Bump::new(vec![0.0], 1.5);
        let (g, h) = b.derivative_bounds();
        for k in -300..=300 {
            let x = [k as f64 * 0.005];
            let mut gr = [0.0];
            let mut hs = [0.0];
            b.gradient(&x, &mut gr);
            b.hessian(&x, &mut hs);
            assert!(gr[0].abs() <= g && hs[0].abs() <= h);
        }
    }

    #[test]
    fn generator_on_ou() {
        // L|x|² = 2d - 2|x|² for A = I, b = -x
        let f = builtin_field::<f64>("ou", &Params::from([("dim".into(), crate::coeffs::ParamValue::Number(2.0))])).unwrap();
        let mut ws = Workspace::new(2);
        let v = apply_generator_with(&f, &Quadratic { dim: 2 }, 0.0, &[1.0, 2.0], &mut ws);
        assert!((v - (4.0 - 10.0)).abs() < 1e-14);
        let c = carre_du_champ_with(&f, &Quadratic { dim: 2 }, 0.0, &[1.0, 2.0], &mut ws);
        assert!((c - 20.0).abs() < 1e-14);
    }

    #[test]
    fn registry_has_seven() {
        assert_eq!(builtin_bumps(1).len(), 7);
        assert_eq!(builtin_bumps(2).len(), 7);
    }
}
