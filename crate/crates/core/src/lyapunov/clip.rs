use crate::scalar::Scalar;

use super::ScalarMap;

/// Smooth concave clip: `ζ_N(t) = t` for `t ≤ N-1`, `ζ_N(t) = N` for
/// `t ≥ N+1`, joined by a quintic smoothstep in the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip<T = f64> {
    pub n: T,
}

/// Builds `ζ_N`. Panics if `N < 2`.
pub fn clip_concave<T: Scalar>(n: T) -> Clip<T> {
    assert!(n >= T::lit(2.0), "clip level must be at least 2");
    Clip { n }
}

/// Smoothstep `S(z) = 6z⁵ - 15z⁴ + 10z³`, its antiderivative `G` and derivative.
#[inline]
pub(crate) fn smoothstep<T: Scalar>(z: T) -> (T, T, T) {
    let z2 = z * z;
    let s = z2 * z * (T::lit(10.0) + z * (T::lit(-15.0) + T::lit(6.0) * z));
    let g = z2 * z2 * (T::lit(2.5) + z * (T::lit(-3.0) + z));
    let one_minus = T::one() - z;
    let ds = T::lit(30.0) * z2 * one_minus * one_minus;
    (g, s, ds)
}

impl<T: Scalar> Clip<T> {
    pub fn value(&self, t: T) -> T {
        self.eval(t).0
    }
}

impl<T: Scalar> ScalarMap<T> for Clip<T> {
    fn eval(&self, t: T) -> (T, T, T) {
        let lo = self.n - T::one();
        if t <= lo {
            return (t, T::one(), T::zero());
        }
        if t >= self.n + T::one() {
            return (self.n, T::zero(), T::zero());
        }
        let z = (t - lo) * T::lit(0.5);
        let (g, s, ds) = smoothstep(z);
        (t - T::lit(2.0) * g, T::one() - s, -T::lit(0.5) * ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_plateau() {
        let c = clip_concave(5.0);
        assert_eq!(c.value(0.0), 0.0);
        assert_eq!(c.value(7.0), 5.0);
        assert!((c.value(6.0) - 5.0f64).abs() < 1e-15);
    }

    #[test]
    fn discrete_concavity_on_blend() {
        let n = 3.5;
        let c = clip_concave(n);
        let h = 1e-3;
        let mut t = n - 1.0;
        while t + 2.0 * h <= n + 1.0 {
            let dd = c.value(t + 2.0 * h) - 2.0 * c.value(t + h) + c.value(t);
            assert!(dd <= 1e-9, "t={t}: {dd}");
            t += h;
        }
    }

    proptest! {
        #[test]
        fn derivative_bounds(n in 2.0f64..50.0, off in -3.0f64..3.0) {
            let c = clip_concave(n);
            let (_, d1, d2) = c.eval(n + off);
            prop_assert!((0.0..=1.0).contains(&d1));
            prop_assert!(d2 <= 0.0);
        }

        #[test]
        fn first_derivative_matches_fd(n in 2.0f64..20.0, z in 0.01f64..1.99) {
            let c = clip_concave(n);
            let t = n - 1.0 + z;
            let h = 1e-6;
            let fd = (c.value(t + h) - c.value(t - h)) / (2.0 * h);
            prop_assert!((fd - c.eval(t).1).abs() < 1e-7);
            let fd2 = (c.eval(t + h).1 - c.eval(t - h).1) / (2.0 * h);
            prop_assert!((fd2 - c.eval(t).2).abs() < 1e-6);
        }
    }
}
