//! Small dense symmetric-matrix helpers on row-major slices.
//!
//! Dimensions 1 and 2 use closed forms (they sit in the inner loops of the
//! grid solver and the path simulator); larger matrices go through
//! `nalgebra`'s symmetric eigensolver in `f64`.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// Largest `|a_ij - a_ji|`.
pub fn max_asymmetry<T: Scalar>(a: &[T], n: usize) -> T {
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    worst
}

pub fn trace<T: Scalar>(a: &[T], n: usize) -> T {
    (0..n).fold(T::zero(), |acc, i| acc + a[i * n + i])
}

/// `sum_ij a_ij h_ij`, i.e. `trace(A H)` for symmetric `H`.
pub fn frobenius_inner<T: Scalar>(a: &[T], h: &[T]) -> T {
    a.iter().zip(h).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `<A v, v>`.
pub fn quadratic_form<T: Scalar>(a: &[T], v: &[T]) -> T {
    let n = v.len();
    let mut acc = T::zero();
    for i in 0..n {
        let mut row = T::zero();
        for j in 0..n {
            row = row + a[i * n + j] * v[j];
        }
        acc = acc + row * v[i];
    }
    acc
}

/// Eigenvalues in ascending order and matching unit eigenvectors (stored as
/// columns, row-major `n x n`) of a symmetric matrix. Only the upper triangle
/// is read for `n >= 3`.
pub fn sym_eigen<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    match n {
        0 => (Vec::new(), Vec::new()),
        1 => (vec![a[0]], vec![T::one()]),
        2 => {
            let (p, q, r) = (a[0], T::lit(0.5) * (a[1] + a[2]), a[3]);
            let half = T::lit(0.5);
            let mean = half * (p + r);
            let rad = ((half * (p - r)).powi(2) + q * q).sqrt();
            let (lo, hi) = (mean - rad, mean + rad);
            // eigenvector of the larger eigenvalue, built from whichever row is better conditioned
            let (vx, vy) = if q == T::zero() {
                if p >= r {
                    (T::one(), T::zero())
                } else {
                    (T::zero(), T::one())
                }
            } else if p >= r {
                (hi - r, q)
            } else {
                (q, hi - p)
            };
            let len = (vx * vx + vy * vy).sqrt();
            let (vx, vy) = (vx / len, vy / len);
            // columns: [lo-vector, hi-vector]
            (vec![lo, hi], vec![-vy, vx, vx, vy])
        }
        _ => {
            let m = DMatrix::from_fn(n, n, |i, j| {
                let (i, j) = if i <= j { (i, j) } else { (j, i) };
                a[i * n + j].as_f64()
            });
            let eig = m.symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let values = order.iter().map(|&k| T::lit(eig.eigenvalues[k])).collect();
            let mut vectors = vec![T::zero(); n * n];
            for (col, &k) in order.iter().enumerate() {
                for row in 0..n {
                    vectors[row * n + col] = T::lit(eig.eigenvectors[(row, k)]);
                }
            }
            (values, vectors)
        }
    }
}

pub fn min_eigenvalue<T: Scalar>(a: &[T], n: usize) -> T {
    sym_eigen(a, n).0.first().copied().unwrap_or_else(T::zero)
}

/// Operator (spectral) norm of a symmetric matrix.
pub fn operator_norm<T: Scalar>(a: &[T], n: usize) -> T {
    match n {
        0 => T::zero(),
        1 => a[0].abs(),
        _ => {
            let (vals, _) = sym_eigen(a, n);
            vals.iter().fold(T::zero(), |m, v| m.max(v.abs()))
        }
    }
}

/// Writes the symmetric PSD square root of `scale * A` into `out` and returns
/// the total magnitude of negative eigenvalues that had to be clipped to zero.
pub fn scaled_psd_sqrt_into<T: Scalar>(a: &[T], n: usize, scale: T, out: &mut [T]) -> T {
    match n {
        0 => T::zero(),
        1 => {
            let v = scale * a[0];
            if v >= T::zero() {
                out[0] = v.sqrt();
                T::zero()
            } else {
                out[0] = T::zero();
                -v
            }
        }
        2 => {
            let (p, q, r) = (scale * a[0], scale * T::lit(0.5) * (a[1] + a[2]), scale * a[3]);
            let det = p * r - q * q;
            let tr = p + r;
            if det >= T::zero() && tr >= T::zero() {
                // sqrt(M) = (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det)) for PSD 2x2 M
                let s = det.sqrt();
                let t = (tr + s + s).sqrt();
                if t == T::zero() {
                    out[..4].iter_mut().for_each(|v| *v = T::zero());
                } else {
                    out[0] = (p + s) / t;
                    out[1] = q / t;
                    out[2] = q / t;
                    out[3] = (r + s) / t;
                }
                T::zero()
            } else {
                spectral_sqrt_into(&[p, q, q, r], 2, out)
            }
        }
        _ => {
            let scaled: Vec<T> = a.iter().map(|&v| v * scale).collect();
            spectral_sqrt_into(&scaled, n, out)
        }
    }
}

fn spectral_sqrt_into<T: Scalar>(m: &[T], n: usize, out: &mut [T]) -> T {
    let (vals, vecs) = sym_eigen(m, n);
    let mut clipped = T::zero();
    let roots: Vec<T> = vals
        .iter()
        .map(|&l| {
            if l < T::zero() {
                clipped = clipped - l;
                T::zero()
            } else {
                l.sqrt()
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            let mut acc = T::zero();
            for (k, &root) in roots.iter().enumerate() {
                acc = acc + vecs[i * n + k] * root * vecs[j * n + k];
            }
            out[i * n + j] = acc;
        }
    }
    clipped
}

/// `out = M v` for a row-major `n x n` matrix.
#[inline]
pub fn mat_vec_into<T: Scalar>(m: &[T], v: &[T], out: &mut [T]) {
    let n = v.len();
    for i in 0..n {
        let mut acc = T::zero();
        for j in 0..n {
            acc = acc + m[i * n + j] * v[j];
        }
        out[i] = acc;
    }
}
