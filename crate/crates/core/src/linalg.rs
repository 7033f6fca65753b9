//! Small dense linear-algebra kernels shared by the solvers.
//!
//! Policy evaluation repeatedly solves `(I - gamma * T^pi) x = b` and its
//! transpose for the same matrix, so the LU factorisation is computed once
//! and reused for both orientations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// LU factorisation with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    /// Packed L (unit lower, below diagonal) and U (upper incl. diagonal).
    lu: Array2<f64>,
    /// Row swap performed at each elimination step: row k swapped with pivot[k].
    pivot: Vec<usize>,
    n: usize,
}

impl LuFactors {
    /// Factor `a`. Fails on non-square or numerically singular input.
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        let (n, m) = a.dim();
        if n != m {
            return Err(Error::DimensionMismatch(format!(
                "LU expects a square matrix, got {n}x{m}"
            )));
        }
        let mut lu = a.to_owned();
        let mut pivot = vec![0usize; n];
        for k in 0..n {
            // Pivot on the largest remaining entry in column k.
            let mut p = k;
            let mut best = lu[[k, k]].abs();
            for i in (k + 1)..n {
                let v = lu[[i, k]].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "singular or non-finite matrix at elimination step {k}"
                )));
            }
            pivot[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
            }
            let inv_diag = 1.0 / lu[[k, k]];
            for i in (k + 1)..n {
                let factor = lu[[i, k]] * inv_diag;
                lu[[i, k]] = factor;
                // Row update over the contiguous trailing slice.
                let (head, tail) = lu.multi_slice_mut((
                    ndarray::s![k, (k + 1)..],
                    ndarray::s![i, (k + 1)..],
                ));
                let head = head.into_slice().expect("row-major layout");
                let tail = tail.into_slice().expect("row-major layout");
                for (t, h) in tail.iter_mut().zip(head.iter()) {
                    *t -= factor * *h;
                }
            }
        }
        Ok(Self { lu, pivot, n })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x = b.to_owned();
        for k in 0..n {
            x.swap(k, self.pivot[k]);
        }
        // L y = Pb (unit diagonal).
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc;
        }
        // U x = y.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc / self.lu[[i, i]];
        }
        x
    }

    /// Solve `A^T x = b`.
    pub fn solve_transpose(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x = b.to_owned();
        // U^T y = b (lower triangular with U's diagonal).
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[[j, i]] * x[j];
            }
            x[i] = acc / self.lu[[i, i]];
        }
        // L^T z = y (unit upper triangular).
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[[j, i]] * x[j];
            }
            x[i] = acc;
        }
        // Undo the row swaps in reverse order.
        for k in (0..n).rev() {
            x.swap(k, self.pivot[k]);
        }
        x
    }
}

/// Numerically stable log-sum-exp over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Softmax of a slice, written into `out`.
pub fn softmax_into(xs: &[f64], out: &mut [f64]) {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &x) in out.iter_mut().zip(xs.iter()) {
        let e = (x - m).exp();
        *o = e;
        z += e;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

/// Row-wise softmax of a matrix of logits.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let src: Vec<f64> = row.iter().cloned().collect();
        softmax_into(&src, row.as_slice_mut().expect("row-major layout"));
    }
    out
}

/// KL divergence `KL(p || q)` between two discrete distributions.
///
/// Entries with `p = 0` contribute nothing; `p > 0` against `q = 0` yields
/// `+inf` as an explicit signal of a support violation.
pub fn kl_divergence(p: ArrayView1<f64>, q: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        acc += pi * (pi / qi).ln();
    }
    acc
}

/// Shannon entropy of a discrete distribution (natural log).
pub fn entropy(p: ArrayView1<f64>) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lu_solves_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 5, 17] {
            let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0))
                + Array2::<f64>::eye(n) * (n as f64);
            let b = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let lu = LuFactors::new(a.view()).unwrap();
            let x = lu.solve(b.view());
            let residual = &a.dot(&x) - &b;
            assert!(residual.iter().all(|r| r.abs() < 1e-10));
            let xt = lu.solve_transpose(b.view());
            let residual_t = &a.t().dot(&xt) - &b;
            assert!(residual_t.iter().all(|r| r.abs() < 1e-10));
        }
    }

    #[test]
    fn lu_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0))
            + Array2::<f64>::eye(n) * 4.0;
        let b = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
        let nb = nalgebra::DVector::from_fn(n, |i, _| b[i]);
        let reference = na.lu().solve(&nb).unwrap();
        let x = LuFactors::new(a.view()).unwrap().solve(b.view());
        for i in 0..n {
            assert_abs_diff_eq!(x[i], reference[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(LuFactors::new(a.view()).is_err());
    }

    #[test]
    fn softmax_and_lse_agree() {
        let xs = [0.3, -1.2, 5.0, 5.0];
        let mut p = [0.0; 4];
        softmax_into(&xs, &mut p);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let lse = log_sum_exp(&xs);
        for (x, pi) in xs.iter().zip(p.iter()) {
            assert_abs_diff_eq!((x - lse).exp(), *pi, epsilon = 1e-12);
        }
    }

    #[test]
    fn kl_support_violation_is_infinite() {
        let p = array![0.5, 0.5];
        let q = array![1.0, 0.0];
        assert!(kl_divergence(p.view(), q.view()).is_infinite());
        // The harmless direction is finite.
        assert!(kl_divergence(q.view(), p.view()).is_finite());
    }

    #[test]
    fn entropy_of_uniform() {
        let p = array![0.25, 0.25, 0.25, 0.25];
        assert_abs_diff_eq!(entropy(p.view()), 4f64.ln(), epsilon = 1e-14);
    }
}
