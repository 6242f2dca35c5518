use super::FieldError;
use crate::scalar::{pairwise_sum_by, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport<T> {
    pub iterations: usize,
    /// Max-norm of the true residual `b - A x` at exit.
    pub residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    pairwise_sum_by(a.len(), |i| a[i] * b[i])
}

fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
/// Stops once `‖b - A x‖_∞ ≤ tol`; singular systems must be consistent.
pub fn conjugate_gradient<T: Real, A: Fn(&[T]) -> Vec<T>>(
    apply: A,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, CgReport<T>), FieldError> {
    let n = b.len();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![T::zero(); n]);
    let true_residual = |x: &[T]| -> Vec<T> {
        let ax = apply(x);
        b.iter().zip(ax).map(|(bi, ai)| *bi - ai).collect()
    };
    let mut r = true_residual(&x);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut it = 0;
    loop {
        let res = max_abs(&r);
        if res <= tol {
            // Guard against drift of the recursive residual.
            let tr = true_residual(&x);
            let tres = max_abs(&tr);
            if tres <= tol {
                return Ok((x, CgReport { iterations: it, residual: tres }));
            }
            r = tr;
            p = r.clone();
            rr = dot(&r, &r);
        }
        if it >= max_iter {
            let tres = max_abs(&true_residual(&x));
            return Err(FieldError::NotConverged { iterations: it, residual: tres.to_f64_lossy() });
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            let tres = max_abs(&true_residual(&x));
            if tres <= tol {
                return Ok((x, CgReport { iterations: it, residual: tres }));
            }
            return Err(FieldError::NotConverged { iterations: it, residual: tres.to_f64_lossy() });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        it += 1;
        if it % 64 == 0 {
            r = true_residual(&x);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
}
