//! Λ-harmonic extension of boundary director data.
//!
//! The discrete operator is `L d = k₂ Δ_h d + (k₁ − k₂) ∇_h div_h d` with
//! three-point second differences and centered mixed differences. `−L` is
//! symmetric positive definite on interior nodes for `k₁, k₂ > 0`, so the
//! interior values are found by conjugate gradients.

use super::cg::conjugate_gradient;
use super::{BoundaryMode, Field, FieldError, Grid, VectorField};
use crate::scalar::Real;
use crate::tensor::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionReport<T> {
    pub iterations: usize,
    /// Max interior residual of `L d` after the solve.
    pub residual: T,
}

const DEFAULT_TOL: f64 = 1e-11;

/// `L d` at interior nodes (zero on the boundary).
fn apply_l<T: Real>(g: &Grid<T>, d: &[Vec3<T>], k1: T, k2: T) -> Vec<Vec3<T>> {
    let dims = g.dims();
    let h = g.spacing();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let mut out = vec![Vec3::zero(); g.len()];
    for n in 0..g.len() {
        if g.is_boundary(n) {
            continue;
        }
        let mut lap = Vec3::zero();
        for a in 0..dims {
            let s = g.stride(a);
            lap += (d[n + s] - d[n] * two + d[n - s]) * (T::one() / (h[a] * h[a]));
        }
        // ∂_i div d = Σ_a ∂_i ∂_a d_a
        let mut gd = Vec3::zero();
        for i in 0..dims {
            let si = g.stride(i);
            let mut acc = T::zero();
            for a in 0..dims {
                let sa = g.stride(a);
                let v = if a == i {
                    (d[n + si].0[a] - two * d[n].0[a] + d[n - si].0[a]) / (h[a] * h[a])
                } else {
                    (d[n + si + sa].0[a] - d[n + si - sa].0[a] - d[n - si + sa].0[a] + d[n - si - sa].0[a])
                        / (four * h[i] * h[a])
                };
                acc = acc + v;
            }
            gd.0[i] = acc;
        }
        out[n] = lap * k2 + gd * (k1 - k2);
    }
    out
}

/// Max interior magnitude of the discrete `div(Λ:∇d)`.
pub fn elliptic_residual<T: Real>(d: &VectorField<T>, k1: T, k2: T) -> T {
    apply_l(d.grid(), d.data(), k1, k2)
        .iter()
        .fold(T::zero(), |m, v| m.max(v.max_abs()))
}

/// Extends the boundary values of `d1` (interior values are ignored) to the
/// discrete solution of `div(Λ:∇d) = 0`. The map is linear in `d1`.
pub fn extension_operator<T: Real>(
    d1: &VectorField<T>,
    k1: T,
    k2: T,
) -> Result<(VectorField<T>, ExtensionReport<T>), FieldError> {
    extension_operator_with_tol(d1, k1, k2, T::lit(DEFAULT_TOL))
}

pub(crate) fn extension_operator_with_tol<T: Real>(
    d1: &VectorField<T>,
    k1: T,
    k2: T,
    tol: T,
) -> Result<(VectorField<T>, ExtensionReport<T>), FieldError> {
    let g = d1.grid();
    if g.mode() != BoundaryMode::Dirichlet {
        return Err(FieldError::WrongBoundaryMode("dirichlet"));
    }
    let interior: Vec<usize> = (0..g.len()).filter(|&n| !g.is_boundary(n)).collect();
    let mut base: Vec<Vec3<T>> = d1.data().to_vec();
    for &n in &interior {
        base[n] = Vec3::zero();
    }
    let scatter = |x: &[T]| -> Vec<Vec3<T>> {
        let mut full = vec![Vec3::zero(); g.len()];
        for (s, &n) in interior.iter().enumerate() {
            full[n] = Vec3([x[3 * s], x[3 * s + 1], x[3 * s + 2]]);
        }
        full
    };
    let gather = |full: &[Vec3<T>], sign: T| -> Vec<T> {
        interior.iter().flat_map(|&n| full[n].0.map(|c| c * sign)).collect()
    };
    let b = gather(&apply_l(g, &base, k1, k2), T::one());
    let apply = |x: &[T]| gather(&apply_l(g, &scatter(x), k1, k2), -T::one());
    let max_iter = 30 * interior.len() + 200;
    let (x, rep) = conjugate_gradient(apply, &b, None, tol, max_iter)?;
    let mut data = base;
    for (s, &n) in interior.iter().enumerate() {
        data[n] = Vec3([x[3 * s], x[3 * s + 1], x[3 * s + 2]]);
    }
    let out = Field::from_vec(g, data);
    let residual = elliptic_residual(&out, k1, k2);
    Ok((out, ExtensionReport { iterations: rep.iterations, residual }))
}

#[cfg(test)]
mod tests {
    use super::super::random_smooth_field;
    use super::*;

    #[test]
    fn constants_and_affine_data_are_reproduced() {
        let g = Grid::<f64>::dirichlet(&[9, 8, 7], &[1.0, 1.5, 1.0]).unwrap();
        let c = Vec3::new(0.3, -0.2, 0.9);
        let (e, _) = extension_operator(&VectorField::constant(&g, c), 1.0, 0.5).unwrap();
        assert!(e.data().iter().all(|v| (*v - c).max_abs() < 1e-10));
        let aff = |x: [f64; 3]| Vec3::new(1.0 + x[0] - 2.0 * x[2], 0.5 * x[1], x[0] + x[1] + x[2]);
        let (e, _) = extension_operator(&VectorField::from_fn(&g, aff), 0.7, 1.3).unwrap();
        for n in 0..g.len() {
            assert!((e.data()[n] - aff(g.coords(n))).max_abs() < 1e-10);
        }
    }

    #[test]
    fn random_data_residual_and_linearity() {
        let g = Grid::<f64>::dirichlet(&[12, 10], &[1.0, 1.0]).unwrap();
        let a = random_smooth_field(&g, 3, 1.0, 11);
        let b = random_smooth_field(&g, 3, 1.0, 12);
        let (ea, rep) = extension_operator(&a, 1.0, 0.25).unwrap();
        assert!(rep.residual <= 1e-10);
        let (eb, _) = extension_operator(&b, 1.0, 0.25).unwrap();
        let mut sum = a.clone();
        sum.axpy(2.0, &b);
        let (es, _) = extension_operator(&sum, 1.0, 0.25).unwrap();
        let mut lin = ea.clone();
        lin.axpy(2.0, &eb);
        assert!((&es - &lin).linf_norm() < 1e-9);
    }

    #[test]
    fn periodic_grid_is_rejected() {
        let g = Grid::<f64>::periodic(&[8, 8], &[1.0, 1.0]).unwrap();
        assert!(matches!(
            extension_operator(&VectorField::zeros(&g), 1.0, 1.0),
            Err(FieldError::WrongBoundaryMode(_))
        ));
    }
}
