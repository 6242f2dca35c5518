//! Solenoidal projection, director-space projection and the kernel of the
//! discrete gradient.

use num_complex::Complex;

use super::cg::conjugate_gradient;
use super::{BoundaryMode, Field, FieldError, Grid, VectorField};
use crate::scalar::Real;
use crate::tensor::Vec3;

/// Highest retained signed mode index per axis (periodic grids only).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectralCutoff {
    max_mode: Vec<usize>,
}

impl SpectralCutoff {
    pub fn new<T: Real>(grid: &Grid<T>, max_mode: &[usize]) -> Result<Self, FieldError> {
        if grid.mode() != BoundaryMode::Periodic {
            return Err(FieldError::WrongBoundaryMode("periodic"));
        }
        if max_mode.len() != grid.dims() {
            return Err(FieldError::InvalidCutoff(format!(
                "{} entries for a {}-D grid",
                max_mode.len(),
                grid.dims()
            )));
        }
        for (a, (&m, &n)) in max_mode.iter().zip(grid.points()).enumerate() {
            if m > n / 2 {
                return Err(FieldError::InvalidCutoff(format!("axis {a}: {m} exceeds Nyquist index {}", n / 2)));
            }
        }
        Ok(SpectralCutoff { max_mode: max_mode.to_vec() })
    }

    /// Same cutoff on every axis.
    pub fn uniform<T: Real>(grid: &Grid<T>, max_mode: usize) -> Result<Self, FieldError> {
        Self::new(grid, &vec![max_mode; grid.dims()])
    }

    pub fn max_mode(&self) -> &[usize] {
        &self.max_mode
    }

    fn keeps(&self, modes: &[i64]) -> bool {
        modes.iter().zip(&self.max_mode).all(|(m, &c)| m.unsigned_abs() as usize <= c)
    }
}

/// How the director space is realized.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum DirectorProjection {
    /// Identity on nodal values.
    #[default]
    Collocation,
    /// Fourier truncation.
    Spectral(SpectralCutoff),
}

impl DirectorProjection {
    pub fn cutoff(&self) -> Option<&SpectralCutoff> {
        match self {
            DirectorProjection::Collocation => None,
            DirectorProjection::Spectral(c) => Some(c),
        }
    }
}

fn to_spectrum<T: Real>(f: &VectorField<T>) -> [Vec<Complex<T>>; 3] {
    let g = f.grid();
    std::array::from_fn(|c| {
        let mut buf: Vec<Complex<T>> = f.data().iter().map(|v| Complex::new(v.0[c], T::zero())).collect();
        g.fftn(&mut buf, false);
        buf
    })
}

fn from_spectrum<T: Real>(g: &std::sync::Arc<Grid<T>>, mut spec: [Vec<Complex<T>>; 3]) -> VectorField<T> {
    let inv_n = T::one() / T::from_usize_lossy(g.len());
    for buf in spec.iter_mut() {
        g.fftn(buf, true);
    }
    let data = (0..g.len())
        .map(|i| Vec3(std::array::from_fn(|c| spec[c][i].re * inv_n)))
        .collect();
    Field::from_vec(g, data)
}

/// Per-node `(derivative wavevector, signed mode index)` in FFT layout.
fn wave_at<T: Real>(g: &Grid<T>, node: usize) -> ([T; 3], [i64; 3]) {
    let idx = g.multi_index(node);
    let mut k = [T::zero(); 3];
    let mut m = [0i64; 3];
    for a in 0..g.dims() {
        let (_, _, wave, modes) = g.fft_axis(a);
        k[a] = wave[idx[a]];
        m[a] = modes[idx[a]];
    }
    (k, m)
}

/// Orthogonal projection onto discretely divergence-free fields.
///
/// Periodic grids remove the longitudinal part of every Fourier mode (and
/// truncate above `cutoff` when given). Dirichlet grids impose zero
/// boundary velocity and remove a discrete pressure gradient so that the
/// centered divergence vanishes at interior nodes.
pub fn leray_project<T: Real>(v: &VectorField<T>, cutoff: Option<&SpectralCutoff>) -> Result<VectorField<T>, FieldError> {
    let g = v.grid();
    match g.mode() {
        BoundaryMode::Periodic => {
            let mut spec = to_spectrum(v);
            for node in 0..g.len() {
                let (k, m) = wave_at(g, node);
                if let Some(c) = cutoff {
                    if !c.keeps(&m[..g.dims()]) {
                        for s in spec.iter_mut() {
                            s[node] = Complex::new(T::zero(), T::zero());
                        }
                        continue;
                    }
                }
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2 > T::zero() {
                    let kv = spec[0][node] * k[0] + spec[1][node] * k[1] + spec[2][node] * k[2];
                    for c in 0..3 {
                        spec[c][node] = spec[c][node] - kv * (k[c] / k2);
                    }
                }
            }
            Ok(from_spectrum(g, spec))
        }
        BoundaryMode::Dirichlet => {
            if cutoff.is_some() {
                return Err(FieldError::WrongBoundaryMode("periodic"));
            }
            dirichlet_pressure_projection(v)
        }
    }
}

fn interior_nodes<T: Real>(g: &Grid<T>) -> Vec<usize> {
    (0..g.len()).filter(|&n| !g.is_boundary(n)).collect()
}

fn dirichlet_pressure_projection<T: Real>(v: &VectorField<T>) -> Result<VectorField<T>, FieldError> {
    let g = v.grid();
    let interior = interior_nodes(g);
    let mut slot = vec![usize::MAX; g.len()];
    for (s, &n) in interior.iter().enumerate() {
        slot[n] = s;
    }
    let dims = g.dims();
    let inv2h: Vec<T> = g.spacing().iter().map(|&h| T::one() / (T::lit(2.0) * h)).collect();

    // D: interior velocity -> interior divergence (centered, zero boundary).
    let apply_d = |w: &[Vec3<T>]| -> Vec<T> {
        interior
            .iter()
            .map(|&n| {
                let mut s = T::zero();
                for a in 0..dims {
                    let st = g.stride(a);
                    s = s + (w[n + st].0[a] - w[n - st].0[a]) * inv2h[a];
                }
                s
            })
            .collect()
    };
    // Dᵀ: interior pressure -> velocity on all nodes (zero on the boundary).
    let apply_dt = |p: &[T]| -> Vec<Vec3<T>> {
        let mut out = vec![Vec3::zero(); g.len()];
        for &n in &interior {
            for a in 0..dims {
                let st = g.stride(a);
                let pm = if slot[n - st] != usize::MAX { p[slot[n - st]] } else { T::zero() };
                let pp = if slot[n + st] != usize::MAX { p[slot[n + st]] } else { T::zero() };
                out[n].0[a] = (pm - pp) * inv2h[a];
            }
        }
        out
    };

    let mut w: Vec<Vec3<T>> = v.data().to_vec();
    for (n, x) in w.iter_mut().enumerate() {
        if g.is_boundary(n) {
            *x = Vec3::zero();
        }
    }
    let b = apply_d(&w);
    let scale = b.iter().fold(T::one(), |m, x| m.max(x.abs()));
    let tol = T::lit(1e-12) * scale;
    let max_iter = 20 * interior.len() + 100;
    let (p, _) = conjugate_gradient(|p| apply_d(&apply_dt(p)), &b, None, tol, max_iter)?;
    let corr = apply_dt(&p);
    for (x, c) in w.iter_mut().zip(corr) {
        *x = *x - c;
    }
    Ok(Field::from_vec(g, w))
}

/// Director-space projection: identity in collocation mode, Fourier
/// truncation when a cutoff is supplied.
pub fn director_project<T: Real>(z: &VectorField<T>, cutoff: Option<&SpectralCutoff>) -> VectorField<T> {
    match cutoff {
        Some(c) if z.grid().mode() == BoundaryMode::Periodic => truncate(z, c),
        _ => z.clone(),
    }
}

fn truncate<T: Real>(z: &VectorField<T>, c: &SpectralCutoff) -> VectorField<T> {
    let g = z.grid();
    let mut spec = to_spectrum(z);
    for node in 0..g.len() {
        let (_, m) = wave_at(g, node);
        if !c.keeps(&m[..g.dims()]) {
            for s in spec.iter_mut() {
                s[node] = Complex::new(T::zero(), T::zero());
            }
        }
    }
    from_spectrum(g, spec)
}

/// Component of a periodic field in the kernel of the discrete gradient
/// (the mean together with the pure Nyquist combinations).
pub fn gradient_kernel_part<T: Real>(f: &VectorField<T>) -> Result<VectorField<T>, FieldError> {
    let g = f.grid();
    if g.mode() != BoundaryMode::Periodic {
        return Err(FieldError::WrongBoundaryMode("periodic"));
    }
    let mut spec = to_spectrum(f);
    for node in 0..g.len() {
        let (k, _) = wave_at(g, node);
        if k.iter().any(|x| *x != T::zero()) {
            for s in spec.iter_mut() {
                s[node] = Complex::new(T::zero(), T::zero());
            }
        }
    }
    Ok(from_spectrum(g, spec))
}

/// Constant `C_P` with `‖f − Sf‖² ≤ C_P ‖∇_h f‖²`.
///
/// Periodic: `1/min|k̃|²` over modes outside the gradient kernel (exact for
/// the spectral gradient). Dirichlet: the continuum constant `1/(π² Σ L_a⁻²)`
/// of the box, used for reporting only.
pub fn poincare_constant<T: Real>(g: &Grid<T>) -> T {
    match g.mode() {
        BoundaryMode::Periodic => {
            let mut kmin = T::infinity();
            for a in 0..g.dims() {
                let (_, _, wave, _) = g.fft_axis(a);
                for &k in wave {
                    if k != T::zero() {
                        kmin = kmin.min(k * k);
                    }
                }
            }
            T::one() / kmin
        }
        BoundaryMode::Dirichlet => {
            let s = g.extents().iter().fold(T::zero(), |acc, &l| acc + T::one() / (l * l));
            T::one() / (T::PI() * T::PI() * s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{div, grad_scalar, random_smooth_field, ScalarField};
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_projection_is_solenoidal_and_idempotent() {
        let g = Grid::<f64>::periodic(&[12, 10, 8], &[2.0 * PI, 1.0, 3.0]).unwrap();
        let v = random_smooth_field(&g, 3, 1.0, 1);
        let p = leray_project(&v, None).unwrap();
        assert!(div(&p).linf_norm() < 1e-10);
        let pp = leray_project(&p, None).unwrap();
        assert!((&pp - &p).linf_norm() < 1e-12);
    }

    #[test]
    fn gradients_are_removed() {
        let g = Grid::<f64>::periodic(&[16, 16], &[2.0 * PI, 2.0 * PI]).unwrap();
        let phi = ScalarField::from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + (3.0 * x[0]).cos());
        let p = leray_project(&grad_scalar(&phi), None).unwrap();
        assert!(p.linf_norm() < 1e-12);
    }

    #[test]
    fn projection_is_self_adjoint() {
        let g = Grid::<f64>::periodic(&[10, 8], &[1.0, 2.0]).unwrap();
        let v = random_smooth_field(&g, 4, 1.0, 5);
        let w = leray_project(&random_smooth_field(&g, 4, 1.0, 6), None).unwrap();
        let lhs = leray_project(&v, None).unwrap().inner(&w);
        let rhs = v.inner(&leray_project(&w, None).unwrap());
        assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn cutoff_truncates_and_contracts() {
        let g = Grid::<f64>::periodic(&[16, 16], &[2.0 * PI, 2.0 * PI]).unwrap();
        let c = SpectralCutoff::uniform(&g, 2).unwrap();
        let low = VectorField::from_fn(&g, |x| Vec3::new(x[0].sin(), (2.0 * x[1]).cos(), 0.5));
        assert!((&director_project(&low, Some(&c)) - &low).linf_norm() < 1e-12);
        let z = random_smooth_field(&g, 6, 1.0, 9);
        let r = director_project(&z, Some(&c));
        assert!(r.l2_norm() <= z.l2_norm());
        assert!((&director_project(&r, Some(&c)) - &r).linf_norm() < 1e-12);
        assert!(SpectralCutoff::uniform(&g, 9).is_err());
        assert_eq!(director_project(&z, None), z);
    }

    #[test]
    fn kernel_part_and_poincare() {
        let g = Grid::<f64>::periodic(&[8, 8], &[2.0 * PI, PI]).unwrap();
        let f = VectorField::from_fn(&g, |x| Vec3::new(1.0 + x[0].sin() + (4.0 * x[0]).cos(), 0.0, 0.0));
        let s = gradient_kernel_part(&f).unwrap();
        for n in 0..g.len() {
            let x = g.coords(n);
            assert!((s.data()[n].0[0] - 1.0 - (4.0 * x[0]).cos()).abs() < 1e-12);
        }
        assert!((poincare_constant(&g) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_projection_has_zero_interior_divergence() {
        let g = Grid::<f64>::dirichlet(&[10, 9], &[1.0, 1.0]).unwrap();
        let v = random_smooth_field(&g, 2, 1.0, 2);
        let p = leray_project(&v, None).unwrap();
        let d = div(&p);
        let dmax = (0..g.len()).filter(|&n| !g.is_boundary(n)).map(|n| d.data()[n].abs()).fold(0.0, f64::max);
        assert!(dmax < 1e-9, "{dmax}");
        let pp = leray_project(&p, None).unwrap();
        assert!((&pp - &p).linf_norm() < 1e-9);
    }
}
