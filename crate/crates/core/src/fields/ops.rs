//! First-order differential operators.
//!
//! Periodic grids differentiate spectrally with the Nyquist wavenumber
//! removed, which makes `∂_h` exactly skew-adjoint for the rectangle-rule
//! inner product. Dirichlet grids use centered differences in the interior
//! and the second-order one-sided stencil on the boundary layer.

use num_complex::Complex;

use super::{BoundaryMode, Field, FieldError, Grid, MatrixField, ScalarField, VectorField};
use crate::scalar::Real;
use crate::tensor::{Mat3, Vec3};

/// `∂f/∂x_axis` of nodal data laid out like the grid.
pub(crate) fn partial<T: Real>(grid: &Grid<T>, data: &[T], axis: usize) -> Vec<T> {
    if axis >= grid.dims() {
        return vec![T::zero(); data.len()];
    }
    match grid.mode() {
        BoundaryMode::Periodic => spectral_partial(grid, data, axis),
        BoundaryMode::Dirichlet => fd_partial(grid, data, axis),
    }
}

fn spectral_partial<T: Real>(grid: &Grid<T>, data: &[T], axis: usize) -> Vec<T> {
    let n = grid.shape()[axis];
    let stride = grid.stride(axis);
    let starts = grid.line_starts(axis);
    let (fw, inv, wave, _) = grid.fft_axis(axis);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n * starts.len()];
    for (l, &s) in starts.iter().enumerate() {
        for m in 0..n {
            buf[l * n + m] = Complex::new(data[s + m * stride], T::zero());
        }
    }
    fw.process(&mut buf);
    let inv_n = T::one() / T::from_usize_lossy(n);
    for line in buf.chunks_mut(n) {
        for (c, &k) in line.iter_mut().zip(wave.iter()) {
            let kk = k * inv_n;
            *c = Complex::new(-c.im * kk, c.re * kk);
        }
    }
    inv.process(&mut buf);
    let mut out = vec![T::zero(); data.len()];
    for (l, &s) in starts.iter().enumerate() {
        for m in 0..n {
            out[s + m * stride] = buf[l * n + m].re;
        }
    }
    out
}

fn fd_partial<T: Real>(grid: &Grid<T>, data: &[T], axis: usize) -> Vec<T> {
    let n = grid.shape()[axis];
    let stride = grid.stride(axis);
    let h2 = T::lit(2.0) * grid.spacing()[axis];
    let (three, four) = (T::lit(3.0), T::lit(4.0));
    let mut out = vec![T::zero(); data.len()];
    for s in grid.line_starts(axis) {
        let f = |m: usize| data[s + m * stride];
        out[s] = (-three * f(0) + four * f(1) - f(2)) / h2;
        for m in 1..n - 1 {
            out[s + m * stride] = (f(m + 1) - f(m - 1)) / h2;
        }
        out[s + (n - 1) * stride] = (three * f(n - 1) - four * f(n - 2) + f(n - 3)) / h2;
    }
    out
}

pub fn grad_scalar<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    let g = f.grid();
    let d: [Vec<T>; 3] = std::array::from_fn(|a| partial(g, f.data(), a));
    VectorField::from_components(g, d)
}

/// `(∇f)_ij = ∂_j f_i`.
pub fn grad<T: Real>(f: &VectorField<T>) -> MatrixField<T> {
    let g = f.grid();
    let mut out = vec![Mat3::zero(); g.len()];
    for i in 0..3 {
        let comp = f.component(i);
        for j in 0..g.dims() {
            let d = partial(g, &comp, j);
            for (m, v) in out.iter_mut().zip(d) {
                m.0[i][j] = v;
            }
        }
    }
    Field::from_vec(g, out)
}

pub fn div<T: Real>(f: &VectorField<T>) -> ScalarField<T> {
    let g = f.grid();
    let mut out = vec![T::zero(); g.len()];
    for a in 0..g.dims() {
        let d = partial(g, &f.component(a), a);
        for (o, v) in out.iter_mut().zip(d) {
            *o = *o + v;
        }
    }
    Field::from_vec(g, out)
}

/// Row-wise divergence `(div A)_i = Σ_j ∂_j A_ij`.
pub fn div_matrix<T: Real>(f: &MatrixField<T>) -> VectorField<T> {
    let g = f.grid();
    let mut out = vec![Vec3::zero(); g.len()];
    for i in 0..3 {
        for j in 0..g.dims() {
            let comp: Vec<T> = f.data().iter().map(|m| m.0[i][j]).collect();
            let d = partial(g, &comp, j);
            for (o, v) in out.iter_mut().zip(d) {
                o.0[i] = o.0[i] + v;
            }
        }
    }
    Field::from_vec(g, out)
}

pub fn curl<T: Real>(f: &VectorField<T>) -> VectorField<T> {
    let gm = grad(f);
    gm.map(|m| {
        let a = &m.0;
        Vec3([a[2][1] - a[1][2], a[0][2] - a[2][0], a[1][0] - a[0][1]])
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffKind {
    Grad,
    Div,
    Curl,
}

#[derive(Clone, Debug)]
pub enum AnyField<T: Real> {
    Scalar(ScalarField<T>),
    Vector(VectorField<T>),
    Matrix(MatrixField<T>),
}

impl<T: Real> AnyField<T> {
    fn rank(&self) -> &'static str {
        match self {
            AnyField::Scalar(_) => "scalar",
            AnyField::Vector(_) => "vector",
            AnyField::Matrix(_) => "matrix",
        }
    }
}

/// Dispatches `kind` on a field of any supported rank.
pub fn differential<T: Real>(kind: DiffKind, f: &AnyField<T>) -> Result<AnyField<T>, FieldError> {
    let err = |k: &'static str| FieldError::RankMismatch { kind: k, rank: f.rank() };
    match (kind, f) {
        (DiffKind::Grad, AnyField::Scalar(s)) => Ok(AnyField::Vector(grad_scalar(s))),
        (DiffKind::Grad, AnyField::Vector(v)) => Ok(AnyField::Matrix(grad(v))),
        (DiffKind::Div, AnyField::Vector(v)) => Ok(AnyField::Scalar(div(v))),
        (DiffKind::Div, AnyField::Matrix(m)) => Ok(AnyField::Vector(div_matrix(m))),
        (DiffKind::Curl, AnyField::Vector(v)) => Ok(AnyField::Vector(curl(v))),
        (DiffKind::Grad, _) => Err(err("grad")),
        (DiffKind::Div, _) => Err(err("div")),
        (DiffKind::Curl, _) => Err(err("curl")),
    }
}
