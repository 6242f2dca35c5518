//! Structured-grid fields and the discrete operators acting on them.
//!
//! Two boundary realizations are supported. `Periodic` grids use Fourier
//! collocation: derivatives are exact for the trigonometric interpolant and
//! the solenoidal projection is the exact L²-orthogonal one. `Dirichlet`
//! grids use second-order centered differences with one-sided closure and
//! exist for boundary-data experiments (extension operator, order tests).
//!
//! Vectors always carry three components; a 2-D grid is a slab on which
//! nothing depends on the third coordinate.

mod cg;
mod extension;
mod ops;
mod projection;
mod snapshot;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::scalar::{pairwise_sum_by, Real};
use crate::tensor::{Mat3, Vec3};

pub use cg::{conjugate_gradient, CgReport};
pub use extension::{elliptic_residual, extension_operator, ExtensionReport};
pub use ops::{curl, differential, div, div_matrix, grad, grad_scalar, AnyField, DiffKind};
pub use projection::{
    director_project, gradient_kernel_part, leray_project, poincare_constant, DirectorProjection,
    SpectralCutoff,
};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("operator `{kind}` is not defined for a {rank} field")]
    RankMismatch { kind: &'static str, rank: &'static str },
    #[error("operation requires a {0} grid")]
    WrongBoundaryMode(&'static str),
    #[error("invalid spectral cutoff: {0}")]
    InvalidCutoff(String),
    #[error("iterative solve did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("snapshot i/o: {0}")]
    Io(String),
    #[error("malformed snapshot: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    Periodic,
    Dirichlet,
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryMode::Periodic => f.write_str("periodic"),
            BoundaryMode::Dirichlet => f.write_str("dirichlet"),
        }
    }
}

struct FftAxis<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Derivative wavenumbers, zero at the Nyquist index.
    deriv_wave: Vec<T>,
    /// Signed mode index, Nyquist reported as `+n/2`.
    mode: Vec<i64>,
}

/// Uniform tensor-product grid on a box `[0,L₀)×[0,L₁)(×[0,L₂))`.
pub struct Grid<T: Real> {
    dims: usize,
    shape: [usize; 3],
    extents: [T; 3],
    spacing: [T; 3],
    mode: BoundaryMode,
    weights: Vec<T>,
    fft: Vec<FftAxis<T>>,
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, o: &Self) -> bool {
        self.dims == o.dims && self.shape == o.shape && self.extents == o.extents && self.mode == o.mode
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dims", &self.dims)
            .field("shape", &&self.shape[..self.dims])
            .field("extents", &&self.extents[..self.dims])
            .field("mode", &self.mode)
            .finish()
    }
}

impl<T: Real> Grid<T> {
    /// Builds a grid with `points.len()` ∈ {2, 3} axes.
    pub fn new(points: &[usize], extents: &[T], mode: BoundaryMode) -> Result<Arc<Self>, FieldError> {
        let dims = points.len();
        if !(dims == 2 || dims == 3) {
            return Err(FieldError::InvalidGrid(format!("expected 2 or 3 axes, got {dims}")));
        }
        if extents.len() != dims {
            return Err(FieldError::InvalidGrid("extents and points differ in length".into()));
        }
        if let Some(n) = points.iter().find(|&&n| n < 4) {
            return Err(FieldError::InvalidGrid(format!("at least 4 points per axis required, got {n}")));
        }
        if extents.iter().any(|l| !(l.is_finite() && *l > T::zero())) {
            return Err(FieldError::InvalidGrid("extents must be positive".into()));
        }
        let mut shape = [1usize; 3];
        let mut ext = [T::one(); 3];
        let mut spacing = [T::one(); 3];
        for a in 0..dims {
            shape[a] = points[a];
            ext[a] = extents[a];
            let cells = match mode {
                BoundaryMode::Periodic => points[a],
                BoundaryMode::Dirichlet => points[a] - 1,
            };
            spacing[a] = extents[a] / T::from_usize_lossy(cells);
        }

        let mut fft = Vec::new();
        if mode == BoundaryMode::Periodic {
            let mut planner = FftPlanner::<T>::new();
            for a in 0..dims {
                let n = shape[a];
                let two_pi_over_l = T::lit(2.0) * T::PI() / ext[a];
                let mut deriv_wave = Vec::with_capacity(n);
                let mut modes = Vec::with_capacity(n);
                for m in 0..n {
                    let signed = if 2 * m <= n { m as i64 } else { m as i64 - n as i64 };
                    modes.push(signed);
                    let dw = if n % 2 == 0 && 2 * m == n {
                        T::zero()
                    } else {
                        two_pi_over_l * T::lit(signed as f64)
                    };
                    deriv_wave.push(dw);
                }
                fft.push(FftAxis {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                    deriv_wave,
                    mode: modes,
                });
            }
        }

        let len = shape[0] * shape[1] * shape[2];
        let mut weights = vec![T::one(); len];
        for (node, w) in weights.iter_mut().enumerate() {
            let idx = unflatten(node, &shape);
            let mut acc = T::one();
            for a in 0..dims {
                let mut wa = spacing[a];
                if mode == BoundaryMode::Dirichlet && (idx[a] == 0 || idx[a] == shape[a] - 1) {
                    wa = wa * T::lit(0.5);
                }
                acc = acc * wa;
            }
            *w = acc;
        }

        Ok(Arc::new(Grid {
            dims,
            shape,
            extents: ext,
            spacing,
            mode,
            weights,
            fft,
        }))
    }

    pub fn periodic(points: &[usize], extents: &[T]) -> Result<Arc<Self>, FieldError> {
        Self::new(points, extents, BoundaryMode::Periodic)
    }

    pub fn dirichlet(points: &[usize], extents: &[T]) -> Result<Arc<Self>, FieldError> {
        Self::new(points, extents, BoundaryMode::Dirichlet)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Points per active axis.
    pub fn points(&self) -> &[usize] {
        &self.shape[..self.dims]
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn extents(&self) -> &[T] {
        &self.extents[..self.dims]
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing[..self.dims]
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Box volume (area for a 2-D slab).
    pub fn volume(&self) -> T {
        self.extents().iter().fold(T::one(), |a, &l| a * l)
    }

    /// Quadrature weight of each node: rectangle rule on periodic grids,
    /// trapezoid rule on Dirichlet grids.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn min_spacing(&self) -> T {
        self.spacing().iter().fold(T::infinity(), |m, &h| m.min(h))
    }

    pub fn index(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]
    }

    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        unflatten(node, &self.shape)
    }

    pub fn coords(&self, node: usize) -> [T; 3] {
        let idx = self.multi_index(node);
        let mut x = [T::zero(); 3];
        for a in 0..self.dims {
            x[a] = T::from_usize_lossy(idx[a]) * self.spacing[a];
        }
        x
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        if self.mode == BoundaryMode::Periodic {
            return false;
        }
        let idx = self.multi_index(node);
        (0..self.dims).any(|a| idx[a] == 0 || idx[a] == self.shape[a] - 1)
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.shape[1] * self.shape[2],
            1 => self.shape[2],
            _ => 1,
        }
    }

    /// Offsets of the first node of every grid line along `axis`.
    pub(crate) fn line_starts(&self, axis: usize) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.len() / self.shape[axis]);
        for node in 0..self.len() {
            if self.multi_index(node)[axis] == 0 {
                starts.push(node);
            }
        }
        starts
    }

    pub(crate) fn fft_axis(&self, axis: usize) -> (&Arc<dyn Fft<T>>, &Arc<dyn Fft<T>>, &[T], &[i64]) {
        let f = &self.fft[axis];
        (&f.forward, &f.inverse, &f.deriv_wave, &f.mode)
    }

    /// In-place multidimensional FFT over the active axes (unnormalized).
    pub(crate) fn fftn(&self, buf: &mut [Complex<T>], inverse: bool) {
        debug_assert_eq!(self.mode, BoundaryMode::Periodic);
        for axis in 0..self.dims {
            let n = self.shape[axis];
            let stride = self.stride(axis);
            let starts = self.line_starts(axis);
            let mut lines = vec![Complex::new(T::zero(), T::zero()); n * starts.len()];
            for (l, &s) in starts.iter().enumerate() {
                for m in 0..n {
                    lines[l * n + m] = buf[s + m * stride];
                }
            }
            let (fw, inv, _, _) = self.fft_axis(axis);
            if inverse {
                inv.process(&mut lines);
            } else {
                fw.process(&mut lines);
            }
            for (l, &s) in starts.iter().enumerate() {
                for m in 0..n {
                    buf[s + m * stride] = lines[l * n + m];
                }
            }
        }
    }
}

fn unflatten(node: usize, shape: &[usize; 3]) -> [usize; 3] {
    let i2 = node % shape[2];
    let r = node / shape[2];
    [r / shape[1], r % shape[1], i2]
}

/// Values that can sit at a grid node.
pub trait NodeValue<T: Real>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self> + Neg<Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn inner(&self, o: &Self) -> T;
    fn magnitude(&self) -> T {
        self.inner(self).sqrt()
    }
    fn all_finite(&self) -> bool;
    const RANK: &'static str;
}

impl<T: Real> NodeValue<T> for T {
    fn zero() -> Self {
        T::zero()
    }
    fn inner(&self, o: &Self) -> T {
        *self * *o
    }
    fn magnitude(&self) -> T {
        self.abs()
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    const RANK: &'static str = "scalar";
}

impl<T: Real> NodeValue<T> for Vec3<T> {
    fn zero() -> Self {
        Vec3::zero()
    }
    fn inner(&self, o: &Self) -> T {
        self.dot(o)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    const RANK: &'static str = "vector";
}

impl<T: Real> NodeValue<T> for Mat3<T> {
    fn zero() -> Self {
        Mat3::zero()
    }
    fn inner(&self, o: &Self) -> T {
        self.frob(o)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    const RANK: &'static str = "matrix";
}

/// Nodal field over a shared grid.
#[derive(Clone)]
pub struct Field<T: Real, V> {
    grid: Arc<Grid<T>>,
    data: Vec<V>,
}

pub type ScalarField<T> = Field<T, T>;
pub type VectorField<T> = Field<T, Vec3<T>>;
pub type MatrixField<T> = Field<T, Mat3<T>>;

impl<T: Real, V: fmt::Debug> fmt::Debug for Field<T, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("len", &self.data.len())
            .finish()
    }
}

impl<T: Real, V: NodeValue<T>> PartialEq for Field<T, V>
where
    V: PartialEq,
{
    fn eq(&self, o: &Self) -> bool {
        *self.grid == *o.grid && self.data == o.data
    }
}

/// `Ok(())` when both fields share the same grid description.
pub fn check_same_grid<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<(), FieldError> {
    if std::ptr::eq(a, b) || a == b {
        Ok(())
    } else {
        Err(FieldError::GridMismatch)
    }
}

impl<T: Real, V: NodeValue<T>> Field<T, V> {
    pub fn new(grid: Arc<Grid<T>>, data: Vec<V>) -> Result<Self, FieldError> {
        if data.len() != grid.len() {
            return Err(FieldError::InvalidGrid(format!(
                "field has {} nodes, grid has {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, data })
    }

    pub(crate) fn from_vec(grid: &Arc<Grid<T>>, data: Vec<V>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Field { grid: grid.clone(), data }
    }

    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self::constant(grid, V::zero())
    }

    pub fn constant(grid: &Arc<Grid<T>>, v: V) -> Self {
        Field { grid: grid.clone(), data: vec![v; grid.len()] }
    }

    /// Samples `f` at the node coordinates.
    pub fn from_fn<F: Fn([T; 3]) -> V>(grid: &Arc<Grid<T>>, f: F) -> Self {
        let data = (0..grid.len()).map(|n| f(grid.coords(n))).collect();
        Field { grid: grid.clone(), data }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn data(&self) -> &[V] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<V> {
        self.data
    }

    pub fn map<W: NodeValue<T>, F: Fn(&V) -> W>(&self, f: F) -> Field<T, W> {
        Field { grid: self.grid.clone(), data: self.data.iter().map(f).collect() }
    }

    /// Nodewise combination. Panics when the grids differ; use
    /// [`check_same_grid`] first on untrusted input.
    pub fn zip_map<U: NodeValue<T>, W: NodeValue<T>, F: Fn(&V, &U) -> W>(
        &self,
        o: &Field<T, U>,
        f: F,
    ) -> Field<T, W> {
        assert!(check_same_grid(&self.grid, &o.grid).is_ok(), "grid mismatch");
        Field {
            grid: self.grid.clone(),
            data: self.data.iter().zip(o.data.iter()).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| *v * s)
    }

    pub fn axpy(&mut self, s: T, x: &Self) {
        for (a, b) in self.data.iter_mut().zip(x.data.iter()) {
            *a = *a + *b * s;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.all_finite())
    }

    /// Weighted L² inner product `(f, g)`.
    pub fn inner(&self, o: &Self) -> T {
        debug_assert!(check_same_grid(&self.grid, &o.grid).is_ok());
        let w = self.grid.weights();
        pairwise_sum_by(self.data.len(), |i| w[i] * self.data[i].inner(&o.data[i]))
    }

    /// Weighted integral of a nodal scalar quantity.
    pub fn integrate_by<F: Fn(&V) -> T>(&self, f: F) -> T {
        let w = self.grid.weights();
        pairwise_sum_by(self.data.len(), |i| w[i] * f(&self.data[i]))
    }

    pub fn l2_norm_sq(&self) -> T {
        self.inner(self)
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    /// `(Σ w |f|^p)^{1/p}` with the Euclidean/Frobenius node magnitude.
    pub fn lp_norm(&self, p: T) -> T {
        let w = self.grid.weights();
        let s = pairwise_sum_by(self.data.len(), |i| w[i] * self.data[i].magnitude().powf(p));
        s.powf(T::one() / p)
    }

    pub fn linf_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.magnitude()))
    }
}

impl<T: Real, V: NodeValue<T>> Add for &Field<T, V> {
    type Output = Field<T, V>;
    fn add(self, o: Self) -> Field<T, V> {
        self.zip_map(o, |a, b| *a + *b)
    }
}

impl<T: Real, V: NodeValue<T>> Sub for &Field<T, V> {
    type Output = Field<T, V>;
    fn sub(self, o: Self) -> Field<T, V> {
        self.zip_map(o, |a, b| *a - *b)
    }
}

impl<T: Real> ScalarField<T> {
    pub fn mean(&self) -> T {
        self.integrate_by(|v| *v) / self.grid.weights().iter().fold(T::zero(), |a, &w| a + w)
    }
}

impl<T: Real> VectorField<T> {
    pub fn component(&self, c: usize) -> Vec<T> {
        self.data.iter().map(|v| v.0[c]).collect()
    }

    pub fn from_components(grid: &Arc<Grid<T>>, comps: [Vec<T>; 3]) -> Self {
        let data = (0..grid.len()).map(|i| Vec3([comps[0][i], comps[1][i], comps[2][i]])).collect();
        Field { grid: grid.clone(), data }
    }

    pub fn norms(&self) -> ScalarField<T> {
        self.map(|v| v.norm())
    }

    /// Nodewise normalization; zero vectors are left unchanged.
    pub fn normalized(&self) -> Self {
        self.map(|v| {
            let n = v.norm();
            if n > T::zero() {
                *v * (T::one() / n)
            } else {
                *v
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    L3,
    L6,
    Linf,
    H1,
}

/// Discrete norms by nodal quadrature. `H1 = sqrt(L2² + ‖∇f‖²_{L²})`.
pub fn discrete_norm<T: Real>(f: &VectorField<T>, kind: NormKind) -> T {
    match kind {
        NormKind::L2 => f.l2_norm(),
        NormKind::L3 => f.lp_norm(T::lit(3.0)),
        NormKind::L6 => f.lp_norm(T::lit(6.0)),
        NormKind::Linf => f.linf_norm(),
        NormKind::H1 => (f.l2_norm_sq() + grad(f).l2_norm_sq()).sqrt(),
    }
}

/// `(‖f‖³_{L³} + ‖∇f‖³_{L³})^{1/3}`.
pub fn w13_norm<T: Real>(f: &VectorField<T>) -> T {
    let three = T::lit(3.0);
    (f.lp_norm(three).powi(3) + grad(f).lp_norm(three).powi(3)).cbrt()
}

/// Smooth random field built from Fourier modes `|m_a| ≤ max_mode` with
/// coefficients decaying like `1/(1+|m|²)`. Periodic in the box on both
/// grid kinds.
pub fn random_smooth_field<T: Real>(grid: &Arc<Grid<T>>, max_mode: usize, amplitude: f64, seed: u64) -> VectorField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = grid.dims();
    let mm = max_mode as i64;
    let mut modes = Vec::new();
    let range: Vec<i64> = (0..=mm).collect();
    for &a in &range {
        for &b in &(-mm..=mm).collect::<Vec<_>>() {
            let cs: Vec<i64> = if dims == 3 { (-mm..=mm).collect() } else { vec![0] };
            for &c in &cs {
                if a == 0 && (b < 0 || (b == 0 && c <= 0)) {
                    continue;
                }
                let k2 = (a * a + b * b + c * c) as f64;
                let scale = amplitude / (1.0 + k2);
                let coef: [[f64; 2]; 3] =
                    std::array::from_fn(|_| [rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale]);
                modes.push(([a, b, c], coef));
            }
        }
    }
    let mean: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0) * amplitude);
    let ext: Vec<f64> = grid.extents().iter().map(|l| l.to_f64_lossy()).collect();
    Field::from_fn(grid, |x| {
        let xf: Vec<f64> = (0..dims).map(|a| x[a].to_f64_lossy()).collect();
        let mut v = mean;
        for (m, coef) in &modes {
            let mut phase = 0.0;
            for a in 0..dims {
                phase += 2.0 * std::f64::consts::PI * m[a] as f64 * xf[a] / ext[a];
            }
            let (s, c) = phase.sin_cos();
            for comp in 0..3 {
                v[comp] += coef[comp][0] * c + coef[comp][1] * s;
            }
        }
        Vec3(v.map(T::lit))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::<f64>::periodic(&[3, 8], &[1.0, 1.0]).is_err());
        assert!(Grid::<f64>::periodic(&[8], &[1.0]).is_err());
        assert!(Grid::<f64>::periodic(&[8, 8], &[1.0, -1.0]).is_err());
        let g = Grid::<f64>::periodic(&[8, 4], &[2.0, 1.0]).unwrap();
        assert_eq!(g.len(), 32);
        assert_eq!(g.spacing(), &[0.25, 0.25]);
        assert!((g.weights().iter().sum::<f64>() - 2.0).abs() < 1e-15);
        let d = Grid::<f64>::dirichlet(&[5, 5, 5], &[1.0, 1.0, 1.0]).unwrap();
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(d.is_boundary(0));
        assert!(!d.is_boundary(d.index([2, 2, 2])));
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::<f64>::periodic(&[4, 5, 6], &[1.0, 1.0, 1.0]).unwrap();
        for n in 0..g.len() {
            assert_eq!(g.index(g.multi_index(n)), n);
        }
    }

    #[test]
    fn constant_norms() {
        let g = Grid::<f64>::periodic(&[8, 8], &[2.0, 3.0]).unwrap();
        let c = Vec3::new(1.0, -2.0, 2.0);
        let f = VectorField::constant(&g, c);
        assert!((discrete_norm(&f, NormKind::L2) - 3.0 * 6f64.sqrt()).abs() < 1e-13);
        assert!((discrete_norm(&f, NormKind::Linf) - 3.0).abs() < 1e-15);
        assert!((discrete_norm(&f, NormKind::H1) - 3.0 * 6f64.sqrt()).abs() < 1e-13);
        let z = VectorField::<f64>::zeros(&g);
        for k in [NormKind::L2, NormKind::L3, NormKind::L6, NormKind::Linf, NormKind::H1] {
            assert_eq!(discrete_norm(&z, k), 0.0);
        }
    }

    #[test]
    fn sine_l2_norm() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let g = Grid::<f64>::periodic(&[64, 4], &[two_pi, 1.0]).unwrap();
        let f = VectorField::from_fn(&g, |x| Vec3::new(x[0].sin(), 0.0, 0.0));
        assert!((f.l2_norm() - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_trapezoid_integrates_linear_exactly() {
        let g = Grid::<f64>::dirichlet(&[7, 9], &[1.0, 2.0]).unwrap();
        let f = ScalarField::from_fn(&g, |x| 1.0 + x[0] + 3.0 * x[1]);
        assert!((f.integrate_by(|v| *v) - (2.0 + 1.0 + 6.0)).abs() < 1e-13);
    }
}
