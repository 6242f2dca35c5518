//! Oseen–Frank and magnetic free energy, and the variational derivative `q`.

use serde::{Deserialize, Serialize};

use crate::fields::{
    curl, director_project, div, div_matrix, grad, grad_scalar, DirectorProjection, Field, MatrixField,
    ScalarField, VectorField,
};
use crate::material::MaterialParams;
use crate::scalar::{pairwise_sum_by, Real};
use crate::tensor::{cross_matrix, rank4_double_contract, Mat3, Rank3, Vec3};

/// Which algebraic form of the elastic density to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityForm {
    /// `K₁, K₂, K₃` on `(div d)²`, `(d·curl d)²`, `|d×curl d|²`.
    Frank,
    /// The `k₁..k₅` form valid for arbitrary `|d|`.
    Reduced,
    /// `½[∇d:Λ:∇d + (∇d⊗d)⋮Θ⋮(∇d⊗d)]`.
    Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QForm {
    /// Curl/divergence expansion.
    Explicit,
    /// `∂f/∂d − div(∂f/∂∇d)` through `Λ` and `Θ`.
    #[default]
    Tensor,
}

/// Integrated energy split by term.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub splay: f64,
    pub twist_like: f64,
    pub k3_term: f64,
    pub k4_term: f64,
    pub k5_term: f64,
    pub magnetic_par: f64,
    pub magnetic_perp: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub const CSV_HEADER: &'static str =
        "splay,twist_like,k3_term,k4_term,k5_term,magnetic_par,magnetic_perp,total";

    pub fn elastic(&self) -> f64 {
        self.splay + self.twist_like + self.k3_term + self.k4_term + self.k5_term
    }

    pub fn magnetic(&self) -> f64 {
        self.magnetic_par + self.magnetic_perp
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.splay,
            self.twist_like,
            self.k3_term,
            self.k4_term,
            self.k5_term,
            self.magnetic_par,
            self.magnetic_perp,
            self.total
        )
    }
}

/// `curl` read off a gradient matrix `A_ij = ∂_j d_i`.
#[inline]
pub(crate) fn curl_of<T: Real>(a: &Mat3<T>) -> Vec3<T> {
    let m = &a.0;
    Vec3([m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]])
}

/// Per-node elastic parts `[splay, twist, k3, k4, k5]` of the reduced form.
#[inline]
fn reduced_parts<T: Real>(p: &MaterialParams<T>, d: &Vec3<T>, a: &Mat3<T>) -> [T; 5] {
    let half = T::lit(0.5);
    let [k1, k2, k3, k4, k5] = p.k;
    let dv = a.trace();
    let c = curl_of(a);
    let dc = d.dot(&c);
    [
        half * k1 * dv * dv,
        half * k2 * c.norm_sq(),
        half * k3 * d.norm_sq() * dv * dv,
        half * k4 * dc * dc,
        half * k5 * d.cross(&c).norm_sq(),
    ]
}

#[inline]
fn magnetic_parts<T: Real>(p: &MaterialParams<T>, d: &Vec3<T>, h: &Vec3<T>) -> [T; 2] {
    let half = T::lit(0.5);
    let dh = d.dot(h);
    [-half * p.chi_par * dh * dh, -half * p.chi_perp * d.cross(h).norm_sq()]
}

/// `G = ∇d ⊗ d`, i.e. `G_ijk = ∂_j d_i d_k`.
#[inline]
pub fn director_gradient_tensor<T: Real>(a: &Mat3<T>, d: &Vec3<T>) -> Rank3<T> {
    a.outer_vec(d)
}

fn tensor_density<T: Real>(p: &MaterialParams<T>, d: &Vec3<T>, a: &Mat3<T>) -> T {
    let g = director_gradient_tensor(a, d);
    let tg = p.theta_sparse().contract3(&g);
    T::lit(0.5) * (rank4_double_contract(&p.lambda_tensor, a).frob(a) + g.triple_dot(&tg))
}

/// Nodal Oseen–Frank density.
pub fn oseen_frank_density<T: Real>(p: &MaterialParams<T>, d: &VectorField<T>, form: DensityForm) -> ScalarField<T> {
    let a = grad(d);
    let half = T::lit(0.5);
    d.zip_map(&a, |dv, am| match form {
        DensityForm::Frank => {
            let [kk1, kk2, kk3] = p.frank;
            let s = am.trace();
            let c = curl_of(am);
            let dc = dv.dot(&c);
            half * (kk1 * s * s + kk2 * dc * dc + kk3 * dv.cross(&c).norm_sq())
        }
        DensityForm::Reduced => reduced_parts(p, dv, am).into_iter().fold(T::zero(), |x, y| x + y),
        DensityForm::Tensor => tensor_density(p, dv, am),
    })
}

/// Nodal magnetic density `−χ∥/2 (d·H)² − χ⊥/2 |d×H|²`.
pub fn magnetic_density<T: Real>(p: &MaterialParams<T>, d: &VectorField<T>, h: &VectorField<T>) -> ScalarField<T> {
    d.zip_map(h, |dv, hv| {
        let [a, b] = magnetic_parts(p, dv, hv);
        a + b
    })
}

/// Quadrature of the free energy with magnetic contribution.
pub fn total_free_energy<T: Real>(p: &MaterialParams<T>, d: &VectorField<T>, h: &VectorField<T>) -> EnergyBreakdown {
    let a = grad(d);
    breakdown_from_grad(p, d, &a, h)
}

pub(crate) fn breakdown_from_grad<T: Real>(
    p: &MaterialParams<T>,
    d: &VectorField<T>,
    a: &MatrixField<T>,
    h: &VectorField<T>,
) -> EnergyBreakdown {
    let w = d.grid().weights();
    let (dd, ad, hd) = (d.data(), a.data(), h.data());
    let n = dd.len();
    let mut parts = [[T::zero(); 7]].repeat(n);
    for i in 0..n {
        let e = reduced_parts(p, &dd[i], &ad[i]);
        let m = magnetic_parts(p, &dd[i], &hd[i]);
        parts[i] = [e[0], e[1], e[2], e[3], e[4], m[0], m[1]];
    }
    let s: [f64; 7] = std::array::from_fn(|t| pairwise_sum_by(n, |i| w[i] * parts[i][t]).to_f64_lossy());
    EnergyBreakdown {
        splay: s[0],
        twist_like: s[1],
        k3_term: s[2],
        k4_term: s[3],
        k5_term: s[4],
        magnetic_par: s[5],
        magnetic_perp: s[6],
        total: s.iter().sum(),
    }
}

/// Elastic part of the free energy only.
pub fn elastic_energy<T: Real>(p: &MaterialParams<T>, d: &VectorField<T>) -> T {
    let a = grad(d);
    d.zip_map(&a, |dv, am| reduced_parts(p, dv, am).into_iter().fold(T::zero(), |x, y| x + y))
        .integrate_by(|v| *v)
}

/// `∂f/∂d` of the magnetic density.
#[inline]
pub(crate) fn magnetic_force<T: Real>(p: &MaterialParams<T>, d: &Vec3<T>, h: &Vec3<T>) -> Vec3<T> {
    *h * (-p.chi_par * d.dot(h)) + h.cross(&h.cross(d)) * p.chi_perp
}

/// Nodal partial derivatives `(∂f/∂d, ∂f/∂∇d)` of the elastic density via
/// `Λ` and `Θ`.
#[inline]
pub(crate) fn elastic_partials_tensor<T: Real>(p: &MaterialParams<T>, d: &Vec3<T>, a: &Mat3<T>) -> (Vec3<T>, Mat3<T>) {
    let g = director_gradient_tensor(a, d);
    let tg = p.theta_sparse().contract3(&g);
    let da = rank4_double_contract(&p.lambda_tensor, a) + tg.contract_last(d);
    (a.contract_rank3(&tg), da)
}

/// Variational derivative of the free energy.
///
/// With `project` set, returns `R q + γ d` using the material's
/// `gamma_shift`.
pub fn variational_derivative<T: Real>(
    p: &MaterialParams<T>,
    d: &VectorField<T>,
    h: &VectorField<T>,
    form: QForm,
    project: Option<&DirectorProjection>,
) -> VectorField<T> {
    let a = grad(d);
    let q = match form {
        QForm::Tensor => q_tensor_from_grad(p, d, &a, h),
        QForm::Explicit => q_explicit_from_grad(p, d, &a, h),
    };
    match project {
        None => q,
        Some(proj) => project_q(p, d, &q, proj),
    }
}

pub(crate) fn project_q<T: Real>(
    p: &MaterialParams<T>,
    d: &VectorField<T>,
    q: &VectorField<T>,
    proj: &DirectorProjection,
) -> VectorField<T> {
    let mut qn = director_project(q, proj.cutoff());
    if p.gamma_shift != T::zero() {
        qn.axpy(p.gamma_shift, d);
    }
    qn
}

pub(crate) fn q_tensor_from_grad<T: Real>(
    p: &MaterialParams<T>,
    d: &VectorField<T>,
    a: &MatrixField<T>,
    h: &VectorField<T>,
) -> VectorField<T> {
    let n = d.data().len();
    let mut local = Vec::with_capacity(n);
    let mut flux = Vec::with_capacity(n);
    for i in 0..n {
        let (dv, hv) = (&d.data()[i], &h.data()[i]);
        let (fd, fa) = elastic_partials_tensor(p, dv, &a.data()[i]);
        local.push(fd + magnetic_force(p, dv, hv));
        flux.push(fa);
    }
    let flux = Field::from_vec(d.grid(), flux);
    let dflux = div_matrix(&flux);
    let local: VectorField<T> = Field::from_vec(d.grid(), local);
    &local - &dflux
}

pub(crate) fn q_explicit_from_grad<T: Real>(p: &MaterialParams<T>, d: &VectorField<T>, a: &MatrixField<T>, h: &VectorField<T>) -> VectorField<T> {
    let [k1, k2, k3, k4, k5] = p.k;
    let four = T::lit(4.0);
    let dv = div(d);
    let c = curl(d);
    let dc = d.zip_map(&c, |x, y| x.dot(y));

    let mut q = grad_scalar(&dv).scale(-k1);
    q.axpy(k2, &curl(&c));
    let d2div = d.zip_map(&dv, |x, s| x.norm_sq() * *s);
    q.axpy(-k3, &grad_scalar(&d2div));
    let twist_flux = d.zip_map(&dc, |x, s| cross_matrix(x).scale(*s));
    q.axpy(-k4, &div_matrix(&twist_flux));
    let bend_flux = d.zip_map(a, |x, am| am.skw().mul_vec(x).outer(x).skw());
    q.axpy(-four * k5, &div_matrix(&bend_flux));

    let n = d.data().len();
    let local: Vec<Vec3<T>> = (0..n)
        .map(|i| {
            let x = d.data()[i];
            let s = dv.data()[i];
            let sk = a.data()[i].skw();
            x * (k3 * s * s)
                + c.data()[i] * (k4 * dc.data()[i])
                + sk.tr_mul_vec(&sk.mul_vec(&x)) * (four * k5)
                + magnetic_force(p, &x, &h.data()[i])
        })
        .collect();
    &q + &Field::from_vec(d.grid(), local)
}
