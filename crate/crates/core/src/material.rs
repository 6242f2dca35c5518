//! Physical constants of the nematic and the elastic tensors built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Real;
use crate::tensor::{delta, Mat3, Rank4, Rank6, SparseRank6, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("Frank constant `{0}` must be positive")]
    NonPositiveFrank(&'static str),
    #[error("dissipativity violated: {0}")]
    Dissipativity(&'static str),
    #[error("susceptibility condition violated: {0}")]
    Susceptibility(&'static str),
}

/// Raw constants as a user supplies them: Frank constants, Leslie
/// viscosities and magnetic susceptibilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialInputs<T> {
    pub frank: [T; 3],
    pub mu: [T; 6],
    pub chi_par: T,
    pub chi_perp: T,
}

/// Validated material. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams<T: Real> {
    pub frank: [T; 3],
    /// Reformulated constants `k₁..k₅`.
    pub k: [T; 5],
    pub mu: [T; 6],
    /// `λ = μ₂ + μ₃`.
    pub lambda: T,
    pub chi_par: T,
    pub chi_perp: T,
    pub lambda_tensor: Rank4<T>,
    pub theta: Rank6<T>,
    theta_sparse: SparseRank6<T>,
    /// Coercivity constant of `½(∇d; Λ:∇d)`, equal to `min(k₁,k₂)/2`.
    pub k_coercive: T,
    /// Free shift γ added to the projected variational derivative.
    pub gamma_shift: T,
}

impl<T: Real> MaterialParams<T> {
    /// Convenience form of [`build_params`].
    pub fn build(inputs: MaterialInputs<T>) -> Result<Self, MaterialError> {
        build_params(inputs)
    }

    pub fn with_gamma_shift(mut self, gamma: T) -> Self {
        self.gamma_shift = gamma;
        self
    }

    pub fn inputs(&self) -> MaterialInputs<T> {
        MaterialInputs {
            frank: self.frank,
            mu: self.mu,
            chi_par: self.chi_par,
            chi_perp: self.chi_perp,
        }
    }

    /// `μ₁ + λ²`
    pub fn visc_dd(&self) -> T {
        self.mu[0] + self.lambda * self.lambda
    }

    /// `μ₄`
    pub fn visc_iso(&self) -> T {
        self.mu[3]
    }

    /// `μ₅ + μ₆ − λ²`
    pub fn visc_d(&self) -> T {
        self.mu[4] + self.mu[5] - self.lambda * self.lambda
    }

    pub fn theta_sparse(&self) -> &SparseRank6<T> {
        &self.theta_sparse
    }

    /// `(a⊗b) : Λ : (a⊗b)`
    pub fn lambda_quadratic(&self, a: &Vec3<T>, b: &Vec3<T>) -> T {
        let ab = a.outer(b);
        crate::tensor::rank4_double_contract(&self.lambda_tensor, &ab).frob(&ab)
    }
}

/// Validates the constants and assembles `Λ`, `Θ` and the coercivity
/// constant.
pub fn build_params<T: Real>(inputs: MaterialInputs<T>) -> Result<MaterialParams<T>, MaterialError> {
    const FRANK: [&str; 3] = ["K1", "K2", "K3"];
    const MU: [&str; 6] = ["mu1", "mu2", "mu3", "mu4", "mu5", "mu6"];
    for (v, name) in inputs.frank.iter().zip(FRANK) {
        if !v.is_finite() {
            return Err(MaterialError::NonFinite(name));
        }
    }
    for (v, name) in inputs.mu.iter().zip(MU) {
        if !v.is_finite() {
            return Err(MaterialError::NonFinite(name));
        }
    }
    if !inputs.chi_par.is_finite() {
        return Err(MaterialError::NonFinite("chi_par"));
    }
    if !inputs.chi_perp.is_finite() {
        return Err(MaterialError::NonFinite("chi_perp"));
    }
    for (v, name) in inputs.frank.iter().zip(FRANK) {
        if *v <= T::zero() {
            return Err(MaterialError::NonPositiveFrank(name));
        }
    }

    let mu = inputs.mu;
    let lambda = mu[1] + mu[2];
    let l2 = lambda * lambda;
    if mu[3] <= T::zero() {
        return Err(MaterialError::Dissipativity("mu4 > 0"));
    }
    if mu[4] + mu[5] - l2 <= T::zero() {
        return Err(MaterialError::Dissipativity("mu5 + mu6 - lambda^2 > 0"));
    }
    if mu[0] + l2 <= T::zero() {
        return Err(MaterialError::Dissipativity("mu1 + lambda^2 > 0"));
    }
    if inputs.chi_par >= T::zero() {
        return Err(MaterialError::Susceptibility("chi_par < 0"));
    }
    if inputs.chi_perp >= T::zero() {
        return Err(MaterialError::Susceptibility("chi_perp < 0"));
    }
    if inputs.chi_par <= inputs.chi_perp {
        return Err(MaterialError::Susceptibility("chi_par > chi_perp"));
    }

    let [k1_big, k2_big, k3_big] = inputs.frank;
    let half = T::lit(0.5);
    let k1 = half * k1_big;
    let k2 = half * k2_big.min(k3_big);
    let k = [k1, k2, k1, k2_big - k2, k3_big - k2];

    let lambda_tensor = lambda_tensor(k[0], k[1]);
    let theta = theta_tensor(k[2], k[3], k[4]);
    let theta_sparse = theta.sparse();

    Ok(MaterialParams {
        frank: inputs.frank,
        k,
        mu,
        lambda,
        chi_par: inputs.chi_par,
        chi_perp: inputs.chi_perp,
        lambda_tensor,
        theta,
        theta_sparse,
        k_coercive: half * k1.min(k2),
        gamma_shift: T::zero(),
    })
}

/// `Λ_ijkl = k₁ δ_ij δ_kl + k₂ (δ_ik δ_jl − δ_il δ_jk)`.
pub fn lambda_tensor<T: Real>(k1: T, k2: T) -> Rank4<T> {
    Rank4::from_fn(|[i, j, k, l]| {
        let d = delta::<T>;
        k1 * d(i, j) * d(k, l) + k2 * (d(i, k) * d(j, l) - d(i, l) * d(j, k))
    })
}

/// Sixth-order tensor carrying the `k₃, k₄, k₅` parts of the energy.
pub fn theta_tensor<T: Real>(k3: T, k4: T, k5: T) -> Rank6<T> {
    Rank6::from_fn(|[i, j, k, l, m, n]| {
        let d = delta::<T>;
        let t3 = d(i, j) * d(l, m) * d(k, n);
        let t5 = d(i, l) * d(m, n) * d(j, k) - d(m, i) * d(l, n) * d(j, k) - d(l, j) * d(m, n) * d(i, k)
            + d(j, m) * d(l, n) * d(i, k);
        let t4 = d(k, n) * d(j, m) * d(i, l) + d(k, m) * d(j, l) * d(i, n) + d(k, l) * d(j, n) * d(i, m)
            - d(k, n) * d(j, l) * d(i, m)
            - d(k, m) * d(j, n) * d(i, l)
            - d(k, l) * d(j, m) * d(i, n);
        k3 * t3 + k5 * t5 + k4 * t4
    })
}

/// Minimum of `(a⊗b):Λ:(a⊗b)` over `samples` random unit pairs. Strong
/// ellipticity guarantees a value of at least `min(k₁,k₂)`.
pub fn ellipticity_certificate<T: Real>(params: &MaterialParams<T>, samples: usize, seed: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = T::infinity();
    for _ in 0..samples {
        let a = random_unit(&mut rng);
        let b = random_unit(&mut rng);
        min = min.min(params.lambda_quadratic(&a, &b));
    }
    min
}

pub(crate) fn random_unit<T: Real, R: Rng>(rng: &mut R) -> Vec3<T> {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return Vec3(v.map(|x| T::lit(x / n)));
        }
    }
}

/// `½ ∇d : Λ : ∇d` evaluated without forming Λ: `½(k₁ (tr A)² + 2k₂ |A_skw|²)`.
pub(crate) fn lambda_energy_fast<T: Real>(k1: T, k2: T, a: &Mat3<T>) -> T {
    let tr = a.trace();
    let sk = a.skw();
    T::lit(0.5) * k1 * tr * tr + k2 * sk.norm_sq()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{rank6_triple_contract, Rank3};

    fn sample_inputs() -> MaterialInputs<f64> {
        MaterialInputs {
            frank: [2.0, 1.0, 3.0],
            mu: [1.0, 1.0, 0.5, 1.0, 2.0, 1.0],
            chi_par: -0.1,
            chi_perp: -0.3,
        }
    }

    #[test]
    fn constants_map_of_reference_set() {
        let p = build_params(sample_inputs()).unwrap();
        assert_eq!(p.lambda, 1.5);
        assert_eq!(p.k, [1.0, 0.5, 1.0, 0.5, 2.5]);
        assert_eq!(p.visc_d(), 0.75);
        assert_eq!(p.visc_dd(), 3.25);
        assert_eq!(p.k_coercive, 0.25);
        assert_eq!(p.gamma_shift, 0.0);
    }

    #[test]
    fn equal_twist_and_bend() {
        let mut inp = sample_inputs();
        inp.frank = [2.0, 1.0, 1.0];
        let p = build_params(inp).unwrap();
        assert_eq!(&p.k[1..], &[0.5, 1.0, 0.5, 0.5]);
    }

    #[test]
    fn zero_mu4_is_rejected() {
        let mut inp = sample_inputs();
        inp.mu[3] = 0.0;
        let err = build_params(inp).unwrap_err();
        assert_eq!(err, MaterialError::Dissipativity("mu4 > 0"));
        assert!(err.to_string().contains("dissipativity violated"));
    }

    #[test]
    fn other_rejections_name_the_condition() {
        let mut inp = sample_inputs();
        inp.mu[4] = 1.0;
        inp.mu[5] = 1.0;
        assert!(matches!(
            build_params(inp),
            Err(MaterialError::Dissipativity("mu5 + mu6 - lambda^2 > 0"))
        ));
        let mut inp = sample_inputs();
        inp.mu[0] = -3.0;
        assert!(matches!(build_params(inp), Err(MaterialError::Dissipativity("mu1 + lambda^2 > 0"))));
        let mut inp = sample_inputs();
        inp.chi_par = -0.5;
        assert!(matches!(build_params(inp), Err(MaterialError::Susceptibility("chi_par > chi_perp"))));
        let mut inp = sample_inputs();
        inp.chi_perp = 0.1;
        assert!(matches!(build_params(inp), Err(MaterialError::Susceptibility(_))));
        let mut inp = sample_inputs();
        inp.frank[1] = 0.0;
        assert!(matches!(build_params(inp), Err(MaterialError::NonPositiveFrank("K2"))));
        let mut inp = sample_inputs();
        inp.mu[2] = f64::NAN;
        assert!(matches!(build_params(inp), Err(MaterialError::NonFinite("mu3"))));
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let a = build_params(sample_inputs()).unwrap();
        let b = build_params(sample_inputs()).unwrap();
        assert_eq!(a, b);
        assert!(a.theta.0.iter().zip(b.theta.0.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn ellipticity_closed_form() {
        let mut inp = sample_inputs();
        inp.frank = [2.0, 2.0, 2.0];
        let p = build_params(inp).unwrap();
        assert_eq!((p.k[0], p.k[1]), (1.0, 1.0));
        let c = ellipticity_certificate(&p, 2000, 7);
        assert!((c - 1.0).abs() < 1e-12);

        let p = build_params(sample_inputs()).unwrap();
        let a = Vec3::new(0.6, 0.0, 0.8);
        assert!((p.lambda_quadratic(&a, &a) - p.k[0]).abs() < 1e-14);
        let b = Vec3::new(0.8, 0.0, -0.6);
        assert!((p.lambda_quadratic(&a, &b) - p.k[1]).abs() < 1e-14);
        assert!(ellipticity_certificate(&p, 5000, 9) >= p.k[0].min(p.k[1]) - 1e-12);
    }

    #[test]
    fn lambda_on_e1_e2_is_one() {
        let p = build_params(MaterialInputs { frank: [2.0, 2.0, 2.0], ..sample_inputs() }).unwrap();
        let e1 = Vec3::unit(0);
        let e2 = Vec3::unit(1);
        assert_eq!(p.lambda_quadratic(&e1, &e2), 1.0);
    }

    #[test]
    fn theta_bilinear_form_is_symmetric() {
        let p = build_params(sample_inputs()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = Rank3::<f64>::from_fn(|_| rng.gen_range(-1.0..1.0));
            let h = Rank3::<f64>::from_fn(|_| rng.gen_range(-1.0..1.0));
            let a = g.triple_dot(&rank6_triple_contract(&p.theta, &h));
            let b = h.triple_dot(&rank6_triple_contract(&p.theta, &g));
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_lambda_energy_matches_tensor() {
        let p = build_params(sample_inputs()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let full = 0.5 * crate::tensor::rank4_double_contract(&p.lambda_tensor, &a).frob(&a);
            assert!((full - lambda_energy_fast(p.k[0], p.k[1], &a)).abs() < 1e-14);
        }
    }
}
