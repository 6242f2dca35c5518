//! Small dense tensors over R³ and the contractions between them.
//!
//! Index conventions: a rank-r tensor is stored row-major, last index
//! fastest, so `Rank6[(i,j,k,l,m,n)]` sits at `243i+81j+27k+9l+3m+n`.
//! Products follow the usual continuum-mechanics notation:
//!
//! * `A : B`    Frobenius product of matrices,
//! * `L : A`    `(L:A)_ij = Σ_kl L_ijkl A_kl`,
//! * `T ⋮ G`    `(T⋮G)_ijk = Σ_lmn T_ijklmn G_lmn`,
//! * `a · T`    `(a·T)_ijlmn = Σ_k a_k T_ijklmn`,
//! * `A : T`    `(A:T)_klmn = Σ_ij A_ij T_ijklmn`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3<T>(pub [T; 3]);

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

macro_rules! dense_tensor {
    ($name:ident, $len:expr, $rank:expr) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name<T>(pub Box<[T; $len]>);

        impl<T: Real> $name<T> {
            pub const LEN: usize = $len;

            pub fn zeros() -> Self {
                $name(Box::new([T::zero(); $len]))
            }

            /// Builds the tensor entrywise from its multi-index.
            pub fn from_fn<F: FnMut([usize; $rank]) -> T>(mut f: F) -> Self {
                let mut out = Self::zeros();
                for flat in 0..$len {
                    out.0[flat] = f(unflatten::<$rank>(flat));
                }
                out
            }

            pub fn as_slice(&self) -> &[T] {
                &self.0[..]
            }

            pub fn norm_sq(&self) -> T {
                self.0.iter().fold(T::zero(), |acc, &x| acc + x * x)
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            pub fn scale(&self, s: T) -> Self {
                let mut out = self.clone();
                out.0.iter_mut().for_each(|x| *x = *x * s);
                out
            }
        }

        impl<T: Real> Index<[usize; $rank]> for $name<T> {
            type Output = T;
            fn index(&self, idx: [usize; $rank]) -> &T {
                &self.0[flatten(idx)]
            }
        }

        impl<T: Real> IndexMut<[usize; $rank]> for $name<T> {
            fn index_mut(&mut self, idx: [usize; $rank]) -> &mut T {
                &mut self.0[flatten(idx)]
            }
        }

        impl<T: Real> Add for &$name<T> {
            type Output = $name<T>;
            fn add(self, rhs: Self) -> $name<T> {
                let mut out = self.clone();
                for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
                    *o = *o + *r;
                }
                out
            }
        }

        impl<T: Real> Sub for &$name<T> {
            type Output = $name<T>;
            fn sub(self, rhs: Self) -> $name<T> {
                let mut out = self.clone();
                for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
                    *o = *o - *r;
                }
                out
            }
        }
    };
}

dense_tensor!(Rank3, 27, 3);
dense_tensor!(Rank4, 81, 4);
dense_tensor!(Rank5, 243, 5);
dense_tensor!(Rank6, 729, 6);

#[inline]
fn flatten<const R: usize>(idx: [usize; R]) -> usize {
    idx.iter().fold(0, |acc, &i| {
        debug_assert!(i < 3);
        acc * 3 + i
    })
}

#[inline]
fn unflatten<const R: usize>(mut flat: usize) -> [usize; R] {
    let mut idx = [0; R];
    for slot in idx.iter_mut().rev() {
        *slot = flat % 3;
        flat /= 3;
    }
    idx
}

/// Kronecker delta.
#[inline]
pub fn delta<T: Real>(i: usize, j: usize) -> T {
    if i == j {
        T::one()
    } else {
        T::zero()
    }
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    /// Canonical basis vector `e_i` (0-based).
    pub fn unit(i: usize) -> Self {
        let mut v = Self::zero();
        v.0[i] = T::one();
        v
    }

    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// `a ⊗ b = a bᵀ`.
    pub fn outer(&self, o: &Self) -> Mat3<T> {
        Mat3::from_fn(|i, j| self.0[i] * o.0[j])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Real> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mat3<T> {
    pub fn zero() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::from_fn(delta)
    }

    pub fn from_fn<F: FnMut(usize, usize) -> T>(mut f: F) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// `A_sym = ½(A + Aᵀ)`.
    pub fn sym(&self) -> Self {
        let h = T::lit(0.5);
        Self::from_fn(|i, j| h * (self.0[i][j] + self.0[j][i]))
    }

    /// `A_skw = ½(A − Aᵀ)`.
    pub fn skw(&self) -> Self {
        let h = T::lit(0.5);
        Self::from_fn(|i, j| h * (self.0[i][j] - self.0[j][i]))
    }

    /// Frobenius product `A : B`.
    pub fn frob(&self, o: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                acc = acc + self.0[i][j] * o.0[i][j];
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> T {
        self.frob(self)
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        Vec3(std::array::from_fn(|i| {
            self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2]
        }))
    }

    /// `Aᵀ v` without forming the transpose.
    pub fn tr_mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        Vec3(std::array::from_fn(|j| {
            self.0[0][j] * v.0[0] + self.0[1][j] * v.0[1] + self.0[2][j] * v.0[2]
        }))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        Self::from_fn(|i, k| {
            self.0[i][0] * o.0[0][k] + self.0[i][1] * o.0[1][k] + self.0[i][2] * o.0[2][k]
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    /// `A ⊗ a`, the rank-3 tensor `A_ij a_k`.
    pub fn outer_vec(&self, a: &Vec3<T>) -> Rank3<T> {
        Rank3::from_fn(|[i, j, k]| self.0[i][j] * a.0[k])
    }

    /// `A : Γ = Σ_ij A_ij Γ_ijk`, contraction over the leading indices of Γ.
    pub fn contract_rank3(&self, g: &Rank3<T>) -> Vec3<T> {
        let mut out = Vec3::zero();
        for i in 0..3 {
            for j in 0..3 {
                let a = self.0[i][j];
                for k in 0..3 {
                    out.0[k] = out.0[k] + a * g.0[9 * i + 3 * j + k];
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().flatten().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl<T: Real> Neg for Mat3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<T> for Mat3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> AddAssign for Mat3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Rank3<T> {
    /// `Γ : A = Σ_jk Γ_ijk A_jk`.
    pub fn contract_mat(&self, a: &Mat3<T>) -> Vec3<T> {
        Vec3(std::array::from_fn(|i| {
            let mut acc = T::zero();
            for j in 0..3 {
                for k in 0..3 {
                    acc = acc + self.0[9 * i + 3 * j + k] * a.0[j][k];
                }
            }
            acc
        }))
    }

    /// `Σ_k a_k Γ_ijk`, the contraction over the trailing index.
    pub fn contract_last(&self, a: &Vec3<T>) -> Mat3<T> {
        Mat3::from_fn(|i, j| {
            let b = 9 * i + 3 * j;
            self.0[b] * a.0[0] + self.0[b + 1] * a.0[1] + self.0[b + 2] * a.0[2]
        })
    }

    /// Full contraction `Υ ⋮ Γ`.
    pub fn triple_dot(&self, o: &Self) -> T {
        self.0
            .iter()
            .zip(o.0.iter())
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }
}

impl<T: Real> Rank4<T> {
    /// `L_ijkl = δ_ik δ_jl`, the identity map on matrices.
    pub fn identity_on_matrices() -> Self {
        Self::from_fn(|[i, j, k, l]| delta::<T>(i, k) * delta::<T>(j, l))
    }

    /// `Σ_lmn R_klmn G_lmn`, i.e. `(A:Θ) ⋮ G`.
    pub fn contract_rank3(&self, g: &Rank3<T>) -> Vec3<T> {
        Vec3(std::array::from_fn(|k| {
            let b = 27 * k;
            (0..27).fold(T::zero(), |acc, f| acc + self.0[b + f] * g.0[f])
        }))
    }
}

impl<T: Real> Rank5<T> {
    /// `Σ_lmn P_ijlmn G_lmn`, i.e. `(a·Θ) ⋮ G`.
    pub fn contract_rank3(&self, g: &Rank3<T>) -> Mat3<T> {
        Mat3::from_fn(|i, j| {
            let b = 81 * i + 27 * j;
            (0..27).fold(T::zero(), |acc, f| acc + self.0[b + f] * g.0[f])
        })
    }
}

impl<T: Real> Rank6<T> {
    /// `G ⋮ T`, contraction of G against the leading three indices.
    pub fn left_contract3(&self, g: &Rank3<T>) -> Rank3<T> {
        let mut out = Rank3::zeros();
        for a in 0..27 {
            let ga = g.0[a];
            if ga == T::zero() {
                continue;
            }
            for b in 0..27 {
                out.0[b] = out.0[b] + ga * self.0[27 * a + b];
            }
        }
        out
    }

    /// Collects the nonzero entries for fast repeated contraction.
    pub fn sparse(&self) -> SparseRank6<T> {
        let entries = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(f, &v)| ((f / 27) as u16, (f % 27) as u16, v))
            .collect();
        SparseRank6 { entries }
    }
}

/// Nonzero pattern of a rank-6 tensor viewed as a 27×27 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRank6<T> {
    entries: Vec<(u16, u16, T)>,
}

impl<T: Real> SparseRank6<T> {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Same result as [`rank6_triple_contract`], touching only nonzeros.
    pub fn contract3(&self, g: &Rank3<T>) -> Rank3<T> {
        let mut out = Rank3::zeros();
        for &(r, c, v) in &self.entries {
            out.0[r as usize] = out.0[r as usize] + v * g.0[c as usize];
        }
        out
    }
}

/// `[a]ₓ`, the matrix with `[a]ₓ b = a × b`.
pub fn cross_matrix<T: Real>(a: &Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    let [a1, a2, a3] = a.0;
    Mat3([[z, -a3, a2], [a3, z, -a1], [-a2, a1, z]])
}

/// `(A_sym, A_skw)`.
pub fn sym_skw_split<T: Real>(a: &Mat3<T>) -> (Mat3<T>, Mat3<T>) {
    (a.sym(), a.skw())
}

/// `(L:A)_ij = Σ_kl L_ijkl A_kl`.
pub fn rank4_double_contract<T: Real>(l: &Rank4<T>, a: &Mat3<T>) -> Mat3<T> {
    Mat3::from_fn(|i, j| {
        let b = 27 * i + 9 * j;
        let mut acc = T::zero();
        for k in 0..3 {
            for m in 0..3 {
                acc = acc + l.0[b + 3 * k + m] * a.0[k][m];
            }
        }
        acc
    })
}

/// `(T⋮G)_ijk = Σ_lmn T_ijklmn G_lmn`.
pub fn rank6_triple_contract<T: Real>(t: &Rank6<T>, g: &Rank3<T>) -> Rank3<T> {
    let mut out = Rank3::zeros();
    for a in 0..27 {
        let row = &t.0[27 * a..27 * a + 27];
        out.0[a] = row
            .iter()
            .zip(g.0.iter())
            .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    }
    out
}

/// `(a·T)_ijlmn = Σ_k a_k T_ijklmn`.
pub fn vec_dot_rank6<T: Real>(a: &Vec3<T>, t: &Rank6<T>) -> Rank5<T> {
    Rank5::from_fn(|[i, j, l, m, n]| {
        (0..3).fold(T::zero(), |acc, k| acc + a.0[k] * t[[i, j, k, l, m, n]])
    })
}

/// `(A:T)_klmn = Σ_ij A_ij T_ijklmn`.
pub fn mat_contract_rank6<T: Real>(a: &Mat3<T>, t: &Rank6<T>) -> Rank4<T> {
    Rank4::from_fn(|[k, l, m, n]| {
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                acc = acc + a.0[i][j] * t[[i, j, k, l, m, n]];
            }
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(rng: &mut ChaCha8Rng) -> Vec3<f64> {
        Vec3(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
    }

    fn rmat(rng: &mut ChaCha8Rng) -> Mat3<f64> {
        Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    fn max_diff(a: &Mat3<f64>, b: &Mat3<f64>) -> f64 {
        (*a - *b).max_abs()
    }

    #[test]
    fn cross_matrix_of_e1() {
        let m = cross_matrix(&Vec3::<f64>::unit(0));
        assert_eq!(m.0[1][2], -1.0);
        assert_eq!(m.0[2][1], 1.0);
        assert_eq!(m.0.iter().flatten().filter(|x| **x != 0.0).count(), 2);
        assert_eq!(m.mul_vec(&Vec3::unit(1)), Vec3::unit(2));
    }

    #[test]
    fn cross_matrix_of_zero_is_zero() {
        assert_eq!(cross_matrix(&Vec3::<f64>::zero()), Mat3::zero());
    }

    #[test]
    fn cross_matrix_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = rvec(&mut rng);
            let b = rvec(&mut rng);
            let ca = cross_matrix(&a);
            let cb = cross_matrix(&b);
            assert!((ca.mul_vec(&b) - a.cross(&b)).max_abs() < 1e-15);
            let lhs = ca.transpose().mul_mat(&cb);
            let rhs = Mat3::identity().scale(a.dot(&b)) - b.outer(&a);
            assert!(max_diff(&lhs, &rhs) < 1e-14);
        }
    }

    #[test]
    fn sym_skw_split_cases() {
        let i = Mat3::<f64>::identity();
        assert_eq!(sym_skw_split(&i), (i, Mat3::zero()));
        let s = cross_matrix(&Vec3::new(0.3, -1.0, 2.0));
        let (sy, sk) = sym_skw_split(&s);
        assert_eq!(sy, Mat3::zero());
        assert_eq!(sk, s);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a = rmat(&mut rng).sym();
            let b = rmat(&mut rng);
            assert!((a.frob(&b) - a.frob(&b.sym())).abs() < 1e-14);
            let (p, q) = sym_skw_split(&b);
            assert!(max_diff(&(p + q), &b) == 0.0);
        }
    }

    #[test]
    fn rank4_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rmat(&mut rng);
        assert_eq!(rank4_double_contract(&Rank4::identity_on_matrices(), &a), a);
        assert_eq!(rank4_double_contract(&Rank4::zeros(), &a), Mat3::zero());
    }

    #[test]
    fn rank6_contractions_basic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Rank3::<f64>::from_fn(|_| rng.gen_range(-1.0..1.0));
        assert_eq!(rank6_triple_contract(&Rank6::zeros(), &g), Rank3::zeros());
        let mut t = Rank6::<f64>::zeros();
        t[[0, 0, 0, 0, 0, 0]] = 1.0;
        let r = rank6_triple_contract(&t, &g);
        assert_eq!(r[[0, 0, 0]], g[[0, 0, 0]]);
        assert_eq!(r.0.iter().filter(|x| **x != 0.0).count(), 1);
        assert_eq!(t.sparse().contract3(&g), r);
    }

    #[test]
    fn left_contracts_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Rank6::<f64>::from_fn(|_| rng.gen_range(-1.0..1.0));
        assert_eq!(vec_dot_rank6(&Vec3::zero(), &t), Rank5::zeros());
        assert_eq!(mat_contract_rank6(&Mat3::zero(), &t), Rank4::zeros());
        let s = vec_dot_rank6(&Vec3::unit(1), &t);
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    for m in 0..3 {
                        for n in 0..3 {
                            assert_eq!(s[[i, j, l, m, n]], t[[i, j, 1, l, m, n]]);
                        }
                    }
                }
            }
        }
    }
}
