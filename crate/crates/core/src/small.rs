//! Fixed-size 3-vectors and 3×3 matrices, including the symmetric
//! eigendecomposition used for SPD matrix functions.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Real")]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    #[inline]
    pub fn unit(axis: usize) -> Self {
        let mut v = Self::zero();
        v.0[axis] = T::one();
        v
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = o.0;
        Vec3([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    #[inline]
    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn normalized(&self) -> Self {
        *self * (T::one() / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Dense 3×3 matrix, serialized as a row-major array of nine numbers.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "[T; 9]", from = "[T; 9]", bound = "T: Real")]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> From<Mat3<T>> for [T; 9] {
    fn from(m: Mat3<T>) -> Self {
        let a = m.0;
        [
            a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2], a[2][0], a[2][1], a[2][2],
        ]
    }
}

impl<T: Real> From<[T; 9]> for Mat3<T> {
    fn from(v: [T; 9]) -> Self {
        Mat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }
}

impl<T: Real> Mat3<T> {
    #[inline]
    pub fn zero() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one(), T::one())
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let mut m = Self::zero();
        m.0[0][0] = a;
        m.0[1][1] = b;
        m.0[2][2] = c;
        m
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = T::lit(rows[i][j]);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrize(&self) -> Self {
        let half = T::lit(0.5);
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = (self.0[i][j] + self.0[j][i]) * half;
            }
        }
        m
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] =
                    self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let a = &self.0;
        Vec3([
            a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
            a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
            a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
        ])
    }

    /// `A · B · Aᵀ`, symmetrized.
    pub fn congruence(&self, b: &Self) -> Self {
        self.matmul(b).matmul(&self.transpose()).symmetrize()
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Frobenius inner product `tr(Aᵀ B)`.
    pub fn frob_dot(&self, o: &Self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * o.0[i][j];
            }
        }
        s
    }

    pub fn frob_norm(&self) -> T {
        self.frob_dot(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn asymmetry(&self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s = s.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|r| r.iter()).all(|x| x.is_finite())
    }

    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    /// Symmetric part `(e_i e_jᵀ + e_j e_iᵀ)` scaled to unit Frobenius norm,
    /// expressed in the frame given by the columns of `u`.
    pub fn sym_basis_element(u: &Self, i: usize, j: usize) -> Self {
        let a = u.column(i);
        let b = u.column(j);
        let mut m = Self::zero();
        if i == j {
            for r in 0..3 {
                for c in 0..3 {
                    m.0[r][c] = a[r] * a[c];
                }
            }
        } else {
            let s = T::one() / T::SQRT_2();
            for r in 0..3 {
                for c in 0..3 {
                    m.0[r][c] = (a[r] * b[c] + b[r] * a[c]) * s;
                }
            }
        }
        m
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += o.0[i][j];
            }
        }
        m
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] -= o.0[i][j];
            }
        }
        m
    }
}

impl<T: Real> Neg for Mat3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self * (-T::one())
    }
}

impl<T: Real> Mul<T> for Mat3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        let mut m = self;
        for row in m.0.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        m
    }
}

impl<T: Real> AddAssign for Mat3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Mat3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

/// Eigendecomposition `A = U diag(λ) Uᵀ` of a symmetric 3×3 matrix.
#[derive(Clone, Copy, Debug)]
pub struct SymEigen<T> {
    pub values: [T; 3],
    /// Eigenvectors stored as columns.
    pub vectors: Mat3<T>,
}

impl<T: Real> SymEigen<T> {
    /// Cyclic Jacobi rotations; eigenvalues sorted ascending.
    pub fn new(a: &Mat3<T>) -> Self {
        let mut m = a.symmetrize();
        let mut v = Mat3::identity();
        let scale = m.max_abs();
        if scale == T::zero() {
            return SymEigen {
                values: [T::zero(); 3],
                vectors: v,
            };
        }
        let tol = T::epsilon() * T::epsilon() * scale * scale;
        for _sweep in 0..64 {
            let off = m.0[0][1] * m.0[0][1] + m.0[0][2] * m.0[0][2] + m.0[1][2] * m.0[1][2];
            if off <= tol {
                break;
            }
            for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
                let apq = m.0[p][q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m.0[q][q] - m.0[p][p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let mkp = m.0[k][p];
                    let mkq = m.0[k][q];
                    m.0[k][p] = c * mkp - s * mkq;
                    m.0[k][q] = s * mkp + c * mkq;
                }
                for k in 0..3 {
                    let mpk = m.0[p][k];
                    let mqk = m.0[q][k];
                    m.0[p][k] = c * mpk - s * mqk;
                    m.0[q][k] = s * mpk + c * mqk;
                }
                for k in 0..3 {
                    let vkp = v.0[k][p];
                    let vkq = v.0[k][q];
                    v.0[k][p] = c * vkp - s * vkq;
                    v.0[k][q] = s * vkp + c * vkq;
                }
            }
        }
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| m.0[i][i].partial_cmp(&m.0[j][j]).unwrap());
        let mut values = [T::zero(); 3];
        let mut vectors = Mat3::zero();
        for (c, &i) in idx.iter().enumerate() {
            values[c] = m.0[i][i];
            for r in 0..3 {
                vectors.0[r][c] = v.0[r][i];
            }
        }
        SymEigen { values, vectors }
    }

    /// `U diag(f(λ)) Uᵀ`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Mat3<T> {
        let u = &self.vectors;
        let d = [f(self.values[0]), f(self.values[1]), f(self.values[2])];
        let mut m = Mat3::zero();
        for i in 0..3 {
            for j in i..3 {
                let mut s = T::zero();
                for k in 0..3 {
                    s += u.0[i][k] * d[k] * u.0[j][k];
                }
                m.0[i][j] = s;
                m.0[j][i] = s;
            }
        }
        m
    }
}

/// Principal matrix functions of a symmetric argument.
pub fn sym_exp<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    SymEigen::new(a).map(|x| x.exp())
}

pub fn sym_log<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    SymEigen::new(a).map(|x| x.ln())
}

pub fn sym_sqrt<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    SymEigen::new(a).map(|x| x.sqrt())
}

pub fn sym_inv_sqrt<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    SymEigen::new(a).map(|x| T::one() / x.sqrt())
}

pub fn sym_inv<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    SymEigen::new(a).map(|x| T::one() / x)
}
