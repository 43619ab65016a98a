//! Riemannian primitives for the unit 2-sphere and for 3×3 symmetric
//! positive definite matrices with the affine-invariant metric.
//!
//! Tangent vectors are plain values (`Vec3` or symmetric `Mat3`); the point
//! they are attached to is carried by the caller. [`TangentVector`] pairs a
//! value with its anchor for the checked entry points.

mod sphere;
mod spd;

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::small::{Mat3, Vec3};

pub use spd::Spd3;
pub use sphere::Sphere2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("logarithm undefined: points are (nearly) antipodal, distance {dist}")]
    Injectivity { dist: f64 },
    #[error("tangent vector anchored at a different point than the operation expects")]
    Anchor,
    #[error("invalid manifold point: {0}")]
    InvalidPoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldKind {
    Sphere2,
    #[serde(alias = "SPD3")]
    Spd3,
}

impl ManifoldKind {
    pub fn dim(self) -> usize {
        match self {
            ManifoldKind::Sphere2 => 2,
            ManifoldKind::Spd3 => 6,
        }
    }
}

/// Vector space operations shared by tangent representations.
pub trait TangentSpace<T: Real>:
    Copy
    + Debug
    + PartialEq
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<T, Output = Self>
{
    fn zero() -> Self;
    fn is_finite(&self) -> bool;
    /// Euclidean (ambient) inner product, independent of the base point.
    fn ambient_dot(&self, other: &Self) -> T;
}

impl<T: Real> TangentSpace<T> for Vec3<T> {
    fn zero() -> Self {
        Vec3::zero()
    }
    fn is_finite(&self) -> bool {
        Vec3::is_finite(self)
    }
    fn ambient_dot(&self, other: &Self) -> T {
        self.dot(other)
    }
}

impl<T: Real> TangentSpace<T> for Mat3<T> {
    fn zero() -> Self {
        Mat3::zero()
    }
    fn is_finite(&self) -> bool {
        Mat3::is_finite(self)
    }
    fn ambient_dot(&self, other: &Self) -> T {
        self.frob_dot(other)
    }
}

/// Orthonormal eigenframe of the curvature operator `R(·, u)u` at a point.
#[derive(Clone, Debug)]
pub struct CurvatureFrame<P, V, T> {
    pub anchor: P,
    pub direction: V,
    pub basis: Vec<V>,
    pub kappas: Vec<T>,
}

/// A Riemannian manifold with closed-form geodesic machinery.
///
/// Implementors are zero-sized markers; all methods are associated
/// functions on immutable values.
pub trait Manifold<T: Real>:
    Copy + Debug + Default + PartialEq + Send + Sync + 'static
{
    type Point: Copy + Debug + PartialEq + Send + Sync + Serialize + DeserializeOwned;
    type Tangent: TangentSpace<T>;

    const DIM: usize;
    const KIND: ManifoldKind;

    fn inner(p: &Self::Point, x: &Self::Tangent, y: &Self::Tangent) -> T;

    fn norm(p: &Self::Point, x: &Self::Tangent) -> T {
        Self::inner(p, x, x).max(T::zero()).sqrt()
    }

    fn dist(p: &Self::Point, q: &Self::Point) -> T;

    fn exp(p: &Self::Point, x: &Self::Tangent) -> Self::Point;

    fn log(p: &Self::Point, q: &Self::Point) -> Result<Self::Tangent, GeometryError>;

    /// Parallel transport of `x` from `p` to `q` along the minimizing geodesic.
    fn transport(
        p: &Self::Point,
        q: &Self::Point,
        x: &Self::Tangent,
    ) -> Result<Self::Tangent, GeometryError>;

    /// Parallel transport of `v` along `t ↦ exp_p(t x)`, `t ∈ [0, 1]`. Unlike
    /// [`Manifold::transport`] the geodesic need not be minimizing.
    fn transport_along(p: &Self::Point, x: &Self::Tangent, v: &Self::Tangent) -> Self::Tangent;

    /// Inverse of [`Manifold::transport_along`]: maps `w` at `exp_p(x)` back to `p`.
    fn transport_along_inv(
        p: &Self::Point,
        x: &Self::Tangent,
        w: &Self::Tangent,
    ) -> Self::Tangent {
        let q = Self::exp(p, x);
        let velocity = Self::transport_along(p, x, x);
        Self::transport_along(&q, &(-velocity), w)
    }

    /// Deterministic orthonormal basis of the tangent space at `p`.
    fn onb(p: &Self::Point) -> Vec<Self::Tangent>;

    /// Eigenframe of `R(·, u)u` for a unit (or zero) direction `u` at `p`.
    fn curvature_frame(
        p: &Self::Point,
        u: &Self::Tangent,
    ) -> CurvatureFrame<Self::Point, Self::Tangent, T>;

    /// Orthogonal projection of an ambient vector onto the tangent space.
    fn project_tangent(p: &Self::Point, x: &Self::Tangent) -> Self::Tangent;

    /// Maps an ambient point back onto the manifold.
    fn project_point(p: &Self::Point) -> Self::Point;

    fn validate(p: &Self::Point) -> Result<(), GeometryError>;

    fn point_is_finite(p: &Self::Point) -> bool;

    /// Coordinates of `x` in `basis`, assumed orthonormal at `p`.
    fn coords(p: &Self::Point, basis: &[Self::Tangent], x: &Self::Tangent) -> Vec<T> {
        basis.iter().map(|b| Self::inner(p, b, x)).collect()
    }
}

/// `γ_{p,q}(t) = exp_p(t log_p q)`.
pub fn geodesic<T: Real, M: Manifold<T>>(
    p: &M::Point,
    q: &M::Point,
    t: T,
) -> Result<M::Point, GeometryError> {
    if t == T::zero() {
        return Ok(*p);
    }
    if t == T::one() {
        return Ok(*q);
    }
    Ok(M::exp(p, &(M::log(p, q)? * t)))
}

/// Transport of `x` from `p` to `q` by one pole-ladder rung through the
/// geodesic midpoint. Built from exp/log only.
pub fn pole_ladder<T: Real, M: Manifold<T>>(
    p: &M::Point,
    q: &M::Point,
    x: &M::Tangent,
) -> Result<M::Tangent, GeometryError> {
    let mid = geodesic::<T, M>(q, p, T::lit(0.5))?;
    let a = M::exp(p, x);
    let reflected = M::exp(&a, &(M::log(&a, &mid)? * T::lit(2.0)));
    let v = M::log(q, &reflected)?;
    Ok(M::project_tangent(q, &(-v)))
}

/// Linear combination `Σ c_i b_i`.
pub fn from_coords<T: Real, V: TangentSpace<T>>(basis: &[V], c: &[T]) -> V {
    debug_assert_eq!(basis.len(), c.len());
    basis
        .iter()
        .zip(c)
        .fold(V::zero(), |acc, (b, &ci)| acc + *b * ci)
}

/// Tangent vector whose coordinates in `onb(p)` are i.i.d. `N(0, stddev²)`.
pub fn random_tangent<T: Real, M: Manifold<T>, R: Rng + ?Sized>(
    p: &M::Point,
    stddev: T,
    rng: &mut R,
) -> M::Tangent {
    let basis = M::onb(p);
    let c: Vec<T> = (0..M::DIM)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            T::lit(z) * stddev
        })
        .collect();
    if stddev == T::zero() {
        return M::Tangent::zero();
    }
    from_coords(&basis, &c)
}

/// Tangent value paired with the point it is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TangentVector<T: Real, M: Manifold<T>> {
    pub anchor: M::Point,
    pub value: M::Tangent,
}

impl<T: Real, M: Manifold<T>> TangentVector<T, M> {
    pub fn new(anchor: M::Point, value: M::Tangent) -> Self {
        TangentVector { anchor, value }
    }

    pub fn zero(anchor: M::Point) -> Self {
        Self::new(anchor, M::Tangent::zero())
    }

    fn check(&self, p: &M::Point) -> Result<(), GeometryError> {
        if &self.anchor == p {
            Ok(())
        } else {
            Err(GeometryError::Anchor)
        }
    }

    /// Metric inner product; both vectors must share the anchor.
    pub fn inner(&self, other: &Self) -> Result<T, GeometryError> {
        other.check(&self.anchor)?;
        Ok(M::inner(&self.anchor, &self.value, &other.value))
    }

    pub fn norm(&self) -> T {
        M::norm(&self.anchor, &self.value)
    }

    pub fn exp(&self) -> M::Point {
        M::exp(&self.anchor, &self.value)
    }

    pub fn transport_to(&self, q: &M::Point) -> Result<Self, GeometryError> {
        Ok(Self::new(*q, M::transport(&self.anchor, q, &self.value)?))
    }
}

/// Orthonormal basis together with its anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis<T: Real, M: Manifold<T>> {
    pub anchor: M::Point,
    pub vectors: Vec<M::Tangent>,
}

impl<T: Real, M: Manifold<T>> OrthonormalBasis<T, M> {
    pub fn at(p: &M::Point) -> Self {
        OrthonormalBasis {
            anchor: *p,
            vectors: M::onb(p),
        }
    }

    pub fn coords(&self, x: &TangentVector<T, M>) -> Result<Vec<T>, GeometryError> {
        x.check(&self.anchor)?;
        Ok(M::coords(&self.anchor, &self.vectors, &x.value))
    }

    pub fn from_coords(&self, c: &[T]) -> TangentVector<T, M> {
        TangentVector::new(self.anchor, from_coords(&self.vectors, c))
    }
}

/// Shape of a power manifold or of a grid of tangent vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerShape {
    pub dims: Vec<usize>,
}

impl PowerShape {
    pub fn new(dims: Vec<usize>) -> Result<Self, GeometryError> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(GeometryError::InvalidPoint(format!(
                "power shape {dims:?} must have positive extents"
            )));
        }
        Ok(PowerShape { dims })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
