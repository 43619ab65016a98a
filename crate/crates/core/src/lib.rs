//! Primal-dual Riemannian semi-smooth Newton methods for ℓ²-TV denoising of
//! images with values on the 2-sphere or on 3×3 SPD matrices.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the solvers and
//! experiments are tuned for.

pub mod dense;
pub mod experiments;
pub mod jacobi;
pub mod manifolds;
pub mod sample;
pub mod scalar;
pub mod small;
pub mod solvers;
pub mod tvmodel;

pub use scalar::Real;

/// Point on the unit sphere.
pub type S2Point = small::Vec3<f64>;
/// Symmetric positive definite 3×3 matrix.
pub type SpdPoint = small::Mat3<f64>;
