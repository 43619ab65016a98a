//! The ℓ²-TV model on manifold-valued images: the forward-difference
//! operator, proximal maps and their derivatives, the reduced optimality
//! vector field and its Newton system.

mod grid;
mod newton;
mod ops;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifolds::{GeometryError, Manifold};
use crate::scalar::Real;

pub use grid::{DualField, FieldPair, Grid, PrimalImage, TangentGrid};
pub use newton::{IndexMap, NewtonSystem, Slot, TvProblem};
pub use ops::{
    cost, d_prox_data, d_prox_dual, forward_diff, forward_diff_adjoint, prox_data, prox_dual,
    tv_diff, tv_diff_adjoint, tv_norm, tv_op,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("pixel ({i}, {j}): {source}")]
    Pixel {
        i: usize,
        j: usize,
        #[source]
        source: GeometryError,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl ModelError {
    pub(crate) fn at(i: usize, j: usize) -> impl FnOnce(GeometryError) -> ModelError {
        move |source| ModelError::Pixel { i, j, source }
    }
}

/// Coupling of the two gradient channels in the TV norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TvNorm {
    /// `q = 1`: every channel enters separately.
    Anisotropic,
    /// `q = 2`: channels of a pixel enter through their Euclidean norm.
    Isotropic,
}

impl TryFrom<u8> for TvNorm {
    type Error = String;
    fn try_from(q: u8) -> Result<Self, String> {
        match q {
            1 => Ok(TvNorm::Anisotropic),
            2 => Ok(TvNorm::Isotropic),
            _ => Err(format!("q must be 1 or 2, got {q}")),
        }
    }
}

impl From<TvNorm> for u8 {
    fn from(q: TvNorm) -> u8 {
        match q {
            TvNorm::Anisotropic => 1,
            TvNorm::Isotropic => 2,
        }
    }
}

/// Model and step-size parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TvParams<T: Real, M: Manifold<T>> {
    /// TV weight.
    pub alpha: T,
    /// Quadratic penalty on the dual variable.
    pub beta: T,
    /// Primal proximal step.
    pub sigma: T,
    /// Dual proximal step.
    pub tau: T,
    pub q: TvNorm,
    /// Constant base point `m` at which the dual variable lives.
    pub base_point: M::Point,
}

impl<T: Real, M: Manifold<T>> TvParams<T, M> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos("alpha", self.alpha)?;
        pos("sigma", self.sigma)?;
        pos("tau", self.tau)?;
        if !(self.beta >= T::zero() && self.beta.is_finite()) {
            return Err(ModelError::Parameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        M::validate(&self.base_point)
            .map_err(|e| ModelError::Parameter(format!("base point: {e}")))
    }

    /// Radius `1 + βτ` separating the two branches of the dual prox.
    pub fn dual_threshold(&self) -> T {
        T::one() + self.beta * self.tau
    }

    /// Geodesic parameter `σ/(α+σ)` of the data prox.
    pub fn data_weight(&self) -> T {
        self.sigma / (self.alpha + self.sigma)
    }
}
