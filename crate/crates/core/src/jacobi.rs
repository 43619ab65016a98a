//! Differentials of `exp`, `log` and geodesics, and their adjoints, from
//! Jacobi fields on symmetric spaces.
//!
//! Along a geodesic of length `L` the curvature operator `R(·, u)u` is
//! diagonal in a parallel orthonormal frame with constant eigenvalues `κ`.
//! Each differential scales the frame coefficients of its argument by a
//! scalar weight of `x = √|κ|·L` and transports the result to the output
//! point.

use serde::{Deserialize, Serialize};

use crate::manifolds::{from_coords, geodesic, GeometryError, Manifold, TangentSpace};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JacobiKind {
    /// `D_X exp_p(X)`.
    DExpArg,
    /// `D_p exp_p(X)` with `X` transported along the base variation.
    DExpBase,
    /// `D_q log_p(q)`.
    DLogArg,
    /// Covariant derivative of `p ↦ log_p(q)`.
    DLogBase,
    /// `D_p γ(p, q; s)`.
    DGeodesicStart,
}

pub const ALL_KINDS: [JacobiKind; 5] = [
    JacobiKind::DExpArg,
    JacobiKind::DExpBase,
    JacobiKind::DLogArg,
    JacobiKind::DLogBase,
    JacobiKind::DGeodesicStart,
];

const SERIES_CUTOFF: f64 = 1e-4;

/// Scalar weight for one frame direction with curvature `kappa` along a
/// geodesic of length `t`; `s` is the geodesic parameter for
/// [`JacobiKind::DGeodesicStart`] and ignored otherwise.
pub fn jacobi_weight<T: Real>(kind: JacobiKind, kappa: T, t: T, s: T) -> T {
    let x = kappa.abs().sqrt() * t;
    let sign = if kappa >= T::zero() { T::one() } else { -T::one() };
    let one = T::one();
    if x < T::lit(SERIES_CUTOFF) {
        let x2 = sign * x * x;
        return match kind {
            JacobiKind::DExpArg => one - x2 / T::lit(6.0),
            JacobiKind::DLogArg => one + x2 / T::lit(6.0),
            JacobiKind::DExpBase => one - x2 / T::lit(2.0),
            JacobiKind::DLogBase => -(one - x2 / T::lit(3.0)),
            JacobiKind::DGeodesicStart => {
                let a = one - s;
                let x4 = x2 * x2;
                a * (one
                    + (one - a * a) * x2 / T::lit(6.0)
                    + x4 * (T::lit(7.0 / 360.0) - a * a / T::lit(36.0)
                        + a * a * a * a / T::lit(120.0)))
            }
        };
    }
    if kappa > T::zero() {
        match kind {
            JacobiKind::DExpArg => x.sin() / x,
            JacobiKind::DLogArg => x / x.sin(),
            JacobiKind::DExpBase => x.cos(),
            JacobiKind::DLogBase => -x * x.cos() / x.sin(),
            JacobiKind::DGeodesicStart => ((one - s) * x).sin() / x.sin(),
        }
    } else {
        match kind {
            JacobiKind::DExpArg => x.sinh() / x,
            JacobiKind::DLogArg => x / x.sinh(),
            JacobiKind::DExpBase => x.cosh(),
            JacobiKind::DLogBase => -x * x.cosh() / x.sinh(),
            JacobiKind::DGeodesicStart => ((one - s) * x).sinh() / x.sinh(),
        }
    }
}

/// Scales the curvature-frame coefficients of `v` at `p` for the geodesic
/// with initial velocity `x`. The result stays at `p`.
fn scale_in_frame<T: Real, M: Manifold<T>>(
    kind: JacobiKind,
    p: &M::Point,
    x: &M::Tangent,
    s: T,
    v: &M::Tangent,
) -> M::Tangent {
    let len = M::norm(p, x);
    let u = if len > T::zero() {
        *x * (T::one() / len)
    } else {
        M::Tangent::zero()
    };
    let frame = M::curvature_frame(p, &u);
    let c = M::coords(p, &frame.basis, v);
    let scaled: Vec<T> = c
        .iter()
        .zip(&frame.kappas)
        .map(|(&ci, &k)| ci * jacobi_weight(kind, k, len, s))
        .collect();
    from_coords(&frame.basis, &scaled)
}

/// Forward differential along the geodesic `t ↦ exp_p(t x)`.
///
/// The input lives at `p` for every kind except [`JacobiKind::DLogArg`],
/// whose input lives at `exp_p(x)`. Outputs live at `exp_p(x)`
/// (`DExpArg`, `DExpBase`), at `p` (`DLogArg`, `DLogBase`) or at
/// `exp_p(s x)` (`DGeodesicStart`).
pub fn differential<T: Real, M: Manifold<T>>(
    kind: JacobiKind,
    p: &M::Point,
    x: &M::Tangent,
    s: T,
    v: &M::Tangent,
) -> M::Tangent {
    match kind {
        JacobiKind::DExpArg | JacobiKind::DExpBase => {
            M::transport_along(p, x, &scale_in_frame::<T, M>(kind, p, x, s, v))
        }
        JacobiKind::DLogArg => {
            let back = M::transport_along_inv(p, x, v);
            scale_in_frame::<T, M>(kind, p, x, s, &back)
        }
        JacobiKind::DLogBase => scale_in_frame::<T, M>(kind, p, x, s, v),
        JacobiKind::DGeodesicStart => {
            M::transport_along(p, &(*x * s), &scale_in_frame::<T, M>(kind, p, x, s, v))
        }
    }
}

/// Adjoint of [`differential`] with respect to the metrics at its input and
/// output points.
pub fn adjoint<T: Real, M: Manifold<T>>(
    kind: JacobiKind,
    p: &M::Point,
    x: &M::Tangent,
    s: T,
    xi: &M::Tangent,
) -> M::Tangent {
    match kind {
        JacobiKind::DExpArg | JacobiKind::DExpBase => {
            let back = M::transport_along_inv(p, x, xi);
            scale_in_frame::<T, M>(kind, p, x, s, &back)
        }
        JacobiKind::DLogArg => M::transport_along(p, x, &scale_in_frame::<T, M>(kind, p, x, s, xi)),
        JacobiKind::DLogBase => scale_in_frame::<T, M>(kind, p, x, s, xi),
        JacobiKind::DGeodesicStart => {
            let back = M::transport_along_inv(p, &(*x * s), xi);
            scale_in_frame::<T, M>(kind, p, x, s, &back)
        }
    }
}

/// `D_X exp_p(X)[V]`, at `exp_p(X)`.
pub fn d_exp_arg<T: Real, M: Manifold<T>>(p: &M::Point, x: &M::Tangent, v: &M::Tangent) -> M::Tangent {
    differential::<T, M>(JacobiKind::DExpArg, p, x, T::zero(), v)
}

/// `D_p exp_p(X)[V]`, at `exp_p(X)`.
pub fn d_exp_base<T: Real, M: Manifold<T>>(p: &M::Point, x: &M::Tangent, v: &M::Tangent) -> M::Tangent {
    differential::<T, M>(JacobiKind::DExpBase, p, x, T::zero(), v)
}

/// `D_q log_p(q)[W]` for `W` at `q`; result at `p`.
pub fn d_log_arg<T: Real, M: Manifold<T>>(
    p: &M::Point,
    q: &M::Point,
    w: &M::Tangent,
) -> Result<M::Tangent, GeometryError> {
    let x = M::log(p, q)?;
    Ok(differential::<T, M>(JacobiKind::DLogArg, p, &x, T::zero(), w))
}

/// Covariant derivative of `r ↦ log_r(q)` at `p` in direction `V`.
pub fn d_log_base<T: Real, M: Manifold<T>>(
    p: &M::Point,
    q: &M::Point,
    v: &M::Tangent,
) -> Result<M::Tangent, GeometryError> {
    let x = M::log(p, q)?;
    Ok(differential::<T, M>(JacobiKind::DLogBase, p, &x, T::zero(), v))
}

/// `D_p γ(p, q; t)[V]`, at `γ(p, q; t)`.
pub fn d_geodesic_start<T: Real, M: Manifold<T>>(
    p: &M::Point,
    q: &M::Point,
    t: T,
    v: &M::Tangent,
) -> Result<M::Tangent, GeometryError> {
    let x = M::log(p, q)?;
    Ok(differential::<T, M>(JacobiKind::DGeodesicStart, p, &x, t, v))
}

/// Covariant derivative at `p`, in direction `y`, of the field
/// `p ↦ P_{m→p} w` with `m` and `w` fixed.
///
/// The transport is written as a pole ladder through the midpoint of `p`
/// and `m`, which is exact on symmetric spaces, and differentiated by the
/// chain rule.
pub fn d_transport_target<T: Real, M: Manifold<T>>(
    m: &M::Point,
    p: &M::Point,
    w: &M::Tangent,
    y: &M::Tangent,
) -> Result<M::Tangent, GeometryError> {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mid = geodesic::<T, M>(p, m, half)?;
    let a = M::exp(m, w);
    let to_mid = M::log(&a, &mid)? * two;
    let q4 = M::exp(&a, &to_mid);
    let d_mid = d_geodesic_start::<T, M>(p, m, half, y)?;
    let d_to_mid = d_log_arg::<T, M>(&a, &mid, &d_mid)? * two;
    let d_q4 = d_exp_arg::<T, M>(&a, &to_mid, &d_to_mid);
    Ok(-d_log_base::<T, M>(p, &q4, y)? - d_log_arg::<T, M>(p, &q4, &d_q4)?)
}
