use crate::jacobi::{adjoint, d_geodesic_start, differential, JacobiKind};
use crate::manifolds::{geodesic, Manifold, TangentSpace};
use crate::scalar::Real;

use super::grid::{is_free_entry, neighbor, DualField, Grid, PrimalImage, TangentGrid};
use super::{ModelError, TvNorm, TvParams};

fn check_same_shape<A, B>(a: &Grid<A>, b: &Grid<B>) -> Result<(), ModelError> {
    if a.shape() != b.shape() {
        return Err(ModelError::Shape(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_dual_shape<A, B>(a: &Grid<A>, b: &DualField<B>) -> Result<(), ModelError> {
    if a.shape() != [b.d1(), b.d2()] {
        return Err(ModelError::Shape(format!(
            "image {:?} vs dual field {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Forward differences `log_{p_ij} p_{ij+e_k}`, anchored at `p_ij`.
pub fn tv_op<T: Real, M: Manifold<T>>(
    p: &PrimalImage<T, M>,
) -> Result<DualField<M::Tangent>, ModelError> {
    let (d1, d2) = (p.d1(), p.d2());
    let mut out = DualField::filled(d1, d2, M::Tangent::zero());
    for i in 0..d1 {
        for j in 0..d2 {
            for k in 0..2 {
                if is_free_entry(d1, d2, i, j, k) {
                    let (a, b) = neighbor(i, j, k);
                    *out.get_mut(i, j, k) =
                        M::log(p.get(i, j), p.get(a, b)).map_err(ModelError::at(i, j))?;
                }
            }
        }
    }
    Ok(out)
}

/// `Σ_ij ‖(f_ij0, f_ij1)‖_q`, with entry norms taken at `p_ij`.
pub fn tv_norm<T: Real, M: Manifold<T>>(
    field: &DualField<M::Tangent>,
    p: &PrimalImage<T, M>,
    q: TvNorm,
) -> T {
    let mut total = T::zero();
    for i in 0..p.d1() {
        for j in 0..p.d2() {
            let n0 = M::norm(p.get(i, j), field.get(i, j, 0));
            let n1 = M::norm(p.get(i, j), field.get(i, j, 1));
            total += match q {
                TvNorm::Anisotropic => n0 + n1,
                TvNorm::Isotropic => (n0 * n0 + n1 * n1).sqrt(),
            };
        }
    }
    total
}

/// `(1/(2α)) Σ d²(p_ij, h_ij) + TV_q(p)`.
pub fn cost<T: Real, M: Manifold<T>>(
    p: &PrimalImage<T, M>,
    h: &PrimalImage<T, M>,
    params: &TvParams<T, M>,
) -> Result<T, ModelError> {
    check_same_shape(p, h)?;
    let data: T = p
        .iter()
        .zip(h.iter())
        .map(|(a, b)| {
            let d = M::dist(a, b);
            d * d
        })
        .sum();
    let tv = tv_norm::<T, M>(&tv_op::<T, M>(p)?, p, params.q);
    Ok(data / (T::lit(2.0) * params.alpha) + tv)
}

/// Differential of [`tv_op`] in direction `v`, each entry transported from
/// `p_ij` to the base point `m`.
pub fn tv_diff<T: Real, M: Manifold<T>>(
    p: &PrimalImage<T, M>,
    v: &TangentGrid<T, M>,
    m: &M::Point,
) -> Result<DualField<M::Tangent>, ModelError> {
    check_same_shape(p, v)?;
    let (d1, d2) = (p.d1(), p.d2());
    let mut out = DualField::filled(d1, d2, M::Tangent::zero());
    for i in 0..d1 {
        for j in 0..d2 {
            for k in 0..2 {
                if !is_free_entry(d1, d2, i, j, k) {
                    continue;
                }
                let (a, b) = neighbor(i, j, k);
                let (pi, pn) = (p.get(i, j), p.get(a, b));
                let err = ModelError::at(i, j);
                let x = M::log(pi, pn).map_err(err)?;
                let at_p = differential::<T, M>(JacobiKind::DLogBase, pi, &x, T::zero(), v.get(i, j))
                    + differential::<T, M>(JacobiKind::DLogArg, pi, &x, T::zero(), v.get(a, b));
                *out.get_mut(i, j, k) = M::transport(pi, m, &at_p).map_err(ModelError::at(i, j))?;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`tv_diff`] under the sum of pixelwise metric pairings.
pub fn tv_diff_adjoint<T: Real, M: Manifold<T>>(
    p: &PrimalImage<T, M>,
    eta: &DualField<M::Tangent>,
    m: &M::Point,
) -> Result<TangentGrid<T, M>, ModelError> {
    check_dual_shape(p, eta)?;
    let (d1, d2) = (p.d1(), p.d2());
    let mut out = Grid::filled(d1, d2, M::Tangent::zero());
    for i in 0..d1 {
        for j in 0..d2 {
            for k in 0..2 {
                if !is_free_entry(d1, d2, i, j, k) {
                    continue;
                }
                let (a, b) = neighbor(i, j, k);
                let (pi, pn) = (p.get(i, j), p.get(a, b));
                let zeta = M::transport(m, pi, eta.get(i, j, k)).map_err(ModelError::at(i, j))?;
                let x = M::log(pi, pn).map_err(ModelError::at(i, j))?;
                let self_part = adjoint::<T, M>(JacobiKind::DLogBase, pi, &x, T::zero(), &zeta);
                let nb_part = adjoint::<T, M>(JacobiKind::DLogArg, pi, &x, T::zero(), &zeta);
                *out.get_mut(i, j) = *out.get(i, j) + self_part;
                *out.get_mut(a, b) = *out.get(a, b) + nb_part;
            }
        }
    }
    Ok(out)
}

/// Forward differences of a grid of vectors in one tangent space:
/// `(A v)_ijk = v_{ij+e_k} − v_ij`, zero on the boundary.
pub fn forward_diff<T: Real, V: TangentSpace<T>>(v: &Grid<V>) -> DualField<V> {
    let (d1, d2) = (v.d1(), v.d2());
    DualField::from_fn(d1, d2, |i, j, k| {
        if is_free_entry(d1, d2, i, j, k) {
            let (a, b) = neighbor(i, j, k);
            *v.get(a, b) - *v.get(i, j)
        } else {
            V::zero()
        }
    })
}

/// Adjoint of [`forward_diff`] under the Euclidean-in-coordinates pairing of
/// a single tangent space.
pub fn forward_diff_adjoint<T: Real, V: TangentSpace<T>>(xi: &DualField<V>) -> Grid<V> {
    let (d1, d2) = (xi.d1(), xi.d2());
    let mut out = Grid::filled(d1, d2, V::zero());
    for i in 0..d1 {
        for j in 0..d2 {
            for k in 0..2 {
                if is_free_entry(d1, d2, i, j, k) {
                    let (a, b) = neighbor(i, j, k);
                    let e = *xi.get(i, j, k);
                    *out.get_mut(i, j) = *out.get(i, j) - e;
                    *out.get_mut(a, b) = *out.get(a, b) + e;
                }
            }
        }
    }
    out
}

/// Pixelwise `γ(p_ij, h_ij; σ/(α+σ))`.
pub fn prox_data<T: Real, M: Manifold<T>>(
    p: &PrimalImage<T, M>,
    h: &PrimalImage<T, M>,
    alpha: T,
    sigma: T,
) -> Result<PrimalImage<T, M>, ModelError> {
    check_same_shape(p, h)?;
    let t = sigma / (alpha + sigma);
    let data = p
        .iter()
        .zip(h.iter())
        .enumerate()
        .map(|(idx, (a, b))| {
            let (i, j) = p.coords_of(idx);
            geodesic::<T, M>(a, b, t).map_err(ModelError::at(i, j))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Grid::from_vec(p.d1(), p.d2(), data))
}

/// Differential of [`prox_data`] in `p`, pixelwise.
pub fn d_prox_data<T: Real, M: Manifold<T>>(
    p: &PrimalImage<T, M>,
    h: &PrimalImage<T, M>,
    alpha: T,
    sigma: T,
    v: &TangentGrid<T, M>,
) -> Result<TangentGrid<T, M>, ModelError> {
    check_same_shape(p, h)?;
    check_same_shape(p, v)?;
    let t = sigma / (alpha + sigma);
    let data = (0..p.len())
        .map(|idx| {
            let (i, j) = p.coords_of(idx);
            d_geodesic_start::<T, M>(p.get(i, j), h.get(i, j), t, v.get(i, j))
                .map_err(ModelError::at(i, j))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Grid::from_vec(p.d1(), p.d2(), data))
}

/// Norms that decide the dual prox branch for each channel of one pixel.
fn branch_norms<T: Real, M: Manifold<T>>(m: &M::Point, xi: &[M::Tangent], q: TvNorm) -> [T; 2] {
    let n0 = M::norm(m, &xi[0]);
    let n1 = M::norm(m, &xi[1]);
    match q {
        TvNorm::Anisotropic => [n0, n1],
        TvNorm::Isotropic => {
            let n = (n0 * n0 + n1 * n1).sqrt();
            [n, n]
        }
    }
}

/// Dual prox on the two channels of one pixel; `free` marks non-boundary
/// channels.
pub(crate) fn prox_dual_pixel<T: Real, M: Manifold<T>>(
    m: &M::Point,
    xi: &[M::Tangent],
    free: [bool; 2],
    threshold: T,
    q: TvNorm,
) -> [M::Tangent; 2] {
    let masked = [
        if free[0] { xi[0] } else { M::Tangent::zero() },
        if free[1] { xi[1] } else { M::Tangent::zero() },
    ];
    let norms = branch_norms::<T, M>(m, &masked, q);
    let mut out = [M::Tangent::zero(); 2];
    for k in 0..2 {
        if !free[k] {
            continue;
        }
        out[k] = if norms[k] <= threshold {
            masked[k] * (T::one() / threshold)
        } else {
            masked[k] * (T::one() / norms[k])
        };
    }
    out
}

/// Derivative of [`prox_dual_pixel`] at `xi` applied to `eta`.
pub(crate) fn d_prox_dual_pixel<T: Real, M: Manifold<T>>(
    m: &M::Point,
    xi: &[M::Tangent],
    eta: &[M::Tangent],
    free: [bool; 2],
    threshold: T,
    q: TvNorm,
) -> [M::Tangent; 2] {
    let z = M::Tangent::zero();
    let xs = [if free[0] { xi[0] } else { z }, if free[1] { xi[1] } else { z }];
    let es = [if free[0] { eta[0] } else { z }, if free[1] { eta[1] } else { z }];
    let norms = branch_norms::<T, M>(m, &xs, q);
    let pair_dot = M::inner(m, &xs[0], &es[0]) + M::inner(m, &xs[1], &es[1]);
    let mut out = [z; 2];
    for k in 0..2 {
        if !free[k] {
            continue;
        }
        let n = norms[k];
        out[k] = if n <= threshold {
            es[k] * (T::one() / threshold)
        } else {
            let d = match q {
                TvNorm::Anisotropic => M::inner(m, &xs[k], &es[k]),
                TvNorm::Isotropic => pair_dot,
            };
            (es[k] - xs[k] * (d / (n * n))) * (T::one() / n)
        };
    }
    out
}

/// Proximal map of `τ(G* + β/2 ‖·‖²)`: scaling by `1/(1+βτ)` inside the
/// enlarged ball, radial projection onto the unit `q*`-ball outside it.
pub fn prox_dual<T: Real, M: Manifold<T>>(
    xi: &DualField<M::Tangent>,
    m: &M::Point,
    tau: T,
    beta: T,
    q: TvNorm,
) -> DualField<M::Tangent> {
    let (d1, d2) = (xi.d1(), xi.d2());
    let threshold = T::one() + beta * tau;
    let mut out = DualField::filled(d1, d2, M::Tangent::zero());
    for i in 0..d1 {
        for j in 0..d2 {
            let free = [is_free_entry(d1, d2, i, j, 0), is_free_entry(d1, d2, i, j, 1)];
            let r = prox_dual_pixel::<T, M>(m, xi.pixel(i, j), free, threshold, q);
            *out.get_mut(i, j, 0) = r[0];
            *out.get_mut(i, j, 1) = r[1];
        }
    }
    out
}

/// Generalized derivative of [`prox_dual`] at `xi` applied to `eta`.
pub fn d_prox_dual<T: Real, M: Manifold<T>>(
    xi: &DualField<M::Tangent>,
    eta: &DualField<M::Tangent>,
    m: &M::Point,
    tau: T,
    beta: T,
    q: TvNorm,
) -> DualField<M::Tangent> {
    let (d1, d2) = (xi.d1(), xi.d2());
    let threshold = T::one() + beta * tau;
    let mut out = DualField::filled(d1, d2, M::Tangent::zero());
    for i in 0..d1 {
        for j in 0..d2 {
            let free = [is_free_entry(d1, d2, i, j, 0), is_free_entry(d1, d2, i, j, 1)];
            let r = d_prox_dual_pixel::<T, M>(m, xi.pixel(i, j), eta.pixel(i, j), free, threshold, q);
            *out.get_mut(i, j, 0) = r[0];
            *out.get_mut(i, j, 1) = r[1];
        }
    }
    out
}
