use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::manifolds::{geodesic, random_tangent, GeometryError, Manifold, Spd3, Sphere2};
use crate::scalar::Real;
use crate::small::{Mat3, Vec3};
use crate::tvmodel::{Grid, PrimalImage};

/// `2ℓ × 1` signal: `p̂₁` on the first `ℓ` samples, `p̂₂` on the rest.
pub fn gen_piecewise_signal<T: Real, M: Manifold<T>>(
    p1: &M::Point,
    p2: &M::Point,
    ell: usize,
) -> PrimalImage<T, M> {
    Grid::from_fn(2 * ell, 1, |i, _| if i < ell { *p1 } else { *p2 })
}

/// Geodesic fraction `δ = min(1/2, (α/ℓ)/d)` by which each half of the
/// piecewise signal moves towards the other; zero when `d = 0`.
pub fn rof_delta<T: Real>(dist: T, ell: usize, alpha: T) -> T {
    if dist == T::zero() {
        return T::zero();
    }
    let shrink = alpha / T::from_usize_lossy(ell) / dist;
    shrink.min(T::lit(0.5))
}

/// Minimizer of the ℓ²-TV cost for [`gen_piecewise_signal`] data: the two
/// halves are `γ(p̂₁, p̂₂; δ)` and `γ(p̂₂, p̂₁; δ)`.
pub fn exact_rof_minimizer<T: Real, M: Manifold<T>>(
    p1: &M::Point,
    p2: &M::Point,
    ell: usize,
    alpha: T,
) -> Result<PrimalImage<T, M>, GeometryError> {
    let delta = rof_delta(M::dist(p1, p2), ell, alpha);
    let a = geodesic::<T, M>(p1, p2, delta)?;
    let b = geodesic::<T, M>(p2, p1, delta)?;
    Ok(gen_piecewise_signal::<T, M>(&a, &b, ell))
}

/// Endpoints `(1, ±1, 0)/√2` of the sphere signal and the base point
/// `(1, 0, 0)`.
pub fn sphere_signal_setup<T: Real>() -> (Vec3<T>, Vec3<T>, Vec3<T>) {
    let r = T::lit(0.5).sqrt();
    let z = T::zero();
    (
        Vec3::new(r, r, z),
        Vec3::new(r, -r, z),
        Vec3::new(T::one(), z, z),
    )
}

/// Endpoints `exp_I(±2X/‖X‖)` of the SPD signal and the base point `I`.
pub fn spd_signal_setup<T: Real>() -> (Mat3<T>, Mat3<T>, Mat3<T>) {
    let id = Mat3::identity();
    let x = Mat3::from_rows([[1.0, 2.0, 2.0], [2.0, 2.0, 0.0], [2.0, 0.0, 6.0]]);
    let v = x * (T::lit(2.0) / Spd3::norm(&id, &x));
    (Spd3::exp(&id, &v), Spd3::exp(&id, &(-v)), id)
}

/// Crossing point `(1, 0, 1)/√2` of the spherical lemniscate.
pub fn lemniscate_center<T: Real>() -> Vec3<T> {
    let r = T::lit(0.5).sqrt();
    Vec3::new(r, T::zero(), r)
}

/// `n` samples of Bernoulli's lemniscate with half-width `π/2`, wrapped
/// onto the sphere by `exp` at [`lemniscate_center`]. Sample `k` has
/// parameter `t = 2πk/n`; the curve crosses the center at `t = π/2, 3π/2`.
pub fn gen_lemniscate<T: Real>(n: usize) -> PrimalImage<T, Sphere2> {
    let c = lemniscate_center::<T>();
    let basis = Sphere2::onb(&c);
    let a = T::FRAC_PI_2();
    Grid::from_fn(n, 1, |k, _| {
        let t = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
        let (s, co) = t.sin_cos();
        let den = T::one() + s * s;
        let x = a * co / den;
        let y = a * co * s / den;
        Sphere2::exp(&c, &(basis[0] * x + basis[1] * y))
    })
}

fn rot_x<T: Real>(a: T) -> Mat3<T> {
    let (s, c) = a.sin_cos();
    let (o, z) = (T::one(), T::zero());
    Mat3([[o, z, z], [z, c, -s], [z, s, c]])
}

fn rot_z<T: Real>(a: T) -> Mat3<T> {
    let (s, c) = a.sin_cos();
    let (o, z) = (T::one(), T::zero());
    Mat3([[c, -s, z], [s, c, z], [z, z, o]])
}

/// `N × N` sphere image `R_z(πi/(N−1)) R_x(πj/(N−1)) e_y`: a half rotation
/// about each axis across the image. All points have `z ≥ 0`.
pub fn gen_sphere_image<T: Real>(n: usize) -> PrimalImage<T, Sphere2> {
    let last = T::from_usize_lossy(n.max(2) - 1);
    let ey = Vec3::unit(1);
    Grid::from_fn(n, n, |i, j| {
        let a = T::PI() * T::from_usize_lossy(i) / last;
        let b = T::PI() * T::from_usize_lossy(j) / last;
        rot_z(a).mul_vec(&rot_x(b).mul_vec(&ey)).normalized()
    })
}

/// `N × N` SPD image with eigenvalues in `[0.5, 4]`: eigenvectors rotate
/// smoothly with the pixel position, and the spectrum jumps between the
/// left and right halves.
pub fn gen_spd_image<T: Real>(n: usize) -> PrimalImage<T, Spd3> {
    let last = T::from_usize_lossy(n.max(2) - 1);
    let half = n / 2;
    Grid::from_fn(n, n, |i, j| {
        let u = T::from_usize_lossy(i) / last;
        let v = T::from_usize_lossy(j) / last;
        let r = rot_z(T::FRAC_PI_2() * u).matmul(&rot_x(T::FRAC_PI_4() * v));
        let d = if j < half {
            Mat3::diag(T::lit(0.5) + u, T::one(), T::lit(2.0))
        } else {
            Mat3::diag(T::lit(3.0) + u, T::lit(1.5) + v, T::lit(0.8))
        };
        r.congruence(&d)
    })
}

/// Pixelwise `exp(p, ε)` with `ε` normal in `onb(p)` coordinates.
pub fn add_noise<T: Real, M: Manifold<T>>(
    image: &PrimalImage<T, M>,
    stddev: T,
    seed: u64,
) -> PrimalImage<T, M> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    image.map(|p| M::exp(p, &random_tangent::<T, M, _>(p, stddev, &mut rng)))
}
