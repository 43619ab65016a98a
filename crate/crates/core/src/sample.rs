//! Seeded random points for tests, benchmarks and synthetic data.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;
use crate::small::{sym_exp, Mat3, Vec3};

/// Uniformly distributed point on the unit sphere.
pub fn random_sphere_point<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Vec3<T> {
    loop {
        let v: Vec3<T> = Vec3::new(
            T::lit(rng.sample(StandardNormal)),
            T::lit(rng.sample(StandardNormal)),
            T::lit(rng.sample(StandardNormal)),
        );
        let n = v.norm();
        if n > T::lit(1e-3) {
            return v * (T::one() / n);
        }
    }
}

/// `Exp(S)` for a symmetric `S` with standard normal entries scaled by 0.5.
pub fn random_spd_point<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Mat3<T> {
    let mut s = Mat3::zero();
    for i in 0..3 {
        for j in i..3 {
            let z: f64 = rng.sample(StandardNormal);
            s.0[i][j] = T::lit(0.5 * z);
            s.0[j][i] = s.0[i][j];
        }
    }
    sym_exp(&s)
}
