use crate::scalar::Real;
use crate::small::Vec3;

use super::{CurvatureFrame, GeometryError, Manifold, ManifoldKind};

/// Unit sphere in ℝ³ with the round metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sphere2;

/// Logs closer than this to the cut locus are rejected.
pub(crate) const ANTIPODAL_MARGIN: f64 = 1e-9;

impl<T: Real> Manifold<T> for Sphere2 {
    type Point = Vec3<T>;
    type Tangent = Vec3<T>;

    const DIM: usize = 2;
    const KIND: ManifoldKind = ManifoldKind::Sphere2;

    #[inline]
    fn inner(_p: &Vec3<T>, x: &Vec3<T>, y: &Vec3<T>) -> T {
        x.dot(y)
    }

    #[inline]
    fn norm(_p: &Vec3<T>, x: &Vec3<T>) -> T {
        x.norm()
    }

    fn dist(p: &Vec3<T>, q: &Vec3<T>) -> T {
        p.cross(q).norm().atan2(p.dot(q))
    }

    fn exp(p: &Vec3<T>, x: &Vec3<T>) -> Vec3<T> {
        let theta = x.norm();
        if theta == T::zero() {
            return *p;
        }
        (*p * theta.cos() + *x * (theta.sin() / theta)).normalized()
    }

    fn log(p: &Vec3<T>, q: &Vec3<T>) -> Result<Vec3<T>, GeometryError> {
        if p == q {
            return Ok(Vec3::zero());
        }
        let theta = Self::dist(p, q);
        if theta > T::PI() - T::lit(ANTIPODAL_MARGIN) {
            return Err(GeometryError::Injectivity {
                dist: theta.to_f64_lossy(),
            });
        }
        let v = *q - *p * p.dot(q);
        let vn = v.norm();
        if vn == T::zero() {
            return Ok(Vec3::zero());
        }
        let v = v * (theta / vn);
        Ok(v - *p * p.dot(&v))
    }

    fn transport(p: &Vec3<T>, q: &Vec3<T>, x: &Vec3<T>) -> Result<Vec3<T>, GeometryError> {
        let c = p.dot(q);
        let theta = Self::dist(p, q);
        if theta > T::PI() - T::lit(ANTIPODAL_MARGIN) {
            return Err(GeometryError::Injectivity {
                dist: theta.to_f64_lossy(),
            });
        }
        if theta == T::zero() {
            return Ok(*x);
        }
        let y = *x - (*p + *q) * (q.dot(x) / (T::one() + c));
        Ok(y - *q * q.dot(&y))
    }

    fn transport_along(p: &Vec3<T>, x: &Vec3<T>, v: &Vec3<T>) -> Vec3<T> {
        let theta = x.norm();
        if theta == T::zero() {
            return *v;
        }
        let u = *x * (T::one() / theta);
        let y = *v - (u * (T::one() - theta.cos()) + *p * theta.sin()) * u.dot(v);
        let q = Self::exp(p, x);
        y - q * q.dot(&y)
    }

    fn onb(p: &Vec3<T>) -> Vec<Vec3<T>> {
        let mut axis = 0;
        for i in 1..3 {
            if p[i].abs() < p[axis].abs() {
                axis = i;
            }
        }
        let a = Vec3::unit(axis);
        let e1 = (a - *p * p.dot(&a)).normalized();
        let e2 = p.cross(&e1);
        vec![e1, e2]
    }

    fn curvature_frame(p: &Vec3<T>, u: &Vec3<T>) -> CurvatureFrame<Vec3<T>, Vec3<T>, T> {
        let basis = if u.norm() == T::zero() {
            Self::onb(p)
        } else {
            let e1 = u.normalized();
            vec![e1, p.cross(&e1)]
        };
        CurvatureFrame {
            anchor: *p,
            direction: *u,
            basis,
            kappas: vec![T::zero(), T::one()],
        }
    }

    fn project_tangent(p: &Vec3<T>, x: &Vec3<T>) -> Vec3<T> {
        *x - *p * p.dot(x)
    }

    fn project_point(p: &Vec3<T>) -> Vec3<T> {
        p.normalized()
    }

    fn validate(p: &Vec3<T>) -> Result<(), GeometryError> {
        if !p.is_finite() || (p.norm() - T::one()).abs() > T::lit(1e-12) {
            return Err(GeometryError::InvalidPoint(format!(
                "{p:?} is not a unit vector"
            )));
        }
        Ok(())
    }

    fn point_is_finite(p: &Vec3<T>) -> bool {
        p.is_finite()
    }
}
