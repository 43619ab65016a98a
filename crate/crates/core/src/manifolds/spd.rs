use crate::scalar::Real;
use crate::small::{sym_exp, sym_inv, sym_log, Mat3, SymEigen};

use super::{CurvatureFrame, GeometryError, Manifold, ManifoldKind};

/// Symmetric positive definite 3×3 matrices with the affine-invariant metric
/// `⟨X, Y⟩_p = tr(p⁻¹ X p⁻¹ Y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Spd3;

/// `(p^{1/2}, p^{-1/2})` from one eigendecomposition.
fn sqrt_pair<T: Real>(p: &Mat3<T>) -> (Mat3<T>, Mat3<T>) {
    let e = SymEigen::new(p);
    (e.map(|x| x.sqrt()), e.map(|x| T::one() / x.sqrt()))
}

/// Index pairs of the canonical symmetric basis at the identity.
const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

impl<T: Real> Manifold<T> for Spd3 {
    type Point = Mat3<T>;
    type Tangent = Mat3<T>;

    const DIM: usize = 6;
    const KIND: ManifoldKind = ManifoldKind::Spd3;

    fn inner(p: &Mat3<T>, x: &Mat3<T>, y: &Mat3<T>) -> T {
        let pi = sym_inv(p);
        let a = pi.matmul(x);
        let b = pi.matmul(y);
        a.transpose().frob_dot(&b)
    }

    fn dist(p: &Mat3<T>, q: &Mat3<T>) -> T {
        let (_, si) = sqrt_pair(p);
        SymEigen::new(&si.congruence(q))
            .values
            .iter()
            .map(|&l| {
                let v = l.ln();
                v * v
            })
            .sum::<T>()
            .sqrt()
    }

    fn exp(p: &Mat3<T>, x: &Mat3<T>) -> Mat3<T> {
        if *x == Mat3::zero() {
            return *p;
        }
        let (s, si) = sqrt_pair(p);
        s.congruence(&sym_exp(&si.congruence(x)))
    }

    fn log(p: &Mat3<T>, q: &Mat3<T>) -> Result<Mat3<T>, GeometryError> {
        if p == q {
            return Ok(Mat3::zero());
        }
        let (s, si) = sqrt_pair(p);
        Ok(s.congruence(&sym_log(&si.congruence(q))))
    }

    fn transport(p: &Mat3<T>, q: &Mat3<T>, x: &Mat3<T>) -> Result<Mat3<T>, GeometryError> {
        if p == q {
            return Ok(*x);
        }
        let (s, si) = sqrt_pair(p);
        let half = SymEigen::new(&si.congruence(q)).map(|l| l.sqrt());
        let e = s.matmul(&half).matmul(&si);
        Ok(e.congruence(x))
    }

    fn transport_along(p: &Mat3<T>, x: &Mat3<T>, v: &Mat3<T>) -> Mat3<T> {
        let (s, si) = sqrt_pair(p);
        let half = sym_exp(&(si.congruence(x) * T::lit(0.5)));
        let e = s.matmul(&half).matmul(&si);
        e.congruence(v)
    }

    fn onb(p: &Mat3<T>) -> Vec<Mat3<T>> {
        let (s, _) = sqrt_pair(p);
        let id = Mat3::identity();
        SYM_PAIRS
            .iter()
            .map(|&(i, j)| s.congruence(&Mat3::sym_basis_element(&id, i, j)))
            .collect()
    }

    fn curvature_frame(p: &Mat3<T>, u: &Mat3<T>) -> CurvatureFrame<Mat3<T>, Mat3<T>, T> {
        let (s, si) = sqrt_pair(p);
        let e = SymEigen::new(&si.congruence(u));
        let quarter = T::lit(0.25);
        let mut basis = Vec::with_capacity(6);
        let mut kappas = Vec::with_capacity(6);
        for &(i, j) in SYM_PAIRS.iter() {
            basis.push(s.congruence(&Mat3::sym_basis_element(&e.vectors, i, j)));
            let d = e.values[i] - e.values[j];
            kappas.push(-quarter * d * d);
        }
        CurvatureFrame {
            anchor: *p,
            direction: *u,
            basis,
            kappas,
        }
    }

    fn project_tangent(_p: &Mat3<T>, x: &Mat3<T>) -> Mat3<T> {
        x.symmetrize()
    }

    fn project_point(p: &Mat3<T>) -> Mat3<T> {
        p.symmetrize()
    }

    fn validate(p: &Mat3<T>) -> Result<(), GeometryError> {
        if !p.is_finite() {
            return Err(GeometryError::InvalidPoint(format!("{p:?} is not finite")));
        }
        if p.asymmetry() > T::lit(1e-12) * p.max_abs().max(T::one()) {
            return Err(GeometryError::InvalidPoint(format!(
                "{p:?} is not symmetric"
            )));
        }
        let lmin = SymEigen::new(p).values[0];
        if !(lmin > T::zero()) {
            return Err(GeometryError::InvalidPoint(format!(
                "{p:?} has smallest eigenvalue {lmin}"
            )));
        }
        Ok(())
    }

    fn point_is_finite(p: &Mat3<T>) -> bool {
        p.is_finite()
    }

    fn coords(p: &Mat3<T>, basis: &[Mat3<T>], x: &Mat3<T>) -> Vec<T> {
        let pi = sym_inv(p);
        let a = pi.matmul(x).matmul(&pi);
        basis.iter().map(|b| a.frob_dot(b)).collect()
    }
}
