use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{gmres, norm2, DenseMatrix, LinalgError, LuFactors};
use crate::scalar::Real;
use crate::tvmodel::NewtonSystem;

use super::SolverError;

/// Relative residual of an exact solve after refinement.
pub const EXACT_RESID_TOL: f64 = 1e-12;

/// Injected residuals are shrunk by this relative margin so that rounding
/// in the solve cannot push the achieved residual past `aₖ‖X‖`.
pub const INJECTION_MARGIN: f64 = 1e-6;

/// Relative residual `aₖ` as a function of the Newton iteration `k ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum Forcing<T> {
    Zero,
    Constant { a: T },
    /// `aₖ = c/k`.
    Decaying { c: T },
}

impl<T: Real> Forcing<T> {
    pub fn at(&self, k: usize) -> T {
        match *self {
            Forcing::Zero => T::zero(),
            Forcing::Constant { a } => a,
            Forcing::Decaying { c } => c / T::from_usize_lossy(k.max(1)),
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        let v = match *self {
            Forcing::Zero => T::zero(),
            Forcing::Constant { a } => a,
            Forcing::Decaying { c } => c,
        };
        if v >= T::zero() && v.is_finite() {
            Ok(())
        } else {
            Err(SolverError::Config(format!("relative residual must be non-negative, got {v}")))
        }
    }
}

/// How accurately each Newton system is solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum ResidualSchedule<T> {
    /// LU with partial pivoting and iterative refinement.
    Exact,
    /// GMRES to relative residual `a`.
    ConstantRel { a: T },
    /// GMRES to relative residual `c/k`.
    DecayingRel { c: T },
    /// Exact solve of `V d = −X + r` with a random `r` of norm `aₖ‖X‖`.
    InjectedRandom { forcing: Forcing<T>, seed: u64 },
}

impl<T: Real> ResidualSchedule<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        match *self {
            ResidualSchedule::Exact => Ok(()),
            ResidualSchedule::ConstantRel { a } => Forcing::Constant { a }.validate(),
            ResidualSchedule::DecayingRel { c } => Forcing::Decaying { c }.validate(),
            ResidualSchedule::InjectedRandom { forcing, .. } => forcing.validate(),
        }
    }

    /// Allowed relative residual `aₖ` at Newton iteration `k ≥ 1`.
    pub fn relative_residual(&self, k: usize) -> T {
        match *self {
            ResidualSchedule::Exact => T::zero(),
            ResidualSchedule::ConstantRel { a } => a,
            ResidualSchedule::DecayingRel { c } => Forcing::Decaying { c }.at(k),
            ResidualSchedule::InjectedRandom { forcing, .. } => forcing.at(k),
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            ResidualSchedule::InjectedRandom { seed, .. } => seed,
            _ => 0,
        }
    }

    /// Short name for file names and tables.
    pub fn label(&self) -> String {
        let f = |v: T| format!("{}", v.to_f64_lossy());
        match *self {
            ResidualSchedule::Exact => "exact".into(),
            ResidualSchedule::ConstantRel { a } => format!("krylov_const_{}", f(a)),
            ResidualSchedule::DecayingRel { c } => format!("krylov_decay_{}", f(c)),
            ResidualSchedule::InjectedRandom { forcing, .. } => match forcing {
                Forcing::Zero => "injected_zero".into(),
                Forcing::Constant { a } => format!("injected_const_{}", f(a)),
                Forcing::Decaying { c } => format!("injected_decay_{}", f(c)),
            },
        }
    }
}

/// Solution of one Newton system in stacked coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonDirection<T> {
    pub coords: Vec<T>,
    /// `‖V d + X‖`.
    pub achieved_resid: T,
    /// `aₖ‖X‖`, or the exact-solve tolerance when `aₖ = 0`.
    pub allowed_resid: T,
    pub krylov_iters: Option<usize>,
}

fn residual<T: Real>(a: &DenseMatrix<T>, x: &[T], b: &[T]) -> Vec<T> {
    a.mul_vec(x).iter().zip(b).map(|(&ax, &bi)| bi - ax).collect()
}

/// LU solve followed by up to two refinement steps.
fn exact_solve<T: Real>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let lu = LuFactors::new(a)?;
    let mut x = lu.solve(b);
    let tol = T::lit(EXACT_RESID_TOL) * norm2(b);
    for _ in 0..2 {
        let r = residual(a, &x, b);
        if norm2(&r) <= tol {
            break;
        }
        for (xi, di) in x.iter_mut().zip(lu.solve(&r)) {
            *xi += di;
        }
    }
    Ok(x)
}

/// Solves `V d = −X` at Newton iteration `k ≥ 1` as prescribed by
/// `schedule`. `x_norm` is `‖X‖` at the current iterate.
pub fn solve_newton<T: Real>(
    system: &NewtonSystem<T>,
    schedule: &ResidualSchedule<T>,
    k: usize,
    x_norm: T,
    rng: &mut ChaCha8Rng,
) -> Result<NewtonDirection<T>, SolverError> {
    let a = &system.matrix;
    let b = &system.rhs;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteIterate { iter: k });
    }
    let rel = schedule.relative_residual(k);
    let b_norm = norm2(b);
    let allowed = if rel > T::zero() {
        rel * x_norm
    } else {
        T::lit(EXACT_RESID_TOL) * b_norm
    };
    let (coords, krylov_iters) = match *schedule {
        ResidualSchedule::Exact => (exact_solve(a, b)?, None),
        ResidualSchedule::ConstantRel { .. } | ResidualSchedule::DecayingRel { .. } => {
            let tol = if b_norm > T::zero() {
                rel * x_norm.min(b_norm) / b_norm
            } else {
                rel
            };
            let g = gmres(a, b, tol, b.len())?;
            (g.x, Some(g.iterations))
        }
        ResidualSchedule::InjectedRandom { .. } => {
            if rel == T::zero() {
                (exact_solve(a, b)?, None)
            } else {
                let u: Vec<T> = (0..b.len())
                    .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                let scale = rel * (T::one() - T::lit(INJECTION_MARGIN)) * x_norm.min(b_norm) / norm2(&u);
                let shifted: Vec<T> = b.iter().zip(&u).map(|(&bi, &ui)| bi + ui * scale).collect();
                (exact_solve(a, &shifted)?, None)
            }
        }
    };
    let achieved = norm2(&residual(a, &coords, b));
    if rel > T::zero() && !(achieved <= allowed) {
        return Err(SolverError::ResidualBound {
            achieved: achieved.to_f64_lossy(),
            allowed: allowed.to_f64_lossy(),
        });
    }
    Ok(NewtonDirection {
        coords,
        achieved_resid: achieved,
        allowed_resid: allowed,
        krylov_iters,
    })
}
