//! PD-RSSN and its inexact variant, the lRCPA baseline, and convergence
//! traces.
//!
//! Every run starts a [`Session`] that evaluates `‖X‖` at each iterate and
//! appends a [`TraceRow`]. The relative error is measured against the first
//! row of the session, so lRCPA pre-steps count towards it.

mod linear;
mod trace;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::{norm2, LinalgError};
use crate::manifolds::{Manifold, TangentSpace};
use crate::scalar::Real;
use crate::tvmodel::{
    forward_diff, forward_diff_adjoint, prox_data, prox_dual, DualField, Grid, ModelError, PrimalImage,
    TvProblem,
};

pub use linear::{
    solve_newton, Forcing, NewtonDirection, ResidualSchedule, EXACT_RESID_TOL, INJECTION_MARGIN,
};
pub use trace::{eps_rel, q_rate, SolverTrace, Stage, TraceRow};

/// Consecutive unchanged iterates that count as stagnation.
pub const STAGNATION_STEPS: usize = 3;
const STAGNATION_DISPLACEMENT: f64 = 1e-12;
const STAGNATION_STEP_NORM: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("singular Newton system: {0}")]
    SingularSystem(#[from] LinalgError),
    #[error("non-finite iterate at iteration {iter}")]
    NonFiniteIterate { iter: usize },
    #[error(
        "Newton iterate unchanged for {steps} steps up to iteration {iter} although the step \
         norm is {step_norm:e}; on the sphere this happens when step lengths are multiples of 2π"
    )]
    Stagnation {
        iter: usize,
        steps: usize,
        step_norm: f64,
    },
    #[error("linear residual {achieved:e} exceeds the allowed {allowed:e}")]
    ResidualBound { achieved: f64, allowed: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// Dual starting point of PD-RSSN.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// `ξ⁰ = 0`.
    Cold,
    /// One lRCPA dual step from `ξ = 0`.
    DualWarm,
    /// lRCPA iterations until `presteps_eps` is reached.
    Presteps,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct SolverConfig<T> {
    /// Newton iterations, or lRCPA iterations for a standalone lRCPA run.
    pub max_iters: usize,
    pub eps_rel_stop: T,
    /// lRCPA acceleration; zero disables it.
    pub gamma: T,
    pub presteps_eps: T,
    pub max_presteps: usize,
    pub warm_start: WarmStart,
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters == 0 {
            return Err(SolverError::Config("max_iters must be at least 1".into()));
        }
        if !(self.eps_rel_stop > T::zero()) {
            return Err(SolverError::Config("eps_rel_stop must be positive".into()));
        }
        if !(self.gamma >= T::zero() && self.gamma.is_finite()) {
            return Err(SolverError::Config("gamma must be non-negative".into()));
        }
        if !(self.presteps_eps > T::zero()) {
            return Err(SolverError::Config("presteps_eps must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50,
            eps_rel_stop: T::lit(1e-10),
            gamma: T::lit(0.2),
            presteps_eps: T::lit(0.5),
            max_presteps: 10_000,
            warm_start: WarmStart::Presteps,
        }
    }
}

/// Final state of a run. `error` is set when the run stopped on a failure;
/// `p` and `xi` are then the last accepted iterate.
#[derive(Clone, Debug)]
pub struct SolverRun<T: Real, M: Manifold<T>> {
    pub p: PrimalImage<T, M>,
    pub xi: DualField<M::Tangent>,
    pub trace: SolverTrace,
    pub error: Option<SolverError>,
}

impl<T: Real, M: Manifold<T>> SolverRun<T, M> {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Final iterate, or the error with the last accepted iterate.
type Outcome<T, M> = Result<
    (PrimalImage<T, M>, DualField<<M as Manifold<T>>::Tangent>),
    (SolverError, PrimalImage<T, M>, DualField<<M as Manifold<T>>::Tangent>),
>;

/// `√(Σ d²(pᵢ, qᵢ))`.
pub fn product_dist<T: Real, M: Manifold<T>>(p: &PrimalImage<T, M>, q: &PrimalImage<T, M>) -> T {
    p.iter()
        .zip(q.iter())
        .map(|(a, b)| {
            let d = M::dist(a, b);
            d * d
        })
        .sum::<T>()
        .sqrt()
}

/// `prox_τG*(τ A[log_m p⁰])`, the dual iterate after one lRCPA dual step
/// from zero.
pub fn warm_start_dual<T: Real, M: Manifold<T>>(
    problem: &TvProblem<T, M>,
    p0: &PrimalImage<T, M>,
) -> Result<DualField<M::Tangent>, ModelError> {
    let prm = &problem.params;
    let arg = problem.dual_argument(p0, &problem.zero_dual())?;
    Ok(prox_dual::<T, M>(&arg, &prm.base_point, prm.tau, prm.beta, prm.q))
}

/// Shared state of one solver run: the problem, an optional reference
/// solution, the clock and the trace.
pub struct Session<'a, T: Real, M: Manifold<T>> {
    problem: &'a TvProblem<T, M>,
    reference: Option<&'a PrimalImage<T, M>>,
    start: Instant,
    x0: Option<f64>,
    trace: SolverTrace,
}

impl<'a, T: Real, M: Manifold<T>> Session<'a, T, M> {
    pub fn new(problem: &'a TvProblem<T, M>, reference: Option<&'a PrimalImage<T, M>>) -> Self {
        Session {
            problem,
            reference,
            start: Instant::now(),
            x0: None,
            trace: SolverTrace::default(),
        }
    }

    pub fn trace(&self) -> &SolverTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SolverTrace {
        self.trace
    }

    /// Evaluates `‖X‖` at `(p, ξ)`, appends a row and returns `(‖X‖, ε_rel)`.
    fn record(
        &mut self,
        stage: Stage,
        iter: usize,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
        resid: Option<T>,
    ) -> Result<(T, f64), SolverError> {
        let x = self.problem.vector_field(p, xi)?;
        let x_norm = self.problem.field_norm(p, &x);
        if !x_norm.is_finite() {
            return Err(SolverError::NonFiniteIterate { iter });
        }
        let xf = x_norm.to_f64_lossy();
        let eps = match self.x0 {
            None => {
                self.x0 = Some(xf);
                1.0
            }
            Some(x0) if x0 > 0.0 => xf / x0,
            Some(_) => 0.0,
        };
        let cost = self.problem.cost(p)?.to_f64_lossy();
        self.trace.rows.push(TraceRow {
            iter,
            stage,
            x_norm: xf,
            eps_rel: eps,
            cost,
            resid_norm: resid.map(|r| r.to_f64_lossy()),
            dist_ref: self.reference.map(|r| product_dist::<T, M>(p, r).to_f64_lossy()),
            cpu_seconds: self.start.elapsed().as_secs_f64(),
        });
        Ok((x_norm, eps))
    }

    /// lRCPA from `(p0, ξ0)` until `ε_rel ≤ eps_stop`, `X = 0` or `max_iters`
    /// iterations. Steps start at the problem's `σ, τ`; with `γ > 0` they
    /// are updated by `θ = 1/√(1+2γσ)`, `σ ← θσ`, `τ ← τ/θ`. The trace
    /// always evaluates `X` with the problem's fixed `σ, τ`.
    pub fn lrcpa(
        &mut self,
        p0: PrimalImage<T, M>,
        xi0: DualField<M::Tangent>,
        max_iters: usize,
        eps_stop: f64,
        gamma: T,
        stage: Stage,
    ) -> Outcome<T, M> {
        let prm = self.problem.params;
        let m = prm.base_point;
        let (mut p, mut xi) = (p0, xi0);
        let mut p_bar = p.clone();
        let (mut sigma, mut tau) = (prm.sigma, prm.tau);
        let (mut x_norm, mut eps) = match self.record(stage, 0, &p, &xi, None) {
            Ok(v) => v,
            Err(e) => return Err((e, p, xi)),
        };
        for n in 1..=max_iters {
            if eps <= eps_stop || x_norm == T::zero() {
                break;
            }
            let step = || -> Result<_, SolverError> {
                let a = forward_diff(&self.problem.log_base(&p_bar)?);
                let mut arg = xi.clone();
                for (o, v) in arg.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    *o = *o + *v * tau;
                }
                let xi_new = prox_dual::<T, M>(&arg, &m, tau, prm.beta, prm.q);
                let push = forward_diff_adjoint(&xi_new).map(|v| *v * (-sigma));
                let moved = p
                    .as_slice()
                    .iter()
                    .zip(push.as_slice())
                    .enumerate()
                    .map(|(idx, (pi, w))| {
                        let (i, j) = p.coords_of(idx);
                        M::transport(&m, pi, w)
                            .map(|z| M::exp(pi, &z))
                            .map_err(ModelError::at(i, j))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let moved = Grid::from_vec(p.d1(), p.d2(), moved);
                let p_new = prox_data::<T, M>(&moved, &self.problem.data, prm.alpha, sigma)?;
                let theta = if gamma > T::zero() {
                    T::one() / (T::one() + T::lit(2.0) * gamma * sigma).sqrt()
                } else {
                    T::one()
                };
                let bar = p_new
                    .as_slice()
                    .iter()
                    .zip(p.as_slice())
                    .enumerate()
                    .map(|(idx, (pn, po))| {
                        let (i, j) = p.coords_of(idx);
                        M::log(pn, po)
                            .map(|v| M::exp(pn, &(v * (-theta))))
                            .map_err(ModelError::at(i, j))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((p_new, xi_new, Grid::from_vec(p.d1(), p.d2(), bar), theta))
            };
            let (p_new, xi_new, bar, theta) = match step() {
                Ok(v) => v,
                Err(e) => return Err((e, p, xi)),
            };
            if p_new.iter().any(|v| !M::point_is_finite(v)) {
                return Err((SolverError::NonFiniteIterate { iter: n }, p, xi));
            }
            p = p_new;
            xi = xi_new;
            p_bar = bar;
            sigma *= theta;
            tau /= theta;
            (x_norm, eps) = match self.record(stage, n, &p, &xi, None) {
                Ok(v) => v,
                Err(e) => return Err((e, p, xi)),
            };
        }
        Ok((p, xi))
    }

    /// PD-RSSN from `(p0, ξ0)`: Newton steps on the reduced vector field
    /// until `ε_rel ≤ eps_rel_stop`, `X = 0` or `max_iters` steps.
    pub fn pd_rssn(
        &mut self,
        p0: PrimalImage<T, M>,
        xi0: DualField<M::Tangent>,
        cfg: &SolverConfig<T>,
        schedule: &ResidualSchedule<T>,
    ) -> Outcome<T, M> {
        let problem = self.problem;
        let m = problem.params.base_point;
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed());
        let (mut p, mut xi) = (p0, xi0);
        let (mut x_norm, mut eps) = match self.record(Stage::Newton, 0, &p, &xi, None) {
            Ok(v) => v,
            Err(e) => return Err((e, p, xi)),
        };
        let stop = cfg.eps_rel_stop.to_f64_lossy();
        let mut unchanged = 0;
        for k in 1..=cfg.max_iters {
            if eps <= stop || x_norm == T::zero() {
                break;
            }
            let mut step = || -> Result<_, SolverError> {
                let sys = problem.newton_system(&p, &xi)?;
                let dir = solve_newton(&sys, schedule, k, x_norm, &mut rng)?;
                let d = problem.field_from_coords(&p, &dir.coords);
                let (p_new, xi_new) = problem.apply_step(&p, &xi, &d);
                Ok((p_new, xi_new, dir))
            };
            let (p_new, xi_new, dir) = match step() {
                Ok(v) => v,
                Err(e) => return Err((e, p, xi)),
            };
            if p_new.iter().any(|v| !M::point_is_finite(v))
                || xi_new.as_slice().iter().any(|v| !v.is_finite())
            {
                return Err((SolverError::NonFiniteIterate { iter: k }, p, xi));
            }
            let moved: T = p
                .iter()
                .zip(p_new.iter())
                .map(|(a, b)| {
                    let d = M::dist(a, b);
                    d * d
                })
                .chain(
                    xi.as_slice()
                        .iter()
                        .zip(xi_new.as_slice())
                        .map(|(a, b)| {
                            let v = *b - *a;
                            M::inner(&m, &v, &v)
                        }),
                )
                .sum::<T>()
                .sqrt();
            let step_norm = norm2(&dir.coords);
            if moved < T::lit(STAGNATION_DISPLACEMENT) && step_norm >= T::lit(STAGNATION_STEP_NORM) {
                unchanged += 1;
            } else {
                unchanged = 0;
            }
            p = p_new;
            xi = xi_new;
            (x_norm, eps) = match self.record(Stage::Newton, k, &p, &xi, Some(dir.achieved_resid)) {
                Ok(v) => v,
                Err(e) => return Err((e, p, xi)),
            };
            if unchanged >= STAGNATION_STEPS {
                let err = SolverError::Stagnation {
                    iter: k,
                    steps: unchanged,
                    step_norm: step_norm.to_f64_lossy(),
                };
                return Err((err, p, xi));
            }
        }
        Ok((p, xi))
    }
}

fn finish<T: Real, M: Manifold<T>>(
    session: Session<'_, T, M>,
    result: Outcome<T, M>,
) -> SolverRun<T, M> {
    let trace = session.into_trace();
    match result {
        Ok((p, xi)) => SolverRun {
            p,
            xi,
            trace,
            error: None,
        },
        Err((e, p, xi)) => SolverRun {
            p,
            xi,
            trace,
            error: Some(e),
        },
    }
}

/// PD-RSSN on `problem` from `p⁰ = h` with the dual start chosen by
/// `cfg.warm_start`.
pub fn pd_rssn<T: Real, M: Manifold<T>>(
    problem: &TvProblem<T, M>,
    cfg: &SolverConfig<T>,
    schedule: &ResidualSchedule<T>,
    reference: Option<&PrimalImage<T, M>>,
) -> SolverRun<T, M> {
    let mut session = Session::new(problem, reference);
    let p0 = problem.data.clone();
    let zero = problem.zero_dual();
    let checked = cfg.validate().and(schedule.validate());
    let result = match (checked, cfg.warm_start) {
        (Err(e), _) => Err((e, p0, zero)),
        (Ok(()), WarmStart::Cold) => session.pd_rssn(p0, zero, cfg, schedule),
        (Ok(()), WarmStart::DualWarm) => match warm_start_dual(problem, &p0) {
            Ok(xi0) => session.pd_rssn(p0, xi0, cfg, schedule),
            Err(e) => Err((e.into(), p0, zero)),
        },
        (Ok(()), WarmStart::Presteps) => {
            let eps = cfg.presteps_eps.to_f64_lossy();
            match session.lrcpa(p0, zero, cfg.max_presteps, eps, cfg.gamma, Stage::Prestep) {
                Ok((p, xi)) => session.pd_rssn(p, xi, cfg, schedule),
                Err(e) => Err(e),
            }
        }
    };
    finish(session, result)
}

/// Standalone lRCPA from `(h, 0)` for `cfg.max_iters` iterations or until
/// `cfg.eps_rel_stop`.
pub fn lrcpa<T: Real, M: Manifold<T>>(
    problem: &TvProblem<T, M>,
    cfg: &SolverConfig<T>,
    reference: Option<&PrimalImage<T, M>>,
) -> SolverRun<T, M> {
    let mut session = Session::new(problem, reference);
    let p0 = problem.data.clone();
    let zero = problem.zero_dual();
    let result = match cfg.validate() {
        Err(e) => Err((e, p0, zero)),
        Ok(()) => session.lrcpa(
            p0,
            zero,
            cfg.max_iters,
            cfg.eps_rel_stop.to_f64_lossy(),
            cfg.gamma,
            Stage::Lrcpa,
        ),
    };
    finish(session, result)
}

#[cfg(test)]
mod tests;
