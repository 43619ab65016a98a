use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dense::DenseMatrix;
use crate::experiments::{exact_rof_minimizer, gen_piecewise_signal, gen_sphere_image, sphere_signal_setup};
use crate::manifolds::Sphere2;
use crate::small::Vec3;
use crate::tvmodel::{IndexMap, NewtonSystem, TvNorm, TvParams};

fn system(matrix: DenseMatrix<f64>, rhs: Vec<f64>) -> NewtonSystem<f64> {
    let n = rhs.len();
    NewtonSystem {
        matrix,
        rhs,
        index_map: IndexMap::new(n, 1, 1),
    }
}

fn random_system(n: usize, seed: u64) -> NewtonSystem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    for i in 0..n {
        a[(i, i)] += n as f64;
    }
    let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    system(a, b)
}

fn residual_norm(s: &NewtonSystem<f64>, x: &[f64]) -> f64 {
    let ax = s.matrix.mul_vec(x);
    ax.iter().zip(&s.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[test]
fn exact_solve_of_identity_returns_rhs() {
    let b = vec![1.0, -2.0, 0.5, 3.0];
    let s = system(DenseMatrix::identity(4), b.clone());
    let d = solve_newton(&s, &ResidualSchedule::Exact, 1, 1.0, &mut rng()).unwrap();
    assert_eq!(d.coords, b);
    assert_eq!(d.achieved_resid, 0.0);
    assert_eq!(d.krylov_iters, None);
}

#[test]
fn exact_solve_meets_tolerance() {
    let s = random_system(50, 3);
    let x_norm = norm2(&s.rhs);
    let d = solve_newton(&s, &ResidualSchedule::Exact, 1, x_norm, &mut rng()).unwrap();
    assert!(d.achieved_resid <= EXACT_RESID_TOL * x_norm);
    assert!((residual_norm(&s, &d.coords) - d.achieved_resid).abs() < 1e-15);
}

#[test]
fn krylov_solves_respect_the_relative_bound() {
    for (k, schedule) in [
        ResidualSchedule::ConstantRel { a: 0.2 },
        ResidualSchedule::DecayingRel { c: 0.2 },
    ]
    .into_iter()
    .enumerate()
    {
        let s = random_system(40, 10 + k as u64);
        let x_norm = norm2(&s.rhs);
        for it in 1..6 {
            let d = solve_newton(&s, &schedule, it, x_norm, &mut rng()).unwrap();
            let a = schedule.relative_residual(it);
            assert!(d.achieved_resid <= a * x_norm, "{schedule:?} k={it}");
            assert!(d.krylov_iters.unwrap() >= 1);
        }
    }
}

#[test]
fn injected_residual_has_prescribed_norm() {
    let s = random_system(30, 4);
    let x_norm = norm2(&s.rhs);
    let schedule = ResidualSchedule::InjectedRandom {
        forcing: Forcing::Constant { a: 0.2 },
        seed: 9,
    };
    let mut r = ChaCha8Rng::seed_from_u64(schedule.seed());
    for k in 1..5 {
        let d = solve_newton(&s, &schedule, k, x_norm, &mut r).unwrap();
        assert!(d.achieved_resid <= d.allowed_resid);
        assert!(d.achieved_resid >= 0.2 * x_norm * (1.0 - 1e-5));
    }
}

#[test]
fn decaying_schedule_starts_at_one() {
    let s: ResidualSchedule<f64> = ResidualSchedule::DecayingRel { c: 0.2 };
    assert_eq!(s.relative_residual(1), 0.2);
    assert_eq!(s.relative_residual(4), 0.05);
    assert_eq!(ResidualSchedule::<f64>::Exact.relative_residual(3), 0.0);
    assert!(ResidualSchedule::ConstantRel { a: -0.1 }.validate().is_err());
}

#[test]
fn schedules_roundtrip_through_toml() {
    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct Wrap {
        s: Vec<ResidualSchedule<f64>>,
    }
    let w = Wrap {
        s: vec![
            ResidualSchedule::Exact,
            ResidualSchedule::DecayingRel { c: 0.2 },
            ResidualSchedule::InjectedRandom {
                forcing: Forcing::Decaying { c: 0.2 },
                seed: 5,
            },
        ],
    };
    let text = toml::to_string(&w).unwrap();
    assert!(text.contains("kind = \"injected_random\""));
    assert_eq!(toml::from_str::<Wrap>(&text).unwrap(), w);
}

#[test]
fn lu_matches_alternate_factorization() {
    let n = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let b: DenseMatrix<f64> = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    // Positive definite symmetric part, indefinite in general.
    let a = DenseMatrix::from_fn(n, n, |i, j| {
        let sym = if i == j { 2.0 } else { 0.0 };
        sym + b[(i, j)] - b[(j, i)] + 0.1 * b[(i, j)]
    });
    let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let d = solve_newton(&system(a.clone(), rhs.clone()), &ResidualSchedule::Exact, 1, 1.0, &mut rng).unwrap();
    let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
    let x = na.qr().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
    let err = d.coords.iter().zip(x.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn singular_system_is_reported() {
    let mut a = DenseMatrix::identity(3);
    a[(2, 2)] = 0.0;
    let s = system(a, vec![1.0, 1.0, 1.0]);
    let err = solve_newton(&s, &ResidualSchedule::Exact, 1, 1.0, &mut rng()).unwrap_err();
    assert!(matches!(err, SolverError::SingularSystem(_)));
}

#[test]
fn q_rate_examples() {
    let geometric: Vec<f64> = (0..8).map(|k| 3.0 * 0.3f64.powi(k)).collect();
    let q = q_rate(&geometric);
    assert_eq!(q[0], None);
    assert_eq!(q[1], None);
    for v in &q[2..] {
        assert!((v.unwrap() - 1.0).abs() < 1e-12);
    }
    let quadratic: Vec<f64> = (0..6).map(|k| (-(2f64.powi(k))).exp()).collect();
    for v in &q_rate(&quadratic)[2..] {
        assert!((v.unwrap() - 2.0).abs() < 1e-12);
    }
    assert_eq!(q_rate(&[1.0, 1.0, 0.5]), vec![None, None, None]);
    assert_eq!(q_rate(&[1.0, 0.5, 0.0]), vec![None, None, None]);
    assert!(q_rate(&[]).is_empty());
}

#[test]
fn eps_rel_examples() {
    assert_eq!(eps_rel(&[4.0, 2.0, 1.0]), vec![1.0, 0.5, 0.25]);
    assert_eq!(eps_rel(&[0.0, 0.0]), vec![1.0, 0.0]);
    assert!(eps_rel(&[]).is_empty());
}

fn row(iter: usize, stage: Stage, x_norm: f64) -> TraceRow {
    TraceRow {
        iter,
        stage,
        x_norm,
        eps_rel: x_norm,
        cost: 1.5,
        resid_norm: (stage == Stage::Newton).then_some(1e-3),
        dist_ref: None,
        cpu_seconds: 0.25,
    }
}

#[test]
fn trace_csv_roundtrip() {
    let trace = SolverTrace {
        rows: vec![row(0, Stage::Prestep, 1.0), row(0, Stage::Newton, 0.5), row(1, Stage::Newton, 1e-9)],
    };
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "iter,stage,x_norm,eps_rel,cost,resid_norm,dist_ref,cpu_seconds"
    );
    assert!(text.lines().nth(1).unwrap().starts_with("0,prestep,"));
    assert_eq!(SolverTrace::read_csv(buf.as_slice()).unwrap(), trace);

    let mut empty = Vec::new();
    SolverTrace::default().write_csv(&mut empty).unwrap();
    assert!(String::from_utf8(empty).unwrap().starts_with("iter,stage,"));
}

#[test]
fn trace_queries() {
    let trace = SolverTrace {
        rows: vec![row(0, Stage::Prestep, 1.0), row(0, Stage::Newton, 0.1), row(1, Stage::Newton, 1e-3)],
    };
    assert_eq!(trace.count(Stage::Newton), 2);
    assert_eq!(trace.x_norms(Some(Stage::Prestep)), vec![1.0]);
    assert_eq!(trace.first_reaching(0.05, Stage::Newton).unwrap().iter, 1);
    assert!(trace.first_reaching(1e-9, Stage::Newton).is_none());
    assert_eq!(trace.eps_rel(), vec![1.0, 0.1, 1e-3]);
}

fn sphere_problem(ell: usize) -> TvProblem<f64, Sphere2> {
    let (p1, p2, m) = sphere_signal_setup::<f64>();
    let h = gen_piecewise_signal::<f64, Sphere2>(&p1, &p2, ell);
    let prm = TvParams {
        alpha: 5.0,
        beta: 0.0,
        sigma: 0.5,
        tau: 0.5,
        q: TvNorm::Anisotropic,
        base_point: m,
    };
    TvProblem::new(h, prm).unwrap()
}

fn image_problem(n: usize) -> TvProblem<f64, Sphere2> {
    let prm = TvParams {
        alpha: 1.5,
        beta: 1e-6,
        sigma: 0.35,
        tau: 0.35,
        q: TvNorm::Isotropic,
        base_point: Vec3::new(0.0, 0.0, 1.0),
    };
    TvProblem::new(gen_sphere_image::<f64>(n), prm).unwrap()
}

#[test]
fn zero_of_the_field_stops_at_iteration_zero() {
    let mut prob = sphere_problem(3);
    prob.data = Grid::filled(6, 1, prob.params.base_point);
    let cfg = SolverConfig {
        warm_start: WarmStart::Cold,
        ..SolverConfig::default()
    };
    let run = pd_rssn(&prob, &cfg, &ResidualSchedule::Exact, None);
    assert!(run.is_ok());
    assert_eq!(run.trace.len(), 1);
    assert_eq!(run.trace.rows[0].eps_rel, 1.0);
    assert_eq!(run.trace.rows[0].x_norm, 0.0);
}

#[test]
fn warm_started_newton_finds_known_minimizer() {
    let prob = sphere_problem(10);
    let (p1, p2, _) = sphere_signal_setup::<f64>();
    let exact = exact_rof_minimizer::<f64, Sphere2>(&p1, &p2, 10, 5.0).unwrap();
    let cfg = SolverConfig {
        warm_start: WarmStart::DualWarm,
        ..SolverConfig::default()
    };
    let run = pd_rssn(&prob, &cfg, &ResidualSchedule::Exact, Some(&exact));
    assert!(run.is_ok(), "{:?}", run.error);
    assert!(run.trace.count(Stage::Newton) - 1 <= 5);
    assert!(product_dist::<f64, Sphere2>(&run.p, &exact) <= 1e-8);
    assert_eq!(run.trace.rows[0].eps_rel, 1.0);
    assert!(run.trace.last().unwrap().dist_ref.unwrap() <= 1e-8);
}

#[test]
fn exact_runs_are_bit_identical() {
    let prob = image_problem(5);
    let cfg = SolverConfig {
        eps_rel_stop: 1e-8,
        ..SolverConfig::default()
    };
    let a = pd_rssn(&prob, &cfg, &ResidualSchedule::Exact, None);
    let b = pd_rssn(&prob, &cfg, &ResidualSchedule::Exact, None);
    let strip = |t: &SolverTrace| {
        t.rows
            .iter()
            .map(|r| (r.iter, r.stage, r.x_norm.to_bits(), r.cost.to_bits(), r.resid_norm.map(f64::to_bits)))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a.trace), strip(&b.trace));
    assert_eq!(a.p, b.p);
}

#[test]
fn injected_runs_depend_only_on_the_seed() {
    let prob = image_problem(4);
    let cfg = SolverConfig::default();
    let sched = |seed| ResidualSchedule::InjectedRandom {
        forcing: Forcing::Constant { a: 0.2 },
        seed,
    };
    let a = pd_rssn(&prob, &cfg, &sched(1), None);
    let b = pd_rssn(&prob, &cfg, &sched(1), None);
    let c = pd_rssn(&prob, &cfg, &sched(2), None);
    assert_eq!(a.trace.x_norms(None), b.trace.x_norms(None));
    assert_ne!(a.trace.x_norms(None), c.trace.x_norms(None));
}

#[test]
fn logged_residuals_satisfy_the_inexact_bound() {
    let prob = image_problem(5);
    let cfg = SolverConfig {
        eps_rel_stop: 1e-8,
        ..SolverConfig::default()
    };
    for schedule in [
        ResidualSchedule::ConstantRel { a: 0.2 },
        ResidualSchedule::DecayingRel { c: 0.2 },
        ResidualSchedule::InjectedRandom {
            forcing: Forcing::Decaying { c: 0.2 },
            seed: 3,
        },
    ] {
        let run = pd_rssn(&prob, &cfg, &schedule, None);
        assert!(run.is_ok(), "{schedule:?}: {:?}", run.error);
        let newton: Vec<&TraceRow> = run.trace.rows.iter().filter(|r| r.stage == Stage::Newton).collect();
        assert!(newton.len() > 2);
        for (k, w) in newton.windows(2).enumerate() {
            let bound = schedule.relative_residual(k + 1) * w[0].x_norm;
            assert!(w[1].resid_norm.unwrap() <= bound, "{schedule:?} k={}", k + 1);
        }
    }
}

#[test]
fn invalid_configuration_is_reported_in_the_run() {
    let prob = sphere_problem(2);
    let cfg = SolverConfig {
        max_iters: 0,
        ..SolverConfig::<f64>::default()
    };
    let run = pd_rssn(&prob, &cfg, &ResidualSchedule::Exact, None);
    assert!(matches!(run.error, Some(SolverError::Config(_))));
    assert!(run.trace.is_empty());
    let bad = ResidualSchedule::ConstantRel { a: f64::NAN };
    let run = pd_rssn(&prob, &SolverConfig::default(), &bad, None);
    assert!(matches!(run.error, Some(SolverError::Config(_))));
}

#[test]
fn warm_start_dual_examples() {
    let mut prob = sphere_problem(4);
    let zero = warm_start_dual(&prob, &Grid::filled(8, 1, prob.params.base_point)).unwrap();
    assert!(zero.as_slice().iter().all(|v| *v == Vec3::zero()));

    let xi = warm_start_dual(&prob, &prob.data).unwrap();
    let m = prob.params.base_point;
    assert!(xi.boundary_is_zero());
    assert!(xi.as_slice().iter().all(|v| Sphere2::norm(&m, v) <= 1.0 + 1e-15));
    assert!(xi.as_slice().iter().any(|v| Sphere2::norm(&m, v) > 0.5));

    prob.params.q = TvNorm::Isotropic;
    let img = image_problem(6);
    let xi = warm_start_dual(&img, &img.data).unwrap();
    let m = img.params.base_point;
    let t = img.params.dual_threshold();
    for i in 0..6 {
        for j in 0..6 {
            let n2: f64 = xi.pixel(i, j).iter().map(|v| Sphere2::inner(&m, v, v)).sum();
            assert!(n2.sqrt() <= t + 1e-15);
        }
    }
}

#[test]
fn lrcpa_is_stationary_on_constant_data() {
    let mut prob = image_problem(4);
    prob.data = Grid::filled(4, 4, Sphere2::exp(&prob.params.base_point, &Vec3::new(0.3, 0.0, 0.0)));
    let cfg = SolverConfig {
        max_iters: 20,
        ..SolverConfig::default()
    };
    let run = lrcpa(&prob, &cfg, None);
    assert!(run.is_ok());
    assert_eq!(run.trace.len(), 1);
    assert_eq!(run.trace.rows[0].x_norm, 0.0);
    assert_eq!(run.p, prob.data);
}

#[test]
fn lrcpa_approaches_known_minimizer() {
    let prob = sphere_problem(10);
    let (p1, p2, _) = sphere_signal_setup::<f64>();
    let exact = exact_rof_minimizer::<f64, Sphere2>(&p1, &p2, 10, 5.0).unwrap();
    let cfg = SolverConfig {
        max_iters: 5000,
        eps_rel_stop: 1e-300,
        gamma: 0.0,
        ..SolverConfig::default()
    };
    let run = lrcpa(&prob, &cfg, Some(&exact));
    assert!(run.is_ok(), "{:?}", run.error);
    assert!(run.trace.count(Stage::Lrcpa) <= 5001);
    let d = product_dist::<f64, Sphere2>(&run.p, &exact);
    assert!(d <= 1e-4, "{d}");
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn lrcpa_windowed_median_is_non_increasing() {
    let prob = image_problem(8);
    let cfg = SolverConfig {
        max_iters: 1000,
        eps_rel_stop: 1e-300,
        ..SolverConfig::default()
    };
    let run = lrcpa(&prob, &cfg, None);
    assert!(run.is_ok(), "{:?}", run.error);
    let eps = run.trace.eps_rel();
    let medians: Vec<f64> = eps.windows(200).map(|w| median(&mut w.to_vec())).collect();
    for (k, w) in medians.windows(2).enumerate() {
        assert!(w[1] <= w[0], "window {k}: {} > {}", w[1], w[0]);
    }
}
