use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riscf_core::conic::{solve, AffineExpr, Cone, ConeProgram, SolveStatus, SolverSettings};

#[path = "common/oracle.rs"]
mod oracle;

use oracle::{grid_oracle, planted, random_small};

fn settings() -> SolverSettings<f64> {
    SolverSettings::default()
}

#[test]
fn euclidean_norm_epigraph() {
    let mut p = ConeProgram::new();
    let t = p.add_var("t");
    p.add_objective(t, -1.0);
    p.add_soc(AffineExpr::var(t), vec![AffineExpr::constant(3.0), AffineExpr::constant(4.0)]);
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.primal[0] - 5.0).abs() < 1e-6, "{:?}", r);
    assert!((r.objective_value + 5.0).abs() < 1e-6);
}

#[test]
fn single_upper_bound() {
    let mut p = ConeProgram::new();
    let x = p.add_var("x");
    p.add_objective(x, 1.0);
    p.add_nonneg(AffineExpr::constant(2.0).term(x, -1.0));
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.primal[0] - 2.0).abs() < 1e-6);
}

#[test]
fn rotated_cone_and_equality() {
    // maximize x s.t. x^2 <= 2 u v, u = 1, v = 2  -> x = 2
    let mut p = ConeProgram::new();
    let x = p.add_var("x");
    let u = p.add_var("u");
    let v = p.add_var("v");
    p.add_objective(x, 1.0);
    p.add_equality(AffineExpr::var(u).plus(-1.0));
    p.add_equality(AffineExpr::var(v).plus(-2.0));
    p.add_rotated(AffineExpr::var(u), AffineExpr::var(v), vec![AffineExpr::var(x)]);
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.primal[x] - 2.0).abs() < 1e-6, "{:?}", r.primal);
    assert!(r.primal_residual <= 1e-7);
    // stationarity with the reported multipliers: obj + Σ z·∇row − Σ y·∇eq = 0
    let z = &r.cone_duals[0];
    let y = &r.equality_duals;
    let gx = 1.0 + z[2];
    let gu = z[0] - y[0];
    let gv = z[1] - y[1];
    assert!(gx.abs() < 1e-6 && gu.abs() < 1e-6 && gv.abs() < 1e-6, "{gx} {gu} {gv}");
}

#[test]
fn detects_primal_infeasibility() {
    let mut p = ConeProgram::new();
    let x = p.add_var("x");
    p.add_objective(x, 1.0);
    p.add_nonneg(AffineExpr::var(x).plus(-1.0));
    p.add_nonneg(AffineExpr::var(x).scaled(-1.0));
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn detects_unboundedness() {
    let mut p = ConeProgram::new();
    let x = p.add_var("x");
    let y = p.add_var("y");
    p.add_objective(x, 1.0);
    p.add_soc(AffineExpr::var(x), vec![AffineExpr::var(y)]);
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Unbounded);
}

#[test]
fn malformed_program_is_rejected() {
    let mut p = ConeProgram::<f64>::new();
    let x = p.add_var("x");
    p.add_cone(Cone::SecondOrder(1), vec![AffineExpr::var(x)]);
    assert!(solve(&p, &settings()).is_err());
}

#[test]
fn max_iters_is_reported() {
    let mut p = ConeProgram::new();
    let t = p.add_var("t");
    p.add_objective(t, -1.0);
    p.add_soc(AffineExpr::var(t), vec![AffineExpr::constant(3.0), AffineExpr::constant(4.0)]);
    let r = solve(&p, &SolverSettings::new(1e-12, 1)).unwrap();
    assert_eq!(r.status, SolveStatus::MaxIters);
}

#[test]
fn planted_optimum_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..60 {
        let n = rng.random_range(2..7);
        let (p, opt) = planted(&mut rng, n);
        let r = solve(&p, &settings()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "case {case}: {r:?}");
        assert!((r.objective_value - opt).abs() <= 1e-4 * opt.abs().max(1.0), "case {case}: {} vs {opt}", r.objective_value);
        assert!(r.primal_residual <= 1e-7 && r.dual_residual <= 1e-7 && r.duality_gap.abs() <= 1e-7);
    }
}

#[test]
fn small_programs_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..12 {
        let n = 2 + case % 2;
        let p = random_small(&mut rng, n);
        let r = solve(&p, &settings()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "case {case}: {r:?}");
        let oracle = grid_oracle(&p, n);
        assert!(oracle <= r.objective_value + 1e-6, "case {case}: grid beat solver");
        assert!((r.objective_value - oracle).abs() <= 1e-4, "case {case}: {} vs {oracle}", r.objective_value);
    }
}

#[test]
fn properties_on_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..30 {
        let n = rng.random_range(2..7);
        let (p, _) = planted(&mut rng, n);
        let s = settings();
        let r = solve(&p, &s).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        // weak duality and feasibility of the returned point
        assert!(r.duality_gap >= -s.tol, "case {case}");
        for c in &p.cones {
            assert!(c.violation(&r.primal) <= s.tol);
        }
        // reproducibility
        assert_eq!(solve(&p, &s).unwrap(), r);
    }
}

#[test]
fn objective_scaling_keeps_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..30 {
        let n = 2 + case % 5;
        let p = random_small(&mut rng, n);
        let r = solve(&p, &settings()).unwrap();
        for f in [37.5, 1e-3, 4.0] {
            let mut q = p.clone();
            q.objective.iter_mut().for_each(|c| *c *= f);
            let rq = solve(&q, &settings()).unwrap();
            assert_eq!(rq.status, SolveStatus::Optimal);
            let dx = r.primal.iter().zip(&rq.primal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dx <= 1e-7, "case {case}, factor {f}: argmax moved by {dx}");
        }
    }
}

#[test]
fn works_in_single_precision() {
    let mut p = ConeProgram::<f32>::new();
    let t = p.add_var("t");
    p.add_objective(t, -1.0);
    p.add_soc(AffineExpr::var(t), vec![AffineExpr::constant(3.0), AffineExpr::constant(4.0)]);
    let r = solve(&p, &SolverSettings::new(1e-4, 100)).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.primal[0] - 5.0).abs() < 1e-3);
}

