mod common;

use common::{enumerate_qp, random_qp};
use hierlasso::{solve_qp, solve_qp_warm, QpProblem, QpStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_x = 0.0f64;
    for case in 0..500 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(0..=8);
        let p = random_qp(&mut rng, n, m);
        let sol = solve_qp(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        let (x, obj) = enumerate_qp(&p).expect("feasible by construction");
        let dx = (&sol.x - &x).amax();
        worst_x = worst_x.max(dx);
        assert!(dx < 1e-6, "case {case}: x differs by {dx}");
        assert!((sol.objective - obj).abs() < 1e-8, "case {case}: objective");
        let k = sol.kkt;
        for (name, v) in [
            ("stationarity", k.stationarity),
            ("primal", k.primal),
            ("dual", k.dual),
            ("complementarity", k.complementarity),
        ] {
            assert!(v < 1e-9, "case {case}: {name} residual {v:e}");
        }
    }
    eprintln!("largest x deviation from oracle: {worst_x:e}");
}

#[test]
fn solves_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let p = random_qp(&mut rng, 4, 6);
        let a = solve_qp(&p).unwrap();
        let b = solve_qp(&p).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn invariant_under_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let p = random_qp(&mut rng, 4, 6);
        let base = solve_qp(&p).unwrap();
        // scaling the objective or an individual row leaves the minimizer unchanged
        let scaled = QpProblem::new(&p.g * 3.5, &p.d * 3.5, p.c_mat.clone(), p.c_vec.clone()).unwrap();
        let mut rows = p.c_mat.clone();
        let mut rhs = p.c_vec.clone();
        for i in 0..p.m() {
            let f = rng.random_range(0.2..5.0);
            rows.row_mut(i).scale_mut(f);
            rhs[i] *= f;
        }
        let rescaled = QpProblem::new(p.g.clone(), p.d.clone(), rows, rhs).unwrap();
        for other in [solve_qp(&scaled).unwrap(), solve_qp(&rescaled).unwrap()] {
            assert!((&other.x - &base.x).amax() < 1e-8);
            let mut a = other.active_set.clone();
            let mut b = base.active_set.clone();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn warm_start_with_optimal_active_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=10);
        let p = random_qp(&mut rng, n, m);
        let cold = solve_qp(&p).unwrap();
        let warm = solve_qp_warm(&p, &cold.active_set).unwrap();
        assert!((&warm.x - &cold.x).amax() < 1e-8, "case {case}");
        assert!(warm.active_set_changes <= 2, "case {case}: {} changes", warm.active_set_changes);
        // a wrong hint still reaches the optimum
        let wrong: Vec<usize> = (0..p.m()).collect();
        let w = solve_qp_warm(&p, &wrong).unwrap();
        assert!((&w.x - &cold.x).amax() < 1e-8, "case {case}");
    }
}

#[test]
fn reports_infeasible_box() {
    // x >= 1 and -x >= 0
    let p = QpProblem::new(
        DMatrix::identity(1, 1),
        DVector::zeros(1),
        DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        DVector::from_vec(vec![1.0, 0.0]),
    )
    .unwrap();
    assert_eq!(solve_qp(&p).unwrap().status, QpStatus::Infeasible);
}
