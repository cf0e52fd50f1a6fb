use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use zcprecode::qcqp::{check_feasibility, oracle_solve, solve, EpigraphProblem, SolveStatus, SolverSettings};

/// Margin program with `k` transmit coordinates and `m` sign constraints.
fn instance(seed: u64, k: usize, m: usize) -> EpigraphProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    // rows oriented so a planted direction meets every constraint: γ* > 0
    let planted: Vec<f64> = (0..k).map(|_| normal()).collect();
    let mut b = DMatrix::zeros(m, k + 1);
    for i in 0..m {
        let row: Vec<f64> = (0..k).map(|_| normal()).collect();
        let sign = if row.iter().zip(&planted).map(|(x, y)| x * y).sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..k {
            b[(i, j)] = -sign * row[j];
        }
        b[(i, k)] = -1.0;
    }
    let mut w = DMatrix::zeros(k, k + 1);
    for i in 0..k {
        for j in 0..k {
            w[(i, j)] = 0.3 * normal();
        }
        w[(i, i)] += 1.0;
    }
    let mut a = DVector::zeros(k + 1);
    a[k] = 1.0;
    EpigraphProblem::new(a, b, w, 0.5).unwrap()
}

#[test]
fn small_instance_matches_oracle_objective() {
    let p = instance(7, 5, 10);
    let s = solve(&p, &SolverSettings::default());
    let o = oracle_solve(&p, 20_000).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!((s.objective - o.objective).abs() <= 1e-4 * o.objective.abs(), "{} vs {}", s.objective, o.objective);
}

#[test]
fn random_instances_agree_with_oracle() {
    let settings = SolverSettings::default();
    for seed in 0..50u64 {
        // dim = k + 1 ≤ 20
        let k = 3 + (seed as usize % 17);
        let m = k + 1 + (seed as usize % 7);
        let p = instance(100 + seed, k, m);
        let s = solve(&p, &settings);
        let o = oracle_solve(&p, 10_000).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal, "seed {seed}");
        let rel = (s.gamma - o.gamma).abs() / o.gamma.abs().max(1e-12);
        assert!(rel <= 1e-3, "seed {seed}: γ {} vs oracle {}", s.gamma, o.gamma);
        assert!(s.kkt.max() <= 1e-6, "seed {seed}: {:?}", s.kkt);
        if s.gamma > 1e-4 {
            let e = p.energy(&s.r);
            assert!((e - p.energy_bound).abs() <= 1e-5 * p.energy_bound, "seed {seed}: energy {e}");
        }
    }
}

#[test]
fn near_degenerate_instance_has_margin_near_zero() {
    // two rows demand opposite signs of the same sample
    let a = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(3, 3, &[-1.0, -0.5, -1.0, 1.0, 0.5, -1.0, -0.2, -1.0, -1.0]);
    let w = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let p = EpigraphProblem::new(a, b, w, 0.5).unwrap();
    let settings = SolverSettings::default();
    let s = solve(&p, &settings);
    let o = oracle_solve(&p, 20_000).unwrap();
    assert!(s.gamma.abs() <= 1e-6, "γ = {}", s.gamma);
    assert!((s.gamma - o.gamma).abs() <= settings.tol * 10.0);
}

#[test]
fn optimal_points_satisfy_constraints_and_energy_is_tight() {
    let settings = SolverSettings::default();
    for seed in 0..10u64 {
        let p = instance(300 + seed, 8, 12);
        let s = solve(&p, &settings);
        assert_eq!(s.status, SolveStatus::Optimal);
        let rep = check_feasibility(&p, &s.r).unwrap();
        assert!(rep.inequality <= settings.tol && rep.energy <= settings.tol, "{rep:?}");
        assert!(s.kkt.max() <= settings.tol, "{:?}", s.kkt);
        if s.gamma > 1e-4 {
            let e = p.energy(&s.r);
            assert!((e - p.energy_bound).abs() <= 10.0 * settings.tol, "energy {e}");
        }
    }
}

#[test]
fn doubling_an_optimal_point_quadruples_energy() {
    let p = instance(11, 6, 9);
    let s = solve(&p, &SolverSettings::default());
    let rep = check_feasibility(&p, &(&s.r * 2.0)).unwrap();
    assert!((rep.energy - 3.0 * p.energy_bound).abs() < 1e-5);
}

#[test]
fn solve_is_deterministic() {
    let p = instance(5, 10, 15);
    let a = solve(&p, &SolverSettings::default());
    let b = solve(&p, &SolverSettings::default());
    assert_eq!(a, b);
}

