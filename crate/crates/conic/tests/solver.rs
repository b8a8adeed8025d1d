//! End-to-end solver checks on problems with known solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wangtruss_conic::{certify, solve, ConicProgram, CscMatrix, SolveStatus, SolverConfig};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn lp_simple_bound() {
    // min x  s.t.  x - s = 1, s >= 0, x free  =>  x* = 1
    let prog = ConicProgram {
        c: vec![1.0, 0.0],
        a: CscMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]),
        b: vec![1.0],
        n_free: 1,
        n_nonneg: 1,
        soc_dims: vec![],
    };
    let sol = solve(&prog, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-8, "obj {}", sol.objective);
    assert!((sol.x[0] - 1.0).abs() < 1e-8);
}

#[test]
fn soc_norm_bound() {
    // min t  s.t. (t, u, v) in SOC, u = 3, v = 4  =>  t* = 5
    let prog = ConicProgram {
        c: vec![1.0, 0.0, 0.0],
        a: CscMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 1.0)]),
        b: vec![3.0, 4.0],
        n_free: 0,
        n_nonneg: 0,
        soc_dims: vec![3],
    };
    let sol = solve(&prog, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 5.0).abs() < 1e-8, "obj {}", sol.objective);
    let report = certify(&prog, &sol);
    assert!(report.within(10.0 * cfg().feas_tol, &prog));
}

#[test]
fn lp_with_multiple_rows() {
    // min -x1 - 2 x2 s.t. x1 + x2 + s1 = 4, x1 + s2 = 2, x >= 0
    // optimum: x1 = 0, x2 = 4, obj = -8
    let prog = ConicProgram {
        c: vec![-1.0, -2.0, 0.0, 0.0],
        a: CscMatrix::from_triplets(
            2,
            4,
            &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0), (1, 0, 1.0), (1, 3, 1.0)],
        ),
        b: vec![4.0, 2.0],
        n_free: 0,
        n_nonneg: 4,
        soc_dims: vec![],
    };
    let sol = solve(&prog, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective + 8.0).abs() < 1e-7, "obj {}", sol.objective);
}

#[test]
fn primal_infeasible_detected() {
    // x >= 0 with x = -1
    let prog = ConicProgram {
        c: vec![0.0],
        a: CscMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]),
        b: vec![-1.0],
        n_free: 0,
        n_nonneg: 1,
        soc_dims: vec![],
    };
    let sol = solve(&prog, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
}

#[test]
fn dual_infeasible_detected() {
    // min -x1 s.t. x1 - x2 = 0, x >= 0: unbounded below
    let prog = ConicProgram {
        c: vec![-1.0, 0.0],
        a: CscMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]),
        b: vec![0.0],
        n_free: 0,
        n_nonneg: 2,
        soc_dims: vec![],
    };
    let sol = solve(&prog, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::DualInfeasible);
}

#[test]
fn scale_robustness() {
    // Scaling b and c by 10^+-3 scales the optimum accordingly.
    let base = ConicProgram {
        c: vec![1.0, 0.0, 0.0],
        a: CscMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 1.0)]),
        b: vec![3.0, 4.0],
        n_free: 0,
        n_nonneg: 0,
        soc_dims: vec![3],
    };
    let ref_obj = solve(&base, &cfg()).unwrap().objective;
    for scale in [1e-3, 1e3] {
        let mut prog = base.clone();
        for v in prog.b.iter_mut() {
            *v *= scale;
        }
        for v in prog.c.iter_mut() {
            *v *= scale;
        }
        let sol = solve(&prog, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let expected = ref_obj * scale * scale;
        assert!(
            (sol.objective - expected).abs() <= 1e-6 * expected.abs(),
            "scale {scale}: {} vs {expected}",
            sol.objective
        );
    }
}

#[test]
fn deterministic_repeat() {
    let prog = ConicProgram {
        c: vec![1.0, 1.0, 0.0, 0.0, 0.0],
        a: CscMatrix::from_triplets(
            2,
            5,
            &[(0, 0, 1.0), (0, 2, 1.0), (0, 3, -0.5), (1, 1, 1.0), (1, 4, 2.0)],
        ),
        b: vec![1.0, 2.0],
        n_free: 0,
        n_nonneg: 2,
        soc_dims: vec![3],
    };
    let s1 = solve(&prog, &cfg()).unwrap();
    let s2 = solve(&prog, &cfg()).unwrap();
    assert_eq!(s1.x, s2.x);
    assert_eq!(s1.y, s2.y);
    assert_eq!(s1.iterations, s2.iterations);
}

#[test]
fn perturbed_point_flagged_by_certify() {
    let prog = ConicProgram {
        c: vec![1.0, 0.0, 0.0],
        a: CscMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 1.0)]),
        b: vec![3.0, 4.0],
        n_free: 0,
        n_nonneg: 0,
        soc_dims: vec![3],
    };
    let mut sol = solve(&prog, &cfg()).unwrap();
    let clean = certify(&prog, &sol);
    assert!(clean.within(1e-7, &prog));
    for v in sol.x.iter_mut() {
        *v += 1e-3;
    }
    let dirty = certify(&prog, &sol);
    assert!(dirty.primal_residual > 1e-4);
}

/// Build a random program with a known strictly feasible primal-dual pair,
/// so an optimum exists; the solver must certify it.
fn random_feasible_program(rng: &mut ChaCha8Rng, n_free: usize, n_nonneg: usize, socs: &[usize], m: usize) -> ConicProgram {
    let n = n_free + n_nonneg + socs.iter().sum::<usize>();
    let mut trips = Vec::new();
    for j in 0..m {
        // Ensure no empty row: one guaranteed entry per row.
        let col = j % n;
        trips.push((j, col, rng.random_range(0.5..1.5)));
        for col in 0..n {
            if rng.random_bool(0.3) {
                trips.push((j, col, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let a = CscMatrix::from_triplets(m, n, &trips);

    // Strictly interior primal point.
    let mut x0 = vec![0.0; n];
    for (i, v) in x0.iter_mut().enumerate().take(n_free) {
        *v = rng.random_range(-1.0..1.0) + i as f64 * 0.0;
    }
    for v in x0.iter_mut().skip(n_free).take(n_nonneg) {
        *v = rng.random_range(0.5..2.0);
    }
    let mut off = n_free + n_nonneg;
    for &d in socs {
        let mut tail = 0.0f64;
        for i in 1..d {
            x0[off + i] = rng.random_range(-0.5..0.5);
            tail += x0[off + i] * x0[off + i];
        }
        x0[off] = tail.sqrt() + rng.random_range(0.5..1.5);
        off += d;
    }
    let mut b = vec![0.0; m];
    a.gaxpy(1.0, &x0, &mut b);

    // Strictly interior dual slack (zero on free block) and any y.
    let mut z0 = vec![0.0; n];
    for v in z0.iter_mut().skip(n_free).take(n_nonneg) {
        *v = rng.random_range(0.5..2.0);
    }
    let mut off = n_free + n_nonneg;
    for &d in socs {
        let mut tail = 0.0f64;
        for i in 1..d {
            z0[off + i] = rng.random_range(-0.5..0.5);
            tail += z0[off + i] * z0[off + i];
        }
        z0[off] = tail.sqrt() + rng.random_range(0.5..1.5);
        off += d;
    }
    let y0: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut c = z0;
    a.gaxpy_transpose(1.0, &y0, &mut c);
    ConicProgram {
        c,
        a,
        b,
        n_free,
        n_nonneg,
        soc_dims: socs.to_vec(),
    }
}

#[test]
fn random_programs_solve_and_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..25 {
        let n_free = rng.random_range(0..3);
        let n_nonneg = rng.random_range(1..5);
        let socs: Vec<usize> = (0..rng.random_range(1..3usize))
            .map(|_| rng.random_range(2..12usize))
            .collect();
        let total = n_free + n_nonneg + socs.iter().sum::<usize>();
        let m = rng.random_range(1..total.max(2));
        let prog = random_feasible_program(&mut rng, n_free, n_nonneg, &socs, m);
        let sol = solve(&prog, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "trial {trial}: status {:?} gap {} iters {} dims free={n_free} nn={n_nonneg} socs={socs:?} m={m}", sol.status, sol.gap, sol.iterations);
        let report = certify(&prog, &sol);
        assert!(
            report.within(10.0 * cfg().feas_tol, &prog),
            "trial {trial}: {report:?}"
        );
        // Weak duality at the reported optimum.
        assert!(report.primal_objective >= report.dual_objective - 1e-6 * (1.0 + report.primal_objective.abs()));
    }
}

#[test]
fn triplet_round_trip_solves_identically() {
    let prog = ConicProgram {
        c: vec![1.0, 0.0, 0.0],
        a: CscMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 1.0)]),
        b: vec![3.0, 4.0],
        n_free: 0,
        n_nonneg: 0,
        soc_dims: vec![3],
    };
    let text = wangtruss_conic::triplet::write_triplets(&prog);
    let back = wangtruss_conic::triplet::read_triplets(&text).unwrap();
    let s1 = solve(&prog, &cfg()).unwrap();
    let s2 = solve(&back, &cfg()).unwrap();
    assert_eq!(s1.x, s2.x);
}
