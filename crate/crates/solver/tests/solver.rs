use fdcf_solver::selftest::{brute_force_lp, random_program, run_selftest};
use fdcf_solver::{
    solve, Constraint, ConvexProgram, SolveStatus, SolverError, SolverOptions, VarId,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn lp_corner() {
    let mut p = ConvexProgram::new();
    let x = p.add_free_var("x");
    p.add_objective(x, 1.0);
    p.add_constraint(
        "cap",
        Constraint::Affine {
            a: vec![(x, 1.0)],
            b: 1.0,
        },
    )
    .unwrap();
    let res = solve(&p, &[-3.0], &SolverOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert!((res.point[0] - 1.0).abs() < 1e-8);
    assert!(res.kkt_residual <= 1e-6);
}

#[test]
fn linearized_ratio_bound() {
    // f ≤ Ψ²/g linearized at Ψ = g = 1 gives f ≤ 2Ψ − g.
    // With Ψ² + g² ≤ 5 and g ≥ 0.5 the optimum sits at g = 0.5, Ψ = √4.75.
    let mut p = ConvexProgram::new();
    let f = p.add_free_var("f");
    let psi = p.add_var("psi", 0.0, 10.0);
    let g = p.add_var("g", 0.5, 10.0);
    p.add_objective(f, 1.0);
    p.add_constraint(
        "lin",
        Constraint::Affine {
            a: vec![(f, 1.0), (psi, -2.0), (g, 1.0)],
            b: 0.0,
        },
    )
    .unwrap();
    p.add_constraint(
        "disk",
        Constraint::QuadLeAffine {
            q: vec![(psi, 1.0), (g, 1.0)],
            a: vec![],
            b: 5.0,
        },
    )
    .unwrap();
    let res = solve(&p, &[0.0, 1.0, 1.0], &SolverOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    let want = 2.0 * 4.75_f64.sqrt() - 0.5;
    assert!(
        (res.objective - want).abs() < 1e-7,
        "{} vs {want}",
        res.objective
    );
    assert!((res.point[2] - 0.5).abs() < 1e-7);
}

#[test]
fn sq_le_log_analytic_optimum() {
    let tau_f = 0.9;
    let zeta_bar = 3.0;
    let mut p = ConvexProgram::new();
    let psi = p.add_var("psi", 0.0, f64::INFINITY);
    let zeta = p.add_var("zeta", 0.0, f64::INFINITY);
    p.add_objective(psi, 1.0);
    p.add_constraint(
        "rate",
        Constraint::SqLeLog {
            sq: psi,
            arg: zeta,
            scale: tau_f,
        },
    )
    .unwrap();
    p.add_constraint(
        "cap",
        Constraint::Affine {
            a: vec![(zeta, 1.0)],
            b: zeta_bar,
        },
    )
    .unwrap();
    let res = solve(&p, &[0.1, 1.0], &SolverOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    let want = (tau_f * (1.0_f64 + zeta_bar).log2()).sqrt();
    assert!(
        (res.point[0] - want).abs() < 1e-7,
        "{} vs {want}",
        res.point[0]
    );
}

#[test]
fn infeasible_start_goes_through_phase_one() {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", 0.0, 10.0);
    let y = p.add_var("y", 0.0, 10.0);
    p.add_objective(x, 1.0);
    p.add_objective(y, 2.0);
    p.add_constraint(
        "ball",
        Constraint::QuadLeAffine {
            q: vec![(x, 1.0), (y, 1.0)],
            a: vec![],
            b: 1.0,
        },
    )
    .unwrap();
    let res = solve(&p, &[5.0, 5.0], &SolverOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    let want = 5.0_f64.sqrt();
    assert!((res.objective - want).abs() < 1e-7);
}

#[test]
fn empty_feasible_set_reports_infeasible() {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", 0.0, 10.0);
    p.add_objective(x, 1.0);
    p.add_constraint(
        "low",
        Constraint::Affine {
            a: vec![(x, 1.0)],
            b: 1.0,
        },
    )
    .unwrap();
    p.add_constraint(
        "high",
        Constraint::Affine {
            a: vec![(x, -1.0)],
            b: -2.0,
        },
    )
    .unwrap();
    let res = solve(&p, &[0.5], &SolverOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Infeasible);
}

#[test]
fn rejects_bad_start() {
    let mut p = ConvexProgram::new();
    p.add_free_var("x");
    let opts = SolverOptions::default();
    assert_eq!(
        solve(&p, &[0.0, 1.0], &opts).unwrap_err(),
        SolverError::Dimension {
            expected: 1,
            got: 2
        }
    );
    assert_eq!(
        solve(&p, &[f64::NAN], &opts).unwrap_err(),
        SolverError::NonFiniteStart
    );
}

#[test]
fn randomized_selftest_meets_tolerances() {
    let opts = SolverOptions::default();
    let cases = run_selftest(100, 2024, &opts);
    assert_eq!(cases.len(), 100);
    for c in &cases {
        assert!(
            c.passed(1e-6, 1e-8),
            "case {} ({} vars, {} rows, affine {}): {:?} kkt {:e} gap {:?}",
            c.index,
            c.vars,
            c.rows,
            c.affine_only,
            c.status,
            c.kkt_residual,
            c.reference_gap()
        );
    }
    assert!(cases.iter().filter(|c| c.reference.is_some()).count() >= 20);
}

fn permuted(p: &ConvexProgram, perm: &[usize]) -> ConvexProgram {
    // perm[old] = new
    let n = p.num_vars();
    let mut inv = vec![0; n];
    for (old, &new) in perm.iter().enumerate() {
        inv[new] = old;
    }
    let mut q = ConvexProgram::new();
    for &old in &inv {
        let v = &p.variables()[old];
        q.add_var(v.name.clone(), v.lower, v.upper);
    }
    for (old, &c) in p.objective().iter().enumerate() {
        q.add_objective(VarId(perm[old]), c);
    }
    let map = |t: &[(VarId, f64)]| {
        t.iter()
            .map(|&(v, c)| (VarId(perm[v.0]), c))
            .collect::<Vec<_>>()
    };
    for (label, c) in p.constraints() {
        let c = match c {
            Constraint::Affine { a, b } => Constraint::Affine { a: map(a), b: *b },
            Constraint::QuadLeAffine { q, a, b } => Constraint::QuadLeAffine {
                q: map(q),
                a: map(a),
                b: *b,
            },
            Constraint::SqLeLog { sq, arg, scale } => Constraint::SqLeLog {
                sq: VarId(perm[sq.0]),
                arg: VarId(perm[arg.0]),
                scale: *scale,
            },
            Constraint::SocNum { sq, a } => Constraint::SocNum {
                sq: VarId(perm[sq.0]),
                a: map(a),
            },
        };
        q.add_constraint(label.clone(), c).unwrap();
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn never_regresses_from_start(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rp = random_program(&mut rng, n, false);
        let res = solve(&rp.program, &rp.start, &SolverOptions::default()).unwrap();
        prop_assert!(res.objective >= rp.program.objective_value(&rp.start) - 1e-9);
        prop_assert!(rp.program.max_violation(&res.point) <= 1e-8);
    }

    #[test]
    fn invariant_to_variable_order(seed in any::<u64>(), n in 2usize..7, shift in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rp = random_program(&mut rng, n, false);
        let perm: Vec<usize> = (0..n).map(|i| (i * (2 * shift + 1) + shift) % n).collect();
        let mut seen = perm.clone();
        seen.sort_unstable();
        prop_assume!(seen == (0..n).collect::<Vec<_>>());
        let q = permuted(&rp.program, &perm);
        let mut start = vec![0.0; n];
        for (old, &new) in perm.iter().enumerate() {
            start[new] = rp.start[old];
        }
        let opts = SolverOptions::default();
        let a = solve(&rp.program, &rp.start, &opts).unwrap();
        let b = solve(&q, &start, &opts).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 10.0 * opts.tol,
            "{} vs {}", a.objective, b.objective);
    }

    #[test]
    fn affine_programs_match_vertex_enumeration(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rp = random_program(&mut rng, n, true);
        let res = solve(&rp.program, &rp.start, &SolverOptions::default()).unwrap();
        let (_, best) = brute_force_lp(&rp.program).unwrap();
        prop_assert_eq!(res.status, SolveStatus::Optimal);
        prop_assert!((res.objective - best).abs() <= 1e-8, "{} vs {}", res.objective, best);
    }
}
