//! Randomized programs drawn from the supported constraint taxonomy, plus a
//! vertex-enumeration reference for small all-affine instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::barrier::{solve, SolveStatus, SolverOptions};
use crate::program::{Constraint, ConvexProgram, VarId};

#[derive(Debug, Clone)]
pub struct RandomProgram {
    pub program: ConvexProgram,
    /// Strictly feasible point the program was built around.
    pub start: Vec<f64>,
}

/// Builds a bounded random program with `n` variables that is strictly
/// feasible at the returned start point.
pub fn random_program<R: Rng>(rng: &mut R, n: usize, affine_only: bool) -> RandomProgram {
    let mut p = ConvexProgram::new();
    let mut start = Vec::with_capacity(n);
    let ids: Vec<VarId> = (0..n)
        .map(|i| {
            let upper = rng.random_range(1.0..5.0);
            start.push(upper * rng.random_range(0.2..0.8));
            p.add_var(format!("x{i}"), 0.0, upper)
        })
        .collect();
    for &id in &ids {
        p.add_objective(id, rng.random_range(-1.0..1.0));
    }

    let rows = rng.random_range(n..2 * n + 2);
    for r in 0..rows {
        let pick = if affine_only {
            0
        } else {
            rng.random_range(0..4)
        };
        let slack = rng.random_range(0.05..1.0);
        let sparse = |rng: &mut R, lo: f64, hi: f64| -> Vec<(VarId, f64)> {
            let mut out = Vec::new();
            for &id in &ids {
                if rng.random_bool(0.6) {
                    out.push((id, rng.random_range(lo..hi)));
                }
            }
            out
        };
        let dot = |t: &[(VarId, f64)], x: &[f64]| t.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>();
        let c = match pick {
            0 => {
                let a = sparse(rng, -1.0, 1.0);
                let b = dot(&a, &start) + slack;
                Constraint::Affine { a, b }
            }
            1 => {
                let q = sparse(rng, 0.0, 1.0);
                let a = sparse(rng, -1.0, 1.0);
                let b = q
                    .iter()
                    .map(|&(v, c)| c * start[v.0] * start[v.0])
                    .sum::<f64>()
                    + dot(&a, &start)
                    + slack;
                Constraint::QuadLeAffine { q, a, b }
            }
            2 => {
                let sq = ids[rng.random_range(0..n)];
                let mut arg = ids[rng.random_range(0..n)];
                while arg == sq {
                    arg = ids[rng.random_range(0..n)];
                }
                let scale = (start[sq.0].powi(2) + slack) / (1.0 + start[arg.0]).log2();
                Constraint::SqLeLog { sq, arg, scale }
            }
            _ => {
                let sq = ids[rng.random_range(0..n)];
                let mut a: Vec<(VarId, f64)> = ids
                    .iter()
                    .filter(|&&id| id != sq)
                    .map(|&id| (id, rng.random_range(0.0..1.0)))
                    .collect();
                let lhs = start[sq.0].powi(2) + slack;
                let rhs = dot(&a, &start);
                for t in &mut a {
                    t.1 *= lhs / rhs;
                }
                Constraint::SocNum { sq, a }
            }
        };
        p.add_constraint(format!("r{r}"), c)
            .expect("generated rows are valid");
    }
    RandomProgram { program: p, start }
}

/// Best vertex of an all-affine program with finite bounds, by enumerating
/// every choice of `n` active rows. Only sensible for a handful of variables.
pub fn brute_force_lp(program: &ConvexProgram) -> Option<(Vec<f64>, f64)> {
    let n = program.num_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (_, c) in program.constraints() {
        let (a, b) = match c {
            Constraint::Affine { a, b } => (a, *b),
            Constraint::QuadLeAffine { q, a, b } if q.iter().all(|t| t.1 == 0.0) => (a, *b),
            _ => return None,
        };
        let mut dense = vec![0.0; n];
        for &(v, coef) in a {
            dense[v.0] += coef;
        }
        rows.push((dense, b));
    }
    for (i, v) in program.variables().iter().enumerate() {
        let mut e = vec![0.0; n];
        if v.upper.is_finite() {
            e[i] = 1.0;
            rows.push((e.clone(), v.upper));
        }
        if v.lower.is_finite() {
            e[i] = -1.0;
            rows.push((e, -v.lower));
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |r, c| rows[subset[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| rows[subset[r]].1);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            let feasible = rows.iter().all(|(a, b)| {
                let lhs: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
                lhs <= b + 1e-9 * (1.0 + b.abs())
            });
            if feasible && x.iter().all(|v| v.is_finite()) {
                let obj = program.objective_value(&x);
                if best.as_ref().is_none_or(|(_, o)| obj > *o) {
                    best = Some((x, obj));
                }
            }
        }
        if !next_combination(&mut subset, rows.len()) {
            break;
        }
    }
    best
}

fn next_combination(c: &mut [usize], total: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < total - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone)]
pub struct SelfTestCase {
    pub index: usize,
    pub vars: usize,
    pub rows: usize,
    pub affine_only: bool,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub objective: f64,
    /// Vertex-enumeration optimum, for affine cases.
    pub reference: Option<f64>,
}

impl SelfTestCase {
    pub fn reference_gap(&self) -> Option<f64> {
        self.reference.map(|r| (r - self.objective).abs())
    }

    pub fn passed(&self, tol: f64, ref_tol: f64) -> bool {
        self.status == SolveStatus::Optimal
            && self.kkt_residual <= tol
            && self.reference_gap().is_none_or(|g| g <= ref_tol)
    }
}

/// Solves `count` random programs; every fourth one is all-affine with at
/// most five variables and is checked against [`brute_force_lp`].
pub fn run_selftest(count: usize, seed: u64, opts: &SolverOptions) -> Vec<SelfTestCase> {
    (0..count)
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let affine_only = index % 4 == 0;
            let n = if affine_only {
                rng.random_range(2..=5)
            } else {
                rng.random_range(2..=8)
            };
            let rp = random_program(&mut rng, n, affine_only);
            let res =
                solve(&rp.program, &rp.start, opts).expect("generated programs are well-formed");
            let reference = if affine_only {
                brute_force_lp(&rp.program).map(|(_, o)| o)
            } else {
                None
            };
            SelfTestCase {
                index,
                vars: n,
                rows: rp.program.constraints().len(),
                affine_only,
                status: res.status,
                kkt_residual: res.kkt_residual,
                objective: res.objective,
                reference,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_enumerate_binomial_count() {
        let mut c = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut c, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
    }

    #[test]
    fn brute_force_finds_known_corner() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x", 0.0, 10.0);
        let y = p.add_var("y", 0.0, 10.0);
        p.add_objective(x, 1.0);
        p.add_objective(y, 1.0);
        p.add_constraint(
            "a",
            Constraint::Affine {
                a: vec![(x, 1.0), (y, 2.0)],
                b: 4.0,
            },
        )
        .unwrap();
        p.add_constraint(
            "b",
            Constraint::Affine {
                a: vec![(x, 3.0), (y, 1.0)],
                b: 6.0,
            },
        )
        .unwrap();
        let (pt, obj) = brute_force_lp(&p).unwrap();
        assert!((pt[0] - 1.6).abs() < 1e-12 && (pt[1] - 1.2).abs() < 1e-12);
        assert!((obj - 2.8).abs() < 1e-12);
    }

    #[test]
    fn random_programs_start_strictly_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rp = random_program(&mut rng, 6, false);
            assert!(rp
                .program
                .constraint_values(&rp.start)
                .iter()
                .all(|&g| g < 0.0));
            assert_eq!(rp.program.max_violation(&rp.start), 0.0);
        }
    }
}
