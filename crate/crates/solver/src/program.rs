//! Program representation: named variables with box bounds, a linear
//! objective to maximize and a small taxonomy of smooth convex constraints.

use std::fmt;

use crate::SolverError;

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    /// `f64::NEG_INFINITY` when unbounded below.
    pub lower: f64,
    /// `f64::INFINITY` when unbounded above.
    pub upper: f64,
}

/// A convex inequality `g(x) ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `a·x ≤ b`
    Affine { a: Vec<(VarId, f64)>, b: f64 },
    /// `Σ q_i x_i² + a·x ≤ b`, every `q_i ≥ 0`.
    QuadLeAffine {
        q: Vec<(VarId, f64)>,
        a: Vec<(VarId, f64)>,
        b: f64,
    },
    /// `x_sq² ≤ scale·log₂(1 + x_arg)`, `scale > 0`.
    SqLeLog { sq: VarId, arg: VarId, scale: f64 },
    /// `x_sq² ≤ a·x`.
    SocNum { sq: VarId, a: Vec<(VarId, f64)> },
}

impl Constraint {
    pub fn kind(&self) -> &'static str {
        match self {
            Constraint::Affine { .. } => "AFFINE",
            Constraint::QuadLeAffine { .. } => "QUAD_LE_AFFINE",
            Constraint::SqLeLog { .. } => "SQ_LE_LOG",
            Constraint::SocNum { .. } => "SOC_NUM",
        }
    }

    pub fn is_affine(&self) -> bool {
        match self {
            Constraint::Affine { .. } => true,
            Constraint::QuadLeAffine { q, .. } => q.iter().all(|&(_, c)| c == 0.0),
            _ => false,
        }
    }

    fn var_ids(&self) -> Vec<VarId> {
        match self {
            Constraint::Affine { a, .. } => a.iter().map(|t| t.0).collect(),
            Constraint::QuadLeAffine { q, a, .. } => q.iter().chain(a).map(|t| t.0).collect(),
            Constraint::SqLeLog { sq, arg, .. } => vec![*sq, *arg],
            Constraint::SocNum { sq, a } => {
                std::iter::once(*sq).chain(a.iter().map(|t| t.0)).collect()
            }
        }
    }
}

/// Linear objective (maximized) subject to box bounds and convex rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexProgram {
    vars: Vec<Variable>,
    objective: Vec<f64>,
    constraints: Vec<(String, Constraint)>,
}

impl ConvexProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn add_free_var(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Adds `coef·x_var` to the maximized objective.
    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var.0] += coef;
    }

    pub fn add_constraint(
        &mut self,
        label: impl Into<String>,
        constraint: Constraint,
    ) -> Result<(), SolverError> {
        let label = label.into();
        for id in constraint.var_ids() {
            if id.0 >= self.vars.len() {
                return Err(SolverError::UnknownVariable { label, index: id.0 });
            }
        }
        let bad = |reason: &str| SolverError::NonConvex {
            label: label.clone(),
            reason: reason.to_string(),
        };
        match &constraint {
            Constraint::QuadLeAffine { q, .. } => {
                if q.iter().any(|&(_, c)| !(c >= 0.0)) {
                    return Err(bad("negative quadratic coefficient"));
                }
            }
            Constraint::SqLeLog { sq, arg, scale } => {
                if !(*scale > 0.0) {
                    return Err(bad("log scale must be positive"));
                }
                if sq == arg {
                    return Err(bad("squared and log arguments must differ"));
                }
            }
            Constraint::SocNum { sq, a } => {
                if a.iter().any(|t| t.0 == *sq) {
                    return Err(bad("squared variable repeated on the right side"));
                }
            }
            Constraint::Affine { .. } => {}
        }
        self.constraints.push((label, constraint));
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[(String, Constraint)] {
        &self.constraints
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Value of `g_i(x)` for each constraint (feasible iff ≤ 0).
    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.rows().iter().map(|r| r.value(x)).collect()
    }

    /// Largest violation over constraints and bounds (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraint_values(x).into_iter().map(|g| {
            if g.is_nan() {
                f64::INFINITY
            } else {
                g.max(0.0)
            }
        });
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub(crate) fn rows(&self) -> Vec<Row> {
        self.constraints
            .iter()
            .map(|(_, c)| Row::from_constraint(c))
            .collect()
    }
}

fn fmt_terms(
    f: &mut fmt::Formatter<'_>,
    vars: &[Variable],
    terms: &[(VarId, f64)],
    square: bool,
) -> fmt::Result {
    for (i, (id, c)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 {
            "-"
        } else if i == 0 {
            ""
        } else {
            "+"
        };
        let sq = if square { "^2" } else { "" };
        write!(
            f,
            "{}{} {}*{}{} ",
            if i == 0 { "" } else { " " },
            sign,
            c.abs(),
            vars[id.0].name,
            sq
        )?;
    }
    Ok(())
}

/// One constraint per line, bounds last.
impl fmt::Display for ConvexProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "maximize ")?;
        let obj: Vec<_> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (VarId(i), *c))
            .collect();
        fmt_terms(f, &self.vars, &obj, false)?;
        writeln!(f)?;
        for (label, c) in &self.constraints {
            write!(f, "[{}] {}: ", c.kind(), label)?;
            match c {
                Constraint::Affine { a, b } => {
                    fmt_terms(f, &self.vars, a, false)?;
                    writeln!(f, "<= {b}")?;
                }
                Constraint::QuadLeAffine { q, a, b } => {
                    fmt_terms(f, &self.vars, q, true)?;
                    fmt_terms(f, &self.vars, a, false)?;
                    writeln!(f, "<= {b}")?;
                }
                Constraint::SqLeLog { sq, arg, scale } => writeln!(
                    f,
                    "{}^2 <= {} * log2(1 + {})",
                    self.vars[sq.0].name, scale, self.vars[arg.0].name
                )?,
                Constraint::SocNum { sq, a } => {
                    write!(f, "{}^2 <= ", self.vars[sq.0].name)?;
                    fmt_terms(f, &self.vars, a, false)?;
                    writeln!(f)?;
                }
            }
        }
        for v in &self.vars {
            if v.lower.is_finite() || v.upper.is_finite() {
                writeln!(f, "[BOUND] {} <= {} <= {}", v.lower, v.name, v.upper)?;
            }
        }
        Ok(())
    }
}

/// Normalized smooth row:
/// `g(x) = Σ q_i x_i² + Σ a_i x_i − rhs − scale·log₂(1 + x_arg)`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub support: Vec<usize>,
    quad: Vec<f64>,
    lin: Vec<f64>,
    rhs: f64,
    log: Option<(usize, f64)>,
}

impl Row {
    pub fn new(
        quad: &[(usize, f64)],
        lin: &[(usize, f64)],
        rhs: f64,
        log: Option<(usize, f64)>,
    ) -> Self {
        let mut support: Vec<usize> = quad
            .iter()
            .chain(lin)
            .map(|t| t.0)
            .chain(log.map(|l| l.0))
            .collect();
        support.sort_unstable();
        support.dedup();
        let pos = |i: usize| support.binary_search(&i).unwrap();
        let mut q = vec![0.0; support.len()];
        let mut a = vec![0.0; support.len()];
        for &(i, c) in quad {
            q[pos(i)] += c;
        }
        for &(i, c) in lin {
            a[pos(i)] += c;
        }
        let log = log.map(|(i, s)| (pos(i), s));
        Row {
            support,
            quad: q,
            lin: a,
            rhs,
            log,
        }
    }

    fn from_constraint(c: &Constraint) -> Self {
        let ids = |t: &[(VarId, f64)]| t.iter().map(|&(v, c)| (v.0, c)).collect::<Vec<_>>();
        match c {
            Constraint::Affine { a, b } => Row::new(&[], &ids(a), *b, None),
            Constraint::QuadLeAffine { q, a, b } => Row::new(&ids(q), &ids(a), *b, None),
            Constraint::SqLeLog { sq, arg, scale } => {
                Row::new(&[(sq.0, 1.0)], &[], 0.0, Some((arg.0, *scale)))
            }
            Constraint::SocNum { sq, a } => {
                let neg: Vec<_> = a.iter().map(|&(v, c)| (v.0, -c)).collect();
                Row::new(&[(sq.0, 1.0)], &neg, 0.0, None)
            }
        }
    }

    /// Appends `coef·x_var` to the linear part.
    pub fn with_linear(&self, var: usize, coef: f64) -> Row {
        let mut quad = Vec::new();
        let mut lin = Vec::new();
        for (k, &i) in self.support.iter().enumerate() {
            quad.push((i, self.quad[k]));
            lin.push((i, self.lin[k]));
        }
        lin.push((var, coef));
        let log = self.log.map(|(k, s)| (self.support[k], s));
        Row::new(&quad, &lin, self.rhs, log)
    }

    pub fn log_arg(&self) -> Option<usize> {
        self.log.map(|(k, _)| self.support[k])
    }

    /// `+∞` outside the log domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut g = -self.rhs;
        for (k, &i) in self.support.iter().enumerate() {
            let xi = x[i];
            g += self.quad[k] * xi * xi + self.lin[k] * xi;
        }
        if let Some((k, s)) = self.log {
            let arg = 1.0 + x[self.support[k]];
            if arg <= 0.0 {
                return f64::INFINITY;
            }
            g -= s * arg.log2();
        }
        g
    }

    /// Gradient and diagonal Hessian on `support`.
    pub fn derivatives(&self, x: &[f64], grad: &mut Vec<f64>, hess: &mut Vec<f64>) {
        grad.clear();
        hess.clear();
        for (k, &i) in self.support.iter().enumerate() {
            grad.push(2.0 * self.quad[k] * x[i] + self.lin[k]);
            hess.push(2.0 * self.quad[k]);
        }
        if let Some((k, s)) = self.log {
            let arg = 1.0 + x[self.support[k]];
            let ln2 = std::f64::consts::LN_2;
            grad[k] -= s / (arg * ln2);
            hess[k] += s / (arg * arg * ln2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_quadratic() {
        let mut p = ConvexProgram::new();
        let x = p.add_free_var("x");
        let err = p
            .add_constraint(
                "bad",
                Constraint::QuadLeAffine {
                    q: vec![(x, -1.0)],
                    a: vec![],
                    b: 1.0,
                },
            )
            .unwrap_err();
        assert!(matches!(err, SolverError::NonConvex { .. }));
    }

    #[test]
    fn rejects_unknown_variable() {
        let mut p = ConvexProgram::new();
        let err = p
            .add_constraint(
                "ghost",
                Constraint::Affine {
                    a: vec![(VarId(3), 1.0)],
                    b: 0.0,
                },
            )
            .unwrap_err();
        assert!(matches!(err, SolverError::UnknownVariable { index: 3, .. }));
    }

    #[test]
    fn row_derivatives_match_finite_differences() {
        let row = Row::new(
            &[(0, 2.0), (1, 0.5)],
            &[(1, -1.0), (2, 3.0)],
            1.5,
            Some((2, 0.7)),
        );
        let x = [0.3, -0.8, 1.2];
        let (mut g, mut h) = (Vec::new(), Vec::new());
        row.derivatives(&x, &mut g, &mut h);
        let eps = 1e-6;
        for (k, &i) in row.support.iter().enumerate() {
            let mut xp = x;
            let mut xm = x;
            xp[i] += eps;
            xm[i] -= eps;
            let fd = (row.value(&xp) - row.value(&xm)) / (2.0 * eps);
            assert!((fd - g[k]).abs() < 1e-7, "grad {k}: {fd} vs {}", g[k]);
            let e2 = 1e-4;
            let (mut xp, mut xm) = (x, x);
            xp[i] += e2;
            xm[i] -= e2;
            let fd2 = (row.value(&xp) - 2.0 * row.value(&x) + row.value(&xm)) / (e2 * e2);
            assert!((fd2 - h[k]).abs() < 1e-5, "hess {k}: {fd2} vs {}", h[k]);
        }
    }

    #[test]
    fn dump_lists_one_constraint_per_line() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("psi", 0.0, 10.0);
        let z = p.add_var("zeta", 0.0, f64::INFINITY);
        p.add_objective(x, 1.0);
        p.add_constraint(
            "rate",
            Constraint::SqLeLog {
                sq: x,
                arg: z,
                scale: 0.9,
            },
        )
        .unwrap();
        p.add_constraint(
            "cap",
            Constraint::Affine {
                a: vec![(z, 1.0)],
                b: 3.0,
            },
        )
        .unwrap();
        let text = p.to_string();
        assert!(text.contains("[SQ_LE_LOG] rate: psi^2 <= 0.9 * log2(1 + zeta)"));
        assert!(text.contains("[AFFINE] cap:"));
        assert_eq!(text.lines().filter(|l| l.starts_with("[BOUND]")).count(), 2);
    }
}
