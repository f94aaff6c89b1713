use crate::program::ConvexProgram;

/// Lagrange multipliers for rows and for the lower/upper variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub constraints: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(rows: usize, vars: usize) -> Self {
        Self {
            constraints: vec![0.0; rows],
            lower: vec![0.0; vars],
            upper: vec![0.0; vars],
        }
    }
}

/// Worst violation of the KKT conditions of `max c·x s.t. g(x) ≤ 0, l ≤ x ≤ u`:
/// stationarity, complementary slackness, primal and dual feasibility.
pub fn kkt_residual(program: &ConvexProgram, x: &[f64], mult: &Multipliers) -> f64 {
    let n = program.num_vars();
    let rows = program.rows();
    let mut stationarity: Vec<f64> = program.objective().iter().map(|c| -c).collect();
    let mut worst = 0.0_f64;
    let (mut g, mut h) = (Vec::new(), Vec::new());

    for (row, &lam) in rows.iter().zip(&mult.constraints) {
        let value = row.value(x);
        if !value.is_finite() {
            return f64::INFINITY;
        }
        row.derivatives(x, &mut g, &mut h);
        for (k, &i) in row.support.iter().enumerate() {
            stationarity[i] += lam * g[k];
        }
        worst = worst
            .max(value.max(0.0))
            .max((-lam).max(0.0))
            .max((lam * value).abs());
    }
    for (i, v) in program.variables().iter().enumerate().take(n) {
        let (ll, lu) = (mult.lower[i], mult.upper[i]);
        stationarity[i] += lu - ll;
        worst = worst.max((-ll).max(0.0)).max((-lu).max(0.0));
        if v.lower.is_finite() {
            worst = worst
                .max((v.lower - x[i]).max(0.0))
                .max((ll * (x[i] - v.lower)).abs());
        } else {
            worst = worst.max(ll.abs());
        }
        if v.upper.is_finite() {
            worst = worst
                .max((x[i] - v.upper).max(0.0))
                .max((lu * (v.upper - x[i])).abs());
        } else {
            worst = worst.max(lu.abs());
        }
    }
    stationarity.iter().fold(worst, |acc, s| acc.max(s.abs()))
}
