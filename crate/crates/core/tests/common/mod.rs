#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

pub struct Oracle {
    pub rule: Vec<(f64, f64)>,
}

impl Oracle {
    pub fn new() -> Self {
        Self {
            rule: gauss_legendre(8),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let (lo, hi) = (a + p as f64 * h, a + (p + 1) as f64 * h);
                let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                self.rule
                    .iter()
                    .map(|(x, w)| w * r * f(c + r * x))
                    .sum::<f64>()
            })
            .sum()
    }

    /// (E{x h(x)}, E{h(x)²}) for the 2^ν-level mid-rise quantizer, integrating
    /// the Gaussian density cell by cell on the positive half-line.
    pub fn gains(&self, nu: u32, delta: f64) -> (f64, f64) {
        let levels = 1usize << nu;
        let half = levels / 2;
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..half {
            let y = (i as f64 + 0.5) * delta;
            let lo = i as f64 * delta;
            let hi = if i + 1 == half {
                lo.max(12.0) + 12.0
            } else {
                lo + delta
            };
            let panels = ((hi - lo) / 0.25).ceil().max(1.0) as usize;
            a += y * self.integrate(|x| x * pdf(x), lo, hi, panels);
            b += y * y * self.integrate(pdf, lo, hi, panels);
        }
        (2.0 * a, 2.0 * b)
    }

    /// MSE-optimal step by a coarse grid followed by two finer grids.
    pub fn optimal_delta(&self, nu: u32) -> f64 {
        let mse = |d: f64| {
            let (a, b) = self.gains(nu, d);
            1.0 - 2.0 * a + b
        };
        let mut best = 0.01;
        let (mut lo, mut step, mut count) = (0.01, 0.01, 400);
        for _ in 0..3 {
            best = (0..=count)
                .map(|i| lo + i as f64 * step)
                .min_by(|x, y| mse(*x).total_cmp(&mse(*y)))
                .unwrap();
            lo = best - step;
            step /= 100.0;
            count = 200;
        }
        best
    }
}
