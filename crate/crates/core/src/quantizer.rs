//! Optimal mid-rise uniform quantizer for a unit-variance Gaussian input and
//! its Bussgang gains.

use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerParams {
    /// Bits per real dimension; 0 for the unquantized fronthaul.
    pub nu: u32,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub delta_opt: f64,
}

fn phi(t: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// P(X > t) for standard normal X.
fn upper_tail(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// Gains (ã, b̃) of the `2^nu`-level mid-rise quantizer with step `delta`.
pub fn bussgang_gains(nu: u32, delta: f64) -> (f64, f64) {
    let levels = 1usize << nu;
    let half = levels as f64 / 2.0;
    let (mut a, mut b) = (0.0, 0.0);
    // Symmetric: accumulate the positive half and double.
    for i in levels / 2..levels {
        let y = (i as f64 - half + 0.5) * delta;
        let lo = (i as f64 - half) * delta;
        let hi = if i + 1 == levels {
            f64::INFINITY
        } else {
            (i as f64 + 1.0 - half) * delta
        };
        a += y * (phi(lo) - phi(hi));
        let mass = upper_tail(lo)
            - if hi.is_infinite() {
                0.0
            } else {
                upper_tail(hi)
            };
        b += y * y * mass;
    }
    (2.0 * a, 2.0 * b)
}

/// Mean-squared quantization error E{(x − h(x))²} for unit-variance input.
pub fn quantizer_mse(nu: u32, delta: f64) -> f64 {
    let (a, b) = bussgang_gains(nu, delta);
    1.0 - 2.0 * a + b
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl QuantizerParams {
    pub fn new(nu: u32) -> Result<Self, crate::CoreError> {
        if !(1..=8).contains(&nu) {
            return Err(crate::CoreError::UnsupportedBits(nu));
        }
        let mse = |d: f64| quantizer_mse(nu, d);
        // Coarse scan to bracket the minimum, then refine.
        let grid: Vec<f64> = (1..=400).map(|i| i as f64 * 0.01).collect();
        let best = grid
            .iter()
            .copied()
            .min_by(|x, y| mse(*x).total_cmp(&mse(*y)))
            .expect("grid is nonempty");
        let (lo, hi) = ((best - 0.01).max(1e-6), best + 0.01);
        // At the optimum dMSE/dΔ ∝ b̃ − ã vanishes; its root pins Δ far more
        // tightly than the flat MSE minimum does.
        let slope = |d: f64| {
            let (a, b) = bussgang_gains(nu, d);
            b - a
        };
        let delta = if slope(lo) < 0.0 && slope(hi) > 0.0 {
            bisect(slope, lo, hi)
        } else {
            golden_section(mse, lo, hi, 1e-12)
        };
        let (a_tilde, b_tilde) = bussgang_gains(nu, delta);
        Ok(Self {
            nu,
            a_tilde,
            b_tilde,
            delta_opt: delta,
        })
    }

    /// Unquantized fronthaul: ã = b̃ = 1.
    pub fn ideal() -> Self {
        Self {
            nu: 0,
            a_tilde: 1.0,
            b_tilde: 1.0,
            delta_opt: 0.0,
        }
    }

    pub fn for_config(cfg: &crate::SystemConfig) -> Result<Self, crate::CoreError> {
        if cfg.fronthaul.perfect {
            Ok(Self::ideal())
        } else {
            Self::new(cfg.fronthaul.bits)
        }
    }

    /// Distortion factor b̃ − ã².
    pub fn distortion(&self) -> f64 {
        (self.b_tilde - self.a_tilde * self.a_tilde).max(0.0)
    }

    pub fn sdr(&self) -> f64 {
        self.a_tilde * self.a_tilde / self.distortion()
    }

    pub fn is_ideal(&self) -> bool {
        self.nu == 0
    }
}
