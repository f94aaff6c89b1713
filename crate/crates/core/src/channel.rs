//! Small-scale fading draws with MMSE estimate/error splits.

use num_complex::Complex64;
use rand::Rng;

use crate::rng::{complex_normal, stream_rng};
use crate::scenario::Scenario;
use crate::CoreError;

/// One coherence block. Link vectors are stored contiguously: DL link (m, k)
/// occupies `[(m*K_d + k)*N_t ..][..N_t]`, UL link (m, l) likewise with N_r,
/// and the RI block H_mi is an N_r×N_t row-major matrix at `(m*M + i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub m: usize,
    pub kd: usize,
    pub ku: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub g_dl: Vec<Complex64>,
    pub g_dl_hat: Vec<Complex64>,
    pub e_dl: Vec<Complex64>,
    pub g_ul: Vec<Complex64>,
    pub g_ul_hat: Vec<Complex64>,
    pub e_ul: Vec<Complex64>,
    /// K_d×K_u, row-major.
    pub h_udi: Vec<Complex64>,
    pub h_ri: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn g_dl(&self, m: usize, k: usize) -> &[Complex64] {
        let s = (m * self.kd + k) * self.n_t;
        &self.g_dl[s..s + self.n_t]
    }

    pub fn g_dl_hat(&self, m: usize, k: usize) -> &[Complex64] {
        let s = (m * self.kd + k) * self.n_t;
        &self.g_dl_hat[s..s + self.n_t]
    }

    pub fn e_dl(&self, m: usize, k: usize) -> &[Complex64] {
        let s = (m * self.kd + k) * self.n_t;
        &self.e_dl[s..s + self.n_t]
    }

    pub fn g_ul(&self, m: usize, l: usize) -> &[Complex64] {
        let s = (m * self.ku + l) * self.n_r;
        &self.g_ul[s..s + self.n_r]
    }

    pub fn g_ul_hat(&self, m: usize, l: usize) -> &[Complex64] {
        let s = (m * self.ku + l) * self.n_r;
        &self.g_ul_hat[s..s + self.n_r]
    }

    pub fn e_ul(&self, m: usize, l: usize) -> &[Complex64] {
        let s = (m * self.ku + l) * self.n_r;
        &self.e_ul[s..s + self.n_r]
    }

    pub fn h_udi(&self, k: usize, l: usize) -> Complex64 {
        self.h_udi[k * self.ku + l]
    }

    pub fn h_ri(&self, m: usize, i: usize) -> &[Complex64] {
        let sz = self.n_r * self.n_t;
        let s = (m * self.m + i) * sz;
        &self.h_ri[s..s + sz]
    }
}

fn error_variance(beta: f64, gamma: f64) -> Result<f64, CoreError> {
    let v = beta - gamma;
    if v < -1e-12 * beta.abs().max(f64::MIN_POSITIVE) {
        return Err(CoreError::Scenario(format!(
            "γ = {gamma} exceeds β = {beta}"
        )));
    }
    Ok(v.max(0.0))
}

pub fn draw_channels_with<R: Rng>(
    scn: &Scenario,
    n_t: usize,
    n_r: usize,
    gamma_ri: f64,
    rng: &mut R,
) -> Result<ChannelRealization, CoreError> {
    let (m, kd, ku) = (scn.num_aps(), scn.num_dl(), scn.num_ul());
    let mut g_dl = Vec::with_capacity(m * kd * n_t);
    let mut g_dl_hat = Vec::with_capacity(m * kd * n_t);
    let mut e_dl = Vec::with_capacity(m * kd * n_t);
    for i in 0..m {
        for k in 0..kd {
            let (b, g) = (scn.beta_dl[(i, k)], scn.gamma_dl[(i, k)]);
            let ev = error_variance(b, g)?;
            for _ in 0..n_t {
                let h = complex_normal(rng, g);
                let e = if ev > 0.0 {
                    complex_normal(rng, ev)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                g_dl_hat.push(h);
                e_dl.push(e);
                g_dl.push(h + e);
            }
        }
    }
    let mut g_ul = Vec::with_capacity(m * ku * n_r);
    let mut g_ul_hat = Vec::with_capacity(m * ku * n_r);
    let mut e_ul = Vec::with_capacity(m * ku * n_r);
    for i in 0..m {
        for l in 0..ku {
            let (b, g) = (scn.beta_ul[(i, l)], scn.gamma_ul[(i, l)]);
            let ev = error_variance(b, g)?;
            for _ in 0..n_r {
                let h = complex_normal(rng, g);
                let e = if ev > 0.0 {
                    complex_normal(rng, ev)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                g_ul_hat.push(h);
                e_ul.push(e);
                g_ul.push(h + e);
            }
        }
    }
    let h_udi = (0..kd * ku)
        .map(|j| complex_normal(rng, scn.beta_udi[(j / ku, j % ku)]))
        .collect();
    let mut h_ri = Vec::with_capacity(m * m * n_r * n_t);
    for a in 0..m {
        for b in 0..m {
            let var = scn.beta_ri[(a, b)] * gamma_ri;
            for _ in 0..n_r * n_t {
                h_ri.push(complex_normal(rng, var));
            }
        }
    }
    Ok(ChannelRealization {
        m,
        kd,
        ku,
        n_t,
        n_r,
        g_dl,
        g_dl_hat,
        e_dl,
        g_ul,
        g_ul_hat,
        e_ul,
        h_udi,
        h_ri,
    })
}

pub fn draw_channels(
    scn: &Scenario,
    n_t: usize,
    n_r: usize,
    gamma_ri: f64,
    seed: u64,
) -> Result<ChannelRealization, CoreError> {
    draw_channels_with(scn, n_t, n_r, gamma_ri, &mut stream_rng(seed, 0))
}
