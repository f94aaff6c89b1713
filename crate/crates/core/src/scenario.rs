//! Network drops on a wrap-around square and their large-scale fading.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::config::{GeometryConfig, PathLossParams, SystemConfig};
use crate::fronthaul::ServiceMap;
use crate::rng::{derive_seed, standard_normal, stream_rng};
use crate::CoreError;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub side_km: f64,
    pub aps: Vec<Point>,
    pub dl_ues: Vec<Point>,
    pub ul_ues: Vec<Point>,
}

/// Large-scale quantities of one drop. Matrices are indexed (AP, UE),
/// `beta_udi` is (DL UE, UL UE) and `beta_ri` is (receiving AP, transmitting AP).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub beta_dl: DMatrix<f64>,
    pub beta_ul: DMatrix<f64>,
    pub beta_udi: DMatrix<f64>,
    pub beta_ri: DMatrix<f64>,
    pub gamma_dl: DMatrix<f64>,
    pub gamma_ul: DMatrix<f64>,
    pub layout: Option<Layout>,
}

pub fn place_network(geom: &GeometryConfig, seed: u64) -> Layout {
    let mut rng = stream_rng(seed, 0);
    let d = geom.side_km;
    let mut pts = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|_| [rng.random_range(0.0..d), rng.random_range(0.0..d)])
            .collect()
    };
    let aps = pts(geom.aps);
    let dl_ues = pts(geom.dl_ues);
    let ul_ues = pts(geom.ul_ues);
    Layout {
        side_km: d,
        aps,
        dl_ues,
        ul_ues,
    }
}

/// Euclidean distance on the torus of side `d`.
pub fn wrapped_distance(a: Point, b: Point, d: f64) -> f64 {
    let axis = |u: f64, v: f64| {
        let t = (u - v).abs();
        t.min(d - t)
    };
    axis(a[0], b[0]).hypot(axis(a[1], b[1]))
}

/// Hata-COST231 attenuation constant L (dB) for the given antenna heights.
pub fn hata_attenuation_db(freq_mhz: f64, h_tx_m: f64, h_rx_m: f64) -> f64 {
    let lf = freq_mhz.log10();
    46.3 + 33.9 * lf - 13.82 * h_tx_m.log10() - (1.1 * lf - 0.7) * h_rx_m + (1.56 * lf - 0.8)
}

/// Three-slope path loss (dB, nonpositive) at distance `d_km` for an AP-UE link.
pub fn path_loss_db(d_km: f64, p: &PathLossParams) -> f64 {
    path_loss_db_heights(d_km, p, p.h_ap_m, p.h_ue_m)
}

pub fn path_loss_db_heights(d_km: f64, p: &PathLossParams, h_tx_m: f64, h_rx_m: f64) -> f64 {
    let l = p
        .attenuation_db
        .unwrap_or_else(|| hata_attenuation_db(p.freq_mhz, h_tx_m, h_rx_m));
    let d0 = p.d0_m / 1000.0;
    let d1 = p.d1_m / 1000.0;
    if d_km > d1 {
        -l - 35.0 * d_km.log10()
    } else if d_km > d0 {
        -l - 15.0 * d1.log10() - 20.0 * d_km.log10()
    } else {
        -l - 15.0 * d1.log10() - 20.0 * d0.log10()
    }
}

/// Zero-mean unit-variance Gaussian field over `pts` with correlation
/// 2^(-distance/decorr).
fn correlated_field<R: Rng>(rng: &mut R, pts: &[Point], side_km: f64, decorr_m: f64) -> Vec<f64> {
    let n = pts.len();
    if n == 0 {
        return Vec::new();
    }
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let d_m = 1000.0 * wrapped_distance(pts[i], pts[j], side_km);
        2f64.powf(-d_m / decorr_m)
    });
    let eig = SymmetricEigen::new(cov);
    let mut factor = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    for mut row in factor.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let w: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
    (0..n)
        .map(|i| (0..n).map(|j| factor[(i, j)] * w[j]).sum())
        .collect()
}

/// Shadowing terms of the AP-UE links.
#[derive(Debug, Clone, PartialEq)]
pub struct Shadowing {
    pub z_dl: DMatrix<f64>,
    pub z_ul: DMatrix<f64>,
}

/// Two-component model z = √δ·a_m + √(1−δ)·b_k with one field over the APs
/// and one over all UEs (downlink first, then uplink).
pub fn correlated_shadowing(layout: &Layout, p: &PathLossParams, seed: u64) -> Shadowing {
    let mut rng = stream_rng(seed, 1);
    let a = correlated_field(&mut rng, &layout.aps, layout.side_km, p.decorr_m);
    let ues: Vec<Point> = layout
        .dl_ues
        .iter()
        .chain(&layout.ul_ues)
        .copied()
        .collect();
    let b = correlated_field(&mut rng, &ues, layout.side_km, p.decorr_m);
    let kd = layout.dl_ues.len();
    let (sa, sb) = (p.shadow_delta.sqrt(), (1.0 - p.shadow_delta).sqrt());
    let m = layout.aps.len();
    Shadowing {
        z_dl: DMatrix::from_fn(m, kd, |i, k| sa * a[i] + sb * b[k]),
        z_ul: DMatrix::from_fn(m, layout.ul_ues.len(), |i, l| sa * a[i] + sb * b[kd + l]),
    }
}

/// MMSE estimate quality γ = τρβ²/(τρβ + 1).
pub fn estimate_quality(tau: f64, rho_t: f64, beta: f64) -> f64 {
    let x = tau * rho_t * beta;
    x * beta / (x + 1.0)
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn build_scenario(
    layout: &Layout,
    cfg: &SystemConfig,
    seed: u64,
) -> Result<Scenario, CoreError> {
    let p = &cfg.pathloss;
    let sd = p.shadow_sd_db;
    let d = layout.side_km;
    let sh = correlated_shadowing(layout, p, seed);
    let (m, kd, ku) = (layout.aps.len(), layout.dl_ues.len(), layout.ul_ues.len());

    let beta_dl = DMatrix::from_fn(m, kd, |i, k| {
        let pl = path_loss_db(wrapped_distance(layout.aps[i], layout.dl_ues[k], d), p);
        db_to_lin(pl + sd * sh.z_dl[(i, k)])
    });
    let beta_ul = DMatrix::from_fn(m, ku, |i, l| {
        let pl = path_loss_db(wrapped_distance(layout.aps[i], layout.ul_ues[l], d), p);
        db_to_lin(pl + sd * sh.z_ul[(i, l)])
    });

    let mut rng = stream_rng(seed, 2);
    let beta_udi = DMatrix::from_fn(kd, ku, |k, l| {
        let dist = wrapped_distance(layout.dl_ues[k], layout.ul_ues[l], d);
        let pl = path_loss_db_heights(dist, p, p.h_ue_m, p.h_ue_m);
        db_to_lin(pl + sd * standard_normal(&mut rng))
    });
    let mut beta_ri = DMatrix::from_element(m, m, db_to_lin(cfg.radio.pl_ri_db));
    for i in 0..m {
        for j in i + 1..m {
            let dist = wrapped_distance(layout.aps[i], layout.aps[j], d);
            let pl = path_loss_db_heights(dist, p, p.h_ap_m, p.h_ap_m);
            let v = db_to_lin(pl + sd * standard_normal(&mut rng));
            beta_ri[(i, j)] = v;
            beta_ri[(j, i)] = v;
        }
    }

    let mut scn = Scenario::from_large_scale(beta_dl, beta_ul, beta_udi, beta_ri, cfg)?;
    scn.layout = Some(layout.clone());
    Ok(scn)
}

/// Places a network and builds its scenario, all from one drop seed.
pub fn generate_drop(cfg: &SystemConfig, seed: u64) -> Result<Scenario, CoreError> {
    let layout = place_network(&cfg.geometry, derive_seed(seed, 1));
    build_scenario(&layout, cfg, derive_seed(seed, 2))
}

impl Scenario {
    /// Scenario from given large-scale matrices; γ follows from the pilot
    /// lengths and pilot SNR in `cfg`.
    pub fn from_large_scale(
        beta_dl: DMatrix<f64>,
        beta_ul: DMatrix<f64>,
        beta_udi: DMatrix<f64>,
        beta_ri: DMatrix<f64>,
        cfg: &SystemConfig,
    ) -> Result<Self, CoreError> {
        let m = beta_dl.nrows();
        if beta_ul.nrows() != m || beta_ri.shape() != (m, m) {
            return Err(CoreError::Dimension(
                "AP counts differ across β matrices".into(),
            ));
        }
        if beta_udi.shape() != (beta_dl.ncols(), beta_ul.ncols()) {
            return Err(CoreError::Dimension(format!(
                "β̃ is {:?}, expected ({}, {})",
                beta_udi.shape(),
                beta_dl.ncols(),
                beta_ul.ncols()
            )));
        }
        let rho_t = cfg.rho_t();
        if !(rho_t > 0.0 && rho_t.is_finite()) {
            return Err(CoreError::Scenario(format!(
                "pilot SNR must be positive, got {rho_t}"
            )));
        }
        if cfg.frame.tau_t_dl == 0 || cfg.frame.tau_t_ul == 0 {
            return Err(CoreError::Scenario("pilot lengths must be nonzero".into()));
        }
        for (name, b) in [
            ("β^d", &beta_dl),
            ("β^u", &beta_ul),
            ("β̃", &beta_udi),
            ("β_RI", &beta_ri),
        ] {
            if b.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(CoreError::Scenario(format!(
                    "{name} has negative or non-finite entries"
                )));
            }
        }
        let mut scn = Scenario {
            gamma_dl: DMatrix::zeros(0, 0),
            gamma_ul: DMatrix::zeros(0, 0),
            beta_dl,
            beta_ul,
            beta_udi,
            beta_ri,
            layout: None,
        };
        scn.refresh_gamma(cfg);
        Ok(scn)
    }

    fn refresh_gamma(&mut self, cfg: &SystemConfig) {
        let rho_t = cfg.rho_t();
        let (td, tu) = (cfg.frame.tau_t_dl as f64, cfg.frame.tau_t_ul as f64);
        self.gamma_dl = self.beta_dl.map(|b| estimate_quality(td, rho_t, b));
        self.gamma_ul = self.beta_ul.map(|b| estimate_quality(tu, rho_t, b));
    }

    pub fn num_aps(&self) -> usize {
        self.beta_dl.nrows()
    }

    pub fn num_dl(&self) -> usize {
        self.beta_dl.ncols()
    }

    pub fn num_ul(&self) -> usize {
        self.beta_ul.ncols()
    }

    /// Sets β^d and β^u to one on every served pair and recomputes γ.
    pub fn unity_on_served(&mut self, map: &ServiceMap, cfg: &SystemConfig) {
        for m in 0..self.num_aps() {
            for &k in &map.kappa_dm[m] {
                self.beta_dl[(m, k)] = 1.0;
            }
            for &l in &map.kappa_um[m] {
                self.beta_ul[(m, l)] = 1.0;
            }
        }
        self.refresh_gamma(cfg);
    }
}
