//! Closed-form SE lower bounds and their per-term decomposition.

use std::io::Write;

use nalgebra::DMatrix;

use crate::alloc::PowerAllocation;
use crate::config::SystemConfig;
use crate::fronthaul::ServiceMap;
use crate::quantizer::QuantizerParams;
use crate::scenario::Scenario;
use crate::CoreError;

/// Coefficients of the SINR expressions. The DL quantities are indexed by
/// (AP, UE); the tensors are flattened with accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct SECoefficients {
    pub tau_f: f64,
    pub m: usize,
    pub kd: usize,
    pub ku: usize,
    /// A^d_mk = ã N_t √ρ_d γ^d_mk on served pairs.
    pub a_dl: DMatrix<f64>,
    /// B^d_kmq = b̃ N_t ρ_d β^d_mk γ^d_mq, flattened (k, m, q).
    pub b_dl: Vec<f64>,
    /// Coherent distortion (b̃−ã²) N_t² ρ_d (γ^d_mk)² on served pairs.
    pub e_dl: DMatrix<f64>,
    /// D^d_kl = ρ_u β̃_kl.
    pub d_dl: DMatrix<f64>,
    pub a_ul: Vec<f64>,
    /// B^u_lq (K_u×K_u).
    pub b_ul: DMatrix<f64>,
    /// D^u_lik flattened (l, i, k).
    pub d_ul: Vec<f64>,
    pub e_ul: Vec<f64>,
    pub f_ul: Vec<f64>,
    pub service: ServiceMap,
}

impl SECoefficients {
    pub fn b_dl(&self, k: usize, m: usize, q: usize) -> f64 {
        self.b_dl[(k * self.m + m) * self.kd + q]
    }

    pub fn d_ul(&self, l: usize, i: usize, k: usize) -> f64 {
        self.d_ul[(l * self.m + i) * self.kd + k]
    }
}

fn check_dims(scn: &Scenario, map: &ServiceMap) -> Result<(), CoreError> {
    if map.num_aps() != scn.num_aps()
        || map.m_dk.len() != scn.num_dl()
        || map.m_ul.len() != scn.num_ul()
    {
        return Err(CoreError::Dimension(format!(
            "service map is {}×({},{}), scenario is {}×({},{})",
            map.num_aps(),
            map.m_dk.len(),
            map.m_ul.len(),
            scn.num_aps(),
            scn.num_dl(),
            scn.num_ul()
        )));
    }
    Ok(())
}

fn check_alloc(scn: &Scenario, alloc: &PowerAllocation) -> Result<(), CoreError> {
    if alloc.c.shape() != (scn.num_aps(), scn.num_dl()) || alloc.theta.len() != scn.num_ul() {
        return Err(CoreError::Dimension(format!(
            "allocation is {:?}/{}, scenario needs ({}, {})/{}",
            alloc.c.shape(),
            alloc.theta.len(),
            scn.num_aps(),
            scn.num_dl(),
            scn.num_ul()
        )));
    }
    Ok(())
}

pub fn build_coefficients(
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    cfg: &SystemConfig,
) -> Result<SECoefficients, CoreError> {
    check_dims(scn, map)?;
    let (m, kd, ku) = (scn.num_aps(), scn.num_dl(), scn.num_ul());
    let (nt, nr) = (cfg.radio.n_tx as f64, cfg.radio.n_rx as f64);
    let (rho_d, rho_u) = (cfg.rho_d(), cfg.rho_u());
    let (a, b, dist) = (q.a_tilde, q.b_tilde, q.distortion());
    let g_ri = cfg.gamma_ri();

    let served_dl = |i: usize, k: usize| map.serves_dl(i, k);
    let a_dl = DMatrix::from_fn(m, kd, |i, k| {
        if served_dl(i, k) {
            a * nt * rho_d.sqrt() * scn.gamma_dl[(i, k)]
        } else {
            0.0
        }
    });
    let e_dl = DMatrix::from_fn(m, kd, |i, k| {
        if served_dl(i, k) {
            dist * nt * nt * rho_d * scn.gamma_dl[(i, k)].powi(2)
        } else {
            0.0
        }
    });
    let mut b_dl = vec![0.0; kd * m * kd];
    for k in 0..kd {
        for i in 0..m {
            for &qq in &map.kappa_dm[i] {
                b_dl[(k * m + i) * kd + qq] =
                    b * nt * rho_d * scn.beta_dl[(i, k)] * scn.gamma_dl[(i, qq)];
            }
        }
    }
    let d_dl = scn.beta_udi.map(|v| rho_u * v);

    let mut a_ul = vec![0.0; ku];
    let mut e_ul = vec![0.0; ku];
    let mut f_ul = vec![0.0; ku];
    let mut b_ul = DMatrix::zeros(ku, ku);
    let mut d_ul = vec![0.0; ku * m * kd];
    for l in 0..ku {
        let aps = &map.m_ul[l];
        let sum_g: f64 = aps.iter().map(|&i| scn.gamma_ul[(i, l)]).sum();
        let sum_g2: f64 = aps.iter().map(|&i| scn.gamma_ul[(i, l)].powi(2)).sum();
        a_ul[l] = a * a * nr * nr * rho_u * sum_g * sum_g;
        e_ul[l] = dist * nr * nr * rho_u * sum_g2;
        f_ul[l] = b * nr * sum_g;
        for qq in 0..ku {
            let s: f64 = aps
                .iter()
                .map(|&i| scn.gamma_ul[(i, l)] * scn.beta_ul[(i, qq)])
                .sum();
            b_ul[(l, qq)] = b * nr * rho_u * s;
        }
        for i in 0..m {
            let s: f64 = aps
                .iter()
                .map(|&mm| scn.gamma_ul[(mm, l)] * scn.beta_ri[(mm, i)])
                .sum();
            for &k in &map.kappa_dm[i] {
                d_ul[(l * m + i) * kd + k] =
                    b * b * nr * nt * rho_d * scn.gamma_dl[(i, k)] * s * g_ri;
            }
        }
    }

    Ok(SECoefficients {
        tau_f: cfg.tau_f(),
        m,
        kd,
        ku,
        a_dl,
        b_dl,
        e_dl,
        d_dl,
        a_ul,
        b_ul,
        d_ul,
        e_ul,
        f_ul,
        service: map.clone(),
    })
}

/// Numerator and denominator of the DL SINR of UE `k`.
pub fn sinr_parts_dl(coef: &SECoefficients, alloc: &PowerAllocation, k: usize) -> (f64, f64) {
    let map = &coef.service;
    let s: f64 = map.m_dk[k]
        .iter()
        .map(|&i| coef.a_dl[(i, k)] * alloc.c[(i, k)])
        .sum();
    let mut den = 1.0;
    for i in 0..coef.m {
        for &q in &map.kappa_dm[i] {
            den += coef.b_dl(k, i, q) * alloc.eta(i, q);
        }
    }
    for &i in &map.m_dk[k] {
        den += coef.e_dl[(i, k)] * alloc.eta(i, k);
    }
    for l in 0..coef.ku {
        den += coef.d_dl[(k, l)] * alloc.theta[l];
    }
    (s * s, den)
}

pub fn sinr_parts_ul(coef: &SECoefficients, alloc: &PowerAllocation, l: usize) -> (f64, f64) {
    let map = &coef.service;
    let num = coef.a_ul[l] * alloc.theta[l];
    let mut den = coef.f_ul[l] + coef.e_ul[l] * alloc.theta[l];
    for q in 0..coef.ku {
        den += coef.b_ul[(l, q)] * alloc.theta[q];
    }
    for i in 0..coef.m {
        for &k in &map.kappa_dm[i] {
            den += coef.d_ul(l, i, k) * alloc.eta(i, k);
        }
    }
    (num, den)
}

pub fn sinr_dl(coef: &SECoefficients, alloc: &PowerAllocation, k: usize) -> f64 {
    let (n, d) = sinr_parts_dl(coef, alloc, k);
    n / d
}

pub fn sinr_ul(coef: &SECoefficients, alloc: &PowerAllocation, l: usize) -> f64 {
    let (n, d) = sinr_parts_ul(coef, alloc, l);
    n / d
}

pub fn se_downlink_lb(coef: &SECoefficients, alloc: &PowerAllocation, k: usize) -> f64 {
    coef.tau_f * (1.0 + sinr_dl(coef, alloc, k)).log2()
}

pub fn se_uplink_lb(coef: &SECoefficients, alloc: &PowerAllocation, l: usize) -> f64 {
    coef.tau_f * (1.0 + sinr_ul(coef, alloc, l)).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SEReport {
    pub se_dl: Vec<f64>,
    pub se_ul: Vec<f64>,
    pub sum_se: f64,
}

impl SEReport {
    pub fn new(se_dl: Vec<f64>, se_ul: Vec<f64>) -> Self {
        let sum_se = se_dl.iter().sum::<f64>() + se_ul.iter().sum::<f64>();
        Self {
            se_dl,
            se_ul,
            sum_se,
        }
    }
}

pub fn se_lower_bounds(
    coef: &SECoefficients,
    alloc: &PowerAllocation,
) -> Result<SEReport, CoreError> {
    if alloc.c.shape() != (coef.m, coef.kd) || alloc.theta.len() != coef.ku {
        return Err(CoreError::Dimension(
            "allocation does not match coefficients".into(),
        ));
    }
    Ok(SEReport::new(
        (0..coef.kd)
            .map(|k| se_downlink_lb(coef, alloc, k))
            .collect(),
        (0..coef.ku).map(|l| se_uplink_lb(coef, alloc, l)).collect(),
    ))
}

/// Writes `ue_id,side,se_lb,se_ub,stderr` rows; `ub` carries the Monte-Carlo
/// estimate and its standard error when available.
pub fn write_se_csv<W: Write>(
    out: W,
    lb: &SEReport,
    ub: Option<&crate::montecarlo::ErgodicReport>,
) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ue_id", "side", "se_lb", "se_ub", "stderr"])?;
    let rows = lb
        .se_dl
        .iter()
        .enumerate()
        .map(|(k, v)| ("dl", k, *v))
        .chain(lb.se_ul.iter().enumerate().map(|(l, v)| ("ul", l, *v)));
    for (side, ue, v) in rows {
        let (u, s) = match ub {
            Some(r) => {
                let e = if side == "dl" { r.dl[ue] } else { r.ul[ue] };
                (e.value.to_string(), e.stderr.to_string())
            }
            None => (String::new(), String::new()),
        };
        w.write_record([ue.to_string(), side.to_string(), v.to_string(), u, s])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Dl,
    Ul,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Dl => "dl",
            Side::Ul => "ul",
        }
    }
}

/// Signal and interference terms of the received signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    /// Desired signal over the channel mean.
    Ds,
    /// Beamforming uncertainty.
    Bu,
    /// Multi-UE interference.
    Mui,
    /// Uplink-to-downlink UE interference.
    Udi,
    /// Residual (intra- and inter-AP) interference.
    Ri,
    /// Total quantization distortion.
    Tqd,
    /// Combined receiver noise.
    N,
}

impl Term {
    pub const ALL: [Term; 7] = [
        Term::Ds,
        Term::Bu,
        Term::Mui,
        Term::Udi,
        Term::Ri,
        Term::Tqd,
        Term::N,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Ds => "DS",
            Term::Bu => "BU",
            Term::Mui => "MUI",
            Term::Udi => "UDI",
            Term::Ri => "RI",
            Term::Tqd => "TQD",
            Term::N => "N",
        }
    }

    pub fn applies_to(self, side: Side) -> bool {
        match self {
            Term::Udi => side == Side::Dl,
            Term::Ri | Term::N => side == Side::Ul,
            _ => true,
        }
    }
}

/// Expected power of one term of the received signal of `ue`, written out
/// term by term from the channel statistics (independently of
/// [`SECoefficients`]).
#[allow(clippy::too_many_arguments)]
pub fn term_closed_form(
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    term: Term,
    side: Side,
    ue: usize,
) -> Result<f64, CoreError> {
    check_dims(scn, map)?;
    check_alloc(scn, alloc)?;
    if !term.applies_to(side) {
        return Err(CoreError::Moment(format!(
            "{} is not a {} term",
            term.name(),
            side.name()
        )));
    }
    let n_ues = if side == Side::Dl {
        scn.num_dl()
    } else {
        scn.num_ul()
    };
    if ue >= n_ues {
        return Err(CoreError::Moment(format!(
            "{} UE {ue} out of range",
            side.name()
        )));
    }
    let (nt, nr) = (cfg.radio.n_tx as f64, cfg.radio.n_rx as f64);
    let (rho_d, rho_u) = (cfg.rho_d(), cfg.rho_u());
    let (a2, b, dist) = (q.a_tilde * q.a_tilde, q.b_tilde, q.distortion());
    let m = scn.num_aps();
    let gd = &scn.gamma_dl;
    let bd = &scn.beta_dl;
    let gu = &scn.gamma_ul;
    let bu = &scn.beta_ul;

    let v = match side {
        Side::Dl => {
            let k = ue;
            let aps = &map.m_dk[k];
            match term {
                Term::Ds => {
                    let s: f64 = aps.iter().map(|&i| alloc.c[(i, k)] * gd[(i, k)]).sum();
                    a2 * nt * nt * rho_d * s * s
                }
                Term::Bu => {
                    a2 * nt
                        * rho_d
                        * aps
                            .iter()
                            .map(|&i| alloc.eta(i, k) * bd[(i, k)] * gd[(i, k)])
                            .sum::<f64>()
                }
                Term::Mui => {
                    let mut s = 0.0;
                    for i in 0..m {
                        for &qq in map.kappa_dm[i].iter().filter(|&&qq| qq != k) {
                            s += alloc.eta(i, qq) * bd[(i, k)] * gd[(i, qq)];
                        }
                    }
                    a2 * nt * rho_d * s
                }
                Term::Udi => {
                    rho_u
                        * (0..scn.num_ul())
                            .map(|l| alloc.theta[l] * scn.beta_udi[(k, l)])
                            .sum::<f64>()
                }
                Term::Tqd => {
                    let mut s = 0.0;
                    for i in 0..m {
                        for &qq in &map.kappa_dm[i] {
                            s += alloc.eta(i, qq) * bd[(i, k)] * gd[(i, qq)];
                        }
                    }
                    let coh: f64 = aps
                        .iter()
                        .map(|&i| alloc.eta(i, k) * gd[(i, k)].powi(2))
                        .sum();
                    dist * rho_d * (nt * s + nt * nt * coh)
                }
                Term::Ri | Term::N => unreachable!(),
            }
        }
        Side::Ul => {
            let l = ue;
            let aps = &map.m_ul[l];
            let th = &alloc.theta;
            let g_ri = cfg.gamma_ri();
            // Σ_i β_RI,mi Σ_{k∈κ_di} γ_ik η_ik seen at AP m.
            let ri_load = |mm: usize| -> f64 {
                (0..m)
                    .map(|i| {
                        scn.beta_ri[(mm, i)]
                            * map.kappa_dm[i]
                                .iter()
                                .map(|&k| gd[(i, k)] * alloc.eta(i, k))
                                .sum::<f64>()
                    })
                    .sum()
            };
            match term {
                Term::Ds => {
                    let s: f64 = aps.iter().map(|&i| gu[(i, l)]).sum();
                    a2 * nr * nr * rho_u * th[l] * s * s
                }
                Term::Bu => {
                    a2 * rho_u
                        * th[l]
                        * nr
                        * aps.iter().map(|&i| gu[(i, l)] * bu[(i, l)]).sum::<f64>()
                }
                Term::Mui => {
                    let mut s = 0.0;
                    for qq in (0..scn.num_ul()).filter(|&qq| qq != l) {
                        s += th[qq] * aps.iter().map(|&i| gu[(i, l)] * bu[(i, qq)]).sum::<f64>();
                    }
                    a2 * rho_u * nr * s
                }
                Term::Ri => {
                    let s: f64 = aps.iter().map(|&mm| gu[(mm, l)] * ri_load(mm)).sum();
                    a2 * b * rho_d * nr * nt * g_ri * s
                }
                Term::N => a2 * nr * aps.iter().map(|&i| gu[(i, l)]).sum::<f64>(),
                Term::Tqd => {
                    let mut s = 0.0;
                    for &mm in aps {
                        let g = gu[(mm, l)];
                        let users: f64 = (0..scn.num_ul())
                            .map(|qq| th[qq] * nr * g * bu[(mm, qq)])
                            .sum();
                        s += rho_u * users
                            + rho_u * th[l] * nr * nr * g * g
                            + b * rho_d * nr * nt * g_ri * g * ri_load(mm)
                            + nr * g;
                    }
                    dist * s
                }
                Term::Udi => unreachable!(),
            }
        }
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{baseline_alloc, Baseline};

    fn scalar_cfg() -> SystemConfig {
        let mut cfg = SystemConfig::default();
        cfg.geometry.aps = 1;
        cfg.geometry.dl_ues = 1;
        cfg.geometry.ul_ues = 0;
        cfg.radio.n_tx = 1;
        cfg.radio.n_rx = 1;
        cfg
    }

    fn unit_scenario(m: usize, kd: usize, ku: usize, cfg: &SystemConfig) -> Scenario {
        let mut s = Scenario::from_large_scale(
            DMatrix::from_element(m, kd, 1.0),
            DMatrix::from_element(m, ku, 1.0),
            DMatrix::from_element(kd, ku, 1.0),
            DMatrix::from_element(m, m, 1.0),
            cfg,
        )
        .unwrap();
        s.gamma_dl.fill(1.0);
        s.gamma_ul.fill(1.0);
        s
    }

    #[test]
    fn scalar_downlink_sinr() {
        let cfg = scalar_cfg();
        let scn = unit_scenario(1, 1, 0, &cfg);
        let map = ServiceMap::full(1, 1, 0);
        let coef = build_coefficients(&scn, &map, &QuantizerParams::ideal(), &cfg).unwrap();
        let mut alloc = PowerAllocation::zeros(1, 1, 0);
        assert_eq!(se_downlink_lb(&coef, &alloc, 0), 0.0);
        alloc.c[(0, 0)] = 1.0;
        let rho = cfg.rho_d();
        let want = rho / (rho + 1.0);
        assert!((sinr_dl(&coef, &alloc, 0) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn scalar_uplink_sinr() {
        let mut cfg = scalar_cfg();
        cfg.geometry.dl_ues = 0;
        cfg.geometry.ul_ues = 1;
        let scn = unit_scenario(1, 0, 1, &cfg);
        let map = ServiceMap::full(1, 0, 1);
        let coef = build_coefficients(&scn, &map, &QuantizerParams::ideal(), &cfg).unwrap();
        let mut alloc = PowerAllocation::zeros(1, 0, 1);
        assert_eq!(se_uplink_lb(&coef, &alloc, 0), 0.0);
        alloc.theta[0] = 1.0;
        // A = ρ, B = ρ, E = 0, F = 1.
        let rho = cfg.rho_u();
        let want = rho / (rho + 1.0);
        assert!((sinr_ul(&coef, &alloc, 0) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn coefficient_examples() {
        let mut cfg = SystemConfig::default();
        cfg.radio.n_rx = 2;
        let scn = unit_scenario(2, 1, 1, &cfg);
        let map = ServiceMap::full(2, 1, 1);
        let q = QuantizerParams::new(2).unwrap();
        let coef = build_coefficients(&scn, &map, &q, &cfg).unwrap();
        let want = 16.0 * q.a_tilde.powi(2) * cfg.rho_u();
        assert!((coef.a_ul[0] - want).abs() < 1e-12 * want);

        let ideal = build_coefficients(&scn, &map, &QuantizerParams::ideal(), &cfg).unwrap();
        assert!(ideal.e_ul.iter().all(|&e| e == 0.0));
        cfg.radio.gamma_ri_db = f64::NEG_INFINITY;
        let no_ri = build_coefficients(&scn, &map, &q, &cfg).unwrap();
        assert!(no_ri.d_ul.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn terms_sum_to_sinr_denominators() {
        let cfg = SystemConfig::default();
        let scn = crate::scenario::generate_drop(&cfg, 3).unwrap();
        let mut c10 = cfg.clone();
        c10.fronthaul.capacity_bps = 3e6;
        let map = crate::fronthaul::select_aps(&scn, &c10).unwrap();
        let q = QuantizerParams::new(3).unwrap();
        let alloc = baseline_alloc(Baseline::Rpa, &scn, &map, &q, cfg.radio.n_tx, 4);
        let coef = build_coefficients(&scn, &map, &q, &cfg).unwrap();
        let t = |term, side, ue| {
            term_closed_form(&scn, &map, &q, &alloc, &cfg, term, side, ue).unwrap()
        };
        for k in 0..scn.num_dl() {
            let (num, den) = sinr_parts_dl(&coef, &alloc, k);
            assert!((t(Term::Ds, Side::Dl, k) - num).abs() <= 1e-12 * num);
            let sum = t(Term::Bu, Side::Dl, k)
                + t(Term::Mui, Side::Dl, k)
                + t(Term::Udi, Side::Dl, k)
                + t(Term::Tqd, Side::Dl, k)
                + 1.0;
            assert!((sum - den).abs() <= 1e-12 * den, "{sum} vs {den}");
        }
        for l in 0..scn.num_ul() {
            let (num, den) = sinr_parts_ul(&coef, &alloc, l);
            assert!((t(Term::Ds, Side::Ul, l) - num).abs() <= 1e-12 * num);
            let sum = t(Term::Bu, Side::Ul, l)
                + t(Term::Mui, Side::Ul, l)
                + t(Term::Ri, Side::Ul, l)
                + t(Term::Tqd, Side::Ul, l)
                + t(Term::N, Side::Ul, l);
            assert!((sum - den).abs() <= 1e-12 * den, "{sum} vs {den}");
        }
    }

    #[test]
    fn invalid_term_side_rejected() {
        let cfg = SystemConfig::default();
        let scn = crate::scenario::generate_drop(&cfg, 3).unwrap();
        let map = ServiceMap::full(scn.num_aps(), scn.num_dl(), scn.num_ul());
        let q = QuantizerParams::ideal();
        let alloc = baseline_alloc(Baseline::Epa1, &scn, &map, &q, 2, 0);
        for (term, side) in [
            (Term::Udi, Side::Ul),
            (Term::Ri, Side::Dl),
            (Term::N, Side::Dl),
        ] {
            assert!(term_closed_form(&scn, &map, &q, &alloc, &cfg, term, side, 0).is_err());
        }
    }

    #[test]
    fn interfering_uplink_power_lowers_se() {
        let cfg = SystemConfig::default();
        let scn = crate::scenario::generate_drop(&cfg, 8).unwrap();
        let map = crate::fronthaul::select_aps(&scn, &cfg).unwrap();
        let q = QuantizerParams::new(2).unwrap();
        let coef = build_coefficients(&scn, &map, &q, &cfg).unwrap();
        let mut alloc = baseline_alloc(Baseline::Epa1, &scn, &map, &q, 2, 0);
        alloc.theta[1] = 0.5;
        let before = se_uplink_lb(&coef, &alloc, 0);
        alloc.theta[1] = 0.9;
        assert!(se_uplink_lb(&coef, &alloc, 0) < before);
    }
}
