//! Power consumption, per-UE energy efficiency and the WSEE objective.

use std::io::Write;

use crate::alloc::PowerAllocation;
use crate::config::SystemConfig;
use crate::fronthaul::{fronthaul_rate, ServiceMap};
use crate::quantizer::QuantizerParams;
use crate::scenario::Scenario;
use crate::se::{build_coefficients, se_lower_bounds, SECoefficients, SEReport};
use crate::CoreError;

/// Fixed per-UE power (W): AP circuit and fronthaul power shared over all UEs.
/// The traffic-dependent term vanishes for an unquantized fronthaul.
pub fn p_fix(cfg: &SystemConfig, map: &ServiceMap, q: &QuantizerParams) -> Result<f64, CoreError> {
    let k = cfg.num_ues();
    if k == 0 {
        return Err(CoreError::Config {
            field: "geometry.dl_ues".into(),
            reason: "no UEs to share the fixed power".into(),
        });
    }
    let pm = &cfg.power;
    let antennas = (cfg.radio.n_tx + cfg.radio.n_rx) as f64;
    let mut total = 0.0;
    for m in 0..map.num_aps() {
        total += pm.p0_w + antennas * pm.ptc_ap_w;
        if !q.is_ideal() {
            if !(cfg.fronthaul.capacity_bps > 0.0) {
                return Err(CoreError::Config {
                    field: "fronthaul.capacity_bps".into(),
                    reason: "must be positive".into(),
                });
            }
            let r = fronthaul_rate(map.k_dm(m), map.k_um(m), q.nu, cfg);
            total += pm.p_ft_w * r / cfg.fronthaul.capacity_bps;
        }
    }
    Ok(total / k as f64)
}

/// Consumed power of every DL and UL UE (W).
pub fn ue_powers(
    alloc: &PowerAllocation,
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    cfg: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>), CoreError> {
    let fix = p_fix(cfg, map, q)?;
    let pm = &cfg.power;
    let nt = cfg.radio.n_tx as f64;
    let dl = (0..scn.num_dl())
        .map(|k| {
            let radiated: f64 = map.m_dk[k]
                .iter()
                .map(|&m| scn.gamma_dl[(m, k)] * alloc.eta(m, k))
                .sum();
            fix + nt * cfg.radio.p_dl_w * radiated / pm.alpha_ap + pm.ptc_dl_w
        })
        .collect();
    let ul = alloc
        .theta
        .iter()
        .map(|&t| fix + cfg.radio.p_ul_w * t / pm.alpha_ue + pm.ptc_ul_w)
        .collect();
    Ok((dl, ul))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WSEEReport {
    pub ee_dl: Vec<f64>,
    pub ee_ul: Vec<f64>,
    pub p_dl: Vec<f64>,
    pub p_ul: Vec<f64>,
    pub w_dl: Vec<f64>,
    pub w_ul: Vec<f64>,
    pub se: SEReport,
    pub wsee: f64,
}

/// Combines SE values and consumed powers into the weighted EE sum.
pub fn wsee_from_parts(
    se: SEReport,
    p_dl: Vec<f64>,
    p_ul: Vec<f64>,
    w_dl: Vec<f64>,
    w_ul: Vec<f64>,
    bandwidth_hz: f64,
) -> Result<WSEEReport, CoreError> {
    let ee = |side: &'static str, se: &[f64], p: &[f64]| -> Result<Vec<f64>, CoreError> {
        se.iter()
            .zip(p)
            .enumerate()
            .map(|(ue, (s, p))| {
                if *p <= 0.0 {
                    Err(CoreError::ZeroPower { side, ue })
                } else {
                    Ok(bandwidth_hz * s / p)
                }
            })
            .collect()
    };
    let ee_dl = ee("downlink", &se.se_dl, &p_dl)?;
    let ee_ul = ee("uplink", &se.se_ul, &p_ul)?;
    let wsee = ee_dl.iter().zip(&w_dl).map(|(e, w)| e * w).sum::<f64>()
        + ee_ul.iter().zip(&w_ul).map(|(e, w)| e * w).sum::<f64>();
    Ok(WSEEReport {
        ee_dl,
        ee_ul,
        p_dl,
        p_ul,
        w_dl,
        w_ul,
        se,
        wsee,
    })
}

pub fn wsee_with(
    coef: &SECoefficients,
    alloc: &PowerAllocation,
    scn: &Scenario,
    q: &QuantizerParams,
    cfg: &SystemConfig,
) -> Result<WSEEReport, CoreError> {
    let se = se_lower_bounds(coef, alloc)?;
    let (p_dl, p_ul) = ue_powers(alloc, scn, &coef.service, q, cfg)?;
    let w_dl = (0..scn.num_dl()).map(|k| cfg.weight_dl(k)).collect();
    let w_ul = (0..scn.num_ul()).map(|l| cfg.weight_ul(l)).collect();
    wsee_from_parts(se, p_dl, p_ul, w_dl, w_ul, cfg.radio.bandwidth_hz)
}

pub fn wsee(
    alloc: &PowerAllocation,
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    cfg: &SystemConfig,
) -> Result<WSEEReport, CoreError> {
    let coef = build_coefficients(scn, map, q, cfg)?;
    wsee_with(&coef, alloc, scn, q, cfg)
}

impl WSEEReport {
    /// Rows `ue_id,side,ee,power,weight` followed by a `summary` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CoreError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ue_id", "side", "ee", "power", "weight"])?;
        for (k, e) in self.ee_dl.iter().enumerate() {
            w.write_record([
                k.to_string(),
                "dl".into(),
                e.to_string(),
                self.p_dl[k].to_string(),
                self.w_dl[k].to_string(),
            ])?;
        }
        for (l, e) in self.ee_ul.iter().enumerate() {
            w.write_record([
                l.to_string(),
                "ul".into(),
                e.to_string(),
                self.p_ul[l].to_string(),
                self.w_ul[l].to_string(),
            ])?;
        }
        w.write_record([
            "summary".into(),
            "all".into(),
            self.wsee.to_string(),
            String::new(),
            String::new(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_fix_reference_value() {
        let mut cfg = SystemConfig::default();
        cfg.geometry.aps = 32;
        cfg.geometry.dl_ues = 10;
        cfg.geometry.ul_ues = 10;
        let map = ServiceMap::full(32, 10, 10);
        let q = QuantizerParams::new(2).unwrap();
        let v = p_fix(&cfg, &map, &q).unwrap();
        // 1.6 · (0.825 + 4·0.2 + 10·14.4/100)
        assert!((v - 4.904).abs() < 1e-12, "{v}");
    }

    #[test]
    fn p_fix_zero_constants() {
        let mut cfg = SystemConfig::default();
        cfg.power.p_ft_w = 0.0;
        cfg.power.p0_w = 0.0;
        cfg.power.ptc_ap_w = 0.0;
        let map = ServiceMap::full(8, 4, 4);
        assert_eq!(
            p_fix(&cfg, &map, &QuantizerParams::new(2).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn uplink_radiated_term() {
        let mut cfg = SystemConfig::default();
        cfg.radio.p_ul_w = 0.2;
        let scn = crate::scenario::generate_drop(&cfg, 2).unwrap();
        let map = crate::fronthaul::select_aps(&scn, &cfg).unwrap();
        let q = QuantizerParams::new(2).unwrap();
        let mut alloc = PowerAllocation::zeros(8, 4, 4);
        alloc.theta[0] = 1.0;
        let (dl, ul) = ue_powers(&alloc, &scn, &map, &q, &cfg).unwrap();
        let fix = p_fix(&cfg, &map, &q).unwrap();
        assert!((ul[0] - fix - 0.2 - 0.5).abs() < 1e-12);
        assert!(dl.iter().all(|&p| (p - fix - 0.2).abs() < 1e-12));
    }

    #[test]
    fn zero_power_is_an_error() {
        let se = SEReport::new(vec![1.0], vec![]);
        assert!(wsee_from_parts(se, vec![0.0], vec![], vec![1.0], vec![], 1.0).is_err());
    }
}
