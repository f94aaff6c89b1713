//! Fronthaul capacity limit and AP-UE association.

use std::fmt;

use crate::config::SystemConfig;
use crate::scenario::Scenario;
use crate::CoreError;

/// Per-AP cap on served UEs in each direction. `None` when the fronthaul is
/// unlimited.
pub fn max_ues_per_ap(cfg: &SystemConfig) -> Option<usize> {
    if cfg.fronthaul.perfect {
        return None;
    }
    let data = (cfg.frame.tau_c - cfg.tau_t()) as f64;
    let x = cfg.fronthaul.capacity_bps * cfg.frame.coherence_s
        / (4.0 * data * cfg.fronthaul.bits as f64);
    Some((x + 1e-9).floor() as usize)
}

/// Fronthaul bit rate (bits/s) of an AP serving `k_dm` + `k_um` UEs.
pub fn fronthaul_rate(k_dm: usize, k_um: usize, nu: u32, cfg: &SystemConfig) -> f64 {
    let data = (cfg.frame.tau_c - cfg.tau_t()) as f64;
    2.0 * nu as f64 * (k_dm + k_um) as f64 * data / cfg.frame.coherence_s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceMap {
    /// DL UEs served by each AP, ascending.
    pub kappa_dm: Vec<Vec<usize>>,
    pub kappa_um: Vec<Vec<usize>>,
    /// APs serving each DL UE, ascending.
    pub m_dk: Vec<Vec<usize>>,
    pub m_ul: Vec<Vec<usize>>,
}

fn invert(sets: &[Vec<usize>], n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n];
    for (m, s) in sets.iter().enumerate() {
        for &k in s {
            out[k].push(m);
        }
    }
    out
}

impl ServiceMap {
    pub fn from_ap_sets(
        mut kappa_dm: Vec<Vec<usize>>,
        mut kappa_um: Vec<Vec<usize>>,
        kd: usize,
        ku: usize,
    ) -> Self {
        for s in kappa_dm.iter_mut().chain(kappa_um.iter_mut()) {
            s.sort_unstable();
            s.dedup();
        }
        let m_dk = invert(&kappa_dm, kd);
        let m_ul = invert(&kappa_um, ku);
        Self {
            kappa_dm,
            kappa_um,
            m_dk,
            m_ul,
        }
    }

    /// Every AP serves every UE.
    pub fn full(m: usize, kd: usize, ku: usize) -> Self {
        Self::from_ap_sets(
            vec![(0..kd).collect(); m],
            vec![(0..ku).collect(); m],
            kd,
            ku,
        )
    }

    pub fn num_aps(&self) -> usize {
        self.kappa_dm.len()
    }

    pub fn serves_dl(&self, m: usize, k: usize) -> bool {
        self.kappa_dm[m].binary_search(&k).is_ok()
    }

    pub fn serves_ul(&self, m: usize, l: usize) -> bool {
        self.kappa_um[m].binary_search(&l).is_ok()
    }

    pub fn k_dm(&self, m: usize) -> usize {
        self.kappa_dm[m].len()
    }

    pub fn k_um(&self, m: usize) -> usize {
        self.kappa_um[m].len()
    }

    /// Served (AP, DL UE) pairs in AP-major order.
    pub fn dl_pairs(&self) -> Vec<(usize, usize)> {
        self.kappa_dm
            .iter()
            .enumerate()
            .flat_map(|(m, s)| s.iter().map(move |&k| (m, k)))
            .collect()
    }

    /// Checks that the AP-side and UE-side sets describe the same relation.
    pub fn is_consistent(&self) -> bool {
        self.m_dk == invert(&self.kappa_dm, self.m_dk.len())
            && self.m_ul == invert(&self.kappa_um, self.m_ul.len())
    }
}

/// One line per AP: `ap <m>: dl <k,k,...>; ul <l,l,...>`.
impl fmt::Display for ServiceMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &[usize]| {
            s.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        for m in 0..self.num_aps() {
            writeln!(
                f,
                "ap {m}: dl {}; ul {}",
                join(&self.kappa_dm[m]),
                join(&self.kappa_um[m])
            )?;
        }
        Ok(())
    }
}

/// Indices of the `take` largest entries of `gains`, stable by index on ties.
fn top_by_gain(gains: &[f64], take: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..gains.len()).collect();
    idx.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    idx.truncate(take);
    idx
}

/// Places orphans for one direction. `gain[m][k]`, `served[m]` is the set of
/// AP m, `cap` the per-AP limit.
fn rescue_orphans(
    gain: &[Vec<f64>],
    served: &mut [Vec<usize>],
    n_ue: usize,
    cap: usize,
) -> Result<(), String> {
    let m = served.len();
    for k in 0..n_ue {
        let count =
            |served: &[Vec<usize>], q: usize| served.iter().filter(|s| s.contains(&q)).count();
        if count(served, k) > 0 {
            continue;
        }
        let mut aps: Vec<usize> = (0..m).collect();
        aps.sort_by(|&a, &b| gain[b][k].total_cmp(&gain[a][k]));
        let mut placed = false;
        for &n in &aps {
            if served[n].len() < cap {
                served[n].push(k);
                placed = true;
                break;
            }
            let victim = served[n]
                .iter()
                .copied()
                .filter(|&q| count(served, q) >= 2)
                .min_by(|&a, &b| gain[n][a].total_cmp(&gain[n][b]).then(a.cmp(&b)));
            if let Some(q) = victim {
                served[n].retain(|&x| x != q);
                served[n].push(k);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(format!(
                "UE {k} cannot be placed: no AP has an evictable UE"
            ));
        }
    }
    Ok(())
}

/// Gain-greedy association under the per-AP cap, followed by the orphan
/// rescue (downlink UEs first, then uplink).
pub fn select_aps(scn: &Scenario, cfg: &SystemConfig) -> Result<ServiceMap, CoreError> {
    let (m, kd, ku) = (scn.num_aps(), scn.num_dl(), scn.num_ul());
    let cap = max_ues_per_ap(cfg).unwrap_or(usize::MAX);
    if cap == 0 {
        return Err(CoreError::InfeasibleConfig(format!(
            "fronthaul capacity {} bps cannot carry a single UE at {} bits",
            cfg.fronthaul.capacity_bps, cfg.fronthaul.bits
        )));
    }
    let (cap_d, cap_u) = (kd.min(cap), ku.min(cap));
    let gd: Vec<Vec<f64>> = (0..m)
        .map(|i| scn.beta_dl.row(i).iter().copied().collect())
        .collect();
    let gu: Vec<Vec<f64>> = (0..m)
        .map(|i| scn.beta_ul.row(i).iter().copied().collect())
        .collect();
    let mut dl: Vec<Vec<usize>> = gd.iter().map(|g| top_by_gain(g, cap_d)).collect();
    let mut ul: Vec<Vec<usize>> = gu.iter().map(|g| top_by_gain(g, cap_u)).collect();
    rescue_orphans(&gd, &mut dl, kd, cap_d)
        .map_err(|e| CoreError::InfeasibleConfig(format!("downlink: {e}")))?;
    rescue_orphans(&gu, &mut ul, ku, cap_u)
        .map_err(|e| CoreError::InfeasibleConfig(format!("uplink: {e}")))?;
    Ok(ServiceMap::from_ap_sets(dl, ul, kd, ku))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn cfg_with(capacity: f64, bits: u32) -> SystemConfig {
        let mut c = SystemConfig::default();
        c.fronthaul.capacity_bps = capacity;
        c.fronthaul.bits = bits;
        c
    }

    #[test]
    fn lemma_examples() {
        assert_eq!(max_ues_per_ap(&cfg_with(100e6, 2)), Some(69));
        assert_eq!(max_ues_per_ap(&cfg_with(10e6, 2)), Some(6));
        assert_eq!(max_ues_per_ap(&cfg_with(100e6, 4)), Some(34));
        let mut c = cfg_with(1.0, 2);
        assert_eq!(max_ues_per_ap(&c), Some(0));
        c.fronthaul.perfect = true;
        assert_eq!(max_ues_per_ap(&c), None);
    }

    #[test]
    fn rate_examples() {
        let c = SystemConfig::default();
        assert_eq!(fronthaul_rate(0, 0, 2, &c), 0.0);
        assert!((fronthaul_rate(10, 10, 2, &c) - 14.4e6).abs() < 1e-6);
    }

    fn scenario_from(beta_dl: DMatrix<f64>) -> Scenario {
        let m = beta_dl.nrows();
        let kd = beta_dl.ncols();
        Scenario::from_large_scale(
            beta_dl,
            DMatrix::zeros(m, 0),
            DMatrix::zeros(kd, 0),
            DMatrix::from_element(m, m, 1e-8),
            &SystemConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn orphan_rescue_hand_trace() {
        // Both APs rank u0 > u1 > u2; u2 is stronger at AP 1.
        let beta = DMatrix::from_row_slice(2, 3, &[3.0, 2.0, 0.5, 3.0, 2.0, 1.0]);
        let scn = scenario_from(beta);
        let gd: Vec<Vec<f64>> = (0..2)
            .map(|i| scn.beta_dl.row(i).iter().copied().collect())
            .collect();
        let mut served: Vec<Vec<usize>> = gd.iter().map(|g| top_by_gain(g, 2)).collect();
        assert_eq!(served, vec![vec![0, 1], vec![0, 1]]);
        rescue_orphans(&gd, &mut served, 3, 2).unwrap();
        let map = ServiceMap::from_ap_sets(served, vec![vec![]; 2], 3, 0);
        assert_eq!(map.kappa_dm, vec![vec![0, 1], vec![0, 2]]);
        assert_eq!(map.m_dk, vec![vec![0, 1], vec![0], vec![1]]);
        assert!(map.is_consistent());
    }

    #[test]
    fn no_evictable_ue_is_an_error() {
        // One AP, cap 1, two UEs: the served UE has no other AP.
        let gd = vec![vec![2.0, 1.0]];
        let mut served = vec![vec![0]];
        assert!(rescue_orphans(&gd, &mut served, 2, 1).is_err());
    }

    #[test]
    fn unconstrained_fronthaul_serves_everyone() {
        let beta = DMatrix::from_fn(3, 4, |i, k| 1.0 + (i * 4 + k) as f64);
        let scn = scenario_from(beta);
        let map = select_aps(&scn, &SystemConfig::default()).unwrap();
        assert_eq!(map, ServiceMap::full(3, 4, 0));
    }

    #[test]
    fn text_dump_has_one_line_per_ap() {
        let map = ServiceMap::full(2, 2, 1);
        assert_eq!(map.to_string(), "ap 0: dl 0,1; ul 0\nap 1: dl 0,1; ul 0\n");
    }
}
