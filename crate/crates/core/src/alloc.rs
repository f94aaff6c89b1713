//! Power-control coefficients and the baseline allocators.

use nalgebra::DMatrix;
use rand::Rng;

use crate::fronthaul::ServiceMap;
use crate::quantizer::QuantizerParams;
use crate::rng::stream_rng;
use crate::scenario::Scenario;

/// Downlink c_mk = √η_mk (M×K_d) and uplink θ_l.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub c: DMatrix<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Epa1,
    Epa2,
    Rpa,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Epa1, Baseline::Epa2, Baseline::Rpa];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Epa1 => "EPA1",
            Baseline::Epa2 => "EPA2",
            Baseline::Rpa => "RPA",
        }
    }
}

impl PowerAllocation {
    pub fn zeros(m: usize, kd: usize, ku: usize) -> Self {
        Self {
            c: DMatrix::zeros(m, kd),
            theta: vec![0.0; ku],
        }
    }

    pub fn eta(&self, m: usize, k: usize) -> f64 {
        self.c[(m, k)] * self.c[(m, k)]
    }

    /// Per-AP load b̃·N_t·Σ_k γ_mk c_mk²; the per-AP power limit is load ≤ 1.
    pub fn ap_load(&self, scn: &Scenario, q: &QuantizerParams, n_t: usize, m: usize) -> f64 {
        let s: f64 = (0..scn.num_dl())
            .map(|k| scn.gamma_dl[(m, k)] * self.eta(m, k))
            .sum();
        q.b_tilde * n_t as f64 * s
    }

    /// Largest violation of the per-AP power limits, θ ∈ [0,1], c ≥ 0 and
    /// zero power on unserved pairs.
    pub fn violation(
        &self,
        scn: &Scenario,
        map: &ServiceMap,
        q: &QuantizerParams,
        n_t: usize,
    ) -> f64 {
        let mut v: f64 = 0.0;
        for m in 0..scn.num_aps() {
            v = v.max(self.ap_load(scn, q, n_t, m) - 1.0);
            for k in 0..scn.num_dl() {
                let c = self.c[(m, k)];
                v = v.max(-c);
                if !map.serves_dl(m, k) {
                    v = v.max(c.abs());
                }
            }
        }
        for &t in &self.theta {
            v = v.max(-t).max(t - 1.0);
        }
        v
    }
}

/// Equal power among served UEs with saturated AP budgets, full uplink power.
fn epa1(scn: &Scenario, map: &ServiceMap, q: &QuantizerParams, n_t: usize) -> PowerAllocation {
    let mut a = PowerAllocation::zeros(scn.num_aps(), scn.num_dl(), scn.num_ul());
    for m in 0..scn.num_aps() {
        let total: f64 = map.kappa_dm[m].iter().map(|&k| scn.gamma_dl[(m, k)]).sum();
        if total > 0.0 {
            let c = (1.0 / (q.b_tilde * n_t as f64 * total)).sqrt();
            for &k in &map.kappa_dm[m] {
                a.c[(m, k)] = c;
            }
        }
    }
    a.theta.fill(1.0);
    a
}

pub fn baseline_alloc(
    kind: Baseline,
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    n_t: usize,
    seed: u64,
) -> PowerAllocation {
    match kind {
        Baseline::Epa1 => epa1(scn, map, q, n_t),
        Baseline::Epa2 => {
            let mut a = PowerAllocation::zeros(scn.num_aps(), scn.num_dl(), scn.num_ul());
            for m in 0..scn.num_aps() {
                let kdm = map.k_dm(m) as f64;
                for &k in &map.kappa_dm[m] {
                    let g = scn.gamma_dl[(m, k)];
                    if g > 0.0 {
                        a.c[(m, k)] = (1.0 / (q.b_tilde * n_t as f64 * kdm * g)).sqrt();
                    }
                }
            }
            a.theta.fill(1.0);
            a
        }
        Baseline::Rpa => {
            let mut rng = stream_rng(seed, 0);
            let mut a = epa1(scn, map, q, n_t);
            for m in 0..scn.num_aps() {
                for &k in &map.kappa_dm[m] {
                    let u: f64 = rng.random();
                    a.c[(m, k)] *= u.sqrt();
                }
            }
            for t in &mut a.theta {
                *t = rng.random();
            }
            a
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SystemConfig;

    fn setup() -> (Scenario, ServiceMap, QuantizerParams) {
        let cfg = SystemConfig::default();
        let scn = crate::scenario::generate_drop(&cfg, 11).unwrap();
        let map = crate::fronthaul::select_aps(&scn, &cfg).unwrap();
        (scn, map, QuantizerParams::new(2).unwrap())
    }

    #[test]
    fn epa1_saturates_every_nonempty_ap() {
        let (scn, map, q) = setup();
        let a = baseline_alloc(Baseline::Epa1, &scn, &map, &q, 2, 0);
        for m in 0..scn.num_aps() {
            assert!((a.ap_load(&scn, &q, 2, m) - 1.0).abs() < 1e-12);
        }
        assert!(a.theta.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn epa2_and_rpa_are_feasible() {
        let (scn, map, q) = setup();
        for kind in [Baseline::Epa2, Baseline::Rpa] {
            for seed in 0..5 {
                let a = baseline_alloc(kind, &scn, &map, &q, 2, seed);
                assert!(a.violation(&scn, &map, &q, 2) <= 1e-12, "{kind:?}");
            }
        }
    }

    #[test]
    fn epa2_matches_epa1_for_equal_gamma() {
        let (mut scn, map, q) = setup();
        scn.gamma_dl.fill(1e-9);
        let a = baseline_alloc(Baseline::Epa1, &scn, &map, &q, 2, 0);
        let b = baseline_alloc(Baseline::Epa2, &scn, &map, &q, 2, 0);
        assert!((a.c.clone() - b.c).abs().max() < 1e-9 * a.c.max());
    }
}
