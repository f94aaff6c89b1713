//! System configuration. Every section defaults to the reference system
//! parameters, so an empty file is a complete config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Side of the square area (km).
    pub side_km: f64,
    pub aps: usize,
    pub dl_ues: usize,
    pub ul_ues: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            side_km: 1.0,
            aps: 8,
            dl_ues: 4,
            ul_ues: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    pub d0_m: f64,
    pub d1_m: f64,
    /// Fixed attenuation L (dB). Derived from the Hata-COST231 formula when absent.
    pub attenuation_db: Option<f64>,
    pub h_ap_m: f64,
    pub h_ue_m: f64,
    pub freq_mhz: f64,
    pub shadow_sd_db: f64,
    /// Weight of the AP component in the two-component shadowing model.
    pub shadow_delta: f64,
    pub decorr_m: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            d0_m: 10.0,
            d1_m: 50.0,
            attenuation_db: None,
            h_ap_m: 15.0,
            h_ue_m: 1.65,
            freq_mhz: 1900.0,
            shadow_sd_db: 2.0,
            shadow_delta: 0.5,
            decorr_m: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// Coherence interval length in samples.
    pub tau_c: usize,
    pub tau_t_dl: usize,
    pub tau_t_ul: usize,
    /// Coherence interval duration (s).
    pub coherence_s: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            tau_c: 200,
            tau_t_dl: 10,
            tau_t_ul: 10,
            coherence_s: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub p_dl_w: f64,
    pub p_ul_w: f64,
    pub p_pilot_w: f64,
    pub noise_dbw: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub bandwidth_hz: f64,
    pub gamma_ri_db: f64,
    pub pl_ri_db: f64,
    /// Replace β on served AP-UE pairs by one after AP selection.
    pub unity_fading: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            p_dl_w: 1.0,
            p_ul_w: 1.0,
            p_pilot_w: 0.2,
            noise_dbw: -121.4,
            n_tx: 2,
            n_rx: 2,
            bandwidth_hz: 20e6,
            gamma_ri_db: -20.0,
            pl_ri_db: -81.1846,
            unity_fading: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FronthaulConfig {
    /// Quantization bits per real dimension.
    pub bits: u32,
    pub capacity_bps: f64,
    /// Unquantized, unlimited fronthaul (ã = b̃ = 1, no UE cap).
    pub perfect: bool,
}

impl Default for FronthaulConfig {
    fn default() -> Self {
        Self {
            bits: 2,
            capacity_bps: 100e6,
            perfect: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModelParams {
    pub p_ft_w: f64,
    pub p0_w: f64,
    /// Per-antenna transceiver power at the APs.
    pub ptc_ap_w: f64,
    pub ptc_dl_w: f64,
    pub ptc_ul_w: f64,
    pub alpha_ap: f64,
    pub alpha_ue: f64,
    /// Per-UE weights; uniform 1/K when absent.
    pub weights_dl: Option<Vec<f64>>,
    pub weights_ul: Option<Vec<f64>>,
}

impl Default for PowerModelParams {
    fn default() -> Self {
        Self {
            p_ft_w: 10.0,
            p0_w: 0.825,
            ptc_ap_w: 0.2,
            ptc_dl_w: 0.2,
            ptc_ul_w: 0.2,
            alpha_ap: 0.4,
            alpha_ue: 0.4,
            weights_dl: None,
            weights_ul: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Minimum downlink SE (bits/s/Hz).
    pub qos_dl: f64,
    pub qos_ul: f64,
    pub eps_sca: f64,
    pub margin: f64,
    pub max_iter: usize,
    pub solver_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            qos_dl: 0.1,
            qos_ul: 0.1,
            eps_sca: 1e-3,
            margin: 1e-4,
            max_iter: 100,
            solver_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub drops: usize,
    pub mc_trials: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            drops: 10,
            mc_trials: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub geometry: GeometryConfig,
    pub pathloss: PathLossParams,
    pub frame: FrameConfig,
    pub radio: RadioConfig,
    pub fronthaul: FronthaulConfig,
    pub power: PowerModelParams,
    pub optimizer: OptimizerConfig,
    pub simulation: SimulationConfig,
}

fn bad(field: &str, reason: impl Into<String>) -> CoreError {
    CoreError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), CoreError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonneg(field: &str, v: f64) -> Result<(), CoreError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(bad(
            field,
            format!("must be nonnegative and finite, got {v}"),
        ))
    }
}

fn unit_interval(field: &str, v: f64, open_low: bool) -> Result<(), CoreError> {
    let ok = if open_low {
        v > 0.0 && v <= 1.0
    } else {
        (0.0..=1.0).contains(&v)
    };
    if ok {
        Ok(())
    } else {
        Err(bad(
            field,
            format!(
                "must lie in {}0, 1], got {v}",
                if open_low { "(" } else { "[" }
            ),
        ))
    }
}

impl SystemConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CoreError> {
        let cfg: SystemConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CoreError> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CoreError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let g = &self.geometry;
        positive("geometry.side_km", g.side_km)?;
        if g.aps == 0 {
            return Err(bad("geometry.aps", "at least one AP is required"));
        }
        if g.dl_ues + g.ul_ues == 0 {
            return Err(bad("geometry.dl_ues", "at least one UE is required"));
        }

        let p = &self.pathloss;
        positive("pathloss.d0_m", p.d0_m)?;
        if p.d1_m <= p.d0_m {
            return Err(bad(
                "pathloss.d1_m",
                format!("must exceed d0_m = {}", p.d0_m),
            ));
        }
        positive("pathloss.h_ap_m", p.h_ap_m)?;
        positive("pathloss.h_ue_m", p.h_ue_m)?;
        positive("pathloss.freq_mhz", p.freq_mhz)?;
        nonneg("pathloss.shadow_sd_db", p.shadow_sd_db)?;
        unit_interval("pathloss.shadow_delta", p.shadow_delta, false)?;
        positive("pathloss.decorr_m", p.decorr_m)?;
        if let Some(l) = p.attenuation_db {
            if !l.is_finite() {
                return Err(bad("pathloss.attenuation_db", "must be finite"));
            }
        }

        let f = &self.frame;
        if f.tau_t_dl == 0 || f.tau_t_ul == 0 {
            return Err(bad("frame.tau_t_dl", "pilot lengths must be nonzero"));
        }
        if f.tau_t_dl < g.dl_ues {
            return Err(bad(
                "frame.tau_t_dl",
                format!(
                    "{} pilots cannot serve {} downlink UEs",
                    f.tau_t_dl, g.dl_ues
                ),
            ));
        }
        if f.tau_t_ul < g.ul_ues {
            return Err(bad(
                "frame.tau_t_ul",
                format!("{} pilots cannot serve {} uplink UEs", f.tau_t_ul, g.ul_ues),
            ));
        }
        if f.tau_c <= f.tau_t_dl + f.tau_t_ul {
            return Err(bad("frame.tau_c", "must exceed the total pilot length"));
        }
        positive("frame.coherence_s", f.coherence_s)?;

        let r = &self.radio;
        nonneg("radio.p_dl_w", r.p_dl_w)?;
        nonneg("radio.p_ul_w", r.p_ul_w)?;
        positive("radio.p_pilot_w", r.p_pilot_w)?;
        if !r.noise_dbw.is_finite() {
            return Err(bad("radio.noise_dbw", "must be finite"));
        }
        if r.n_tx == 0 || r.n_rx == 0 {
            return Err(bad("radio.n_tx", "antenna counts must be nonzero"));
        }
        positive("radio.bandwidth_hz", r.bandwidth_hz)?;
        if !r.gamma_ri_db.is_finite() || !r.pl_ri_db.is_finite() {
            return Err(bad("radio.gamma_ri_db", "RI parameters must be finite"));
        }

        let fh = &self.fronthaul;
        if !fh.perfect {
            if !(1..=8).contains(&fh.bits) {
                return Err(bad(
                    "fronthaul.bits",
                    format!("supported range is 1..=8, got {}", fh.bits),
                ));
            }
            positive("fronthaul.capacity_bps", fh.capacity_bps)?;
        }

        let pm = &self.power;
        nonneg("power.p_ft_w", pm.p_ft_w)?;
        nonneg("power.p0_w", pm.p0_w)?;
        nonneg("power.ptc_ap_w", pm.ptc_ap_w)?;
        nonneg("power.ptc_dl_w", pm.ptc_dl_w)?;
        nonneg("power.ptc_ul_w", pm.ptc_ul_w)?;
        unit_interval("power.alpha_ap", pm.alpha_ap, true)?;
        unit_interval("power.alpha_ue", pm.alpha_ue, true)?;
        for (field, w, n) in [
            ("power.weights_dl", &pm.weights_dl, g.dl_ues),
            ("power.weights_ul", &pm.weights_ul, g.ul_ues),
        ] {
            if let Some(w) = w {
                if w.len() != n {
                    return Err(bad(field, format!("expected {n} weights, got {}", w.len())));
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(bad(field, "weights must be nonnegative"));
                }
            }
        }

        let o = &self.optimizer;
        nonneg("optimizer.qos_dl", o.qos_dl)?;
        nonneg("optimizer.qos_ul", o.qos_ul)?;
        positive("optimizer.eps_sca", o.eps_sca)?;
        if !(o.margin > 0.0 && o.margin < 0.1) {
            return Err(bad("optimizer.margin", "must lie in (0, 0.1)"));
        }
        if o.max_iter == 0 {
            return Err(bad("optimizer.max_iter", "must be at least 1"));
        }
        positive("optimizer.solver_tol", o.solver_tol)?;

        if self.simulation.mc_trials == 0 {
            return Err(bad("simulation.mc_trials", "must be at least 1"));
        }
        if self.simulation.drops == 0 {
            return Err(bad("simulation.drops", "must be at least 1"));
        }
        Ok(())
    }

    /// Noise power (W).
    pub fn noise_w(&self) -> f64 {
        10f64.powf(self.radio.noise_dbw / 10.0)
    }

    pub fn rho_d(&self) -> f64 {
        self.radio.p_dl_w / self.noise_w()
    }

    pub fn rho_u(&self) -> f64 {
        self.radio.p_ul_w / self.noise_w()
    }

    pub fn rho_t(&self) -> f64 {
        self.radio.p_pilot_w / self.noise_w()
    }

    /// Total pilot length (downlink plus uplink pilots).
    pub fn tau_t(&self) -> usize {
        self.frame.tau_t_dl + self.frame.tau_t_ul
    }

    /// Fraction of the coherence interval carrying data.
    pub fn tau_f(&self) -> f64 {
        let c = self.frame.tau_c as f64;
        (c - self.tau_t() as f64) / c
    }

    pub fn gamma_ri(&self) -> f64 {
        10f64.powf(self.radio.gamma_ri_db / 10.0)
    }

    pub fn num_ues(&self) -> usize {
        self.geometry.dl_ues + self.geometry.ul_ues
    }

    pub fn weight_dl(&self, k: usize) -> f64 {
        match &self.power.weights_dl {
            Some(w) => w[k],
            None => 1.0 / self.num_ues() as f64,
        }
    }

    pub fn weight_ul(&self, l: usize) -> f64 {
        match &self.power.weights_ul {
            Some(w) => w[l],
            None => 1.0 / self.num_ues() as f64,
        }
    }

    /// Sets the downlink and uplink transmit powers from a dBm value.
    pub fn set_tx_power_dbm(&mut self, dbm: f64) {
        let w = 10f64.powf((dbm - 30.0) / 10.0);
        self.radio.p_dl_w = w;
        self.radio.p_ul_w = w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let cfg = SystemConfig::from_toml("").unwrap();
        assert_eq!(cfg, SystemConfig::default());
        assert_eq!(cfg.geometry.side_km, 1.0);
        assert_eq!(cfg.frame.tau_c, 200);
        assert_eq!(cfg.frame.coherence_s, 1e-3);
        assert_eq!(cfg.pathloss.shadow_sd_db, 2.0);
        assert_eq!(cfg.radio.bandwidth_hz, 20e6);
        assert_eq!(cfg.fronthaul.bits, 2);
        assert_eq!(cfg.fronthaul.capacity_bps, 100e6);
        assert_eq!(cfg.radio.gamma_ri_db, -20.0);
        assert_eq!(cfg.radio.pl_ri_db, -81.1846);
        assert_eq!(cfg.power.p_ft_w, 10.0);
        assert_eq!(cfg.power.p0_w, 0.825);
        assert_eq!(cfg.power.ptc_ap_w, 0.2);
        assert_eq!(cfg.radio.p_pilot_w, 0.2);
        assert_eq!(cfg.radio.noise_dbw, -121.4);
        assert_eq!(cfg.power.alpha_ap, 0.4);
        assert!((cfg.tau_f() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn short_pilots_rejected_with_field_name() {
        let err = SystemConfig::from_toml("[geometry]\ndl_ues = 12\n").unwrap_err();
        assert!(err.to_string().contains("frame.tau_t_dl"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SystemConfig::from_toml("[radio]\nbogus = 1\n").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = SystemConfig::default();
        cfg.power.weights_dl = Some(vec![0.1, 0.2, 0.3, 0.4]);
        cfg.pathloss.attenuation_db = Some(140.0);
        cfg.set_tx_power_dbm(20.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        cfg.save(&path).unwrap();
        assert_eq!(SystemConfig::load(&path).unwrap(), cfg);
    }

    #[test]
    fn dbm_conversion() {
        let mut cfg = SystemConfig::default();
        cfg.set_tx_power_dbm(30.0);
        assert!((cfg.radio.p_dl_w - 1.0).abs() < 1e-15);
        cfg.set_tx_power_dbm(0.0);
        assert!((cfg.radio.p_ul_w - 1e-3).abs() < 1e-18);
    }
}
