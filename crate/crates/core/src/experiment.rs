//! Multi-drop sweeps: SE bounds versus transmit power, WSEE versus transmit
//! power and WSEE versus fronthaul bits. Also the randomized check of the
//! closed-form term powers against Monte-Carlo.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alloc::{baseline_alloc, Baseline, PowerAllocation};
use crate::config::SystemConfig;
use crate::fronthaul::{max_ues_per_ap, select_aps, ServiceMap};
use crate::montecarlo::{ergodic_se_mc, moment_suite, Estimate};
use crate::power::wsee;
use crate::quantizer::QuantizerParams;
use crate::rng::derive_seed;
use crate::sca::optimize;
use crate::scenario::{generate_drop, Scenario};
use crate::se::{build_coefficients, se_lower_bounds, term_closed_form, Side, Term};
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Allocator {
    Opa,
    Base(Baseline),
}

impl Allocator {
    pub const ALL: [Allocator; 4] = [
        Allocator::Opa,
        Allocator::Base(Baseline::Epa1),
        Allocator::Base(Baseline::Epa2),
        Allocator::Base(Baseline::Rpa),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Allocator::Opa => "OPA",
            Allocator::Base(b) => b.name(),
        }
    }
}

impl std::str::FromStr for Allocator {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        Allocator::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CoreError::Config {
                field: "allocator".into(),
                reason: format!("unknown allocator {s:?}, expected one of OPA, EPA1, EPA2, RPA"),
            })
    }
}

/// Fronthaul setting of one sweep branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fronthaul {
    Perfect,
    Limited { bits: u32, capacity_bps: f64 },
}

impl Fronthaul {
    pub fn label(&self) -> String {
        match self {
            Fronthaul::Perfect => "perfect".into(),
            Fronthaul::Limited { bits, capacity_bps } => {
                format!("nu={bits};C={}Mbps", capacity_bps / 1e6)
            }
        }
    }

    pub fn apply(&self, cfg: &mut SystemConfig) {
        match *self {
            Fronthaul::Perfect => cfg.fronthaul.perfect = true,
            Fronthaul::Limited { bits, capacity_bps } => {
                cfg.fronthaul.perfect = false;
                cfg.fronthaul.bits = bits;
                cfg.fronthaul.capacity_bps = capacity_bps;
            }
        }
    }
}

/// One CSV row. `drop == None` marks the across-drop aggregate, whose
/// `*_stderr` fields are standard errors of the mean over drops.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep: f64,
    pub fronthaul: String,
    pub variant: String,
    pub drop: Option<usize>,
    pub sum_se: f64,
    pub sum_se_stderr: f64,
    pub sum_se_ub: f64,
    pub sum_se_ub_stderr: f64,
    pub wsee: f64,
    pub wsee_stderr: f64,
    /// Per-drop flag: `ok`, or what went wrong. Aggregates report how many
    /// drops were flagged.
    pub status: String,
    /// Smallest per-UE margin UB + 3·stderr − LB; NaN when no UB is computed.
    pub min_bound_gap: f64,
}

impl ResultRow {
    fn empty(sweep: f64, fronthaul: String, variant: &str, drop: usize) -> Self {
        Self {
            sweep,
            fronthaul,
            variant: variant.into(),
            drop: Some(drop),
            sum_se: f64::NAN,
            sum_se_stderr: f64::NAN,
            sum_se_ub: f64::NAN,
            sum_se_ub_stderr: f64::NAN,
            wsee: f64::NAN,
            wsee_stderr: f64::NAN,
            status: "ok".into(),
            min_bound_gap: f64::NAN,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status.starts_with("ok")
    }
}

/// Per-drop rows plus one aggregate row per (sweep, fronthaul, variant).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl ResultTable {
    fn push_group(&mut self, mut drops: Vec<ResultRow>) {
        let Some(first) = drops.first().cloned() else {
            return;
        };
        let ok: Vec<&ResultRow> = drops.iter().filter(|r| r.is_ok()).collect();
        let col = |f: fn(&ResultRow) -> f64| {
            mean_stderr(
                &ok.iter()
                    .map(|r| f(r))
                    .filter(|x| !x.is_nan())
                    .collect::<Vec<_>>(),
            )
        };
        let (sum_se, sum_se_stderr) = col(|r| r.sum_se);
        let (sum_se_ub, sum_se_ub_stderr) = col(|r| r.sum_se_ub);
        let (wsee, wsee_stderr) = col(|r| r.wsee);
        let flagged = drops.iter().filter(|r| r.status != "ok").count();
        let gap = ok.iter().map(|r| r.min_bound_gap).fold(f64::NAN, f64::min);
        let agg = ResultRow {
            drop: None,
            sum_se,
            sum_se_stderr,
            sum_se_ub,
            sum_se_ub_stderr,
            wsee,
            wsee_stderr,
            status: if flagged == 0 {
                "ok".into()
            } else {
                format!("flagged={flagged}")
            },
            min_bound_gap: gap,
            ..first
        };
        self.rows.append(&mut drops);
        self.rows.push(agg);
    }

    pub fn aggregates(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.drop.is_none())
    }

    pub fn aggregate(&self, sweep: f64, fronthaul: &str, variant: &str) -> Option<&ResultRow> {
        self.aggregates()
            .find(|r| r.sweep == sweep && r.fronthaul == fronthaul && r.variant == variant)
    }

    /// Per-drop rows of one group, in drop order.
    pub fn drops(&self, sweep: f64, fronthaul: &str, variant: &str) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| {
                r.drop.is_some()
                    && r.sweep == sweep
                    && r.fronthaul == fronthaul
                    && r.variant == variant
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CoreError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "sweep",
            "fronthaul",
            "variant",
            "drop",
            "sum_se",
            "sum_se_stderr",
            "sum_se_ub",
            "sum_se_ub_stderr",
            "wsee",
            "wsee_stderr",
            "min_bound_gap",
            "status",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.sweep.to_string(),
                r.fronthaul.clone(),
                r.variant.clone(),
                r.drop.map_or("mean".into(), |d| d.to_string()),
                r.sum_se.to_string(),
                r.sum_se_stderr.to_string(),
                r.sum_se_ub.to_string(),
                r.sum_se_ub_stderr.to_string(),
                r.wsee.to_string(),
                r.wsee_stderr.to_string(),
                r.min_bound_gap.to_string(),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seed of drop `d`; shared by every sweep point so comparisons are paired.
pub fn drop_seed(master: u64, d: usize) -> u64 {
    derive_seed(master, 1000 + d as u64)
}

/// Scenario and service map of one drop. With `radio.unity_fading` the
/// large-scale fading of every served link is set to one after selection.
pub fn prepare_drop(
    cfg: &SystemConfig,
    seed: u64,
) -> Result<(Scenario, ServiceMap, QuantizerParams), CoreError> {
    let mut scn = generate_drop(cfg, seed)?;
    let map = select_aps(&scn, cfg)?;
    if cfg.radio.unity_fading {
        scn.unity_on_served(&map, cfg);
    }
    Ok((scn, map, QuantizerParams::for_config(cfg)?))
}

fn flag(e: &CoreError) -> String {
    match e {
        CoreError::QosInfeasible { .. } => "qos_infeasible".into(),
        CoreError::InfeasibleConfig(_) => "infeasible_config".into(),
        other => format!("error: {other}").replace(',', ";"),
    }
}

fn allocate(
    kind: Allocator,
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    cfg: &SystemConfig,
    seed: u64,
) -> Result<(PowerAllocation, Option<String>), CoreError> {
    match kind {
        Allocator::Base(b) => Ok((
            baseline_alloc(b, scn, map, q, cfg.radio.n_tx, derive_seed(seed, 7)),
            None,
        )),
        Allocator::Opa => {
            let out = optimize(scn, map, q, cfg)?;
            let note = if out.trace.solver_failure {
                Some("solver_failure".into())
            } else if !out.trace.converged {
                Some("not_converged".into())
            } else {
                None
            };
            Ok((out.alloc, note))
        }
    }
}

/// Evaluates one allocator on one drop.
fn wsee_row(
    cfg: &SystemConfig,
    sweep: f64,
    fh: &Fronthaul,
    kind: Allocator,
    d: usize,
) -> ResultRow {
    let mut row = ResultRow::empty(sweep, fh.label(), kind.name(), d);
    let seed = drop_seed(cfg.simulation.seed, d);
    let res = prepare_drop(cfg, seed).and_then(|(scn, map, q)| {
        let (alloc, note) = allocate(kind, &scn, &map, &q, cfg, seed)?;
        let rep = wsee(&alloc, &scn, &map, &q, cfg)?;
        Ok((rep, note))
    });
    match res {
        Ok((rep, note)) => {
            row.sum_se = rep.se.sum_se;
            row.wsee = rep.wsee;
            if let Some(n) = note {
                // The best iterate is still a valid allocation.
                row.status = format!("ok;{n}");
            }
        }
        Err(e) => row.status = flag(&e),
    }
    row
}

/// WSEE of each allocator versus per-node transmit power (dBm).
pub fn wsee_vs_power(
    cfg: &SystemConfig,
    powers_dbm: &[f64],
    allocators: &[Allocator],
) -> Result<ResultTable, CoreError> {
    cfg.validate()?;
    let fh = if cfg.fronthaul.perfect {
        Fronthaul::Perfect
    } else {
        Fronthaul::Limited {
            bits: cfg.fronthaul.bits,
            capacity_bps: cfg.fronthaul.capacity_bps,
        }
    };
    let mut table = ResultTable::default();
    for &p in powers_dbm {
        let mut c = cfg.clone();
        c.set_tx_power_dbm(p);
        for &kind in allocators {
            let rows = (0..cfg.simulation.drops)
                .into_par_iter()
                .map(|d| wsee_row(&c, p, &fh, kind, d))
                .collect();
            table.push_group(rows);
        }
    }
    Ok(table)
}

/// Sum SE and WSEE versus fronthaul bits ν, for each fronthaul capacity.
pub fn wsee_vs_bits(
    cfg: &SystemConfig,
    bits: &[u32],
    capacities_bps: &[f64],
    allocators: &[Allocator],
) -> Result<ResultTable, CoreError> {
    cfg.validate()?;
    let mut table = ResultTable::default();
    for &capacity_bps in capacities_bps {
        for &nu in bits {
            let fh = Fronthaul::Limited {
                bits: nu,
                capacity_bps,
            };
            let mut c = cfg.clone();
            fh.apply(&mut c);
            for &kind in allocators {
                let rows = (0..cfg.simulation.drops)
                    .into_par_iter()
                    .map(|d| wsee_row(&c, nu as f64, &fh, kind, d))
                    .collect();
                table.push_group(rows);
            }
        }
    }
    Ok(table)
}

/// Closed-form lower bound and Monte-Carlo genie upper bound on the sum SE
/// under EPA1, versus transmit power, for each fronthaul setting.
pub fn se_vs_power(
    cfg: &SystemConfig,
    powers_dbm: &[f64],
    fronthauls: &[Fronthaul],
) -> Result<ResultTable, CoreError> {
    cfg.validate()?;
    let mut table = ResultTable::default();
    for fh in fronthauls {
        for &p in powers_dbm {
            let mut c = cfg.clone();
            fh.apply(&mut c);
            c.set_tx_power_dbm(p);
            let rows = (0..cfg.simulation.drops)
                .into_par_iter()
                .map(|d| {
                    let mut row = ResultRow::empty(p, fh.label(), "EPA1", d);
                    let seed = drop_seed(c.simulation.seed, d);
                    let res = prepare_drop(&c, seed).and_then(|(scn, map, q)| {
                        let alloc = baseline_alloc(Baseline::Epa1, &scn, &map, &q, c.radio.n_tx, 0);
                        let coef = build_coefficients(&scn, &map, &q, &c)?;
                        let lb = se_lower_bounds(&coef, &alloc)?;
                        let ub = ergodic_se_mc(
                            &scn,
                            &map,
                            &q,
                            &alloc,
                            &c,
                            c.simulation.mc_trials,
                            derive_seed(seed, 9),
                        )?;
                        Ok((lb, ub))
                    });
                    match res {
                        Ok((lb, ub)) => {
                            row.sum_se = lb.sum_se;
                            row.sum_se_ub = ub.sum_se.value;
                            row.sum_se_ub_stderr = ub.sum_se.stderr;
                            let lbs = lb.se_dl.iter().chain(&lb.se_ul);
                            let ubs = ub.dl.iter().chain(&ub.ul);
                            row.min_bound_gap = lbs
                                .zip(ubs)
                                .map(|(l, u)| u.value + 3.0 * u.stderr - l)
                                .fold(f64::INFINITY, f64::min);
                        }
                        Err(e) => row.status = flag(&e),
                    }
                    row
                })
                .collect();
            table.push_group(rows);
        }
    }
    Ok(table)
}

/// One closed-form term power next to its Monte-Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub scenario: usize,
    pub side: Side,
    pub ue: usize,
    pub term: Term,
    pub closed: f64,
    pub estimate: Estimate,
}

impl MomentCheck {
    /// Error in standard errors; zero for an exact zero-variance match.
    pub fn z(&self) -> f64 {
        let err = (self.closed - self.estimate.value).abs();
        if self.estimate.stderr > 0.0 {
            err / self.estimate.stderr
        } else if err <= 1e-12 * self.closed.abs() {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Random small system: up to four APs and four UEs per direction, one or
/// two antennas, random pilot power, fronthaul and area.
pub fn random_small_config<R: Rng>(rng: &mut R) -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.geometry.aps = rng.random_range(1..=4);
    cfg.geometry.dl_ues = rng.random_range(1..=4);
    cfg.geometry.ul_ues = rng.random_range(1..=4);
    cfg.geometry.side_km = rng.random_range(0.1..1.0);
    cfg.radio.n_tx = rng.random_range(1..=2);
    cfg.radio.n_rx = cfg.radio.n_tx;
    cfg.radio.p_pilot_w = 10f64.powf(rng.random_range(-2.0..0.0));
    match rng.random_range(0..4u32) {
        0 => cfg.fronthaul.perfect = true,
        nu => {
            cfg.fronthaul.bits = nu;
            cfg.fronthaul.capacity_bps = if rng.random_bool(0.5) { 100e6 } else { 3e6 };
        }
    }
    // Keep the UE cap placeable.
    let need = cfg.geometry.dl_ues.max(cfg.geometry.ul_ues);
    if max_ues_per_ap(&cfg).is_some_and(|k| k * cfg.geometry.aps < need) {
        cfg.fronthaul.capacity_bps = 100e6;
    }
    cfg
}

/// Checks every term once per random scenario under a random power
/// allocation. Terms of both directions alternate between DL and UL across
/// scenarios, and the UE index cycles.
pub fn validate_moments(
    scenarios: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<MomentCheck>, CoreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for s in 0..scenarios {
        let cfg = random_small_config(&mut rng);
        let drop = rng.random::<u64>();
        let scn = generate_drop(&cfg, drop)?;
        let map = select_aps(&scn, &cfg)?;
        let q = QuantizerParams::for_config(&cfg)?;
        let alloc = baseline_alloc(
            Baseline::Rpa,
            &scn,
            &map,
            &q,
            cfg.radio.n_tx,
            derive_seed(drop, 1),
        );
        let suite = moment_suite(&scn, &map, &q, &alloc, &cfg, trials, derive_seed(drop, 2))?;
        for term in Term::ALL {
            let side = match (term.applies_to(Side::Dl), term.applies_to(Side::Ul)) {
                (true, true) if s % 2 == 0 => Side::Dl,
                (true, true) => Side::Ul,
                (true, false) => Side::Dl,
                _ => Side::Ul,
            };
            let ues = if side == Side::Dl {
                &suite.dl
            } else {
                &suite.ul
            };
            let ue = s % ues.len();
            out.push(MomentCheck {
                scenario: s,
                side,
                ue,
                term,
                closed: term_closed_form(&scn, &map, &q, &alloc, &cfg, term, side, ue)?,
                estimate: ues[ue]
                    .term(term)
                    .expect("applicable terms are always estimated"),
            });
        }
    }
    Ok(out)
}

pub fn write_moment_checks<W: Write>(checks: &[MomentCheck], out: W) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "side",
        "ue",
        "term",
        "closed_form",
        "monte_carlo",
        "stderr",
        "z",
    ])?;
    for c in checks {
        w.write_record([
            c.scenario.to_string(),
            c.side.name().to_string(),
            c.ue.to_string(),
            c.term.name().to_string(),
            c.closed.to_string(),
            c.estimate.value.to_string(),
            c.estimate.stderr.to_string(),
            c.z().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocator_names_parse_back() {
        for a in Allocator::ALL {
            assert_eq!(a.name().to_lowercase().parse::<Allocator>().unwrap(), a);
        }
        assert!("GREEDY".parse::<Allocator>().is_err());
    }

    #[test]
    fn mean_stderr_of_constant_is_zero() {
        let (m, s) = mean_stderr(&[2.0, 2.0, 2.0]);
        assert_eq!((m, s), (2.0, 0.0));
        assert!(mean_stderr(&[]).0.is_nan());
    }

    #[test]
    fn wsee_sweep_is_deterministic() {
        let mut cfg = SystemConfig::default();
        cfg.simulation.drops = 3;
        let kinds = [
            Allocator::Base(Baseline::Epa1),
            Allocator::Base(Baseline::Rpa),
        ];
        let a = wsee_vs_power(&cfg, &[20.0], &kinds).unwrap();
        let b = wsee_vs_power(&cfg, &[20.0], &kinds).unwrap();
        assert_eq!(a.rows.len(), 2 * 4);
        let csv = |t: &ResultTable| {
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let text = csv(&a);
        assert_eq!(text, csv(&b));
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().nth(4).unwrap().contains(",mean,"));
    }
}
