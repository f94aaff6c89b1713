//! Monte-Carlo estimates of the ergodic (genie-CSI) SE and of every term
//! power of the received signals.
//!
//! Each trial draws one channel realization and evaluates the term powers
//! conditioned on it, i.e. averaged over data symbols, quantization
//! distortion and noise analytically. Trials use disjoint seed streams and are
//! reduced in trial order, so results do not depend on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::alloc::PowerAllocation;
use crate::channel::{draw_channels_with, ChannelRealization};
use crate::config::SystemConfig;
use crate::fronthaul::ServiceMap;
use crate::quantizer::QuantizerParams;
use crate::rng::stream_rng;
use crate::scenario::Scenario;
use crate::se::{term_closed_form, Side, Term};
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.value - target) / self.stderr
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Conditional term powers of one UE in one trial.
#[derive(Debug, Clone, Copy, Default)]
struct UeSample {
    /// Coherent gain; its mean gives DS and its spread BU.
    gain: Complex64,
    mui: f64,
    /// UDI on the downlink, RI on the uplink.
    cross: f64,
    tqd: f64,
    noise: f64,
}

fn dot_t(a: &[Complex64], b_conj: &[Complex64]) -> Complex64 {
    a.iter().zip(b_conj).map(|(x, y)| x * y.conj()).sum()
}

/// a^H b.
fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

struct Model<'a> {
    scn: &'a Scenario,
    map: &'a ServiceMap,
    alloc: &'a PowerAllocation,
    a: f64,
    dist: f64,
    rho_d: f64,
    rho_u: f64,
    n_t: usize,
    n_r: usize,
    gamma_ri: f64,
}

impl Model<'_> {
    fn downlink(&self, ch: &ChannelRealization, k: usize) -> UeSample {
        let (map, c) = (self.map, &self.alloc.c);
        let m = self.scn.num_aps();
        let mut gain = Complex64::new(0.0, 0.0);
        let mut mui_amp = vec![Complex64::new(0.0, 0.0); self.scn.num_dl()];
        let mut tqd = 0.0;
        for i in 0..m {
            let g = ch.g_dl(i, k);
            for &q in &map.kappa_dm[i] {
                let x = dot_t(g, ch.g_dl_hat(i, q));
                let cq = c[(i, q)];
                if q == k {
                    gain += cq * x;
                } else {
                    mui_amp[q] += cq * x;
                }
                tqd += cq * cq * x.norm_sqr();
            }
        }
        let sr = self.a * self.rho_d.sqrt();
        let mui = self.a * self.a * self.rho_d * mui_amp.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let udi = self.rho_u
            * (0..self.scn.num_ul())
                .map(|l| self.alloc.theta[l] * ch.h_udi(k, l).norm_sqr())
                .sum::<f64>();
        UeSample {
            gain: sr * gain,
            mui,
            cross: udi,
            tqd: self.dist * self.rho_d * tqd,
            noise: 1.0,
        }
    }

    fn uplink(&self, ch: &ChannelRealization, l: usize) -> UeSample {
        let (map, c, theta) = (self.map, &self.alloc.c, &self.alloc.theta);
        let (m, kd, ku) = (self.scn.num_aps(), self.scn.num_dl(), self.scn.num_ul());
        let (nt, nr) = (self.n_t, self.n_r);
        let a2 = self.a * self.a;
        let mut gain = Complex64::new(0.0, 0.0);
        let mut mui_amp = vec![Complex64::new(0.0, 0.0); ku];
        let mut noise = 0.0;
        // Symbol part of RI combined over receiving APs, per DL UE.
        let mut ri_sym = vec![Complex64::new(0.0, 0.0); kd];
        // Distortion part of RI combined over receiving APs, per (i, k).
        let mut ri_dist = vec![Complex64::new(0.0, 0.0); m * kd];
        let mut tqd = 0.0;
        let mut row = vec![Complex64::new(0.0, 0.0); nt];
        let mut sym_m = vec![Complex64::new(0.0, 0.0); kd];
        for &mm in &map.m_ul[l] {
            let gh = ch.g_ul_hat(mm, l);
            let norm2: f64 = gh.iter().map(|z| z.norm_sqr()).sum();
            noise += norm2;
            let mut users = 0.0;
            for q in 0..ku {
                let x = dot_h(gh, ch.g_ul(mm, q));
                if q == l {
                    gain += x;
                } else {
                    mui_amp[q] += x;
                }
                users += theta[q] * x.norm_sqr();
            }
            sym_m.fill(Complex64::new(0.0, 0.0));
            let mut dist_m = 0.0;
            if self.gamma_ri > 0.0 {
                for i in 0..m {
                    let h = ch.h_ri(mm, i);
                    for (t, r) in row.iter_mut().enumerate() {
                        *r = (0..nr).map(|j| gh[j].conj() * h[j * nt + t]).sum();
                    }
                    for &k in &map.kappa_dm[i] {
                        let x = dot_t(&row, ch.g_dl_hat(i, k));
                        let ck = c[(i, k)];
                        sym_m[k] += ck * x;
                        ri_sym[k] += ck * x;
                        ri_dist[i * kd + k] += ck * x;
                        dist_m += ck * ck * x.norm_sqr();
                    }
                }
            }
            let sym_pow: f64 = sym_m.iter().map(|z| z.norm_sqr()).sum();
            tqd += self.rho_u * users + self.rho_d * (a2 * sym_pow + self.dist * dist_m) + norm2;
        }
        let sr = self.a * (self.rho_u * theta[l]).sqrt();
        let mui = a2
            * self.rho_u
            * (0..ku)
                .filter(|&q| q != l)
                .map(|q| theta[q] * mui_amp[q].norm_sqr())
                .sum::<f64>();
        let ri = a2
            * self.rho_d
            * (a2 * ri_sym.iter().map(|z| z.norm_sqr()).sum::<f64>()
                + self.dist * ri_dist.iter().map(|z| z.norm_sqr()).sum::<f64>());
        UeSample {
            gain: sr * gain,
            mui,
            cross: ri,
            tqd: self.dist * tqd,
            noise: a2 * noise,
        }
    }
}

/// Per-UE Monte-Carlo results.
#[derive(Debug, Clone, PartialEq)]
pub struct UeMoments {
    pub side: Side,
    pub ue: usize,
    /// Estimates of the applicable terms, in [`Term::ALL`] order.
    pub terms: Vec<(Term, Estimate)>,
    /// Genie-CSI ergodic SE.
    pub se_ub: Estimate,
}

impl UeMoments {
    pub fn term(&self, t: Term) -> Option<Estimate> {
        self.terms.iter().find(|(x, _)| *x == t).map(|(_, e)| *e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSuite {
    pub trials: usize,
    pub dl: Vec<UeMoments>,
    pub ul: Vec<UeMoments>,
}

fn mean_estimate(xs: impl Iterator<Item = f64> + Clone, n: usize) -> Estimate {
    let nf = n as f64;
    let mean = xs.clone().sum::<f64>() / nf;
    let var = if n > 1 {
        xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        stderr: (var / nf).sqrt(),
    }
}

fn summarize(samples: &[UeSample], side: Side, ue: usize, tau_f: f64) -> UeMoments {
    let n = samples.len();
    let nf = n as f64;
    let re = samples.iter().map(|s| s.gain.re);
    let re_est = mean_estimate(re, n);
    let sd_re = re_est.stderr * nf.sqrt();
    // Bias-corrected square of the mean.
    let ds = Estimate {
        value: re_est.value * re_est.value - sd_re * sd_re / nf,
        stderr: (4.0 * re_est.value.powi(2) * re_est.stderr.powi(2) + 2.0 * re_est.stderr.powi(4))
            .sqrt(),
    };
    let mean_gain: Complex64 = samples.iter().map(|s| s.gain).sum::<Complex64>() / nf;
    let dev = samples.iter().map(|s| (s.gain - mean_gain).norm_sqr());
    let mut bu = mean_estimate(dev, n);
    if n > 1 {
        bu.value *= nf / (nf - 1.0);
    }
    let mui = mean_estimate(samples.iter().map(|s| s.mui), n);
    let cross = mean_estimate(samples.iter().map(|s| s.cross), n);
    let tqd = mean_estimate(samples.iter().map(|s| s.tqd), n);
    let noise = mean_estimate(samples.iter().map(|s| s.noise), n);
    let se = samples.iter().map(|s| {
        let interference = s.mui + s.cross + s.tqd + s.noise;
        tau_f * (1.0 + s.gain.norm_sqr() / interference).log2()
    });
    let se_ub = mean_estimate(se, n);
    let mut terms = vec![(Term::Ds, ds), (Term::Bu, bu), (Term::Mui, mui)];
    match side {
        Side::Dl => terms.extend([(Term::Udi, cross), (Term::Tqd, tqd)]),
        Side::Ul => terms.extend([(Term::Ri, cross), (Term::Tqd, tqd), (Term::N, noise)]),
    }
    UeMoments {
        side,
        ue,
        terms,
        se_ub,
    }
}

/// Runs `trials` channel draws and estimates every term power and the
/// genie-CSI SE of every UE.
pub fn moment_suite(
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<MomentSuite, CoreError> {
    if trials == 0 {
        return Err(CoreError::Moment("at least one trial is required".into()));
    }
    if alloc.c.shape() != (scn.num_aps(), scn.num_dl()) || alloc.theta.len() != scn.num_ul() {
        return Err(CoreError::Dimension(
            "allocation does not match scenario".into(),
        ));
    }
    let model = Model {
        scn,
        map,
        alloc,
        a: q.a_tilde,
        dist: q.distortion(),
        rho_d: cfg.rho_d(),
        rho_u: cfg.rho_u(),
        n_t: cfg.radio.n_tx,
        n_r: cfg.radio.n_rx,
        gamma_ri: cfg.gamma_ri(),
    };
    let (kd, ku) = (scn.num_dl(), scn.num_ul());
    let per_trial: Vec<Vec<UeSample>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let ch = draw_channels_with(scn, model.n_t, model.n_r, model.gamma_ri, &mut rng)?;
            let mut out = Vec::with_capacity(kd + ku);
            out.extend((0..kd).map(|k| model.downlink(&ch, k)));
            out.extend((0..ku).map(|l| model.uplink(&ch, l)));
            Ok(out)
        })
        .collect::<Result<_, CoreError>>()?;
    let tau_f = cfg.tau_f();
    let column = |j: usize| -> Vec<UeSample> { per_trial.iter().map(|r| r[j]).collect() };
    Ok(MomentSuite {
        trials,
        dl: (0..kd)
            .map(|k| summarize(&column(k), Side::Dl, k, tau_f))
            .collect(),
        ul: (0..ku)
            .map(|l| summarize(&column(kd + l), Side::Ul, l, tau_f))
            .collect(),
    })
}

/// Closed form and Monte-Carlo estimate of one term power.
#[allow(clippy::too_many_arguments)]
pub fn moment_oracle(
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    term: Term,
    side: Side,
    ue: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, Estimate), CoreError> {
    let closed = term_closed_form(scn, map, q, alloc, cfg, term, side, ue)?;
    let suite = moment_suite(scn, map, q, alloc, cfg, trials, seed)?;
    let list = if side == Side::Dl {
        &suite.dl
    } else {
        &suite.ul
    };
    let est = list[ue]
        .term(term)
        .expect("applicable terms are always estimated");
    Ok((closed, est))
}

/// Genie-CSI ergodic SE per UE.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicReport {
    pub dl: Vec<Estimate>,
    pub ul: Vec<Estimate>,
    pub sum_se: Estimate,
}

pub fn ergodic_se_mc(
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<ErgodicReport, CoreError> {
    let suite = moment_suite(scn, map, q, alloc, cfg, trials, seed)?;
    Ok(ErgodicReport::from_suite(&suite))
}

impl ErgodicReport {
    pub fn from_suite(suite: &MomentSuite) -> Self {
        let dl: Vec<Estimate> = suite.dl.iter().map(|u| u.se_ub).collect();
        let ul: Vec<Estimate> = suite.ul.iter().map(|u| u.se_ub).collect();
        // Per-UE estimates share channel draws; the sum's stderr is bounded
        // by adding standard errors.
        let all = dl.iter().chain(&ul);
        let sum_se = Estimate {
            value: all.clone().map(|e| e.value).sum(),
            stderr: all.map(|e| e.stderr).sum(),
        };
        Self { dl, ul, sum_se }
    }
}
