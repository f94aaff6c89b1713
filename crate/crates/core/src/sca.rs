//! WSEE maximization by successive convex approximation.
//!
//! Downlink coefficients are optimized in the normalized form
//! x_mk = c_mk·√(b̃ N_t γ_mk), so the per-AP power limit reads Σ_k x_mk² ≤ 1.
//! Each UE's SINR rows are divided by its SINR denominator ω at the starting
//! allocation, which keeps λ and ζ of order one.

use std::collections::BTreeMap;
use std::io::Write;

use fdcf_solver::{solve, Constraint, ConvexProgram, SolveStatus, SolverOptions, VarId};

use crate::alloc::{baseline_alloc, Baseline, PowerAllocation};
use crate::config::SystemConfig;
use crate::fronthaul::ServiceMap;
use crate::power::{p_fix, wsee_with, WSEEReport};
use crate::quantizer::QuantizerParams;
use crate::scenario::Scenario;
use crate::se::{build_coefficients, sinr_parts_dl, sinr_parts_ul, SECoefficients};
use crate::CoreError;

/// Coefficients (c1, c2) of the affine under-estimator
/// Λ(f1, f2) = c1·f1 + c2·f2 of f1²/f2 at (f1_n, f2_n).
pub fn taylor_underestimator(f1_n: f64, f2_n: f64) -> Result<(f64, f64), CoreError> {
    if !(f2_n > 0.0) {
        return Err(CoreError::Moment(format!(
            "expansion point needs f2 > 0, got {f2_n}"
        )));
    }
    let r = f1_n / f2_n;
    Ok((2.0 * r, -r * r))
}

/// Everything about a drop that stays fixed across SCA rounds.
#[derive(Debug, Clone)]
pub struct ScaContext {
    pub coef: SECoefficients,
    pub scn: Scenario,
    pub q: QuantizerParams,
    pub cfg: SystemConfig,
    /// Served DL pairs with nonzero estimate quality; one x variable each.
    pub pairs: Vec<(usize, usize)>,
    /// √(b̃ N_t γ_mk) per pair.
    pub scale: Vec<f64>,
    /// Per-UE row normalization (DL then UL).
    pub omega: Vec<f64>,
    pub p_fix: f64,
    pub zeta_min_dl: f64,
    pub zeta_min_ul: f64,
    pub weights: Vec<f64>,
}

/// One SCA iterate: normalized powers plus the slack variables, per UE in
/// DL-then-UL order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub zeta: Vec<f64>,
    pub psi: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Maximize Σ w·f.
    Wsee,
    /// Maximize the common relative SINR margin s in ζ ≥ ζ_min(1 + s).
    Feasibility,
}

/// Variable layout of a built subproblem.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConvexProgram,
    pub start: Vec<f64>,
    pub margin_var: Option<VarId>,
}

impl ScaContext {
    pub fn new(
        scn: &Scenario,
        map: &ServiceMap,
        q: &QuantizerParams,
        cfg: &SystemConfig,
    ) -> Result<Self, CoreError> {
        let coef = build_coefficients(scn, map, q, cfg)?;
        let nt = cfg.radio.n_tx as f64;
        let pairs: Vec<(usize, usize)> = map
            .dl_pairs()
            .into_iter()
            .filter(|&(m, k)| scn.gamma_dl[(m, k)] > 0.0)
            .collect();
        let scale = pairs
            .iter()
            .map(|&(m, k)| (q.b_tilde * nt * scn.gamma_dl[(m, k)]).sqrt())
            .collect();
        let zmin = |s: f64| 2f64.powf(s / cfg.tau_f()) - 1.0;
        let weights = (0..scn.num_dl())
            .map(|k| cfg.weight_dl(k))
            .chain((0..scn.num_ul()).map(|l| cfg.weight_ul(l)))
            .collect();
        Ok(Self {
            coef,
            scn: scn.clone(),
            q: *q,
            cfg: cfg.clone(),
            pairs,
            scale,
            omega: vec![1.0; scn.num_dl() + scn.num_ul()],
            p_fix: p_fix(cfg, map, q)?,
            zeta_min_dl: zmin(cfg.optimizer.qos_dl),
            zeta_min_ul: zmin(cfg.optimizer.qos_ul),
            weights,
        })
    }

    pub fn kd(&self) -> usize {
        self.scn.num_dl()
    }

    pub fn ku(&self) -> usize {
        self.scn.num_ul()
    }

    pub fn num_ues(&self) -> usize {
        self.kd() + self.ku()
    }

    pub fn zeta_min(&self, u: usize) -> f64 {
        if u < self.kd() {
            self.zeta_min_dl
        } else {
            self.zeta_min_ul
        }
    }

    pub fn to_alloc(&self, x: &[f64], theta: &[f64]) -> PowerAllocation {
        let mut a = PowerAllocation::zeros(self.scn.num_aps(), self.kd(), self.ku());
        for (j, &(m, k)) in self.pairs.iter().enumerate() {
            a.c[(m, k)] = x[j] / self.scale[j];
        }
        a.theta = theta.to_vec();
        a
    }

    pub fn from_alloc(&self, alloc: &PowerAllocation) -> (Vec<f64>, Vec<f64>) {
        let x = self
            .pairs
            .iter()
            .zip(&self.scale)
            .map(|(&(m, k), s)| alloc.c[(m, k)] * s)
            .collect();
        (x, alloc.theta.clone())
    }

    /// SINR numerator and denominator of UE `u` (DL then UL).
    fn sinr_parts(&self, alloc: &PowerAllocation, u: usize) -> (f64, f64) {
        if u < self.kd() {
            sinr_parts_dl(&self.coef, alloc, u)
        } else {
            sinr_parts_ul(&self.coef, alloc, u - self.kd())
        }
    }

    /// Consumed power of UE `u`.
    fn power(&self, x: &[f64], theta: &[f64], u: usize) -> f64 {
        let pm = &self.cfg.power;
        if u < self.kd() {
            let radiated: f64 = self
                .pairs
                .iter()
                .enumerate()
                .filter(|(_, p)| p.1 == u)
                .map(|(j, _)| x[j] * x[j])
                .sum();
            self.p_fix
                + pm.ptc_dl_w
                + self.cfg.radio.p_dl_w * radiated / (self.q.b_tilde * pm.alpha_ap)
        } else {
            self.p_fix + pm.ptc_ul_w + self.cfg.radio.p_ul_w * theta[u - self.kd()] / pm.alpha_ue
        }
    }

    /// Sets ω to the SINR denominators at `alloc`.
    pub fn normalize_at(&mut self, alloc: &PowerAllocation) {
        self.omega = (0..self.num_ues())
            .map(|u| self.sinr_parts(alloc, u).1.max(f64::MIN_POSITIVE))
            .collect();
    }

    /// Slacks strictly inside their defining inequalities at the allocation
    /// (x, θ), each shrunk by the configured margin.
    pub fn slacks_for(&self, x: &[f64], theta: &[f64]) -> ScaState {
        let eps = self.cfg.optimizer.margin;
        let shrink = 1.0 - eps;
        let alloc = self.to_alloc(x, theta);
        let n = self.num_ues();
        let mut st = ScaState {
            x: x.to_vec(),
            theta: theta.to_vec(),
            lambda: vec![0.0; n],
            zeta: vec![0.0; n],
            psi: vec![0.0; n],
            f: vec![0.0; n],
        };
        for u in 0..n {
            let (num, den) = self.sinr_parts(&alloc, u);
            let w = self.omega[u];
            let lam = shrink * (num / w).sqrt();
            let zeta_true = lam * lam / (den / w);
            let zmin = self.zeta_min(u);
            let mut zeta = shrink * zeta_true;
            if zeta_true > zmin && zeta <= zmin {
                zeta = 0.5 * (zeta_true + zmin);
            }
            let psi = (shrink * self.cfg.tau_f() * (1.0 + zeta).log2()).sqrt();
            st.lambda[u] = lam;
            st.zeta[u] = zeta;
            st.psi[u] = psi;
            st.f[u] = shrink * psi * psi / self.power(x, theta, u);
        }
        st
    }

    /// Largest violation of the original (unlinearized) constraints by a
    /// state; negative when every constraint holds strictly.
    pub fn max_violation(&self, st: &ScaState, check_qos: bool) -> f64 {
        let alloc = self.to_alloc(&st.x, &st.theta);
        let mut v = f64::NEG_INFINITY;
        for u in 0..self.num_ues() {
            let (num, den) = self.sinr_parts(&alloc, u);
            let w = self.omega[u];
            if check_qos {
                v = v.max(self.zeta_min(u) - st.zeta[u]);
            }
            v = v.max(st.psi[u] * st.psi[u] - self.cfg.tau_f() * (1.0 + st.zeta[u]).log2());
            v = v.max(st.lambda[u] * st.lambda[u] - num / w);
            v = v.max(den / w - st.lambda[u] * st.lambda[u] / st.zeta[u]);
            v = v.max(self.power(&st.x, &st.theta, u) - st.psi[u] * st.psi[u] / st.f[u]);
            for val in [st.lambda[u], st.zeta[u], st.psi[u], st.f[u]] {
                v = v.max(-val);
            }
        }
        for m in 0..self.scn.num_aps() {
            let load: f64 = self
                .pairs
                .iter()
                .zip(&st.x)
                .filter(|(p, _)| p.0 == m)
                .map(|(_, x)| x * x)
                .sum();
            v = v.max(load - 1.0);
        }
        for &x in st.x.iter().chain(&st.theta) {
            v = v.max(-x).max(x - 1.0);
        }
        v
    }

    /// Objective Σ w·f (WSEE divided by the bandwidth).
    pub fn objective(&self, st: &ScaState) -> f64 {
        st.f.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    pub fn wsee_report(&self, x: &[f64], theta: &[f64]) -> Result<WSEEReport, CoreError> {
        wsee_with(
            &self.coef,
            &self.to_alloc(x, theta),
            &self.scn,
            &self.q,
            &self.cfg,
        )
    }

    /// Convex subproblem linearized at `st`.
    pub fn build_subproblem(&self, st: &ScaState, mode: Mode) -> Result<Subproblem, CoreError> {
        let mut p = ConvexProgram::new();
        let mut start = Vec::new();
        let mut var = |p: &mut ConvexProgram, name: String, lo: f64, hi: f64, v0: f64| {
            start.push(v0);
            p.add_var(name, lo, hi)
        };
        let xv: Vec<VarId> = self
            .pairs
            .iter()
            .enumerate()
            .map(|(j, &(m, k))| var(&mut p, format!("x[{m},{k}]"), 0.0, 1.0, st.x[j]))
            .collect();
        let tv: Vec<VarId> = (0..self.ku())
            .map(|l| var(&mut p, format!("theta[{l}]"), 0.0, 1.0, st.theta[l]))
            .collect();
        let n = self.num_ues();
        let name = |u: usize| {
            if u < self.kd() {
                format!("dl[{u}]")
            } else {
                format!("ul[{}]", u - self.kd())
            }
        };
        let inf = f64::INFINITY;
        let lam: Vec<VarId> = (0..n)
            .map(|u| {
                var(
                    &mut p,
                    format!("lambda_{}", name(u)),
                    0.0,
                    inf,
                    st.lambda[u],
                )
            })
            .collect();
        let zeta: Vec<VarId> = (0..n)
            .map(|u| var(&mut p, format!("zeta_{}", name(u)), 0.0, inf, st.zeta[u]))
            .collect();
        let psi: Vec<VarId> = (0..n)
            .map(|u| var(&mut p, format!("psi_{}", name(u)), 0.0, inf, st.psi[u]))
            .collect();
        let f: Vec<VarId> = (0..n)
            .map(|u| var(&mut p, format!("f_{}", name(u)), 0.0, inf, st.f[u]))
            .collect();

        let margin_var = match mode {
            Mode::Wsee => {
                for (&fu, &wu) in f.iter().zip(&self.weights) {
                    p.add_objective(fu, wu);
                }
                None
            }
            Mode::Feasibility => {
                let s0 = (0..n)
                    .map(|u| st.zeta[u] / self.zeta_min(u) - 1.0)
                    .fold(inf, f64::min);
                let s = var(
                    &mut p,
                    "margin".into(),
                    -2.0,
                    1e3,
                    s0 - 1e-3 * (1.0 + s0.abs()),
                );
                p.add_objective(s, 1.0);
                Some(s)
            }
        };

        let tau_f = self.cfg.tau_f();
        let pm = &self.cfg.power;
        let coef = &self.coef;
        let kd = self.kd();
        let merge = |terms: Vec<(VarId, f64)>| -> Vec<(VarId, f64)> {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (v, c) in terms {
                *acc.entry(v.0).or_insert(0.0) += c;
            }
            acc.into_iter()
                .filter(|&(_, c)| c != 0.0)
                .map(|(v, c)| (VarId(v), c))
                .collect()
        };

        for u in 0..n {
            let label = name(u);
            let w = self.omega[u];
            let zmin = self.zeta_min(u);
            match margin_var {
                None => p.add_constraint(
                    format!("qos_{label}"),
                    Constraint::Affine {
                        a: vec![(zeta[u], -1.0)],
                        b: -zmin,
                    },
                )?,
                Some(s) => p.add_constraint(
                    format!("qos_{label}"),
                    Constraint::Affine {
                        a: vec![(zeta[u], -1.0), (s, zmin)],
                        b: -zmin,
                    },
                )?,
            }
            p.add_constraint(
                format!("rate_{label}"),
                Constraint::SqLeLog {
                    sq: psi[u],
                    arg: zeta[u],
                    scale: tau_f,
                },
            )?;

            let (c1, c2) = taylor_underestimator(st.lambda[u], st.zeta[u])?;
            let mut quad = Vec::new();
            let mut lin = vec![(lam[u], -c1), (zeta[u], -c2)];
            let rhs = if u < kd {
                let k = u;
                let mut num = vec![(lam[u], 1.0)];
                for (j, &(m, kk)) in self.pairs.iter().enumerate() {
                    if kk == k {
                        num.push((xv[j], -coef.a_dl[(m, k)] / (self.scale[j] * w.sqrt())));
                    }
                }
                p.add_constraint(
                    format!("num_{label}"),
                    Constraint::Affine { a: num, b: 0.0 },
                )?;
                for (j, &(m, q)) in self.pairs.iter().enumerate() {
                    let s2 = self.scale[j] * self.scale[j];
                    let mut c = coef.b_dl(k, m, q) / s2;
                    if q == k {
                        c += coef.e_dl[(m, k)] / s2;
                    }
                    quad.push((xv[j], c / w));
                }
                for (l, &t) in tv.iter().enumerate() {
                    lin.push((t, coef.d_dl[(k, l)] / w));
                }
                -1.0 / w
            } else {
                let l = u - kd;
                p.add_constraint(
                    format!("num_{label}"),
                    Constraint::SocNum {
                        sq: lam[u],
                        a: vec![(tv[l], coef.a_ul[l] / w)],
                    },
                )?;
                for (j, &(i, k)) in self.pairs.iter().enumerate() {
                    let s2 = self.scale[j] * self.scale[j];
                    quad.push((xv[j], coef.d_ul(l, i, k) / s2 / w));
                }
                for (q, &t) in tv.iter().enumerate() {
                    let mut c = coef.b_ul[(l, q)];
                    if q == l {
                        c += coef.e_ul[l];
                    }
                    lin.push((t, c / w));
                }
                -coef.f_ul[l] / w
            };
            p.add_constraint(
                format!("sinr_{label}"),
                Constraint::QuadLeAffine {
                    q: merge(quad),
                    a: merge(lin),
                    b: rhs,
                },
            )?;

            let (d1, d2) = taylor_underestimator(st.psi[u], st.f[u])?;
            let fixed = if u < kd {
                self.p_fix + pm.ptc_dl_w
            } else {
                self.p_fix + pm.ptc_ul_w
            };
            let mut pq = Vec::new();
            let mut pl = vec![(psi[u], -d1), (f[u], -d2)];
            if u < kd {
                let cx = self.cfg.radio.p_dl_w / (self.q.b_tilde * pm.alpha_ap);
                for (j, &(_, k)) in self.pairs.iter().enumerate() {
                    if k == u {
                        pq.push((xv[j], cx));
                    }
                }
            } else {
                pl.push((tv[u - kd], self.cfg.radio.p_ul_w / pm.alpha_ue));
            }
            p.add_constraint(
                format!("power_{label}"),
                Constraint::QuadLeAffine {
                    q: pq,
                    a: pl,
                    b: -fixed,
                },
            )?;
        }

        for m in 0..self.scn.num_aps() {
            let q: Vec<(VarId, f64)> = self
                .pairs
                .iter()
                .enumerate()
                .filter(|(_, p)| p.0 == m)
                .map(|(j, _)| (xv[j], 1.0))
                .collect();
            if !q.is_empty() {
                p.add_constraint(
                    format!("ap_power[{m}]"),
                    Constraint::QuadLeAffine {
                        q,
                        a: vec![],
                        b: 1.0,
                    },
                )?;
            }
        }
        Ok(Subproblem {
            program: p,
            start,
            margin_var,
        })
    }

    fn state_from_point(&self, point: &[f64]) -> ScaState {
        let np = self.pairs.len();
        let ku = self.ku();
        let n = self.num_ues();
        let base = np + ku;
        ScaState {
            x: point[..np].to_vec(),
            theta: point[np..base].to_vec(),
            lambda: point[base..base + n].to_vec(),
            zeta: point[base + n..base + 2 * n].to_vec(),
            psi: point[base + 2 * n..base + 3 * n].to_vec(),
            f: point[base + 3 * n..base + 4 * n].to_vec(),
        }
    }
}

/// EPA1 shrunk by the margin: the optimizer's starting allocation.
pub fn init_allocation(
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    cfg: &SystemConfig,
) -> PowerAllocation {
    let mut a = baseline_alloc(Baseline::Epa1, scn, map, q, cfg.radio.n_tx, 0);
    let shrink = 1.0 - cfg.optimizer.margin;
    a.c *= shrink;
    for t in &mut a.theta {
        *t *= shrink;
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    /// Subproblem optimum Σ w·f.
    pub objective: f64,
    /// WSEE (bits/J) of the iterate's allocation.
    pub wsee: f64,
    pub residue: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    /// Which starting allocation produced this run.
    pub start: &'static str,
    /// Feasibility-phase rounds run before the main loop.
    pub feasibility_rounds: usize,
    pub converged: bool,
    /// Set when a subproblem failed and the best earlier iterate was kept.
    pub solver_failure: bool,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CoreError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "objective", "wsee", "residue", "solver_status"])?;
        for e in &self.entries {
            w.write_record([
                e.iter.to_string(),
                e.objective.to_string(),
                e.wsee.to_string(),
                e.residue.to_string(),
                e.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub alloc: PowerAllocation,
    pub report: WSEEReport,
    pub trace: Trace,
    pub context: ScaContext,
    pub state: ScaState,
}

fn residue(a: &ScaState, b: &ScaState) -> f64 {
    a.x.iter()
        .zip(&b.x)
        .chain(a.theta.iter().zip(&b.theta))
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::Infeasible => "infeasible",
    }
}

/// Raises the minimum SINR margin until every QoS target holds strictly.
fn feasibility_phase(
    ctx: &ScaContext,
    mut st: ScaState,
    opts: &SolverOptions,
    max_rounds: usize,
) -> Result<(ScaState, usize), CoreError> {
    let target = 1e-3;
    let margin = |st: &ScaState| {
        (0..ctx.num_ues())
            .map(|u| st.zeta[u] / ctx.zeta_min(u) - 1.0)
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = margin(&st);
    for round in 1..=max_rounds {
        let sub = ctx.build_subproblem(&st, Mode::Feasibility)?;
        let res = solve(&sub.program, &sub.start, opts)?;
        if res.status == SolveStatus::Infeasible
            || sub.program.max_violation(&res.point) > opts.feas_tol
        {
            break;
        }
        let next = ctx.state_from_point(&res.point);
        let s = margin(&next);
        let stalled = s <= best + 1e-9;
        st = next;
        best = best.max(s);
        if best >= target {
            return Ok((st, round));
        }
        if stalled {
            break;
        }
    }
    Err(CoreError::QosInfeasible { margin: best })
}

/// SCA from one starting allocation: feasibility phase if needed, then
/// WSEE rounds until the iterate settles.
fn run_from(
    ctx: &mut ScaContext,
    init: &PowerAllocation,
    opts: &SolverOptions,
    start: &'static str,
) -> Result<(ScaState, WSEEReport, Trace), CoreError> {
    let cfg = ctx.cfg.clone();
    ctx.normalize_at(init);
    let (x0, t0) = ctx.from_alloc(init);
    let mut st = ctx.slacks_for(&x0, &t0);

    let feasible = (0..ctx.num_ues()).all(|u| st.zeta[u] > ctx.zeta_min(u));
    let mut feasibility_rounds = 0;
    if !feasible {
        let (fs, rounds) = feasibility_phase(ctx, st, opts, cfg.optimizer.max_iter)?;
        feasibility_rounds = rounds;
        let alloc = ctx.to_alloc(&fs.x, &fs.theta);
        ctx.normalize_at(&alloc);
        st = ctx.slacks_for(&fs.x, &fs.theta);
        if !(0..ctx.num_ues()).all(|u| st.zeta[u] > ctx.zeta_min(u)) {
            return Err(CoreError::QosInfeasible { margin: 0.0 });
        }
    }

    let mut trace = Trace {
        entries: Vec::new(),
        start,
        feasibility_rounds,
        converged: false,
        solver_failure: false,
    };
    let mut best = (st.clone(), ctx.wsee_report(&st.x, &st.theta)?);
    trace.entries.push(TraceEntry {
        iter: 0,
        objective: ctx.objective(&st),
        wsee: best.1.wsee,
        residue: f64::NAN,
        status: "init".into(),
    });

    for iter in 1..=cfg.optimizer.max_iter {
        let sub = ctx.build_subproblem(&st, Mode::Wsee)?;
        let res = solve(&sub.program, &sub.start, opts)?;
        let viol = sub.program.max_violation(&res.point);
        if res.status == SolveStatus::Infeasible || viol > opts.feas_tol {
            trace.solver_failure = true;
            trace.entries.push(TraceEntry {
                iter,
                objective: f64::NAN,
                wsee: f64::NAN,
                residue: f64::NAN,
                status: status_name(res.status).into(),
            });
            break;
        }
        let next = ctx.state_from_point(&res.point);
        let r = residue(&st, &next);
        let report = ctx.wsee_report(&next.x, &next.theta)?;
        trace.entries.push(TraceEntry {
            iter,
            objective: res.objective,
            wsee: report.wsee,
            residue: r,
            status: status_name(res.status).into(),
        });
        st = next;
        if report.wsee >= best.1.wsee {
            best = (st.clone(), report);
        }
        if r <= cfg.optimizer.eps_sca {
            trace.converged = true;
            break;
        }
    }
    Ok((best.0, best.1, trace))
}

/// Maximizes the WSEE of one drop.
///
/// SCA runs from the margin-shrunk EPA1 allocation and, when QoS targets are
/// set, also from the optimum of the QoS-free problem; the better result is
/// kept.
pub fn optimize(
    scn: &Scenario,
    map: &ServiceMap,
    q: &QuantizerParams,
    cfg: &SystemConfig,
) -> Result<ScaOutcome, CoreError> {
    let opts = SolverOptions::with_tol(cfg.optimizer.solver_tol);
    let epa = init_allocation(scn, map, q, cfg);
    let mut ctx = ScaContext::new(scn, map, q, cfg)?;
    let mut runs = vec![run_from(&mut ctx, &epa, &opts, "epa1").map(|r| (r, ctx.clone()))];

    if ctx.zeta_min_dl > 0.0 || ctx.zeta_min_ul > 0.0 {
        let mut relaxed_cfg = cfg.clone();
        relaxed_cfg.optimizer.qos_dl = 0.0;
        relaxed_cfg.optimizer.qos_ul = 0.0;
        let mut relaxed = ScaContext::new(scn, map, q, &relaxed_cfg)?;
        if let Ok((rs, _, _)) = run_from(&mut relaxed, &epa, &opts, "epa1") {
            // Pull the relaxed optimum off the boundary towards EPA1.
            let eps = cfg.optimizer.margin;
            let mut warm = relaxed.to_alloc(&rs.x, &rs.theta);
            warm.c = warm.c * (1.0 - eps) + &epa.c * eps;
            for (t, t0) in warm.theta.iter_mut().zip(&epa.theta) {
                *t = (1.0 - eps) * *t + eps * t0;
            }
            let mut ctx2 = ScaContext::new(scn, map, q, cfg)?;
            runs.push(run_from(&mut ctx2, &warm, &opts, "qos_free").map(|r| (r, ctx2)));
        }
    }

    let mut best: Option<((ScaState, WSEEReport, Trace), ScaContext)> = None;
    let mut err = None;
    for run in runs {
        match run {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.0 .1.wsee > b.0 .1.wsee) {
                    best = Some(r);
                }
            }
            Err(e) => err = Some(e),
        }
    }
    match best {
        Some(((state, report, trace), context)) => Ok(ScaOutcome {
            alloc: context.to_alloc(&state.x, &state.theta),
            report,
            trace,
            context,
            state,
        }),
        None => Err(err.expect("at least one run was attempted")),
    }
}
