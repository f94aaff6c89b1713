use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fdcf_core::experiment::{
    se_vs_power, validate_moments, write_moment_checks, wsee_vs_bits, wsee_vs_power, Allocator,
    Fronthaul, ResultTable,
};
use fdcf_core::SystemConfig;
use fdcf_solver::selftest::run_selftest;
use fdcf_solver::SolverOptions;

#[derive(Parser)]
#[command(
    name = "fdcf",
    version,
    about = "Full-duplex cell-free massive MIMO sweeps and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; missing keys take the reference defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of drops (overrides the config).
    #[arg(long, global = true)]
    drops: Option<usize>,
    /// Output CSV; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form lower bound and Monte-Carlo upper bound on the sum SE under
    /// EPA1, for perfect and for the configured limited fronthaul.
    SeVsPower {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 10.0, 20.0, 30.0])]
        powers_dbm: Vec<f64>,
        /// Set the large-scale fading of served links to one.
        #[arg(long)]
        unity: bool,
    },
    /// WSEE of each allocator versus transmit power.
    WseeVsPower {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 10.0, 20.0, 30.0])]
        powers_dbm: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["OPA", "EPA1", "EPA2", "RPA"])]
        allocators: Vec<Allocator>,
    },
    /// Sum SE and WSEE versus fronthaul bits, per fronthaul capacity.
    WseeVsBits {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
        bits: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 100.0])]
        capacities_mbps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["OPA", "EPA1"])]
        allocators: Vec<Allocator>,
    },
    /// Closed-form term powers against Monte-Carlo on random small scenarios.
    ValidateMoments {
        #[arg(long, default_value_t = 20)]
        scenarios: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
    /// Randomized convex programs through the interior-point solver.
    SelftestSolver {
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(cli: &Cli) -> Result<SystemConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SystemConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SystemConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.simulation.seed = s;
    }
    if let Some(d) = cli.drops {
        cfg.simulation.drops = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn flagged(table: &ResultTable) -> usize {
    table
        .rows
        .iter()
        .filter(|r| r.drop.is_some() && !r.is_ok())
        .count()
}

/// Drops on which OPA ends below the best baseline.
fn dominance_failures(table: &ResultTable) -> Vec<String> {
    let mut out = Vec::new();
    for opa in table
        .rows
        .iter()
        .filter(|r| r.variant == "OPA" && r.drop.is_some() && r.is_ok())
    {
        let best = table
            .rows
            .iter()
            .filter(|r| {
                r.variant != "OPA"
                    && r.drop == opa.drop
                    && r.sweep == opa.sweep
                    && r.fronthaul == opa.fronthaul
            })
            .max_by(|a, b| a.wsee.total_cmp(&b.wsee));
        if let Some(b) = best.filter(|b| opa.wsee < b.wsee - 1e-9) {
            out.push(format!(
                "sweep {} {} drop {}: OPA {:.4e} < {} {:.4e}",
                opa.sweep,
                opa.fronthaul,
                opa.drop.unwrap_or_default(),
                opa.wsee,
                b.variant,
                b.wsee
            ));
        }
    }
    out
}

fn run(cli: &Cli) -> Result<Vec<String>> {
    let cfg = load_config(cli)?;
    let mut failures = Vec::new();
    match &cli.command {
        Command::SeVsPower { powers_dbm, unity } => {
            let mut cfg = cfg;
            cfg.radio.unity_fading |= unity;
            let limited = Fronthaul::Limited {
                bits: cfg.fronthaul.bits,
                capacity_bps: cfg.fronthaul.capacity_bps,
            };
            let table = se_vs_power(&cfg, powers_dbm, &[Fronthaul::Perfect, limited])?;
            table.write_csv(output(&cli.out)?)?;
            for r in table
                .rows
                .iter()
                .filter(|r| r.drop.is_some() && r.is_ok() && r.min_bound_gap < 0.0)
            {
                failures.push(format!(
                    "{} dBm {} drop {}: lower bound exceeds UB + 3 stderr by {:.3e}",
                    r.sweep,
                    r.fronthaul,
                    r.drop.unwrap_or_default(),
                    -r.min_bound_gap
                ));
            }
            eprintln!(
                "{} rows, {} flagged drops",
                table.rows.len(),
                flagged(&table)
            );
        }
        Command::WseeVsPower {
            powers_dbm,
            allocators,
        } => {
            let table = wsee_vs_power(&cfg, powers_dbm, allocators)?;
            table.write_csv(output(&cli.out)?)?;
            failures.extend(dominance_failures(&table));
            eprintln!(
                "{} rows, {} flagged drops",
                table.rows.len(),
                flagged(&table)
            );
        }
        Command::WseeVsBits {
            bits,
            capacities_mbps,
            allocators,
        } => {
            let caps: Vec<f64> = capacities_mbps.iter().map(|c| c * 1e6).collect();
            let table = wsee_vs_bits(&cfg, bits, &caps, allocators)?;
            table.write_csv(output(&cli.out)?)?;
            failures.extend(dominance_failures(&table));
            eprintln!(
                "{} rows, {} flagged drops",
                table.rows.len(),
                flagged(&table)
            );
        }
        Command::ValidateMoments { scenarios, trials } => {
            let checks = validate_moments(*scenarios, *trials, cfg.simulation.seed)?;
            write_moment_checks(&checks, output(&cli.out)?)?;
            for c in checks.iter().filter(|c| c.z() > 3.0) {
                failures.push(format!(
                    "scenario {} {} UE {} {}: closed form {:.6e}, Monte-Carlo {:.6e} ± {:.2e}",
                    c.scenario,
                    c.side.name(),
                    c.ue,
                    c.term.name(),
                    c.closed,
                    c.estimate.value,
                    c.estimate.stderr
                ));
            }
            eprintln!("{} checks", checks.len());
        }
        Command::SelftestSolver { count } => {
            let cases = run_selftest(*count, cfg.simulation.seed, &SolverOptions::default());
            let mut w = csv::Writer::from_writer(output(&cli.out)?);
            w.write_record([
                "case",
                "vars",
                "rows",
                "affine_only",
                "status",
                "kkt_residual",
                "objective",
                "reference_gap",
            ])?;
            for c in &cases {
                w.write_record([
                    c.index.to_string(),
                    c.vars.to_string(),
                    c.rows.to_string(),
                    c.affine_only.to_string(),
                    format!("{:?}", c.status),
                    c.kkt_residual.to_string(),
                    c.objective.to_string(),
                    c.reference_gap().map_or(String::new(), |g| g.to_string()),
                ])?;
                if !c.passed(1e-6, 1e-8) {
                    failures.push(format!(
                        "case {}: {:?}, KKT residual {:.2e}, gap {:?}",
                        c.index,
                        c.status,
                        c.kkt_residual,
                        c.reference_gap()
                    ));
                }
            }
            w.flush()?;
            eprintln!("{} cases", cases.len());
        }
    }
    Ok(failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{} failed invariant(s):", failures.len());
            for f in &failures {
                eprintln!("  {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
