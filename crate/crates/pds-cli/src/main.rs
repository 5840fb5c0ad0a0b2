//! Command-line front end: `run` a scenario, `sweep` it across step sizes,
//! or `verify` a stored energy ledger.
//!
//! Exit codes: 0 — run finished and every certificate gate passed;
//! 1 — the run failed or a gate was violated (the gate is named on stdout);
//! 2 — usage, configuration, or file errors.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use pds_core::diagnostics::{
    check_energy_inequality, COMPL_TOL, INEQ_RTOL, VI_TOL, YIELD_TOL,
};
use pds_core::driver::{RunSummary, Simulation};
use pds_core::io::{read_config, read_ledger_csv};

#[derive(Parser)]
#[command(
    name = "pds",
    version,
    about = "2-D dynamic plasticity + gradient damage simulator with per-step certificates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario, print the summary, and certify every step.
    Run {
        /// Scenario file (`key = value` format).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the time-step size.
        #[arg(long)]
        tau: Option<f64>,
        /// Override the step count (sets `t_end = steps · tau`).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run one scenario at several step sizes and tabulate the norm monitors.
    Sweep {
        /// Scenario file (`key = value` format).
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated step sizes, e.g. `2e-3,1e-3,5e-4`.
        #[arg(long = "tau-list", value_delimiter = ',', required = true)]
        tau_list: Vec<f64>,
    },
    /// Re-check a stored ledger CSV against the certificate gates.
    Verify {
        /// Ledger CSV written by a previous run.
        #[arg(long)]
        ledger: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Run { config, out, tau, steps } => cmd_run(config, out, tau, steps),
        Cmd::Sweep { config, tau_list } => cmd_sweep(config, tau_list),
        Cmd::Verify { ledger } => cmd_verify(ledger),
    }
}

/// Gates violated by a finished run, by name.
fn failing_gates(s: &RunSummary) -> Vec<&'static str> {
    let mut v = Vec::new();
    if !s.report.pass {
        v.push("energy inequality");
    }
    if s.max_yield_residual > YIELD_TOL {
        v.push("yield admissibility");
    }
    if s.max_complementarity_residual > COMPL_TOL {
        v.push("flow-rule complementarity");
    }
    if s.max_vi_residual > VI_TOL {
        v.push("damage variational inequality");
    }
    v
}

fn cmd_run(
    config: PathBuf,
    out: Option<PathBuf>,
    tau: Option<f64>,
    steps: Option<usize>,
) -> Result<i32> {
    let mut cfg = read_config(&config)?;
    if let Some(t) = tau {
        cfg.tau = t;
    }
    if let Some(n) = steps {
        cfg.t_end = n as f64 * cfg.tau;
    }
    if let Some(dir) = out {
        cfg.output.dir = Some(dir);
    }
    let sim = Simulation::new(cfg)?;
    let summary = match sim.run() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("run failed: {e}");
            return Ok(1);
        }
    };
    print!("{}", summary.text());
    if summary.pass {
        Ok(0)
    } else {
        for gate in failing_gates(&summary) {
            println!("gate violated: {gate}");
        }
        Ok(1)
    }
}

fn cmd_sweep(config: PathBuf, tau_list: Vec<f64>) -> Result<i32> {
    let base = read_config(&config)?;
    let mut results = Vec::new();
    println!(
        "{:<12} {:>7} {:>13} {:>13} {:>13} {:>13}  pass",
        "tau", "steps", "worst_ineq", "yield_res", "compl_res", "vi_res"
    );
    let mut all_pass = true;
    for &tau in &tau_list {
        let mut cfg = base.clone();
        cfg.tau = tau;
        cfg.output.dir = None;
        let sim = Simulation::new(cfg)?;
        let summary = match sim.run_with(|_| {}) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("run failed at tau = {tau:e}: {e}");
                return Ok(1);
            }
        };
        println!(
            "{:<12e} {:>7} {:>13.3e} {:>13.3e} {:>13.3e} {:>13.3e}  {}",
            tau,
            summary.steps,
            summary.report.worst_normalized,
            summary.max_yield_residual,
            summary.max_complementarity_residual,
            summary.max_vi_residual,
            if summary.pass { "yes" } else { "NO" }
        );
        all_pass &= summary.pass;
        results.push(summary);
    }
    // Monitor table: one row per monitor, one column per step size.
    println!();
    print!("{:<22}", "monitor");
    for &tau in &tau_list {
        print!(" {tau:>13e}");
    }
    println!();
    let tables: Vec<_> = results.iter().map(|s| s.monitors.rows()).collect();
    for i in 0..tables[0].len() {
        print!("{:<22}", tables[0][i].0);
        for t in &tables {
            print!(" {:>13.6e}", t[i].1);
        }
        println!();
    }
    // Worst relative variation between consecutive step sizes.
    for w in tables.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let rel = a
            .iter()
            .zip(b.iter())
            .map(|((_, x), (_, y))| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
            .fold(0.0, f64::max);
        println!("max monitor variation: {:.2}%", 100.0 * rel);
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_verify(ledger: PathBuf) -> Result<i32> {
    let rows = read_ledger_csv(&ledger)?;
    let report = check_energy_inequality(&rows, 0.0, INEQ_RTOL);
    let max_yield = rows.iter().map(|l| l.yield_residual).fold(0.0, f64::max);
    let max_compl = rows.iter().map(|l| l.complementarity_residual).fold(0.0, f64::max);
    let max_vi = rows.iter().map(|l| l.damage_vi_residual).fold(0.0, f64::max);
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "energy inequality: {} (worst normalized residual {:.3e} at step {})",
        verdict(report.pass),
        report.worst_normalized,
        report.worst_k
    );
    println!(
        "yield admissibility: {} (max {max_yield:.3e})",
        verdict(max_yield <= YIELD_TOL)
    );
    println!(
        "flow-rule complementarity: {} (max {max_compl:.3e})",
        verdict(max_compl <= COMPL_TOL)
    );
    println!(
        "damage variational inequality: {} (max {max_vi:.3e})",
        verdict(max_vi <= VI_TOL)
    );
    let pass = report.pass
        && max_yield <= YIELD_TOL
        && max_compl <= COMPL_TOL
        && max_vi <= VI_TOL;
    println!("verdict: {}", verdict(pass));
    Ok(if pass { 0 } else { 1 })
}
