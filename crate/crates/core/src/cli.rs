//! Command dispatch behind the `reynolds-limit` binary.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or config error.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::diagnostics::energy_report;
use crate::error::{Error, Result};
use crate::harness::{emit_report, reynolds_reference, run_sweep, initial_guess};
use crate::io::write_atomic;
use crate::laws::validate_assumptions;
use crate::ns::{history_csv, march_to_steady, Steady};
use crate::reynolds::{solve_stationary, ReynoldsOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Reynolds,
    Ns,
    Diagnostics,
    Sweep,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Thread cap from `REYNOLDS_LIMIT_THREADS`, if set to a positive integer.
pub fn env_threads() -> Option<usize> {
    std::env::var("REYNOLDS_LIMIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

pub fn run(cmd: Command, config_path: &Path, out: Option<PathBuf>) -> i32 {
    let mut cfg = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", config_path.display());
            return EXIT_USAGE;
        }
    };
    if let Some(o) = out {
        cfg.out = o;
    }
    let result = match cmd {
        Command::Validate => return validate(&cfg),
        Command::Reynolds => reynolds(&cfg),
        Command::Ns => ns(&cfg, false),
        Command::Diagnostics => ns(&cfg, true),
        Command::Sweep => sweep(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn validate(cfg: &RunConfig) -> i32 {
    let report = validate_assumptions(&cfg.laws, cfg.dimension, cfg.q_2d);
    print!("{}", report.to_csv());
    if report.admissible {
        println!("admissible");
        EXIT_OK
    } else {
        println!("not admissible");
        EXIT_FAILURE
    }
}

fn require_admissible(cfg: &RunConfig) -> Result<()> {
    let report = validate_assumptions(&cfg.laws, cfg.dimension, cfg.q_2d);
    if report.admissible {
        return Ok(());
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.satisfied).map(|c| c.name).collect();
    Err(Error::InvalidInput(format!("laws not admissible: {}", failed.join(", "))))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

fn reynolds(cfg: &RunConfig) -> Result<i32> {
    require_admissible(cfg)?;
    let opts = ReynoldsOptions {
        nx: cfg.nx,
        tol: cfg.reynolds_tol,
        max_iter: cfg.reynolds_max_iter,
        ..ReynoldsOptions::default()
    };
    let prof = solve_stationary(&cfg.geom, &cfg.laws, &opts)?;
    let dir = out_dir(cfg)?;
    write_atomic(&dir.join("reynolds.csv"), &prof.to_csv())?;
    println!(
        "flux {:.12e}  mass {:.12e}  rho in [{:.6}, {:.6}]",
        prof.flux,
        prof.mass(),
        prof.rho.iter().cloned().fold(f64::INFINITY, f64::min),
        prof.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    );
    Ok(EXIT_OK)
}

fn ns(cfg: &RunConfig, diagnostics: bool) -> Result<i32> {
    require_admissible(cfg)?;
    let reference = reynolds_reference(&cfg.geom, &cfg.laws, cfg.nx)?;
    let init = initial_guess(&cfg.geom, &reference, cfg.nx, cfg.ns)?;
    let dir = out_dir(cfg)?.to_path_buf();
    let steady: Steady = match march_to_steady(&cfg.geom, &cfg.laws, &cfg.solve, Some(init), (cfg.nx, cfg.ns)) {
        Ok(s) => s,
        Err(e) => {
            if let Some(h) = e.history() {
                write_atomic(&dir.join("history.csv"), &history_csv(h))?;
            }
            return Err(e);
        }
    };
    write_atomic(&dir.join("history.csv"), &history_csv(&steady.history))?;
    write_atomic(&dir.join("fields.csv"), &steady.state.export_fields(&cfg.laws))?;
    println!(
        "steady after {} steps, residual mass {:.3e} x {:.3e} z {:.3e}",
        steady.history.len(),
        steady.residual.mass,
        steady.residual.momx,
        steady.residual.momz
    );
    if diagnostics {
        let rep = energy_report(&steady.state, &cfg.laws)?;
        write_atomic(&dir.join("diagnostics.csv"), &rep.to_csv())?;
        print!("{}", rep.to_csv());
    }
    Ok(EXIT_OK)
}

fn sweep(cfg: &RunConfig) -> Result<i32> {
    require_admissible(cfg)?;
    let mut sweep = cfg.sweep.clone();
    if let Some(t) = env_threads() {
        sweep.threads = Some(sweep.threads.map_or(t, |s| s.min(t)));
    }
    let report = run_sweep(&cfg.geom, &cfg.laws, &sweep)?;
    let dir = out_dir(cfg)?;
    emit_report(&report, dir, &cfg.echo())?;
    print!("{}", report.convergence_csv());
    print!("{}", report.slopes_csv());
    if report.complete() {
        Ok(EXIT_OK)
    } else {
        for (e, msg) in &report.failures {
            eprintln!("eps {e}: {msg}");
        }
        Ok(EXIT_FAILURE)
    }
}
