use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use tdc_cli::commands;
use tdc_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "tdc", version, about = "Third-harmonic down-conversion simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the pump threshold for the configured system.
    Threshold(Common),
    /// Positive-P ensemble moments over time.
    Simulate(Common),
    /// Final-time moments and steady-state branches across a scan.
    SteadyScan(Common),
    /// Linearized output spectra around the stable fixed point.
    Spectrum(Common),
    /// Positive-P against Monte Carlo wave-function trajectories.
    McwfCompare(Common),
    /// Nonlinear coupling estimate from material and geometry.
    Kappa(Common),
    /// Quadrature statistics used to flag the transition region.
    FluctuationCheck(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_traj: Option<u64>,
    /// Use 10^6 trajectories.
    #[arg(long)]
    paper_scale: bool,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if self.paper_scale {
            cfg.apply_full_scale();
        }
        if let Some(n) = self.n_traj {
            cfg.ensemble.n_traj = n;
        }
        if self.seed.is_some() {
            cfg.ensemble.seed = self.seed;
        }
        cfg.validate()?;
        let out = self.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        Ok((cfg, out))
    }
}

fn run(cli: Cli) -> Result<bool> {
    let report = |o: &tdc_cli::output::RunOutputs| {
        for p in &o.data {
            println!("wrote {}", p.display());
        }
        println!("wrote {}", o.manifest_path.display());
        if o.manifest.n_diverged > 0 {
            eprintln!("warning: {} trajectories diverged", o.manifest.n_diverged);
        }
        o.manifest.valid
    };
    Ok(match cli.command {
        Command::Threshold(c) => {
            let (cfg, _) = c.load()?;
            let r = commands::cmd_threshold(&cfg)?;
            println!("threshold |epsilon_b| = {:.6} s^-1", r.threshold);
            println!(
                "configured |epsilon_b| = {:.6} s^-1 ({} threshold)",
                r.epsilon_b_abs,
                if r.above { "above" } else { "below" }
            );
            true
        }
        Command::Simulate(c) => {
            let (cfg, out) = c.load()?;
            report(&commands::cmd_simulate(&cfg, &out)?.outputs)
        }
        Command::SteadyScan(c) => {
            let (cfg, out) = c.load()?;
            report(&commands::cmd_steady_scan(&cfg, &out)?.outputs)
        }
        Command::Spectrum(c) => {
            let (cfg, out) = c.load()?;
            let o = commands::cmd_spectrum(&cfg, &out)?;
            if o.points.iter().any(|p| !p.spectrum.valid) {
                eprintln!("warning: linearization flagged as unreliable for some points");
            }
            report(&o.outputs);
            true
        }
        Command::McwfCompare(c) => {
            let (cfg, out) = c.load()?;
            let o = commands::cmd_mcwf_compare(&cfg, &out)?;
            let r = &o.report;
            println!(
                "mean |z| = {:.3}, max |z| = {:.3}: {}",
                r.mean_abs_z,
                r.max_abs_z,
                if r.passed { "agree" } else { "disagree" }
            );
            report(&o.outputs) && r.passed
        }
        Command::Kappa(c) => {
            let (cfg, _) = c.load()?;
            let r = commands::cmd_kappa(&cfg)?;
            println!("sigma = {:.6e} m^-2", r.sigma);
            println!("kappa = {:.6e} s^-1", r.kappa);
            if !r.phase_matched {
                println!("mode orders are not phase matched");
            }
            if let Some(x) = r.ratio {
                println!("kappa / gamma_a = {x:.3e}");
            }
            true
        }
        Command::FluctuationCheck(c) => {
            let (cfg, out) = c.load()?;
            let o = commands::cmd_fluctuation_check(&cfg, &out)?;
            for p in &o.points {
                println!(
                    "{:>12} ratio_Xa {:.4} {}",
                    p.setting.value,
                    p.stats.a.ratio_x,
                    if p.flagged { "transition" } else { "ok" }
                );
            }
            report(&o.outputs)
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
