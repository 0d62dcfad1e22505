//! `mpcert`: certificates, sweeps and closed-loop audits from the shell.
//!
//! Every command writes one CSV or JSON document. A `--output` path wins;
//! otherwise output goes to `$MPCERT_OUT_DIR/<command>.<ext>` when that is
//! set, else stdout. The exit code reports whether the computation ran, not
//! whether the result is stable.

mod analysis;
mod output;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mpcert::{constant_gamma, gamma_from_exponential, ExpBound, GammaSequence};

pub const OUT_DIR_ENV: &str = "MPCERT_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "mpcert",
    version,
    about = "Stability certificates for multistep MPC"
)]
struct Cli {
    /// Default directory for outputs.
    #[arg(long, env = OUT_DIR_ENV, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Suboptimality index alpha_{N,m} as a JSON record (or CSV in batch mode).
    Alpha(analysis::AlphaArgs),
    /// Stability region over a (C, sigma) grid.
    Region(analysis::RegionArgs),
    /// alpha_{N,m} for m = 1..N-1.
    Profile(analysis::ProfileArgs),
    /// Minimal stabilizing horizons.
    Horizon(analysis::HorizonArgs),
    /// Closed-loop MPC run with trace and measured alpha.
    Simulate(sim::SimulateArgs),
    /// Dropout-scheduled closed loops audited against the certified alpha.
    Network(sim::NetworkArgs),
    /// Build, check and re-export gamma sequences.
    #[command(subcommand)]
    Gamma(analysis::GammaCommand),
}

/// One of: `--C` with `--sigma`, `--M`, or `--gamma FILE`.
#[derive(Args, Debug, Clone, Serialize, Default)]
pub struct GammaArgs {
    /// Overshoot C of the exponential bound C * sigma^n.
    #[arg(long = "C", requires = "sigma")]
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Decay rate sigma in (0, 1).
    #[arg(long, requires = "c")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Constant sequence gamma_i = M.
    #[arg(long = "M", conflicts_with_all = ["c", "gamma"])]
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// CSV file with header `i,gamma`.
    #[arg(long, conflicts_with = "c")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<PathBuf>,
}

pub enum GammaSource {
    Exponential(ExpBound),
    Constant(f64),
    Table(GammaSequence),
}

impl GammaArgs {
    pub fn is_given(&self) -> bool {
        self.c.is_some() || self.level.is_some() || self.gamma.is_some()
    }

    pub fn source(&self) -> Result<GammaSource> {
        match (self.c, self.sigma, self.level, &self.gamma) {
            (Some(c), Some(s), None, None) => Ok(GammaSource::Exponential(ExpBound::new(c, s)?)),
            (None, None, Some(m), None) => Ok(GammaSource::Constant(m)),
            (None, None, None, Some(path)) => {
                let f = std::fs::File::open(path)
                    .with_context(|| format!("opening {}", path.display()))?;
                let g = GammaSequence::read_csv(f)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok(GammaSource::Table(g))
            }
            _ => bail!("give exactly one of --C/--sigma, --M or --gamma"),
        }
    }
}

impl GammaSource {
    /// A sequence of at least `len` entries.
    pub fn sequence(&self, len: usize) -> Result<GammaSequence> {
        let len = len.max(2);
        Ok(match self {
            GammaSource::Exponential(b) => gamma_from_exponential(*b, len)?,
            GammaSource::Constant(m) => constant_gamma(*m, len)?,
            GammaSource::Table(g) => {
                if g.len() < len {
                    bail!(
                        "gamma file has {} entries, N = {len} needs at least {len}",
                        g.len()
                    );
                }
                g.clone()
            }
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LqScalar,
    LqDoubleIntegrator,
    Pendulum,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir.as_deref();
    let result = match &cli.command {
        Command::Alpha(a) => analysis::alpha(a, out_dir),
        Command::Region(a) => analysis::region(a, out_dir),
        Command::Profile(a) => analysis::profile(a, out_dir),
        Command::Horizon(a) => analysis::horizon(a, out_dir),
        Command::Simulate(a) => sim::simulate(a, out_dir),
        Command::Network(a) => sim::network(a, out_dir),
        Command::Gamma(g) => analysis::gamma(g, out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
