use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mpcert::analysis::{
    alpha_profile_m, horizon_table, linspace, write_horizon_csv, write_profile_csv,
};
use mpcert::format::sig12;
use mpcert::{
    alpha_closed_form, alpha_lp, check_submultiplicative, constant_gamma, gamma_from_c_sequence,
    gamma_from_exponential, minimal_horizon, stability_region, CSequence, CertificateQuery,
    CertificateRecord, ExpBound, GammaSequence, HorizonPolicy, Method,
};

use crate::output::{config_comment, write_json, write_with, Target};
use crate::sim::lq_model;
use crate::{GammaArgs, GammaSource, ModelKind};

fn config(command: &str, args: &impl Serialize) -> Result<Value> {
    Ok(json!({ "command": command, "args": serde_json::to_value(args)? }))
}

#[derive(Args, Debug, Serialize)]
pub struct AlphaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub gamma: GammaArgs,
    /// Prediction horizon.
    #[arg(long = "N", required_unless_present = "batch")]
    #[serde(rename = "N")]
    pub horizon: Option<usize>,
    /// Control horizon, 1 <= m < N.
    #[arg(long, required_unless_present = "batch")]
    pub m: Option<usize>,
    /// Solve the exact linear program instead of the closed form.
    #[arg(long)]
    pub exact: bool,
    /// CSV of queries with header `N,m`; writes one CSV row per query.
    #[arg(long, conflicts_with_all = ["horizon", "m"])]
    pub batch: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn certificate(
    gamma: &GammaSequence,
    horizon: usize,
    m: usize,
    exact: bool,
) -> Result<CertificateRecord> {
    let q = CertificateQuery::new(gamma, horizon, m)?;
    let result = if exact {
        alpha_lp(&q)?
    } else {
        alpha_closed_form(&q)?
    };
    Ok(CertificateRecord::new(&q, &result))
}

fn read_batch(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("N,m") {
        bail!("{}: expected header `N,m`", path.display());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (n, m) = line
                .split_once(',')
                .with_context(|| format!("{}: row {} is not `N,m`", path.display(), i + 1))?;
            Ok((n.trim().parse()?, m.trim().parse()?))
        })
        .collect()
}

pub fn alpha(args: &AlphaArgs, out_dir: Option<&Path>) -> Result<()> {
    let cfg = config("alpha", args)?;
    let source = args.gamma.source()?;
    if let Some(batch) = &args.batch {
        let queries = read_batch(batch)?;
        let longest = queries.iter().map(|q| q.0).max().unwrap_or(2);
        let gamma = source.sequence(longest)?;
        let records = queries
            .iter()
            .map(|&(n, m)| certificate(&gamma, n, m, args.exact))
            .collect::<Result<Vec<_>>>()?;
        let target = Target::resolve(args.output.as_deref(), out_dir, "alpha.csv");
        return write_with(&target, |out| {
            for c in config_comment(&cfg) {
                writeln!(out, "#{c}")?;
            }
            writeln!(
                out,
                "N,m,alpha,method,stable,performance_bound,submultiplicative"
            )?;
            for r in &records {
                let method = match r.method {
                    Method::ClosedForm => "closed_form",
                    Method::LinearProgram => "linear_program",
                };
                writeln!(
                    out,
                    "{},{},{},{method},{},{},{}",
                    r.horizon,
                    r.m,
                    sig12(r.alpha),
                    r.stable,
                    r.performance_bound.map(sig12).unwrap_or_default(),
                    r.submultiplicative
                )?;
            }
            Ok(())
        });
    }
    let (horizon, m) = (args.horizon.expect("required"), args.m.expect("required"));
    let gamma = source.sequence(horizon)?;
    let record = certificate(&gamma, horizon, m, args.exact)?;
    write_json(
        &Target::resolve(args.output.as_deref(), out_dir, "alpha.json"),
        &cfg,
        &record,
    )
}

#[derive(Args, Debug, Serialize)]
pub struct RegionArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub horizon: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 200)]
    pub c_count: usize,
    #[arg(long, default_value_t = 0.005)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = 0.995)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = 200)]
    pub sigma_count: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn region(args: &RegionArgs, out_dir: Option<&Path>) -> Result<()> {
    let cfg = config("region", args)?;
    let cs = linspace(args.c_min, args.c_max, args.c_count).context("C axis")?;
    let ss = linspace(args.sigma_min, args.sigma_max, args.sigma_count).context("sigma axis")?;
    let grid = stability_region(args.horizon, &cs, &ss, args.m)?;
    let target = Target::resolve(args.output.as_deref(), out_dir, "region.csv");
    write_with(&target, |out| grid.write_csv(out, &config_comment(&cfg)))
}

#[derive(Args, Debug, Serialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub gamma: GammaArgs,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub horizon: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn profile(args: &ProfileArgs, out_dir: Option<&Path>) -> Result<()> {
    let cfg = config("profile", args)?;
    let gamma = args.gamma.source()?.sequence(args.horizon)?;
    let rows = alpha_profile_m(&gamma, args.horizon)?;
    let target = Target::resolve(args.output.as_deref(), out_dir, "profile.csv");
    write_with(&target, |out| {
        write_profile_csv(&rows, out, &config_comment(&cfg))
    })
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    /// Both m = 1 and m = floor(N/2), with the analytic bounds.
    Table,
    M1,
    Half,
    Best,
    /// Fixed `--m`.
    Fixed,
}

#[derive(Args, Debug, Serialize)]
pub struct HorizonArgs {
    /// Constant gamma levels, comma separated.
    #[arg(long = "M", value_delimiter = ',')]
    #[serde(rename = "M")]
    pub levels: Vec<f64>,
    /// Evenly spaced levels `MIN:MAX:COUNT`, appended to `--M`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Exponential gamma instead of constant levels.
    #[arg(long = "C", requires = "sigma", conflicts_with_all = ["levels", "grid"])]
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[arg(long, requires = "c")]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Table)]
    pub policy: PolicyArg,
    /// Control horizon for `--policy fixed`.
    #[arg(long, required_if_eq("policy", "fixed"))]
    pub m: Option<usize>,
    /// Largest horizon scanned.
    #[arg(long, default_value_t = 5000)]
    pub n_max: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [min, max, count] = parts.as_slice() else {
        bail!("--grid expects MIN:MAX:COUNT, got `{spec}`");
    };
    Ok(linspace(min.parse()?, max.parse()?, count.parse()?)?)
}

pub fn horizon(args: &HorizonArgs, out_dir: Option<&Path>) -> Result<()> {
    let cfg = config("horizon", args)?;
    let target = Target::resolve(args.output.as_deref(), out_dir, "horizon.csv");
    let policy = match args.policy {
        PolicyArg::Table => None,
        PolicyArg::M1 => Some(HorizonPolicy::Fixed(1)),
        PolicyArg::Half => Some(HorizonPolicy::Half),
        PolicyArg::Best => Some(HorizonPolicy::BestM),
        PolicyArg::Fixed => Some(HorizonPolicy::Fixed(args.m.expect("required by clap"))),
    };

    if let (Some(c), Some(s)) = (args.c, args.sigma) {
        let Some(policy) = policy else {
            bail!("--policy table needs constant levels (--M or --grid)");
        };
        let bound = ExpBound::new(c, s)?;
        let r = minimal_horizon(|n| gamma_from_exponential(bound, n), policy, args.n_max)?;
        return write_with(&target, |out| {
            for line in config_comment(&cfg) {
                writeln!(out, "#{line}")?;
            }
            writeln!(out, "C,sigma,N_hat,m,alpha")?;
            writeln!(
                out,
                "{},{},{},{},{}",
                sig12(c),
                sig12(s),
                r.n_hat,
                r.m_used,
                sig12(r.alpha_at_n_hat)
            )?;
            Ok(())
        });
    }

    let mut levels = args.levels.clone();
    if let Some(g) = &args.grid {
        levels.extend(parse_grid(g)?);
    }
    if levels.is_empty() {
        bail!("no levels: give --M, --grid, or --C/--sigma");
    }
    match policy {
        None => {
            let rows = horizon_table(&levels, args.n_max)?;
            write_with(&target, |out| {
                write_horizon_csv(&rows, out, &config_comment(&cfg))
            })
        }
        Some(policy) => {
            let rows = levels
                .iter()
                .map(|&level| {
                    Ok((
                        level,
                        minimal_horizon(|n| constant_gamma(level, n), policy, args.n_max)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            write_with(&target, |out| {
                for line in config_comment(&cfg) {
                    writeln!(out, "#{line}")?;
                }
                writeln!(out, "M,N_hat,m,alpha")?;
                for (level, r) in &rows {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        sig12(*level),
                        r.n_hat,
                        r.m_used,
                        sig12(r.alpha_at_n_hat)
                    )?;
                }
                Ok(())
            })
        }
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GammaCommand {
    /// gamma_i = C * sum_{n<i} sigma^n.
    Exp {
        #[arg(long = "C")]
        #[serde(rename = "C")]
        c: f64,
        #[arg(long)]
        sigma: f64,
        /// Number of entries N.
        #[arg(long)]
        len: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// gamma_i = M.
    Const {
        #[arg(long = "M")]
        #[serde(rename = "M")]
        level: f64,
        #[arg(long)]
        len: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Prefix sums of a bound sequence c_0, c_1, ...
    Cseq {
        #[arg(long, value_delimiter = ',', required = true)]
        c: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Tight gamma of a linear-quadratic model from its Riccati matrices.
    Lq {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        len: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validate a gamma CSV and test submultiplicativity.
    Check {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Read a gamma CSV and write it back in canonical form.
    Reformat {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn read_gamma(path: &Path) -> Result<GammaSequence> {
    GammaArgs {
        gamma: Some(path.to_path_buf()),
        ..GammaArgs::default()
    }
    .source()
    .map(|s| match s {
        GammaSource::Table(g) => g,
        _ => unreachable!("file source"),
    })
}

#[derive(Serialize)]
struct GammaCheck {
    length: usize,
    first: f64,
    last: f64,
    submultiplicative: bool,
}

pub fn gamma(cmd: &GammaCommand, out_dir: Option<&Path>) -> Result<()> {
    let cfg = config("gamma", cmd)?;
    let (sequence, output) = match cmd {
        GammaCommand::Exp {
            c,
            sigma,
            len,
            output,
        } => (
            gamma_from_exponential(ExpBound::new(*c, *sigma)?, *len)?,
            output,
        ),
        GammaCommand::Const { level, len, output } => (constant_gamma(*level, *len)?, output),
        GammaCommand::Cseq { c, output } => {
            (gamma_from_c_sequence(&CSequence::new(c.clone())?)?, output)
        }
        GammaCommand::Lq { model, len, output } => {
            let Some(lq) = lq_model(*model)? else {
                bail!("{model:?} has no Riccati gamma");
            };
            (lq.riccati_gamma(*len)?, output)
        }
        GammaCommand::Reformat { file, output } => (read_gamma(file)?, output),
        GammaCommand::Check { file, output } => {
            let g = read_gamma(file)?;
            let report = GammaCheck {
                length: g.len(),
                first: g.get(1),
                last: g.get(g.len()),
                submultiplicative: check_submultiplicative(&g),
            };
            return write_json(
                &Target::resolve(output.as_deref(), out_dir, "gamma-check.json"),
                &cfg,
                &report,
            );
        }
    };
    let target = Target::resolve(output.as_deref(), out_dir, "gamma.csv");
    write_with(&target, |out| {
        sequence.write_csv(out, &config_comment(&cfg))
    })
}
