//! Command-line driver for the `wkam` library.
//!
//! Exit codes: 0 on success, 2 when a verification report fails, 1 when the
//! input cannot be processed.

mod config;
mod output;
mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use wkam::Scheme;

use output::Out;
use stages::{CurveChoice, Ctx, EvolveArgs, Outcome};

#[derive(Parser, Debug)]
#[command(name = "wkam", version, about = "Energy landscapes of tilted periodic potentials")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CurveKind {
    Landscape,
    Mane,
    Peierls,
    Positive,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SchemeArg {
    Godunov,
    LaxFriedrichs,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Godunov => Scheme::Godunov,
            SchemeArg::LaxFriedrichs => Scheme::LaxFriedrichs,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Critical points of one period.
    Critical,
    /// Barrier table, Freidlin-Wentzell boundary data and Peierls barriers.
    Barriers {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Global energy landscape for given boundary data.
    Landscape {
        /// fw, zero or file=<path>
        #[arg(long, default_value = "fw")]
        boundary: String,
        /// Project inconsistent boundary data onto consistent data.
        #[arg(long)]
        repair: bool,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Viscosity-solution check of a landscape or barrier curve.
    Verify {
        #[arg(long, value_enum, default_value = "landscape")]
        curve: CurveKind,
        /// Anchor point for `--curve mane`.
        #[arg(long)]
        anchor: Option<f64>,
        /// Minimum index for `--curve peierls`.
        #[arg(long)]
        index: Option<usize>,
        #[arg(long, default_value = "fw")]
        boundary: String,
        #[arg(long)]
        repair: bool,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Backward calibrated curves through the given points.
    Calibrate {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Option<Vec<f64>>,
        #[arg(long, default_value = "fw")]
        boundary: String,
        #[arg(long)]
        repair: bool,
    },
    /// Small-noise convergence of the quasipotential.
    Ldp {
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Markov chain on the wells.
    Chain {
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Hamilton-Jacobi evolution and the exchange-of-limits experiment.
    Evolve {
        /// wstar or file=<path> (CSV `x,u`)
        #[arg(long, default_value = "wstar")]
        init: String,
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long, value_enum, default_value = "godunov")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 4)]
        snapshots: usize,
    },
    /// Run a list of stages and write `report.json`.
    All {
        /// Comma separated; defaults to every stage the potential supports.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
}

const SMOOTH_STAGES: [&str; 8] = ["critical", "barriers", "landscape", "verify", "calibrate", "ldp", "chain", "evolve"];
const TABLE_STAGES: [&str; 4] = ["critical", "barriers", "landscape", "chain"];

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let path = cli.config.context("--config <path> is required")?;
    let cfg = config::load(&path)?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let p = cfg.potential(&base)?;
    let cps = p.critical_points()?;
    let dir = cli.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("wkam-out"));
    let mut ctx = Ctx {
        p,
        cps,
        params: cfg.parameters.clone(),
        base,
        out: Out::new(dir),
    };
    let outcome = match cli.cmd {
        Cmd::Critical => stages::critical(&mut ctx)?,
        Cmd::Barriers { samples } => stages::barriers(&mut ctx, samples)?,
        Cmd::Landscape { boundary, repair, samples } => stages::landscape(&mut ctx, &boundary, repair, samples)?,
        Cmd::Verify { curve, anchor, index, boundary, repair, samples } => {
            let choice = match curve {
                CurveKind::Landscape => CurveChoice::Landscape { boundary, repair },
                CurveKind::Mane => CurveChoice::Mane {
                    anchor: anchor.context("--curve mane needs --anchor")?,
                },
                CurveKind::Peierls => {
                    let index = index.unwrap_or(0);
                    if index >= ctx.cps.k() {
                        bail!("--index {index} out of range for {} wells", ctx.cps.k());
                    }
                    CurveChoice::Peierls { index }
                }
                CurveKind::Positive => CurveChoice::Positive,
            };
            stages::verify(&mut ctx, &choice, samples)?
        }
        Cmd::Calibrate { at, boundary, repair } => stages::calibrate(&mut ctx, at, &boundary, repair)?,
        Cmd::Ldp { eps, grid } => stages::ldp(&mut ctx, eps, grid)?,
        Cmd::Chain { eps } => stages::chain(&mut ctx, eps)?,
        Cmd::Evolve { init, t_final, eps, grid, cfl, scheme, snapshots } => stages::evolve(
            &mut ctx,
            &EvolveArgs {
                init,
                t_final,
                eps,
                grid,
                cfl,
                scheme: scheme.into(),
                snapshots,
            },
        )?,
        Cmd::All { stages } => return all(&mut ctx, stages),
    };
    report_written(&ctx);
    Ok(outcome.verified.unwrap_or(true))
}

fn all(ctx: &mut Ctx, requested: Option<Vec<String>>) -> Result<bool> {
    let supported: &[&str] = if ctx.p.is_smooth() { &SMOOTH_STAGES } else { &TABLE_STAGES };
    let list: Vec<String> = match requested {
        Some(v) => v.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => supported.iter().map(|s| s.to_string()).collect(),
    };
    for s in &list {
        if !SMOOTH_STAGES.contains(&s.as_str()) {
            bail!("unknown stage {s:?}");
        }
    }
    if list.is_empty() {
        return Ok(true);
    }
    let mut report = Map::new();
    report.insert("mode".into(), json!(if ctx.p.is_smooth() { "smooth" } else { "extrema" }));
    report.insert("stages".into(), json!(list));
    let mut verdicts = Map::new();
    for s in &list {
        let Outcome { summary, verified } = match s.as_str() {
            "critical" => stages::critical(ctx)?,
            "barriers" => stages::barriers(ctx, None)?,
            "landscape" => stages::landscape(ctx, "fw", false, None)?,
            "verify" => stages::verify(
                ctx,
                &CurveChoice::Landscape {
                    boundary: "fw".into(),
                    repair: false,
                },
                None,
            )?,
            "calibrate" => stages::calibrate(ctx, None, "fw", false)?,
            "ldp" => stages::ldp(ctx, None, None)?,
            "chain" if ctx.cps.k() < 2 => Outcome {
                summary: json!({ "skipped": "a single well has no chain" }),
                verified: None,
            },
            "chain" => stages::chain(ctx, None)?,
            "evolve" => stages::evolve(
                ctx,
                &EvolveArgs {
                    init: "wstar".into(),
                    t_final: None,
                    eps: None,
                    grid: None,
                    cfl: None,
                    scheme: Scheme::Godunov,
                    snapshots: 4,
                },
            )?,
            _ => unreachable!(),
        };
        if let Some(v) = verified {
            verdicts.insert(s.clone(), json!(v));
        }
        match s.as_str() {
            "landscape" => {
                report.insert("boundary".into(), summary["boundary"].clone());
                report.insert("kinks".into(), summary["kinks"].clone());
            }
            "ldp" => {
                report.insert("ldp".into(), summary["rows"].clone());
            }
            _ => {
                report.insert(s.clone(), summary);
            }
        }
    }
    let ok = verdicts.values().all(|v| v == &Value::Bool(true));
    report.insert("verification".into(), Value::Object(verdicts));
    report.insert("passed".into(), json!(ok));
    ctx.out.json("report.json", &Value::Object(report))?;
    report_written(ctx);
    Ok(ok)
}

fn report_written(ctx: &Ctx) {
    for p in ctx.out.written() {
        println!("wrote {}", p.display());
    }
}
