//! One function per subcommand. Each writes its artifacts and returns a
//! JSON summary plus an optional verification verdict.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wkam::barriers::{mane_potential, peierls_barrier, BarrierTable};
use wkam::dynamics::{calibrated_curve, verify_calibration};
use wkam::evolution::{evolve_hje_observed, exchange_limits_experiment};
use wkam::landscape::{build_landscape, fw_boundary, make_consistent, positive_type_landscape};
use wkam::potential::CriticalKind;
use wkam::stochastic::{chain_generator, chain_stationary, ldp_convergence, resolution_warning, steady_flux, wkb};
use wkam::viscosity::{check_entropy_shock, check_viscosity, subsolution_everywhere};
use wkam::{
    BoundaryData, CriticalPointSet, GridFunction, Landscape, PiecewiseCurve, Potential, Provenance, Scheme,
    SchemeConfig,
};

use crate::config::Parameters;
use crate::output::{Cell, Out};

pub struct Ctx {
    pub p: Potential,
    pub cps: CriticalPointSet,
    pub params: Parameters,
    pub base: PathBuf,
    pub out: Out,
}

pub struct Outcome {
    pub summary: Value,
    pub verified: Option<bool>,
}

impl Outcome {
    fn plain(summary: Value) -> Self {
        Outcome { summary, verified: None }
    }
}

fn mode_name(p: &Potential) -> &'static str {
    if p.is_smooth() {
        "smooth"
    } else {
        "extrema"
    }
}

fn require_smooth(ctx: &Ctx, stage: &str) -> Result<()> {
    if ctx.p.is_smooth() {
        Ok(())
    } else {
        bail!("`{stage}` needs U between critical points; abstract extrema configs support critical, barriers, landscape and chain")
    }
}

fn grid(samples: usize) -> impl Iterator<Item = f64> {
    (0..samples).map(move |j| j as f64 / samples as f64)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryFile {
    minima: Vec<Option<f64>>,
    #[serde(default)]
    maxima: Option<Vec<Option<f64>>>,
}

/// `fw`, `zero` or `file=<path>`.
pub fn boundary(ctx: &Ctx, spec: &str, repair: bool) -> Result<BoundaryData> {
    let k = ctx.cps.k();
    let bd = match spec {
        "fw" => return Ok(fw_boundary(&BarrierTable::new(&ctx.cps))),
        "zero" => BoundaryData::zero(k),
        s => {
            let rel = s
                .strip_prefix("file=")
                .ok_or_else(|| anyhow!("unknown boundary {s:?}; use fw, zero or file=<path>"))?;
            let path = ctx.base.join(rel);
            let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            let f: BoundaryFile = serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display()))?;
            let maxima = f.maxima.unwrap_or_else(|| vec![None; f.minima.len()]);
            if f.minima.len() != k || maxima.len() != k {
                bail!("boundary file lists {} minima and {} maxima; the potential has {k} wells", f.minima.len(), maxima.len());
            }
            BoundaryData {
                minima: f.minima,
                maxima,
                provenance: Provenance::User,
                argmins: Vec::new(),
            }
        }
    };
    Ok(if repair { make_consistent(&bd, &ctx.cps) } else { bd })
}

pub fn landscape_for(ctx: &Ctx, spec: &str, repair: bool) -> Result<Landscape> {
    let bd = boundary(ctx, spec, repair)?;
    build_landscape(&ctx.p, &ctx.cps, &bd).map_err(|e| anyhow!("{e} (pass --repair to project the data)"))
}

fn curve_rows(p: &Potential, curve: &PiecewiseCurve, samples: usize) -> Vec<Vec<Cell>> {
    grid(samples).map(|x| vec![x.into(), curve.value(p, x).into()]).collect()
}

pub fn critical(ctx: &mut Ctx) -> Result<Outcome> {
    let rows = ctx.cps.nodes().iter().map(|c| {
        let kind = match c.kind {
            CriticalKind::Max => "max",
            CriticalKind::Min => "min",
        };
        vec![kind.into(), c.index.into(), c.position.into(), c.value.into()]
    });
    ctx.out.csv("critical.csv", &["kind", "index", "position", "value"], rows)?;
    Ok(Outcome::plain(json!({ "k": ctx.cps.k(), "tilt": ctx.p.tilt() })))
}

pub fn barriers(ctx: &mut Ctx, samples: Option<usize>) -> Result<Outcome> {
    let table = BarrierTable::new(&ctx.cps);
    let k = table.k;
    let rows = (0..k).flat_map(|i| {
        let t = &table;
        (0..k).map(move |j| vec![i.into(), j.into(), t.hr_tilde[i][j].into(), t.hl_tilde[i][j].into(), t.h[i][j].into()])
    });
    ctx.out.csv("barriers.csv", &["i", "j", "hR_tilde", "hL_tilde", "h"], rows)?;
    let fw = fw_boundary(&table);
    ctx.out.json("boundary_fw.json", &fw)?;
    if ctx.p.is_smooth() {
        let samples = samples.or(ctx.params.samples).unwrap_or(1000);
        let curves = (0..k)
            .map(|i| peierls_barrier(&ctx.p, &ctx.cps, i))
            .collect::<Result<Vec<_>, _>>()?;
        let l = build_landscape(&ctx.p, &ctx.cps, &fw)?;
        // Lifted barriers W_i + h(.; x_i): the landscape is their lower envelope.
        let values = fw.minima_values().unwrap_or_default();
        let mut header = vec!["x".to_string(), "U".to_string(), "W".to_string()];
        header.extend((0..k).map(|i| format!("lifted_{i}")));
        let rows = grid(samples).map(|x| {
            let mut r: Vec<Cell> = vec![x.into(), ctx.p.value(x).into(), l.value(&ctx.p, x).into()];
            r.extend(curves.iter().zip(&values).map(|(c, w)| (w + c.curve.value(&ctx.p, x)).into()));
            r
        });
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        ctx.out.csv("peierls.csv", &h, rows.collect::<Vec<_>>())?;
        ctx.out.json("peierls.json", &curves)?;
    }
    Ok(Outcome::plain(json!({ "boundary": fw })))
}

#[derive(Serialize)]
struct LandscapeReport<'a> {
    mode: &'a str,
    k: usize,
    #[serde(flatten)]
    landscape: &'a Landscape,
}

pub fn landscape(ctx: &mut Ctx, spec: &str, repair: bool, samples: Option<usize>) -> Result<Outcome> {
    let l = landscape_for(ctx, spec, repair)?;
    ctx.out.json(
        "landscape.json",
        &LandscapeReport {
            mode: mode_name(&ctx.p),
            k: ctx.cps.k(),
            landscape: &l,
        },
    )?;
    if ctx.p.is_smooth() {
        let samples = samples.or(ctx.params.samples).unwrap_or(1000);
        let p = &ctx.p;
        let rows: Vec<Vec<Cell>> = grid(samples)
            .map(|x| vec![x.into(), p.value(x).into(), l.value(p, x).into(), l.wstar_value(p, x).into()])
            .collect();
        ctx.out.csv("landscape.csv", &["x", "U", "W", "Wstar"], rows)?;
    }
    Ok(Outcome::plain(json!({ "boundary": l.boundary, "kinks": l.kinks })))
}

pub enum CurveChoice {
    Landscape { boundary: String, repair: bool },
    Mane { anchor: f64 },
    Peierls { index: usize },
    Positive,
}

pub fn verify(ctx: &mut Ctx, choice: &CurveChoice, samples: Option<usize>) -> Result<Outcome> {
    require_smooth(ctx, "verify")?;
    let p = &ctx.p;
    let (name, curve) = match choice {
        CurveChoice::Landscape { boundary, repair } => ("landscape", landscape_for(ctx, boundary, *repair)?.w),
        CurveChoice::Mane { anchor } => ("mane", mane_potential(p, &ctx.cps, *anchor)?.curve),
        CurveChoice::Peierls { index } => ("peierls", peierls_barrier(p, &ctx.cps, *index)?.curve),
        CurveChoice::Positive => ("positive", positive_type_landscape(p)?.w),
    };
    let report = check_viscosity(&curve, p);
    let shocks = check_entropy_shock(&curve, p);
    let sub = subsolution_everywhere(&curve, p).map_err(|e| anyhow!("{e}"))?;
    let anchor = match choice {
        CurveChoice::Mane { anchor } => Some(*anchor),
        CurveChoice::Peierls { index } => Some(ctx.cps.minimum(*index).position),
        _ => None,
    };
    let body = json!({
        "curve": name,
        "anchor": anchor,
        "report": report,
        "shocks": shocks,
        "admissible_shocks": shocks.iter().all(|s| s.admissible),
        "subsolution_everywhere": sub,
        "segments": curve,
    });
    ctx.out.json("viscosity_report.json", &body)?;
    let samples = samples.or(ctx.params.samples).unwrap_or(1000);
    ctx.out.csv("verified_curve.csv", &["x", "value"], curve_rows(p, &curve, samples))?;
    Ok(Outcome {
        summary: json!({ "curve": name, "is_solution": report.is_solution,
            "subsolution": report.subsolution, "supersolution": report.supersolution }),
        verified: Some(report.is_solution),
    })
}

pub fn calibrate(ctx: &mut Ctx, at: Option<Vec<f64>>, spec: &str, repair: bool) -> Result<Outcome> {
    require_smooth(ctx, "calibrate")?;
    let at = at
        .or_else(|| ctx.params.at.clone())
        .unwrap_or_else(|| (0..10).map(|j| 0.05 + j as f64 / 10.0).collect());
    let l = landscape_for(ctx, spec, repair)?;
    let p = &ctx.p;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &x in &at {
        for t in calibrated_curve(x, &l, p, &ctx.cps)? {
            let id = records.len();
            rows.extend(
                t.times
                    .iter()
                    .zip(&t.positions)
                    .map(|(&s, &g)| vec![id.into(), s.into(), g.into()]),
            );
            let r = verify_calibration(&t, &l, p, &ctx.cps);
            records.push(json!({
                "traj_id": id,
                "x": x,
                "anchor_kink": t.anchor_kink,
                "step": t.step,
                "samples": t.positions.len(),
                "check": r,
            }));
        }
    }
    ctx.out.csv("trajectories.csv", &["traj_id", "t", "gamma"], rows)?;
    let ok = records.iter().all(|r| r["check"]["calibrated"] == json!(true));
    ctx.out.json("calibration.json", &json!({ "all_calibrated": ok, "trajectories": records }))?;
    Ok(Outcome {
        summary: json!({ "points": at.len(), "all_calibrated": ok }),
        verified: Some(ok),
    })
}

fn eps_tag(e: f64) -> String {
    format!("{e}")
}

fn chain_report(ctx: &Ctx, eps: f64) -> Result<Value> {
    let cm = chain_generator(&ctx.cps, eps)?;
    let st = chain_stationary(&cm)?;
    let (a, b) = cm.rates();
    let fw = fw_boundary(&BarrierTable::new(&ctx.cps)).minima_values().unwrap_or_default();
    let m = fw.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(json!({
        "eps": eps,
        "a": a,
        "b": b,
        "log_a": cm.log_a,
        "log_b": cm.log_b,
        "Q": cm.generator(),
        "nu": st.numeric,
        "nu_closed_form": st.closed,
        "agreement": st.agreement,
        "exponents": st.exponents,
        "boundary_fw_shifted": fw.iter().map(|w| w - m).collect::<Vec<_>>(),
    }))
}

pub fn chain(ctx: &mut Ctx, eps: Option<f64>) -> Result<Outcome> {
    let eps = eps
        .or_else(|| ctx.params.eps.as_ref().and_then(|v| v.last().copied()))
        .unwrap_or(0.1);
    let body = chain_report(ctx, eps)?;
    ctx.out.json("chain.json", &body)?;
    Ok(Outcome::plain(json!({ "eps": eps, "exponents": body["exponents"] })))
}

pub fn ldp(ctx: &mut Ctx, eps: Option<Vec<f64>>, n: Option<usize>) -> Result<Outcome> {
    require_smooth(ctx, "ldp")?;
    let eps = eps
        .or_else(|| ctx.params.eps.clone())
        .unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.02, 0.01]);
    if eps.is_empty() {
        bail!("--eps needs at least one value");
    }
    let n = n.or(ctx.params.grid).unwrap_or(2048);
    let l = landscape_for(ctx, "fw", false)?;
    let p = &ctx.p;
    for &e in &eps {
        if let Some(w) = resolution_warning(e, n) {
            eprintln!("warning: {w}");
        }
    }
    let table = ldp_convergence(p, &l, &eps, n)?;
    for &e in &eps {
        let w = wkb(p, e, n)?;
        let rows: Vec<Vec<Cell>> = (0..n)
            .map(|j| {
                let x = w.x(j);
                vec![x.into(), p.value(x).into(), l.wstar_value(p, x).into(), w.values[j].into()]
            })
            .collect();
        ctx.out.csv(&format!("wkb_eps_{}.csv", eps_tag(e)), &["x", "U", "Wstar", "W_eps"], rows)?;
    }
    ctx.out.csv(
        "ldp_table.csv",
        &["eps", "sup_error"],
        table.rows.iter().map(|r| vec![r.eps.into(), r.sup_error.into()]).collect::<Vec<_>>(),
    )?;
    let flux = eps
        .iter()
        .map(|&e| steady_flux(p, e, n).map(|f| json!({ "eps": e, "flux": f })))
        .collect::<Result<Vec<_>, _>>()?;
    ctx.out.json("ldp.json", &json!({ "table": table, "flux": flux }))?;
    if ctx.cps.k() >= 2 {
        let smallest = eps.iter().cloned().fold(f64::INFINITY, f64::min);
        let body = chain_report(ctx, smallest)?;
        ctx.out.json("chain.json", &body)?;
    }
    Ok(Outcome::plain(json!({ "grid": n, "rows": table.rows, "decreasing": table.decreasing })))
}

pub struct EvolveArgs {
    pub init: String,
    pub t_final: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub cfl: Option<f64>,
    pub scheme: Scheme,
    pub snapshots: usize,
}

fn read_grid(path: &Path) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .nth(1)
            .ok_or_else(|| anyhow!("{}:{}: expected `x,u`", path.display(), i + 1))?;
        values.push(
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("{}:{}: bad number", path.display(), i + 1))?,
        );
    }
    Ok(GridFunction { values, periodic: true })
}

pub fn evolve(ctx: &mut Ctx, a: &EvolveArgs) -> Result<Outcome> {
    require_smooth(ctx, "evolve")?;
    let t_final = a.t_final.or(ctx.params.t_final).unwrap_or(1.0);
    let cfl = a.cfl.or(ctx.params.cfl).unwrap_or(0.5);
    let l = landscape_for(ctx, "fw", false)?;
    let p = &ctx.p;
    let u0 = match a.init.as_str() {
        "wstar" => GridFunction::sample(a.grid.or(ctx.params.grid).unwrap_or(1000), |x| l.wstar_value(p, x)),
        s => {
            let rel = s
                .strip_prefix("file=")
                .ok_or_else(|| anyhow!("unknown --init {s:?}; use wstar or file=<path>"))?;
            read_grid(&ctx.base.join(rel))?
        }
    };
    let n = u0.len();
    let cfg = SchemeConfig {
        cfl,
        ..SchemeConfig::new(n, t_final, a.scheme)
    };
    let snaps = a.snapshots.max(1);
    let targets: Vec<f64> = (0..=snaps).map(|q| t_final * q as f64 / snaps as f64).collect();
    let mut taken: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut drift = Vec::new();
    let start = u0.values.clone();
    let run = evolve_hje_observed(&u0, p, &cfg, &mut |t, u| {
        let sup = u.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        drift.push((t, sup));
        if let Some(&target) = targets.get(taken.len()) {
            if t >= target - 1e-12 {
                taken.push((target, u.to_vec()));
            }
        }
    })?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    for (t, u) in &taken {
        let rows: Vec<Vec<Cell>> = u.iter().enumerate().map(|(j, v)| vec![u0.x(j).into(), (*v).into()]).collect();
        ctx.out.csv(&format!("evolve_t{t:.4}.csv"), &["x", "u"], rows)?;
    }
    // One drift row per step would be large; keep about a thousand.
    let every = (drift.len() / 1000).max(1);
    let rows: Vec<Vec<Cell>> = drift
        .iter()
        .enumerate()
        .filter(|(i, _)| i % every == 0 || *i + 1 == drift.len())
        .map(|(_, (t, s))| vec![(*t).into(), (*s).into()])
        .collect();
    ctx.out.csv("drift.csv", &["t", "sup_distance"], rows)?;
    let mut summary = json!({
        "grid": n, "T": t_final, "steps": run.steps, "dt": run.dt,
        "final_drift": drift.last().map(|d| d.1),
    });
    // Only an explicit --eps runs the exchange; the config list feeds `ldp`.
    if let Some(eps) = a.eps.clone() {
        if a.init != "wstar" {
            bail!("--eps runs the exchange experiment, which starts from W*; use --init wstar");
        }
        let report = exchange_limits_experiment(p, &l, &eps, t_final, n, a.scheme)?;
        ctx.out.json("exchange.json", &report)?;
        ctx.out.csv(
            "exchange.csv",
            &["eps", "path_a", "path_b", "mass_defect"],
            report
                .rows
                .iter()
                .map(|r| vec![r.eps.into(), r.path_a.into(), r.path_b.into(), r.mass_defect.into()])
                .collect::<Vec<_>>(),
        )?;
        summary["exchange"] = serde_json::to_value(&report)?;
    }
    ctx.out.json("evolve.json", &summary)?;
    Ok(Outcome::plain(summary))
}
