//! Run configuration: a potential plus optional scalar defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use wkam::{Potential, TrigSeries, TrigTerm};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSource,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub parameters: Parameters,
}

/// Inline spec or a path to a JSON file holding one, relative to the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PotentialSource {
    Inline(PotentialSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Smooth {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        cos: Vec<[f64; 2]>,
        #[serde(default)]
        sin: Vec<[f64; 2]>,
        #[serde(default)]
        tilt: f64,
    },
    Extrema {
        extrema: Vec<f64>,
        #[serde(default)]
        positions: Option<Positions>,
    },
    Spline {
        extrema: Vec<f64>,
        #[serde(default)]
        positions: Option<Positions>,
    },
    /// Random trigonometric potential for property experiments.
    Random {
        seed: u64,
        #[serde(default = "default_terms")]
        terms: usize,
        #[serde(default)]
        tilt: Option<f64>,
    },
}

fn default_terms() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Positions {
    List(Vec<f64>),
    /// `"variation"`: spacing proportional to the rise or fall between extrema.
    Named(String),
}

/// Defaults for subcommand flags; a flag on the command line wins.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub eps: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub cfl: Option<f64>,
    pub at: Option<Vec<f64>>,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

impl RunConfig {
    pub fn potential(&self, base: &Path) -> Result<Potential> {
        match &self.potential {
            PotentialSource::Inline(spec) => build(spec),
            PotentialSource::Path(rel) => {
                let path = base.join(rel);
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("cannot read potential {}", path.display()))?;
                let spec: PotentialSpec =
                    serde_json::from_str(&text).with_context(|| format!("invalid potential {}", path.display()))?;
                build(&spec)
            }
        }
    }
}

fn terms(v: &[[f64; 2]]) -> Vec<TrigTerm> {
    v.iter()
        .map(|&[frequency, coefficient]| TrigTerm { frequency, coefficient })
        .collect()
}

fn positions(values: &[f64], p: &Option<Positions>) -> Result<Option<Vec<f64>>> {
    Ok(match p {
        None => None,
        Some(Positions::List(v)) => Some(v.clone()),
        Some(Positions::Named(s)) if s == "variation" => Some(Potential::variation_positions(values)),
        Some(Positions::Named(s)) => bail!("unknown positions rule {s:?}; use a list or \"variation\""),
    })
}

pub fn build(spec: &PotentialSpec) -> Result<Potential> {
    let p = match spec {
        PotentialSpec::Smooth { constant, cos, sin, tilt } => Potential::trig(
            TrigSeries {
                constant: *constant,
                cos: terms(cos),
                sin: terms(sin),
            },
            *tilt,
        )?,
        PotentialSpec::Extrema { extrema, positions: pos } => {
            Potential::abstract_extrema(extrema.clone(), positions(extrema, pos)?)?
        }
        PotentialSpec::Spline { extrema, positions: pos } => Potential::spline(extrema.clone(), positions(extrema, pos)?)?,
        PotentialSpec::Random { seed, terms, tilt } => random(*seed, *terms, *tilt)?,
    };
    p.critical_points().context("potential has no usable critical points")?;
    Ok(p)
}

fn random(seed: u64, terms: usize, tilt: Option<f64>) -> Result<Potential> {
    if terms == 0 {
        bail!("random potential needs at least one term");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let mut cos = Vec::new();
        let mut sin = Vec::new();
        for m in 1..=terms {
            let scale = 1.0 / m as f64;
            cos.push(TrigTerm {
                frequency: m as f64,
                coefficient: rng.gen_range(-1.0..1.0) * scale,
            });
            sin.push(TrigTerm {
                frequency: m as f64,
                coefficient: rng.gen_range(-1.0..1.0) * scale,
            });
        }
        let series = TrigSeries { constant: 0.0, cos, sin };
        let b = tilt.unwrap_or_else(|| rng.gen_range(-1.5..1.5));
        if let Ok(p) = Potential::trig(series, b) {
            if p.critical_points().is_ok() {
                return Ok(p);
            }
        }
    }
    bail!("seed {seed} produced no nondegenerate potential in 1000 draws")
}
