//! Time stepping for `psi_t + H(psi_x, x) = 0` and for the forward equation
//! `rho_t = (rho U')' + eps rho''`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::Landscape;
use crate::potential::{hamiltonian, Potential};
use crate::stochastic::{log_cell, log_sum_exp, GridFunction};

pub const MIN_GRID: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("CFL number must lie in (0, 0.5], got {0}")]
    BadCfl(f64),
    #[error("grid needs at least {MIN_GRID} points, got {0}")]
    GridTooSmall(usize),
    #[error("final time must be nonnegative and finite, got {0}")]
    BadTime(f64),
    #[error("noise strength must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("evolution needs a potential with derivatives")]
    NotSmooth,
    #[error("initial data has {got} points but the configuration asks for {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("initial density must be nonnegative with unit mass")]
    BadDensity,
    #[error("positivity could not be kept after repeated step halving")]
    StepExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `H((p- + p+)/2) - alpha (p+ - p-)/2` with one global `alpha`.
    LaxFriedrichs,
    /// Exact Riemann flux for the convex `H`.
    Godunov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub n: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub eps: Option<f64>,
}

impl SchemeConfig {
    pub fn new(n: usize, t_final: f64, scheme: Scheme) -> Self {
        SchemeConfig {
            n,
            cfl: 0.5,
            t_final,
            scheme,
            eps: None,
        }
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(EvolutionError::BadCfl(self.cfl));
        }
        if self.n < MIN_GRID {
            return Err(EvolutionError::GridTooSmall(self.n));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(EvolutionError::BadTime(self.t_final));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjeRun {
    pub u: GridFunction,
    pub steps: usize,
    pub dt: f64,
    /// Wave speed bound in use at the end of the run.
    pub alpha: f64,
    pub warnings: Vec<String>,
}

fn numerical_hamiltonian(scheme: Scheme, pm: f64, pp: f64, slope: f64, alpha: f64) -> f64 {
    match scheme {
        Scheme::LaxFriedrichs => hamiltonian(0.5 * (pm + pp), slope) - 0.5 * alpha * (pp - pm),
        Scheme::Godunov => {
            let q = 0.5 * slope;
            hamiltonian(pm.max(q), slope).max(hamiltonian(pp.min(q), slope))
        }
    }
}

fn wave_speed(u: &[f64], slopes: &[f64], h: f64) -> f64 {
    let n = u.len();
    (0..n)
        .map(|j| {
            let pp = (u[(j + 1) % n] - u[j]) / h;
            let pm = (u[j] - u[(j + n - 1) % n]) / h;
            (2.0 * pp - slopes[j]).abs().max((2.0 * pm - slopes[j]).abs())
        })
        .fold(0.0, f64::max)
}

/// Evolve to `cfg.t_final`, calling `observe(t, u)` after every step and at `t = 0`.
pub fn evolve_hje_observed(
    u0: &GridFunction,
    p: &Potential,
    cfg: &SchemeConfig,
    observe: &mut dyn FnMut(f64, &[f64]),
) -> Result<HjeRun, EvolutionError> {
    cfg.validate()?;
    if !p.is_smooth() {
        return Err(EvolutionError::NotSmooth);
    }
    if u0.len() != cfg.n {
        return Err(EvolutionError::SizeMismatch {
            got: u0.len(),
            want: cfg.n,
        });
    }
    let n = cfg.n;
    let h = 1.0 / n as f64;
    let slopes: Vec<f64> = (0..n).map(|j| p.slope(j as f64 * h)).collect();
    let mut u = u0.values.clone();
    let mut warnings = Vec::new();
    let mut alpha = 1.1 * wave_speed(&u, &slopes, h).max(slopes.iter().fold(0.0f64, |a, s| a.max(s.abs())));
    if alpha == 0.0 {
        alpha = 1.0;
    }
    let mut t = 0.0;
    let mut steps = 0;
    let mut dt = cfg.cfl * h / alpha;
    observe(0.0, &u);
    let mut next = vec![0.0; n];
    while t < cfg.t_final {
        dt = (cfg.cfl * h / alpha).min(cfg.t_final - t);
        let mut speed: f64 = 0.0;
        for j in 0..n {
            let um = if j == 0 { u[n - 1] } else { u[j - 1] };
            let up = if j + 1 == n { u[0] } else { u[j + 1] };
            let pm = (u[j] - um) / h;
            let pp = (up - u[j]) / h;
            speed = speed.max((2.0 * pm - slopes[j]).abs()).max((2.0 * pp - slopes[j]).abs());
            next[j] = u[j] - dt * numerical_hamiltonian(cfg.scheme, pm, pp, slopes[j], alpha);
        }
        if speed > alpha {
            // Redo the step with a bound that covers the current slopes.
            alpha = 1.1 * speed;
            warnings.push(format!("wave speed {speed:.6e} exceeded bound; step shrunk at t = {t:.6e}"));
            continue;
        }
        std::mem::swap(&mut u, &mut next);
        t += dt;
        steps += 1;
        observe(t, &u);
    }
    Ok(HjeRun {
        u: GridFunction {
            values: u,
            periodic: true,
        },
        steps,
        dt,
        alpha,
        warnings,
    })
}

pub fn evolve_hje(u0: &GridFunction, p: &Potential, cfg: &SchemeConfig) -> Result<HjeRun, EvolutionError> {
    evolve_hje_observed(u0, p, cfg, &mut |_, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub t: f64,
    pub sup: f64,
}

/// `sup |u(t) - reference|` recorded roughly `samples` times over the run.
pub fn drift_series(
    u0: &GridFunction,
    reference: &GridFunction,
    p: &Potential,
    cfg: &SchemeConfig,
    samples: usize,
) -> Result<(HjeRun, Vec<DriftSample>), EvolutionError> {
    let every = cfg.t_final / samples.max(1) as f64;
    let mut next_t = 0.0;
    let mut out = Vec::new();
    let run = evolve_hje_observed(u0, p, cfg, &mut |t, u| {
        if t >= next_t || t >= cfg.t_final {
            let sup = u
                .iter()
                .zip(&reference.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            out.push(DriftSample { t, sup });
            next_t += every;
        }
    })?;
    if out.last().map_or(true, |s| s.t < cfg.t_final) {
        out.push(DriftSample {
            t: cfg.t_final,
            sup: run.u.sup_distance(reference),
        });
    }
    Ok((run, out))
}

/// Exponentially fitted finite volumes on the nodes `x_j = j / N`.
///
/// With `g = rho e^{U/eps}` the flux `-(eps rho' + U' rho)` is `-eps e^{-U/eps} g'`,
/// and across a cell it is approximated by `-eps (g_{j+1} - g_j) / K_j` with
/// `K_j = int_{x_j}^{x_{j+1}} e^{U/eps}`.
#[derive(Debug, Clone)]
pub struct FokkerPlanck {
    n: usize,
    /// `dt`-free coefficients of `rho_{j+1}` and `rho_j` in the flux across cell `j`.
    right: Vec<f64>,
    left: Vec<f64>,
}

impl FokkerPlanck {
    pub fn new(p: &Potential, eps: f64, n: usize) -> Result<Self, EvolutionError> {
        if !(eps > 0.0) {
            return Err(EvolutionError::BadEpsilon(eps));
        }
        if !p.is_smooth() {
            return Err(EvolutionError::NotSmooth);
        }
        if n < MIN_GRID {
            return Err(EvolutionError::GridTooSmall(n));
        }
        let h = 1.0 / n as f64;
        let u: Vec<f64> = (0..=n).map(|j| p.value(j as f64 * h)).collect();
        let mut right = Vec::with_capacity(n);
        let mut left = Vec::with_capacity(n);
        for j in 0..n {
            let lk = log_cell(u[j], p.value((j as f64 + 0.5) * h), u[j + 1], h, eps);
            right.push(eps / h * (u[j + 1] / eps - lk).exp());
            left.push(eps / h * (u[j] / eps - lk).exp());
        }
        Ok(FokkerPlanck { n, right, left })
    }

    /// `d rho / dt` for the semi-discrete system.
    pub fn rate(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.n;
        // Outflow through cell j to the right is left[j] rho_j - right[j] rho_{j+1}.
        let flux: Vec<f64> = (0..n)
            .map(|j| self.left[j] * rho[j] - self.right[j] * rho[(j + 1) % n])
            .collect();
        (0..n).map(|j| flux[(j + n - 1) % n] - flux[j]).collect()
    }

    /// One implicit Euler step `(I - dt A) rho_new = rho`.
    ///
    /// The matrix has unit column sums and nonpositive off-diagonals. Gaussian
    /// elimination carries the column sums along so pivots and updates are
    /// sums of positive numbers; fill-in is limited to the last row and column.
    pub fn implicit_step(&self, rho: &[f64], dt: f64) -> Vec<f64> {
        let n = self.n;
        let last = n - 1;
        // Off-diagonal magnitudes of M: A[j][j+1] = right[j], A[j][j-1] = left[j-1].
        let a_up = |j: usize| dt * self.right[j];
        let a_lo = |j: usize| dt * self.left[(j + n - 1) % n];
        let mut up = vec![0.0; n];
        let mut lo = vec![0.0; n];
        let mut rc = vec![0.0; n];
        let mut lr = vec![0.0; n];
        for j in 0..last {
            if j + 1 < last {
                up[j] = a_up(j);
            }
            if j >= 1 {
                lo[j] = a_lo(j);
            }
        }
        rc[0] += a_lo(0);
        rc[last - 1] += a_up(last - 1);
        lr[0] += a_up(last);
        lr[last - 1] += a_lo(last);
        let mut s = vec![1.0; n];
        let mut b = rho.to_vec();
        let mut d = vec![0.0; n];
        for k in 0..last {
            let below = if k + 1 < last { lo[k + 1] } else { 0.0 };
            d[k] = s[k] + below + lr[k];
            let w = s[k] / d[k];
            if k + 1 < last {
                s[k + 1] += up[k] * w;
                let l1 = lo[k + 1] / d[k];
                rc[k + 1] += l1 * rc[k];
                b[k + 1] += l1 * b[k];
            }
            s[last] += rc[k] * w;
            let l2 = lr[k] / d[k];
            if k + 1 < last {
                lr[k + 1] += l2 * up[k];
            }
            b[last] += l2 * b[k];
        }
        d[last] = s[last];
        let mut x = vec![0.0; n];
        x[last] = b[last] / d[last];
        for k in (0..last).rev() {
            let next = if k + 1 < last { up[k] * x[k + 1] } else { 0.0 };
            x[k] = (b[k] + next + rc[k] * x[last]) / d[k];
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FokkerPlanckRun {
    pub rho: GridFunction,
    pub steps: usize,
    pub dt: f64,
    /// Largest `|mass_after - mass_before|` over single steps.
    pub max_mass_defect: f64,
    pub halvings: usize,
}

pub fn mass(rho: &[f64]) -> f64 {
    rho.iter().sum::<f64>() / rho.len() as f64
}

/// Implicit Euler with `dt = dx` up to `cfg.t_final`.
pub fn evolve_fokker_planck(
    rho0: &GridFunction,
    p: &Potential,
    cfg: &SchemeConfig,
) -> Result<FokkerPlanckRun, EvolutionError> {
    cfg.validate()?;
    let eps = cfg.eps.ok_or(EvolutionError::BadEpsilon(0.0))?;
    if rho0.len() != cfg.n {
        return Err(EvolutionError::SizeMismatch {
            got: rho0.len(),
            want: cfg.n,
        });
    }
    if rho0.values.iter().any(|v| !(v >= &0.0) || !v.is_finite()) || (mass(&rho0.values) - 1.0).abs() > 1e-9 {
        return Err(EvolutionError::BadDensity);
    }
    let fp = FokkerPlanck::new(p, eps, cfg.n)?;
    let h = 1.0 / cfg.n as f64;
    let mut dt = h;
    let mut rho = rho0.values.clone();
    let mut t = 0.0;
    let mut steps = 0;
    let mut halvings = 0;
    let mut max_mass_defect: f64 = 0.0;
    while t < cfg.t_final {
        let step = dt.min(cfg.t_final - t);
        let next = fp.implicit_step(&rho, step);
        if next.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            halvings += 1;
            if halvings > 30 {
                return Err(EvolutionError::StepExhausted);
            }
            dt *= 0.5;
            continue;
        }
        max_mass_defect = max_mass_defect.max((mass(&next) - mass(&rho)).abs());
        rho = next;
        t += step;
        steps += 1;
    }
    Ok(FokkerPlanckRun {
        rho: GridFunction {
            values: rho,
            periodic: true,
        },
        steps,
        dt,
        max_mass_defect,
        halvings,
    })
}

/// Unit-mass density proportional to `e^{-w/eps}`.
pub fn gibbs_density(w: &GridFunction, eps: f64) -> GridFunction {
    let lw: Vec<f64> = w.values.iter().map(|v| -v / eps).collect();
    let lz = log_sum_exp(&lw) - (w.len() as f64).ln();
    GridFunction {
        values: lw.iter().map(|v| (v - lz).exp()).collect(),
        periodic: true,
    }
}

/// `-eps log rho`, shifted to minimum zero.
pub fn log_transform(rho: &GridFunction, eps: f64) -> GridFunction {
    let w: Vec<f64> = rho.values.iter().map(|v| -eps * v.ln()).collect();
    let m = w.iter().cloned().fold(f64::INFINITY, f64::min);
    GridFunction {
        values: w.iter().map(|v| v - m).collect(),
        periodic: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRow {
    pub eps: f64,
    /// `sup |-eps log rho_eps(T) - W*|` after shifting both minima to zero.
    pub path_a: f64,
    /// `sup |S_T W* - W*|` from the HJE scheme.
    pub path_b: f64,
    pub mass_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeReport {
    pub n: usize,
    pub t_final: f64,
    pub scheme: Scheme,
    pub rows: Vec<ExchangeRow>,
    /// Path A distances do not grow as `eps` decreases.
    pub path_a_shrinks: bool,
}

pub fn exchange_limits_experiment(
    p: &Potential,
    landscape: &Landscape,
    eps: &[f64],
    t_final: f64,
    n: usize,
    scheme: Scheme,
) -> Result<ExchangeReport, EvolutionError> {
    let wstar = GridFunction::sample(n, |x| landscape.wstar_value(p, x));
    let cfg = SchemeConfig::new(n, t_final, scheme);
    let path_b = evolve_hje(&wstar, p, &cfg)?.u.sup_distance(&wstar);
    let rows = eps
        .iter()
        .map(|&e| {
            let rho0 = gibbs_density(&wstar, e);
            let run = evolve_fokker_planck(&rho0, p, &SchemeConfig { eps: Some(e), ..cfg })?;
            Ok(ExchangeRow {
                eps: e,
                path_a: log_transform(&run.rho, e).sup_distance(&wstar),
                path_b,
                mass_defect: run.max_mass_defect,
            })
        })
        .collect::<Result<Vec<_>, EvolutionError>>()?;
    let path_a_shrinks = rows.windows(2).all(|w| w[1].eps > w[0].eps || w[1].path_a <= w[0].path_a);
    Ok(ExchangeReport {
        n,
        t_final,
        scheme,
        rows,
        path_a_shrinks,
    })
}
