//! Viscosity-solution checks for `H(u', x) = u'(u' - U'(x)) = 0`.
//!
//! Curves here are Lipschitz and smooth away from finitely many joints, so
//! sub- and superdifferentials are intervals between one-sided slopes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{KinkKind, PiecewiseCurve};
use crate::potential::{hamiltonian, Potential};

pub const RESIDUAL_TOL: f64 = 1e-8;
const CONTINUITY_TOL: f64 = 1e-9;
const SAMPLES: usize = 2048;
const JOINT_GAP: f64 = 1e-6;
// Slope jumps below this are root-finding noise at C^1 joints.
const SHOCK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViscosityError {
    #[error("candidate is not continuous at x = {position} (jump {jump:e})")]
    Discontinuous { position: f64, jump: f64 },
}

/// Value and one-sided slopes where a candidate's formula changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub position: f64,
    pub left_value: f64,
    pub right_value: f64,
    pub left_slope: f64,
    pub right_slope: f64,
}

/// A periodic function that is smooth between finitely many joints.
pub trait Candidate {
    /// Start of the period `[a, a + 1)` the joints refer to.
    fn window_start(&self) -> f64;
    fn value(&self, p: &Potential, x: f64) -> f64;
    /// Derivative away from joints.
    fn slope(&self, p: &Potential, x: f64) -> f64;
    fn joints(&self, p: &Potential) -> Vec<Joint>;
}

impl Candidate for PiecewiseCurve {
    fn window_start(&self) -> f64 {
        self.start()
    }

    fn value(&self, p: &Potential, x: f64) -> f64 {
        PiecewiseCurve::value(self, p, x)
    }

    fn slope(&self, p: &Potential, x: f64) -> f64 {
        self.slopes(p, x).1
    }

    fn joints(&self, p: &Potential) -> Vec<Joint> {
        let segs = self.segments();
        let n = segs.len();
        (0..n)
            .filter(|&i| i > 0 || self.is_periodic())
            .map(|i| {
                let right = segs[i];
                let (left, lx) = if i == 0 {
                    (segs[n - 1], right.start + 1.0)
                } else {
                    (segs[i - 1], right.start)
                };
                Joint {
                    position: right.start,
                    left_value: left.piece.value(p, lx),
                    right_value: right.piece.value(p, right.start),
                    left_slope: left.piece.slope(p, lx),
                    right_slope: right.piece.slope(p, right.start),
                }
            })
            .collect()
    }
}

/// Periodic piecewise-linear function through `(x_i, v_i)` on `[x_0, x_0 + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    fn locate(&self, x: f64) -> (usize, f64) {
        let x0 = self.xs[0];
        let y = x0 + (x - x0).rem_euclid(1.0);
        let i = self.xs.partition_point(|&v| v <= y).saturating_sub(1);
        (i, y)
    }

    fn node(&self, i: usize) -> (f64, f64) {
        let n = self.xs.len();
        if i < n {
            (self.xs[i], self.values[i])
        } else {
            (self.xs[i - n] + 1.0, self.values[i - n])
        }
    }

    fn piece_slope(&self, i: usize) -> f64 {
        let (a, va) = self.node(i);
        let (b, vb) = self.node(i + 1);
        (vb - va) / (b - a)
    }
}

impl Candidate for PiecewiseLinear {
    fn window_start(&self) -> f64 {
        self.xs[0]
    }

    fn value(&self, _p: &Potential, x: f64) -> f64 {
        let (i, y) = self.locate(x);
        let (a, va) = self.node(i);
        va + self.piece_slope(i) * (y - a)
    }

    fn slope(&self, _p: &Potential, x: f64) -> f64 {
        self.piece_slope(self.locate(x).0)
    }

    fn joints(&self, _p: &Potential) -> Vec<Joint> {
        let n = self.xs.len();
        (0..n)
            .map(|i| Joint {
                position: self.xs[i],
                left_value: self.values[i],
                right_value: self.values[i],
                left_slope: self.piece_slope((i + n - 1) % n),
                right_slope: self.piece_slope(i),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinkRecord {
    pub position: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    pub kind: KinkKind,
    /// Largest `H` over the superdifferential (empty at convex kinks).
    pub max_h_super: Option<f64>,
    /// Smallest `H` over the subdifferential (empty at concave kinks).
    pub min_h_sub: Option<f64>,
    pub subsolution: bool,
    pub supersolution: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscosityReport {
    pub continuous: bool,
    pub max_jump: f64,
    pub smooth_residual: f64,
    pub kinks: Vec<KinkRecord>,
    pub subsolution: bool,
    pub supersolution: bool,
    pub is_solution: bool,
}

fn tol_at(slope: f64) -> f64 {
    RESIDUAL_TOL * (1.0 + slope * slope)
}

fn max_jump(c: &dyn Candidate, p: &Potential) -> (f64, f64) {
    c.joints(p)
        .iter()
        .map(|j| (j.position, (j.left_value - j.right_value).abs()))
        .fold((c.window_start(), 0.0), |a, b| if b.1 > a.1 { b } else { a })
}

fn sample_points(c: &dyn Candidate, p: &Potential) -> Vec<f64> {
    let a = c.window_start();
    let joints: Vec<f64> = c.joints(p).iter().map(|j| j.position).collect();
    (0..SAMPLES)
        .map(|j| a + (j as f64 + 0.5) / SAMPLES as f64)
        .filter(|x| {
            joints.iter().all(|&q| {
                let d = (x - q).rem_euclid(1.0);
                d.min(1.0 - d) > JOINT_GAP
            })
        })
        .collect()
}

fn classify(p: &Potential, j: &Joint) -> Option<KinkRecord> {
    let u = p.slope(j.position);
    let (ls, rs) = (j.left_slope, j.right_slope);
    if (ls - rs).abs() <= 1e-12 * (1.0 + ls.abs() + rs.abs()) {
        return None;
    }
    let tol = tol_at(u);
    let h = |q: f64| hamiltonian(q, u);
    let rec = if ls > rs {
        let m = h(ls).max(h(rs));
        KinkRecord {
            position: j.position,
            left_slope: ls,
            right_slope: rs,
            kind: KinkKind::Concave,
            max_h_super: Some(m),
            min_h_sub: None,
            subsolution: m <= tol,
            supersolution: true,
        }
    } else {
        let q = (0.5 * u).clamp(ls, rs);
        let m = h(q);
        KinkRecord {
            position: j.position,
            left_slope: ls,
            right_slope: rs,
            kind: KinkKind::Convex,
            max_h_super: None,
            min_h_sub: Some(m),
            subsolution: true,
            supersolution: m >= -tol,
        }
    };
    Some(rec)
}

/// Full viscosity check: smooth-part residual, continuity and every kink.
pub fn check_viscosity(c: &dyn Candidate, p: &Potential) -> ViscosityReport {
    let (_, jump) = max_jump(c, p);
    let continuous = jump <= CONTINUITY_TOL;
    let smooth_residual = sample_points(c, p)
        .iter()
        .map(|&x| hamiltonian(c.slope(p, x), p.slope(x)).abs() / (1.0 + p.slope(x).powi(2)))
        .fold(0.0, f64::max);
    let kinks: Vec<KinkRecord> = c.joints(p).iter().filter_map(|j| classify(p, j)).collect();
    let smooth_ok = smooth_residual <= RESIDUAL_TOL;
    let subsolution = continuous && smooth_ok && kinks.iter().all(|k| k.subsolution);
    let supersolution = continuous && smooth_ok && kinks.iter().all(|k| k.supersolution);
    ViscosityReport {
        continuous,
        max_jump: jump,
        smooth_residual,
        kinks,
        subsolution,
        supersolution,
        is_solution: subsolution && supersolution,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockRecord {
    pub position: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// `|f(rho+) - f(rho-)|` for the flux `f(rho) = rho^2 - U' rho`.
    pub rankine_hugoniot: f64,
    /// Lax condition `rho- >= rho+`.
    pub admissible: bool,
}

/// Jumps of `rho = u'` read as shocks of `rho_t + (rho^2 - U' rho)_x = 0`.
pub fn check_entropy_shock(c: &dyn Candidate, p: &Potential) -> Vec<ShockRecord> {
    c.joints(p)
        .iter()
        .filter(|j| (j.left_slope - j.right_slope).abs() > SHOCK_TOL * (1.0 + j.left_slope.abs()))
        .map(|j| {
            let u = p.slope(j.position);
            let f = |r: f64| r * r - u * r;
            ShockRecord {
                position: j.position,
                rho_minus: j.left_slope,
                rho_plus: j.right_slope,
                rankine_hugoniot: (f(j.right_slope) - f(j.left_slope)).abs(),
                admissible: j.left_slope >= j.right_slope,
            }
        })
        .collect()
}

/// `H(u', x) <= 0` in the viscosity sense. Requires continuity.
pub fn subsolution_everywhere(c: &dyn Candidate, p: &Potential) -> Result<bool, ViscosityError> {
    let (position, jump) = max_jump(c, p);
    if jump > CONTINUITY_TOL {
        return Err(ViscosityError::Discontinuous { position, jump });
    }
    let joints = c.joints(p);
    let mut points = sample_points(c, p);
    // Dense sampling next to every joint catches short pieces.
    for j in &joints {
        for q in 1..=64 {
            points.push(j.position + q as f64 * 1e-4);
            points.push(j.position - q as f64 * 1e-4);
        }
    }
    let smooth_ok = points.iter().all(|&x| {
        let u = p.slope(x);
        hamiltonian(c.slope(p, x), u) <= tol_at(u)
    });
    let kinks_ok = joints
        .iter()
        .filter_map(|j| classify(p, j))
        .all(|k| k.subsolution);
    Ok(smooth_ok && kinks_ok)
}
