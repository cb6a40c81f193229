//! Calibrated curves of a landscape and the projected Aubry set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Piece;
use crate::landscape::Landscape;
use crate::potential::{lagrangian, CriticalKind, CriticalPoint, CriticalPointSet, CriticalRef, Potential};

pub const STEP: f64 = 1e-3;
/// Largest `h |U''|` allowed for the default step.
const STIFFNESS: f64 = 0.02;
const NODE_TOL: f64 = 1e-6;
const SLOPE_TOL: f64 = 1e-8;
const MAX_STEPS: usize = 1_000_000;
const KINK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("calibrated curves need a potential with derivatives")]
    NotSmooth,
    #[error("trajectory from {start} did not reach a critical point in {MAX_STEPS} steps")]
    NoConvergence { start: f64 },
}

/// The projected Aubry set: every critical point in one period, maxima and
/// minima interleaved starting from the first maximum.
pub fn aubry_set(cps: &CriticalPointSet) -> Vec<CriticalPoint> {
    let n = cps.nodes().len() - 1;
    cps.nodes()[..n].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatherPoint {
    pub position: f64,
    pub velocity: f64,
}

/// Support of the Mather measures: the Aubry set at rest.
pub fn mather_set(cps: &CriticalPointSet) -> Vec<MatherPoint> {
    aubry_set(cps)
        .iter()
        .map(|c| MatherPoint {
            position: c.position,
            velocity: 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    /// `gamma' = U'(gamma)`, used on shifted-potential segments.
    Uphill,
    /// `gamma' = -U'(gamma)`, used on constant segments.
    Downhill,
}

/// A backward characteristic `gamma: (-inf, 0] -> R` with `gamma(0) = start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub start: f64,
    /// Nonpositive, decreasing.
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Limit of `gamma(t)` as `t -> -inf`, lifted next to the samples.
    pub terminal: f64,
    pub terminal_ref: CriticalRef,
    pub anchor_kink: Option<f64>,
    pub step: f64,
}

impl Trajectory {
    /// `gamma'(t)` at sample `i`.
    pub fn velocity(&self, p: &Potential, i: usize) -> f64 {
        let u = p.slope(self.positions[i]);
        match self.kind {
            TrajectoryKind::Uphill => u,
            TrajectoryKind::Downhill => -u,
        }
    }

    /// `int L(gamma', gamma) dt` between samples `i < j` (times `t_j < t_i`).
    pub fn action(&self, p: &Potential, i: usize, j: usize) -> f64 {
        let f: Vec<f64> = (i..=j)
            .map(|m| lagrangian(self.velocity(p, m), p.slope(self.positions[m])))
            .collect();
        simpson(&f, self.step)
    }
}

/// Composite Simpson on equally spaced samples; an odd cell count ends with
/// the 3/8 rule over the last three cells.
pub(crate) fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let cells = n - 1;
    if cells == 1 {
        return 0.5 * h * (f[0] + f[1]);
    }
    let even = if cells % 2 == 0 { cells } else { cells - 3 };
    let mut s = 0.0;
    for c in (0..even).step_by(2) {
        s += h / 3.0 * (f[c] + 4.0 * f[c + 1] + f[c + 2]);
    }
    if even < cells {
        let c = even;
        s += 3.0 * h / 8.0 * (f[c] + 3.0 * f[c + 1] + 3.0 * f[c + 2] + f[c + 3]);
    }
    s
}

fn nearest_node(cps: &CriticalPointSet, x: f64) -> (f64, CriticalRef) {
    let a = cps.window_start();
    let n = ((x - a).floor()) as i64;
    let mut best = (f64::INFINITY, 0.0, CriticalRef::Max(0));
    for shift in [n - 1, n, n + 1] {
        for c in aubry_set(cps) {
            let pos = c.position + shift as f64;
            let d = (x - pos).abs();
            if d < best.0 {
                let r = match c.kind {
                    CriticalKind::Min => CriticalRef::Min(c.index),
                    CriticalKind::Max => CriticalRef::Max(c.index),
                };
                best = (d, pos, r);
            }
        }
    }
    (best.1, best.2)
}

/// Integrate one backward characteristic with RK4 and fixed step `h`.
pub fn trace(
    p: &Potential,
    cps: &CriticalPointSet,
    x: f64,
    kind: TrajectoryKind,
    h: f64,
) -> Result<Trajectory, DynamicsError> {
    if !p.is_smooth() {
        return Err(DynamicsError::NotSmooth);
    }
    // In reversed time s = -t the ODE becomes gamma_s = sigma U'(gamma).
    let sigma = match kind {
        TrajectoryKind::Uphill => -1.0,
        TrajectoryKind::Downhill => 1.0,
    };
    let f = |y: f64| sigma * p.slope(y);
    let mut times = vec![0.0];
    let mut positions = vec![x];
    let mut y = x;
    for step in 0..=MAX_STEPS {
        let (node, r) = nearest_node(cps, y);
        if (y - node).abs() < NODE_TOL || p.slope(y).abs() < SLOPE_TOL {
            return Ok(Trajectory {
                kind,
                start: x,
                times,
                positions,
                terminal: node,
                terminal_ref: r,
                anchor_kink: None,
                step: h,
            });
        }
        if step == MAX_STEPS {
            break;
        }
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        times.push(-((step + 1) as f64) * h);
        positions.push(y);
    }
    Err(DynamicsError::NoConvergence { start: x })
}

fn kind_of(piece: Piece) -> TrajectoryKind {
    if piece.is_shifted() {
        TrajectoryKind::Uphill
    } else {
        TrajectoryKind::Downhill
    }
}

/// Default RK4 step: `STEP`, or less where `U''` would make it inaccurate.
pub fn default_step(p: &Potential) -> f64 {
    STEP.min(STIFFNESS / p.max_curvature(4096))
}

/// Backward characteristics of `W` through `x`: one on a smooth stretch, two
/// at a kink.
pub fn calibrated_curve(
    x: f64,
    landscape: &Landscape,
    p: &Potential,
    cps: &CriticalPointSet,
) -> Result<Vec<Trajectory>, DynamicsError> {
    if !p.is_smooth() {
        return Err(DynamicsError::NotSmooth);
    }
    calibrated_curve_with_step(x, landscape, p, cps, default_step(p))
}

pub fn calibrated_curve_with_step(
    x: f64,
    landscape: &Landscape,
    p: &Potential,
    cps: &CriticalPointSet,
    h: f64,
) -> Result<Vec<Trajectory>, DynamicsError> {
    let w = &landscape.w;
    let a = w.start();
    let y = a + (x - a).rem_euclid(1.0);
    let segs = w.segments();
    let idx = segs
        .iter()
        .position(|s| y < s.end)
        .unwrap_or(segs.len() - 1);
    let seg = segs[idx];
    let at_start = (y - seg.start).abs() <= KINK_TOL;
    let at_end = (seg.end - y).abs() <= KINK_TOL;
    let neighbour = if at_start {
        Some(segs[(idx + segs.len() - 1) % segs.len()])
    } else if at_end {
        Some(segs[(idx + 1) % segs.len()])
    } else {
        None
    };
    let mut kinds = vec![kind_of(seg.piece)];
    let mut kink = None;
    if let Some(nb) = neighbour {
        let other = kind_of(nb.piece);
        if other != kinds[0] {
            kink = Some(x);
            kinds.push(other);
        }
    }
    kinds
        .into_iter()
        .map(|k| {
            let mut t = trace(p, cps, x, k, h)?;
            t.anchor_kink = kink;
            Ok(t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub kind: TrajectoryKind,
    pub terminal: f64,
    pub terminal_ref: CriticalRef,
    pub in_aubry_set: bool,
    /// Action over the whole sampled trajectory.
    pub action: f64,
    /// Largest `|action - (W(gamma(b)) - W(gamma(a)))|` over the checked subintervals.
    pub max_defect: f64,
    pub calibrated: bool,
}

pub const CALIBRATION_TOL: f64 = 1e-6;
pub const DOWNHILL_ACTION_TOL: f64 = 1e-10;

/// Compare accumulated action with landscape differences on nested pieces
/// of the trajectory.
pub fn verify_calibration(
    t: &Trajectory,
    landscape: &Landscape,
    p: &Potential,
    cps: &CriticalPointSet,
) -> CalibrationReport {
    let n = t.positions.len();
    let last = n - 1;
    let mut cuts: Vec<usize> = (0..=8).map(|q| q * last / 8).collect();
    cuts.dedup();
    let w = |i: usize| landscape.w.value(p, t.positions[i]);
    let mut max_defect: f64 = 0.0;
    for (ai, &i) in cuts.iter().enumerate() {
        for &j in &cuts[ai + 1..] {
            let act = t.action(p, i, j);
            max_defect = max_defect.max((act - (w(i) - w(j))).abs());
        }
    }
    let action = t.action(p, 0, last);
    let in_aubry_set = aubry_set(cps).iter().any(|c| {
        let d = (t.terminal - c.position).rem_euclid(1.0);
        d.min(1.0 - d) < NODE_TOL
    });
    let kind_ok = match (t.kind, t.terminal_ref) {
        (TrajectoryKind::Uphill, CriticalRef::Min(_)) => true,
        (TrajectoryKind::Downhill, CriticalRef::Max(_)) => action <= DOWNHILL_ACTION_TOL,
        _ => n == 1,
    };
    CalibrationReport {
        kind: t.kind,
        terminal: t.terminal,
        terminal_ref: t.terminal_ref,
        in_aubry_set,
        action,
        max_defect,
        calibrated: in_aubry_set && kind_ok && max_defect <= CALIBRATION_TOL,
    }
}
