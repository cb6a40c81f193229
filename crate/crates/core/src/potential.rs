//! Skew-periodic potentials on the line and their critical points.
//!
//! A potential satisfies `U(x + 1) = U(x) - tilt` and has `U'` periodic.
//! Three shapes are supported: a trigonometric series on the unit cell,
//! a smooth spline through a list of alternating extrema, and the abstract
//! form where only the extremal values are meaningful.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const ROOT_SAMPLES: usize = 4096;
const ROOT_WIDTH: f64 = 1e-12;
const MIN_CURVATURE: f64 = 1e-8;
const SNAP: f64 = 1e-11;

/// Weight of the plateau part of the spline profile.
const PLATEAU_WEIGHT: f64 = 0.98;
/// Integral of `1 - cos^8(pi t)` over `[0, 1]`.
const PLATEAU_NORM: f64 = 93.0 / 128.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("non-finite coefficient in potential description")]
    NonFinite,
    #[error("extrema list must alternate max/min/max with odd length >= 3: {0}")]
    NonAlternating(String),
    #[error("extrema positions must be strictly increasing and span exactly one period")]
    BadPositions,
    #[error("U' is not periodic: U'(0) = {left}, U'(1) = {right}")]
    NonPeriodicSlope { left: f64, right: f64 },
    #[error("degenerate critical point near x = {position} (|U''| = {curvature:e})")]
    Degenerate { position: f64, curvature: f64 },
    #[error("potential is strictly monotone; it has no critical points and W* is identically zero")]
    NoCriticalPoints,
    #[error("critical points do not alternate between maxima and minima")]
    CriticalNotAlternating,
    #[error("derivative of order {0} requested from an abstract extrema potential")]
    DerivativeUnavailable(u8),
    #[error("abstract extrema potential has no value at x = {0} (only critical values are defined)")]
    NotRepresentable(f64),
    #[error("derivative order must be 0, 1 or 2, got {0}")]
    BadOrder(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub frequency: f64,
    pub coefficient: f64,
}

/// `constant + sum a cos(2 pi nu x) + sum b sin(2 pi nu x)` on the unit cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigSeries {
    pub constant: f64,
    pub cos: Vec<TrigTerm>,
    pub sin: Vec<TrigTerm>,
}

impl TrigSeries {
    fn derivative(&self, y: f64, order: u8) -> f64 {
        let mut acc = if order == 0 { self.constant } else { 0.0 };
        for t in &self.cos {
            let w = 2.0 * PI * t.frequency;
            let (s, c) = (w * y).sin_cos();
            acc += t.coefficient
                * match order {
                    0 => c,
                    1 => -w * s,
                    _ => -w * w * c,
                };
        }
        for t in &self.sin {
            let w = 2.0 * PI * t.frequency;
            let (s, c) = (w * y).sin_cos();
            acc += t.coefficient
                * match order {
                    0 => s,
                    1 => w * c,
                    _ => -w * w * s,
                };
        }
        acc
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self
                .cos
                .iter()
                .chain(&self.sin)
                .all(|t| t.frequency.is_finite() && t.coefficient.is_finite())
    }

    fn negated(&self) -> TrigSeries {
        let neg = |v: &Vec<TrigTerm>| {
            v.iter()
                .map(|t| TrigTerm {
                    frequency: t.frequency,
                    coefficient: -t.coefficient,
                })
                .collect()
        };
        TrigSeries {
            constant: -self.constant,
            cos: neg(&self.cos),
            sin: neg(&self.sin),
        }
    }

    fn slope_scale(&self) -> f64 {
        self.cos
            .iter()
            .chain(&self.sin)
            .map(|t| (2.0 * PI * t.frequency * t.coefficient).abs())
            .sum::<f64>()
    }
}

/// Alternating extrema `M_0, m_0, M_1, ..., m_{k-1}, M_k` with positions.
#[derive(Debug, Clone, PartialEq)]
struct Extrema {
    values: Vec<f64>,
    positions: Vec<f64>,
}

impl Extrema {
    fn new(values: Vec<f64>, positions: Option<Vec<f64>>) -> Result<Self, PotentialError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        let n = values.len();
        if n < 3 || n % 2 == 0 {
            return Err(PotentialError::NonAlternating(format!(
                "length {n} is not odd and >= 3"
            )));
        }
        for i in (1..n).step_by(2) {
            if !(values[i] < values[i - 1] && values[i] < values[i + 1]) {
                return Err(PotentialError::NonAlternating(format!(
                    "entry {i} ({}) is not below both neighbours",
                    values[i]
                )));
            }
        }
        let positions = match positions {
            Some(p) => {
                let ok = p.len() == n
                    && p.iter().all(|v| v.is_finite())
                    && p.windows(2).all(|w| w[1] > w[0])
                    && ((p[n - 1] - p[0]) - 1.0).abs() <= 1e-12;
                if !ok {
                    return Err(PotentialError::BadPositions);
                }
                p
            }
            None => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        };
        Ok(Extrema { values, positions })
    }

    fn tilt(&self) -> f64 {
        self.values[0] - self.values[self.values.len() - 1]
    }

    /// Index of the node interval containing `y` in `[p_0, p_0 + 1)`.
    fn locate(&self, y: f64) -> usize {
        let p = &self.positions;
        match p.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(i) => i.min(p.len() - 2),
            Err(i) => i.saturating_sub(1).min(p.len() - 2),
        }
    }

    fn eval(&self, x: f64, order: u8) -> f64 {
        let p0 = self.positions[0];
        let n = (x - p0).floor();
        let y = x - n;
        let i = self.locate(y);
        let h = self.positions[i + 1] - self.positions[i];
        let t = ((y - self.positions[i]) / h).clamp(0.0, 1.0);
        let dv = self.values[i + 1] - self.values[i];
        match order {
            0 => self.values[i] + dv * profile(t, 0) - self.tilt() * n,
            1 => dv * profile(t, 1) / h,
            _ => dv * profile(t, 2) / (h * h),
        }
    }

    fn negated(&self) -> Extrema {
        // -U starts at a minimum of U; rotate by one node so it starts at a maximum.
        let n = self.values.len();
        let tilt = self.tilt();
        let mut values: Vec<f64> = self.values[1..].iter().map(|v| -v).collect();
        values.push(-(self.values[1] - tilt));
        let mut positions: Vec<f64> = self.positions[1..].to_vec();
        positions.push(self.positions[1] + 1.0);
        debug_assert_eq!(values.len(), n);
        Extrema { values, positions }
    }
}

/// Monotone transition from 0 to 1 on `[0, 1]` with vanishing slope at both ends.
///
/// A small raised-cosine component keeps the end curvature nonzero; the rest
/// is a plateau profile whose slope is nearly uniform away from the ends.
fn profile(t: f64, order: u8) -> f64 {
    let a = PI * t;
    let w = PLATEAU_WEIGHT;
    match order {
        0 => {
            let rc = 0.5 * (1.0 - a.cos());
            let c8 = (35.0 * t
                + 56.0 * (2.0 * a).sin() / (2.0 * PI)
                + 28.0 * (4.0 * a).sin() / (4.0 * PI)
                + 8.0 * (6.0 * a).sin() / (6.0 * PI)
                + (8.0 * a).sin() / (8.0 * PI))
                / 128.0;
            (1.0 - w) * rc + w * (t - c8) / PLATEAU_NORM
        }
        1 => (1.0 - w) * 0.5 * PI * a.sin() + w * (1.0 - a.cos().powi(8)) / PLATEAU_NORM,
        _ => {
            (1.0 - w) * 0.5 * PI * PI * a.cos()
                + w * 8.0 * PI * a.cos().powi(7) * a.sin() / PLATEAU_NORM
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Trig { series: TrigSeries, slope: f64 },
    Spline(Extrema),
    Abstract(Extrema),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Smooth,
    AbstractExtrema,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    shape: Shape,
    tilt: f64,
}

impl Potential {
    /// Trigonometric potential `series(x) - s x` on the unit cell, where `s`
    /// is chosen so that `U(0) - U(1) = tilt`.
    pub fn trig(series: TrigSeries, tilt: f64) -> Result<Self, PotentialError> {
        if !series.is_finite() || !tilt.is_finite() {
            return Err(PotentialError::NonFinite);
        }
        let slope = tilt - (series.derivative(0.0, 0) - series.derivative(1.0, 0));
        let left = series.derivative(0.0, 1);
        let right = series.derivative(1.0, 1);
        if (left - right).abs() > 1e-9 * (1.0 + series.slope_scale()) {
            return Err(PotentialError::NonPeriodicSlope { left, right });
        }
        Ok(Potential {
            shape: Shape::Trig { series, slope },
            tilt,
        })
    }

    /// Smooth potential through alternating extrema, starting and ending at a maximum.
    /// Positions default to an even spacing over `[0, 1]`.
    pub fn spline(values: Vec<f64>, positions: Option<Vec<f64>>) -> Result<Self, PotentialError> {
        let e = Extrema::new(values, positions)?;
        let tilt = e.tilt();
        Ok(Potential {
            shape: Shape::Spline(e),
            tilt,
        })
    }

    /// Potential known only through its extremal values.
    pub fn abstract_extrema(
        values: Vec<f64>,
        positions: Option<Vec<f64>>,
    ) -> Result<Self, PotentialError> {
        let e = Extrema::new(values, positions)?;
        let tilt = e.tilt();
        Ok(Potential {
            shape: Shape::Abstract(e),
            tilt,
        })
    }

    /// Spline positions proportional to the variation between neighbouring extrema.
    pub fn variation_positions(values: &[f64]) -> Vec<f64> {
        let total: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for w in values.windows(2) {
            acc += (w[1] - w[0]).abs();
            out.push(acc / total);
        }
        out
    }

    pub fn mode(&self) -> Mode {
        match self.shape {
            Shape::Abstract(_) => Mode::AbstractExtrema,
            _ => Mode::Smooth,
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.mode() == Mode::Smooth
    }

    /// `U(0) - U(1)`, so that `U(x + 1) = U(x) - tilt`.
    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    /// Value or derivative of `U`. Abstract potentials only answer order 0 at
    /// critical points.
    pub fn evaluate(&self, x: f64, order: u8) -> Result<f64, PotentialError> {
        if order > 2 {
            return Err(PotentialError::BadOrder(order));
        }
        if !x.is_finite() {
            return Err(PotentialError::NonFinite);
        }
        if let Shape::Abstract(e) = &self.shape {
            if order > 0 {
                return Err(PotentialError::DerivativeUnavailable(order));
            }
            let p0 = e.positions[0];
            let n = (x - p0).floor();
            let y = x - n;
            return e
                .positions
                .iter()
                .position(|p| (p - y).abs() <= 1e-12)
                .map(|i| e.values[i] - self.tilt * n)
                .ok_or(PotentialError::NotRepresentable(x));
        }
        Ok(self.raw(x, order))
    }

    /// `U(x)`. For abstract potentials this is a fixed monotone interpolant
    /// between the critical values, used only to place cut points.
    pub fn value(&self, x: f64) -> f64 {
        self.raw(x, 0)
    }

    /// `U'(x)`, with the same convention as [`Potential::value`].
    pub fn slope(&self, x: f64) -> f64 {
        self.raw(x, 1)
    }

    /// `U''(x)`, with the same convention as [`Potential::value`].
    pub fn curvature(&self, x: f64) -> f64 {
        self.raw(x, 2)
    }

    fn raw(&self, x: f64, order: u8) -> f64 {
        match &self.shape {
            Shape::Trig { series, slope } => {
                let n = x.floor();
                let y = x - n;
                let base = series.derivative(y, order);
                match order {
                    0 => base - slope * y - self.tilt * n,
                    1 => base - slope,
                    _ => base,
                }
            }
            Shape::Spline(e) | Shape::Abstract(e) => e.eval(x, order),
        }
    }

    /// Smooth potential with the same values; abstract potentials become splines.
    pub fn realize(&self) -> Potential {
        match &self.shape {
            Shape::Abstract(e) => Potential {
                shape: Shape::Spline(e.clone()),
                tilt: self.tilt,
            },
            _ => self.clone(),
        }
    }

    /// The potential `-U`.
    pub fn reversed(&self) -> Potential {
        let shape = match &self.shape {
            Shape::Trig { series, slope } => Shape::Trig {
                series: series.negated(),
                slope: -slope,
            },
            Shape::Spline(e) => Shape::Spline(e.negated()),
            Shape::Abstract(e) => Shape::Abstract(e.negated()),
        };
        Potential {
            shape,
            tilt: -self.tilt,
        }
    }

    /// Largest `|U''|` over a uniform sample of one period.
    pub fn max_curvature(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|j| self.curvature(j as f64 / samples as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|U'|` over a uniform sample of one period.
    pub fn max_slope(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|j| self.slope(j as f64 / samples as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Nondegenerate critical points ordered from the first maximum.
    pub fn critical_points(&self) -> Result<CriticalPointSet, PotentialError> {
        match &self.shape {
            Shape::Spline(e) | Shape::Abstract(e) => {
                Ok(CriticalPointSet::from_nodes(&e.positions, &e.values, self.tilt))
            }
            Shape::Trig { .. } => self.trig_critical_points(),
        }
    }

    fn trig_critical_points(&self) -> Result<CriticalPointSet, PotentialError> {
        let h = 1.0 / ROOT_SAMPLES as f64;
        let xs: Vec<f64> = (0..ROOT_SAMPLES).map(|j| (j as f64 + 0.5) * h).collect();
        let ds: Vec<f64> = xs.iter().map(|&x| self.slope(x)).collect();
        let scale = ds.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if scale <= 1e-14 {
            return Err(PotentialError::Degenerate {
                position: 0.0,
                curvature: self.curvature(0.0).abs(),
            });
        }
        let mut roots: Vec<(f64, bool)> = Vec::new();
        for j in 0..ROOT_SAMPLES {
            let (a, b) = (xs[j], xs[j] + h);
            let (da, db) = (ds[j], ds[(j + 1) % ROOT_SAMPLES]);
            let is_min = da <= 0.0 && db > 0.0;
            let is_max = da >= 0.0 && db < 0.0;
            if !(is_min || is_max) {
                continue;
            }
            let r = self.bisect_slope(a, b, da);
            let curv = self.curvature(r);
            if curv.abs() < MIN_CURVATURE || (is_min && curv < 0.0) || (is_max && curv > 0.0) {
                return Err(PotentialError::Degenerate {
                    position: r.rem_euclid(1.0),
                    curvature: curv.abs(),
                });
            }
            let mut y = r.rem_euclid(1.0);
            if y > 1.0 - SNAP || y < SNAP {
                y = 0.0;
            }
            roots.push((y, is_max));
        }
        if roots.is_empty() {
            return Err(PotentialError::NoCriticalPoints);
        }
        roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let m = roots.len();
        if m % 2 == 1 || (0..m).any(|i| roots[i].1 == roots[(i + 1) % m].1) {
            return Err(PotentialError::CriticalNotAlternating);
        }
        let start = roots.iter().position(|r| r.1).unwrap();
        let p0 = roots[start].0;
        let mut positions: Vec<f64> = (0..m)
            .map(|i| {
                let y = roots[(start + i) % m].0;
                if y < p0 {
                    y + 1.0
                } else {
                    y
                }
            })
            .collect();
        positions.push(p0 + 1.0);
        let values: Vec<f64> = positions.iter().map(|&x| self.value(x)).collect();
        Ok(CriticalPointSet::from_nodes(&positions, &values, self.tilt))
    }

    fn bisect_slope(&self, mut a: f64, mut b: f64, da: f64) -> f64 {
        let neg_left = da <= 0.0;
        while b - a > ROOT_WIDTH {
            let m = 0.5 * (a + b);
            let dm = self.slope(m);
            if dm == 0.0 {
                return m;
            }
            if (dm < 0.0) == neg_left {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

/// Hamiltonian `H(p, x) = p (p - U'(x))`.
pub fn hamiltonian(p: f64, slope: f64) -> f64 {
    p * (p - slope)
}

/// Lagrangian `L(s, x) = (s + U'(x))^2 / 4`.
pub fn lagrangian(s: f64, slope: f64) -> f64 {
    0.25 * (s + slope) * (s + slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub kind: CriticalKind,
    /// Minima are numbered `0..k`, maxima `0..=k` with maximum `i` just left of minimum `i`.
    pub index: usize,
    pub position: f64,
    pub value: f64,
}

/// Reference to a critical point within one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum CriticalRef {
    Min(usize),
    Max(usize),
}

/// Critical points `M_0 < m_0 < M_1 < ... < m_{k-1} < M_k = M_0 + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSet {
    nodes: Vec<CriticalPoint>,
    tilt: f64,
}

impl CriticalPointSet {
    fn from_nodes(positions: &[f64], values: &[f64], tilt: f64) -> Self {
        let nodes = positions
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (&position, &value))| CriticalPoint {
                kind: if i % 2 == 0 {
                    CriticalKind::Max
                } else {
                    CriticalKind::Min
                },
                index: i / 2,
                position,
                value,
            })
            .collect();
        CriticalPointSet { nodes, tilt }
    }

    /// Number of wells per period.
    pub fn k(&self) -> usize {
        self.nodes.len() / 2
    }

    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    /// All `2k + 1` nodes, including the closing maximum one period to the right.
    pub fn nodes(&self) -> &[CriticalPoint] {
        &self.nodes
    }

    pub fn minima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.nodes.iter().skip(1).step_by(2)
    }

    /// The `k + 1` maxima; the last one is the first shifted by one period.
    pub fn maxima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.nodes.iter().step_by(2)
    }

    pub fn minimum(&self, i: usize) -> &CriticalPoint {
        &self.nodes[2 * i + 1]
    }

    pub fn maximum(&self, i: usize) -> &CriticalPoint {
        &self.nodes[2 * i]
    }

    /// Start of the fundamental window `[M_0, M_0 + 1)`.
    pub fn window_start(&self) -> f64 {
        self.nodes[0].position
    }

    /// Node index (`0..2k`) of a critical reference.
    pub fn node_index(&self, r: CriticalRef) -> usize {
        let k = self.k();
        match r {
            CriticalRef::Min(i) => 2 * (i % k) + 1,
            CriticalRef::Max(i) => 2 * (i % k),
        }
    }

    pub fn point(&self, r: CriticalRef) -> &CriticalPoint {
        &self.nodes[self.node_index(r)]
    }

    /// Positions and values of the nodes, extended periodically over `[lo, hi]`.
    pub fn nodes_in(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let p0 = self.window_start();
        let m = self.nodes.len() - 1;
        let first = ((lo - p0).floor() as i64) - 1;
        let last = ((hi - p0).ceil() as i64) + 1;
        let mut out = Vec::new();
        for n in first..=last {
            for node in &self.nodes[..m] {
                let x = node.position + n as f64;
                if x >= lo && x <= hi {
                    out.push((x, node.value - self.tilt * n as f64));
                }
            }
        }
        out
    }

    /// Uphill cost of leaving minimum `i` to the right.
    pub fn right_exit(&self, i: usize) -> f64 {
        self.nodes[2 * i + 2].value - self.nodes[2 * i + 1].value
    }

    /// Uphill cost of leaving minimum `i` to the left.
    pub fn left_exit(&self, i: usize) -> f64 {
        self.nodes[2 * i].value - self.nodes[2 * i + 1].value
    }

    /// Signed increments `v_{n+1} - v_n` around one period.
    fn increments(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1].value - w[0].value).collect()
    }

    /// Least uphill cost from `source` to `target` within one turn, going right.
    pub fn node_cost_right(&self, target: CriticalRef, source: CriticalRef) -> f64 {
        let d = self.increments();
        let m = d.len();
        let (s, t) = (self.node_index(source), self.node_index(target));
        let steps = (t + m - s) % m;
        (0..steps).map(|q| d[(s + q) % m].max(0.0)).sum()
    }

    /// Least uphill cost from `source` to `target` within one turn, going left.
    pub fn node_cost_left(&self, target: CriticalRef, source: CriticalRef) -> f64 {
        let d = self.increments();
        let m = d.len();
        let (s, t) = (self.node_index(source), self.node_index(target));
        let steps = (s + m - t) % m;
        (0..steps)
            .map(|q| (-d[(s + m - 1 - q) % m]).max(0.0))
            .sum()
    }

    /// Barrier `h(target; source)` between two critical points.
    pub fn node_barrier(&self, target: CriticalRef, source: CriticalRef) -> f64 {
        self.node_cost_right(target, source)
            .min(self.node_cost_left(target, source))
    }

    /// Every critical point in the window, minima and maxima.
    pub fn refs(&self) -> Vec<CriticalRef> {
        (0..self.k())
            .flat_map(|i| [CriticalRef::Max(i), CriticalRef::Min(i)])
            .collect()
    }
}
