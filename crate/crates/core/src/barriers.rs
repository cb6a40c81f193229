//! Barriers, Peierls barriers and Mañé potentials.
//!
//! In one dimension the least action needed to reach `y` from `x` is the
//! total uphill variation of `U` along the shorter-cost direction around the
//! circle, so all of these are assembled from directional branches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{bisect, CurveError, Piece, PiecewiseCurve, Segment};
use crate::potential::{CriticalPointSet, Potential};

const NODE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("path direction does not lead from {from} to {to}")]
    WrongDirection { from: f64, to: f64 },
    #[error("abstract extrema potential: {0} is not a critical point")]
    NotRepresentable(f64),
    #[error("minimum index {index} out of range (k = {k})")]
    BadIndex { index: usize, k: usize },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

fn node_value(p: &Potential, cps: &CriticalPointSet, x: f64) -> Option<f64> {
    let nodes = cps.nodes_in(x - 1e-9, x + 1e-9);
    nodes
        .iter()
        .find(|(y, _)| (y - x).abs() <= NODE_TOL * (1.0 + x.abs()))
        .map(|&(_, v)| v)
        .or_else(|| p.is_smooth().then(|| p.value(x)))
}

fn value_at(p: &Potential, cps: &CriticalPointSet, x: f64) -> f64 {
    node_value(p, cps, x).unwrap_or_else(|| p.value(x))
}

/// Breakpoints from `a` to `b` (either order) with every node in between.
fn path_points(p: &Potential, cps: &CriticalPointSet, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut pts = vec![(lo, value_at(p, cps, lo))];
    for (x, v) in cps.nodes_in(lo, hi) {
        if x - lo > NODE_TOL && hi - x > NODE_TOL {
            pts.push((x, v));
        }
    }
    pts.push((hi, value_at(p, cps, hi)));
    if a > b {
        pts.reverse();
    }
    pts
}

/// Total uphill variation of `U` along the straight path from `from` to `to`.
pub fn positive_variation(
    p: &Potential,
    cps: &CriticalPointSet,
    from: f64,
    to: f64,
    direction: Direction,
) -> Result<f64, BarrierError> {
    match direction {
        Direction::Right if to < from => return Err(BarrierError::WrongDirection { from, to }),
        Direction::Left if to > from => return Err(BarrierError::WrongDirection { from, to }),
        _ => {}
    }
    if !p.is_smooth() {
        for x in [from, to] {
            if node_value(p, cps, x).is_none() {
                return Err(BarrierError::NotRepresentable(x));
            }
        }
    }
    let pts = path_points(p, cps, from, to);
    Ok(pts.windows(2).map(|w| (w[1].1 - w[0].1).max(0.0)).sum())
}

/// Least cost `h(y; x)` of reaching `y` from `x` going once around at most.
pub fn barrier(p: &Potential, cps: &CriticalPointSet, y: f64, x: f64) -> Result<f64, BarrierError> {
    let right_target = x + (y - x).rem_euclid(1.0);
    let left_target = x - (x - y).rem_euclid(1.0);
    let r = positive_variation(p, cps, x, right_target, Direction::Right)?;
    let l = positive_variation(p, cps, x, left_target, Direction::Left)?;
    Ok(r.min(l))
}

/// Cost of travelling from `anchor` over `[anchor, anchor + span]` to the right.
fn right_branch(p: &Potential, cps: &CriticalPointSet, anchor: f64, span: f64) -> Vec<Segment> {
    let pts = path_points(p, cps, anchor, anchor + span);
    let mut acc = 0.0;
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let ((s, us), (e, ue)) = (w[0], w[1]);
        let piece = if ue > us {
            let piece = Piece::Shifted(acc - us);
            acc += ue - us;
            piece
        } else {
            Piece::Constant(acc)
        };
        out.push(Segment { start: s, end: e, piece });
    }
    out
}

/// Cost of travelling from `anchor` over `[anchor - span, anchor]` to the left.
fn left_branch(p: &Potential, cps: &CriticalPointSet, anchor: f64, span: f64) -> Vec<Segment> {
    let pts = path_points(p, cps, anchor, anchor - span);
    let mut acc = 0.0;
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let ((e, ue), (s, us)) = (w[0], w[1]);
        let piece = if us > ue {
            let piece = Piece::Shifted(acc - ue);
            acc += us - ue;
            piece
        } else {
            Piece::Constant(acc)
        };
        out.push(Segment { start: s, end: e, piece });
    }
    out.reverse();
    out
}

fn check_min_index(cps: &CriticalPointSet, i: usize) -> Result<(), BarrierError> {
    if i >= cps.k() {
        return Err(BarrierError::BadIndex { index: i, k: cps.k() });
    }
    Ok(())
}

/// `h_R(.; x_i)` on `[x_i, x_i + 1]`.
pub fn right_barrier(
    p: &Potential,
    cps: &CriticalPointSet,
    i: usize,
) -> Result<PiecewiseCurve, BarrierError> {
    check_min_index(cps, i)?;
    let a = cps.minimum(i).position;
    Ok(PiecewiseCurve::new(right_branch(p, cps, a, 1.0), false)?)
}

/// `h_L(.; x_i)` on `[x_i - 1, x_i]`.
pub fn left_barrier(
    p: &Potential,
    cps: &CriticalPointSet,
    i: usize,
) -> Result<PiecewiseCurve, BarrierError> {
    check_min_index(cps, i)?;
    let a = cps.minimum(i).position;
    Ok(PiecewiseCurve::new(left_branch(p, cps, a, 1.0), false)?)
}

/// Least action curve `y -> h(y; anchor)` on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastActionCurve {
    pub anchor: f64,
    /// Point opposite the anchor where the leftward and rightward costs meet.
    pub connection: f64,
    /// Cost of one full turn to the right.
    pub right_total: f64,
    /// Cost of one full turn to the left.
    pub left_total: f64,
    pub curve: PiecewiseCurve,
}

fn segment_value(p: &Potential, segs: &[Segment], x: f64) -> f64 {
    let i = segs.partition_point(|s| s.end < x).min(segs.len() - 1);
    segs[i].piece.value(p, x)
}

/// Glue the two directional branches from `anchor` into one periodic curve.
pub fn least_action_curve(
    p: &Potential,
    cps: &CriticalPointSet,
    anchor: f64,
) -> Result<LeastActionCurve, BarrierError> {
    if !p.is_smooth() && node_value(p, cps, anchor).is_none() {
        return Err(BarrierError::NotRepresentable(anchor));
    }
    let right = right_branch(p, cps, anchor, 1.0);
    let left = left_branch(p, cps, anchor, 1.0);
    let right_total = segment_value(p, &right, anchor + 1.0);
    let left_total = segment_value(p, &left, anchor - 1.0);

    // D(y) = R(y) - L(y - 1) is nondecreasing on [a, a + 1]; find its zero.
    let d = |y: f64| segment_value(p, &right, y) - segment_value(p, &left, y - 1.0);
    let mut cuts: Vec<f64> = right.iter().map(|s| s.end).collect();
    cuts.extend(left.iter().map(|s| s.end + 1.0));
    cuts.retain(|&y| y > anchor && y <= anchor + 1.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut lo = anchor;
    let mut crossing = anchor + 1.0;
    if d(anchor) >= 0.0 {
        crossing = anchor;
    } else {
        for &c in &cuts {
            if d(c) >= 0.0 {
                crossing = bisect(d, lo, c, true);
                break;
            }
            lo = c;
        }
    }
    let connection = crossing - 1.0;

    let mut segs: Vec<Segment> = Vec::new();
    for s in &left {
        let a = s.start.max(connection);
        if s.end - a > 1e-13 {
            segs.push(Segment { start: a, ..*s });
        }
    }
    for s in &right {
        let b = s.end.min(crossing);
        if b - s.start > 1e-13 {
            segs.push(Segment { end: b, ..*s });
        }
    }
    let first = segs[0].start;
    let n = segs.len();
    segs[n - 1].end = first + 1.0;
    let curve = PiecewiseCurve::new(segs, true)?.merged();
    Ok(LeastActionCurve {
        anchor,
        connection,
        right_total,
        left_total,
        curve,
    })
}

/// Peierls barrier `h(.; x_i)` anchored at minimum `i`.
pub fn peierls_barrier(
    p: &Potential,
    cps: &CriticalPointSet,
    i: usize,
) -> Result<LeastActionCurve, BarrierError> {
    check_min_index(cps, i)?;
    least_action_curve(p, cps, cps.minimum(i).position)
}

/// Mañé potential `v(.; x0)` for an arbitrary anchor (smooth potentials only).
pub fn mane_potential(
    p: &Potential,
    cps: &CriticalPointSet,
    anchor: f64,
) -> Result<LeastActionCurve, BarrierError> {
    least_action_curve(p, cps, anchor)
}

/// Barriers between minima. Entry `(i, j)` holds `h~_R(x_i; x_{j+1})`,
/// `h~_L(x_i; x_j)` and `h(x_i; x_j)`, all computed within one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierTable {
    pub k: usize,
    pub right_exits: Vec<f64>,
    pub left_exits: Vec<f64>,
    pub hr_tilde: Vec<Vec<f64>>,
    pub hl_tilde: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl BarrierTable {
    pub fn new(cps: &CriticalPointSet) -> Self {
        let k = cps.k();
        let right_exits: Vec<f64> = (0..k).map(|i| cps.right_exit(i)).collect();
        let left_exits: Vec<f64> = (0..k).map(|i| cps.left_exit(i)).collect();
        // Cost of walking right from minimum j to minimum i, and left.
        let walk_right = |i: usize, j: usize| -> f64 {
            (0..(i + k - j) % k).map(|q| right_exits[(j + q) % k]).sum()
        };
        let walk_left = |i: usize, j: usize| -> f64 {
            (0..(j + k - i) % k).map(|q| left_exits[(j + k - q) % k]).sum()
        };
        let mut hr_tilde = vec![vec![0.0; k]; k];
        let mut hl_tilde = vec![vec![0.0; k]; k];
        let mut h = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                hr_tilde[i][j] = walk_right(i, (j + 1) % k);
                hl_tilde[i][j] = walk_left(i, j);
                h[i][j] = walk_right(i, j).min(walk_left(i, j));
            }
        }
        BarrierTable {
            k,
            right_exits,
            left_exits,
            hr_tilde,
            hl_tilde,
            h,
        }
    }
}
