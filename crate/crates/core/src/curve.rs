//! Piecewise curves built from two kinds of pieces: `U(x) + c` and constants.
//!
//! Every barrier, Peierls barrier and weak KAM solution in one dimension is
//! of this form, so curves are stored exactly and only the cut points
//! between pieces are found numerically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{CriticalPointSet, Potential};

const MERGE_TOL: f64 = 1e-9;
const SLIVER: f64 = 1e-7;
const POS_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("segments do not tile an interval (gap or overlap near x = {0})")]
    Tiling(f64),
    #[error("periodic curve must span exactly one period, got {0}")]
    Span(f64),
    #[error("curve has no segments")]
    Empty,
    #[error("curve is discontinuous at x = {position} (jump {jump:e})")]
    Discontinuous { position: f64, jump: f64 },
}

/// Value of one piece: `U(x) + c` or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "constant", rename_all = "lowercase")]
pub enum Piece {
    Shifted(f64),
    Constant(f64),
}

impl Piece {
    pub fn value(&self, p: &Potential, x: f64) -> f64 {
        match *self {
            Piece::Shifted(c) => p.value(x) + c,
            Piece::Constant(v) => v,
        }
    }

    pub fn slope(&self, p: &Potential, x: f64) -> f64 {
        match self {
            Piece::Shifted(_) => p.slope(x),
            Piece::Constant(_) => 0.0,
        }
    }

    /// The same values read `periods` periods further right.
    fn translated(&self, periods: f64, tilt: f64) -> Piece {
        match *self {
            Piece::Shifted(c) => Piece::Shifted(c + periods * tilt),
            c => c,
        }
    }

    fn plus(&self, d: f64) -> Piece {
        match *self {
            Piece::Shifted(c) => Piece::Shifted(c + d),
            Piece::Constant(v) => Piece::Constant(v + d),
        }
    }

    fn same_as(&self, other: &Piece, tol: f64) -> bool {
        match (self, other) {
            (Piece::Shifted(a), Piece::Shifted(b)) | (Piece::Constant(a), Piece::Constant(b)) => {
                (a - b).abs() <= tol
            }
            _ => false,
        }
    }

    pub fn is_shifted(&self) -> bool {
        matches!(self, Piece::Shifted(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub piece: Piece,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KinkKind {
    /// Slope drops across the kink: a minimum of two branches.
    Concave,
    /// Slope rises across the kink.
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    pub position: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    pub kind: KinkKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCurve {
    segments: Vec<Segment>,
    periodic: bool,
}

impl PiecewiseCurve {
    pub fn new(segments: Vec<Segment>, periodic: bool) -> Result<Self, CurveError> {
        if segments.is_empty() {
            return Err(CurveError::Empty);
        }
        for s in &segments {
            if !(s.end > s.start) {
                return Err(CurveError::Tiling(s.start));
            }
        }
        for w in segments.windows(2) {
            if (w[1].start - w[0].end).abs() > POS_TOL * (1.0 + w[0].end.abs()) {
                return Err(CurveError::Tiling(w[0].end));
            }
        }
        let mut segments = segments;
        for i in 1..segments.len() {
            segments[i].start = segments[i - 1].end;
        }
        let c = PiecewiseCurve { segments, periodic };
        if periodic && (c.end() - c.start() - 1.0).abs() > 1e-12 {
            return Err(CurveError::Span(c.end() - c.start()));
        }
        Ok(c)
    }

    /// Periodic curve made of a single piece over `[start, start + 1)`.
    pub fn uniform(start: f64, piece: Piece) -> Self {
        PiecewiseCurve {
            segments: vec![Segment {
                start,
                end: start + 1.0,
                piece,
            }],
            periodic: true,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    /// Periodic curves read `x` modulo one; interval curves clamp to their ends.
    fn reduce(&self, x: f64) -> (f64, f64) {
        if self.periodic {
            let n = ((x - self.start()) / (self.end() - self.start())).floor();
            let y = x - n;
            if y >= self.end() {
                (self.start(), n + 1.0)
            } else {
                (y, n)
            }
        } else {
            (x.clamp(self.start(), self.end()), 0.0)
        }
    }

    fn locate(&self, y: f64) -> usize {
        let i = self.segments.partition_point(|s| s.end <= y);
        i.min(self.segments.len() - 1)
    }

    /// Piece active at `x` together with the number of periods `x` was shifted by.
    pub fn piece_at(&self, x: f64) -> (Piece, f64) {
        let (y, n) = self.reduce(x);
        (self.segments[self.locate(y)].piece, n)
    }

    pub fn value(&self, p: &Potential, x: f64) -> f64 {
        let (y, _) = self.reduce(x);
        self.segments[self.locate(y)].piece.value(p, y)
    }

    /// Left and right derivatives at `x`.
    pub fn slopes(&self, p: &Potential, x: f64) -> (f64, f64) {
        let (y, _) = self.reduce(x);
        let i = self.locate(y);
        let right = self.segments[i].piece.slope(p, y);
        let seg = &self.segments[i];
        let left = if (y - seg.start).abs() <= POS_TOL * (1.0 + y.abs()) {
            if i > 0 {
                self.segments[i - 1].piece.slope(p, y)
            } else if self.periodic {
                let last = self.segments.len() - 1;
                self.segments[last].piece.slope(p, y + 1.0)
            } else {
                right
            }
        } else {
            right
        };
        (left, right)
    }

    /// Positions where one piece hands over to the next. For periodic curves
    /// the window start is included.
    pub fn joints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.segments.iter().skip(1).map(|s| s.start).collect();
        if self.periodic {
            out.insert(0, self.start());
        }
        out
    }

    /// Left and right pieces at each joint, as `(position, left, right, left_x)`
    /// where `left_x` is where the left piece should be evaluated.
    fn joint_pieces(&self) -> Vec<(f64, Piece, Piece, f64)> {
        let mut out = Vec::new();
        if self.periodic {
            let last = self.segments[self.segments.len() - 1];
            out.push((self.start(), last.piece, self.segments[0].piece, self.end()));
        }
        for w in self.segments.windows(2) {
            out.push((w[1].start, w[0].piece, w[1].piece, w[1].start));
        }
        out
    }

    /// Largest jump between neighbouring pieces.
    pub fn continuity_defect(&self, p: &Potential) -> (f64, f64) {
        self.joint_pieces()
            .into_iter()
            .map(|(x, l, r, lx)| (x, (l.value(p, lx) - r.value(p, x)).abs()))
            .fold((self.start(), 0.0), |acc, (x, j)| if j > acc.1 { (x, j) } else { acc })
    }

    pub fn check_continuous(&self, p: &Potential, tol: f64) -> Result<(), CurveError> {
        let (position, jump) = self.continuity_defect(p);
        if jump > tol {
            Err(CurveError::Discontinuous { position, jump })
        } else {
            Ok(())
        }
    }

    /// Joints where the slope actually changes.
    pub fn kinks(&self, p: &Potential) -> Vec<Kink> {
        let scale = 1.0 + p.max_slope(256);
        self.joint_pieces()
            .into_iter()
            .filter(|(_, l, r, _)| l.is_shifted() != r.is_shifted())
            .filter_map(|(x, l, r, lx)| {
                let ls = l.slope(p, lx);
                let rs = r.slope(p, x);
                if (ls - rs).abs() <= 1e-9 * scale {
                    return None;
                }
                Some(Kink {
                    position: x,
                    left_slope: ls,
                    right_slope: rs,
                    kind: if ls > rs {
                        KinkKind::Concave
                    } else {
                        KinkKind::Convex
                    },
                })
            })
            .collect()
    }

    /// Same periodic curve over the window `[start, start + 1)`.
    pub fn rotated(&self, tilt: f64, start: f64) -> PiecewiseCurve {
        assert!(self.periodic, "only periodic curves can be rotated");
        let n0 = ((start - self.start()) / 1.0).floor();
        let mut pieces: Vec<Segment> = Vec::new();
        for n in [n0, n0 + 1.0] {
            for s in &self.segments {
                let a = (s.start + n).max(start);
                let b = (s.end + n).min(start + 1.0);
                if b - a > POS_TOL {
                    pieces.push(Segment {
                        start: a,
                        end: b,
                        piece: s.piece.translated(n, tilt),
                    });
                }
            }
        }
        pieces.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        let first = pieces[0].start;
        if (first - start).abs() > 0.0 {
            pieces[0].start = start;
        }
        let last = pieces.len() - 1;
        pieces[last].end = start + 1.0;
        PiecewiseCurve::new(pieces, true)
            .expect("rotation preserves tiling")
            .merged()
    }

    /// Restriction of an interval curve to `[a, b]`.
    pub fn restricted(&self, a: f64, b: f64) -> PiecewiseCurve {
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .filter_map(|s| {
                let lo = s.start.max(a);
                let hi = s.end.min(b);
                (hi - lo > POS_TOL).then_some(Segment {
                    start: lo,
                    end: hi,
                    piece: s.piece,
                })
            })
            .collect();
        PiecewiseCurve {
            segments,
            periodic: false,
        }
    }

    pub fn shifted(&self, d: f64) -> PiecewiseCurve {
        PiecewiseCurve {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    piece: s.piece.plus(d),
                    ..*s
                })
                .collect(),
            periodic: self.periodic,
        }
    }

    /// The curve `-w` written over the reversed potential `-U`.
    pub fn negated(&self) -> PiecewiseCurve {
        PiecewiseCurve {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    piece: match s.piece {
                        Piece::Shifted(c) => Piece::Shifted(-c),
                        Piece::Constant(v) => Piece::Constant(-v),
                    },
                    ..*s
                })
                .collect(),
            periodic: self.periodic,
        }
    }

    /// Merge neighbouring segments carrying the same piece.
    pub fn merged(&self) -> PiecewiseCurve {
        let tagged = self.segments.iter().map(|s| (*s, 0)).collect();
        PiecewiseCurve {
            segments: merge_tagged(tagged).into_iter().map(|(s, _)| s).collect(),
            periodic: self.periodic,
        }
    }

    /// `n` equally spaced samples over the curve's domain (one period if periodic).
    pub fn sample(&self, p: &Potential, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = (self.start(), self.end());
        let denom = if self.periodic { n } else { n.max(2) - 1 };
        (0..n)
            .map(|j| {
                let x = a + (b - a) * j as f64 / denom as f64;
                (x, self.value(p, x))
            })
            .collect()
    }

    /// Same sequence of pieces and cut points, up to the given tolerances.
    pub fn structurally_matches(&self, other: &PiecewiseCurve, value_tol: f64, pos_tol: f64) -> bool {
        self.segments.len() == other.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| {
                a.piece.same_as(&b.piece, value_tol)
                    && (a.start - b.start).abs() <= pos_tol
                    && (a.end - b.end).abs() <= pos_tol
            })
    }

    /// Pieces of the curve in order, without positions.
    pub fn pieces(&self) -> Vec<Piece> {
        self.segments.iter().map(|s| s.piece).collect()
    }
}

/// Pointwise minimum of periodic curves, written over the potential's window.
/// Returns the curve and, per segment, the lowest index of a curve attaining it.
pub fn lower_envelope(
    p: &Potential,
    cps: &CriticalPointSet,
    curves: &[PiecewiseCurve],
) -> (PiecewiseCurve, Vec<usize>) {
    assert!(!curves.is_empty());
    let w0 = cps.window_start();
    let rotated: Vec<PiecewiseCurve> = curves.iter().map(|c| c.rotated(p.tilt(), w0)).collect();
    let (segs, sources) = envelope_over(p, cps, &rotated, w0, w0 + 1.0);
    let curve = PiecewiseCurve::new(segs, true).expect("envelope tiles the window");
    (curve, sources)
}

/// Minimum of curves that all cover `[a, b]`, merged, with source indices.
pub(crate) fn envelope_over(
    p: &Potential,
    cps: &CriticalPointSet,
    curves: &[PiecewiseCurve],
    a: f64,
    b: f64,
) -> (Vec<Segment>, Vec<usize>) {
    let mut cuts: Vec<f64> = cps.nodes_in(a, b).iter().map(|n| n.0).collect();
    for c in curves {
        cuts.extend(c.segments.iter().map(|s| s.start));
    }
    cuts.push(a);
    cuts.push(b);
    cuts.retain(|&x| x >= a && x <= b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() <= POS_TOL);

    let mut segs: Vec<(Segment, usize)> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let pieces: Vec<Piece> = curves.iter().map(|c| c.piece_at(mid).0).collect();
        for seg in envelope_cell(p, lo, hi, &pieces) {
            let src = pieces
                .iter()
                .position(|q| q.same_as(&seg.piece, 1e-12))
                .unwrap_or(0);
            segs.push((seg, src));
        }
    }

    merge_tagged(segs).into_iter().unzip()
}

/// Join equal neighbours, then drop slivers squeezed between two equal
/// pieces. Slivers come from crossings at maxima where `U` is too flat for
/// the root to be located.
fn merge_tagged(segs: Vec<(Segment, usize)>) -> Vec<(Segment, usize)> {
    let mut merged: Vec<(Segment, usize)> = Vec::new();
    for (s, src) in segs {
        match merged.last_mut() {
            Some((prev, psrc)) if prev.piece.same_as(&s.piece, MERGE_TOL) => {
                prev.end = s.end;
                *psrc = (*psrc).min(src);
            }
            _ => merged.push((s, src)),
        }
    }
    let mut i = 1;
    while i + 1 < merged.len() {
        let (left, mid, right) = (merged[i - 1], merged[i], merged[i + 1]);
        if mid.0.end - mid.0.start < SLIVER && left.0.piece.same_as(&right.0.piece, MERGE_TOL) {
            merged[i - 1].0.end = right.0.end;
            merged[i - 1].1 = left.1.min(right.1);
            merged.drain(i..i + 2);
        } else {
            i += 1;
        }
    }
    merged
}

/// Minimum of the given pieces over `[a, b]`, where `U` is monotone.
fn envelope_cell(p: &Potential, a: f64, b: f64, pieces: &[Piece]) -> Vec<Segment> {
    let cs = pieces
        .iter()
        .filter_map(|q| match q {
            Piece::Shifted(c) => Some(*c),
            _ => None,
        })
        .fold(f64::INFINITY, f64::min);
    let cv = pieces
        .iter()
        .filter_map(|q| match q {
            Piece::Constant(v) => Some(*v),
            _ => None,
        })
        .fold(f64::INFINITY, f64::min);
    let seg = |s, e, piece| Segment { start: s, end: e, piece };
    if cv.is_infinite() {
        return vec![seg(a, b, Piece::Shifted(cs))];
    }
    if cs.is_infinite() {
        return vec![seg(a, b, Piece::Constant(cv))];
    }
    let tol = 1e-12 * (1.0 + cs.abs() + cv.abs());
    let f = |y: f64| p.value(y) + cs - cv;
    let clean = |v: f64| if v.abs() <= tol { 0.0 } else { v };
    let (fa, fb) = (clean(f(a)), clean(f(b)));
    if fa <= 0.0 && fb <= 0.0 {
        let piece = if fa == 0.0 && fb == 0.0 {
            Piece::Constant(cv)
        } else {
            Piece::Shifted(cs)
        };
        return vec![seg(a, b, piece)];
    }
    if fa >= 0.0 && fb >= 0.0 {
        return vec![seg(a, b, Piece::Constant(cv))];
    }
    let r = bisect(f, a, b, fa < 0.0);
    let (left, right) = if fa < 0.0 {
        (Piece::Shifted(cs), Piece::Constant(cv))
    } else {
        (Piece::Constant(cv), Piece::Shifted(cs))
    };
    let mut out = Vec::new();
    if r - a > POS_TOL {
        out.push(seg(a, r, left));
    }
    if b - r > POS_TOL {
        out.push(seg(r, b, right));
    }
    if out.is_empty() {
        out.push(seg(a, b, right));
    }
    out
}

/// Root of a monotone function on `[a, b]` that is negative at `a` when `neg_left`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, neg_left: bool) -> f64 {
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        let m = 0.5 * (a + b);
        let v = f(m);
        if v == 0.0 {
            return m;
        }
        if (v < 0.0) == neg_left {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
