//! Boundary data on the Aubry set and the weak KAM solutions it generates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barriers::{least_action_curve, BarrierError, BarrierTable};
use crate::curve::{envelope_over, lower_envelope, CurveError, Kink, Piece, PiecewiseCurve, Segment};
use crate::potential::{CriticalPointSet, CriticalRef, Potential, PotentialError};

pub const KAM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandscapeError {
    #[error("boundary data violates the discrete weak KAM condition at {at:?} (residual {residual:e})")]
    Inconsistent { at: CriticalRef, residual: f64 },
    #[error("boundary data has no values")]
    Empty,
    #[error("boundary data needs a value at every minimum")]
    IncompleteMinima,
    #[error("boundary data has length {got}, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    FreidlinWentzell,
    Zero,
    User,
    Induced,
}

/// Values prescribed at some of the critical points of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    /// Value at minimum `i`, if prescribed.
    pub minima: Vec<Option<f64>>,
    /// Value at maximum `i` (left of minimum `i`), if prescribed.
    pub maxima: Vec<Option<f64>>,
    pub provenance: Provenance,
    /// For Freidlin–Wentzell data: the anchors attaining each minimum.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub argmins: Vec<Vec<usize>>,
}

impl BoundaryData {
    pub fn on_minima(values: Vec<f64>, provenance: Provenance) -> Self {
        let k = values.len();
        BoundaryData {
            minima: values.into_iter().map(Some).collect(),
            maxima: vec![None; k],
            provenance,
            argmins: Vec::new(),
        }
    }

    pub fn zero(k: usize) -> Self {
        BoundaryData::on_minima(vec![0.0; k], Provenance::Zero)
    }

    /// Prescribed points and their values, minima before maxima of the same index.
    pub fn entries(&self) -> Vec<(CriticalRef, f64)> {
        let mut out = Vec::new();
        for i in 0..self.minima.len() {
            if let Some(v) = self.maxima[i] {
                out.push((CriticalRef::Max(i), v));
            }
            if let Some(v) = self.minima[i] {
                out.push((CriticalRef::Min(i), v));
            }
        }
        out
    }

    /// Values at all minima, if every minimum is prescribed.
    pub fn minima_values(&self) -> Option<Vec<f64>> {
        self.minima.iter().copied().collect()
    }

    fn check_shape(&self, cps: &CriticalPointSet) -> Result<(), LandscapeError> {
        let k = cps.k();
        if self.minima.len() != k || self.maxima.len() != k {
            return Err(LandscapeError::WrongLength {
                got: self.minima.len(),
                expected: k,
            });
        }
        if self.entries().is_empty() {
            return Err(LandscapeError::Empty);
        }
        Ok(())
    }

    fn with_entries(k: usize, entries: &[(CriticalRef, f64)], provenance: Provenance) -> Self {
        let mut bd = BoundaryData {
            minima: vec![None; k],
            maxima: vec![None; k],
            provenance,
            argmins: Vec::new(),
        };
        for &(r, v) in entries {
            match r {
                CriticalRef::Min(i) => bd.minima[i] = Some(v),
                CriticalRef::Max(i) => bd.maxima[i] = Some(v),
            }
        }
        bd
    }
}

/// Freidlin–Wentzell boundary values `W_i = min_j (h~_R(x_i; x_{j+1}) + h~_L(x_i; x_j))`.
pub fn fw_boundary(table: &BarrierTable) -> BoundaryData {
    let k = table.k;
    let mut values = Vec::with_capacity(k);
    let mut argmins = Vec::with_capacity(k);
    for i in 0..k {
        let costs: Vec<f64> = (0..k).map(|j| table.hr_tilde[i][j] + table.hl_tilde[i][j]).collect();
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        argmins.push(
            (0..k)
                .filter(|&j| costs[j] - best <= KAM_TOL * (1.0 + best.abs()))
                .collect(),
        );
        // `+ 0.0` turns an empty-sum `-0.0` into `0.0`.
        values.push(best + 0.0);
    }
    let mut bd = BoundaryData::on_minima(values, Provenance::FreidlinWentzell);
    bd.argmins = argmins;
    bd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KamCheck {
    /// `W_i - min_j (W_j + h(x_i; x_j))` for each prescribed point.
    pub residuals: Vec<(CriticalRef, f64)>,
    pub consistent: bool,
}

fn kam_tol(entries: &[(CriticalRef, f64)]) -> f64 {
    KAM_TOL * (1.0 + entries.iter().map(|e| e.1.abs()).fold(0.0, f64::max))
}

/// Check `W_i = min_j (W_j + h(x_i; x_j))` over the prescribed points.
pub fn check_discrete_weak_kam(bd: &BoundaryData, cps: &CriticalPointSet) -> KamCheck {
    let entries = bd.entries();
    let residuals: Vec<(CriticalRef, f64)> = entries
        .iter()
        .map(|&(ri, wi)| {
            let best = entries
                .iter()
                .map(|&(rj, wj)| wj + cps.node_barrier(ri, rj))
                .fold(f64::INFINITY, f64::min);
            (ri, wi - best)
        })
        .collect();
    let tol = kam_tol(&entries);
    let consistent = residuals.iter().all(|(_, r)| r.abs() <= tol);
    KamCheck {
        residuals,
        consistent,
    }
}

/// Largest consistent data below the input: `W~_i = min_j (W_j + h(x_i; x_j))`.
pub fn make_consistent(bd: &BoundaryData, cps: &CriticalPointSet) -> BoundaryData {
    let entries = bd.entries();
    let fixed: Vec<(CriticalRef, f64)> = entries
        .iter()
        .map(|&(ri, _)| {
            let v = entries
                .iter()
                .map(|&(rj, wj)| wj + cps.node_barrier(ri, rj))
                .fold(f64::INFINITY, f64::min);
            (ri, v)
        })
        .collect();
    BoundaryData::with_entries(cps.k(), &fixed, Provenance::Induced)
}

/// A weak KAM solution of negative type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub boundary: BoundaryData,
    pub w: PiecewiseCurve,
    /// `W - min W`.
    pub wstar: PiecewiseCurve,
    pub offset: f64,
    /// For each segment of `w`, the anchor whose lifted barrier is active.
    pub sources: Vec<CriticalRef>,
    pub kinks: Vec<Kink>,
}

impl Landscape {
    pub fn value(&self, p: &Potential, x: f64) -> f64 {
        self.w.value(p, x)
    }

    pub fn wstar_value(&self, p: &Potential, x: f64) -> f64 {
        self.wstar.value(p, x)
    }
}

fn anchor_position(cps: &CriticalPointSet, r: CriticalRef) -> f64 {
    cps.point(r).position
}

/// `W(x) = min_{j in D} (W_j + h(x; x_j))` over the prescribed points `D`.
pub fn build_landscape(
    p: &Potential,
    cps: &CriticalPointSet,
    bd: &BoundaryData,
) -> Result<Landscape, LandscapeError> {
    bd.check_shape(cps)?;
    let check = check_discrete_weak_kam(bd, cps);
    let tol = kam_tol(&bd.entries());
    if let Some(&(at, residual)) = check.residuals.iter().find(|(_, r)| r.abs() > tol) {
        return Err(LandscapeError::Inconsistent { at, residual });
    }
    let entries = bd.entries();
    let mut lifted = Vec::with_capacity(entries.len());
    for &(r, v) in &entries {
        let lac = least_action_curve(p, cps, anchor_position(cps, r))?;
        lifted.push(lac.curve.shifted(v));
    }
    let (w, src) = lower_envelope(p, cps, &lifted);
    let sources = src.into_iter().map(|i| entries[i].0).collect();
    let offset = cps
        .minima()
        .map(|m| w.value(p, m.position))
        .fold(f64::INFINITY, f64::min);
    let wstar = w.shifted(-offset);
    let kinks = w.kinks(p);
    Ok(Landscape {
        boundary: bd.clone(),
        w,
        wstar,
        offset,
        sources,
        kinks,
    })
}

/// Same solution assembled well by well:
/// `W = min(W_i + h_R(.; x_i), W_{i+1} + h_L(.; x_{i+1}))` on `[x_i, x_{i+1}]`.
pub fn build_landscape_local(
    p: &Potential,
    cps: &CriticalPointSet,
    bd: &BoundaryData,
) -> Result<PiecewiseCurve, LandscapeError> {
    bd.check_shape(cps)?;
    let values = bd.minima_values().ok_or(LandscapeError::IncompleteMinima)?;
    let only_minima = BoundaryData::on_minima(values.clone(), bd.provenance);
    let check = check_discrete_weak_kam(&only_minima, cps);
    let tol = kam_tol(&only_minima.entries());
    if let Some(&(at, residual)) = check.residuals.iter().find(|(_, r)| r.abs() > tol) {
        return Err(LandscapeError::Inconsistent { at, residual });
    }
    let k = cps.k();
    let mut segs: Vec<Segment> = Vec::new();
    for i in 0..k {
        let a = cps.minimum(i).position;
        let b = if i + 1 < k {
            cps.minimum(i + 1).position
        } else {
            cps.minimum(0).position + 1.0
        };
        let right = crate::barriers::right_barrier(p, cps, i)?
            .restricted(a, b)
            .shifted(values[i]);
        // The left barrier from x_{i+1}, read over [x_i, x_{i+1}].
        let left_anchor = (i + 1) % k;
        let wrap = if i + 1 < k { 0.0 } else { 1.0 };
        let left = crate::barriers::left_barrier(p, cps, left_anchor)?;
        let left_segs: Vec<Segment> = left
            .segments()
            .iter()
            .map(|s| Segment {
                start: s.start + wrap,
                end: s.end + wrap,
                piece: match s.piece {
                    Piece::Shifted(c) => Piece::Shifted(c + wrap * p.tilt()),
                    c => c,
                },
            })
            .collect();
        let left = PiecewiseCurve::new(left_segs, false)?
            .restricted(a, b)
            .shifted(values[left_anchor]);
        segs.extend(two_branch_min(p, cps, &right, &left, a, b));
    }
    let n = segs.len();
    segs[n - 1].end = segs[0].start + 1.0;
    let curve = PiecewiseCurve::new(segs, true)?;
    Ok(curve.rotated(p.tilt(), cps.window_start()))
}

fn two_branch_min(
    p: &Potential,
    cps: &CriticalPointSet,
    f: &PiecewiseCurve,
    g: &PiecewiseCurve,
    a: f64,
    b: f64,
) -> Vec<Segment> {
    envelope_over(p, cps, &[f.clone(), g.clone()], a, b).0
}

/// Exact minimum of a curve: pieces are monotone between critical points.
pub fn curve_min(p: &Potential, cps: &CriticalPointSet, c: &PiecewiseCurve) -> f64 {
    let mut xs: Vec<f64> = c.segments().iter().flat_map(|s| [s.start, s.end]).collect();
    xs.extend(cps.nodes_in(c.start(), c.end()).iter().map(|n| n.0));
    xs.into_iter()
        .map(|x| {
            let v = c.value(p, x);
            if c.is_periodic() || x < c.end() {
                v
            } else {
                c.segments()[c.segments().len() - 1].piece.value(p, x)
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedCheck {
    /// `W` read at the maxima.
    pub induced_maxima: Vec<f64>,
    /// Largest difference between `W` and the envelope over all critical points.
    pub max_difference: f64,
    pub holds: bool,
}

/// Rebuild `W` using every critical point as an anchor, with values read from `W`.
pub fn extended_representation(
    p: &Potential,
    cps: &CriticalPointSet,
    landscape: &Landscape,
) -> Result<ExtendedCheck, LandscapeError> {
    let k = cps.k();
    let induced_maxima: Vec<f64> = (0..k)
        .map(|i| landscape.w.value(p, cps.maximum(i).position))
        .collect();
    let minima: Vec<f64> = (0..k)
        .map(|i| landscape.w.value(p, cps.minimum(i).position))
        .collect();
    let bd = BoundaryData {
        minima: minima.into_iter().map(Some).collect(),
        maxima: induced_maxima.iter().copied().map(Some).collect(),
        provenance: Provenance::Induced,
        argmins: Vec::new(),
    };
    let ext = build_landscape(p, cps, &bd)?;
    let max_difference = (0..2048)
        .map(|j| {
            let x = cps.window_start() + j as f64 / 2048.0;
            (ext.w.value(p, x) - landscape.w.value(p, x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(ExtendedCheck {
        induced_maxima,
        max_difference,
        holds: max_difference <= KAM_TOL,
    })
}

/// Anything that can be read pointwise as a function on the circle.
pub trait CircleFunction {
    fn at(&self, p: &Potential, x: f64) -> f64;
}

impl CircleFunction for PiecewiseCurve {
    fn at(&self, p: &Potential, x: f64) -> f64 {
        self.value(p, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityCheck {
    /// Largest `candidate - W` over the samples.
    pub max_excess: f64,
    pub dominated: bool,
}

/// Check `candidate <= W` on `samples` points of one period.
pub fn check_maximality(
    p: &Potential,
    landscape: &Landscape,
    candidate: &dyn CircleFunction,
    samples: usize,
) -> MaximalityCheck {
    let x0 = landscape.w.start();
    let max_excess = (0..samples)
        .map(|j| {
            let x = x0 + j as f64 / samples as f64;
            candidate.at(p, x) - landscape.w.value(p, x)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    MaximalityCheck {
        max_excess,
        dominated: max_excess <= KAM_TOL,
    }
}

/// Positive-type solution `-W_hat`, where `W_hat` is the Freidlin–Wentzell
/// landscape of the reversed potential `-U`. Curves are written over `U`.
pub fn positive_type_landscape(p: &Potential) -> Result<Landscape, LandscapeError> {
    let rev = p.reversed();
    let cps_rev = rev.critical_points()?;
    let table = BarrierTable::new(&cps_rev);
    let bd = fw_boundary(&table);
    let hat = build_landscape(&rev, &cps_rev, &bd)?;
    let cps = p.critical_points()?;
    let w = hat.w.negated().rotated(p.tilt(), cps.window_start());
    let top = curve_min(p, &cps, &w);
    let wstar = w.shifted(-top);
    let kinks = w.kinks(p);
    Ok(Landscape {
        boundary: hat.boundary,
        sources: Vec::new(),
        w,
        wstar,
        offset: top,
        kinks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_well() -> (Potential, CriticalPointSet) {
        let p = Potential::abstract_extrema(vec![7.0, 1.0, 5.0, 0.0, 10.0, 2.0, 11.0], None).unwrap();
        let cps = p.critical_points().unwrap();
        (p, cps)
    }

    #[test]
    fn fw_values_on_three_wells() {
        let (_, cps) = three_well();
        let bd = fw_boundary(&BarrierTable::new(&cps));
        assert_eq!(bd.minima_values().unwrap(), vec![13.0, 12.0, 11.0]);
        assert_eq!(bd.argmins, vec![vec![2], vec![2], vec![1]]);
    }

    #[test]
    fn kam_check_examples() {
        let (_, cps) = three_well();
        let ok = BoundaryData::on_minima(vec![13.0, 12.0, 11.0], Provenance::User);
        assert!(check_discrete_weak_kam(&ok, &cps).consistent);
        let also_ok = BoundaryData::on_minima(vec![0.0, 0.0, -5.0], Provenance::User);
        assert!(check_discrete_weak_kam(&also_ok, &cps).consistent);
        let bad = BoundaryData::on_minima(vec![0.0, 0.0, -10.0], Provenance::User);
        let chk = check_discrete_weak_kam(&bad, &cps);
        assert!(!chk.consistent);
        assert_eq!(chk.residuals[0].1, 1.0);
        assert_eq!(chk.residuals[1].1, 2.0);
    }

    #[test]
    fn make_consistent_single_point() {
        let (_, cps) = three_well();
        let mut bd = BoundaryData::zero(3);
        bd.minima = vec![None, Some(0.0), None];
        let out = make_consistent(&bd, &cps);
        assert_eq!(out.minima, vec![None, Some(0.0), None]);
    }

    #[test]
    fn inconsistent_data_is_rejected() {
        let (p, cps) = three_well();
        let bad = BoundaryData::on_minima(vec![0.0, 0.0, -10.0], Provenance::User);
        assert!(matches!(
            build_landscape(&p, &cps, &bad),
            Err(LandscapeError::Inconsistent { .. })
        ));
    }
}
