//! Invariant measure of `dX = -U'(X) dt + sqrt(2 eps) dB` on the circle, its
//! WKB exponent, the steady flux, and the coarse-grained chain on the wells.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::Landscape;
use crate::potential::{CriticalPointSet, Potential};

pub const EPS_FLOOR: f64 = 1e-4;
pub const MIN_GRID: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("noise strength must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("noise strength {0} is below the supported floor {EPS_FLOOR}")]
    BelowFloor(f64),
    #[error("grid needs at least {MIN_GRID} points, got {0}")]
    GridTooSmall(usize),
    #[error("the invariant measure needs a potential with values between extrema")]
    NotSmooth,
    #[error("a single well gives a one-state chain with no transitions")]
    SingleWell,
    #[error("generator has a null space of dimension above one")]
    Singular,
}

/// Values on the uniform grid `x_j = j / N`, `j = 0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
    pub periodic: bool,
}

impl GridFunction {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.values.len() as f64
    }

    pub fn sample(n: usize, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            values: (0..n).map(|j| f(j as f64 / n as f64)).collect(),
            periodic: true,
        }
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log int_a^b e^{f/eps}` by Simpson on one cell, from endpoint and midpoint
/// values of `f`.
pub(crate) fn log_cell(fa: f64, fm: f64, fb: f64, h: f64, eps: f64) -> f64 {
    let m = fa.max(fm).max(fb);
    m / eps
        + (h / 6.0
            * (((fa - m) / eps).exp() + 4.0 * ((fm - m) / eps).exp() + ((fb - m) / eps).exp()))
        .ln()
}

fn check_inputs(p: &Potential, eps: f64, n: usize) -> Result<(), StochasticError> {
    if !p.is_smooth() {
        return Err(StochasticError::NotSmooth);
    }
    if !(eps > 0.0) {
        return Err(StochasticError::BadEpsilon(eps));
    }
    if eps < EPS_FLOOR {
        return Err(StochasticError::BelowFloor(eps));
    }
    if n < MIN_GRID {
        return Err(StochasticError::GridTooSmall(n));
    }
    Ok(())
}

/// Warning text when the grid is too coarse for boundary layers of width `sqrt(eps)`.
pub fn resolution_warning(eps: f64, n: usize) -> Option<String> {
    let need = 8.0 / eps.sqrt();
    ((n as f64) < need).then(|| {
        format!("grid N = {n} may not resolve boundary layers at eps = {eps}; use N >= {}", need.ceil())
    })
}

/// `log int_{x_j}^{x_j + 1} e^{U/eps}` at every grid point.
fn log_window_integrals(p: &Potential, eps: f64, n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let u: Vec<f64> = (0..=n).map(|j| p.value(j as f64 * h)).collect();
    let cells: Vec<f64> = (0..n)
        .map(|j| log_cell(u[j], p.value((j as f64 + 0.5) * h), u[j + 1], h, eps))
        .collect();
    // Cells left of x_j are reused one period later, where U is lower by the tilt.
    let shift = -p.tilt() / eps;
    let mut head = vec![f64::NEG_INFINITY; n + 1];
    for j in 0..n {
        head[j + 1] = log_add_exp(head[j], cells[j]);
    }
    let mut tail = vec![f64::NEG_INFINITY; n + 1];
    for j in (0..n).rev() {
        tail[j] = log_add_exp(tail[j + 1], cells[j]);
    }
    (0..n).map(|j| log_add_exp(tail[j], shift + head[j])).collect()
}

/// `log pi_eps` on the grid, normalized to unit mass under the periodic
/// trapezoid rule.
pub fn log_invariant_measure(p: &Potential, eps: f64, n: usize) -> Result<GridFunction, StochasticError> {
    check_inputs(p, eps, n)?;
    let li = log_window_integrals(p, eps, n);
    let raw: Vec<f64> = (0..n)
        .map(|j| -p.value(j as f64 / n as f64) / eps + li[j])
        .collect();
    let log_z = log_sum_exp(&raw) + (1.0 / n as f64).ln();
    Ok(GridFunction {
        values: raw.iter().map(|v| v - log_z).collect(),
        periodic: true,
    })
}

/// `W_eps = -eps log pi_eps`, shifted to minimum zero.
pub fn wkb(p: &Potential, eps: f64, n: usize) -> Result<GridFunction, StochasticError> {
    let lp = log_invariant_measure(p, eps, n)?;
    let w: Vec<f64> = lp.values.iter().map(|v| -eps * v).collect();
    let m = w.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GridFunction {
        values: w.iter().map(|v| v - m).collect(),
        periodic: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpRow {
    pub eps: f64,
    pub sup_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpTable {
    pub grid: usize,
    pub rows: Vec<LdpRow>,
    /// Each error below the previous one (with 5% slack).
    pub decreasing: bool,
    pub strictly_decreasing: bool,
    pub final_error: f64,
}

/// Sup-norm distance between `W_eps` and `W*` along a list of noise strengths.
pub fn ldp_convergence(
    p: &Potential,
    landscape: &Landscape,
    eps: &[f64],
    n: usize,
) -> Result<LdpTable, StochasticError> {
    let target = GridFunction::sample(n, |x| landscape.wstar_value(p, x));
    let rows = eps
        .iter()
        .map(|&e| {
            Ok(LdpRow {
                eps: e,
                sup_error: wkb(p, e, n)?.sup_distance(&target),
            })
        })
        .collect::<Result<Vec<_>, StochasticError>>()?;
    let pairs = rows.windows(2);
    Ok(LdpTable {
        grid: n,
        decreasing: pairs.clone().all(|w| w[1].sup_error <= 1.05 * w[0].sup_error),
        strictly_decreasing: pairs.clone().all(|w| w[1].sup_error < w[0].sup_error),
        final_error: rows.last().map_or(0.0, |r| r.sup_error),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub mean: f64,
    /// `max |J_j - mean| / |mean|`, or the absolute spread when the mean vanishes.
    pub max_deviation: f64,
    /// Largest `|J|` relative to `max pi`.
    pub relative_to_density: f64,
    pub sign: i8,
    /// Sign of `e^{-tilt/eps} - 1`.
    pub expected_sign: i8,
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// `J = eps pi' + U' pi` on the grid. The `U' pi` terms are cancelled
/// analytically, leaving `eps e^{U(x)/eps} pi(x) (e^{(U(x+1)-U(x))/eps} - 1) / I(x)`.
pub fn steady_flux(p: &Potential, eps: f64, n: usize) -> Result<FluxReport, StochasticError> {
    let flux = flux_profile(p, eps, n)?;
    let lp = log_invariant_measure(p, eps, n)?;
    let mean = flux.iter().sum::<f64>() / n as f64;
    let spread = flux.iter().map(|j| (j - mean).abs()).fold(0.0, f64::max);
    let max_pi = lp.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(FluxReport {
        mean,
        max_deviation: if mean != 0.0 { spread / mean.abs() } else { spread },
        relative_to_density: flux.iter().map(|j| j.abs()).fold(0.0, f64::max) / max_pi,
        sign: sign_of(mean),
        expected_sign: sign_of((-p.tilt() / eps).exp_m1()),
    })
}

/// Pointwise flux values behind [`steady_flux`].
pub fn flux_profile(p: &Potential, eps: f64, n: usize) -> Result<Vec<f64>, StochasticError> {
    check_inputs(p, eps, n)?;
    let lp = log_invariant_measure(p, eps, n)?;
    let li = log_window_integrals(p, eps, n);
    Ok((0..n)
        .map(|j| {
            let x = j as f64 / n as f64;
            let du = p.value(x + 1.0) - p.value(x);
            // e^{U/eps} pi / I = 1 / Z; the bracket is expm1 of the tilt exponent.
            eps * (lp.values[j] + p.value(x) / eps - li[j]).exp() * (du / eps).exp_m1()
        })
        .collect())
}

/// Centered difference `eps (pi_{j+1} - pi_{j-1}) / 2h + U' pi` on quadrature output.
pub fn finite_difference_flux(p: &Potential, eps: f64, n: usize) -> Result<Vec<f64>, StochasticError> {
    let lp = log_invariant_measure(p, eps, n)?;
    let pi: Vec<f64> = lp.values.iter().map(|v| v.exp()).collect();
    let h = 1.0 / n as f64;
    Ok((0..n)
        .map(|j| {
            let d = (pi[(j + 1) % n] - pi[(j + n - 1) % n]) / (2.0 * h);
            eps * d + p.slope(j as f64 * h) * pi[j]
        })
        .collect())
}

/// Cyclic birth-death chain on the wells with Arrhenius rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub eps: f64,
    /// `log a_i`: well `i` to well `i + 1` over the maximum on its right.
    pub log_a: Vec<f64>,
    /// `log b_i`: well `i` to well `i - 1` over the maximum on its left.
    pub log_b: Vec<f64>,
}

impl ChainModel {
    pub fn from_log_rates(log_a: Vec<f64>, log_b: Vec<f64>, eps: f64) -> Result<Self, StochasticError> {
        if log_a.len() < 2 || log_a.len() != log_b.len() {
            return Err(StochasticError::SingleWell);
        }
        Ok(ChainModel { eps, log_a, log_b })
    }

    pub fn k(&self) -> usize {
        self.log_a.len()
    }

    pub fn rates(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.log_a.iter().map(|v| v.exp()).collect(),
            self.log_b.iter().map(|v| v.exp()).collect(),
        )
    }

    fn generator_scaled(&self, shift: f64) -> DMatrix<f64> {
        let k = self.k();
        let mut q = DMatrix::zeros(k, k);
        for i in 0..k {
            // With two wells both neighbours coincide and the rates add.
            q[(i, (i + 1) % k)] += (self.log_a[i] - shift).exp();
            q[(i, (i + k - 1) % k)] += (self.log_b[i] - shift).exp();
        }
        for i in 0..k {
            let off: f64 = (0..k).filter(|&j| j != i).map(|j| q[(i, j)]).sum();
            q[(i, i)] = -off;
        }
        q
    }

    /// Generator `Q`, rows summing to zero.
    pub fn generator(&self) -> Vec<Vec<f64>> {
        let q = self.generator_scaled(0.0);
        (0..self.k())
            .map(|i| (0..self.k()).map(|j| q[(i, j)]).collect())
            .collect()
    }
}

/// Chain on the wells of `cps` with unit prefactors.
pub fn chain_generator(cps: &CriticalPointSet, eps: f64) -> Result<ChainModel, StochasticError> {
    if !(eps > 0.0) {
        return Err(StochasticError::BadEpsilon(eps));
    }
    let k = cps.k();
    if k < 2 {
        return Err(StochasticError::SingleWell);
    }
    ChainModel::from_log_rates(
        (0..k).map(|i| -cps.right_exit(i) / eps).collect(),
        (0..k).map(|i| -cps.left_exit(i) / eps).collect(),
        eps,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStationary {
    pub numeric: Vec<f64>,
    pub closed: Vec<f64>,
    /// `-eps log(nu_i / max nu)` from the closed form.
    pub exponents: Vec<f64>,
    /// `max |numeric - closed| / max closed`.
    pub agreement: f64,
}

/// `log nu_i` up to a constant, summing over the spanning in-trees of the
/// cycle: dropping edge `(j, j+1)` leaves a path on which wells left of `i`
/// step right and wells right of `i` step left.
pub fn closed_form_log_weights(cm: &ChainModel) -> Vec<f64> {
    let k = cm.k();
    (0..k)
        .map(|i| {
            let terms: Vec<f64> = (0..k)
                .map(|j| {
                    let mut s = 0.0;
                    let mut m = (j + 1) % k;
                    while m != i {
                        s += cm.log_a[m];
                        m = (m + 1) % k;
                    }
                    let mut m = (i + 1) % k;
                    while m != (j + 1) % k {
                        s += cm.log_b[m];
                        m = (m + 1) % k;
                    }
                    s
                })
                .collect();
            log_sum_exp(&terms)
        })
        .collect()
}

/// Left null vector of `Q` both from a dense solve and from the closed form.
pub fn chain_stationary(cm: &ChainModel) -> Result<ChainStationary, StochasticError> {
    let k = cm.k();
    let top = cm
        .log_a
        .iter()
        .chain(&cm.log_b)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let q = cm.generator_scaled(top);
    let mut a = q.transpose();
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(k);
    rhs[k - 1] = 1.0;
    let numeric = a.lu().solve(&rhs).ok_or(StochasticError::Singular)?;
    let numeric: Vec<f64> = numeric.iter().cloned().collect();

    let lw = closed_form_log_weights(cm);
    let lz = log_sum_exp(&lw);
    let closed: Vec<f64> = lw.iter().map(|v| (v - lz).exp()).collect();
    let lmax = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exponents = lw.iter().map(|v| -cm.eps * (v - lmax)).collect();
    let cmax = closed.iter().cloned().fold(0.0, f64::max);
    let agreement = numeric
        .iter()
        .zip(&closed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / cmax;
    Ok(ChainStationary {
        numeric,
        closed,
        exponents,
        agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_chain_by_hand() {
        let cm = ChainModel::from_log_rates(vec![0.5f64.ln(), 0.1f64.ln()], vec![0.2f64.ln(), 0.3f64.ln()], 1.0)
            .unwrap();
        // Flow balance: nu_0 (a_0 + b_0) = nu_1 (a_1 + b_1).
        let st = chain_stationary(&cm).unwrap();
        assert!((st.closed[0] - 0.4 / 1.1).abs() < 1e-15);
        assert!(st.agreement < 1e-12);
        let q = cm.generator();
        assert_eq!(q[0][1], 0.7);
    }

    #[test]
    fn log_cell_matches_simpson() {
        let v = log_cell(0.0, 0.5, 1.0, 0.1, 1.0).exp();
        let want = 0.1 / 6.0 * (1.0 + 4.0 * 0.5f64.exp() + 1.0f64.exp());
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn resolution_warning_threshold() {
        assert!(resolution_warning(0.01, 79).is_some());
        assert!(resolution_warning(0.01, 80).is_none());
    }
}
