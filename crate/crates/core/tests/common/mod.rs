#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use wkam::barriers::BarrierTable;
use wkam::landscape::{build_landscape, fw_boundary};
use wkam::{CriticalPointSet, Landscape, Potential, TrigSeries, TrigTerm};

pub const THREE_WELL: [f64; 7] = [7.0, 1.0, 5.0, 0.0, 10.0, 2.0, 11.0];

pub fn single_well() -> Potential {
    Potential::trig(
        TrigSeries {
            constant: 9.0 / 8.0,
            cos: vec![
                TrigTerm { frequency: 1.0, coefficient: 1.0 },
                TrigTerm { frequency: 0.5, coefficient: -1.0 },
            ],
            sin: vec![],
        },
        -2.0,
    )
    .unwrap()
}

pub fn three_well_abstract() -> Potential {
    Potential::abstract_extrema(THREE_WELL.to_vec(), None).unwrap()
}

pub fn three_well_smooth() -> Potential {
    let v = THREE_WELL.to_vec();
    let pos = Potential::variation_positions(&v);
    Potential::spline(v, Some(pos)).unwrap()
}

pub fn fw_landscape(p: &Potential) -> (CriticalPointSet, Landscape) {
    let cps = p.critical_points().unwrap();
    let bd = fw_boundary(&BarrierTable::new(&cps));
    let l = build_landscape(p, &cps, &bd).unwrap();
    (cps, l)
}

/// Random trigonometric potential with well separated, nondegenerate
/// critical points and at most `max_k` wells.
pub fn random_trig<R: Rng>(rng: &mut R, tilt: Option<f64>, max_k: usize) -> (Potential, CriticalPointSet) {
    loop {
        let terms = rng.gen_range(1..=3);
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
        let b = tilt.unwrap_or_else(|| rng.gen_range(-1.5..1.5));
        let series = TrigSeries {
            constant: rng.gen_range(-1.0..1.0),
            cos,
            sin,
        };
        let Ok(p) = Potential::trig(series, b) else { continue };
        let Ok(cps) = p.critical_points() else { continue };
        if cps.k() > max_k {
            continue;
        }
        let nodes = cps.nodes();
        let spaced = nodes.windows(2).all(|w| w[1].position - w[0].position > 0.02);
        let curved = nodes.iter().all(|c| p.curvature(c.position).abs() > 0.5);
        let distinct = nodes.windows(2).all(|w| (w[1].value - w[0].value).abs() > 1e-3);
        if spaced && curved && distinct {
            return (p, cps);
        }
    }
}

/// Alternating extremal values `M_0, m_0, ..., M_k` for `k` wells.
pub fn random_extrema<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let minima: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut v = Vec::with_capacity(2 * k + 1);
    let first_max = minima[0].max(minima[k - 1]) + rng.gen_range(0.1..6.0);
    v.push(first_max);
    for i in 0..k {
        v.push(minima[i]);
        if i + 1 < k {
            v.push(minima[i].max(minima[i + 1]) + rng.gen_range(0.1..6.0));
        }
    }
    // Closing maximum fixes the tilt; keep it above the last minimum.
    let last = (minima[k - 1] + rng.gen_range(0.1..6.0)).max(first_max + rng.gen_range(-3.0..3.0));
    v.push(last.max(minima[k - 1] + 0.1));
    v
}

#[derive(Copy, Clone, PartialEq)]
struct State(f64, usize);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap().then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra on the grid `a + j / n` of the circle; a step costs the rise
/// of `U` along it.
pub fn grid_barrier(p: &Potential, anchor: f64, n: usize) -> Vec<f64> {
    let x = |j: usize| anchor + j as f64 / n as f64;
    let u: Vec<f64> = (0..=n).map(|j| p.value(x(j))).collect();
    // Increments of U along the lift; they are the same in every period.
    let du: Vec<f64> = (0..n).map(|j| u[j + 1] - u[j]).collect();
    let mut dist = vec![f64::INFINITY; n];
    dist[0] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(State(0.0, 0));
    while let Some(State(d, j)) = heap.pop() {
        if d > dist[j] {
            continue;
        }
        let r = (j + 1) % n;
        let l = (j + n - 1) % n;
        let to_r = d + du[j].max(0.0);
        let to_l = d + (-du[l]).max(0.0);
        if to_r < dist[r] {
            dist[r] = to_r;
            heap.push(State(to_r, r));
        }
        if to_l < dist[l] {
            dist[l] = to_l;
            heap.push(State(to_l, l));
        }
    }
    dist
}
