mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use wkam::stochastic::{
    chain_generator, chain_stationary, finite_difference_flux, flux_profile, ldp_convergence, steady_flux, wkb,
    StochasticError,
};
use wkam::{Potential, TrigSeries, TrigTerm};

fn double_well() -> Potential {
    Potential::trig(
        TrigSeries {
            constant: 0.0,
            cos: vec![TrigTerm { frequency: 2.0, coefficient: 1.0 }],
            sin: vec![],
        },
        0.0,
    )
    .unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn untilted_quasipotential_is_the_potential() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..5 {
        let (p, _) = random_trig(&mut rng, Some(0.0), 4);
        let n = 512;
        for eps in [1.0, 0.1, 0.01] {
            let w = wkb(&p, eps, n).unwrap();
            let u: Vec<f64> = (0..n).map(|j| p.value(j as f64 / n as f64)).collect();
            let m = u.iter().cloned().fold(f64::INFINITY, f64::min);
            for (wj, uj) in w.values.iter().zip(&u) {
                assert!((wj - (uj - m)).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn finite_difference_flux_converges_at_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let (p, _) = random_trig(&mut rng, Some(0.5), 4);
    let eps = 0.5;
    let err = |n: usize| {
        let exact = flux_profile(&p, eps, n).unwrap();
        let mean = exact.iter().sum::<f64>() / n as f64;
        finite_difference_flux(&p, eps, n)
            .unwrap()
            .iter()
            .map(|j| (j - mean).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(256), err(512));
    assert!(e1 / e2 > 3.5, "{e1} {e2}");
}

#[test]
fn flux_follows_the_tilt() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..10 {
        let (p, _) = random_trig(&mut rng, None, 4);
        if p.tilt().abs() < 0.05 {
            continue;
        }
        let r = steady_flux(&p, 0.2, 1024).unwrap();
        assert_eq!(r.sign, r.expected_sign);
        assert!(r.max_deviation < 1e-6, "{r:?}");
    }
    let (p, _) = random_trig(&mut rng, Some(0.0), 4);
    assert!(steady_flux(&p, 0.2, 1024).unwrap().relative_to_density <= 1e-8);
}

#[test]
fn three_well_rates_at_unit_noise() {
    let p = three_well_abstract();
    let cps = p.critical_points().unwrap();
    let cm = chain_generator(&cps, 1.0).unwrap();
    let (a, b) = cm.rates();
    for (got, want) in a.iter().zip([-4.0, -10.0, -9.0]) {
        assert!(close(*got, f64::exp(want)));
    }
    for (got, want) in b.iter().zip([-6.0, -5.0, -8.0]) {
        assert!(close(*got, f64::exp(want)));
    }
    for row in cm.generator() {
        assert!(row.iter().sum::<f64>().abs() < 1e-15);
    }
}

#[test]
fn symmetric_wells_have_symmetric_rates() {
    let p = double_well();
    let cps = p.critical_points().unwrap();
    assert_eq!(cps.k(), 2);
    let cm = chain_generator(&cps, 0.3).unwrap();
    for (a, b) in cm.log_a.iter().zip(&cm.log_b) {
        assert!((a - b).abs() < 1e-9);
    }
    let st = chain_stationary(&cm).unwrap();
    assert!((st.numeric[0] - st.numeric[1]).abs() < 1e-9);
}

#[test]
fn untilted_chains_satisfy_detailed_balance() {
    let p = Potential::abstract_extrema(vec![7.0, 1.0, 5.0, 0.0, 10.0, 2.0, 7.0], None).unwrap();
    let cps = p.critical_points().unwrap();
    let cm = chain_generator(&cps, 2.0).unwrap();
    let (a, b) = cm.rates();
    let nu = chain_stationary(&cm).unwrap().numeric;
    let k = nu.len();
    for i in 0..k {
        let j = (i + 1) % k;
        let lhs = nu[i] * a[i];
        let rhs = nu[j] * b[j];
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(rhs), "{lhs} {rhs}");
    }
}

#[test]
fn single_well_has_no_chain() {
    let cps = single_well().critical_points().unwrap();
    assert_eq!(chain_generator(&cps, 0.1).unwrap_err(), StochasticError::SingleWell);
}

#[test]
fn grid_refinement_leaves_ldp_errors_alone() {
    let p = single_well();
    let (_, l) = fw_landscape(&p);
    let eps = [0.2, 0.1, 0.05];
    let a = ldp_convergence(&p, &l, &eps, 1024).unwrap();
    let b = ldp_convergence(&p, &l, &eps, 2048).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert!((ra.sup_error - rb.sup_error).abs() < 1e-4);
    }
}

#[test]
fn double_well_errors_decrease() {
    let p = double_well();
    let (_, l) = fw_landscape(&p);
    let sweep = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
    // Without tilt the quasipotential is exact at every noise level.
    let flat = ldp_convergence(&p, &l, &sweep, 2048).unwrap();
    assert!(flat.rows.iter().all(|r| r.sup_error < 1e-12));
    let tilted = Potential::trig(
        TrigSeries {
            constant: 0.0,
            cos: vec![TrigTerm { frequency: 2.0, coefficient: 1.0 }],
            sin: vec![TrigTerm { frequency: 1.0, coefficient: 0.2 }],
        },
        0.3,
    )
    .unwrap();
    let (_, l) = fw_landscape(&tilted);
    let t = ldp_convergence(&tilted, &l, &sweep, 2048).unwrap();
    assert!(t.decreasing, "{:?}", t.rows);
}

#[test]
fn small_noise_stays_finite() {
    let p = single_well();
    let w = wkb(&p, 1e-4, 4096).unwrap();
    assert!(w.values.iter().all(|v| v.is_finite()));
    assert_eq!(wkb(&p, 5e-5, 4096).unwrap_err(), StochasticError::BelowFloor(5e-5));
    assert_eq!(wkb(&p, 0.0, 4096).unwrap_err(), StochasticError::BadEpsilon(0.0));
}
