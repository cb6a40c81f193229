mod common;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use wkam::evolution::{
    evolve_fokker_planck, evolve_hje, exchange_limits_experiment, gibbs_density, mass, EvolutionError,
    FokkerPlanck,
};
use wkam::stochastic::log_invariant_measure;
use wkam::{GridFunction, Scheme, SchemeConfig};

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn random_grid<R: Rng>(rng: &mut R, n: usize) -> GridFunction {
    let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
    GridFunction::sample(n, |x| a * (2.0 * PI * x).sin() + b * (2.0 * PI * x).cos() + c * (6.0 * PI * x).cos())
}

#[test]
fn schemes_are_monotone_and_non_expansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let (p, _) = random_trig(&mut rng, None, 4);
    for scheme in [Scheme::LaxFriedrichs, Scheme::Godunov] {
        let cfg = SchemeConfig::new(256, 0.5, scheme);
        for _ in 0..5 {
            let u = random_grid(&mut rng, 256);
            let bump = random_grid(&mut rng, 256);
            let v = GridFunction {
                values: u.values.iter().zip(&bump.values).map(|(a, b)| a + b.abs()).collect(),
                periodic: true,
            };
            let su = evolve_hje(&u, &p, &cfg).unwrap().u;
            let sv = evolve_hje(&v, &p, &cfg).unwrap().u;
            assert!(su.values.iter().zip(&sv.values).all(|(a, b)| a <= &(b + 1e-12)));
            assert!(su.sup_distance(&sv) <= u.sup_distance(&v) + 1e-12);
        }
    }
}

#[test]
fn perturbed_landscape_approaches_the_flow_of_the_landscape() {
    let p = single_well();
    let (_, l) = fw_landscape(&p);
    let n = 512;
    let w = GridFunction::sample(n, |x| l.wstar_value(&p, x));
    let u = GridFunction::sample(n, |x| l.wstar_value(&p, x) + 0.3 * (2.0 * PI * x).sin());
    let mut last = u.sup_distance(&w);
    for t in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let cfg = SchemeConfig::new(n, t, Scheme::Godunov);
        let d = evolve_hje(&u, &p, &cfg).unwrap().u.sup_distance(&evolve_hje(&w, &p, &cfg).unwrap().u);
        assert!(d <= last + 1e-6, "{d} after {last}");
        last = d;
    }
}

#[test]
fn invariant_measure_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    for _ in 0..3 {
        let (p, _) = random_trig(&mut rng, None, 4);
        let n = 400;
        let pi: Vec<f64> = log_invariant_measure(&p, 0.3, n)
            .unwrap()
            .values
            .iter()
            .map(|v| v.exp())
            .collect();
        let cfg = SchemeConfig {
            eps: Some(0.3),
            ..SchemeConfig::new(n, 1.0, Scheme::Godunov)
        };
        let run = evolve_fokker_planck(&GridFunction { values: pi.clone(), periodic: true }, &p, &cfg).unwrap();
        assert!(l1(&run.rho.values, &pi) <= 1e-6);
    }
}

#[test]
fn mass_survives_a_thousand_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let (p, _) = random_trig(&mut rng, None, 4);
    let n = 1000;
    let cfg = SchemeConfig {
        eps: Some(0.1),
        ..SchemeConfig::new(n, 1.0, Scheme::Godunov)
    };
    let run = evolve_fokker_planck(&GridFunction::sample(n, |_| 1.0), &p, &cfg).unwrap();
    assert_eq!(run.steps, 1000);
    assert!((mass(&run.rho.values) - 1.0).abs() < 1e-12);
    assert!(run.rho.values.iter().all(|v| *v >= 0.0));
}

#[test]
fn untilted_density_relaxes_to_gibbs() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let (p, _) = random_trig(&mut rng, Some(0.0), 2);
    let n = 256;
    let eps = 0.5;
    let cfg = SchemeConfig {
        eps: Some(eps),
        ..SchemeConfig::new(n, 40.0, Scheme::Godunov)
    };
    let run = evolve_fokker_planck(&GridFunction::sample(n, |_| 1.0), &p, &cfg).unwrap();
    let gibbs = gibbs_density(&GridFunction::sample(n, |x| p.value(x)), eps);
    assert!(l1(&run.rho.values, &gibbs.values) < 1e-6);
}

#[test]
fn implicit_step_preserves_positivity_for_rough_data() {
    let p = three_well_smooth();
    let fp = FokkerPlanck::new(&p, 0.05, 300).unwrap();
    let mut rho = vec![0.0; 300];
    rho[17] = 300.0;
    for _ in 0..50 {
        rho = fp.implicit_step(&rho, 1.0 / 300.0);
        assert!(rho.iter().all(|v| *v >= 0.0));
    }
    assert!((mass(&rho) - 1.0).abs() < 1e-12);
}

#[test]
fn path_a_shrinks_with_noise() {
    let p = single_well();
    let (_, l) = fw_landscape(&p);
    let r = exchange_limits_experiment(&p, &l, &[0.2, 0.1, 0.05], 0.5, 512, Scheme::Godunov).unwrap();
    assert!(r.path_a_shrinks, "{:?}", r.rows);
}

#[test]
fn bad_inputs_are_refused() {
    let p = single_well();
    let bad = SchemeConfig {
        cfl: 1.5,
        ..SchemeConfig::new(128, 1.0, Scheme::Godunov)
    };
    assert!(matches!(
        evolve_hje(&GridFunction::sample(128, |_| 0.0), &p, &bad),
        Err(EvolutionError::BadCfl(_))
    ));
    let cfg = SchemeConfig {
        eps: Some(0.1),
        ..SchemeConfig::new(128, 1.0, Scheme::Godunov)
    };
    assert!(matches!(
        evolve_fokker_planck(&GridFunction::sample(128, |_| 2.0), &p, &cfg),
        Err(EvolutionError::BadDensity)
    ));
}

#[test]
fn relaxation_toward_the_invariant_measure_is_monotone() {
    let p = single_well();
    let (_, l) = fw_landscape(&p);
    let n = 500;
    let eps = 0.1;
    let pi: Vec<f64> = log_invariant_measure(&p, eps, n)
        .unwrap()
        .values
        .iter()
        .map(|v| v.exp())
        .collect();
    let rho0 = gibbs_density(&GridFunction::sample(n, |x| l.wstar_value(&p, x)), eps);
    let mut last = l1(&rho0.values, &pi);
    // Whole multiples of dt = 1/N, so each run extends the previous one.
    for t in [0.1, 0.2, 0.4, 0.8] {
        let cfg = SchemeConfig {
            eps: Some(eps),
            ..SchemeConfig::new(n, t, Scheme::Godunov)
        };
        let d = l1(&evolve_fokker_planck(&rho0, &p, &cfg).unwrap().rho.values, &pi);
        assert!(d <= last + 1e-14, "{d} after {last}");
        last = d;
    }
}
