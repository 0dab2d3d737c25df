mod common;

use std::f64::consts::PI;

use momentflow::asymptotics::CurvatureExpansion;
use momentflow::stokes::quadratic_branch_a1;
use momentflow::{
    boundary_geometry, evolve_continuation, evolve_ode, evolve_stokes, exact_cubic, exact_disk, is_univalent,
    moment_contour_oracle, oracle_samples, parse_trajectory_csv, rescaled_map, richardson_moment, stokes_invariant,
    trajectory_csv, Complex64, EvolutionConfig, Method, PolynomialMap, RecordSchedule,
};
use proptest::prelude::*;

fn config(t_end: f64, method: Method, records: usize) -> EvolutionConfig {
    EvolutionConfig::new(t_end, method).with_tolerance(1e-10).with_record(RecordSchedule::Log(records))
}

fn arb_map(max_degree: usize) -> impl Strategy<Value = PolynomialMap> {
    (1..=max_degree, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = common::rng(seed);
        common::random_univalent_map(&mut rng, n, 0.9)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_match_contour_oracle(map in arb_map(6)) {
        let n = map.len();
        for k in 0..n {
            let a = richardson_moment(&map, k).unwrap();
            let b = moment_contour_oracle(&map, k, oracle_samples(n, k)).unwrap();
            prop_assert!((a - b).norm() <= 1e-12, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn rescaling_to_unit_area_is_idempotent(map in arb_map(5), scale in 0.1f64..10.0) {
        let big = map.scaled(1.0 / scale);
        let once = rescaled_map(&big, PI * big.area_moment()).unwrap();
        prop_assert!((once.area_moment() - 1.0).abs() < 1e-12);
        let twice = rescaled_map(&once, PI * once.area_moment()).unwrap();
        for (x, y) in once.coeffs().iter().zip(twice.coeffs()) {
            prop_assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn univalent_maps_obey_bieberbach(map in arb_map(6)) {
        prop_assert!(is_univalent(&map));
        for k in 2..=map.degree() {
            prop_assert!(map.coeff(k).norm() <= k as f64 * map.a1());
        }
    }

    #[test]
    fn trajectory_csv_round_trips(map in arb_map(4), t_end in 0.1f64..5.0) {
        let traj = evolve_continuation(&map, &config(t_end, Method::Continuation, 5)).unwrap();
        let back = parse_trajectory_csv(&trajectory_csv(&traj).unwrap()).unwrap();
        prop_assert_eq!(back.samples.len(), traj.samples.len());
        for (a, b) in traj.samples.iter().zip(&back.samples) {
            prop_assert_eq!(a.t, b.t);
            prop_assert_eq!(a.map.coeffs(), b.map.coeffs());
        }
    }
}

#[test]
fn curvature_matches_finite_differences() {
    let mut rng = common::rng(7);
    for _ in 0..20 {
        let map = common::random_univalent_map(&mut rng, 5, 0.9);
        let samples = 512;
        let geo = boundary_geometry(&map, samples).unwrap();
        let h = 1e-4;
        for s in geo.samples.iter().step_by(37) {
            let z = |theta: f64| map.evaluate(Complex64::from_polar(1.0, theta));
            let (zm, z0, zp) = (z(s.theta - h), z(s.theta), z(s.theta + h));
            let d1 = (zp - zm) / (2.0 * h);
            let d2 = (zp - 2.0 * z0 + zm) / (h * h);
            let kappa = (d1.conj() * d2).im / d1.norm().powi(3);
            assert!((kappa - s.kappa).abs() < 1e-5 * s.kappa.abs().max(1.0), "{kappa} vs {}", s.kappa);
        }
    }
}

#[test]
fn exact_cubic_reproduces_its_moments() {
    let mut rng = common::rng(11);
    use rand::Rng;
    for _ in 0..100 {
        let m0 = rng.random_range(1.0..2.0);
        let m1 = rng.random_range(-0.1..0.1);
        let m2 = rng.random_range(0.0..0.05);
        let t = 10f64.powf(rng.random_range(-2.0..3.0));
        let map = exact_cubic(m0, m1, m2, t).unwrap();
        let moments: Vec<Complex64> = (0..3).map(|k| richardson_moment(&map, k).unwrap()).collect();
        assert!((moments[0].re - m0 - 2.0 * t).abs() < 1e-10 * (m0 + 2.0 * t));
        assert!((moments[1] - m1).norm() < 1e-12);
        assert!((moments[2] - m2).norm() < 1e-12);
    }
}

#[test]
fn methods_agree_on_random_maps() {
    let mut rng = common::rng(3);
    for _ in 0..6 {
        let map = common::random_univalent_map(&mut rng, 4, 0.8);
        let a = evolve_ode(&map, &config(50.0, Method::Ode, 11)).unwrap();
        let b = evolve_continuation(&map, &config(50.0, Method::Continuation, 11)).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            for (p, q) in x.map.coeffs().iter().zip(y.map.coeffs()) {
                assert!((p - q).norm() < 1e-7);
            }
        }
    }
}

#[test]
fn area_and_tail_weight_are_monotone() {
    let mut rng = common::rng(5);
    for _ in 0..4 {
        let map = common::random_univalent_map(&mut rng, 5, 0.9);
        let traj = evolve_continuation(&map, &config(1e3, Method::Continuation, 41)).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].a1().powi(2) - 2.0 * w[1].t >= w[0].a1().powi(2) - 2.0 * w[0].t - 1e-9);
            assert!(w[1].g.g <= w[0].g.g + 1e-12);
        }
    }
}

#[test]
fn large_time_growth_is_diffusive() {
    for map in [exact_disk(1.0, 0.0).unwrap(), exact_cubic(1.02, 0.1, 0.05, 0.0).unwrap()] {
        let traj = evolve_continuation(&map, &config(1e4, Method::Continuation, 21)).unwrap();
        let last = traj.last();
        assert!((last.a1() / (2.0 * last.t).sqrt() - 1.0).abs() < 1e-2);
    }
}

#[test]
fn stokes_obeys_bound_and_stays_bounded() {
    let map = PolynomialMap::new(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.05, 0.02),
        Complex64::new(0.0, 0.03),
        Complex64::new(0.01, 0.0),
    ])
    .unwrap();
    let traj = evolve_stokes(&map, &config(1e3, Method::Continuation, 41)).unwrap();
    let c0 = stokes_invariant(&map, 0).unwrap().re;
    let cube_sum: f64 = (1..=map.len()).map(|j| (j as f64).powi(3)).sum();
    let initial_max = map.coeffs()[1..].iter().map(|a| a.norm()).fold(0.0, f64::max);
    for s in &traj.samples {
        assert!(s.a1().powi(2) >= (2.0 * s.t + c0) / cube_sum);
        for k in 2..=map.degree() {
            assert!(s.map.coeff(k).norm() <= 2.0 * initial_max);
        }
        for k in 1..map.len() {
            assert!((stokes_invariant(&s.map, k).unwrap() - stokes_invariant(&map, k).unwrap()).norm() < 1e-10);
        }
    }
}

#[test]
fn quadratic_branches_agree() {
    let disk = evolve_continuation(&exact_disk(1.2, 0.0).unwrap(), &config(100.0, Method::Continuation, 11)).unwrap();
    for s in &disk.samples {
        assert!((s.a1() - exact_disk(1.2, s.t).unwrap().a1()).abs() < 1e-12);
    }
    let map = PolynomialMap::from_real(&[1.0, 0.1]).unwrap();
    let stokes = evolve_stokes(&map, &config(100.0, Method::Continuation, 11)).unwrap();
    for s in &stokes.samples {
        assert!((s.a1() - quadratic_branch_a1(1.02, 0.1, s.t)).abs() < 1e-10);
    }
}

#[test]
fn curvature_expansion_identities_hold() {
    let map = PolynomialMap::from_real(&[1.0, 0.1, 0.05]).unwrap();
    let traj = evolve_continuation(&map, &config(1e3, Method::Continuation, 11)).unwrap();
    let m0 = map.area_moment();
    for s in &traj.samples {
        let expansion = CurvatureExpansion::of(s, m0, 256);
        let (first, second) = expansion.identity_defects(s, m0).unwrap();
        assert!(first < 1e-12 && second < 1e-12, "t = {}: {first:e}, {second:e}", s.t);
    }
}
