//! Property tests over randomly generated matrices, measures, models and configs.

use fcslab::asymptotics::{calF_zero_coupling, double_limit_fcs, GammaGrid, LimitMode, ScanAxis};
use fcslab::fcs::{calF, fcs_reservoir_direct, fcs_reservoir_modular, fcs_system, AtomicMeasure};
use fcslab::harness::builders::{build_named_model, NamedBuilder, RhoSpec};
use fcslab::harness::config::{BuilderModel, ExperimentConfig, LambdaSpec, ModelSpec, ScanSpec};
use fcslab::linalg::{
    c64, gibbs_state, hs_inner, identity, random_hermitian, random_matrix, CMatrix, HermitianObservable, C64,
};
use fcslab::model::OpenSystemModel;
use fcslab::modular::{
    commutant_action, left_action, modular_conjugation, relative_modular_power, LiouvilleVector, Sandwich,
    Superoperator,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn positive_definite(d: usize, r: &mut ChaCha8Rng) -> CMatrix {
    let a = random_matrix(d, r);
    &a * a.adjoint() + identity(d) * c64(0.1, 0.0)
}

fn unitary(h: &CMatrix) -> CMatrix {
    HermitianObservable::new(h.clone()).unwrap().spectral_resolution().exp_i(c64(1.0, 0.0))
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn model(n: usize, seed: u64, lambda: f64, rho0: f64) -> OpenSystemModel {
    let system = NamedBuilder::TwoLevel { gap: 2.0, rho: Some(RhoSpec::Diagonal(vec![rho0, 1.0 - rho0])) };
    build_named_model(&system, &NamedBuilder::RandomReservoir { n }, 1.0, lambda, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn superoperator_application_matches_dense(seed in any::<u64>(), d in 1usize..5, terms in 1usize..4) {
        let mut r = rng(seed);
        let sandwiches = (0..terms)
            .map(|k| Sandwich {
                coeff: c64(1.0, k as f64),
                left: Some(random_matrix(d, &mut r)),
                right: (k % 2 == 0).then(|| random_matrix(d, &mut r)),
            })
            .collect();
        let op = Superoperator::from_terms(d, sandwiches).unwrap();
        let x = LiouvilleVector::new(random_matrix(d, &mut r)).unwrap();
        let lazy = op.apply(&x).unwrap();
        let dense = op.dense().unwrap() * fcslab::modular::vectorize(x.matrix());
        let dense = fcslab::modular::unvectorize(&dense, d);
        prop_assert!(max_diff(lazy.matrix(), &dense) < 1e-10);
    }

    #[test]
    fn unitary_sandwich_preserves_norm(seed in any::<u64>(), d in 1usize..6) {
        let mut r = rng(seed);
        let u = unitary(&random_hermitian(d, &mut r));
        let w = unitary(&random_hermitian(d, &mut r));
        let x = LiouvilleVector::new(random_matrix(d, &mut r)).unwrap();
        let y = Superoperator::sandwich(u, w).unwrap().apply(&x).unwrap();
        prop_assert!((y.norm() - x.norm()).abs() < 1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn modular_conjugation_is_antiunitary_involution(seed in any::<u64>(), d in 1usize..6) {
        let mut r = rng(seed);
        let x = LiouvilleVector::new(random_matrix(d, &mut r)).unwrap();
        let y = LiouvilleVector::new(random_matrix(d, &mut r)).unwrap();
        prop_assert_eq!(modular_conjugation(&modular_conjugation(&x)), x.clone());
        let lhs = modular_conjugation(&x).inner(&modular_conjugation(&y));
        prop_assert!((lhs - y.inner(&x)).norm() < 1e-10 * (1.0 + x.norm() * y.norm()));
    }

    #[test]
    fn commutant_commutes_with_left_action(seed in any::<u64>(), d in 1usize..5) {
        let mut r = rng(seed);
        let jaj = commutant_action(&random_matrix(d, &mut r)).unwrap();
        let b = left_action(&random_matrix(d, &mut r)).unwrap();
        let x = LiouvilleVector::new(random_matrix(d, &mut r)).unwrap();
        let ab = jaj.apply(&b.apply(&x).unwrap()).unwrap();
        let ba = b.apply(&jaj.apply(&x).unwrap()).unwrap();
        prop_assert!((&ab - &ba).norm() < 1e-10 * (1.0 + ab.norm()));
    }

    #[test]
    fn relative_modular_powers_compose(seed in any::<u64>(), d in 1usize..5, a in -1.0f64..1.0, b in -1.0f64..1.0, s in -2.0f64..2.0) {
        let mut r = rng(seed);
        let zeta = positive_definite(d, &mut r);
        let xi = positive_definite(d, &mut r);
        let x = LiouvilleVector::new(random_matrix(d, &mut r)).unwrap();
        let (za, zb) = (c64(a, s), c64(b, -s));
        let twice = relative_modular_power(&zeta, &xi, za, &relative_modular_power(&zeta, &xi, zb, &x).unwrap()).unwrap();
        let once = relative_modular_power(&zeta, &xi, za + zb, &x).unwrap();
        prop_assert!((&twice - &once).norm() < 1e-8 * (1.0 + once.norm()));
    }

    #[test]
    fn spectral_resolution_is_complete(seed in any::<u64>(), d in 1usize..7, degenerate in any::<bool>()) {
        let mut r = rng(seed);
        let mut h = random_hermitian(d, &mut r);
        if degenerate {
            h = &h * &h;
            h = fcslab::linalg::kron(&h, &identity(2));
        }
        let obs = HermitianObservable::new(h.clone()).unwrap();
        let res = obs.spectral_resolution();
        let dim = h.nrows();
        let ps = res.projectors();
        let mut sum = CMatrix::zeros(dim, dim);
        for (i, p) in ps.iter().enumerate() {
            prop_assert!(max_diff(&(p * p), p) < 1e-10);
            for q in &ps[i + 1..] {
                prop_assert!(fcslab::linalg::max_abs(&(p * q)) < 1e-10);
            }
            sum += p;
        }
        prop_assert!(max_diff(&sum, &identity(dim)) < 1e-10);
        let radius = res.spectral_radius().max(1.0);
        prop_assert!(max_diff(&res.reconstruct(), &h) < 1e-10 * radius);
        let u = res.exp_i(c64(1.7, 0.0));
        prop_assert!(max_diff(&(&u * u.adjoint()), &identity(dim)) < 1e-9);
    }

    #[test]
    fn gibbs_state_is_kms(seed in any::<u64>(), d in 1usize..6, beta in 0.1f64..3.0) {
        let mut r = rng(seed);
        let h = HermitianObservable::new(random_hermitian(d, &mut r)).unwrap();
        let omega = gibbs_state(&h, beta).unwrap();
        prop_assert!(omega.min_eigenvalue() >= -1e-12);
        prop_assert!((omega.matrix().trace() - c64(1.0, 0.0)).norm() < 1e-12);
        let a = random_matrix(d, &mut r);
        let b = random_matrix(d, &mut r);
        let res = h.spectral_resolution();
        let shifted = res.exp_i(c64(0.0, beta)) * &b * res.exp_i(c64(0.0, -beta));
        // Rounding in the continued product scales with its norm.
        let scale = a.norm() * shifted.norm();
        let lhs = omega.expectation(&(&a * shifted));
        let rhs = omega.expectation(&(&b * &a));
        prop_assert!((lhs - rhs).norm() < 1e-12 * scale, "{} vs scale {}", (lhs - rhs).norm(), scale);
    }

    #[test]
    fn atomic_measures_are_normalized_and_separated(
        raw in prop::collection::vec((-5.0f64..5.0, 0.0f64..1.0), 1..30),
    ) {
        prop_assume!(raw.iter().map(|a| a.1).sum::<f64>() > 1e-3);
        let total: f64 = raw.iter().map(|a| a.1).sum();
        let normalized = raw.iter().map(|&(x, w)| (x, w / total)).collect();
        let mu = AtomicMeasure::new(normalized).unwrap();
        let mass: f64 = mu.atoms().iter().map(|a| a.1).sum();
        prop_assert!((mass - 1.0).abs() < 1e-10);
        prop_assert!(mu.atoms().iter().all(|a| a.1 >= 0.0));
        prop_assert!(mu.atoms().windows(2).all(|w| w[1].0 - w[0].0 > mu.coalescing_tol()));
        prop_assert!((mu.char_function(0.0) - c64(1.0, 0.0)).norm() < 1e-10);
        for g in [-3.0, 0.4, 9.0] {
            prop_assert!(mu.char_function(g).norm() <= 1.0 + 1e-12);
        }
        prop_assert!(mu.kolmogorov_distance(&mu) == 0.0);
    }

    #[test]
    fn kolmogorov_distance_is_a_bounded_symmetric_metric(
        a in prop::collection::vec((-3i32..3, 0.01f64..1.0), 1..8),
        b in prop::collection::vec((-3i32..3, 0.01f64..1.0), 1..8),
        c in prop::collection::vec((-3i32..3, 0.01f64..1.0), 1..8),
    ) {
        let make = |v: &[(i32, f64)]| {
            let total: f64 = v.iter().map(|x| x.1).sum();
            AtomicMeasure::new(v.iter().map(|&(x, w)| (x as f64, w / total)).collect()).unwrap()
        };
        let (a, b, c) = (make(&a), make(&b), make(&c));
        let ab = a.kolmogorov_distance(&b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - b.kolmogorov_distance(&a)).abs() < 1e-15);
        prop_assert!(ab <= a.kolmogorov_distance(&c) + c.kolmogorov_distance(&b) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_identities_on_random_models(seed in any::<u64>(), n in 2usize..5, lambda in -0.6f64..0.6, rho0 in 0.05f64..0.95, t in 0.0f64..12.0) {
        let m = model(n, seed, lambda, rho0);
        prop_assert!(m.first_law_residual(t).abs() < 1e-9);
        prop_assert!(m.heat_r(t).abs() <= m.heat_bound() + 1e-12);
        let p_r = fcs_reservoir_direct(&m, t).unwrap();
        prop_assert!((p_r.mean() - m.heat_r(t)).abs() < 1e-9);
        let p_s = fcs_system(&m, t).unwrap();
        prop_assert!((p_s.mean() - m.heat_s(t)).abs() < 1e-9);
    }

    #[test]
    fn modular_measure_matches_direct_on_random_models(seed in any::<u64>(), n in 2usize..5, lambda in -0.6f64..0.6, t in 0.0f64..12.0) {
        let m = model(n, seed, lambda, 0.7);
        let direct = fcs_reservoir_direct(&m, t).unwrap();
        let modular = fcs_reservoir_modular(&m, t).unwrap();
        prop_assert!(direct.compare(&modular, 1e-8).within(1e-8));
    }

    #[test]
    fn calf_bounds_on_random_models(seed in any::<u64>(), n in 2usize..5, lambda in -0.6f64..0.6, t in 0.0f64..12.0, a in 0.0f64..1.0, s in -3.0f64..3.0) {
        let m = model(n, seed, lambda, 0.7);
        let alpha = c64(a, s);
        let value = calF(&m, t, alpha).unwrap();
        let modulus = calF(&m, t, c64(a, 0.0)).unwrap();
        prop_assert!(modulus.im.abs() < 1e-10);
        prop_assert!(value.norm() <= modulus.re + 1e-9);
        prop_assert!(value.norm() <= 1.0 + a + 1e-9);
        let one = calF(&m, t, c64(1.0, 0.0)).unwrap();
        prop_assert!(one.re <= 2.0 + 1e-9 && one.re >= 0.0);
    }

    #[test]
    fn zero_coupling_calf_is_char_function_of_double_limit(seed in any::<u64>(), rho0 in 0.0f64..1.0, gamma in -10.0f64..10.0) {
        let m = model(2, seed, 0.1, rho0);
        let cf: C64 = double_limit_fcs(&m).unwrap().char_function(gamma);
        prop_assert!((calF_zero_coupling(&m, gamma) - cf).norm() < 1e-12);
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        beta in 0.01f64..10.0,
        lambdas in prop::collection::vec(-1.0f64..1.0, 1..4),
        times in prop::collection::vec(0.0f64..100.0, 0..5),
        n in 1usize..7,
        g in -2.0f64..2.0,
        with_scan in any::<bool>(),
        single in any::<bool>(),
    ) {
        let cfg = ExperimentConfig {
            model: ModelSpec::Builder(BuilderModel {
                system: NamedBuilder::TwoLevel { gap: 2.0, rho: Some(RhoSpec::Diagonal(vec![0.6, 0.4])) },
                reservoir: NamedBuilder::SpinChainReservoir { n, h: 1.0, g },
            }),
            beta,
            lambda: if single { LambdaSpec::Single(lambdas[0]) } else { LambdaSpec::List(lambdas) },
            time_grid: times,
            scan: with_scan.then(|| ScanSpec {
                axis: ScanAxis::Size,
                values: vec![2.0, 3.0],
                limit: LimitMode::MixingIdealized,
                gamma_grid: GammaGrid { min: -5.0, max: 5.0, points: 11 },
            }),
            output_dir: "out/prop".into(),
            seed,
        };
        let once = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(&once, &cfg);
        let twice = ExperimentConfig::from_json(&once.to_json()).unwrap();
        prop_assert_eq!(twice, cfg);
    }
}

#[test]
fn hs_inner_is_conjugate_symmetric() {
    let mut r = rng(3);
    let x = random_matrix(4, &mut r);
    let y = random_matrix(4, &mut r);
    assert!((hs_inner(&x, &y) - hs_inner(&y, &x).conj()).norm() < 1e-12);
}
