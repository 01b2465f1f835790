//! Library results against independent evaluations: values frozen from a
//! separate numpy/scipy computation, and brute-force oracles that use
//! nalgebra's Padé matrix exponential instead of spectral calculus.

use fcslab::asymptotics::{
    calF_limit, calF_liouvillean_residual, calF_zero_coupling, cesaro_fcs, double_limit_fcs, fcs_limit_idealized,
    g_functions_continuation, scan, weakly_decreasing, LimitProjection, ScanAxis, ScanMetric, ScanPoint,
};
use fcslab::fcs::{calF, fcs_reservoir_direct, fcs_reservoir_modular, fcs_system, AtomicMeasure, Subsystem};
use fcslab::harness::builders::{build_named_model, pauli_x, pauli_z, random_reservoir, NamedBuilder, RhoSpec};
use fcslab::linalg::{c64, hs_inner, identity, kron, CMatrix, DensityMatrix, HermitianObservable, C64};
use fcslab::model::{build_model, OpenSystemModel};
use fcslab::modular::{araki_vector, free_equilibrium_vector, hat_vector, reference_vector};

fn q1r3(lambda: f64) -> OpenSystemModel {
    let system = NamedBuilder::TwoLevel { gap: 2.0, rho: Some(RhoSpec::Diagonal(vec![0.75, 0.25])) };
    let reservoir = NamedBuilder::SpinChainReservoir { n: 3, h: 1.0, g: 0.3 };
    build_named_model(&system, &reservoir, 1.0, lambda, 0).unwrap()
}

fn random_model() -> OpenSystemModel {
    let system = NamedBuilder::TwoLevel { gap: 2.0, rho: Some(RhoSpec::Diagonal(vec![0.75, 0.25])) };
    let reservoir = NamedBuilder::RandomReservoir { n: 6 };
    build_named_model(&system, &reservoir, 1.0, 0.3, 7).unwrap()
}

/// `e^{zH}` by Padé approximation.
fn expm(h: &CMatrix, z: C64) -> CMatrix {
    (h * z).exp()
}

/// Eigenprojections grouped at `1e-9`, by plain eigendecomposition.
fn brute_projectors(h: &CMatrix) -> Vec<(f64, CMatrix)> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut idx: Vec<usize> = (0..h.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut out: Vec<(f64, CMatrix)> = Vec::new();
    for i in idx {
        let v = eig.eigenvectors.column(i).clone_owned();
        let p = &v * v.adjoint();
        match out.last_mut() {
            Some((e, acc)) if (eig.eigenvalues[i] - *e).abs() < 1e-9 => *acc += p,
            _ => out.push((eig.eigenvalues[i], p)),
        }
    }
    out
}

/// Reservoir measure by the explicit double sum over projector pairs.
fn brute_reservoir(m: &OpenSystemModel, t: f64) -> AtomicMeasure {
    let d_s = m.system_dim();
    let h = m.h_lambda().matrix();
    let u = expm(h, c64(0.0, t));
    let omega_r = m.omega_r().matrix();
    let mut atoms = Vec::new();
    for (e, p) in brute_projectors(m.h_r().matrix()) {
        let sigma = kron(m.rho_s().matrix(), &(&p * omega_r * &p));
        for (e2, p2) in brute_projectors(m.h_r().matrix()) {
            let evolved = &u * kron(&identity(d_s), &p2) * u.adjoint();
            atoms.push((e - e2, (sigma.clone() * evolved).trace().re));
        }
    }
    AtomicMeasure::new(atoms).unwrap()
}

fn brute_system(m: &OpenSystemModel, t: f64) -> AtomicMeasure {
    let d_r = m.reservoir_dim();
    let u = expm(m.h_lambda().matrix(), c64(0.0, t));
    let mut atoms = Vec::new();
    for (e, p) in brute_projectors(m.h_s().matrix()) {
        let sigma = kron(&(&p * m.rho_s().matrix() * &p), m.omega_r().matrix());
        for (e2, p2) in brute_projectors(m.h_s().matrix()) {
            let evolved = &u * kron(&p2, &identity(d_r)) * u.adjoint();
            atoms.push((e2 - e, (sigma.clone() * evolved).trace().re));
        }
    }
    AtomicMeasure::new(atoms).unwrap()
}

fn assert_atoms(mu: &AtomicMeasure, expect: &[(f64, f64)], loc_tol: f64, w_tol: f64) {
    assert_eq!(mu.len(), expect.len(), "{mu:?}");
    for ((x, w), (ex, ew)) in mu.atoms().iter().zip(expect) {
        assert!((x - ex).abs() < loc_tol, "location {x} vs {ex}");
        assert!((w - ew).abs() < w_tol, "weight {w} vs {ew} at {x}");
    }
}

#[test]
fn fixture_system_measure_matches_frozen_values() {
    let mu = fcs_system(&q1r3(0.1), 5.0).unwrap();
    assert_atoms(
        &mu,
        &[(-2.0, 0.0060378843708065845), (0.0, 0.9878501010612778), (2.0, 0.006112014567916213)],
        1e-12,
        1e-10,
    );
}

const RESERVOIR_T5: [(f64, f64); 27] = [
    (-3.179667396, 1.6389988980831283e-09),
    (-2.55221915, 3.488582786676405e-06),
    (-2.089833698, 5.980840647457571e-06),
    (-1.924770903, 2.7999524013516482e-08),
    (-1.717281944, 4.702831369794364e-06),
    (-1.462385452, 0.003858561588789736),
    (-1.089833698, 0.0030212139347928187),
    (-1.0, 1.3209490666244956e-07),
    (-0.834937205, 1.9948634863359467e-05),
    (-0.627448246, 0.00026081246253390703),
    (-0.462385452, 3.473689067270372e-05),
    (-0.372551754, 5.512635945926936e-05),
    (-0.254896493, 4.133613281892259e-08),
    (0.0, 0.9876557478866002),
    (0.254896493, 8.652689491737763e-08),
    (0.372551754, 3.7980628037385666e-05),
    (0.462385452, 2.187658315563409e-05),
    (0.627448246, 0.00025759010479915696),
    (0.834937205, 8.655747125827355e-06),
    (1.0, 1.3125413848259852e-07),
    (1.089833698, 0.0021519791888128933),
    (1.462385452, 0.0025993097486038427),
    (1.717281944, 8.444099345126952e-07),
    (1.924770903, 1.103455139079946e-08),
    (2.089833698, 7.398760821451473e-07),
    (2.55221915, 2.717905423914896e-07),
    (3.179667396, 2.5243248463878877e-11),
];

#[test]
fn fixture_reservoir_measure_matches_frozen_values() {
    let m = q1r3(0.1);
    let direct = fcs_reservoir_direct(&m, 5.0).unwrap();
    // Frozen locations were rounded to nine decimals.
    assert_atoms(&direct, &RESERVOIR_T5, 1e-9, 1e-10);
    let modular = fcs_reservoir_modular(&m, 5.0).unwrap();
    assert_atoms(&modular, &RESERVOIR_T5, 1e-9, 1e-10);
}

#[test]
fn fixture_heats_match_frozen_values() {
    let m = q1r3(0.1);
    assert!((m.heat_s(5.0) - 0.00014826039421944603).abs() < 1e-12);
    assert!((m.heat_r(5.0) - -0.0028384335020484874).abs() < 1e-12);
    assert!((fcs_reservoir_direct(&m, 5.0).unwrap().mean() - m.heat_r(5.0)).abs() < 1e-9);
}

#[test]
fn fixture_calf_matches_frozen_values() {
    let m = q1r3(0.1);
    let f1 = calF(&m, 5.0, c64(1.0, 0.0)).unwrap();
    assert!((f1 - c64(1.0080010923630027, 0.0)).norm() < 1e-10);
    assert!(f1.re >= 0.0 && f1.re <= 2.0);
    let f = calF(&m, 5.0, c64(0.3, 0.7)).unwrap();
    assert!((f - c64(0.9954214056437963, 0.0019044915198481505)).norm() < 1e-10);
}

#[test]
fn measures_match_brute_force_double_sums() {
    for m in [q1r3(0.1), random_model(), q1r3(0.4)] {
        for t in [0.7, 5.0, 13.0] {
            let lib = fcs_reservoir_direct(&m, t).unwrap();
            let oracle = brute_reservoir(&m, t);
            assert!(lib.compare(&oracle, 1e-8).within(1e-9), "reservoir t={t}");
            let lib = fcs_system(&m, t).unwrap();
            assert!(lib.compare(&brute_system(&m, t), 1e-8).within(1e-9), "system t={t}");
        }
    }
}

#[test]
fn idealized_system_limit_uses_coupled_gibbs_populations() {
    let m = q1r3(0.1);
    let h = m.h_lambda().matrix();
    let g = expm(h, c64(-1.0, 0.0));
    let g = &g / g.trace();
    let p0 = kron(&HermitianObservable::from_real_diagonal(&[1.0, 0.0]).into_matrix(), &identity(8));
    let a = (&g * p0).trace().re;
    let b = 1.0 - a;
    let expect = [(-2.0, 0.75 * b * 0.0 + 0.25 * a), (0.0, 0.75 * a + 0.25 * b), (2.0, 0.75 * b)];
    let mu = fcs_limit_idealized(&m, Subsystem::System).unwrap();
    assert_atoms(&mu, &expect, 1e-12, 1e-12);
}

#[test]
fn rank_one_limit_at_zero_matches_direct_inner_products() {
    let m = q1r3(0.1);
    let beta = 1.0;
    let h = m.h_lambda().matrix();
    let h0 = m.h_0().matrix();
    let z0 = expm(h0, c64(-beta, 0.0)).trace().re;
    let om = expm(h, c64(-beta / 2.0, 0.0)) / c64(z0.sqrt(), 0.0);
    let hat = hat_vector(&m).into_matrix();
    let eta = reference_vector(&m).into_matrix();
    let expect = hs_inner(&hat, &om) * hs_inner(&om, &eta) / om.norm_squared();
    let got = calF_limit(&m, 0.0, LimitProjection::RankOne).unwrap();
    assert!((got - expect).norm() < 1e-12);
}

#[test]
fn araki_vector_is_first_order_in_coupling() {
    let m0 = q1r3(0.0);
    let omega_0 = free_equilibrium_vector(&m0);
    let dist = |l: f64| (&araki_vector(&q1r3(l)) - &omega_0).norm();
    let (a, b, c) = (dist(0.1), dist(0.05), dist(0.025));
    assert!((a / b - 2.0).abs() < 0.1, "{a} {b}");
    assert!((b / c - 2.0).abs() < 0.05, "{b} {c}");
}

fn g_deviation(model: impl Fn(f64) -> OpenSystemModel, gamma: f64, lambdas: [f64; 3]) -> [f64; 3] {
    let (r1, r2) = g_functions_continuation(&model(0.0), gamma);
    lambdas.map(|l| {
        let (g1, g2) = g_functions_continuation(&model(l), gamma);
        (g1 - r1).norm() + (g2 - r2).norm()
    })
}

#[test]
fn g_functions_deviation_is_first_order_in_coupling() {
    // The linear term needs a system-diagonal coupling factor whose reservoir
    // partner has a nonzero Gibbs mean: with an off-diagonal system factor
    // every first-order trace vanishes.
    let reservoir = random_reservoir(6, 7).unwrap();
    let random = |l: f64| {
        let shifted = &reservoir.coupling + identity(6) * c64(0.5, 0.0);
        let v = kron(&pauli_z(), &shifted) + kron(&pauli_x(), &reservoir.coupling);
        build_model(
            HermitianObservable::from_real_diagonal(&[0.0, 2.0]),
            DensityMatrix::new(HermitianObservable::from_real_diagonal(&[0.75, 0.25]).into_matrix()).unwrap(),
            reservoir.hamiltonian.clone(),
            HermitianObservable::new(v).unwrap(),
            l,
            1.0,
        )
        .unwrap()
    };
    let [a, b, c] = g_deviation(random, 0.8, [0.2, 0.1, 0.05]);
    assert!((a / b - 2.0).abs() < 0.25, "{a} {b}");
    assert!((b / c - 2.0).abs() < 0.15, "{b} {c}");
}

#[test]
fn g_functions_deviation_on_fixture_is_second_order_by_parity() {
    // The chain commutes with the product of sigma_z and the coupling flips it,
    // so the reservoir expectation of the coupling vanishes and the linear term
    // drops out.
    let [a, b, c] = g_deviation(q1r3, 0.8, [0.2, 0.1, 0.05]);
    assert!(a / b >= 1.9 && b / c >= 1.9, "{a} {b} {c}");
    assert!((a / b - 4.0).abs() < 0.2, "{a} {b}");
    assert!((b / c - 4.0).abs() < 0.1, "{b} {c}");
}

#[test]
fn zero_coupling_limit_two_level_closed_form() {
    let m = q1r3(0.1);
    let gamma = std::f64::consts::FRAC_PI_2;
    let p = m.omega_s().matrix()[(0, 0)].re;
    let expect = (c64(0.75, 0.0) + c64(0.25, 0.0) * C64::from_polar(1.0, -2.0 * gamma))
        * (c64(p, 0.0) + c64(1.0 - p, 0.0) * C64::from_polar(1.0, 2.0 * gamma));
    assert!((calF_zero_coupling(&m, gamma) - expect).norm() < 1e-14);
    let mu = double_limit_fcs(&m).unwrap();
    assert!((mu.char_function(gamma) - expect).norm() < 1e-14);
}

#[test]
fn kernel_limit_is_time_average_of_calf() {
    let m = q1r3(0.1);
    for s in [0.0, 0.5] {
        let (horizon, dt) = (2000.0, 0.05);
        let n = (horizon / dt) as usize;
        let mut acc = c64(0.0, 0.0);
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += calF(&m, k as f64 * dt, c64(0.5, s)).unwrap() * w;
        }
        let average = acc * dt / horizon;
        let exact = calF_limit(&m, s, LimitProjection::KernelExact).unwrap();
        assert!((average - exact).norm() < 2e-3, "s={s}: {average} vs {exact}");
    }
}

#[test]
fn cesaro_mean_matches_time_averaged_heat() {
    let m = q1r3(0.1);
    let (horizon, dt) = (2000.0, 0.05);
    let n = (horizon / dt) as usize;
    let mut acc = 0.0;
    for k in 0..=n {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * m.heat_r(k as f64 * dt);
    }
    let average = acc * dt / horizon;
    let mean = cesaro_fcs(&m, Subsystem::Reservoir).unwrap().mean();
    assert!((average - mean).abs() < 2e-3, "{average} vs {mean}");
}

fn chain(n: usize, lambda: f64) -> OpenSystemModel {
    let system = NamedBuilder::TwoLevel { gap: 2.0, rho: Some(RhoSpec::Diagonal(vec![0.75, 0.25])) };
    build_named_model(&system, &NamedBuilder::SpinChainReservoir { n, h: 1.0, g: 0.3 }, 1.0, lambda, 0).unwrap()
}

fn thermal_two_level(lambda: f64) -> (OpenSystemModel, f64) {
    let system = NamedBuilder::TwoLevel { gap: 2.0, rho: Some(RhoSpec::Named("thermal".into())) };
    let m =
        build_named_model(&system, &NamedBuilder::SpinChainReservoir { n: 2, h: 1.0, g: 0.3 }, 1.0, lambda, 0).unwrap();
    (m, 1.0 / (1.0 + (-2.0f64).exp()))
}

#[test]
fn double_limit_thermal_two_level_closed_form() {
    let (m, p) = thermal_two_level(0.1);
    let q = p * (1.0 - p);
    let mu = double_limit_fcs(&m).unwrap();
    assert_atoms(&mu, &[(-2.0, q), (0.0, p * p + (1.0 - p) * (1.0 - p)), (2.0, q)], 1e-12, 1e-12);
    assert!(mu.mean().abs() < 1e-14);
    let gamma = std::f64::consts::FRAC_PI_2;
    let expect = p * p + (1.0 - p) * (1.0 - p) + 2.0 * q * (2.0 * gamma).cos();
    let value = calF_zero_coupling(&m, gamma);
    assert!((value.norm() - expect).abs() < 1e-12 && value.norm() <= 1.0);
}

#[test]
fn double_limit_mean_is_system_heat_gap() {
    let m = q1r3(0.1);
    let h = m.h_s().matrix();
    let expect = m.omega_s().expectation(h).re - m.rho_s().expectation(h).re;
    assert!((double_limit_fcs(&m).unwrap().mean() - expect).abs() < 1e-13);
}

#[test]
fn idealized_limit_at_zero_coupling_in_equilibrium() {
    let (m, p) = thermal_two_level(0.0);
    let q = p * (1.0 - p);
    let mu = fcs_limit_idealized(&m, Subsystem::System).unwrap();
    assert_atoms(&mu, &[(-2.0, q), (0.0, p * p + (1.0 - p) * (1.0 - p)), (2.0, q)], 1e-12, 1e-12);
}

#[test]
fn calf_liouvillean_form_trivial_points() {
    let m = q1r3(0.1);
    assert!(calF_liouvillean_residual(&m, 0.0, 0.0).unwrap() < 1e-12);
    let m0 = q1r3(0.0);
    for t in [0.5, 3.0, 11.0] {
        for s in [-0.4, 0.0, 0.7] {
            assert!(calF_liouvillean_residual(&m0, t, s).unwrap() < 1e-10);
        }
    }
}

#[test]
fn limit_projections_at_zero_coupling_differ_by_degenerate_kernel() {
    let m = q1r3(0.0);
    let rank_one = calF_limit(&m, 0.5, LimitProjection::RankOne).unwrap();
    let kernel = calF_limit(&m, 0.5, LimitProjection::KernelExact).unwrap();
    assert!(rank_one.is_finite() && kernel.is_finite());
    // The free Liouvillean kernel has dimension Σ multiplicity² ≥ d > 1.
    let dim: usize = m.free_resolution().levels().len();
    assert!(dim < m.dim() * m.dim());
    assert!((rank_one - kernel).norm() > 1e-6);
}

#[test]
fn g_functions_at_zero_coupling() {
    let m = q1r3(0.0);
    let res = m.system_resolution();
    let z: f64 = res.eigenvalues().iter().map(|e| (-e).exp()).sum();
    for gamma in [0.0, 0.8, -2.3] {
        let (g1, g2) = g_functions_continuation(&m, gamma);
        let e1 = m.rho_s().expectation(&res.exp_i(c64(-gamma, 0.0))) / z.sqrt();
        let e2 = m.omega_s().expectation(&res.exp_i(c64(gamma, 0.0))) * z.sqrt();
        assert!((g1 - e1).norm() < 1e-12 && (g2 - e2).norm() < 1e-12, "γ={gamma}");
    }
}

#[test]
fn rank_one_gap_shrinks_with_reservoir_size() {
    let gaps: Vec<f64> = (2..=5)
        .map(|n| {
            let m = chain(n, 0.1);
            let r = calF_limit(&m, 0.5, LimitProjection::RankOne).unwrap();
            (r - calF_limit(&m, 0.5, LimitProjection::KernelExact).unwrap()).norm()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn scan_of_trivial_model_is_zero() {
    let system = NamedBuilder::TwoLevel { gap: 0.0, rho: None };
    let m =
        build_named_model(&system, &NamedBuilder::SpinChainReservoir { n: 1, h: 1.0, g: 0.0 }, 1.0, 0.0, 0).unwrap();
    let result = scan(&[ScanPoint { value: 1.0, model: m }], ScanAxis::Size, &ScanMetric::default()).unwrap();
    assert_eq!(result.kolmogorov_column(), vec![0.0]);
}

// The trend claims below do not hold on the finite chain family: the chain's
// level spacings are off-resonant with the system gap, so the reservoir limit
// concentrates at 0 as the coupling shrinks instead of approaching the law of
// the system energy difference. Run with `--ignored` to see the numbers.

#[test]
#[ignore = "trend does not hold on finite chains"]
fn cesaro_to_idealized_distance_shrinks_with_size() {
    let d: Vec<f64> = (2..=6)
        .map(|n| {
            let m = chain(n, 0.1);
            let c = cesaro_fcs(&m, Subsystem::Reservoir).unwrap();
            c.kolmogorov_distance(&fcs_limit_idealized(&m, Subsystem::Reservoir).unwrap())
        })
        .collect();
    assert!(weakly_decreasing(&d, 0.0), "{d:?}");
}

#[test]
#[ignore = "trend does not hold on finite chains"]
fn lambda_scan_on_fixture_is_weakly_decreasing() {
    let family: Vec<ScanPoint> =
        [0.4, 0.2, 0.1, 0.05].iter().map(|&l| ScanPoint { value: l, model: q1r3(l) }).collect();
    let d = scan(&family, ScanAxis::Lambda, &ScanMetric::default()).unwrap().kolmogorov_column();
    assert!(weakly_decreasing(&d, 0.0), "{d:?}");
}

#[test]
#[ignore = "trend does not hold on finite chains"]
fn size_scan_is_weakly_decreasing() {
    let family: Vec<ScanPoint> = (2..=6).map(|n| ScanPoint { value: n as f64, model: chain(n, 0.1) }).collect();
    let d = scan(&family, ScanAxis::Size, &ScanMetric::default()).unwrap().kolmogorov_column();
    assert!(weakly_decreasing(&d, 0.0), "{d:?}");
}
