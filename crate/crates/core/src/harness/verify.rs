//! The invariant suite behind `fcslab verify`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::{
    calF_liouvillean_residual, calF_zero_coupling, cesaro_fcs, cesaro_heat, double_limit_fcs, GammaGrid,
};
use crate::error::Result;
use crate::fcs::{calF, fcs_reservoir_direct, fcs_reservoir_modular_with, fcs_system, ModularPath, Subsystem};
use crate::linalg::{c64, max_abs, positive_power, random_matrix, CMatrix, HermitianObservable, C64};
use crate::model::OpenSystemModel;
use crate::modular::{
    araki_vector, cocycle, commutant_action, evolved_functional_density, hat_vector, initial_vector, left_action,
    modular_conjugation, reference_vector, relative_modular_operator, reservoir_liouvillean, standard_liouvillean,
    LiouvilleVector, LiouvilleanKind, DENSE_CAP,
};

/// One row of the verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `residual ≤ tolerance`.
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let pass = residual <= tolerance;
        Self { name: name.into(), residual, tolerance, pass }
    }

    /// A measured quantity that is reported but not asserted.
    pub fn report(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), residual: value, tolerance: f64::INFINITY, pass: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// CSV with header `check,residual,tolerance,pass`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,residual,tolerance,pass\n");
        for c in &self.checks {
            s.push_str(&format!("{},{:e},{:e},{}\n", c.name, c.residual, c.tolerance, c.pass));
        }
        s
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }
}

/// `α` grid for the strip bounds: real parts in `[0, 1]` times a few imaginary parts.
fn alpha_grid() -> Vec<C64> {
    let mut out = Vec::new();
    for re in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for im in [0.0, 0.7, -1.9] {
            out.push(c64(re, im));
        }
    }
    out
}

fn rel(x: f64) -> f64 {
    1.0 + x.abs()
}

/// Runs every check on `m` at the given times.
pub fn verify_model(m: &OpenSystemModel, times: &[f64], gamma_grid: &GammaGrid, seed: u64) -> Result<VerifyReport> {
    let mut r = VerifyReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = m.dim();
    let d_s = m.system_dim() as f64;
    let bound = m.heat_bound();

    for &t in times {
        let (qs, qr) = (m.heat_s(t), m.heat_r(t));
        r.push(Check::new(format!("first_law[t={t}]"), m.first_law_residual(t).abs(), 1e-9 * rel(bound)));
        r.push(Check::new(format!("heat_bound[t={t}]"), (qs.abs().max(qr.abs()) - bound).max(0.0), 0.0));
        r.push(Check::new(
            format!("flux_integral_system[t={t}]"),
            (m.heat_s_flux_integral(t) - qs).abs(),
            1e-8 * rel(bound),
        ));
        r.push(Check::new(
            format!("flux_integral_reservoir[t={t}]"),
            (m.heat_r_flux_integral(t) - qr).abs(),
            1e-8 * rel(bound),
        ));

        let p_r = fcs_reservoir_direct(m, t)?;
        r.push(Check::new(format!("mean_reservoir_is_heat[t={t}]"), (p_r.mean() - qr).abs(), 1e-9));
        let p_s = fcs_system(m, t)?;
        if m.rho_commutes_with_h_s(1e-12) {
            r.push(Check::new(format!("mean_system_is_heat[t={t}]"), (p_s.mean() - qs).abs(), 1e-9));
        } else {
            r.push(Check::report(format!("mean_system_discrepancy[t={t}]"), (p_s.mean() - qs).abs()));
        }
        let path = if d <= DENSE_CAP { ModularPath::Dense } else { ModularPath::Structured };
        let p_mod = fcs_reservoir_modular_with(m, t, path)?;
        let cmp = p_r.compare(&p_mod, 1e-8);
        r.push(Check::new(
            format!("modular_matches_direct[t={t}]"),
            cmp.max_location_error.max(cmp.max_weight_error),
            1e-8,
        ));
        let f1 = calF(m, t, c64(1.0, 0.0))?;
        let out_of_range = (-f1.re).max(f1.re - d_s).max(0.0) + f1.im.abs();
        r.push(Check::new(format!("calF_one_in_range[t={t}]"), out_of_range, 1e-10));
        r.push(Check::new(
            format!("calF_zero_is_one[t={t}]"),
            (calF(m, t, c64(0.0, 0.0))? - c64(1.0, 0.0)).norm(),
            0.0,
        ));

        let mut strip = 0.0f64;
        let mut rigidity = 0.0f64;
        for alpha in alpha_grid() {
            let f = calF(m, t, alpha)?.norm();
            strip = strip.max(f - (1.0 + (d_s - 1.0) * alpha.re));
            let f_re = calF(m, t, c64(alpha.re, 0.0))?.re;
            rigidity = rigidity.max(f - f_re);
        }
        r.push(Check::new(format!("calF_strip_bound[t={t}]"), strip.max(0.0), 1e-10));
        r.push(Check::new(format!("calF_rigidity[t={t}]"), rigidity.max(0.0), 1e-10));

        let mut deriv = 0.0f64;
        for re in [0.1, 0.3, 0.5, 0.7, 0.85] {
            let h = 1e-5;
            let df = (calF(m, t, c64(re + h, 0.0))? - calF(m, t, c64(re - h, 0.0))?) / (2.0 * h);
            let limit = (1.0 + 1.0 / (1.0 - re)) * d_s - m.beta() * qr;
            deriv = deriv.max(df.norm() - limit);
        }
        r.push(Check::new(format!("calF_derivative_bound[t={t}]"), deriv.max(0.0), 1e-6));

        for s in [0.0, 0.3, 1.0] {
            r.push(Check::new(
                format!("calF_liouvillean_form[t={t},s={s}]"),
                calF_liouvillean_residual(m, t, s)?,
                1e-8,
            ));
        }

        let zeta = evolved_functional_density(m, t);
        let lhs = relative_modular_operator(&zeta, m.eta().matrix(), c64(1.0, 0.0))?;
        let g = cocycle(m, t);
        let eta = m.eta().matrix();
        let delta_eta = relative_modular_operator(eta, eta, c64(1.0, 0.0))?;
        let rhs = &(&g * &delta_eta) * &g.adjoint();
        let mut cocycle_res = 0.0f64;
        for _ in 0..5 {
            let x = LiouvilleVector::new(random_matrix(d, &mut rng))?;
            let scale = lhs.apply(&x)?.norm().max(1.0);
            cocycle_res = cocycle_res.max((&lhs.apply(&x)? - &rhs.apply(&x)?).norm() / scale);
        }
        r.push(Check::new(format!("cocycle_identity[t={t}]"), cocycle_res, 1e-9));

        let evolved = standard_liouvillean(m, LiouvilleanKind::Coupled).exp(c64(0.0, t)).apply(&initial_vector(m))?;
        r.push(Check::new(format!("natural_cone_preserved[t={t}]"), cone_violation(&evolved), 1e-10));
    }

    for (t, s) in [(0.4, 1.1), (1.3, -0.6)] {
        let free = standard_liouvillean(m, LiouvilleanKind::Free);
        let shifted = &(&free.exp(c64(0.0, t)) * &cocycle(m, s)) * &free.exp(c64(0.0, -t));
        let product = &cocycle(m, t) * &shifted;
        let x = LiouvilleVector::new(random_matrix(d, &mut rng))?;
        let res = (&cocycle(m, t + s).apply(&x)? - &product.apply(&x)?).norm() / x.norm();
        r.push(Check::new(format!("cocycle_group_law[t={t},s={s}]"), res, 1e-9));
    }

    let om = araki_vector(m);
    let coupled = standard_liouvillean(m, LiouvilleanKind::Coupled);
    r.push(Check::new("liouvillean_kills_araki_vector", coupled.apply(&om)?.norm() / om.norm(), 1e-9));
    let n2 = om.norm().powi(2);
    let gibbs = om.matrix() * om.matrix().adjoint() / c64(n2, 0.0);
    r.push(Check::new("araki_closed_form", max_abs(&(gibbs - m.omega_lambda().matrix())), 1e-9));
    for (name, v) in [
        ("araki_vector", &om),
        ("initial_vector", &initial_vector(m)),
        ("reference_vector", &reference_vector(m)),
        ("hat_vector", &hat_vector(m)),
    ] {
        r.push(Check::new(format!("natural_cone[{name}]"), cone_violation(v), 1e-10));
    }

    r.push(Check::new("kms_coupled_gibbs", kms_residual(m, &mut rng)?, 1e-8));
    r.push(Check::new("tomita_s_identity", s_identity_residual(m, &mut rng)?, 1e-9));
    r.push(Check::new("tomita_commutant", commutant_residual(d, &mut rng)?, 1e-10));
    r.push(Check::new("reference_modular_is_reservoir_dynamics", reference_modular_residual(m, &mut rng)?, 1e-9));

    let mean_c = cesaro_fcs(m, Subsystem::Reservoir)?.mean();
    r.push(Check::new("cesaro_mean_is_averaged_heat", (mean_c - cesaro_heat(m, Subsystem::Reservoir)).abs(), 1e-9));

    let double = double_limit_fcs(m)?;
    let mut closure = 0.0f64;
    for gamma in gamma_grid.values() {
        closure = closure.max((calF_zero_coupling(m, gamma) - double.char_function(gamma)).norm());
    }
    r.push(Check::new("zero_coupling_is_characteristic_function", closure, 1e-12));

    for (name, mu) in [
        ("system", fcs_system(m, 0.0)?),
        ("reservoir_direct", fcs_reservoir_direct(m, 0.0)?),
        (
            "reservoir_modular",
            fcs_reservoir_modular_with(
                m,
                0.0,
                if d <= DENSE_CAP { ModularPath::Dense } else { ModularPath::Structured },
            )?,
        ),
    ] {
        let off = if mu.is_point_mass_at(0.0, 1e-12) { 0.0 } else { 1.0 };
        r.push(Check::new(format!("point_mass_at_time_zero[{name}]"), off, 0.0));
    }
    Ok(r)
}

fn cone_violation(v: &LiouvilleVector) -> f64 {
    let x = v.matrix();
    let scale = max_abs(x).max(f64::MIN_POSITIVE);
    let herm = max_abs(&(x - x.adjoint())) / scale;
    let min = HermitianObservable::hermitized(x).spectral_resolution().min_level() / scale;
    herm.max((-min).max(0.0))
}

/// `|ω_λ(A τ^{iβ}(B)) − ω_λ(BA)|` for random `A`, `B`, relative to `‖A‖‖B‖`.
fn kms_residual(m: &OpenSystemModel, rng: &mut ChaCha8Rng) -> Result<f64> {
    let res = m.coupled_resolution();
    let beta = m.beta();
    let shift = res.min_level();
    let down = res.apply_finite(|e| c64((-beta * (e - shift)).exp(), 0.0));
    let up = res.apply_finite(|e| c64((beta * (e - shift)).exp(), 0.0));
    let omega = m.omega_lambda();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let a = random_matrix(m.dim(), rng);
        let b = random_matrix(m.dim(), rng);
        let analytic = &down * &b * &up;
        let lhs = omega.expectation(&(&a * analytic));
        let rhs = omega.expectation(&(&b * &a));
        worst = worst.max((lhs - rhs).norm() / (a.norm() * b.norm()));
    }
    Ok(worst)
}

/// `‖J Δ^{1/2} AΩ − A*Ω‖` for the faithful vector `Ω_0`, where `Δ` is its
/// modular operator.
fn s_identity_residual(m: &OpenSystemModel, rng: &mut ChaCha8Rng) -> Result<f64> {
    let omega_0 = m.omega_0();
    let vector = LiouvilleVector::new(positive_power(omega_0.matrix(), c64(0.5, 0.0))?)?;
    let delta_half = relative_modular_operator(omega_0.matrix(), omega_0.matrix(), c64(0.5, 0.0))?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let a: CMatrix = random_matrix(m.dim(), rng);
        let a_omega = left_action(&a)?.apply(&vector)?;
        let lhs = modular_conjugation(&delta_half.apply(&a_omega)?);
        let rhs = left_action(&a.adjoint())?.apply(&vector)?;
        worst = worst.max((&lhs - &rhs).norm() / a.norm());
    }
    Ok(worst)
}

/// `‖[Jπ(A)J, π(B)]X‖` over random `A`, `B`, `X`.
fn commutant_residual(d: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let a = random_matrix(d, rng);
        let b = random_matrix(d, rng);
        let x = LiouvilleVector::new(random_matrix(d, rng))?;
        let ja = commutant_action(&a)?;
        let pb = left_action(&b)?;
        let y = &(&ja * &pb).apply(&x)? - &(&pb * &ja).apply(&x)?;
        worst = worst.max(y.norm() / (a.norm() * b.norm() * x.norm()));
    }
    Ok(worst)
}

/// `Δ_η = e^{−βL_R}` on random vectors.
fn reference_modular_residual(m: &OpenSystemModel, rng: &mut ChaCha8Rng) -> Result<f64> {
    let eta = m.eta().matrix();
    let delta = relative_modular_operator(eta, eta, c64(1.0, 0.0))?;
    let flow = reservoir_liouvillean(m).exp(c64(-m.beta(), 0.0));
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x = LiouvilleVector::new(random_matrix(m.dim(), rng))?;
        let lhs = delta.apply(&x)?;
        worst = worst.max((&lhs - &flow.apply(&x)?).norm() / lhs.norm().max(1.0));
    }
    Ok(worst)
}
