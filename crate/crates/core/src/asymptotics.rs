//! Long-time and weak-coupling limits of the counting statistics.
//!
//! In finite dimension the coupled dynamics is quasi-periodic, so long-time
//! limits exist only as Cesàro averages. They are computed exactly by keeping
//! equal-energy pairs of `H_λ`. The mixing idealization, which a finite
//! reservoir never satisfies, is reported next to them.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcs::{calF, fcs_reservoir_direct, protocol_measure, two_time_weights, AtomicMeasure, Horizon, Subsystem};
use crate::linalg::{c64, hs_inner, CMatrix, C64};
use crate::model::OpenSystemModel;
use crate::modular::{
    araki_vector, free_equilibrium_vector, hat_vector, reference_vector, standard_liouvillean, LiouvilleanKind,
};

/// Largest `d` accepted by the direct-formula paths of a scan.
pub const DIRECT_CAP: usize = 128;

/// Exact infinite-time average `lim (1/T)∫_0^T ℙ_{λ,t} dt` of the system or
/// reservoir counting statistics.
pub fn cesaro_fcs(m: &OpenSystemModel, which: Subsystem) -> Result<AtomicMeasure> {
    if m.lambda() == 0.0 {
        return Ok(AtomicMeasure::point_mass(0.0));
    }
    protocol_measure(m, which, Horizon::Cesaro)
}

/// Infinite-time average of the heat `ΔQ_S(λ,t)` or `ΔQ_R(λ,t)`.
pub fn cesaro_heat(m: &OpenSystemModel, which: Subsystem) -> f64 {
    if m.lambda() == 0.0 {
        return 0.0;
    }
    let (h, sign) = match which {
        Subsystem::System => (m.embed_system(m.h_s().matrix()), 1.0),
        Subsystem::Reservoir => (m.embed_reservoir(m.h_r().matrix()), -1.0),
    };
    let averaged = two_time_weights(
        m.coupled_resolution(),
        &[m.omega().matrix().clone()],
        std::slice::from_ref(&h),
        Horizon::Cesaro,
    );
    sign * (averaged[0][0] - m.omega().expectation(&h).re)
}

/// The limit a mixing dynamics would produce: the second measurement is
/// taken in the coupled equilibrium state `ω_λ`.
///
/// System: weight `ω_λ(P_{e′} ⊗ 1)ρ_S(P_e)` at `e′ − e`.
/// Reservoir: weight `ω_R(P_ε)ω_λ(1 ⊗ P_{ε′})` at `ε − ε′`.
pub fn fcs_limit_idealized(m: &OpenSystemModel, which: Subsystem) -> Result<AtomicMeasure> {
    let omega_lambda = m.omega_lambda();
    match which {
        Subsystem::System => {
            let res = m.system_resolution();
            let before: Vec<f64> = res.projectors().iter().map(|p| m.rho_s().expectation(p).re).collect();
            let after: Vec<f64> =
                res.projectors().iter().map(|p| omega_lambda.expectation(&m.embed_system(p)).re).collect();
            product_measure(res.levels(), &before, &after, |e, e2| e2 - e)
        }
        Subsystem::Reservoir => {
            let res = m.reservoir_resolution();
            let before: Vec<f64> = res.projectors().iter().map(|p| m.omega_r().expectation(p).re).collect();
            let after: Vec<f64> =
                res.projectors().iter().map(|p| omega_lambda.expectation(&m.embed_reservoir(p)).re).collect();
            product_measure(res.levels(), &before, &after, |e, e2| e - e2)
        }
    }
}

/// Weight `ω_S(P_{e′})ρ_S(P_e)` at `e′ − e`: the law of the difference of
/// an `ω_S`-distributed and an independent `ρ_S`-distributed energy.
pub fn double_limit_fcs(m: &OpenSystemModel) -> Result<AtomicMeasure> {
    let res = m.system_resolution();
    let before: Vec<f64> = res.projectors().iter().map(|p| m.rho_s().expectation(p).re).collect();
    let after: Vec<f64> = res.projectors().iter().map(|p| m.omega_s().expectation(p).re).collect();
    product_measure(res.levels(), &before, &after, |e, e2| e2 - e)
}

fn product_measure<F: Fn(f64, f64) -> f64>(
    levels: &[f64],
    before: &[f64],
    after: &[f64],
    loc: F,
) -> Result<AtomicMeasure> {
    let mut atoms = Vec::with_capacity(levels.len() * levels.len());
    for (a, &e) in levels.iter().enumerate() {
        for (b, &e2) in levels.iter().enumerate() {
            atoms.push((loc(e, e2), before[a] * after[b]));
        }
    }
    AtomicMeasure::new(atoms)
}

/// `|𝓕_{λ,t}(1/2 + is) − ⟨e^{iβsL̂_λ}Ω̂ | e^{itL_λ} e^{iβsL̂_λ} Ω_η⟩|`.
#[allow(non_snake_case)]
pub fn calF_liouvillean_residual(m: &OpenSystemModel, t: f64, s: f64) -> Result<f64> {
    let lhs = calF(m, t, c64(0.5, s))?;
    let hat = standard_liouvillean(m, LiouvilleanKind::Hat);
    let coupled = standard_liouvillean(m, LiouvilleanKind::Coupled);
    let z = c64(0.0, m.beta() * s);
    let left = hat.exp(z).apply(&hat_vector(m))?;
    let right = coupled.exp(c64(0.0, t)).apply(&hat.exp(z).apply(&reference_vector(m))?)?;
    Ok((lhs - left.inner(&right)).norm())
}

/// How the infinite-time limit of `e^{itL_λ}` is replaced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitProjection {
    /// The rank-one projector onto `Ω_λ`, as mixing would give.
    RankOne,
    /// The exact projector onto `ker L_λ`, the true Cesàro limit.
    KernelExact,
}

/// Long-time limit of `𝓕_{λ,t}(1/2 + is)`.
#[allow(non_snake_case)]
pub fn calF_limit(m: &OpenSystemModel, s: f64, mode: LimitProjection) -> Result<C64> {
    calf_limit_complex(m, c64(s, 0.0), mode)
}

/// [`calF_limit`] at complex `s`, where each factor is continued analytically.
pub fn calf_limit_complex(m: &OpenSystemModel, s: C64, mode: LimitProjection) -> Result<C64> {
    let hat = standard_liouvillean(m, LiouvilleanKind::Hat);
    let z = C64::i() * m.beta() * s;
    let omega_hat = hat_vector(m);
    let forward = hat.exp(z).apply(&reference_vector(m))?;
    let backward = hat.exp(-z);
    match mode {
        LimitProjection::RankOne => {
            let om = araki_vector(m);
            let first = omega_hat.inner(&backward.apply(&om)?);
            let second = om.inner(&forward);
            Ok(first * second / om.norm().powi(2))
        }
        LimitProjection::KernelExact => {
            let coupled = standard_liouvillean(m, LiouvilleanKind::Coupled);
            let p = coupled.kernel_projector(m.coupled_resolution().degeneracy_tol());
            let projected = p.apply(&forward)?;
            Ok(omega_hat.inner(&backward.apply(&projected)?))
        }
    }
}

/// `ρ_S(e^{−iγH_S}) ω_S(e^{iγH_S})`, the weak-coupling limit of `𝓕(iγ/β)`.
#[allow(non_snake_case)]
pub fn calF_zero_coupling(m: &OpenSystemModel, gamma: f64) -> C64 {
    let res = m.system_resolution();
    m.rho_s().expectation(&res.exp_i(c64(-gamma, 0.0))) * m.omega_s().expectation(&res.exp_i(c64(gamma, 0.0)))
}

/// The two factors of the rank-one limit continued to `s = γ/β + i/2`:
///
/// `G₁ = ⟨Ω̂ | e^{(β/2−iγ)Jπ(H_S)J} e^{−iγ(L_0+λπ(V))} Ω_0⟩` and
/// `G₂ = Z^{1/2}⟨Ω_λ | Jπ(e^{−iγH_S})J e^{iγ(L_0+λπ(V))} Ω_λ⟩`,
/// with `Z = tr e^{−βH_S}`.
pub fn g_functions_continuation(m: &OpenSystemModel, gamma: f64) -> (C64, C64) {
    let beta = m.beta();
    let res_s = m.system_resolution();
    let h_lambda = m.coupled_resolution();
    let h_0 = m.free_resolution();
    let z_s: f64 = res_s.eigenvalues().iter().map(|e| (-beta * e).exp()).sum();

    let omega_0 = free_equilibrium_vector(m);
    let evolved_0 = h_lambda.exp_i(c64(-gamma, 0.0)) * omega_0.matrix() * h_0.exp_i(c64(gamma, 0.0));
    let right_1 = m.embed_system(&res_s.exp_i(c64(-gamma, -beta / 2.0)));
    let g1 = hs_inner(hat_vector(m).matrix(), &(evolved_0 * right_1));

    let om = araki_vector(m);
    let evolved_l = h_lambda.exp_i(c64(gamma, 0.0)) * om.matrix() * h_0.exp_i(c64(-gamma, 0.0));
    let right_2 = m.embed_system(&res_s.exp_i(c64(gamma, 0.0)));
    let g2 = hs_inner(om.matrix(), &(evolved_l * right_2)) * z_s.sqrt();
    (g1, g2)
}

/// Which long-time limit a report or scan uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    CesaroExact,
    MixingIdealized,
}

impl LimitMode {
    pub fn measure(self, m: &OpenSystemModel, which: Subsystem) -> Result<AtomicMeasure> {
        match self {
            LimitMode::CesaroExact => cesaro_fcs(m, which),
            LimitMode::MixingIdealized => fcs_limit_idealized(m, which),
        }
    }
}

/// Evenly spaced `γ` values for characteristic-function distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GammaGrid {
    fn default() -> Self {
        Self { min: -10.0, max: 10.0, points: 201 }
    }
}

impl GammaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n).map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// `sup_γ |φ_μ(γ) − φ_ν(γ)|` over the grid.
pub fn char_function_sup_distance(mu: &AtomicMeasure, nu: &AtomicMeasure, grid: &GammaGrid) -> f64 {
    grid.values().into_iter().map(|g| (mu.char_function(g) - nu.char_function(g)).norm()).fold(0.0, f64::max)
}

/// A reservoir limit measure with its distances to the reference limits.
#[derive(Clone, Debug)]
pub struct LimitReport {
    pub mode: LimitMode,
    pub measure: AtomicMeasure,
    /// Keys: `kolmogorov_double_limit`, `kolmogorov_system_limit`, `cf_sup_double_limit`.
    pub distances: BTreeMap<String, f64>,
    pub fingerprint: String,
    pub gamma_grid: GammaGrid,
}

pub fn limit_report(m: &OpenSystemModel, mode: LimitMode, grid: &GammaGrid) -> Result<LimitReport> {
    let measure = mode.measure(m, Subsystem::Reservoir)?;
    let system = mode.measure(m, Subsystem::System)?;
    let double = double_limit_fcs(m)?;
    let mut distances = BTreeMap::new();
    distances.insert("kolmogorov_double_limit".to_string(), measure.kolmogorov_distance(&double));
    distances.insert("kolmogorov_system_limit".to_string(), measure.kolmogorov_distance(&system));
    distances.insert("cf_sup_double_limit".to_string(), char_function_sup_distance(&measure, &double, grid));
    Ok(LimitReport { mode, measure, distances, fingerprint: m.fingerprint(), gamma_grid: *grid })
}

/// Scan parameter. On the time axis each row uses the finite-time reservoir
/// measure at `t = value`; on the other axes it uses the configured limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    Time,
    Lambda,
    Size,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScanAxis::Time => "time",
            ScanAxis::Lambda => "lambda",
            ScanAxis::Size => "size",
        }
    }
}

/// Reservoir measure and reference used by a scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMetric {
    pub limit: LimitMode,
    pub gamma_grid: GammaGrid,
}

impl Default for ScanMetric {
    fn default() -> Self {
        Self { limit: LimitMode::CesaroExact, gamma_grid: GammaGrid::default() }
    }
}

/// One scan point: the axis value and the model evaluated there.
#[derive(Clone, Debug)]
pub struct ScanPoint {
    pub value: f64,
    pub model: OpenSystemModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub axis: ScanAxis,
    pub value: f64,
    /// Kolmogorov distance from the reservoir measure to `ℙ_S`.
    pub kolmogorov: f64,
    pub cf_sup: f64,
    pub mean_r: f64,
    pub mean_s: f64,
    pub second_moment_r: f64,
    pub second_moment_s: f64,
    pub seconds: f64,
    pub error: Option<String>,
}

impl ScanRow {
    /// A row for a point that could not be evaluated; numeric columns are `NaN`.
    pub fn failed(axis: ScanAxis, value: f64, error: String, seconds: f64) -> Self {
        Self {
            axis,
            value,
            kolmogorov: f64::NAN,
            cf_sup: f64::NAN,
            mean_r: f64::NAN,
            mean_s: f64::NAN,
            second_moment_r: f64::NAN,
            second_moment_s: f64::NAN,
            seconds,
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    /// CSV with header `axis,value,kolmogorov,cf_sup,mean_R,mean_S,seconds`.
    /// Failed rows carry `NaN` in the numeric columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("axis,value,kolmogorov,cf_sup,mean_R,mean_S,seconds\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.axis.name(),
                r.value,
                r.kolmogorov,
                r.cf_sup,
                r.mean_r,
                r.mean_s,
                r.seconds
            ));
        }
        s
    }

    pub fn kolmogorov_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.kolmogorov).collect()
    }

    pub fn errors(&self) -> Vec<(f64, &str)> {
        self.rows.iter().filter_map(|r| r.error.as_deref().map(|e| (r.value, e))).collect()
    }
}

/// Whether `values` never increases by more than `slack`.
pub fn weakly_decreasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Distances of the reservoir measure to `ℙ_S` along a family, evaluated in
/// parallel and returned in input order. A failing point yields an error row
/// instead of aborting the scan.
pub fn scan(family: &[ScanPoint], axis: ScanAxis, metric: &ScanMetric) -> Result<ScanResult> {
    if family.is_empty() {
        return Err(Error::validation("family", "scan needs at least one model"));
    }
    let rows = family
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            match scan_point(p, axis, metric) {
                Ok(mut row) => {
                    row.seconds = start.elapsed().as_secs_f64();
                    row
                }
                Err(e) => ScanRow::failed(axis, p.value, e.to_string(), start.elapsed().as_secs_f64()),
            }
        })
        .collect();
    Ok(ScanResult { rows })
}

fn scan_point(p: &ScanPoint, axis: ScanAxis, metric: &ScanMetric) -> Result<ScanRow> {
    let m = &p.model;
    if m.dim() > DIRECT_CAP {
        return Err(Error::ResourceCap { what: "direct counting statistics".into(), dim: m.dim(), cap: DIRECT_CAP });
    }
    let reservoir = match axis {
        ScanAxis::Time => fcs_reservoir_direct(m, p.value)?,
        _ => metric.limit.measure(m, Subsystem::Reservoir)?,
    };
    let reference = double_limit_fcs(m)?;
    Ok(ScanRow {
        axis,
        value: p.value,
        kolmogorov: reservoir.kolmogorov_distance(&reference),
        cf_sup: char_function_sup_distance(&reservoir, &reference, &metric.gamma_grid),
        mean_r: reservoir.mean(),
        mean_s: reference.mean(),
        second_moment_r: reservoir.moment(2),
        second_moment_s: reference.moment(2),
        seconds: 0.0,
        error: None,
    })
}

/// Projection of `X` onto `ker L_λ`: `Σ_μ Π_μ X Π_μ` over the
/// eigenprojections of `H_λ`.
pub fn kernel_projection(m: &OpenSystemModel, x: &CMatrix) -> CMatrix {
    let coupled = standard_liouvillean(m, LiouvilleanKind::Coupled);
    coupled.kernel_projector(m.coupled_resolution().degeneracy_tol()).apply_matrix(x)
}
