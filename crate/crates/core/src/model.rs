//! The coupled system–reservoir model, energy fluxes and heat bookkeeping.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, commutator, gauss_legendre, gibbs_from_resolution, hermitize, identity, kron, operator_norm, CMatrix,
    DensityMatrix, HermitianObservable, SpectralResolution, C64,
};

/// Number of Gauss–Legendre nodes used by the flux-integral cross-checks.
pub const FLUX_QUADRATURE_NODES: usize = 64;

/// A finite system `S` with Hamiltonian `H_S` and initial state `ρ_S`,
/// coupled through `λV` to a confined reservoir `R` with Hamiltonian `H_R`
/// in thermal equilibrium at inverse temperature `β`.
///
/// The total Hilbert space is `ℋ_S ⊗ ℋ_R`, with the system factor first.
#[derive(Clone, Debug)]
pub struct OpenSystemModel {
    h_s: HermitianObservable,
    rho_s: DensityMatrix,
    h_r: HermitianObservable,
    v: HermitianObservable,
    lambda: f64,
    beta: f64,

    h_0: HermitianObservable,
    h_lambda: HermitianObservable,
    omega_s: DensityMatrix,
    omega_r: DensityMatrix,
    omega: DensityMatrix,
    eta: DensityMatrix,
    res_s: SpectralResolution,
    res_r: SpectralResolution,
    res_0: SpectralResolution,
    res_lambda: SpectralResolution,
}

/// Validates dimensions, `β > 0` and `ρ_S`; `ρ_S` need not be faithful.
pub fn build_model(
    h_s: HermitianObservable,
    rho_s: DensityMatrix,
    h_r: HermitianObservable,
    v: HermitianObservable,
    lambda: f64,
    beta: f64,
) -> Result<OpenSystemModel> {
    let d_s = h_s.dim();
    let d_r = h_r.dim();
    if rho_s.dim() != d_s {
        return Err(Error::validation("rho_s", format!("dimension {} but H_S has {d_s}", rho_s.dim())));
    }
    if !rho_s.is_normalized() {
        return Err(Error::validation("rho_s", "must be a normalized density matrix"));
    }
    if v.dim() != d_s * d_r {
        return Err(Error::validation("v", format!("dimension {} but d_S·d_R = {}", v.dim(), d_s * d_r)));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::validation("beta", format!("must be positive and finite, got {beta}")));
    }
    if !lambda.is_finite() {
        return Err(Error::validation("lambda", "must be finite"));
    }

    let id_s = identity(d_s);
    let id_r = identity(d_r);
    let h_0 = HermitianObservable::hermitized(&(kron(h_s.matrix(), &id_r) + kron(&id_s, h_r.matrix())));
    let h_lambda = if lambda == 0.0 {
        h_0.clone()
    } else {
        HermitianObservable::hermitized(&(h_0.matrix() + v.matrix() * c64(lambda, 0.0)))
    };
    let res_s = h_s.spectral_resolution();
    let res_r = h_r.spectral_resolution();
    let res_0 = h_0.spectral_resolution();
    let res_lambda = if lambda == 0.0 { res_0.clone() } else { h_lambda.spectral_resolution() };
    let omega_s = gibbs_from_resolution(&res_s, beta)?;
    let omega_r = gibbs_from_resolution(&res_r, beta)?;
    let omega = DensityMatrix::from_trusted(kron(rho_s.matrix(), omega_r.matrix()), true);
    let eta = DensityMatrix::from_trusted(kron(&id_s, omega_r.matrix()), false);

    Ok(OpenSystemModel {
        h_s,
        rho_s,
        h_r,
        v,
        lambda,
        beta,
        h_0,
        h_lambda,
        omega_s,
        omega_r,
        omega,
        eta,
        res_s,
        res_r,
        res_0,
        res_lambda,
    })
}

impl OpenSystemModel {
    pub fn system_dim(&self) -> usize {
        self.h_s.dim()
    }

    pub fn reservoir_dim(&self) -> usize {
        self.h_r.dim()
    }

    /// Dimension of `ℋ_S ⊗ ℋ_R`.
    pub fn dim(&self) -> usize {
        self.system_dim() * self.reservoir_dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h_s(&self) -> &HermitianObservable {
        &self.h_s
    }

    pub fn h_r(&self) -> &HermitianObservable {
        &self.h_r
    }

    pub fn v(&self) -> &HermitianObservable {
        &self.v
    }

    pub fn rho_s(&self) -> &DensityMatrix {
        &self.rho_s
    }

    /// `H_S ⊗ 1 + 1 ⊗ H_R`.
    pub fn h_0(&self) -> &HermitianObservable {
        &self.h_0
    }

    /// `H_0 + λV`.
    pub fn h_lambda(&self) -> &HermitianObservable {
        &self.h_lambda
    }

    pub fn omega_s(&self) -> &DensityMatrix {
        &self.omega_s
    }

    pub fn omega_r(&self) -> &DensityMatrix {
        &self.omega_r
    }

    /// Initial state `ρ_S ⊗ ω_R`.
    pub fn omega(&self) -> &DensityMatrix {
        &self.omega
    }

    /// `1 ⊗ ω_R`, with `η(1) = d_S`.
    pub fn eta(&self) -> &DensityMatrix {
        &self.eta
    }

    /// Decoupled thermal state `ω_S ⊗ ω_R`.
    pub fn omega_0(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(kron(self.omega_s.matrix(), self.omega_r.matrix()), true)
    }

    /// Coupled thermal state `e^{−βH_λ}/tr e^{−βH_λ}`.
    pub fn omega_lambda(&self) -> DensityMatrix {
        gibbs_from_resolution(&self.res_lambda, self.beta).expect("beta validated at construction")
    }

    pub fn system_resolution(&self) -> &SpectralResolution {
        &self.res_s
    }

    pub fn reservoir_resolution(&self) -> &SpectralResolution {
        &self.res_r
    }

    pub fn free_resolution(&self) -> &SpectralResolution {
        &self.res_0
    }

    pub fn coupled_resolution(&self) -> &SpectralResolution {
        &self.res_lambda
    }

    /// `A ⊗ 1`.
    pub fn embed_system(&self, a: &CMatrix) -> CMatrix {
        kron(a, &identity(self.reservoir_dim()))
    }

    /// `1 ⊗ B`.
    pub fn embed_reservoir(&self, b: &CMatrix) -> CMatrix {
        kron(&identity(self.system_dim()), b)
    }

    /// `τ_λ^t(A) = e^{itH_λ} A e^{−itH_λ}`.
    pub fn evolve_observable(&self, a: &CMatrix, t: f64) -> CMatrix {
        let u = self.res_lambda.exp_i(c64(t, 0.0));
        &u * a * u.adjoint()
    }

    /// Schrödinger picture `e^{−itH_λ} σ e^{itH_λ}`, re-Hermitized.
    pub fn evolve_state(&self, sigma: &CMatrix, t: f64) -> CMatrix {
        let u = self.res_lambda.exp_i(c64(-t, 0.0));
        hermitize(&(&u * sigma * u.adjoint()))
    }

    /// `ω(τ_λ^t(A))`.
    pub fn evolved_expectation(&self, a: &CMatrix, t: f64) -> C64 {
        let state = self.evolve_state(self.omega.matrix(), t);
        crate::linalg::trace_product(&state, a)
    }

    /// Flux observables `(Φ_S, Φ_R)` with `Φ_S = −iλ[H_S ⊗ 1, V]` the
    /// energy flux into the system and `Φ_R = iλ[1 ⊗ H_R, V]` the flux out
    /// of the reservoir.
    pub fn flux_observables(&self) -> (HermitianObservable, HermitianObservable) {
        let hs = self.embed_system(self.h_s.matrix());
        let hr = self.embed_reservoir(self.h_r.matrix());
        let phi_s = commutator(&hs, self.v.matrix()) * c64(0.0, -self.lambda);
        let phi_r = commutator(&hr, self.v.matrix()) * c64(0.0, self.lambda);
        (HermitianObservable::hermitized(&phi_s), HermitianObservable::hermitized(&phi_r))
    }

    /// `ΔQ_S(λ,t) = ω(τ_λ^t(H_S)) − ω(H_S)`.
    pub fn heat_s(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let hs = self.embed_system(self.h_s.matrix());
        self.evolved_expectation(&hs, t).re - self.omega.expectation(&hs).re
    }

    /// `ΔQ_R(λ,t) = ω(H_R) − ω(τ_λ^t(H_R))`.
    pub fn heat_r(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let hr = self.embed_reservoir(self.h_r.matrix());
        self.omega.expectation(&hr).re - self.evolved_expectation(&hr, t).re
    }

    /// `ΔQ_R − ΔQ_S − λ ω(τ_λ^t(V) − V)`, which vanishes identically.
    pub fn first_law_residual(&self, t: f64) -> f64 {
        let work = if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * (self.evolved_expectation(self.v.matrix(), t).re - self.omega.expectation(self.v.matrix()).re)
        };
        self.heat_r(t) - self.heat_s(t) - work
    }

    /// `∫_0^t ω(τ_λ^s(Φ_S)) ds` by Gauss–Legendre quadrature.
    pub fn heat_s_flux_integral(&self, t: f64) -> f64 {
        let (phi_s, _) = self.flux_observables();
        self.flux_integral(phi_s.matrix(), t)
    }

    /// `∫_0^t ω(τ_λ^s(Φ_R)) ds` by Gauss–Legendre quadrature.
    pub fn heat_r_flux_integral(&self, t: f64) -> f64 {
        let (_, phi_r) = self.flux_observables();
        self.flux_integral(phi_r.matrix(), t)
    }

    fn flux_integral(&self, phi: &CMatrix, t: f64) -> f64 {
        gauss_legendre(FLUX_QUADRATURE_NODES, 0.0, t)
            .into_iter()
            .map(|(s, w)| w * self.evolved_expectation(phi, s).re)
            .sum()
    }

    /// `2‖H_S ⊗ 1 + λV‖`, a uniform bound on both heats.
    pub fn heat_bound(&self) -> f64 {
        let m = self.embed_system(self.h_s.matrix()) + self.v.matrix() * c64(self.lambda, 0.0);
        2.0 * operator_norm(&m)
    }

    /// The same model with a different coupling constant.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        build_model(self.h_s.clone(), self.rho_s.clone(), self.h_r.clone(), self.v.clone(), lambda, self.beta)
    }

    /// The same model with a different initial system state.
    pub fn with_rho_s(&self, rho_s: DensityMatrix) -> Result<Self> {
        build_model(self.h_s.clone(), rho_s, self.h_r.clone(), self.v.clone(), self.lambda, self.beta)
    }

    /// Whether `[ρ_S, H_S] = 0` within `tol`.
    pub fn rho_commutes_with_h_s(&self, tol: f64) -> bool {
        crate::linalg::max_abs(&commutator(self.rho_s.matrix(), self.h_s.matrix())) <= tol
    }

    /// Content hash of every defining input, as 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for m in [self.h_s.matrix(), self.rho_s.matrix(), self.h_r.matrix(), self.v.matrix()] {
            hasher.update((m.nrows() as u64).to_le_bytes());
            for z in m.iter() {
                hasher.update(z.re.to_le_bytes());
                hasher.update(z.im.to_le_bytes());
            }
        }
        hasher.update(self.lambda.to_le_bytes());
        hasher.update(self.beta.to_le_bytes());
        let digest = hasher.finalize();
        hex::encode(&digest[..8])
    }
}
