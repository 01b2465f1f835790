//! Liouville-space machinery for finite matrix algebras.
//!
//! The GNS space of `M_d(ℂ)` with a faithful state is realized as `M_d(ℂ)`
//! itself with the Hilbert–Schmidt inner product `⟨X|Y⟩ = tr(X*Y)`. The
//! algebra acts by left multiplication, `J X = X*`, and the commutant acts by
//! right multiplication `Jπ(A)J X = X A*`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{
    c64, gibbs_log_weights, gibbs_power, hermitize, hs_inner, identity, kron, max_abs, positive_power, CMatrix,
    HermitianObservable, SpectralResolution, C64, KERNEL_TOL,
};
use crate::model::OpenSystemModel;

/// Largest `d` for which a `d² × d²` dense superoperator is materialized.
pub const DENSE_CAP: usize = 48;

/// A `d × d` matrix regarded as a vector of the GNS space.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleVector {
    matrix: CMatrix,
}

impl LiouvilleVector {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::validation("vector", format!("{}×{} is not square", matrix.nrows(), matrix.ncols())));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_square(matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tr(X*Y)`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        hs_inner(&self.matrix, &other.matrix)
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { matrix: &self.matrix * c }
    }

    /// Membership in the natural cone: Hermitian and positive semidefinite,
    /// both up to `tol` relative to the largest entry.
    pub fn in_natural_cone(&self, tol: f64) -> bool {
        let scale = max_abs(&self.matrix).max(1.0);
        if max_abs(&(&self.matrix - self.matrix.adjoint())) > tol * scale {
            return false;
        }
        let h = HermitianObservable::hermitized(&self.matrix);
        h.spectral_resolution().min_level() >= -tol * scale
    }
}

impl Add for &LiouvilleVector {
    type Output = LiouvilleVector;
    fn add(self, rhs: Self) -> LiouvilleVector {
        LiouvilleVector { matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &LiouvilleVector {
    type Output = LiouvilleVector;
    fn sub(self, rhs: Self) -> LiouvilleVector {
        LiouvilleVector { matrix: &self.matrix - &rhs.matrix }
    }
}

/// One term `X ↦ c·L·X·R`; a missing factor is the identity.
#[derive(Clone, Debug)]
pub struct Sandwich {
    pub coeff: C64,
    pub left: Option<CMatrix>,
    pub right: Option<CMatrix>,
}

impl Sandwich {
    fn apply(&self, x: &CMatrix) -> CMatrix {
        let lx = match &self.left {
            Some(l) => l * x,
            None => x.clone(),
        };
        let lxr = match &self.right {
            Some(r) => lx * r,
            None => lx,
        };
        lxr * self.coeff
    }

    fn compose(&self, inner: &Sandwich) -> Sandwich {
        Sandwich {
            coeff: self.coeff * inner.coeff,
            left: mul_opt(&self.left, &inner.left),
            right: mul_opt(&inner.right, &self.right),
        }
    }

    fn adjoint(&self) -> Sandwich {
        Sandwich {
            coeff: self.coeff.conj(),
            left: self.left.as_ref().map(|l| l.adjoint()),
            right: self.right.as_ref().map(|r| r.adjoint()),
        }
    }

    /// `vec(c·LXR) = c(Rᵀ ⊗ L) vec X` in column-major vectorization.
    fn dense(&self, d: usize) -> CMatrix {
        let id = identity(d);
        let l = self.left.as_ref().unwrap_or(&id);
        let r = self.right.as_ref().unwrap_or(&id);
        kron(&r.transpose(), l) * self.coeff
    }
}

fn mul_opt(a: &Option<CMatrix>, b: &Option<CMatrix>) -> Option<CMatrix> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a * b),
        (Some(a), None) => Some(a.clone()),
        (None, Some(b)) => Some(b.clone()),
        (None, None) => None,
    }
}

/// A linear map on the GNS space, held as a finite sum of sandwiches.
///
/// Composition multiplies sums out, so every map stays in sandwich form.
/// The dense `d² × d²` matrix is built on request, at most once.
#[derive(Clone, Debug)]
pub struct Superoperator {
    dim: usize,
    terms: Vec<Sandwich>,
    dense: OnceLock<CMatrix>,
}

impl Superoperator {
    pub fn from_terms(dim: usize, terms: Vec<Sandwich>) -> Result<Self> {
        for t in &terms {
            for m in [&t.left, &t.right].into_iter().flatten() {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::validation(
                        "superoperator",
                        format!("factor {}×{} in a map on {dim}×{dim} matrices", m.nrows(), m.ncols()),
                    ));
                }
            }
        }
        Ok(Self::from_trusted(dim, terms))
    }

    fn from_trusted(dim: usize, terms: Vec<Sandwich>) -> Self {
        Self { dim, terms, dense: OnceLock::new() }
    }

    fn single(dim: usize, left: Option<CMatrix>, right: Option<CMatrix>) -> Self {
        Self::from_trusted(dim, vec![Sandwich { coeff: c64(1.0, 0.0), left, right }])
    }

    pub fn identity(dim: usize) -> Self {
        Self::single(dim, None, None)
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_trusted(dim, Vec::new())
    }

    /// `X ↦ L X R`.
    pub fn sandwich(left: CMatrix, right: CMatrix) -> Result<Self> {
        let dim = left.nrows();
        Self::from_terms(dim, vec![Sandwich { coeff: c64(1.0, 0.0), left: Some(left), right: Some(right) }])
    }

    /// Matrix dimension `d`; the map acts on a space of dimension `d²`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Sandwich] {
        &self.terms
    }

    pub fn apply(&self, x: &LiouvilleVector) -> Result<LiouvilleVector> {
        if x.dim() != self.dim {
            return Err(Error::validation(
                "vector",
                format!("dimension {} for a map on {}×{} matrices", x.dim(), self.dim, self.dim),
            ));
        }
        Ok(LiouvilleVector::from_square(self.apply_matrix(x.matrix())))
    }

    pub(crate) fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            out += t.apply(x);
        }
        out
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Superoperator) -> Result<Superoperator> {
        self.check_same_dim(inner)?;
        let terms = self.terms.iter().flat_map(|a| inner.terms.iter().map(move |b| a.compose(b))).collect();
        Ok(Self::from_trusted(self.dim, terms))
    }

    pub fn add(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_same_dim(other)?;
        let terms = self.terms.iter().chain(other.terms.iter()).cloned().collect();
        Ok(Self::from_trusted(self.dim, terms))
    }

    pub fn scale(&self, c: C64) -> Superoperator {
        let terms = self.terms.iter().map(|t| Sandwich { coeff: t.coeff * c, ..t.clone() }).collect();
        Self::from_trusted(self.dim, terms)
    }

    /// Hilbert–Schmidt adjoint: `(X ↦ LXR)* = (Y ↦ L*YR*)`.
    pub fn adjoint(&self) -> Superoperator {
        Self::from_trusted(self.dim, self.terms.iter().map(Sandwich::adjoint).collect())
    }

    /// Dense `d² × d²` matrix acting on column-major `vec X`.
    pub fn dense(&self) -> Result<&CMatrix> {
        if self.dim > DENSE_CAP {
            return Err(Error::ResourceCap { what: "dense superoperator".into(), dim: self.dim, cap: DENSE_CAP });
        }
        Ok(self.dense.get_or_init(|| {
            let n = self.dim * self.dim;
            let mut out = CMatrix::zeros(n, n);
            for t in &self.terms {
                out += t.dense(self.dim);
            }
            out
        }))
    }

    fn check_same_dim(&self, other: &Superoperator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::validation(
                "superoperator",
                format!("dimensions {} and {} differ", self.dim, other.dim),
            ));
        }
        Ok(())
    }
}

impl Mul<&Superoperator> for &Superoperator {
    type Output = Superoperator;
    fn mul(self, rhs: &Superoperator) -> Superoperator {
        self.compose(rhs).expect("composition of superoperators of different dimension")
    }
}

impl Neg for &Superoperator {
    type Output = Superoperator;
    fn neg(self) -> Superoperator {
        self.scale(c64(-1.0, 0.0))
    }
}

/// Column-major `vec X`.
pub fn vectorize(x: &CMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &nalgebra::DVector<C64>, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// `π(A)`: `X ↦ AX`.
pub fn left_action(a: &CMatrix) -> Result<Superoperator> {
    square_dim(a)?;
    Ok(Superoperator::single(a.nrows(), Some(a.clone()), None))
}

/// `X ↦ XB`.
pub fn right_action(b: &CMatrix) -> Result<Superoperator> {
    square_dim(b)?;
    Ok(Superoperator::single(b.nrows(), None, Some(b.clone())))
}

/// `Jπ(A)J`: `X ↦ XA*`.
pub fn commutant_action(a: &CMatrix) -> Result<Superoperator> {
    right_action(&a.adjoint())
}

fn square_dim(a: &CMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::validation("matrix", format!("{}×{} is not square", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

/// `J X = X*`. Antilinear and involutive.
pub fn modular_conjugation(x: &LiouvilleVector) -> LiouvilleVector {
    LiouvilleVector::from_square(x.matrix().adjoint())
}

fn require_definite(xi: &CMatrix) -> Result<()> {
    let res = HermitianObservable::new(xi.clone()).map_err(|e| e.in_field("xi"))?.spectral_resolution();
    if res.min_level() <= KERNEL_TOL * res.max_level().max(0.0) {
        return Err(Error::Domain(format!(
            "relative modular operator needs a positive definite reference, smallest eigenvalue {:.3e}",
            res.min_level()
        )));
    }
    Ok(())
}

/// `Δ_{ζ|ξ}^α`: `X ↦ ζ^α X ξ^{−α}`.
pub fn relative_modular_operator(zeta: &CMatrix, xi: &CMatrix, alpha: C64) -> Result<Superoperator> {
    if zeta.shape() != xi.shape() {
        return Err(Error::validation("zeta", "dimension differs from xi"));
    }
    require_definite(xi)?;
    let left = positive_power(zeta, alpha).map_err(|e| e.in_field("zeta"))?;
    let right = positive_power(xi, -alpha)?;
    Superoperator::sandwich(left, right)
}

/// `Δ_{ζ|ξ}^α X = ζ^α X ξ^{−α}`.
pub fn relative_modular_power(
    zeta: &CMatrix,
    xi: &CMatrix,
    alpha: C64,
    x: &LiouvilleVector,
) -> Result<LiouvilleVector> {
    relative_modular_operator(zeta, xi, alpha)?.apply(x)
}

/// The generator `X ↦ AX − XB` with `A`, `B` Hermitian.
///
/// Its exponential is a single sandwich, `e^{zL}X = e^{zA} X e^{−zB}`, for
/// every complex `z`.
#[derive(Clone, Debug)]
pub struct Liouvillean {
    left: SpectralResolution,
    right: SpectralResolution,
}

impl Liouvillean {
    pub fn new(left: &HermitianObservable, right: &HermitianObservable) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::validation("liouvillean", "left and right generators differ in dimension"));
        }
        Ok(Self::from_resolutions(left.spectral_resolution(), right.spectral_resolution()))
    }

    fn from_resolutions(left: SpectralResolution, right: SpectralResolution) -> Self {
        Self { left, right }
    }

    pub fn dim(&self) -> usize {
        self.left.dim()
    }

    pub fn left_resolution(&self) -> &SpectralResolution {
        &self.left
    }

    pub fn right_resolution(&self) -> &SpectralResolution {
        &self.right
    }

    pub fn apply(&self, x: &LiouvilleVector) -> Result<LiouvilleVector> {
        self.to_superoperator().apply(x)
    }

    /// `π(A) − (X ↦ XB)` in sandwich form.
    pub fn to_superoperator(&self) -> Superoperator {
        let a = self.left.reconstruct();
        let b = self.right.reconstruct();
        Superoperator::from_trusted(
            self.dim(),
            vec![
                Sandwich { coeff: c64(1.0, 0.0), left: Some(a), right: None },
                Sandwich { coeff: c64(-1.0, 0.0), left: None, right: Some(b) },
            ],
        )
    }

    /// `e^{zL}`, i.e. `X ↦ e^{zA} X e^{−zB}`.
    pub fn exp(&self, z: C64) -> Superoperator {
        let (l, r) = self.exp_factors(z);
        Superoperator::single(self.dim(), Some(l), Some(r))
    }

    /// The pair `(e^{zA}, e^{−zB})`.
    pub fn exp_factors(&self, z: C64) -> (CMatrix, CMatrix) {
        let minus_i = c64(0.0, -1.0);
        (self.left.exp_i(minus_i * z), self.right.exp_i(-minus_i * z))
    }

    /// All differences `a − b` over eigenvalues of `A` and `B`, with multiplicity, sorted.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut out: Vec<f64> =
            self.left.eigenvalues().iter().flat_map(|a| self.right.eigenvalues().iter().map(move |b| a - b)).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// Orthogonal projection onto `ker L`: `X ↦ Σ Π^A_μ X Π^B_ν` over level
    /// pairs with `|a_μ − b_ν| ≤ tol`.
    pub fn kernel_projector(&self, tol: f64) -> Superoperator {
        let mut terms = Vec::new();
        for (mu, a) in self.left.levels().iter().enumerate() {
            for (nu, b) in self.right.levels().iter().enumerate() {
                if (a - b).abs() <= tol {
                    terms.push(Sandwich {
                        coeff: c64(1.0, 0.0),
                        left: Some(self.left.projector(mu)),
                        right: Some(self.right.projector(nu)),
                    });
                }
            }
        }
        Superoperator::from_trusted(self.dim(), terms)
    }
}

/// Which standard Liouvillean to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiouvilleanKind {
    /// `X ↦ [H_0, X]`.
    Free,
    /// `X ↦ [H_λ, X]`.
    Coupled,
    /// `X ↦ H_λX − X(1 ⊗ H_R)`.
    Hat,
}

pub fn standard_liouvillean(m: &OpenSystemModel, which: LiouvilleanKind) -> Liouvillean {
    let (l, r) = match which {
        LiouvilleanKind::Free => (m.free_resolution().clone(), m.free_resolution().clone()),
        LiouvilleanKind::Coupled => (m.coupled_resolution().clone(), m.coupled_resolution().clone()),
        LiouvilleanKind::Hat => (m.coupled_resolution().clone(), embedded_reservoir_resolution(m)),
    };
    Liouvillean::from_resolutions(l, r)
}

/// `L_0 + λπ(V)`: `X ↦ H_λX − XH_0`.
pub fn perturbed_free_liouvillean(m: &OpenSystemModel) -> Liouvillean {
    Liouvillean::from_resolutions(m.coupled_resolution().clone(), m.free_resolution().clone())
}

/// `L_R`: `X ↦ [1 ⊗ H_R, X]`.
pub fn reservoir_liouvillean(m: &OpenSystemModel) -> Liouvillean {
    let r = embedded_reservoir_resolution(m);
    Liouvillean::from_resolutions(r.clone(), r)
}

fn embedded_reservoir_resolution(m: &OpenSystemModel) -> SpectralResolution {
    HermitianObservable::hermitized(&m.embed_reservoir(m.h_r().matrix())).spectral_resolution()
}

/// `u_t = e^{itH_λ} e^{−itH_0}`, the unitary implementing the cocycle.
pub fn cocycle_unitary(m: &OpenSystemModel, t: f64) -> CMatrix {
    m.coupled_resolution().exp_i(c64(t, 0.0)) * m.free_resolution().exp_i(c64(-t, 0.0))
}

/// `Γ_λ(t) = e^{it(L_0+λπ(V))} e^{−itL_0}`, which is left multiplication by `u_t`.
pub fn cocycle(m: &OpenSystemModel, t: f64) -> Superoperator {
    Superoperator::single(m.dim(), Some(cocycle_unitary(m, t)), None)
}

/// `Ω_λ = e^{−βH_λ/2} / √Z_0` with `Z_0 = tr e^{−βH_0}`.
pub fn araki_vector(m: &OpenSystemModel) -> LiouvilleVector {
    let beta = m.beta();
    let shift = m.coupled_resolution().min_level().min(m.free_resolution().min_level());
    let free = m.free_resolution();
    let z0: f64 =
        free.levels().iter().enumerate().map(|(l, e)| (-beta * (e - shift)).exp() * free.group(l).len() as f64).sum();
    let norm = z0.sqrt();
    let omega = m.coupled_resolution().apply_finite(|e| c64((-beta * (e - shift) / 2.0).exp() / norm, 0.0));
    LiouvilleVector::from_square(hermitize(&omega))
}

/// `Ω = ρ_S^{1/2} ⊗ ω_R^{1/2}`, the vector of the initial state.
pub fn initial_vector(m: &OpenSystemModel) -> LiouvilleVector {
    let half = reservoir_half_power(m);
    LiouvilleVector::from_square(kron(&m.rho_s().sqrt(), &half))
}

/// `Ω_η = 1 ⊗ ω_R^{1/2}`.
pub fn reference_vector(m: &OpenSystemModel) -> LiouvilleVector {
    LiouvilleVector::from_square(m.embed_reservoir(&reservoir_half_power(m)))
}

/// `Ω_0 = (ω_S ⊗ ω_R)^{1/2}`.
pub fn free_equilibrium_vector(m: &OpenSystemModel) -> LiouvilleVector {
    let s = gibbs_power(m.system_resolution(), m.beta(), c64(0.5, 0.0)).expect("beta validated at construction");
    LiouvilleVector::from_square(kron(&s, &reservoir_half_power(m)))
}

/// `Ω̂ = ρ_S ⊗ ω_R^{1/2} = π(ρ_S^{1/2} ⊗ 1)Ω`.
pub fn hat_vector(m: &OpenSystemModel) -> LiouvilleVector {
    LiouvilleVector::from_square(kron(m.rho_s().matrix(), &reservoir_half_power(m)))
}

/// `ω_R^α` from the closed-form Gibbs weights.
pub fn reservoir_gibbs_power(m: &OpenSystemModel, alpha: C64) -> CMatrix {
    gibbs_power(m.reservoir_resolution(), m.beta(), alpha).expect("beta validated at construction")
}

fn reservoir_half_power(m: &OpenSystemModel) -> CMatrix {
    reservoir_gibbs_power(m, c64(0.5, 0.0))
}

/// `(1 ⊗ ω_R)^α` in closed form; defined for every complex `α` since
/// `1 ⊗ ω_R` is positive definite.
pub fn reference_power(m: &OpenSystemModel, alpha: C64) -> CMatrix {
    m.embed_reservoir(&reservoir_gibbs_power(m, alpha))
}

/// Density of the evolved functional `η ∘ τ_λ^{−t}`:
/// `e^{itH_λ}(1 ⊗ ω_R)e^{−itH_λ}`, re-Hermitized.
pub fn evolved_functional_density(m: &OpenSystemModel, t: f64) -> CMatrix {
    hermitize(&m.evolve_observable(m.eta().matrix(), t))
}

/// `ζ_t^α` for the evolved density, built from `(1 ⊗ ω_R)^α` by the same
/// unitary conjugation, so that no eigendecomposition of `ζ_t` is needed.
pub fn evolved_functional_power(m: &OpenSystemModel, t: f64, alpha: C64) -> CMatrix {
    m.evolve_observable(&reference_power(m, alpha), t)
}

/// Natural log of the reservoir Gibbs weights, one per reservoir level.
pub fn reservoir_log_weights(m: &OpenSystemModel) -> Vec<f64> {
    gibbs_log_weights(m.reservoir_resolution(), m.beta()).expect("beta validated at construction")
}
