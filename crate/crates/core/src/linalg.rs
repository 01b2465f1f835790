//! Dense complex Hermitian linear algebra.
//!
//! Every matrix function in the crate is evaluated through the spectral
//! resolution of a Hermitian matrix, so `e^{itH}`, `e^{-βH/2}` and fractional
//! powers of Gibbs states are mutually consistent to rounding.

use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance on `‖A − A*‖_max / ‖A‖_max` for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Density matrices may have eigenvalues down to this (negative) value.
pub const POSITIVITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `tr(X* Y)` without forming the product.
pub fn hs_inner(x: &CMatrix, y: &CMatrix) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus of `A − A*`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Operator norm, i.e. the largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Complex Ginibre matrix with independent standard normal real and imaginary parts.
pub fn random_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    hermitize(&random_matrix(dim, rng))
}

/// A square complex matrix equal to its adjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianObservable {
    entries: CMatrix,
}

impl HermitianObservable {
    /// Validates squareness, `dim ≥ 1` and Hermiticity within
    /// `HERMITIAN_TOL · max|entry|`. The stored matrix is the Hermitian part.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::validation("matrix", format!("not square ({}x{})", entries.nrows(), entries.ncols())));
        }
        if entries.nrows() == 0 {
            return Err(Error::validation("matrix", "dimension must be at least 1"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("matrix", "non-finite entry"));
        }
        let scale = max_abs(&entries);
        let defect = hermiticity_defect(&entries);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::validation("matrix", format!("not Hermitian (defect {defect:.3e}, scale {scale:.3e})")));
        }
        Ok(Self { entries: hermitize(&entries) })
    }

    /// Takes the Hermitian part of a square matrix without validation.
    pub(crate) fn hermitized(entries: &CMatrix) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self { entries: hermitize(entries) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self { entries: CMatrix::from_fn(d, d, |i, j| if i == j { c64(diag[i], 0.0) } else { c64(0.0, 0.0) }) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: CMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    /// Spectral resolution with the default degeneracy tolerance.
    pub fn spectral_resolution(&self) -> SpectralResolution {
        let (eigenvalues, basis) = sorted_eigen(&self.entries);
        let radius = eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max);
        group_levels(eigenvalues, basis, default_degeneracy_tol(radius))
    }
}

/// `1e-9 · max(1, spectral radius)`.
pub fn default_degeneracy_tol(spectral_radius: f64) -> f64 {
    1e-9 * spectral_radius.max(1.0)
}

/// Distinct eigenvalues of a Hermitian matrix, each with an orthonormal
/// eigenvector block. Eigenvalues closer than the tolerance (chained) are
/// merged into one level whose value is the mean of its members.
#[derive(Clone, Debug)]
pub struct SpectralResolution {
    eigenvalues: Vec<f64>,
    basis: CMatrix,
    levels: Vec<f64>,
    groups: Vec<Range<usize>>,
    tol: f64,
}

pub fn spectral_resolution(h: &HermitianObservable, degeneracy_tol: f64) -> Result<SpectralResolution> {
    if degeneracy_tol.is_nan() || degeneracy_tol <= 0.0 {
        return Err(Error::validation("degeneracy_tol", "must be positive"));
    }
    let (eigenvalues, basis) = sorted_eigen(h.matrix());
    Ok(group_levels(eigenvalues, basis, degeneracy_tol))
}

fn sorted_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let basis = CMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    (eigenvalues, basis)
}

fn group_levels(eigenvalues: Vec<f64>, basis: CMatrix, degeneracy_tol: f64) -> SpectralResolution {
    let d = eigenvalues.len();
    let mut groups = Vec::new();
    let mut start = 0;
    for k in 1..=d {
        if k == d || eigenvalues[k] - eigenvalues[k - 1] > degeneracy_tol {
            groups.push(start..k);
            start = k;
        }
    }
    let levels = groups.iter().map(|g| eigenvalues[g.clone()].iter().sum::<f64>() / g.len() as f64).collect();
    SpectralResolution { eigenvalues, basis, levels, groups, tol: degeneracy_tol }
}

impl SpectralResolution {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Distinct eigenvalues, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.tol
    }

    /// All eigenvalues with multiplicity, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues()`.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn group(&self, level: usize) -> Range<usize> {
        self.groups[level].clone()
    }

    /// Level index of every eigenvector column.
    pub fn level_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.dim()];
        for (l, g) in self.groups.iter().enumerate() {
            for k in g.clone() {
                labels[k] = l;
            }
        }
        labels
    }

    /// The level value attached to every eigenvector column.
    pub fn grouped_eigenvalues(&self) -> Vec<f64> {
        self.level_labels().into_iter().map(|l| self.levels[l]).collect()
    }

    pub fn projector(&self, level: usize) -> CMatrix {
        let block = self.basis.columns_range(self.groups[level].clone());
        block * block.adjoint()
    }

    pub fn projectors(&self) -> Vec<CMatrix> {
        (0..self.num_levels()).map(|l| self.projector(l)).collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.levels.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }

    pub fn min_level(&self) -> f64 {
        self.levels[0]
    }

    pub fn max_level(&self) -> f64 {
        *self.levels.last().expect("dim >= 1")
    }

    /// `Σ_e f(e) P_e`.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> Result<CMatrix> {
        matrix_function(self, f)
    }

    /// `Σ_e f(e) P_e` for an `f` known to be finite on the spectrum.
    pub(crate) fn apply_finite<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let values: Vec<C64> = self.grouped_eigenvalues().into_iter().map(f).collect();
        self.compose_diagonal(&values)
    }

    /// `Σ_l values[l] P_l` given one value per level.
    pub(crate) fn apply_levels(&self, values: &[C64]) -> CMatrix {
        let per_vector: Vec<C64> = self.level_labels().into_iter().map(|l| values[l]).collect();
        self.compose_diagonal(&per_vector)
    }

    /// `e^{izH}` for complex `z`.
    pub fn exp_i(&self, z: C64) -> CMatrix {
        self.apply_finite(|e| (C64::i() * z * e).exp())
    }

    /// `V diag(values) V*`.
    fn compose_diagonal(&self, values: &[C64]) -> CMatrix {
        let mut scaled = self.basis.clone();
        for (j, v) in values.iter().enumerate() {
            for z in scaled.column_mut(j).iter_mut() {
                *z *= v;
            }
        }
        scaled * self.basis.adjoint()
    }

    /// `Σ e·P_e`.
    pub fn reconstruct(&self) -> CMatrix {
        self.apply_finite(|e| c64(e, 0.0))
    }

    /// Rotate a matrix into the eigenbasis: `V* A V`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.basis.adjoint() * a * &self.basis
    }

    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.basis * a * self.basis.adjoint()
    }
}

/// `Σ_e f(e) P_e`. Fails if `f` is not finite on some eigenvalue.
pub fn matrix_function<F: Fn(f64) -> C64>(res: &SpectralResolution, f: F) -> Result<CMatrix> {
    let mut values = Vec::with_capacity(res.num_levels());
    for &e in res.levels() {
        let v = f(e);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Domain(format!("function not finite at eigenvalue {e}")));
        }
        values.push(v);
    }
    Ok(res.apply_levels(&values))
}

/// A positive semidefinite matrix, optionally of unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    normalized: bool,
}

impl DensityMatrix {
    /// A state: Hermitian, eigenvalues `≥ −POSITIVITY_TOL`, trace one within `TRACE_TOL`.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let rho = Self::positive(entries)?;
        let tr = trace(&rho.entries);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::validation("density matrix", format!("trace {tr} is not 1")));
        }
        Ok(Self { normalized: true, ..rho })
    }

    /// An unnormalized positive functional such as `1 ⊗ ω_R`.
    pub fn positive(entries: CMatrix) -> Result<Self> {
        let h = HermitianObservable::new(entries).map_err(|e| e.in_field("density matrix"))?;
        let res = h.spectral_resolution();
        if res.min_level() < -POSITIVITY_TOL {
            return Err(Error::validation("density matrix", format!("negative eigenvalue {:.3e}", res.min_level())));
        }
        Ok(Self { entries: h.into_matrix(), normalized: false })
    }

    pub(crate) fn from_trusted(entries: CMatrix, normalized: bool) -> Self {
        Self { entries: hermitize(&entries), normalized }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `tr(ρ A)`.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        trace_product(&self.entries, a)
    }

    pub fn spectral_resolution(&self) -> SpectralResolution {
        HermitianObservable::hermitized(&self.entries).spectral_resolution()
    }

    /// Positive square root, with slightly negative eigenvalues clamped to zero.
    pub fn sqrt(&self) -> CMatrix {
        self.spectral_resolution().apply_finite(|e| c64(e.max(0.0).sqrt(), 0.0))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectral_resolution().min_level()
    }

    /// Full rank within `1e-14` relative to the largest eigenvalue.
    pub fn is_faithful(&self) -> bool {
        let res = self.spectral_resolution();
        res.min_level() > KERNEL_TOL * res.max_level().max(f64::MIN_POSITIVE)
    }
}

/// Eigenvalues of a positive matrix below `KERNEL_TOL · λ_max` count as kernel.
pub const KERNEL_TOL: f64 = 1e-14;

/// `ζ^α` for positive semidefinite `ζ` by spectral calculus on the support.
///
/// Kernel directions map to zero when `Re α > 0`; on a singular `ζ` any
/// `Re α ≤ 0` is rejected.
pub fn positive_power(zeta: &CMatrix, alpha: C64) -> Result<CMatrix> {
    let h = HermitianObservable::new(zeta.clone())?;
    let res = h.spectral_resolution();
    let scale = res.max_level().max(0.0);
    if res.min_level() < -POSITIVITY_TOL * scale.max(1.0) {
        return Err(Error::validation("positive matrix", format!("negative eigenvalue {:.3e}", res.min_level())));
    }
    let cutoff = KERNEL_TOL * scale;
    let singular = res.min_level() <= cutoff;
    if singular && alpha.re <= 0.0 {
        return Err(Error::Domain(format!("power with Re α = {} of a singular positive matrix", alpha.re)));
    }
    Ok(res.apply_finite(|e| if e <= cutoff { c64(0.0, 0.0) } else { (alpha * e.ln()).exp() }))
}

/// Gibbs state `e^{−βH}/tr e^{−βH}`, evaluated with shifted exponents so that
/// no intermediate overflows for any finite β.
pub fn gibbs_state(h: &HermitianObservable, beta: f64) -> Result<DensityMatrix> {
    gibbs_from_resolution(&h.spectral_resolution(), beta)
}

pub fn gibbs_from_resolution(res: &SpectralResolution, beta: f64) -> Result<DensityMatrix> {
    let rho = gibbs_power(res, beta, c64(1.0, 0.0))?;
    Ok(DensityMatrix::from_trusted(rho, true))
}

/// `ln` of the Gibbs weight of each level, `−βe − ln Z`, computed without
/// forming `e^{−βe}`.
pub fn gibbs_log_weights(res: &SpectralResolution, beta: f64) -> Result<Vec<f64>> {
    if !beta.is_finite() {
        return Err(Error::validation("beta", "must be finite"));
    }
    let shift = if beta >= 0.0 { res.min_level() } else { res.max_level() };
    let exponents: Vec<f64> = res.levels().iter().map(|e| -beta * (e - shift)).collect();
    let z: f64 = exponents.iter().enumerate().map(|(l, x)| x.exp() * res.group(l).len() as f64).sum();
    let ln_z = z.ln();
    Ok(exponents.into_iter().map(|x| x - ln_z).collect())
}

/// `ω^α` for the Gibbs state `ω` of `res` at inverse temperature `β`.
pub fn gibbs_power(res: &SpectralResolution, beta: f64, alpha: C64) -> Result<CMatrix> {
    let values: Vec<C64> = gibbs_log_weights(res, beta)?.into_iter().map(|lw| (alpha * lw).exp()).collect();
    Ok(res.apply_levels(&values))
}

/// Heisenberg evolution `e^{itH} A e^{−itH}`.
pub fn heisenberg_evolve(a: &HermitianObservable, h: &HermitianObservable, t: f64) -> Result<HermitianObservable> {
    if a.dim() != h.dim() {
        return Err(Error::validation(
            "observable",
            format!("dimension {} does not match Hamiltonian dimension {}", a.dim(), h.dim()),
        ));
    }
    Ok(evolve_with(a.matrix(), &h.spectral_resolution(), t))
}

pub(crate) fn evolve_with(a: &CMatrix, res: &SpectralResolution, t: f64) -> HermitianObservable {
    let u = res.exp_i(c64(t, 0.0));
    HermitianObservable::hermitized(&(&u * a * u.adjoint()))
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut nodes = vec![(0.0, 0.0); n];
    let half = (b - a) / 2.0;
    let mid = (b + a) / 2.0;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = (mid - half * x, half * w);
        nodes[n - 1 - i] = (mid + half * x, half * w);
    }
    nodes
}
