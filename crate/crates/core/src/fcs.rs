//! Full counting statistics of the two-time energy measurement protocol.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c64, hs_inner, CMatrix, HermitianObservable, SpectralResolution, C64};
use crate::model::OpenSystemModel;
use crate::modular::{
    evolved_functional_density, evolved_functional_power, initial_vector, reference_power, relative_modular_operator,
    reservoir_log_weights, vectorize, DENSE_CAP,
};

/// Atoms closer than this (energy units) are merged.
pub const COALESCING_TOL: f64 = 1e-8;
/// Negative weights down to `−WEIGHT_FLOOR` are rounding noise and clamp to zero.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-10;
/// Atoms at or below this weight are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

/// A finitely supported probability measure on the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
    coalescing_tol: f64,
}

impl AtomicMeasure {
    /// Sorts, merges atoms within [`COALESCING_TOL`], prunes negligible
    /// weights and renormalizes.
    pub fn new(raw: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_tolerance(raw, COALESCING_TOL)
    }

    pub fn with_tolerance(mut raw: Vec<(f64, f64)>, coalescing_tol: f64) -> Result<Self> {
        if coalescing_tol.is_nan() || coalescing_tol < 0.0 {
            return Err(Error::validation("coalescing_tol", "must be non-negative"));
        }
        for (loc, w) in raw.iter_mut() {
            if !loc.is_finite() || !w.is_finite() {
                return Err(Error::validation("atoms", "non-finite location or weight"));
            }
            if *w < -WEIGHT_FLOOR {
                return Err(Error::validation("atoms", format!("negative weight {w:.3e} at {loc}")));
            }
            *w = w.max(0.0);
        }
        let mass: f64 = raw.iter().map(|a| a.1).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::validation("atoms", format!("total mass {mass} is not 1")));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        let mut i = 0;
        while i < raw.len() {
            let mut j = i + 1;
            while j < raw.len() && raw[j].0 - raw[j - 1].0 <= coalescing_tol {
                j += 1;
            }
            let group = &raw[i..j];
            let w: f64 = group.iter().map(|a| a.1).sum();
            let loc = if w > 0.0 {
                group.iter().map(|a| a.0 * a.1).sum::<f64>() / w
            } else {
                group.iter().map(|a| a.0).sum::<f64>() / group.len() as f64
            };
            atoms.push((loc + 0.0, w));
            i = j;
        }
        atoms.retain(|a| a.1 > PRUNE_TOL);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        for a in atoms.iter_mut() {
            a.1 /= total;
        }
        Ok(Self { atoms, coalescing_tol })
    }

    pub fn point_mass(location: f64) -> Self {
        Self { atoms: vec![(location + 0.0, 1.0)], coalescing_tol: COALESCING_TOL }
    }

    /// `(location, weight)` pairs in ascending location order.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn coalescing_tol(&self) -> f64 {
        self.coalescing_tol
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_point_mass_at(&self, location: f64, tol: f64) -> bool {
        self.atoms.len() == 1 && (self.atoms[0].0 - location).abs() <= tol
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `Σ w·x^k`.
    pub fn moment(&self, k: u32) -> f64 {
        self.atoms.iter().map(|(x, w)| w * x.powi(k as i32)).sum()
    }

    /// `μ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    /// `Σ w·e^{iγx}`.
    pub fn char_function(&self, gamma: f64) -> C64 {
        self.atoms.iter().map(|(x, w)| C64::from_polar(*w, gamma * x)).sum()
    }

    /// Largest CDF gap. Locations of the two measures within the larger
    /// coalescing tolerance are treated as one point.
    pub fn kolmogorov_distance(&self, other: &AtomicMeasure) -> f64 {
        let tol = self.coalescing_tol.max(other.coalescing_tol);
        let mut merged: Vec<(f64, f64)> =
            self.atoms.iter().map(|&(x, w)| (x, w)).chain(other.atoms.iter().map(|&(x, w)| (x, -w))).collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut gap: f64 = 0.0;
        let mut diff = 0.0;
        let mut i = 0;
        while i < merged.len() {
            let mut j = i;
            while j < merged.len() && merged[j].0 - merged[i].0 <= tol {
                diff += merged[j].1;
                j += 1;
            }
            gap = gap.max(diff.abs());
            i = j;
        }
        gap.min(1.0)
    }

    /// Aligns atoms of the two measures (locations within `tol`) and reports
    /// the worst location and weight mismatch; an unmatched atom counts as a
    /// weight mismatch against zero.
    pub fn compare(&self, other: &AtomicMeasure, tol: f64) -> AtomComparison {
        let mut merged: Vec<(f64, f64, bool)> = self
            .atoms
            .iter()
            .map(|&(x, w)| (x, w, true))
            .chain(other.atoms.iter().map(|&(x, w)| (x, w, false)))
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = AtomComparison::default();
        let mut i = 0;
        while i < merged.len() {
            let mut j = i + 1;
            while j < merged.len() && merged[j].0 - merged[j - 1].0 <= tol {
                j += 1;
            }
            let group = &merged[i..j];
            let (mut wa, mut wb) = (0.0, 0.0);
            for g in group {
                if g.2 {
                    wa += g.1;
                } else {
                    wb += g.1;
                }
            }
            out.max_weight_error = out.max_weight_error.max((wa - wb).abs());
            if group.iter().any(|g| g.2) && group.iter().any(|g| !g.2) {
                out.max_location_error = out.max_location_error.max(group[j - i - 1].0 - group[0].0);
            }
            i = j;
        }
        out
    }

    /// CSV with header `location,weight`; values print in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("location,weight\n");
        for (x, w) in &self.atoms {
            writeln!(s, "{x},{w}").expect("writing to a String cannot fail");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Worst mismatch between two aligned atomic measures.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AtomComparison {
    pub max_location_error: f64,
    pub max_weight_error: f64,
}

impl AtomComparison {
    pub fn within(&self, tol: f64) -> bool {
        self.max_location_error <= tol && self.max_weight_error <= tol
    }
}

pub fn char_function(mu: &AtomicMeasure, gamma: f64) -> C64 {
    mu.char_function(gamma)
}

pub fn measure_moment(mu: &AtomicMeasure, k: u32) -> f64 {
    mu.moment(k)
}

pub fn kolmogorov_distance(mu: &AtomicMeasure, nu: &AtomicMeasure) -> f64 {
    mu.kolmogorov_distance(nu)
}

/// Which energy is counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    System,
    Reservoir,
}

/// How the time dependence of the protocol weights is resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Horizon {
    /// Weights at a fixed time.
    At(f64),
    /// Infinite-time average: only equal-energy pairs of `H_λ` survive.
    Cesaro,
}

/// Phase factors `e^{−it(E_i−E_j)}` of the two-time weights in the `H_λ`
/// eigenbasis, or the equal-level mask for the infinite-time average.
fn phase_matrix(res: &SpectralResolution, horizon: Horizon) -> CMatrix {
    let e = res.eigenvalues();
    let d = e.len();
    match horizon {
        Horizon::At(t) => CMatrix::from_fn(d, d, |i, j| C64::from_polar(1.0, -t * (e[i] - e[j]))),
        Horizon::Cesaro => {
            let labels = res.level_labels();
            CMatrix::from_fn(d, d, |i, j| if labels[i] == labels[j] { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
        }
    }
}

/// `W[a][b] = tr(σ_a τ_λ^t(B_b))`, or its infinite-time average, computed in
/// the eigenbasis of `H_λ` as `Σ_ij (σ̃_a)_ij (B̃_b)_ji e^{−it(E_i−E_j)}`.
pub(crate) fn two_time_weights(
    res: &SpectralResolution,
    initial: &[CMatrix],
    finals: &[CMatrix],
    horizon: Horizon,
) -> Vec<Vec<f64>> {
    let phases = phase_matrix(res, horizon);
    let finals_t: Vec<CMatrix> = finals.par_iter().map(|b| res.to_eigenbasis(b).transpose()).collect();
    initial
        .par_iter()
        .map(|sigma| {
            let s = res.to_eigenbasis(sigma).component_mul(&phases);
            finals_t.iter().map(|bt| s.iter().zip(bt.iter()).map(|(x, y)| x * y).sum::<C64>().re).collect()
        })
        .collect()
}

/// Atoms `(loc(a, b), W[a][b])`.
fn atoms_from_table<F: Fn(usize, usize) -> f64>(table: &[Vec<f64>], loc: F) -> Vec<(f64, f64)> {
    table
        .iter()
        .enumerate()
        .flat_map(|(a, row)| row.iter().enumerate().map(move |(b, &w)| (a, b, w)))
        .map(|(a, b, w)| (loc(a, b), w))
        .collect()
}

/// Initial pieces `P_e ρ_S P_e ⊗ ω_R` and final observables `P_{e′} ⊗ 1`.
fn system_protocol(m: &OpenSystemModel) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let projectors = m.system_resolution().projectors();
    let rho = m.rho_s().matrix();
    let initial = projectors.iter().map(|p| crate::linalg::kron(&(p * rho * p), m.omega_r().matrix())).collect();
    let finals = projectors.iter().map(|p| m.embed_system(p)).collect();
    (initial, finals)
}

/// Initial pieces `ρ_S ⊗ P_ε ω_R P_ε` and final observables `1 ⊗ P_{ε′}`.
fn reservoir_protocol(m: &OpenSystemModel) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let projectors = m.reservoir_resolution().projectors();
    let omega_r = m.omega_r().matrix();
    let initial = projectors.iter().map(|p| crate::linalg::kron(m.rho_s().matrix(), &(p * omega_r * p))).collect();
    let finals = projectors.iter().map(|p| m.embed_reservoir(p)).collect();
    (initial, finals)
}

pub(crate) fn protocol_measure(m: &OpenSystemModel, which: Subsystem, horizon: Horizon) -> Result<AtomicMeasure> {
    let res = m.coupled_resolution();
    match which {
        Subsystem::System => {
            let (initial, finals) = system_protocol(m);
            let table = two_time_weights(res, &initial, &finals, horizon);
            let levels = m.system_resolution().levels();
            AtomicMeasure::new(atoms_from_table(&table, |a, b| levels[b] - levels[a]))
        }
        Subsystem::Reservoir => {
            let (initial, finals) = reservoir_protocol(m);
            let table = two_time_weights(res, &initial, &finals, horizon);
            let levels = m.reservoir_resolution().levels();
            AtomicMeasure::new(atoms_from_table(&table, |a, b| levels[a] - levels[b]))
        }
    }
}

/// Law of `e′ − e`: the system energy is measured as `e`, the coupled
/// dynamics runs for time `t`, and the system energy is measured as `e′`.
pub fn fcs_system(m: &OpenSystemModel, t: f64) -> Result<AtomicMeasure> {
    if t == 0.0 || m.lambda() == 0.0 {
        return Ok(AtomicMeasure::point_mass(0.0));
    }
    protocol_measure(m, Subsystem::System, Horizon::At(t))
}

/// Law of `ε − ε′`, the decrease of the reservoir energy over time `t`.
pub fn fcs_reservoir_direct(m: &OpenSystemModel, t: f64) -> Result<AtomicMeasure> {
    if t == 0.0 || m.lambda() == 0.0 {
        return Ok(AtomicMeasure::point_mass(0.0));
    }
    protocol_measure(m, Subsystem::Reservoir, Horizon::At(t))
}

/// Measures of one subsystem on a grid of times, evaluated in parallel.
pub fn fcs_time_grid(m: &OpenSystemModel, which: Subsystem, times: &[f64]) -> Result<Vec<AtomicMeasure>> {
    times
        .par_iter()
        .map(|&t| match which {
            Subsystem::System => fcs_system(m, t),
            Subsystem::Reservoir => fcs_reservoir_direct(m, t),
        })
        .collect()
}

/// Evaluation strategy for the modular form of the reservoir measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModularPath {
    /// Diagonalize the `d² × d²` relative modular operator. Limited to `d ≤ DENSE_CAP`.
    Dense,
    /// Use the eigenbases of the two densities separately, which works at any size.
    Structured,
}

/// Spectral measure of `(1/β) log Δ_{η∘τ_λ^{−t}|η}` in the vector `Ω`,
/// using the dense path.
pub fn fcs_reservoir_modular(m: &OpenSystemModel, t: f64) -> Result<AtomicMeasure> {
    fcs_reservoir_modular_with(m, t, ModularPath::Dense)
}

/// At `t = 0` or `λ = 0` the evolved functional is `η` itself and `Δ_η Ω = Ω`,
/// so the measure is the point mass at zero.
pub fn fcs_reservoir_modular_with(m: &OpenSystemModel, t: f64, path: ModularPath) -> Result<AtomicMeasure> {
    if path == ModularPath::Dense && m.dim() > DENSE_CAP {
        return Err(Error::ResourceCap {
            what: "dense relative modular operator".into(),
            dim: m.dim(),
            cap: DENSE_CAP,
        });
    }
    if t == 0.0 || m.lambda() == 0.0 {
        return Ok(AtomicMeasure::point_mass(0.0));
    }
    match path {
        ModularPath::Dense => modular_dense(m, t),
        ModularPath::Structured => modular_structured(m, t),
    }
}

fn modular_dense(m: &OpenSystemModel, t: f64) -> Result<AtomicMeasure> {
    let d = m.dim();
    if d > DENSE_CAP {
        return Err(Error::ResourceCap { what: "dense relative modular operator".into(), dim: d, cap: DENSE_CAP });
    }
    let zeta = evolved_functional_density(m, t);
    let delta = relative_modular_operator(&zeta, m.eta().matrix(), c64(1.0, 0.0))?;
    let dense = delta.dense()?;
    let h = HermitianObservable::hermitized(dense);
    let eig = nalgebra::SymmetricEigen::new(h.into_matrix());
    let omega = vectorize(initial_vector(m).matrix());
    let beta = m.beta();
    let mut atoms = Vec::with_capacity(eig.eigenvalues.len());
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        let w = eig.eigenvectors.column(k).dotc(&omega).norm_sqr();
        if w <= PRUNE_TOL {
            continue;
        }
        if mu.is_nan() || mu <= 0.0 {
            return Err(Error::Domain(format!("relative modular operator has non-positive eigenvalue {mu:.3e}")));
        }
        atoms.push((mu.ln() / beta, w));
    }
    AtomicMeasure::new(atoms)
}

/// With `η = U diag(y) U*` and `ζ_t = W diag(y) W*`, `W = e^{itH_λ}U`, the
/// weight of `(1/β)(ln y_i − ln y_j)` is `|(W*ΩU)_ij|²`.
fn modular_structured(m: &OpenSystemModel, t: f64) -> Result<AtomicMeasure> {
    let d_s = m.system_dim();
    let res_r = m.reservoir_resolution();
    let u = crate::linalg::kron(&crate::linalg::identity(d_s), res_r.basis());
    let w = m.coupled_resolution().exp_i(c64(t, 0.0)) * &u;
    let omega = initial_vector(m);
    let mm = w.adjoint() * omega.matrix() * &u;
    let log_w = reservoir_log_weights(m);
    let labels = res_r.level_labels();
    let log_y: Vec<f64> = (0..m.dim()).map(|k| log_w[labels[k % res_r.dim()]]).collect();
    let beta = m.beta();
    let atoms = mm
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let (i, j) = (idx % mm.nrows(), idx / mm.nrows());
            ((log_y[i] - log_y[j]) / beta, z.norm_sqr())
        })
        .collect();
    AtomicMeasure::new(atoms)
}

/// `𝓕_{λ,t}(α) = ⟨Ω|Δ^α_{η∘τ_λ^{−t}|η} Ω⟩ = tr(Ω ζ_t^α Ω η^{−α})` for
/// `0 ≤ Re α ≤ 1`.
#[allow(non_snake_case)]
pub fn calF(m: &OpenSystemModel, t: f64, alpha: C64) -> Result<C64> {
    if !(0.0..=1.0).contains(&alpha.re) || !alpha.im.is_finite() {
        return Err(Error::Domain(format!("Re α = {} outside [0, 1]", alpha.re)));
    }
    if alpha == c64(0.0, 0.0) {
        return Ok(c64(1.0, 0.0));
    }
    let omega = initial_vector(m);
    let left = evolved_functional_power(m, t, alpha);
    let right = reference_power(m, -alpha);
    let x = left * omega.matrix() * right;
    Ok(hs_inner(omega.matrix(), &x))
}

pub fn write_measure_csv(mu: &AtomicMeasure, path: &Path) -> Result<()> {
    mu.write_csv(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, kron, DensityMatrix};
    use crate::model::build_model;

    fn sx() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
    }

    fn model(lambda: f64, rho: [f64; 2]) -> OpenSystemModel {
        let h_s = HermitianObservable::from_real_diagonal(&[0.0, 2.0]);
        let rho = DensityMatrix::new(HermitianObservable::from_real_diagonal(&rho).into_matrix()).unwrap();
        let h_r = HermitianObservable::from_real_diagonal(&[0.0, 1.3, 2.1]);
        let x3 = CMatrix::from_fn(3, 3, |i, j| if i.abs_diff(j) == 1 { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
        let v = HermitianObservable::new(kron(&sx(), &x3)).unwrap();
        build_model(h_s, rho, h_r, v, lambda, 0.8).unwrap()
    }

    #[test]
    fn measure_normalization() {
        let mu = AtomicMeasure::new(vec![(1.0, 0.5), (-1.0, 0.5), (1.0 + 1e-10, 0.0), (3.0, -1e-13)]).unwrap();
        assert_eq!(mu.atoms(), &[(-1.0, 0.5), (1.0, 0.5)]);
        assert!(AtomicMeasure::new(vec![(0.0, 1.1), (1.0, -0.1)]).is_err());
        assert!(AtomicMeasure::new(vec![(0.0, 0.5)]).is_err());
        assert_eq!(AtomicMeasure::new(vec![(-0.0, 1.0)]).unwrap().to_csv(), "location,weight\n0,1\n");
    }

    #[test]
    fn coalesced_location_is_weighted_mean() {
        let mu = AtomicMeasure::new(vec![(1.0, 0.25), (1.0 + 4e-9, 0.75)]).unwrap();
        assert_eq!(mu.len(), 1);
        assert!((mu.atoms()[0].0 - (1.0 + 3e-9)).abs() < 1e-15);
    }

    #[test]
    fn measure_functionals() {
        let mu = AtomicMeasure::new(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!((mu.char_function(std::f64::consts::PI) - c64(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(mu.mean(), 0.0);
        assert_eq!(mu.moment(2), 1.0);
        assert_eq!(mu.cdf(0.0), 0.5);
        let delta = AtomicMeasure::point_mass(0.0);
        assert_eq!(delta.moment(3), 0.0);
        assert_eq!(delta.char_function(7.0), c64(1.0, 0.0));
        assert_eq!(mu.kolmogorov_distance(&mu), 0.0);
        assert_eq!(mu.kolmogorov_distance(&delta), 0.5);
        let far = AtomicMeasure::point_mass(5.0);
        assert_eq!(delta.kolmogorov_distance(&far), 1.0);
    }

    #[test]
    fn compare_aligns_atoms() {
        let a = AtomicMeasure::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let b = AtomicMeasure::new(vec![(1e-9, 0.5), (1.0, 0.5 - 1e-12), (2.0, 1e-12)]).unwrap();
        let c = a.compare(&b, 1e-8);
        assert!(c.within(1e-8));
        assert!(c.max_location_error > 0.0);
    }

    #[test]
    fn degenerate_times_and_couplings_give_point_mass() {
        let m = model(0.3, [0.7, 0.3]);
        for mu in [
            fcs_system(&m, 0.0).unwrap(),
            fcs_reservoir_direct(&m, 0.0).unwrap(),
            fcs_reservoir_modular(&m, 0.0).unwrap(),
        ] {
            assert!(mu.is_point_mass_at(0.0, 1e-12), "{mu:?}");
        }
        let m0 = model(0.0, [0.7, 0.3]);
        for mu in [
            fcs_system(&m0, 3.0).unwrap(),
            fcs_reservoir_direct(&m0, 3.0).unwrap(),
            fcs_reservoir_modular(&m0, 3.0).unwrap(),
        ] {
            assert!(mu.is_point_mass_at(0.0, 1e-12), "{mu:?}");
        }
    }

    #[test]
    fn protocol_without_shortcut_agrees_at_zero_time() {
        let m = model(0.3, [0.7, 0.3]);
        let mu = protocol_measure(&m, Subsystem::Reservoir, Horizon::At(0.0)).unwrap();
        assert!(mu.is_point_mass_at(0.0, 1e-12));
        let mu = protocol_measure(&m, Subsystem::System, Horizon::At(0.0)).unwrap();
        assert!(mu.is_point_mass_at(0.0, 1e-12));
    }

    #[test]
    fn means_are_heats() {
        let m = model(0.3, [0.7, 0.3]);
        for t in [0.8, 4.0] {
            assert!((fcs_system(&m, t).unwrap().mean() - m.heat_s(t)).abs() < 1e-10);
            assert!((fcs_reservoir_direct(&m, t).unwrap().mean() - m.heat_r(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn modular_paths_agree_with_direct() {
        let m = model(0.3, [0.7, 0.3]);
        for t in [1.0, 5.0] {
            let direct = fcs_reservoir_direct(&m, t).unwrap();
            let dense = fcs_reservoir_modular(&m, t).unwrap();
            let structured = fcs_reservoir_modular_with(&m, t, ModularPath::Structured).unwrap();
            assert!(direct.compare(&dense, 1e-8).within(1e-8), "{direct:?} {dense:?}");
            assert!(direct.compare(&structured, 1e-8).within(1e-8));
        }
    }

    #[test]
    fn calf_conventions() {
        let m = model(0.3, [0.7, 0.3]);
        assert_eq!(calF(&m, 2.0, c64(0.0, 0.0)).unwrap(), c64(1.0, 0.0));
        assert!((calF(&m, 0.0, c64(0.4, 1.0)).unwrap() - c64(1.0, 0.0)).norm() < 1e-12);
        assert!(matches!(calF(&m, 1.0, c64(1.5, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(calF(&m, 1.0, c64(-0.1, 0.0)), Err(Error::Domain(_))));
        let f1 = calF(&m, 5.0, c64(1.0, 0.0)).unwrap();
        assert!(f1.im.abs() < 1e-12 && f1.re >= 0.0 && f1.re <= 2.0);
    }

    #[test]
    fn calf_on_imaginary_axis_is_characteristic_function() {
        let m = model(0.3, [0.7, 0.3]);
        let mu = fcs_reservoir_direct(&m, 3.0).unwrap();
        for gamma in [-2.0, 0.5, 3.0] {
            let f = calF(&m, 3.0, c64(0.0, gamma / m.beta())).unwrap();
            assert!((f - mu.char_function(gamma)).norm() < 1e-10);
        }
    }

    #[test]
    fn modular_paths_concentrate_near_zero_for_short_times() {
        let m = model(0.3, [0.7, 0.3]);
        for path in [ModularPath::Dense, ModularPath::Structured] {
            let mu = fcs_reservoir_modular_with(&m, 1e-9, path).unwrap();
            assert!(mu.cdf(1e-6) - mu.cdf(-1e-6) > 1.0 - 1e-12, "{mu:?}");
        }
    }

    #[test]
    fn modular_dense_respects_cap() {
        let h_s = HermitianObservable::from_real_diagonal(&[0.0, 1.0]);
        let rho = DensityMatrix::new(identity(2).unscale(2.0)).unwrap();
        let h_r = HermitianObservable::from_real_diagonal(&(0..25).map(|k| k as f64 * 0.1).collect::<Vec<_>>());
        let v = HermitianObservable::zeros(50);
        let m = build_model(h_s, rho, h_r, v, 0.1, 1.0).unwrap();
        assert!(matches!(fcs_reservoir_modular(&m, 1.0), Err(Error::ResourceCap { .. })));
        assert!(fcs_reservoir_modular_with(&m, 1.0, ModularPath::Structured).is_ok());
    }
}
