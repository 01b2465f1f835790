//! Named model components.
//!
//! Every builder returns a Hamiltonian together with its natural coupling
//! operator; the interaction of a composed model is the tensor product of the
//! two coupling operators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, identity, kron, operator_norm, random_hermitian, CMatrix, DensityMatrix, HermitianObservable,
};
use crate::model::{build_model, OpenSystemModel};

/// Largest total dimension accepted when building from a configuration.
pub const MODEL_DIM_CAP: usize = 128;

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}

/// `op` acting on site `k` of an `n`-site chain.
pub fn site_operator(op: &CMatrix, k: usize, n: usize) -> CMatrix {
    let left = identity(1 << k);
    let right = identity(1 << (n - k - 1));
    kron(&kron(&left, op), &right)
}

/// A Hamiltonian and the operator through which it couples.
#[derive(Clone, Debug)]
pub struct Component {
    pub hamiltonian: HermitianObservable,
    pub coupling: CMatrix,
}

/// Initial state of a two-level system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    /// Populations in the energy basis.
    Diagonal(Vec<f64>),
    /// Full matrix, rows of `[re, im]` pairs.
    Matrix(Vec<Vec<[f64; 2]>>),
    /// `"thermal"`: the Gibbs state at the configured `β`.
    Named(String),
}

/// Builder name and parameters, as they appear in a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NamedBuilder {
    /// `H = diag(0, gap)`, coupling `σ_x`.
    TwoLevel {
        gap: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<RhoSpec>,
    },
    /// `H = Σ_k (h/2)σ_z^{(k)} + g Σ_k σ_x^{(k)}σ_x^{(k+1)}` on `n` sites,
    /// coupling `σ_x` on the first site.
    SpinChainReservoir { n: usize, h: f64, g: f64 },
    /// Seeded random Hermitian `H` on `n` levels, coupling a random
    /// Hermitian of unit norm.
    RandomReservoir { n: usize },
    /// `H = ω₀ diag(0, 1, …, cutoff−1)`, coupling `a + a†`.
    TruncatedOscillator { cutoff: usize, omega0: f64 },
}

impl NamedBuilder {
    pub fn name(&self) -> &'static str {
        match self {
            NamedBuilder::TwoLevel { .. } => "two_level",
            NamedBuilder::SpinChainReservoir { .. } => "spin_chain_reservoir",
            NamedBuilder::RandomReservoir { .. } => "random_reservoir",
            NamedBuilder::TruncatedOscillator { .. } => "truncated_oscillator",
        }
    }

    pub fn build(&self, seed: u64) -> Result<Component> {
        match *self {
            NamedBuilder::TwoLevel { gap, .. } => two_level(gap),
            NamedBuilder::SpinChainReservoir { n, h, g } => spin_chain_reservoir(n, h, g),
            NamedBuilder::RandomReservoir { n } => random_reservoir(n, seed),
            NamedBuilder::TruncatedOscillator { cutoff, omega0 } => truncated_oscillator(cutoff, omega0),
        }
    }

    /// The same builder with its size parameter replaced.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            NamedBuilder::SpinChainReservoir { n, .. } | NamedBuilder::RandomReservoir { n } => *n = size,
            NamedBuilder::TruncatedOscillator { cutoff, .. } => *cutoff = size,
            NamedBuilder::TwoLevel { .. } => {
                return Err(Error::validation("scan.axis", "two_level has no size parameter"));
            }
        }
        Ok(out)
    }
}

fn finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {x}")))
    }
}

pub fn two_level(gap: f64) -> Result<Component> {
    finite("gap", gap)?;
    Ok(Component { hamiltonian: HermitianObservable::from_real_diagonal(&[0.0, gap]), coupling: pauli_x() })
}

pub fn spin_chain_reservoir(n: usize, h: f64, g: f64) -> Result<Component> {
    if n == 0 {
        return Err(Error::validation("n", "spin chain needs n ≥ 1"));
    }
    if n > 12 {
        return Err(Error::ResourceCap { what: "spin chain sites".into(), dim: 1 << n, cap: 1 << 12 });
    }
    finite("h", h)?;
    finite("g", g)?;
    let d = 1 << n;
    let mut ham = CMatrix::zeros(d, d);
    for k in 0..n {
        ham += site_operator(&pauli_z(), k, n) * c64(h / 2.0, 0.0);
    }
    for k in 0..n.saturating_sub(1) {
        ham += site_operator(&pauli_x(), k, n) * site_operator(&pauli_x(), k + 1, n) * c64(g, 0.0);
    }
    Ok(Component { hamiltonian: HermitianObservable::new(ham)?, coupling: site_operator(&pauli_x(), 0, n) })
}

pub fn random_reservoir(n: usize, seed: u64) -> Result<Component> {
    if n == 0 {
        return Err(Error::validation("n", "random reservoir needs n ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ham = random_hermitian(n, &mut rng);
    let mut coupling = random_hermitian(n, &mut rng);
    let norm = operator_norm(&coupling);
    if norm > 0.0 {
        coupling /= c64(norm, 0.0);
    }
    Ok(Component { hamiltonian: HermitianObservable::new(ham)?, coupling })
}

pub fn truncated_oscillator(cutoff: usize, omega0: f64) -> Result<Component> {
    if cutoff < 2 {
        return Err(Error::validation("cutoff", "oscillator needs cutoff ≥ 2"));
    }
    finite("omega0", omega0)?;
    let levels: Vec<f64> = (0..cutoff).map(|k| omega0 * k as f64).collect();
    let mut x = CMatrix::zeros(cutoff, cutoff);
    for k in 1..cutoff {
        let amp = c64((k as f64).sqrt(), 0.0);
        x[(k - 1, k)] = amp;
        x[(k, k - 1)] = amp;
    }
    Ok(Component { hamiltonian: HermitianObservable::from_real_diagonal(&levels), coupling: x })
}

/// Parse a row-major matrix of `[re, im]` pairs.
pub fn complex_matrix(field: &str, rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation(field, "empty matrix"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::validation(field, format!("row {i} has {} entries, expected {n}", r.len())));
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

/// Inverse of [`complex_matrix`].
pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn resolve_rho(spec: Option<&RhoSpec>, h_s: &HermitianObservable, beta: f64) -> Result<DensityMatrix> {
    let d = h_s.dim();
    let rho = match spec {
        None => return crate::linalg::gibbs_state(h_s, beta),
        Some(RhoSpec::Named(name)) if name == "thermal" => return crate::linalg::gibbs_state(h_s, beta),
        Some(RhoSpec::Named(name)) => {
            return Err(Error::validation("rho", format!("unknown state {name:?}, expected \"thermal\"")));
        }
        Some(RhoSpec::Diagonal(p)) => {
            if p.len() != d {
                return Err(Error::validation("rho", format!("{} populations for a {d}-level system", p.len())));
            }
            HermitianObservable::from_real_diagonal(p).into_matrix()
        }
        Some(RhoSpec::Matrix(rows)) => complex_matrix("rho", rows)?,
    };
    DensityMatrix::new(rho).map_err(|e| e.in_field("rho"))
}

/// Compose a two-level system with a reservoir builder, `V = A_S ⊗ B_R`.
pub fn build_named_model(
    system: &NamedBuilder,
    reservoir: &NamedBuilder,
    beta: f64,
    lambda: f64,
    seed: u64,
) -> Result<OpenSystemModel> {
    let NamedBuilder::TwoLevel { rho, .. } = system else {
        return Err(Error::validation("model.builder.system", format!("{} cannot serve as the system", system.name())));
    };
    if matches!(reservoir, NamedBuilder::TwoLevel { .. }) {
        return Err(Error::validation("model.builder.reservoir", "two_level cannot serve as the reservoir"));
    }
    let s = system.build(seed).map_err(|e| e.in_field("model.builder.system"))?;
    let r = reservoir.build(seed).map_err(|e| e.in_field("model.builder.reservoir"))?;
    let d = s.hamiltonian.dim() * r.hamiltonian.dim();
    if d > MODEL_DIM_CAP {
        return Err(Error::ResourceCap { what: "model dimension".into(), dim: d, cap: MODEL_DIM_CAP });
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::validation("beta", format!("must be positive and finite, got {beta}")));
    }
    let rho_s = resolve_rho(rho.as_ref(), &s.hamiltonian, beta).map_err(|e| e.in_field("model.builder.system.rho"))?;
    let v = HermitianObservable::new(kron(&s.coupling, &r.coupling))?;
    build_model(s.hamiltonian, rho_s, r.hamiltonian, v, lambda, beta)
}
