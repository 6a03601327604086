//! Truncated Fock space, ladder operators, and the KPO Hamiltonian pieces.
//!
//! The Hamiltonian is split as `H = H0 + p V` with
//!
//! ```text
//! H0 = (χ/2) a†a†aa + Δ a†a      (diagonal, E_n = Δ n + (χ/2) n (n - 1))
//! V  = a² + a†²                  (couples |m> and |m ± 2> only)
//! ```

use std::fmt::Write as _;
use std::ops::Mul;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::C64;

const KET_NORM_TOL: f64 = 1e-10;
const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
const DENSITY_TRACE_TOL: f64 = 1e-9;
const DENSITY_POSITIVITY_SLACK: f64 = 1e-8;

/// Relative Hermiticity tolerance for Hamiltonians built here.
pub const HERMITIAN_REL_TOL: f64 = 1e-12;

/// Basis |0>, ..., |n_trunc - 1> of a single bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockSpace {
    n_trunc: usize,
}

impl FockSpace {
    pub fn new(n_trunc: usize) -> Result<Self> {
        if n_trunc < 2 {
            return Err(KpoError::InvalidTruncation(n_trunc));
        }
        Ok(Self { n_trunc })
    }

    pub fn dim(&self) -> usize {
        self.n_trunc
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.n_trunc {
            return Err(KpoError::IndexOutOfRange {
                index,
                n_trunc: self.n_trunc,
            });
        }
        Ok(())
    }
}

impl TryFrom<usize> for FockSpace {
    type Error = KpoError;

    fn try_from(n_trunc: usize) -> Result<Self> {
        Self::new(n_trunc)
    }
}

impl From<FockSpace> for usize {
    fn from(space: FockSpace) -> usize {
        space.n_trunc
    }
}

/// Physical parameters of the rotating-frame KPO, all in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpoParams {
    /// Kerr nonlinearity χ.
    pub chi: f64,
    /// Detuning Δ = ω_c - ω_p / 2.
    pub delta: f64,
    /// Two-photon drive amplitude p.
    pub p: f64,
    /// External (output port) loss rate κ_e.
    pub kappa_e: f64,
    /// Internal loss rate κ_i.
    pub kappa_i: f64,
    /// Resonator frequency, only needed for output power.
    pub omega_r: Option<f64>,
}

impl KpoParams {
    /// Closed system with the given χ, Δ, p.
    pub fn new(chi: f64, delta: f64, p: f64) -> Self {
        Self {
            chi,
            delta,
            p,
            kappa_e: 0.0,
            kappa_i: 0.0,
            omega_r: None,
        }
    }

    /// Same as [`KpoParams::new`] but every argument is given as X/2π in MHz.
    pub fn from_mhz(chi_mhz: f64, delta_mhz: f64, p_mhz: f64) -> Self {
        use crate::units::mhz;
        Self::new(mhz(chi_mhz), mhz(delta_mhz), mhz(p_mhz))
    }

    pub fn with_dissipation(mut self, kappa_e: f64, kappa_i: f64) -> Self {
        self.kappa_e = kappa_e;
        self.kappa_i = kappa_i;
        self
    }

    pub fn with_omega_r(mut self, omega_r: f64) -> Self {
        self.omega_r = Some(omega_r);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    /// Total loss rate κ = κ_e + κ_i.
    pub fn kappa(&self) -> f64 {
        self.kappa_e + self.kappa_i
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("chi", self.chi),
            ("delta", self.delta),
            ("p", self.p),
            ("kappa_e", self.kappa_e),
            ("kappa_i", self.kappa_i),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(KpoError::param(name, format!("must be finite, got {value}")));
            }
        }
        for (name, value) in [("p", self.p), ("kappa_e", self.kappa_e), ("kappa_i", self.kappa_i)] {
            if value < 0.0 {
                return Err(KpoError::param(name, format!("must be >= 0, got {value}")));
            }
        }
        if let Some(w) = self.omega_r {
            if !w.is_finite() || w <= 0.0 {
                return Err(KpoError::param("omega_r", format!("must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Dense complex operator on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOperator {
    space: FockSpace,
    entries: DMatrix<C64>,
}

impl MatrixOperator {
    pub fn from_matrix(space: FockSpace, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != space.dim() || entries.ncols() != space.dim() {
            return Err(KpoError::DimensionMismatch {
                expected: space.dim(),
                found: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(Self { space, entries })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    /// ⟨m|O|n⟩.
    pub fn element(&self, m: usize, n: usize) -> C64 {
        self.entries[(m, n)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            entries: self.entries.adjoint(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            space: self.space,
            entries: self.entries.map(|z| z * factor),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            space: self.space,
            entries: &self.entries + &other.entries,
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |O - O†| over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_defect() <= rel_tol * self.max_abs()
    }

    /// ⟨O⟩ in the given state (⟨ψ|O|ψ⟩ or Tr(O ρ)).
    pub fn expectation(&self, state: &QuantumState) -> C64 {
        match state {
            QuantumState::Ket { amplitudes, .. } => {
                amplitudes.dotc(&(&self.entries * amplitudes))
            }
            QuantumState::Density { matrix, .. } => (&self.entries * matrix).trace(),
        }
    }

    /// Plain-text dump: one row per line, entries as `re,im` separated by spaces.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

impl Mul for &MatrixOperator {
    type Output = MatrixOperator;

    fn mul(self, rhs: &MatrixOperator) -> MatrixOperator {
        MatrixOperator {
            space: self.space,
            entries: &self.entries * &rhs.entries,
        }
    }
}

pub(crate) fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Sign of the `(|0> ± |n>)/√2` superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Pure ket or density matrix with validated invariants.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Ket {
        space: FockSpace,
        amplitudes: DVector<C64>,
    },
    Density {
        space: FockSpace,
        matrix: DMatrix<C64>,
    },
}

impl QuantumState {
    /// Normalized ket; the norm must already be 1 within 1e-10.
    pub fn ket(space: FockSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(KpoError::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > KET_NORM_TOL {
            return Err(KpoError::InvalidState(format!("ket norm is {norm}")));
        }
        Ok(Self::Ket { space, amplitudes })
    }

    /// Density matrix checked for Hermiticity, unit trace and numerical positivity.
    pub fn density(space: FockSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(KpoError::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > DENSITY_HERMITIAN_TOL {
            return Err(KpoError::InvalidState(format!(
                "density matrix not Hermitian (defect {defect:e})"
            )));
        }
        let trace = matrix.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > DENSITY_TRACE_TOL {
            return Err(KpoError::InvalidState(format!("trace is {trace}")));
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < -DENSITY_POSITIVITY_SLACK {
            return Err(KpoError::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self::Density { space, matrix })
    }

    /// Density matrix without the eigenvalue check; the caller guarantees validity.
    pub(crate) fn density_trusted(space: FockSpace, matrix: DMatrix<C64>) -> Self {
        Self::Density { space, matrix }
    }

    pub fn space(&self) -> FockSpace {
        match self {
            Self::Ket { space, .. } | Self::Density { space, .. } => *space,
        }
    }

    pub fn is_ket(&self) -> bool {
        matches!(self, Self::Ket { .. })
    }

    pub fn as_ket(&self) -> Option<&DVector<C64>> {
        match self {
            Self::Ket { amplitudes, .. } => Some(amplitudes),
            Self::Density { .. } => None,
        }
    }

    pub fn as_density(&self) -> Option<&DMatrix<C64>> {
        match self {
            Self::Density { matrix, .. } => Some(matrix),
            Self::Ket { .. } => None,
        }
    }

    /// ρ = |ψ><ψ| for kets, a copy for density matrices.
    pub fn to_density_matrix(&self) -> DMatrix<C64> {
        match self {
            Self::Ket { amplitudes, .. } => amplitudes * amplitudes.adjoint(),
            Self::Density { matrix, .. } => matrix.clone(),
        }
    }

    pub fn into_density(self) -> Self {
        match self {
            Self::Ket { space, amplitudes } => Self::Density {
                space,
                matrix: &amplitudes * amplitudes.adjoint(),
            },
            density => density,
        }
    }

    /// Fock populations ⟨k|ρ|k⟩.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            Self::Ket { amplitudes, .. } => amplitudes.iter().map(|z| z.norm_sqr()).collect(),
            Self::Density { matrix, .. } => matrix.diagonal().iter().map(|z| z.re).collect(),
        }
    }

    /// ⟨a†a⟩ = Σ k P_k.
    pub fn photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// Tr(ρ²); exactly 1 for kets.
    pub fn purity(&self) -> f64 {
        match self {
            Self::Ket { .. } => 1.0,
            Self::Density { matrix, .. } => matrix.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// |⟨φ|ψ⟩|² for kets, ⟨φ|ρ|φ⟩ for densities.
    pub fn fidelity_with(&self, phi: &DVector<C64>) -> f64 {
        match self {
            Self::Ket { amplitudes, .. } => phi.dotc(amplitudes).norm_sqr(),
            Self::Density { matrix, .. } => phi.dotc(&(matrix * phi)).re,
        }
    }
}

pub fn min_eigenvalue(matrix: &DMatrix<C64>) -> f64 {
    let herm = (matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Annihilation operator a with ⟨k-1|a|k⟩ = √k.
pub fn annihilation(space: FockSpace) -> MatrixOperator {
    let n = space.dim();
    let mut m = DMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    MatrixOperator { space, entries: m }
}

/// Creation operator a†.
pub fn creation(space: FockSpace) -> MatrixOperator {
    annihilation(space).adjoint()
}

/// Number operator a†a, diagonal with entries 0..n_trunc-1.
pub fn number(space: FockSpace) -> MatrixOperator {
    let n = space.dim();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    MatrixOperator { space, entries: m }
}

/// Unperturbed Fock energy Δ n + (χ/2) n (n - 1).
pub fn fock_energy(params: &KpoParams, n: usize) -> f64 {
    let nf = n as f64;
    params.delta * nf + 0.5 * params.chi * nf * (nf - 1.0)
}

/// H0 = (χ/2) a†a†aa + Δ a†a, diagonal in the Fock basis.
pub fn build_h0(space: FockSpace, params: &KpoParams) -> MatrixOperator {
    let n = space.dim();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = C64::new(fock_energy(params, k), 0.0);
    }
    MatrixOperator { space, entries: m }
}

/// V = a² + a†², with ⟨k-2|V|k⟩ = ⟨k|V|k-2⟩ = √(k (k-1)).
pub fn build_v(space: FockSpace) -> MatrixOperator {
    let n = space.dim();
    let mut m = DMatrix::zeros(n, n);
    for k in 2..n {
        let amp = C64::new(((k * (k - 1)) as f64).sqrt(), 0.0);
        m[(k - 2, k)] = amp;
        m[(k, k - 2)] = amp;
    }
    MatrixOperator { space, entries: m }
}

/// H = H0 + p V.
pub fn build_hamiltonian(space: FockSpace, params: &KpoParams) -> MatrixOperator {
    build_h0(space, params).add(&build_v(space).scale(params.p))
}

/// Lab-frame parameters: resonator frequency ω_c, pump frequency ω_p.
///
/// Kept for reference only; every simulation runs in the frame rotating at
/// ω_p / 2 where the Hamiltonian is time independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabFrameParams {
    pub chi: f64,
    pub omega_c: f64,
    pub p: f64,
    pub omega_p: f64,
}

impl LabFrameParams {
    /// Rotating-frame parameters obtained after dropping counter-rotating terms.
    pub fn rotating_frame(&self) -> KpoParams {
        KpoParams::new(self.chi, self.omega_c - 0.5 * self.omega_p, self.p)
    }
}

/// H_lab(t) = (χ/2) a†a†aa + ω_c a†a + 2p (a² + a†²) cos(ω_p t).
pub fn build_lab_hamiltonian(space: FockSpace, params: &LabFrameParams, t: f64) -> MatrixOperator {
    let static_part = KpoParams::new(params.chi, params.omega_c, 0.0);
    let drive = 2.0 * params.p * (params.omega_p * t).cos();
    build_h0(space, &static_part).add(&build_v(space).scale(drive))
}

/// |n>.
pub fn fock_state(space: FockSpace, n: usize) -> Result<QuantumState> {
    space.check_index(n)?;
    let mut v = DVector::zeros(space.dim());
    v[n] = C64::new(1.0, 0.0);
    Ok(QuantumState::Ket {
        space,
        amplitudes: v,
    })
}

/// (|0> ± |n>)/√2 as a raw vector.
pub fn plus_minus_vector(space: FockSpace, n: usize, sign: Sign) -> Result<DVector<C64>> {
    if n == 0 {
        return Err(KpoError::param("n", "partner index must be > 0"));
    }
    space.check_index(n)?;
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = DVector::zeros(space.dim());
    v[0] = C64::new(amp, 0.0);
    v[n] = C64::new(sign.factor() * amp, 0.0);
    Ok(v)
}

/// Normalized (|0> ± |n>)/√2.
pub fn plus_minus_superposition(space: FockSpace, n: usize, sign: Sign) -> Result<QuantumState> {
    let amplitudes = plus_minus_vector(space, n, sign)?;
    Ok(QuantumState::Ket { space, amplitudes })
}
