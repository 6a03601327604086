//! Exact diagonalization, degenerate-pair identification, closed-form
//! multiphoton Rabi frequencies and power-law fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::fock::{
    build_hamiltonian, plus_minus_vector, FockSpace, KpoParams, MatrixOperator, Sign,
    HERMITIAN_REL_TOL,
};
use crate::steadystate;
use crate::C64;

/// Detuning Δ* = -(χ/2)(n - 1) at which |0> and |n> are degenerate under H0.
pub fn degeneracy_detuning(chi: f64, n: usize) -> Result<f64> {
    if n < 2 || n % 2 != 0 {
        return Err(KpoError::InvalidPartner(n));
    }
    Ok(-0.5 * chi * (n as f64 - 1.0))
}

/// Eigenpairs of a Hermitian operator, energies ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    space: FockSpace,
    energies: DVector<f64>,
    states: DMatrix<C64>,
}

impl EigenDecomposition {
    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Column `k` is the eigenvector of `energies[k]`.
    pub fn states(&self) -> &DMatrix<C64> {
        &self.states
    }

    pub fn state(&self, k: usize) -> DVector<C64> {
        self.states.column(k).into_owned()
    }

    /// max_k ‖H v_k - E_k v_k‖₂.
    pub fn residual(&self, h: &MatrixOperator) -> f64 {
        (0..self.energies.len())
            .map(|k| {
                let v = self.states.column(k);
                (h.entries() * v - v * C64::new(self.energies[k], 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// max |V†V - I|.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.energies.len();
        let gram = self.states.adjoint() * &self.states;
        (gram - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// exp(-iHt) = U e^{-iEt} U†.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let phases = self
            .energies
            .map(|e| C64::from_polar(1.0, -e * t));
        let scaled = DMatrix::from_fn(self.states.nrows(), self.states.ncols(), |i, j| {
            self.states[(i, j)] * phases[j]
        });
        scaled * self.states.adjoint()
    }
}

/// Full spectrum of a Hermitian operator.
pub fn diagonalize(h: &MatrixOperator) -> Result<EigenDecomposition> {
    let allowed = HERMITIAN_REL_TOL * h.max_abs();
    let defect = h.hermiticity_defect();
    if defect > allowed {
        return Err(KpoError::NotHermitian { defect, allowed });
    }
    let n = h.space().dim();
    let herm = (h.entries() + h.entries().adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut states = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        states.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        space: h.space(),
        energies,
        states,
    })
}

/// Eigenvectors closest to (|0> ± |n>)/√2 at the |0>-|n> degeneracy.
#[derive(Debug, Clone)]
pub struct DegeneratePair {
    pub n: usize,
    pub delta_star: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub state_plus: DVector<C64>,
    pub state_minus: DVector<C64>,
    pub fid_plus: f64,
    pub fid_minus: f64,
    /// Largest fidelity with |φ+> among all other eigenvectors.
    pub runner_up_plus: f64,
    /// Largest fidelity with |φ-> among all other eigenvectors.
    pub runner_up_minus: f64,
}

/// Finds |E+> and |E-> as the eigenvectors of maximal fidelity with
/// (|0> + |n>)/√2 and (|0> - |n>)/√2.
///
/// Eigenvalues closer than the eigensolver resolution form clusters whose
/// basis is arbitrary. Each cluster is rotated onto the eigenbasis of the
/// exchange operator |0><n| + |n><0| projected into it, which for n = 2 is
/// proportional to V restricted to span{|0>, |2>}.
pub fn match_degenerate_pair(
    decomp: &EigenDecomposition,
    chi: f64,
    n: usize,
) -> Result<DegeneratePair> {
    let delta_star = degeneracy_detuning(chi, n)?;
    let space = decomp.space();
    let phi_plus = plus_minus_vector(space, n, Sign::Plus)?;
    let phi_minus = plus_minus_vector(space, n, Sign::Minus)?;

    let (energies, states) = resolve_clusters(decomp, n);
    let fid = |phi: &DVector<C64>, k: usize| phi.dotc(&states.column(k)).norm_sqr();
    let dim = energies.len();
    let best = |phi: &DVector<C64>| {
        let scores: Vec<f64> = (0..dim).map(|k| fid(phi, k)).collect();
        let k = argmax(&scores);
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &s)| s)
            .fold(0.0, f64::max);
        (k, scores[k], runner_up)
    };
    let (k_plus, fid_plus, runner_up_plus) = best(&phi_plus);
    let (k_minus, fid_minus, runner_up_minus) = best(&phi_minus);
    if k_plus == k_minus {
        return Err(KpoError::AmbiguousMatch { n, index: k_plus });
    }
    Ok(DegeneratePair {
        n,
        delta_star,
        e_plus: energies[k_plus],
        e_minus: energies[k_minus],
        state_plus: states.column(k_plus).into_owned(),
        state_minus: states.column(k_minus).into_owned(),
        fid_plus,
        fid_minus,
        runner_up_plus,
        runner_up_minus,
    })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

fn resolve_clusters(decomp: &EigenDecomposition, n: usize) -> (Vec<f64>, DMatrix<C64>) {
    let energies = decomp.energies();
    let dim = energies.len();
    let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let tol = 4.0 * dim as f64 * f64::EPSILON * scale;

    let mut out_e = energies.as_slice().to_vec();
    let mut out_v = decomp.states().clone();
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && energies[end] - energies[end - 1] <= tol {
            end += 1;
        }
        if end - start >= 2 {
            let q = decomp.states().columns(start, end - start).into_owned();
            // exchange operator X = |0><n| + |n><0| restricted to the cluster
            let size = end - start;
            let x = DMatrix::from_fn(size, size, |i, j| {
                q[(0, i)].conj() * q[(n, j)] + q[(n, i)].conj() * q[(0, j)]
            });
            let eig = x.symmetric_eigen();
            let rotated = &q * &eig.eigenvectors;
            for j in 0..size {
                out_v.set_column(start + j, &rotated.column(j));
                out_e[start + j] = (0..size)
                    .map(|i| eig.eigenvectors[(i, j)].norm_sqr() * energies[start + i])
                    .sum();
            }
        }
        start = end;
    }
    (out_e, out_v)
}

/// E+ - E-, signed as returned by the matching.
pub fn energy_splitting(pair: &DegeneratePair) -> f64 {
    pair.e_plus - pair.e_minus
}

/// Diagonalizes H at the given parameters and matches the |0>-|n> pair.
pub fn pair_at(space: FockSpace, params: &KpoParams, n: usize) -> Result<DegeneratePair> {
    let h = build_hamiltonian(space, params);
    let decomp = diagonalize(&h)?;
    match_degenerate_pair(&decomp, params.chi, n)
}

/// Leading-order angular frequency Ω of P(t) = (1 - cos Ω t)/2 between |0> and |n>:
/// Ω₂ = 2√2 p, Ω₄ = 2√6 p²/χ, Ω₆ = 3√5 p³/(2χ²).
///
/// Ω equals |E+ - E-| to leading order in p. Ω₄ carries the sign of χ.
pub fn perturbative_rabi_angular_frequency(params: &KpoParams, n: usize) -> Result<f64> {
    let p = params.p;
    let chi = params.chi;
    if matches!(n, 4 | 6) && chi == 0.0 {
        return Err(KpoError::param("chi", "must be nonzero for n = 4, 6"));
    }
    match n {
        2 => Ok(2.0 * 2f64.sqrt() * p),
        4 => Ok(2.0 * 6f64.sqrt() * p * p / chi),
        6 => Ok(3.0 * 5f64.sqrt() * p.powi(3) / (2.0 * chi * chi)),
        _ => Err(KpoError::UnsupportedPartner(n)),
    }
}

/// Least-squares slope of log y against log p.
pub fn scaling_exponent_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(KpoError::InsufficientPoints {
            required: 4,
            found: points.len(),
        });
    }
    if let Some(&(p, y)) = points.iter().find(|&&(p, y)| !(p > 0.0 && y > 0.0)) {
        return Err(KpoError::param(
            "splittings",
            format!("all points must be positive, got ({p}, {y})"),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(p, y)| (p.ln(), y.ln())).collect();
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|l| l.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|l| l.1).sum::<f64>() / count;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(KpoError::param("splittings", "all drive values are identical"));
    }
    Ok(sxy / sxx)
}

/// Quantity recomputed under truncation growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceObservable {
    /// |E+ - E-| for the |0>-|n> pair at the supplied parameters.
    Splitting { n: usize },
    /// Steady-state ⟨a†a⟩.
    SteadyPhotonNumber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_trunc: usize,
    pub value: f64,
    pub reference: f64,
    pub converged: bool,
}

/// Truncation step used for convergence checks.
pub const CONVERGENCE_STEP: usize = 10;
const CONVERGENCE_REL_TOL: f64 = 1e-6;
const CONVERGENCE_ABS_FLOOR: f64 = 1e-9;

/// Compares the observable at `n_trunc` and `n_trunc + 10`.
///
/// Converged iff the change is within 1e-6 relative, with an absolute floor
/// of 1e-9 for near-zero values. A pair that cannot be identified at
/// `n_trunc` (the truncation edge distorts it) counts as not converged and
/// reports `value` as NaN.
pub fn truncation_convergence(
    params: &KpoParams,
    observable: ConvergenceObservable,
    n_trunc: usize,
) -> Result<ConvergenceReport> {
    let eval = |dim: usize| -> Result<f64> {
        let space = FockSpace::new(dim)?;
        match observable {
            ConvergenceObservable::Splitting { n } => {
                Ok(energy_splitting(&pair_at(space, params, n)?).abs())
            }
            ConvergenceObservable::SteadyPhotonNumber => {
                let rho = steadystate::steady_state(space, params)?;
                steadystate::steady_photon_number(&rho)
            }
        }
    };
    let value = match eval(n_trunc) {
        Err(KpoError::AmbiguousMatch { .. }) => f64::NAN,
        other => other?,
    };
    let reference = eval(n_trunc + CONVERGENCE_STEP)?;
    let change = (value - reference).abs();
    let converged =
        change <= CONVERGENCE_REL_TOL * reference.abs() || change <= CONVERGENCE_ABS_FLOOR;
    Ok(ConvergenceReport {
        n_trunc,
        value,
        reference,
        converged,
    })
}
