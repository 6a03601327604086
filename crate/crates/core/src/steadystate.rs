//! Liouvillian superoperator, steady state by null-space solve, steady photon
//! number and output-power conversion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::fock::{build_hamiltonian, hermiticity_defect, min_eigenvalue, FockSpace, KpoParams, QuantumState};
use crate::superop::{full_generator, sector_generator, Parity};
use crate::units::{per_second, HBAR};
use crate::C64;

/// Dense GKSL generator on column-stacked density matrices (ρ_{mn} at m + n·N).
#[derive(Debug, Clone)]
pub struct Liouvillian {
    space: FockSpace,
    matrix: DMatrix<C64>,
}

/// L for H = H0 + pV and single-photon loss at κ = κ_e + κ_i.
///
/// κ = 0 is accepted; [`Liouvillian::is_dissipative`] reports it.
pub fn build_liouvillian(space: FockSpace, params: &KpoParams) -> Liouvillian {
    let h = build_hamiltonian(space, params).into_entries();
    Liouvillian {
        space,
        matrix: full_generator(&h, params.kappa()),
    }
}

impl Liouvillian {
    pub fn from_matrix(space: FockSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim() * space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(KpoError::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// True when the loss term is present, i.e. some diagonal entry has a
    /// negative real part.
    pub fn is_dissipative(&self) -> bool {
        self.matrix.diagonal().iter().any(|z| z.re < 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// L[ρ] as a matrix.
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        unvectorize(&(&self.matrix * vectorize(rho)), self.space.dim())
    }

    /// max_col |Σ_m L[(m,m), col]|: zero when the trace functional is a
    /// left null vector.
    pub fn trace_defect(&self) -> f64 {
        let n = self.space.dim();
        (0..self.matrix.ncols())
            .map(|col| {
                (0..n)
                    .map(|m| self.matrix[(m + m * n, col)])
                    .sum::<C64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    /// max |L[ρ] - L[ρ]†| for a Hermitian input ρ.
    pub fn hermiticity_defect(&self, rho: &DMatrix<C64>) -> f64 {
        hermiticity_defect(&self.apply(rho))
    }
}

/// Column-stacking vec(ρ).
pub fn vectorize(rho: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, dim: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Steady state with solver diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyStateSolution {
    pub state: QuantumState,
    /// ‖L vec(ρ)‖₂ after normalization.
    pub residual: f64,
    /// ‖L‖_max, the scale of the residual bound.
    pub generator_scale: f64,
    /// Smallest and next-smallest singular values of the sector generator.
    pub sigma_min: f64,
    pub sigma_next: f64,
    /// Smallest eigenvalue of ρ_ss.
    pub min_eigenvalue: f64,
    /// Negative-eigenvalue slack accepted for this solve.
    pub positivity_slack: f64,
}

/// Singular values at or below this fraction of σ_max count as null.
const NULL_SINGULAR_REL: f64 = 1e-12;
const RESIDUAL_REL: f64 = 1e-8;
const POSITIVITY_SLACK: f64 = 1e-8;

/// Steady state ρ_ss with L[ρ_ss] = 0 and unit trace.
pub fn steady_state(space: FockSpace, params: &KpoParams) -> Result<QuantumState> {
    solve_steady_state(space, params).map(|s| s.state)
}

/// Null-space solve by SVD.
///
/// The steady state lives in the sector of ρ_{mn} with m + n even (it holds
/// the vacuum and the generator never leaves it), so only that block is
/// decomposed. The right-singular vector of the smallest singular value is
/// reshaped, made Hermitian and normalized to unit trace.
pub fn solve_steady_state(space: FockSpace, params: &KpoParams) -> Result<SteadyStateSolution> {
    params.validate()?;
    if params.kappa() <= 0.0 {
        return Err(KpoError::ZeroDissipation);
    }
    let dim = space.dim();
    let h = build_hamiltonian(space, params).into_entries();
    let (indices, g) = sector_generator(&h, params.kappa(), Parity::Even);
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let svd = g.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[a].total_cmp(&sigma[b]));
    let sigma_max = sigma[*order.last().expect("nonempty sector")];
    let null_dim = sigma
        .iter()
        .filter(|&&s| s <= NULL_SINGULAR_REL * sigma_max)
        .count();
    if null_dim != 1 {
        return Err(KpoError::NullSpaceDimension { found: null_dim });
    }
    let k = order[0];
    let null_vec = v_t.row(k).adjoint();

    let mut rho = DMatrix::zeros(dim, dim);
    for (&i, value) in indices.iter().zip(null_vec.iter()) {
        rho[(i % dim, i / dim)] = *value;
    }
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let trace = rho.trace();
    let rho = rho / trace;

    let sector_vec = DVector::from_iterator(indices.len(), indices.iter().map(|&i| rho[(i % dim, i / dim)]));
    let residual = (&g * sector_vec).norm();
    let allowed = RESIDUAL_REL * scale;
    if residual > allowed {
        return Err(KpoError::SteadyStateResidual { residual, allowed });
    }
    // The null vector is only determined to about ε σ_max / σ_next. For very
    // weak loss that exceeds the 1e-8 positivity slack of a density matrix.
    let sigma_next = sigma[order[1]];
    let slack = POSITIVITY_SLACK.max(8.0 * f64::EPSILON * sigma_max / sigma_next);
    let min_eig = min_eigenvalue(&rho);
    if min_eig < -slack {
        return Err(KpoError::InvalidState(format!(
            "steady state has eigenvalue {min_eig:e} below -{slack:e}"
        )));
    }
    Ok(SteadyStateSolution {
        state: QuantumState::density_trusted(space, rho),
        residual,
        generator_scale: scale,
        sigma_min: sigma[order[0]],
        sigma_next,
        min_eigenvalue: min_eig,
        positivity_slack: slack,
    })
}

const IMAG_TOL: f64 = 1e-10;

/// Tr(a†a ρ).
pub fn steady_photon_number(rho: &QuantumState) -> Result<f64> {
    let m = rho
        .as_density()
        .ok_or_else(|| KpoError::param("rho", "expected a density matrix"))?;
    let value: C64 = m
        .diagonal()
        .iter()
        .enumerate()
        .map(|(k, z)| *z * k as f64)
        .sum();
    if value.im.abs() > IMAG_TOL * value.re.abs().max(1.0) {
        return Err(KpoError::ComplexExpectation { imag: value.im });
    }
    Ok(value.re)
}

/// P_o = ħ ω_r κ_e ⟨a†a⟩ in watts.
pub fn output_power(photon_number: f64, params: &KpoParams) -> Result<f64> {
    let omega_r = params.omega_r.ok_or(KpoError::MissingOmegaR)?;
    if photon_number < 0.0 || !photon_number.is_finite() {
        return Err(KpoError::param(
            "photon_number",
            format!("must be finite and >= 0, got {photon_number}"),
        ));
    }
    Ok(HBAR * per_second(omega_r) * per_second(params.kappa_e) * photon_number)
}

/// Serializable summary of a steady-state solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadySummary {
    pub photon_number: f64,
    pub output_power_w: Option<f64>,
    pub residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_state, number};
    use crate::spectral::degeneracy_detuning;
    use crate::units::{ghz, mhz};

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    fn lossy(delta_mhz: f64, p_mhz: f64) -> KpoParams {
        KpoParams::from_mhz(18.729, delta_mhz, p_mhz).with_dissipation(mhz(0.47), mhz(0.26))
    }

    #[test]
    fn trace_functional_annihilates_l() {
        let l = build_liouvillian(space(8), &lossy(-28.0, 0.7));
        assert!(l.trace_defect() <= 1e-10 * l.max_abs());
        assert!(l.is_dissipative());
        let closed = build_liouvillian(space(8), &KpoParams::from_mhz(18.0, -9.0, 0.5));
        assert!(!closed.is_dissipative());
    }

    #[test]
    fn hermiticity_preserved() {
        let s = space(6);
        let l = build_liouvillian(s, &lossy(-10.0, 0.4));
        let raw = DMatrix::from_fn(6, 6, |i, j| C64::new((i * j) as f64 * 0.1 + 0.3, (i as f64 - j as f64) * 0.05));
        let herm = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
        assert!(l.hermiticity_defect(&herm) <= 1e-10);
    }

    #[test]
    fn vacuum_is_dark_without_drive() {
        let s = space(8);
        let params = lossy(-5.0, 0.0);
        let l = build_liouvillian(s, &params);
        let vac = fock_state(s, 0).unwrap().to_density_matrix();
        assert!(l.apply(&vac).iter().all(|z| z.norm() == 0.0));
        let rho = steady_state(s, &params).unwrap();
        assert!(steady_photon_number(&rho).unwrap().abs() < 1e-12);
        assert!((rho.as_density().unwrap()[(0, 0)].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn steady_state_residual_bound() {
        let s = space(20);
        let chi = mhz(18.729);
        let params = KpoParams::new(chi, degeneracy_detuning(chi, 4).unwrap(), mhz(0.9))
            .with_dissipation(mhz(0.47), mhz(0.26));
        let sol = solve_steady_state(s, &params).unwrap();
        let l = build_liouvillian(s, &params);
        let full_residual = l.apply(sol.state.as_density().unwrap()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(full_residual <= 1e-8 * l.max_abs());
        assert!(sol.sigma_next > 1e3 * sol.sigma_min);
    }

    #[test]
    fn zero_kappa_rejected() {
        let params = KpoParams::from_mhz(18.0, -9.0, 0.5);
        assert!(matches!(steady_state(space(6), &params), Err(KpoError::ZeroDissipation)));
    }

    #[test]
    fn photon_number_of_simple_states() {
        let s = space(7);
        assert_eq!(steady_photon_number(&fock_state(s, 0).unwrap().into_density()).unwrap(), 0.0);
        assert_eq!(steady_photon_number(&fock_state(s, 5).unwrap().into_density()).unwrap(), 5.0);
        let mixed = QuantumState::density(space(2), DMatrix::from_diagonal_element(2, 2, C64::new(0.5, 0.0))).unwrap();
        assert_eq!(steady_photon_number(&mixed).unwrap(), 0.5);
        assert!(steady_photon_number(&fock_state(s, 1).unwrap()).is_err());
        let n = number(s);
        let rho = fock_state(s, 3).unwrap().into_density();
        assert_eq!(n.expectation(&rho).re, 3.0);
    }

    #[test]
    fn output_power_linear_in_kappa_e() {
        let params = lossy(0.0, 0.0).with_omega_r(ghz(7.0));
        assert_eq!(output_power(0.0, &params).unwrap(), 0.0);
        let one = output_power(2.0, &params).unwrap();
        let doubled = KpoParams { kappa_e: 2.0 * params.kappa_e, ..params };
        assert!((output_power(2.0, &doubled).unwrap() / one - 2.0).abs() < 1e-14);
        let expected = HBAR * ghz(7.0) * 1e6 * mhz(0.47) * 1e6 * 2.0;
        assert!((one - expected).abs() < 1e-12 * expected);
        assert!(matches!(output_power(1.0, &lossy(0.0, 0.0)), Err(KpoError::MissingOmegaR)));
        assert!((crate::units::to_mhz(params.kappa()) - 0.73).abs() < 1e-12);
    }
}
