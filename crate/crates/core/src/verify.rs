//! Built-in invariant suite run by `kpo verify`.

use serde::Serialize;

use crate::dynamics::{lindblad_evolve, schrodinger_evolve, EvolutionMode, EvolveSpec};
use crate::error::Result;
use crate::fock::{build_hamiltonian, fock_state, min_eigenvalue, FockSpace, KpoParams, HERMITIAN_REL_TOL};
use crate::spectral::{
    degeneracy_detuning, energy_splitting, pair_at, scaling_exponent_fit, truncation_convergence,
    ConvergenceObservable,
};
use crate::steadystate::{build_liouvillian, solve_steady_state, steady_photon_number, Liouvillian};
use crate::units::mhz;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn from_result(name: &'static str, result: Result<(bool, String)>) -> Self {
        match result {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Truncation for the spectral and convergence checks.
    pub n_trunc: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n_trunc: 30 }
    }
}

/// Dimension for the dynamics-based checks, kept small for runtime.
const DYNAMICS_TRUNC: usize = 14;

fn chi() -> f64 {
    mhz(18.0)
}

fn lossy(n: usize, p_mhz: f64) -> KpoParams {
    let chi = chi();
    KpoParams::new(chi, degeneracy_detuning(chi, n).unwrap_or(0.0), mhz(p_mhz))
        .with_dissipation(mhz(0.47), mhz(0.26))
}

pub fn run_all(opts: VerifyOptions) -> Vec<CheckOutcome> {
    let dyn_space = FockSpace::new(DYNAMICS_TRUNC).expect("static truncation");
    let mut out = vec![
        CheckOutcome::from_result("hamiltonian_hermiticity", hermiticity(opts)),
        check_liouvillian_trace(&build_liouvillian(dyn_space, &lossy(4, 0.8))),
        check_liouvillian_hermiticity(&build_liouvillian(dyn_space, &lossy(4, 0.8))),
        CheckOutcome::from_result("trace_conservation", trace_conservation(dyn_space)),
        CheckOutcome::from_result("steady_state_positivity", positivity(dyn_space)),
        CheckOutcome::from_result("two_photon_splitting_law", two_photon_law(opts)),
        CheckOutcome::from_result("scaling_exponents", scaling(opts)),
        CheckOutcome::from_result("steady_vs_dynamics", steady_vs_dynamics(dyn_space)),
        CheckOutcome::from_result("truncation_convergence", convergence(opts)),
        CheckOutcome::from_result("closed_open_equivalence", closed_open(dyn_space)),
    ];
    out.shrink_to_fit();
    out
}

fn space(n_trunc: usize) -> Result<FockSpace> {
    FockSpace::new(n_trunc)
}

fn hermiticity(opts: VerifyOptions) -> Result<(bool, String)> {
    let s = space(opts.n_trunc)?;
    let mut worst = 0.0f64;
    for n in [2usize, 4, 8, 12] {
        let h = build_hamiltonian(s, &lossy(n, 1.0));
        worst = worst.max(h.hermiticity_defect() / h.max_abs());
    }
    Ok((worst <= HERMITIAN_REL_TOL, format!("max relative defect {worst:e}")))
}

/// Trace functional is a left null vector of L.
pub fn check_liouvillian_trace(l: &Liouvillian) -> CheckOutcome {
    let defect = l.trace_defect();
    let allowed = 1e-10 * l.max_abs();
    CheckOutcome::new(
        "liouvillian_trace",
        defect <= allowed,
        format!("trace defect {defect:e} (allowed {allowed:e})"),
    )
}

/// L maps Hermitian matrices to Hermitian matrices.
pub fn check_liouvillian_hermiticity(l: &Liouvillian) -> CheckOutcome {
    let n = l.space().dim();
    let rho = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let x = (i * 7 + j * 3) as f64 * 0.01;
        crate::C64::new(x + (j * 7 + i * 3) as f64 * 0.01, (i as f64 - j as f64) * 0.02)
    });
    let defect = l.hermiticity_defect(&rho);
    let allowed = 1e-10 * l.max_abs().max(1.0);
    CheckOutcome::new(
        "liouvillian_hermiticity",
        defect <= allowed,
        format!("defect {defect:e} (allowed {allowed:e})"),
    )
}

fn trace_conservation(s: FockSpace) -> Result<(bool, String)> {
    let spec = EvolveSpec::new(lossy(4, 0.8), fock_state(s, 0)?, 1.0, 0.05, EvolutionMode::Open);
    let traj = lindblad_evolve(&spec)?;
    let d = traj.diagnostics;
    Ok((
        d.norm_error <= 1e-9 && d.hermiticity_defect <= 1e-10,
        format!("max |Tr rho - 1| = {:e}, max |rho - rho^+| = {:e}", d.norm_error, d.hermiticity_defect),
    ))
}

fn positivity(s: FockSpace) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for n in [2usize, 4, 6] {
        let sol = solve_steady_state(s, &lossy(n, 1.0))?;
        worst = worst.min(min_eigenvalue(sol.state.as_density().expect("density")));
    }
    Ok((worst >= -1e-8, format!("min eigenvalue {worst:e}")))
}

fn two_photon_law(opts: VerifyOptions) -> Result<(bool, String)> {
    let s = space(opts.n_trunc)?;
    let chi = chi();
    let mut worst = 0.0f64;
    for p_mhz in [0.05, 0.1, 0.18] {
        let params = KpoParams::new(chi, degeneracy_detuning(chi, 2)?, mhz(p_mhz));
        let split = energy_splitting(&pair_at(s, &params, 2)?);
        let expected = 2.0 * 2f64.sqrt() * params.p;
        worst = worst.max((split - expected).abs() / expected);
    }
    Ok((worst <= 1e-3, format!("max relative deviation {worst:e}")))
}

fn scaling(opts: VerifyOptions) -> Result<(bool, String)> {
    let s = space(opts.n_trunc)?;
    let chi = chi();
    let mut detail = Vec::new();
    let mut ok = true;
    for (n, target, tol) in [(4usize, 2.0, 0.1), (6, 3.0, 0.15)] {
        let delta = degeneracy_detuning(chi, n)?;
        let mut pts = Vec::new();
        for k in 0..8 {
            let p = mhz(0.2 + 0.8 * k as f64 / 7.0);
            let split = energy_splitting(&pair_at(s, &KpoParams::new(chi, delta, p), n)?).abs();
            pts.push((p, split));
        }
        let slope = scaling_exponent_fit(&pts)?;
        ok &= (slope - target).abs() <= tol;
        detail.push(format!("n={n}: {slope:.4}"));
    }
    Ok((ok, detail.join(", ")))
}

fn steady_vs_dynamics(s: FockSpace) -> Result<(bool, String)> {
    let params = lossy(2, 0.6);
    let steady = steady_photon_number(&solve_steady_state(s, &params)?.state)?;
    let t = 20.0 / params.kappa();
    let spec = EvolveSpec::new(params, fock_state(s, 0)?, t, t, EvolutionMode::Open);
    let traj = lindblad_evolve(&spec)?;
    let evolved = *traj.photon_number.last().expect("nonempty");
    let diff = (evolved - steady).abs();
    Ok((
        diff <= 1e-6 * steady.abs() || diff <= 1e-9,
        format!("steady {steady:.10e}, evolved {evolved:.10e}"),
    ))
}

fn convergence(opts: VerifyOptions) -> Result<(bool, String)> {
    let chi = chi();
    let params = KpoParams::new(chi, degeneracy_detuning(chi, 12)?, mhz(1.0));
    let report = truncation_convergence(&params, ConvergenceObservable::Splitting { n: 12 }, opts.n_trunc)?;
    Ok((
        report.converged,
        format!(
            "n=12 splitting at n_trunc={}: {:e} vs {:e}",
            report.n_trunc, report.value, report.reference
        ),
    ))
}

fn closed_open(s: FockSpace) -> Result<(bool, String)> {
    let chi = chi();
    let params = KpoParams::new(chi, degeneracy_detuning(chi, 4)?, mhz(1.0));
    let closed = EvolveSpec::new(params, fock_state(s, 0)?, 2.0, 0.05, EvolutionMode::Closed);
    let open = EvolveSpec {
        mode: EvolutionMode::Open,
        ..closed.clone()
    };
    let a = schrodinger_evolve(&closed)?;
    let b = lindblad_evolve(&open)?;
    let worst = a
        .photon_number
        .iter()
        .zip(&b.photon_number)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-6, format!("max pointwise difference {worst:e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::number;
    use crate::C64;
    use nalgebra::DMatrix;

    #[test]
    fn sign_error_in_loss_term_fails_trace_check() {
        let s = FockSpace::new(6).unwrap();
        let params = lossy(2, 0.5);
        let good = build_liouvillian(s, &params);
        assert!(check_liouvillian_trace(&good).passed);
        // flip the sign of -(κ/2){a†a, ρ}: add κ (I⊗N + Nᵀ⊗I)
        let n = number(s).into_entries();
        let id = DMatrix::<C64>::identity(6, 6);
        let anti = id.kronecker(&n) + n.transpose().kronecker(&id);
        let bad = good.matrix() + anti * C64::new(params.kappa(), 0.0);
        let bad = Liouvillian::from_matrix(s, bad).unwrap();
        assert!(!check_liouvillian_trace(&bad).passed);
    }

    #[test]
    fn boundary_truncation_fails_convergence() {
        let (ok, _) = convergence(VerifyOptions { n_trunc: 13 }).unwrap();
        assert!(!ok);
    }
}
