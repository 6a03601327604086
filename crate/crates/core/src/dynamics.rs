//! Closed (Schrödinger) and open (GKSL, single-photon loss) time evolution.
//!
//! The open-system equation is
//!
//! ```text
//! dρ/dt = -i[H, ρ] + (κ/2)(2 a ρ a† - {a†a, ρ}),   κ = κ_e + κ_i
//! ```
//!
//! integrated either with adaptive Dormand–Prince 5(4) on the density matrix
//! or by exponentiating the generator restricted to each parity sector.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::fock::{build_hamiltonian, hermiticity_defect, FockSpace, KpoParams, QuantumState};
use crate::integrator::{self, Tolerances};
use crate::spectral::diagonalize;
use crate::superop::{sector_generator, Parity};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    Closed,
    Open,
}

/// How the open-system equation is propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenMethod {
    /// Adaptive Dormand–Prince 5(4) with dense output.
    AdaptiveRk,
    /// exp(L Δt) per parity sector; cost is independent of the elapsed time.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: OpenMethod,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: OpenMethod::AdaptiveRk,
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

impl SolverOptions {
    pub fn exponential() -> Self {
        Self {
            method: OpenMethod::Exponential,
            ..Self::default()
        }
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            return Err(KpoError::param("rtol", format!("must be positive, got {}", self.rtol)));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(KpoError::param("atol", format!("must be positive, got {}", self.atol)));
        }
        Ok(())
    }
}

/// Everything needed to produce one [`Trajectory`].
#[derive(Debug, Clone)]
pub struct EvolveSpec {
    pub params: KpoParams,
    pub initial: QuantumState,
    /// Final time in µs.
    pub t_final: f64,
    /// Output sampling interval in µs.
    pub dt_out: f64,
    pub mode: EvolutionMode,
    pub record_populations: bool,
    /// Keep the state at every output time.
    pub keep_states: bool,
    pub solver: SolverOptions,
}

impl EvolveSpec {
    pub fn new(
        params: KpoParams,
        initial: QuantumState,
        t_final: f64,
        dt_out: f64,
        mode: EvolutionMode,
    ) -> Self {
        Self {
            params,
            initial,
            t_final,
            dt_out,
            mode,
            record_populations: false,
            keep_states: false,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_populations(mut self) -> Self {
        self.record_populations = true;
        self
    }

    pub fn with_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(KpoError::param("t_final", format!("must be > 0, got {}", self.t_final)));
        }
        if !(self.dt_out > 0.0 && self.dt_out <= self.t_final) {
            return Err(KpoError::param(
                "dt_out",
                format!("must satisfy 0 < dt_out <= t_final, got {}", self.dt_out),
            ));
        }
        Ok(())
    }

    /// 0, dt, 2dt, ... and t_final itself.
    pub fn output_times(&self) -> Vec<f64> {
        let steps = (self.t_final / self.dt_out * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * self.dt_out).collect();
        let last = *times.last().unwrap_or(&0.0);
        if self.t_final - last > 1e-9 * self.dt_out {
            times.push(self.t_final);
        } else if let Some(t) = times.last_mut() {
            *t = self.t_final;
        }
        times
    }
}

/// Sampled ⟨a†a⟩(t), optional Fock populations, and the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub photon_number: Vec<f64>,
    pub populations: Option<Vec<Vec<f64>>>,
    pub states: Option<Vec<QuantumState>>,
    pub final_state: QuantumState,
    pub diagnostics: Diagnostics,
}

/// Worst invariant deviations over all output times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// max |Tr ρ - 1| (open) or |‖ψ‖ - 1| (closed).
    pub norm_error: f64,
    /// max |ρ - ρ†| (open only).
    pub hermiticity_defect: f64,
    /// Smallest eigenvalue of the final density matrix (open only).
    pub final_min_eigenvalue: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    /// CSV with columns time_us, photon_number, pop_0..pop_k.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_us,photon_number");
        let pops = self.populations.as_ref();
        if let Some(first) = pops.and_then(|p| p.first()) {
            for k in 0..first.len() {
                let _ = write!(out, ",pop_{k}");
            }
        }
        out.push('\n');
        for (i, (t, n)) in self.times.iter().zip(&self.photon_number).enumerate() {
            let _ = write!(out, "{},{}", crate::io::fmt_f64(*t), crate::io::fmt_f64(*n));
            if let Some(p) = pops {
                for v in &p[i] {
                    let _ = write!(out, ",{}", crate::io::fmt_f64(*v));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// ψ(t) = exp(-iHt) ψ(0) via the eigendecomposition of H.
pub fn schrodinger_evolve(spec: &EvolveSpec) -> Result<Trajectory> {
    spec.validate()?;
    if spec.mode != EvolutionMode::Closed {
        return Err(KpoError::param("mode", "schrodinger_evolve requires closed mode"));
    }
    let psi0 = spec
        .initial
        .as_ket()
        .ok_or_else(|| KpoError::param("initial", "closed evolution requires a ket"))?;
    let space = spec.initial.space();
    let decomp = diagonalize(&build_hamiltonian(space, &spec.params))?;
    let coeffs = decomp.states().adjoint() * psi0;
    let energies = decomp.energies();

    let times = spec.output_times();
    let mut builder = TrajectoryBuilder::new(spec, times.len());
    let mut last = None;
    for &t in &times {
        let phased = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * C64::from_polar(1.0, -energies[k] * t));
        let psi = decomp.states() * phased;
        builder.norm_error = builder.norm_error.max((psi.norm() - 1.0).abs());
        let state = QuantumState::Ket {
            space,
            amplitudes: psi,
        };
        builder.record(t, &state);
        last = Some(state);
    }
    let final_state = last.expect("output grid is never empty");
    Ok(builder.finish(final_state))
}

/// Integrates the GKSL equation with κ = κ_e + κ_i.
///
/// Kets are promoted to |ψ><ψ|.
pub fn lindblad_evolve(spec: &EvolveSpec) -> Result<Trajectory> {
    spec.validate()?;
    if spec.mode != EvolutionMode::Open {
        return Err(KpoError::param("mode", "lindblad_evolve requires open mode"));
    }
    let space = spec.initial.space();
    let rho0 = spec.initial.to_density_matrix();
    let times = spec.output_times();
    let (rhos, diag) = evolve_density(space, &spec.params, &rho0, &times, &spec.solver)?;

    let mut builder = TrajectoryBuilder::new(spec, times.len());
    builder.accepted = diag.accepted_steps;
    builder.rejected = diag.rejected_steps;
    let mut last = None;
    for (&t, rho) in times.iter().zip(rhos) {
        builder.norm_error = builder.norm_error.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        builder.hermiticity = builder.hermiticity.max(hermiticity_defect(&rho));
        let state = QuantumState::density_trusted(space, rho);
        builder.record(t, &state);
        last = Some(state);
    }
    let final_rho = last.expect("output grid is never empty").to_density_matrix();
    let final_rho = (&final_rho + final_rho.adjoint()) * C64::new(0.5, 0.0);
    // Positivity is reported rather than enforced: with the default tolerances a
    // pure state picks up negative eigenvalues of order the global error.
    let min_eig = crate::fock::min_eigenvalue(&final_rho);
    let mut traj = builder.finish(QuantumState::density_trusted(space, final_rho));
    traj.diagnostics.final_min_eigenvalue = min_eig;
    Ok(traj)
}

struct TrajectoryBuilder {
    times: Vec<f64>,
    photon_number: Vec<f64>,
    populations: Option<Vec<Vec<f64>>>,
    states: Option<Vec<QuantumState>>,
    norm_error: f64,
    hermiticity: f64,
    accepted: usize,
    rejected: usize,
}

impl TrajectoryBuilder {
    fn new(spec: &EvolveSpec, len: usize) -> Self {
        Self {
            times: Vec::with_capacity(len),
            photon_number: Vec::with_capacity(len),
            populations: spec.record_populations.then(|| Vec::with_capacity(len)),
            states: spec.keep_states.then(|| Vec::with_capacity(len)),
            norm_error: 0.0,
            hermiticity: 0.0,
            accepted: 0,
            rejected: 0,
        }
    }

    fn record(&mut self, t: f64, state: &QuantumState) {
        self.times.push(t);
        let pops = state.populations();
        self.photon_number
            .push(pops.iter().enumerate().map(|(k, p)| k as f64 * p).sum());
        if let Some(all) = self.populations.as_mut() {
            all.push(pops);
        }
        if let Some(states) = self.states.as_mut() {
            states.push(state.clone());
        }
    }

    fn finish(self, final_state: QuantumState) -> Trajectory {
        Trajectory {
            times: self.times,
            photon_number: self.photon_number,
            populations: self.populations,
            states: self.states,
            final_state,
            diagnostics: Diagnostics {
                norm_error: self.norm_error,
                hermiticity_defect: self.hermiticity,
                accepted_steps: self.accepted,
                rejected_steps: self.rejected,
                ..Diagnostics::default()
            },
        }
    }
}

/// Density matrices at each requested time (ascending, starting at or after 0).
pub(crate) fn evolve_density(
    space: FockSpace,
    params: &KpoParams,
    rho0: &DMatrix<C64>,
    times: &[f64],
    solver: &SolverOptions,
) -> Result<(Vec<DMatrix<C64>>, Diagnostics)> {
    let h = build_hamiltonian(space, params).into_entries();
    match solver.method {
        OpenMethod::AdaptiveRk => {
            let rhs = LindbladRhs::new(&h, params.kappa());
            let dim = space.dim();
            // row-major storage: ρ_{mn} at m·N + n
            let y0: Vec<C64> = rho0.transpose().iter().copied().collect();
            let (ys, stats) = integrator::integrate(
                |y, dy| rhs.apply(y, dy),
                &y0,
                times,
                solver.tolerances(),
            )?;
            let rhos = ys
                .into_iter()
                .map(|y| DMatrix::from_row_slice(dim, dim, &y))
                .collect();
            Ok((
                rhos,
                Diagnostics {
                    accepted_steps: stats.accepted,
                    rejected_steps: stats.rejected,
                    ..Diagnostics::default()
                },
            ))
        }
        OpenMethod::Exponential => {
            let mut prop = SectorPropagator::new(&h, params.kappa(), rho0);
            let mut rho = rho0.clone();
            let mut t = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &target in times {
                if target > t {
                    rho = prop.advance(&rho, target - t);
                    t = target;
                }
                out.push(rho.clone());
            }
            Ok((out, Diagnostics::default()))
        }
    }
}

/// GKSL right-hand side acting directly on a row-major density matrix,
/// exploiting the sparsity of H and a.
struct LindbladRhs {
    dim: usize,
    h_rows: Vec<Vec<(usize, C64)>>,
    kappa: f64,
    sqrt_n: Vec<f64>,
}

impl LindbladRhs {
    fn new(h: &DMatrix<C64>, kappa: f64) -> Self {
        let dim = h.nrows();
        let h_rows = (0..dim)
            .map(|m| {
                (0..dim)
                    .filter(|&k| h[(m, k)] != C64::new(0.0, 0.0))
                    .map(|k| (k, h[(m, k)]))
                    .collect()
            })
            .collect();
        Self {
            dim,
            h_rows,
            kappa,
            sqrt_n: (0..=dim).map(|k| (k as f64).sqrt()).collect(),
        }
    }

    fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let dim = self.dim;
        let minus_i = C64::new(0.0, -1.0);
        for m in 0..dim {
            let row_m = &self.h_rows[m];
            for n in 0..dim {
                let mut comm = C64::new(0.0, 0.0);
                for &(k, hmk) in row_m {
                    comm += hmk * rho[k * dim + n];
                }
                for &(k, hnk) in &self.h_rows[n] {
                    comm -= rho[m * dim + k] * hnk.conj();
                }
                let mut value = minus_i * comm;
                if self.kappa != 0.0 {
                    if m + 1 < dim && n + 1 < dim {
                        value += self.kappa
                            * self.sqrt_n[m + 1]
                            * self.sqrt_n[n + 1]
                            * rho[(m + 1) * dim + n + 1];
                    }
                    value -= 0.5 * self.kappa * (m + n) as f64 * rho[m * dim + n];
                }
                out[m * dim + n] = value;
            }
        }
    }
}

/// exp(L Δt) for each parity sector that carries weight in the initial state.
struct SectorPropagator {
    sectors: Vec<(Vec<usize>, DMatrix<C64>)>,
    cache: HashMap<u64, Vec<DMatrix<C64>>>,
}

impl SectorPropagator {
    fn new(h: &DMatrix<C64>, kappa: f64, rho0: &DMatrix<C64>) -> Self {
        let dim = h.nrows();
        let sectors = Parity::BOTH
            .iter()
            .map(|&parity| sector_generator(h, kappa, parity))
            .filter(|(idx, _)| {
                idx.iter()
                    .any(|&i| rho0[(i % dim, i / dim)] != C64::new(0.0, 0.0))
            })
            .collect();
        Self {
            sectors,
            cache: HashMap::new(),
        }
    }

    fn advance(&mut self, rho: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
        let sectors = &self.sectors;
        let props = self.cache.entry(dt.to_bits()).or_insert_with(|| {
            sectors
                .iter()
                .map(|(_, g)| (g * C64::new(dt, 0.0)).exp())
                .collect()
        });
        let dim = rho.nrows();
        let mut out = DMatrix::zeros(dim, dim);
        for ((idx, _), p) in self.sectors.iter().zip(props.iter()) {
            let v = DVector::from_iterator(idx.len(), idx.iter().map(|&i| rho[(i % dim, i / dim)]));
            let w = p * v;
            for (&i, value) in idx.iter().zip(w.iter()) {
                out[(i % dim, i / dim)] = *value;
            }
        }
        out
    }
}
