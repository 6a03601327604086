//! (Δ, p) grid sweeps producing steady-state or fixed-time photon-number maps.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_density, SolverOptions};
use crate::error::{KpoError, Result};
use crate::fock::{FockSpace, KpoParams};
use crate::steadystate::{output_power, solve_steady_state, steady_photon_number};
use crate::units::{mhz, to_mhz};
use crate::C64;

/// Evenly spaced axis from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    /// Axis of `count` points with the given spacing, centred on `center`.
    pub fn centered(center: f64, spacing: f64, count: usize) -> Self {
        let half = spacing * (count as f64 - 1.0) / 2.0;
        Self::new(center - half, center + half, count)
    }

    /// `min == max` is allowed and repeats the value; a single point requires it.
    pub fn validate(&self, name: &'static str) -> Result<()> {
        if self.count == 0 {
            return Err(KpoError::param(name, "needs count >= 1"));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(KpoError::param(
                name,
                format!("needs finite min <= max, got [{}, {}]", self.min, self.max),
            ));
        }
        if self.count == 1 && self.min != self.max {
            return Err(KpoError::param(
                name,
                format!("a single point needs min == max, got [{}, {}]", self.min, self.max),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.max
                } else {
                    self.min + step * k as f64
                }
            })
            .collect()
    }
}

/// Units of the drive axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveAxis {
    /// p/2π in MHz.
    #[default]
    Mhz,
    /// p/|χ|, dimensionless.
    OverChi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepObservable {
    /// Steady-state ⟨a†a⟩.
    SteadyPhoton,
    /// ⟨a†a⟩ at the given times (µs), evolved from the vacuum. One layer per time.
    SnapshotPhoton { times_us: Vec<f64> },
    /// Steady-state output power in watts.
    OutputPowerSteady,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// χ, κ_e, κ_i and ω_r are taken from here; Δ and p are overwritten per point.
    pub params_base: KpoParams,
    /// Δ/2π in MHz.
    pub delta_axis: Axis,
    /// p/2π in MHz or p/|χ| depending on `drive_axis`.
    pub p_axis: Axis,
    pub drive_axis: DriveAxis,
    pub observable: SweepObservable,
    pub n_trunc: usize,
    pub solver: SolverOptions,
}

impl SweepSpec {
    pub fn new(
        params_base: KpoParams,
        delta_axis: Axis,
        p_axis: Axis,
        observable: SweepObservable,
        n_trunc: usize,
    ) -> Self {
        Self {
            params_base,
            delta_axis,
            p_axis,
            drive_axis: DriveAxis::Mhz,
            observable,
            n_trunc,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        FockSpace::new(self.n_trunc)?;
        self.params_base.validate()?;
        self.solver.validate()?;
        self.delta_axis.validate("delta_axis")?;
        self.p_axis.validate("p_axis")?;
        if self.p_axis.min < 0.0 {
            return Err(KpoError::param("p_axis", "drive amplitudes must be >= 0"));
        }
        if self.drive_axis == DriveAxis::OverChi && self.params_base.chi == 0.0 {
            return Err(KpoError::param("p_axis", "p/chi axis requires chi != 0"));
        }
        match &self.observable {
            SweepObservable::SnapshotPhoton { times_us } => {
                if times_us.is_empty() {
                    return Err(KpoError::param("times_us", "at least one snapshot time required"));
                }
                if let Some(t) = times_us.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
                    return Err(KpoError::param("times_us", format!("snapshot times must be > 0, got {t}")));
                }
            }
            SweepObservable::OutputPowerSteady => {
                if self.params_base.omega_r.is_none() {
                    return Err(KpoError::MissingOmegaR);
                }
            }
            SweepObservable::SteadyPhoton => {}
        }
        if !matches!(self.observable, SweepObservable::SnapshotPhoton { .. })
            && self.params_base.kappa() <= 0.0
        {
            return Err(KpoError::ZeroDissipation);
        }
        Ok(())
    }

    /// Drive values as p/2π in MHz.
    pub fn p_values_mhz(&self) -> Vec<f64> {
        let raw = self.p_axis.values();
        match self.drive_axis {
            DriveAxis::Mhz => raw,
            DriveAxis::OverChi => {
                let chi_mhz = to_mhz(self.params_base.chi.abs());
                raw.into_iter().map(|r| r * chi_mhz).collect()
            }
        }
    }

    fn layer_labels(&self) -> Vec<(String, Option<f64>)> {
        match &self.observable {
            SweepObservable::SteadyPhoton => vec![("steady_photon".into(), None)],
            SweepObservable::OutputPowerSteady => vec![("output_power_steady".into(), None)],
            SweepObservable::SnapshotPhoton { times_us } => times_us
                .iter()
                .map(|&t| (format!("snapshot_photon_t{t}us"), Some(t)))
                .collect(),
        }
    }
}

/// One observable map, indexed `[delta_index][p_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLayer {
    pub label: String,
    pub time_us: Option<f64>,
    pub grid: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub n_trunc: usize,
    /// Largest steady-state residual ‖L vec ρ‖₂, or largest |Tr ρ - 1| for snapshots.
    pub residual_max: f64,
    pub wall_time_s: f64,
    pub version: String,
    pub started_unix_s: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub delta_values_mhz: Vec<f64>,
    pub p_values_mhz: Vec<f64>,
    pub layers: Vec<SweepLayer>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    /// First (or only) layer.
    pub fn grid(&self) -> &[Vec<f64>] {
        &self.layers[0].grid
    }

    /// Values along Δ at a fixed p index.
    pub fn delta_cut(&self, layer: usize, p_index: usize) -> Vec<f64> {
        self.layers[layer].grid.iter().map(|row| row[p_index]).collect()
    }

    /// Values along p at a fixed Δ index.
    pub fn p_cut(&self, layer: usize, delta_index: usize) -> Vec<f64> {
        self.layers[layer].grid[delta_index].clone()
    }
}

/// Number of workers: the explicit request, else available parallelism.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Evaluates the observable on every (Δ, p) point.
///
/// Points run on a pool of `workers` threads and write into preallocated
/// slots, so the grid is independent of scheduling. The first failing point
/// (in grid order) aborts the sweep.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let space = FockSpace::new(spec.n_trunc)?;
    let deltas = spec.delta_axis.values();
    let ps = spec.p_values_mhz();
    let labels = spec.layer_labels();
    let workers = workers.max(1);

    let points: Vec<(usize, usize)> = (0..deltas.len())
        .flat_map(|i| (0..ps.len()).map(move |j| (i, j)))
        .collect();
    let eval = |&(i, j): &(usize, usize)| -> Result<(Vec<f64>, f64)> {
        let params = spec
            .params_base
            .with_delta(mhz(deltas[i]))
            .with_p(mhz(ps[j]));
        evaluate_point(space, &params, &spec.observable, &spec.solver).map_err(|e| {
            KpoError::SweepPoint {
                delta_mhz: deltas[i],
                p_mhz: ps[j],
                source: Box::new(e),
            }
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| KpoError::param("workers", e.to_string()))?;
    let results: Vec<Result<(Vec<f64>, f64)>> = pool.install(|| points.par_iter().map(eval).collect());

    let mut layers: Vec<SweepLayer> = labels
        .into_iter()
        .map(|(label, time_us)| SweepLayer {
            label,
            time_us,
            grid: vec![vec![0.0; ps.len()]; deltas.len()],
        })
        .collect();
    let mut residual_max = 0.0f64;
    for (&(i, j), res) in points.iter().zip(results) {
        let (values, residual) = res?;
        residual_max = residual_max.max(residual);
        for (layer, v) in layers.iter_mut().zip(values) {
            if !v.is_finite() {
                return Err(KpoError::SweepPoint {
                    delta_mhz: deltas[i],
                    p_mhz: ps[j],
                    source: Box::new(KpoError::param("value", format!("non-finite result {v}"))),
                });
            }
            layer.grid[i][j] = v;
        }
    }
    Ok(SweepResult {
        spec: spec.clone(),
        delta_values_mhz: deltas,
        p_values_mhz: ps,
        layers,
        metadata: SweepMetadata {
            n_trunc: spec.n_trunc,
            residual_max,
            wall_time_s: started.elapsed().as_secs_f64(),
            version: crate::VERSION.to_string(),
            started_unix_s,
            workers,
        },
    })
}

fn evaluate_point(
    space: FockSpace,
    params: &KpoParams,
    observable: &SweepObservable,
    solver: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    match observable {
        SweepObservable::SteadyPhoton | SweepObservable::OutputPowerSteady => {
            let sol = solve_steady_state(space, params)?;
            let n = steady_photon_number(&sol.state)?;
            let value = if matches!(observable, SweepObservable::OutputPowerSteady) {
                output_power(n.max(0.0), params)?
            } else {
                n
            };
            Ok((vec![value], sol.residual))
        }
        SweepObservable::SnapshotPhoton { times_us } => {
            // one trajectory per point, sampled at every requested time
            let mut order: Vec<usize> = (0..times_us.len()).collect();
            order.sort_by(|&a, &b| times_us[a].total_cmp(&times_us[b]));
            let sorted: Vec<f64> = order.iter().map(|&k| times_us[k]).collect();
            let dim = space.dim();
            let mut vacuum = DMatrix::zeros(dim, dim);
            vacuum[(0, 0)] = C64::new(1.0, 0.0);
            let (rhos, _) = evolve_density(space, params, &vacuum, &sorted, solver)?;
            let mut values = vec![0.0; times_us.len()];
            let mut trace_err = 0.0f64;
            for (&k, rho) in order.iter().zip(&rhos) {
                trace_err = trace_err.max((rho.trace() - C64::new(1.0, 0.0)).norm());
                values[k] = rho
                    .diagonal()
                    .iter()
                    .enumerate()
                    .map(|(n, z)| n as f64 * z.re)
                    .sum();
            }
            Ok((values, trace_err))
        }
    }
}

/// Local maximum along the Δ axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub delta_over_2pi_mhz: f64,
    pub value: f64,
}

/// Strict local maxima of the first layer along Δ at a fixed p row.
pub fn detect_pr_peaks(result: &SweepResult, p_index: usize) -> Result<Vec<Peak>> {
    if p_index >= result.p_values_mhz.len() {
        return Err(KpoError::param("p_index", format!("{p_index} out of range")));
    }
    let cut = result.delta_cut(0, p_index);
    find_peaks(&result.delta_values_mhz, &cut)
}

/// Interior points strictly above both neighbours.
pub fn find_peaks(deltas_mhz: &[f64], values: &[f64]) -> Result<Vec<Peak>> {
    if values.len() < 3 || deltas_mhz.len() != values.len() {
        return Err(KpoError::InsufficientPoints {
            required: 3,
            found: values.len().min(deltas_mhz.len()),
        });
    }
    Ok(values
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] && w[1] > w[2])
        .map(|(k, w)| Peak {
            delta_over_2pi_mhz: deltas_mhz[k + 1],
            value: w[1],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> KpoParams {
        KpoParams::from_mhz(18.729, 0.0, 0.0).with_dissipation(mhz(0.47), mhz(0.26))
    }

    #[test]
    fn axis_values_hit_endpoints() {
        let axis = Axis::new(-66.5, -64.6, 20);
        let v = axis.values();
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], -66.5);
        assert_eq!(v[19], -64.6);
        assert!(Axis::new(0.0, 1.0, 1).validate("a").is_err());
        assert!(Axis::new(0.0, 1.0, 0).validate("a").is_err());
        let single = Axis::new(-28.0935, -28.0935, 1);
        assert!(single.validate("a").is_ok());
        assert_eq!(single.values(), vec![-28.0935]);
        assert!(Axis::new(1.0, 0.0, 3).validate("a").is_err());
        assert_eq!(Axis::new(1.0, 1.0, 3).values(), vec![1.0; 3]);
        let c = Axis::centered(10.0, 0.05, 21);
        assert!((c.values()[10] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn undriven_grid_is_dark() {
        let spec = SweepSpec::new(base(), Axis::new(-10.0, -10.0, 1), Axis::new(0.0, 0.0, 2), SweepObservable::SteadyPhoton, 8);
        let result = run_sweep(&spec, 1).unwrap();
        assert_eq!(result.grid().len(), 1);
        assert!(result.grid()[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn worker_count_does_not_change_grid() {
        let spec = SweepSpec::new(
            base(),
            Axis::new(-12.0, -6.0, 4),
            Axis::new(0.1, 1.0, 3),
            SweepObservable::SteadyPhoton,
            10,
        );
        let a = run_sweep(&spec, 1).unwrap();
        let b = run_sweep(&spec, 3).unwrap();
        let c = run_sweep(&spec, 1).unwrap();
        assert_eq!(a.layers, b.layers);
        assert_eq!(a.layers, c.layers);
    }

    #[test]
    fn snapshot_layers_per_time() {
        let spec = SweepSpec::new(
            base(),
            Axis::new(-10.0, -8.0, 2),
            Axis::new(0.2, 1.0, 2),
            SweepObservable::SnapshotPhoton { times_us: vec![0.2, 0.05] },
            8,
        );
        let result = run_sweep(&spec, 1).unwrap();
        assert_eq!(result.layers.len(), 2);
        assert_eq!(result.layers[1].time_us, Some(0.05));
        assert!(result.metadata.residual_max < 1e-9);
    }

    #[test]
    fn over_chi_axis_converts() {
        let mut spec = SweepSpec::new(base(), Axis::new(-1.0, 1.0, 2), Axis::new(0.0, 0.1, 3), SweepObservable::SteadyPhoton, 4);
        spec.drive_axis = DriveAxis::OverChi;
        let ps = spec.p_values_mhz();
        assert!((ps[2] - 1.8729).abs() < 1e-12);
    }

    #[test]
    fn power_sweep_needs_omega_r() {
        let spec = SweepSpec::new(base(), Axis::new(-1.0, 1.0, 2), Axis::new(0.0, 0.1, 2), SweepObservable::OutputPowerSteady, 4);
        assert!(matches!(run_sweep(&spec, 1), Err(KpoError::MissingOmegaR)));
    }

    #[test]
    fn failing_point_reports_coordinates() {
        let mut spec = SweepSpec::new(base(), Axis::new(-1.0, 1.0, 2), Axis::new(0.0, 0.1, 2), SweepObservable::SnapshotPhoton { times_us: vec![1.0] }, 6);
        spec.solver.max_steps = 3;
        match run_sweep(&spec, 1) {
            Err(KpoError::SweepPoint { delta_mhz, p_mhz, .. }) => {
                assert_eq!(delta_mhz, -1.0);
                assert_eq!(p_mhz, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn peak_detection() {
        let deltas: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).collect();
        let ridge: Vec<f64> = deltas.iter().map(|d| (-(d - 0.5f64).powi(2) / 0.1).exp()).collect();
        let peaks = find_peaks(&deltas, &ridge).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].delta_over_2pi_mhz - 0.5).abs() < 1e-12);
        assert!(find_peaks(&deltas, &vec![1.0; 41]).unwrap().is_empty());
        assert!(find_peaks(&deltas[..2], &ridge[..2]).is_err());
    }
}
