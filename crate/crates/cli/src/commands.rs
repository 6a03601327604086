use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kpo_core::dynamics::{lindblad_evolve, schrodinger_evolve, EvolutionMode, EvolveSpec};
use kpo_core::fock::fock_state;
use kpo_core::io::{fmt_f64, sweep_layer_csv, write_json};
use kpo_core::spectral::{degeneracy_detuning, pair_at, scaling_exponent_fit};
use kpo_core::steadystate::{output_power, solve_steady_state, steady_photon_number};
use kpo_core::sweep::{find_peaks, run_sweep, Peak, SweepObservable, SweepSpec};
use kpo_core::units::{mhz, to_mhz};
use kpo_core::verify::{run_all, CheckOutcome, VerifyOptions};
use kpo_core::{KpoError, VERSION};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{require, ObservableKind, RunConfig};
use crate::CliError;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub workers: usize,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    outputs: Vec<String>,
    results: Value,
}

impl Context {
    fn write_text(&self, name: &str, text: &str) -> Result<String, CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(name.to_string())
    }

    fn write_sidecar(&self, command: &'static str, outputs: Vec<String>, results: Value) -> Result<(), CliError> {
        let sidecar = Sidecar {
            version: VERSION,
            command,
            config: &self.config,
            outputs,
            results,
        };
        write_sidecar_file(&self.out.join(format!("{command}.json")), &sidecar)
    }
}

fn write_sidecar_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_json(path, value).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn config_err(e: KpoError) -> CliError {
    CliError::Config(e.to_string())
}

pub fn spectrum(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let task = require(&config.spectrum, "spectrum")?;
    let p_list = config.spectrum_p_list(task)?;
    let n = task.n_partner;
    let delta_mhz = degeneracy_detuning(config.physics.chi_over_2pi_mhz, n)
        .map_err(|e| CliError::Config(format!("spectrum.n_partner: {e}")))?;
    let space = config.space();
    space
        .check_index(n)
        .map_err(|e| CliError::Config(format!("spectrum.n_partner: {e}")))?;

    let base = config.base_params().with_delta(mhz(delta_mhz));
    let mut csv = String::from(
        "p_over_2pi_mhz,e_plus_over_2pi_mhz,e_minus_over_2pi_mhz,splitting_over_2pi_mhz,fid_plus,fid_minus\n",
    );
    let mut fit_points = Vec::new();
    for &p in &p_list {
        let pair = pair_at(space, &base.with_p(mhz(p)), n)?;
        let splitting = to_mhz((pair.e_plus - pair.e_minus).abs());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f64(p),
            fmt_f64(to_mhz(pair.e_plus)),
            fmt_f64(to_mhz(pair.e_minus)),
            fmt_f64(splitting),
            fmt_f64(pair.fid_plus),
            fmt_f64(pair.fid_minus)
        );
        if p > 0.0 && splitting > 0.0 {
            fit_points.push((p, splitting));
        }
    }
    let exponent = if fit_points.len() >= 4 {
        match scaling_exponent_fit(&fit_points) {
            Ok(slope) => json!(slope),
            Err(e) => json!(format!("fit failed: {e}")),
        }
    } else {
        Value::Null
    };
    let outputs = vec![ctx.write_text("spectrum.csv", &csv)?];
    println!("spectrum: {} drive values, n = {n}, delta/2pi = {delta_mhz} MHz", p_list.len());
    if let Some(slope) = exponent.as_f64() {
        println!("fitted exponent of splitting vs p: {slope:.6}");
    }
    ctx.write_sidecar(
        "spectrum",
        outputs,
        json!({
            "n_partner": n,
            "delta_over_2pi_mhz": delta_mhz,
            "fit_points": fit_points.len(),
            "scaling_exponent": exponent,
        }),
    )
}

pub fn evolve(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let task = require(&config.evolve, "evolve")?;
    let delta_mhz = config.resolve_delta("evolve", task.delta_over_2pi_mhz, task.degeneracy_n)?;
    let p_mhz = config.resolve_p("evolve", task.p_over_2pi_mhz, task.p_over_chi)?;
    let space = config.space();
    let initial = fock_state(space, task.initial_fock)
        .map_err(|e| CliError::Config(format!("evolve.initial_fock: {e}")))?;
    let params = config.base_params().with_delta(mhz(delta_mhz)).with_p(mhz(p_mhz));
    let mut spec = EvolveSpec::new(params, initial, task.t_final_us, task.dt_out_us, task.mode)
        .with_solver(config.solver());
    if task.populations {
        spec = spec.with_populations();
    }
    spec.validate().map_err(config_err)?;

    let traj = match task.mode {
        EvolutionMode::Closed => schrodinger_evolve(&spec)?,
        EvolutionMode::Open => lindblad_evolve(&spec)?,
    };
    let outputs = vec![ctx.write_text("trajectory.csv", &traj.to_csv())?];
    let last = *traj.photon_number.last().expect("output grid is never empty");
    println!(
        "evolve: {} samples to t = {} us, final <a+a> = {last:.10e}",
        traj.times.len(),
        task.t_final_us
    );
    ctx.write_sidecar(
        "evolve",
        outputs,
        json!({
            "delta_over_2pi_mhz": delta_mhz,
            "p_over_2pi_mhz": p_mhz,
            "samples": traj.times.len(),
            "final_photon_number": last,
            "diagnostics": traj.diagnostics,
        }),
    )
}

pub fn steady(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let task = require(&config.steady, "steady")?;
    let delta_mhz = config.resolve_delta("steady", task.delta_over_2pi_mhz, task.degeneracy_n)?;
    let p_mhz = config.resolve_p("steady", task.p_over_2pi_mhz, task.p_over_chi)?;
    let params = config.base_params().with_delta(mhz(delta_mhz)).with_p(mhz(p_mhz));
    if params.kappa() <= 0.0 {
        return Err(CliError::Config(
            "physics: steady state needs kappa_e_over_2pi_mhz + kappa_i_over_2pi_mhz > 0".into(),
        ));
    }
    if task.output_power && params.omega_r.is_none() {
        return Err(CliError::Config(
            "physics.omega_r_over_2pi_ghz: required when steady.output_power = true".into(),
        ));
    }

    let sol = solve_steady_state(config.space(), &params)?;
    let n = steady_photon_number(&sol.state)?;
    let power = match params.omega_r {
        Some(_) => Some(output_power(n.max(0.0), &params)?),
        None => None,
    };
    println!("photon_number = {}", fmt_f64(n));
    if let Some(w) = power {
        println!("output_power_w = {}", fmt_f64(w));
    }
    ctx.write_sidecar(
        "steady",
        Vec::new(),
        json!({
            "delta_over_2pi_mhz": delta_mhz,
            "p_over_2pi_mhz": p_mhz,
            "photon_number": n,
            "output_power_w": power,
            "residual": sol.residual,
            "generator_scale": sol.generator_scale,
            "sigma_min": sol.sigma_min,
            "sigma_next": sol.sigma_next,
            "min_eigenvalue": sol.min_eigenvalue,
        }),
    )
}

#[derive(Serialize)]
struct LayerReport {
    label: String,
    time_us: Option<f64>,
    file: String,
    peaks: Option<Vec<Peak>>,
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let task = require(&config.sweep, "sweep")?;
    let (p_axis, drive_axis) = config.sweep_drive_axis(task)?;
    let observable = match task.observable {
        ObservableKind::SteadyPhoton => SweepObservable::SteadyPhoton,
        ObservableKind::OutputPowerSteady => SweepObservable::OutputPowerSteady,
        ObservableKind::SnapshotPhoton => SweepObservable::SnapshotPhoton {
            times_us: task.times_us.clone().ok_or_else(|| {
                CliError::Config("sweep.times_us: required for snapshot_photon".into())
            })?,
        },
    };
    if task.times_us.is_some() && task.observable != ObservableKind::SnapshotPhoton {
        return Err(CliError::Config("sweep.times_us: only valid for snapshot_photon".into()));
    }
    let mut spec = SweepSpec::new(
        config.base_params(),
        task.delta.into(),
        p_axis,
        observable,
        config.numerics.n_trunc,
    );
    spec.drive_axis = drive_axis;
    spec.solver = config.solver();
    spec.validate().map_err(config_err)?;
    let peak_row = task.peak_p_index.unwrap_or(p_axis.count - 1);
    if peak_row >= p_axis.count {
        return Err(CliError::Config(format!(
            "sweep.peak_p_index: {peak_row} out of range for {} drive values",
            p_axis.count
        )));
    }

    let result = run_sweep(&spec, ctx.workers)?;
    let mut layers = Vec::new();
    let mut outputs = Vec::new();
    for (k, layer) in result.layers.iter().enumerate() {
        let file = ctx.write_text(&format!("sweep_{}.csv", layer.label), &sweep_layer_csv(&result, layer))?;
        let peaks = find_peaks(&result.delta_values_mhz, &result.delta_cut(k, peak_row)).ok();
        if let Some(peaks) = &peaks {
            for peak in peaks {
                println!(
                    "{}: peak at delta/2pi = {:.6} MHz, value {:.6e}",
                    layer.label, peak.delta_over_2pi_mhz, peak.value
                );
            }
        }
        outputs.push(file.clone());
        layers.push(LayerReport {
            label: layer.label.clone(),
            time_us: layer.time_us,
            file,
            peaks,
        });
    }
    println!(
        "sweep: {} x {} grid, {} layer(s), {:.2} s on {} worker(s)",
        result.delta_values_mhz.len(),
        result.p_values_mhz.len(),
        result.layers.len(),
        result.metadata.wall_time_s,
        result.metadata.workers
    );
    ctx.write_sidecar(
        "sweep",
        outputs,
        json!({
            "metadata": result.metadata,
            "delta_values_mhz": result.delta_values_mhz,
            "p_values_mhz": result.p_values_mhz,
            "peak_p_index": peak_row,
            "peak_p_over_2pi_mhz": result.p_values_mhz[peak_row],
            "layers": layers,
        }),
    )
}

pub fn verify(n_trunc: Option<usize>, out: Option<&Path>) -> Result<(), CliError> {
    let mut opts = VerifyOptions::default();
    if let Some(n) = n_trunc {
        kpo_core::FockSpace::new(n).map_err(|e| CliError::Config(format!("--n-trunc: {e}")))?;
        opts.n_trunc = n;
    }
    let outcomes: Vec<CheckOutcome> = run_all(opts);
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        write_sidecar_file(
            &dir.join("verify.json"),
            &json!({ "version": VERSION, "command": "verify", "n_trunc": opts.n_trunc, "checks": outcomes }),
        )?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
