//! TOML run configuration. Every table rejects unknown keys.

use std::path::Path;

use kpo_core::dynamics::{EvolutionMode, OpenMethod, SolverOptions};
use kpo_core::fock::{FockSpace, KpoParams};
use kpo_core::spectral::degeneracy_detuning;
use kpo_core::sweep::{Axis, DriveAxis};
use kpo_core::units::{ghz, mhz};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    #[serde(default)]
    pub numerics: Numerics,
    pub spectrum: Option<SpectrumTask>,
    pub evolve: Option<EvolveTask>,
    pub steady: Option<SteadyTask>,
    pub sweep: Option<SweepTask>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub chi_over_2pi_mhz: f64,
    #[serde(default)]
    pub kappa_e_over_2pi_mhz: f64,
    #[serde(default)]
    pub kappa_i_over_2pi_mhz: f64,
    pub omega_r_over_2pi_ghz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_trunc: usize,
    pub rtol: f64,
    pub atol: f64,
    pub method: OpenMethod,
    pub max_steps: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        let solver = SolverOptions::default();
        Self {
            n_trunc: 30,
            rtol: solver.rtol,
            atol: solver.atol,
            method: solver.method,
            max_steps: solver.max_steps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTask {
    /// Partner n of the |0>-|n> pair; Δ is set to its degeneracy value.
    pub n_partner: usize,
    pub p_list_mhz: Option<Vec<f64>>,
    pub p_over_chi_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveTask {
    pub mode: EvolutionMode,
    pub delta_over_2pi_mhz: Option<f64>,
    pub degeneracy_n: Option<usize>,
    pub p_over_2pi_mhz: Option<f64>,
    pub p_over_chi: Option<f64>,
    pub t_final_us: f64,
    pub dt_out_us: f64,
    /// Initial Fock state |k>.
    #[serde(default)]
    pub initial_fock: usize,
    #[serde(default)]
    pub populations: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyTask {
    pub delta_over_2pi_mhz: Option<f64>,
    pub degeneracy_n: Option<usize>,
    pub p_over_2pi_mhz: Option<f64>,
    pub p_over_chi: Option<f64>,
    /// Require P_o in the output (needs omega_r_over_2pi_ghz).
    #[serde(default)]
    pub output_power: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl From<AxisConfig> for Axis {
    fn from(a: AxisConfig) -> Self {
        Axis::new(a.min, a.max, a.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    SteadyPhoton,
    SnapshotPhoton,
    OutputPowerSteady,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTask {
    /// Δ/2π in MHz.
    pub delta: AxisConfig,
    /// p/2π in MHz.
    pub p_mhz: Option<AxisConfig>,
    /// p/|χ|.
    pub p_over_chi: Option<AxisConfig>,
    pub observable: ObservableKind,
    pub times_us: Option<Vec<f64>>,
    /// Row of the p axis used for the peak report; defaults to the last.
    pub peak_p_index: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn finite(name: &str, value: f64) -> Result<f64, CliError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(format!("{name}: must be finite, got {value}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let ph = &self.physics;
        finite("physics.chi_over_2pi_mhz", ph.chi_over_2pi_mhz)?;
        for (name, v) in [
            ("physics.kappa_e_over_2pi_mhz", ph.kappa_e_over_2pi_mhz),
            ("physics.kappa_i_over_2pi_mhz", ph.kappa_i_over_2pi_mhz),
        ] {
            if finite(name, v)? < 0.0 {
                return Err(invalid(format!("{name}: must be >= 0, got {v}")));
            }
        }
        if let Some(w) = ph.omega_r_over_2pi_ghz {
            if !(finite("physics.omega_r_over_2pi_ghz", w)? > 0.0) {
                return Err(invalid(format!("physics.omega_r_over_2pi_ghz: must be > 0, got {w}")));
            }
        }
        FockSpace::new(self.numerics.n_trunc)
            .map_err(|e| invalid(format!("numerics.n_trunc: {e}")))?;
        self.solver()
            .validate()
            .map_err(|e| invalid(format!("numerics: {e}")))?;
        Ok(())
    }

    pub fn space(&self) -> FockSpace {
        FockSpace::new(self.numerics.n_trunc).expect("validated at load")
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            method: self.numerics.method,
            rtol: self.numerics.rtol,
            atol: self.numerics.atol,
            max_steps: self.numerics.max_steps,
        }
    }

    /// χ, κ_e, κ_i and ω_r in internal units; Δ = p = 0.
    pub fn base_params(&self) -> KpoParams {
        let ph = &self.physics;
        let params = KpoParams::new(mhz(ph.chi_over_2pi_mhz), 0.0, 0.0)
            .with_dissipation(mhz(ph.kappa_e_over_2pi_mhz), mhz(ph.kappa_i_over_2pi_mhz));
        match ph.omega_r_over_2pi_ghz {
            Some(w) => params.with_omega_r(ghz(w)),
            None => params,
        }
    }

    /// Resolves Δ/2π in MHz from either an explicit value or a degeneracy index.
    pub fn resolve_delta(&self, block: &str, delta: Option<f64>, n: Option<usize>) -> Result<f64, CliError> {
        match (delta, n) {
            (Some(d), None) => finite(&format!("{block}.delta_over_2pi_mhz"), d),
            (None, Some(n)) => degeneracy_detuning(self.physics.chi_over_2pi_mhz, n)
                .map_err(|e| invalid(format!("{block}.degeneracy_n: {e}"))),
            (Some(_), Some(_)) => Err(invalid(format!(
                "{block}: give either delta_over_2pi_mhz or degeneracy_n, not both"
            ))),
            (None, None) => Err(invalid(format!(
                "{block}: one of delta_over_2pi_mhz or degeneracy_n is required"
            ))),
        }
    }

    /// Resolves p/2π in MHz from either convention.
    pub fn resolve_p(&self, block: &str, p_mhz: Option<f64>, p_over_chi: Option<f64>) -> Result<f64, CliError> {
        let value = match (p_mhz, p_over_chi) {
            (Some(p), None) => finite(&format!("{block}.p_over_2pi_mhz"), p)?,
            (None, Some(r)) => finite(&format!("{block}.p_over_chi"), r)? * self.physics.chi_over_2pi_mhz.abs(),
            (Some(_), Some(_)) => {
                return Err(invalid(format!(
                    "{block}: conflicting drive conventions, give p_over_2pi_mhz or p_over_chi, not both"
                )))
            }
            (None, None) => {
                return Err(invalid(format!("{block}: one of p_over_2pi_mhz or p_over_chi is required")))
            }
        };
        if value < 0.0 {
            return Err(invalid(format!("{block}: drive must be >= 0, got {value}")));
        }
        Ok(value)
    }

    pub fn spectrum_p_list(&self, task: &SpectrumTask) -> Result<Vec<f64>, CliError> {
        let list = match (&task.p_list_mhz, &task.p_over_chi_list) {
            (Some(p), None) => p.clone(),
            (None, Some(r)) => r
                .iter()
                .map(|r| r * self.physics.chi_over_2pi_mhz.abs())
                .collect(),
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "spectrum: conflicting drive conventions, give p_list_mhz or p_over_chi_list, not both",
                ))
            }
            (None, None) => return Err(invalid("spectrum.p_list_mhz: required")),
        };
        if list.is_empty() {
            return Err(invalid("spectrum.p_list_mhz: must not be empty"));
        }
        for &p in &list {
            if !(p.is_finite() && p >= 0.0) {
                return Err(invalid(format!("spectrum.p_list_mhz: entries must be finite and >= 0, got {p}")));
            }
        }
        Ok(list)
    }

    pub fn sweep_drive_axis(&self, task: &SweepTask) -> Result<(Axis, DriveAxis), CliError> {
        match (task.p_mhz, task.p_over_chi) {
            (Some(a), None) => Ok((a.into(), DriveAxis::Mhz)),
            (None, Some(a)) => Ok((a.into(), DriveAxis::OverChi)),
            (Some(_), Some(_)) => Err(invalid(
                "sweep: conflicting drive conventions, give p_mhz or p_over_chi, not both",
            )),
            (None, None) => Err(invalid("sweep: one of p_mhz or p_over_chi is required")),
        }
    }
}

pub fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    block
        .as_ref()
        .ok_or_else(|| invalid(format!("missing [{name}] block")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[physics]\nchi_over_2pi_mhz = 18.0\n";

    #[test]
    fn defaults_fill_numerics() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.numerics.n_trunc, 30);
        assert_eq!(c.numerics.rtol, 1e-8);
        assert_eq!(c.numerics.method, OpenMethod::AdaptiveRk);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[physics]\nchi_over_2pi_mhz = 18.0\nchi_mhz = 1\n").unwrap_err();
        assert!(err.to_string().contains("chi_mhz"), "{err}");
        let err = RunConfig::parse("[physics]\nchi_over_2pi_mhz = 18.0\n[numerics]\nntrunc = 3\n").unwrap_err();
        assert!(err.to_string().contains("ntrunc"), "{err}");
    }

    #[test]
    fn truncation_and_physics_checked() {
        assert!(RunConfig::parse("[physics]\nchi_over_2pi_mhz = 18.0\n[numerics]\nn_trunc = 1\n").is_err());
        assert!(RunConfig::parse("[physics]\nchi_over_2pi_mhz = nan\n").is_err());
        assert!(RunConfig::parse("[physics]\nchi_over_2pi_mhz = 1.0\nkappa_e_over_2pi_mhz = -1\n").is_err());
    }

    #[test]
    fn detuning_and_drive_resolution() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.resolve_delta("steady", None, Some(2)).unwrap(), -9.0);
        assert!(c.resolve_delta("steady", Some(1.0), Some(2)).is_err());
        assert!(c.resolve_delta("steady", None, None).is_err());
        assert_eq!(c.resolve_p("steady", None, Some(0.5)).unwrap(), 9.0);
        let err = c.resolve_p("steady", Some(1.0), Some(0.5)).unwrap_err();
        assert!(err.to_string().contains("conflicting"));
    }

    #[test]
    fn empty_p_list_rejected() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let task = SpectrumTask { n_partner: 2, p_list_mhz: Some(vec![]), p_over_chi_list: None };
        assert!(c.spectrum_p_list(&task).is_err());
    }

    #[test]
    fn shipped_recipes_resolve() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes");
        let mut seen = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().and_then(|e| e.to_str()) != Some("toml") {
                continue;
            }
            let c = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let name = path.display();
            if let Some(t) = &c.spectrum {
                assert!(!c.spectrum_p_list(t).unwrap().is_empty(), "{name}");
            }
            if let Some(t) = &c.evolve {
                c.resolve_delta("evolve", t.delta_over_2pi_mhz, t.degeneracy_n).unwrap();
                c.resolve_p("evolve", t.p_over_2pi_mhz, t.p_over_chi).unwrap();
            }
            if let Some(t) = &c.sweep {
                let (p_axis, _) = c.sweep_drive_axis(t).unwrap();
                p_axis.validate("p").unwrap();
                Axis::from(t.delta).validate("delta").unwrap();
            }
            seen += 1;
        }
        assert!(seen >= 20, "only {seen} recipes found");
    }
}
