//! Release acceptance run: one PASS/FAIL line per criterion, nonzero exit on
//! any failure. Tolerances and runtime budgets are fixed below.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kpo_core::dynamics::{lindblad_evolve, schrodinger_evolve, EvolutionMode, EvolveSpec, SolverOptions};
use kpo_core::fock::{fock_state, FockSpace, KpoParams};
use kpo_core::spectral::{
    degeneracy_detuning, energy_splitting, pair_at, perturbative_rabi_angular_frequency,
    scaling_exponent_fit,
};
use kpo_core::steadystate::{solve_steady_state, steady_photon_number};
use kpo_core::sweep::{detect_pr_peaks, run_sweep, Axis, SweepObservable, SweepSpec};
use kpo_core::units::mhz;
use kpo_core::verify::{run_all, VerifyOptions};
use kpo_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

fn space(n_trunc: usize) -> FockSpace {
    FockSpace::new(n_trunc).expect("valid truncation")
}

fn at_degeneracy(chi_mhz: f64, n: usize, p_mhz: f64) -> Result<KpoParams> {
    let chi = mhz(chi_mhz);
    Ok(KpoParams::new(chi, degeneracy_detuning(chi, n)?, mhz(p_mhz)))
}

fn c1_two_photon_law() -> Outcome {
    let mut worst = 0.0f64;
    for p_mhz in [0.05, 0.1, 0.18] {
        let params = at_degeneracy(18.0, 2, p_mhz)?;
        let split = energy_splitting(&pair_at(space(30), &params, 2)?).abs();
        let expected = 2.0 * 2f64.sqrt() * params.p;
        worst = worst.max((split - expected).abs() / expected);
    }
    Ok((worst <= 1e-3, format!("max relative deviation {worst:.3e} (limit 1e-3)")))
}

fn c2_scaling_exponents() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (n, target, tol) in [(4usize, 2.0, 0.1), (6, 3.0, 0.15)] {
        let mut points = Vec::new();
        for k in 0..8 {
            let p_mhz = 0.2 + 0.8 * k as f64 / 7.0;
            let params = at_degeneracy(18.0, n, p_mhz)?;
            points.push((params.p, energy_splitting(&pair_at(space(30), &params, n)?).abs()));
        }
        let slope = scaling_exponent_fit(&points)?;
        ok &= (slope - target).abs() <= tol;
        detail.push(format!("n={n}: {slope:.4} (target {target} ± {tol})"));
    }
    Ok((ok, detail.join(", ")))
}

fn c3_prefactors() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [4usize, 6] {
        let params = at_degeneracy(18.0, n, 0.2)?;
        let split = energy_splitting(&pair_at(space(30), &params, n)?).abs();
        let closed = perturbative_rabi_angular_frequency(&params, n)?;
        let rel = (split - closed).abs() / closed;
        ok &= rel <= 0.05;
        detail.push(format!("n={n}: exact/closed-form = {:.5}", split / closed));
    }
    Ok((ok, detail.join(", ")))
}

fn c4_fidelities() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [8usize, 10, 12] {
        let weak = pair_at(space(30), &at_degeneracy(18.0, n, 0.1)?, n)?;
        let strong = pair_at(space(30), &at_degeneracy(18.0, n, 1.0)?, n)?;
        let weak_ok = weak.fid_plus > 0.99 && weak.fid_minus > 0.99;
        let strong_ok =
            strong.fid_plus > strong.runner_up_plus && strong.fid_minus > strong.runner_up_minus;
        ok &= weak_ok && strong_ok;
        detail.push(format!(
            "n={n}: F±(0.1)={:.5}/{:.5}, F±(1)={:.5}/{:.5} vs runner-up {:.1e}/{:.1e}",
            weak.fid_plus,
            weak.fid_minus,
            strong.fid_plus,
            strong.fid_minus,
            strong.runner_up_plus,
            strong.runner_up_minus
        ));
    }
    Ok((ok, detail.join("; ")))
}

/// Time at which ⟨a†a⟩ first comes back to the vacuum: the midpoint of the
/// first downward and the next upward crossing of n/2, linearly interpolated.
fn first_return(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let crossing = |from: usize, downward: bool| {
        (from..values.len() - 1).find_map(|i| {
            let (a, b) = (values[i] - level, values[i + 1] - level);
            let hit = if downward { a >= 0.0 && b < 0.0 } else { a < 0.0 && b >= 0.0 };
            hit.then(|| (i, times[i] + (times[i + 1] - times[i]) * a / (a - b)))
        })
    };
    let (i_up, _) = crossing(0, false)?;
    let (i_down, t_down) = crossing(i_up + 1, true)?;
    let (_, t_up) = crossing(i_down + 1, false)?;
    Some(0.5 * (t_down + t_up))
}

fn c5_closed_rabi() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [8usize, 10, 12] {
        let s = space(30);
        let params = at_degeneracy(18.0, n, 1.0)?;
        let period = TAU / energy_splitting(&pair_at(s, &params, n)?).abs();
        let spec = EvolveSpec::new(params, fock_state(s, 0)?, 2.0 * period, period / 4000.0, EvolutionMode::Closed);
        let traj = schrodinger_evolve(&spec)?;
        let peak = traj.photon_number.iter().copied().fold(0.0, f64::max);
        let ret = first_return(&traj.times, &traj.photon_number, 0.5 * n as f64);
        let rel = ret.map(|t| (t - period).abs() / period).unwrap_or(f64::INFINITY);
        ok &= peak >= 0.9 * n as f64 && rel <= 0.02;
        detail.push(format!("n={n}: max {peak:.4}, return/period - 1 = {rel:.2e}"));
    }
    Ok((ok, detail.join(", ")))
}

fn c6_steady_vs_dynamics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b70_6f06);
    let s = space(16);
    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let delta_mhz = rng.gen_range(-60.0..10.0);
        let p_mhz = rng.gen_range(0.1..1.0);
        let params = KpoParams::from_mhz(18.729, delta_mhz, p_mhz).with_dissipation(mhz(0.47), mhz(0.26));
        let steady = steady_photon_number(&solve_steady_state(s, &params)?.state)?;
        let t = 20.0 / params.kappa();
        let spec = EvolveSpec::new(params, fock_state(s, 0)?, t, t, EvolutionMode::Open);
        let evolved = *lindblad_evolve(&spec)?.photon_number.last().expect("nonempty");
        let diff = (evolved - steady).abs();
        ok &= diff <= 1e-6 * steady.abs() || diff <= 1e-9;
        worst = worst.max(diff / steady.abs().max(1e-300));
    }
    Ok((ok, format!("5 points, worst relative difference {worst:.2e} (limit 1e-6, floor 1e-9)")))
}

fn c7_pr_peaks() -> Outcome {
    let chi_mhz = -18.729;
    let base = KpoParams::from_mhz(chi_mhz, 0.0, 0.0).with_dissipation(mhz(1e-6), 0.0);
    let spacing = 0.05;
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [2usize, 4, 6] {
        let target = degeneracy_detuning(chi_mhz, n)?;
        let spec = SweepSpec::new(
            base,
            Axis::centered(target, spacing, 21),
            Axis::new(1.0, 1.0, 1),
            SweepObservable::SteadyPhoton,
            30,
        );
        let result = run_sweep(&spec, 1)?;
        let peaks = detect_pr_peaks(&result, 0)?;
        let nearest = peaks
            .iter()
            .min_by(|a, b| {
                (a.delta_over_2pi_mhz - target).abs().total_cmp(&(b.delta_over_2pi_mhz - target).abs())
            })
            .copied();
        match nearest {
            Some(peak) => {
                let offset = (peak.delta_over_2pi_mhz - target).abs();
                ok &= offset <= spacing * (1.0 + 1e-9);
                detail.push(format!("n={n}: peak {:.4} MHz (Δ* {target:.4}), <n>={:.3}", peak.delta_over_2pi_mhz, peak.value));
            }
            None => {
                ok = false;
                detail.push(format!("n={n}: no peak"));
            }
        }
    }
    Ok((ok, detail.join("; ")))
}

fn contrast(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Fringe contrast at three snapshots plus the t = 100/κ curve against the
/// steady-state curve, along p/2π ∈ [0, 1] MHz (41 points) at fixed Δ.
fn two_stage(label: &str, delta_mhz: f64, kappa_mhz: f64, snapshots: [f64; 3], n_trunc: usize) -> Result<(bool, String)> {
    let base = KpoParams::from_mhz(18.729, 0.0, 0.0).with_dissipation(mhz(kappa_mhz), 0.0);
    let t_inf = 100.0 / base.kappa();
    let mut times = snapshots.to_vec();
    times.push(t_inf);
    let delta_axis = Axis::new(delta_mhz, delta_mhz, 1);
    let p_axis = Axis::new(0.0, 1.0, 41);
    let mut snap = SweepSpec::new(base, delta_axis, p_axis, SweepObservable::SnapshotPhoton { times_us: times }, n_trunc);
    snap.solver = SolverOptions::exponential();
    let snap = run_sweep(&snap, 1)?;
    let steady = run_sweep(&SweepSpec::new(base, delta_axis, p_axis, SweepObservable::SteadyPhoton, n_trunc), 1)?;

    let c: Vec<f64> = (0..3).map(|k| contrast(&snap.p_cut(k, 0))).collect();
    let decreasing = c[0] > c[1] && c[1] > c[2];
    let late = snap.p_cut(3, 0);
    let reference = steady.p_cut(0, 0);
    let worst = late
        .iter()
        .zip(&reference)
        .map(|(x, y)| (x - y).abs() - 0.01 * y.abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let agrees = worst <= 1e-12;
    Ok((
        decreasing && agrees,
        format!(
            "{label}: contrast {:.4e} > {:.4e} > {:.4e} {}, t=100/κ vs steady {}",
            c[0],
            c[1],
            c[2],
            if decreasing { "ok" } else { "NOT decreasing" },
            if agrees { "within 1%" } else { "outside 1%" }
        ),
    ))
}

fn c8_two_stage() -> Outcome {
    let (a, da) = two_stage("n=4", -28.0935, 5e-3, [10.0, 40.0, 100.0], 16)?;
    let (b, db) = two_stage("n=8", -65.551, 0.73, [0.05, 0.2, 1.0], 20)?;
    Ok((a && b, format!("{da}; {db}")))
}

fn c9_verify() -> Outcome {
    let outcomes = run_all(VerifyOptions::default());
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks passed", outcomes.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 9] = [
        ("1 two-photon Rabi law", c1_two_photon_law, 1),
        ("2 splitting scaling exponents", c2_scaling_exponents, 5),
        ("3 perturbative prefactors", c3_prefactors, 5),
        ("4 eigenpair fidelities", c4_fidelities, 5),
        ("5 closed-evolution Rabi oscillation", c5_closed_rabi, 10),
        ("6 steady state vs dynamics", c6_steady_vs_dynamics, 60),
        ("7 PR peak positions", c7_pr_peaks, 300),
        ("8 two-stage PR mechanism", c8_two_stage, 600),
        ("9 property suite", c9_verify, 60),
    ];
    let mut all = true;
    for (name, run, budget_s) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget_s);
        let (passed, detail) = match outcome {
            Ok((passed, detail)) => (passed && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= passed;
        println!(
            "{} [{name}] {detail} ({:.2} s, budget {budget_s} s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
