//! Dormand–Prince 5(4) with step-size control and the 4th-order continuous
//! extension for output at arbitrary times.

use crate::error::{KpoError, Result};
use crate::C64;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

// Nodes c_i are not needed: the generator is time independent.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrates the autonomous system y' = f(y) from t = 0 and returns y at
/// each requested time (ascending, nonnegative).
pub(crate) fn integrate<F>(
    mut rhs: F,
    y0: &[C64],
    t_out: &[f64],
    tol: Tolerances,
) -> Result<(Vec<Vec<C64>>, Stats)>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = y0.len();
    let zero = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut cont = vec![zero; 5 * n];

    let mut out = Vec::with_capacity(t_out.len());
    let mut next = 0;
    while next < t_out.len() && t_out[next] <= 0.0 {
        out.push(y.clone());
        next += 1;
    }
    let mut stats = Stats::default();
    let Some(&t_end) = t_out.last() else {
        return Ok((out, stats));
    };
    if next == t_out.len() {
        return Ok((out, stats));
    }

    rhs(&y, &mut k1);
    let mut t = 0.0;
    let mut h = initial_step(&y, &k1, tol, t_end);
    let mut last_rejected = false;

    while next < t_out.len() {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(KpoError::TooManySteps {
                max_steps: tol.max_steps,
                time: t,
            });
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Err(KpoError::StepSizeFailure { time: t });
        }
        h = h.min(t_end - t);

        combine(&mut stage, &y, h, &[(A21, &k1)]);
        rhs(&stage, &mut k2);
        combine(&mut stage, &y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(&stage, &mut k3);
        combine(&mut stage, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(&stage, &mut k4);
        combine(&mut stage, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(&stage, &mut k5);
        combine(
            &mut stage,
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        rhs(&stage, &mut k6);
        combine(
            &mut y_new,
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        rhs(&y_new, &mut k7);

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
            err_sq += (e.norm() / sc).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            if next < t_out.len() && t_out[next] <= t_new {
                for i in 0..n {
                    let diff = y_new[i] - y[i];
                    let bspl = h * k1[i] - diff;
                    cont[i] = y[i];
                    cont[n + i] = diff;
                    cont[2 * n + i] = bspl;
                    cont[3 * n + i] = diff - h * k7[i] - bspl;
                    cont[4 * n + i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                while next < t_out.len() && t_out[next] <= t_new {
                    if t_out[next] == t_new {
                        out.push(y_new.clone());
                    } else {
                        let theta = (t_out[next] - t) / h;
                        let theta1 = 1.0 - theta;
                        out.push(
                            (0..n)
                                .map(|i| {
                                    cont[i]
                                        + theta
                                            * (cont[n + i]
                                                + theta1
                                                    * (cont[2 * n + i]
                                                        + theta
                                                            * (cont[3 * n + i]
                                                                + theta1 * cont[4 * n + i])))
                                })
                                .collect(),
                        );
                    }
                    next += 1;
                }
            }
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            let mut fac = (SAFETY * err.max(1e-10).powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            last_rejected = true;
        }
    }
    Ok((out, stats))
}

fn combine(dst: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &Vec<C64>)]) {
    dst.copy_from_slice(y);
    for &(coef, k) in terms {
        let s = h * coef;
        for (d, &ki) in dst.iter_mut().zip(k.iter()) {
            *d += s * ki;
        }
    }
}

fn initial_step(y: &[C64], f0: &[C64], tol: Tolerances, t_end: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sc = tol.atol + tol.rtol * yi.norm();
        d0 += (yi.norm() / sc).powi(2);
        d1 += (fi.norm() / sc).powi(2);
    }
    let n = y.len().max(1) as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(t_end)
}
