//! Adaptive Dormand–Prince 5(4) integration for autonomous systems (the
//! time nodes are not needed).

use crate::error::{Error, Result};

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

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-15,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(y)` over `[0, t_end]` in place.
pub fn integrate<F>(f: F, y: &mut [f64], t_end: f64, tol: Tolerance) -> Result<Stats>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let dim = y.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut stats = Stats::default();
    let sign = t_end.signum();
    let span = t_end.abs();
    if span == 0.0 {
        return Ok(stats);
    }
    let mut t = 0.0;
    let mut h = (0.01 * span).min(0.1);
    f(y, &mut k[0])?;
    while t < span {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::invalid("ODE integration exceeded its step budget"));
        }
        if t + h > span {
            h = span - t;
        }
        let hs = h * sign;
        stage(&mut tmp, y, &k, &[(0, A21)], hs);
        f(&tmp, &mut k[1])?;
        stage(&mut tmp, y, &k, &[(0, A31), (1, A32)], hs);
        f(&tmp, &mut k[2])?;
        stage(&mut tmp, y, &k, &[(0, A41), (1, A42), (2, A43)], hs);
        f(&tmp, &mut k[3])?;
        stage(&mut tmp, y, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)], hs);
        f(&tmp, &mut k[4])?;
        stage(&mut tmp, y, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], hs);
        f(&tmp, &mut k[5])?;
        stage(&mut y5, y, &k, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)], hs);
        f(&y5, &mut k[6])?;

        let mut err = 0.0_f64;
        for i in 0..dim {
            let e = hs
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y5);
            k.swap(0, 6);
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * span.max(1.0) && t < span {
            return Err(Error::invalid("ODE step size underflow"));
        }
    }
    Ok(stats)
}

fn stage(out: &mut [f64], y: &[f64], k: &[Vec<f64>], coeffs: &[(usize, f64)], h: f64) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for &(j, a) in coeffs {
            s += a * k[j][i];
        }
        out[i] = y[i] + h * s;
    }
}
