//! Dormand–Prince 5(4) with adaptive steps.

use super::HopfError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-12, atol: 1e-14, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub end: Vec<f64>,
    /// Sum of the accepted local error estimates (max norm).
    pub err_est: f64,
    pub steps: usize,
}

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], tol: &Tolerances) -> Result<Trajectory, HopfError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), HopfError>,
{
    let dim = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    f(t, &y, &mut k[0])?;
    let mut h = dir * (span * 1e-3).max(1e-6).min(span);
    let mut err_est = 0.0;
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= tol.max_steps {
            return Err(HopfError::TooManySteps(tol.max_steps));
        }
        let last = (t + h - t1) * dir >= 0.0;
        if last {
            h = t1 - t;
        }
        for s in 0..6 {
            for i in 0..dim {
                let mut acc = y[i];
                for (j, a) in A[s].iter().enumerate() {
                    acc += h * a * k[j][i];
                }
                tmp[i] = acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s + 1])?;
        }
        // last stage was evaluated at the fifth-order solution
        ynew.copy_from_slice(&tmp);
        let mut err = 0.0f64;
        let mut err_abs = 0.0f64;
        for i in 0..dim {
            let e: f64 = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
            err_abs = err_abs.max(e.abs());
        }
        let err = (err / dim.max(1) as f64).sqrt();
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            err_est += err_abs;
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * span.max(1.0) && (t1 - t) * dir > 1e-14 {
            return Err(HopfError::StepUnderflow(t));
        }
    }
    Ok(Trajectory { end: y, err_est, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_rotation() {
        let tol = Tolerances::default();
        let r = integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            2.0,
            &[1.0],
            &tol,
        )
        .unwrap();
        assert!((r.end[0] - (-2.0f64).exp()).abs() < 1e-12);

        let r = integrate(
            |_, y, dy| {
                dy[0] = -y[1];
                dy[1] = y[0];
                Ok(())
            },
            0.0,
            2.0 * std::f64::consts::PI,
            &[1.0, 0.0],
            &tol,
        )
        .unwrap();
        assert!((r.end[0] - 1.0).abs() < 1e-11 && r.end[1].abs() < 1e-11);
    }

    #[test]
    fn backward_matches_forward() {
        let tol = Tolerances::default();
        let f = |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0] * y[0] * t.cos();
            Ok(())
        };
        let fwd = integrate(f, 0.0, 3.0, &[0.3], &tol).unwrap();
        let back = integrate(f, 3.0, 0.0, &fwd.end, &tol).unwrap();
        assert!((back.end[0] - 0.3).abs() < 1e-12);
        // closed form y = 1/(1/y0 − sin t)
        assert!((fwd.end[0] - 1.0 / (1.0 / 0.3 - 3.0f64.sin())).abs() < 1e-12);
    }
}
