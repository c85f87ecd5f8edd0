//! Explicit Runge-Kutta integration shared by every flow in the crate.
//!
//! Two methods are available: the classical fixed-step RK4 and the embedded
//! Dormand-Prince 5(4) pair with step-size control. Samples are produced at
//! every multiple of `output_step` measured from the start of the span, plus
//! the end point. RK4 lands exactly on each output point (the step is shrunk
//! to divide each output interval evenly); the adaptive method fills output
//! points by cubic Hermite interpolation between accepted steps.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Rk4 {
        step: f64,
    },
    Rk45 {
        rtol: f64,
        atol: f64,
        min_step: f64,
        max_step: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    pub output_step: f64,
}

impl IntegratorConfig {
    pub fn rk4(step: f64, output_step: f64) -> Self {
        Self {
            method: Method::Rk4 { step },
            output_step,
        }
    }

    pub fn rk45(rtol: f64, atol: f64, min_step: f64, max_step: f64, output_step: f64) -> Self {
        Self {
            method: Method::Rk45 {
                rtol,
                atol,
                min_step,
                max_step,
            },
            output_step,
        }
    }

    /// Smallest step the method may take.
    pub fn min_step(&self) -> f64 {
        match self.method {
            Method::Rk4 { step } => step,
            Method::Rk45 { min_step, .. } => min_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
            }
        };
        match self.method {
            Method::Rk4 { step } => positive("step", step)?,
            Method::Rk45 {
                rtol,
                atol,
                min_step,
                max_step,
            } => {
                positive("rtol", rtol)?;
                positive("atol", atol)?;
                positive("min_step", min_step)?;
                positive("max_step", max_step)?;
                if min_step > max_step {
                    return Err(Error::Config(format!(
                        "min_step {min_step} exceeds max_step {max_step}"
                    )));
                }
            }
        }
        positive("output_step", self.output_step)?;
        if self.output_step < self.min_step() {
            return Err(Error::Config(format!(
                "output_step {} is below the minimum step {}",
                self.output_step,
                self.min_step()
            )));
        }
        Ok(())
    }

    /// Short stable digest of the configuration, stored in trajectory metadata.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Sample times from `start` toward `end`: `start + k·step` for every k that
/// stays strictly inside the span, then `end` itself.
pub(crate) fn output_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let mut grid = vec![start];
    let len = (end - start).abs();
    if len == 0.0 {
        return grid;
    }
    let dir = (end - start).signum();
    let n = (len / step).floor() as usize;
    for k in 1..=n {
        let t = start + dir * k as f64 * step;
        if (end - t) * dir > 1e-9 * step {
            grid.push(t);
        }
    }
    grid.push(end);
    grid
}

fn non_finite(y: &[f64]) -> bool {
    y.iter().any(|x| !x.is_finite())
}

/// Reports a domain error found in an integrated sample as an integration
/// failure at that sample.
pub(crate) fn left_domain(err: Error, t: f64, y: &[f64]) -> Error {
    match err {
        Error::Domain(message) => fail(format!("flow left the domain: {message}"), t, y),
        e => e,
    }
}

fn fail(message: impl Into<String>, t: f64, y: &[f64]) -> Error {
    Error::Integration {
        message: message.into(),
        last: Some((t, y.to_vec())),
    }
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c != 0.0 {
            for (o, ki) in out.iter_mut().zip(k.iter()) {
                *o += h * c * ki;
            }
        }
    }
    out
}

/// Integrates `dy/dt = rhs(t, y)` over `span` and returns samples on the
/// output grid. A span of zero length yields the single sample `(start, y0)`.
/// The span may run backward (`end < start`).
pub fn integrate<F>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let (start, end) = span;
    if !start.is_finite() || !end.is_finite() {
        return Err(Error::Config(format!("span ({start}, {end}) is not finite")));
    }
    if non_finite(y0) {
        return Err(fail("initial state is not finite", start, y0));
    }
    let grid = output_grid(start, end, cfg.output_step);
    match cfg.method {
        Method::Rk4 { step } => rk4_on_grid(&mut rhs, y0, &grid, step),
        Method::Rk45 {
            rtol,
            atol,
            min_step,
            max_step,
        } => dopri5_on_grid(&mut rhs, y0, &grid, rtol, atol, min_step, max_step),
    }
}

fn eval<F>(rhs: &mut F, t: f64, y: &[f64], last_t: f64, last_y: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    match rhs(t, y) {
        Ok(k) if non_finite(&k) => Err(fail(
            format!("right-hand side is not finite at t = {t}"),
            last_t,
            last_y,
        )),
        Ok(k) => Ok(k),
        Err(Error::Integration { message, .. }) | Err(Error::Domain(message)) => {
            Err(fail(message, last_t, last_y))
        }
        Err(e) => Err(e),
    }
}

fn rk4_on_grid<F>(rhs: &mut F, y0: &[f64], grid: &[f64], step: f64) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut out = Vec::with_capacity(grid.len());
    let mut y = y0.to_vec();
    out.push((grid[0], y.clone()));
    for w in grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let n = ((tb - ta).abs() / step - 1e-9).ceil().max(1.0) as usize;
        let h = (tb - ta) / n as f64;
        for i in 0..n {
            let t = ta + i as f64 * h;
            let k1 = eval(rhs, t, &y, t, &y)?;
            let k2 = eval(rhs, t + 0.5 * h, &axpy(&y, 0.5 * h, &[(1.0, &k1)]), t, &y)?;
            let k3 = eval(rhs, t + 0.5 * h, &axpy(&y, 0.5 * h, &[(1.0, &k2)]), t, &y)?;
            let k4 = eval(rhs, t + h, &axpy(&y, h, &[(1.0, &k3)]), t, &y)?;
            let next = axpy(
                &y,
                h / 6.0,
                &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
            );
            if non_finite(&next) {
                return Err(fail("state became non-finite", t, &y));
            }
            y = next;
        }
        out.push((tb, y.clone()));
    }
    Ok(out)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn hermite(y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], h: f64, theta: f64) -> Vec<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

fn dopri5_on_grid<F>(
    rhs: &mut F,
    y0: &[f64],
    grid: &[f64],
    rtol: f64,
    atol: f64,
    min_step: f64,
    max_step: f64,
) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let start = grid[0];
    let end = *grid.last().unwrap();
    let mut out = Vec::with_capacity(grid.len());
    out.push((start, y0.to_vec()));
    if grid.len() == 1 {
        return Ok(out);
    }
    let dir = (end - start).signum();
    let mut next_out = 1;

    let mut t = start;
    let mut y = y0.to_vec();
    let mut f = eval(rhs, t, &y, t, &y)?;
    let mut h = (0.01 * (end - start).abs()).clamp(min_step, max_step);

    while (end - t) * dir > 0.0 {
        let remaining = (end - t).abs();
        let last_step = h >= remaining;
        let hs = if last_step { remaining } else { h } * dir;

        let k1 = f.clone();
        let k2 = eval(rhs, t + C[1] * hs, &axpy(&y, hs, &[(A2[0], &k1)]), t, &y)?;
        let k3 = eval(
            rhs,
            t + C[2] * hs,
            &axpy(&y, hs, &[(A3[0], &k1), (A3[1], &k2)]),
            t,
            &y,
        )?;
        let k4 = eval(
            rhs,
            t + C[3] * hs,
            &axpy(&y, hs, &[(A4[0], &k1), (A4[1], &k2), (A4[2], &k3)]),
            t,
            &y,
        )?;
        let k5 = eval(
            rhs,
            t + C[4] * hs,
            &axpy(
                &y,
                hs,
                &[(A5[0], &k1), (A5[1], &k2), (A5[2], &k3), (A5[3], &k4)],
            ),
            t,
            &y,
        )?;
        let k6 = eval(
            rhs,
            t + C[5] * hs,
            &axpy(
                &y,
                hs,
                &[
                    (A6[0], &k1),
                    (A6[1], &k2),
                    (A6[2], &k3),
                    (A6[3], &k4),
                    (A6[4], &k5),
                ],
            ),
            t,
            &y,
        )?;
        let y_new = axpy(
            &y,
            hs,
            &[
                (B[0], &k1),
                (B[2], &k3),
                (B[3], &k4),
                (B[4], &k5),
                (B[5], &k6),
            ],
        );
        let t_new = if last_step { end } else { t + hs };
        let k7 = eval(rhs, t_new, &y_new, t, &y)?;

        let mut err_sq = 0.0;
        for i in 0..y.len() {
            let e = hs
                * (ERR[0] * k1[i]
                    + ERR[2] * k3[i]
                    + ERR[3] * k4[i]
                    + ERR[4] * k5[i]
                    + ERR[5] * k6[i]
                    + ERR[6] * k7[i]);
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / y.len().max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(fail("error estimate is not finite", t, &y));
        }

        if err <= 1.0 {
            while next_out < grid.len() && (grid[next_out] - t_new) * dir <= 0.0 {
                let to = grid[next_out];
                let sample = if to == t_new {
                    y_new.clone()
                } else {
                    hermite(&y, &f, &y_new, &k7, hs, (to - t) / hs)
                };
                out.push((to, sample));
                next_out += 1;
            }
            t = t_new;
            y = y_new;
            f = k7;
        }

        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h.min(remaining) * factor).min(max_step);
        if h < min_step && (end - t).abs() > min_step {
            return Err(fail(
                format!("step size {h:e} fell below min_step {min_step:e}"),
                t,
                &y,
            ));
        }
        h = h.max(min_step);
    }
    // Any grid point equal to `end` that rounding skipped.
    while next_out < grid.len() {
        out.push((grid[next_out], y.clone()));
        next_out += 1;
    }
    Ok(out)
}
