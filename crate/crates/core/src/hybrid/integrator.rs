//! Dormand–Prince 5(4) with FSAL and the standard 4th-order dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Tolerances and limits shared by flow integration and the hybrid executor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Guard values within this distance of zero count as events.
    pub event_tol: f64,
    pub t_max: f64,
    pub j_max: usize,
    pub converge_radius: f64,
    /// Spacing of recorded samples; `0` records every accepted step.
    pub sample_stride: f64,
    pub escape_radius: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.05,
            event_tol: 1e-9,
            t_max: 30.0,
            j_max: 100,
            converge_radius: 1e-6,
            sample_stride: 0.01,
            escape_radius: 1e12,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
            ("t_max", self.t_max),
            ("converge_radius", self.converge_radius),
            ("escape_radius", self.escape_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.sample_stride >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample_stride must be >= 0, got {}",
                self.sample_stride
            )));
        }
        Ok(())
    }
}

/// Right-hand side `ẏ = f(t, y)` written into the output slice.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

/// Continuous extension of one accepted step over `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
    y1: Vec<f64>,
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// State at `t`. The right endpoint returns the step result exactly.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if t == self.t1() {
            return self.y1.clone();
        }
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        (0..self.y1.len())
            .map(|i| {
                let [r1, r2, r3, r4, r5] = &self.r;
                r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])))
            })
            .collect()
    }
}

/// Result of one trial step.
#[derive(Debug, Clone)]
pub struct TrialStep {
    pub y1: Vec<f64>,
    /// Derivative at the new point (reused as the next first stage).
    pub k7: Vec<f64>,
    /// Scaled RMS error estimate; the step is acceptable when `≤ 1`.
    pub err: f64,
    stages: Vec<Vec<f64>>,
}

fn error_norm(y0: &[f64], y1: &[f64], delta: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = y0.len() as f64;
    let sum: f64 = y0
        .iter()
        .zip(y1)
        .zip(delta)
        .map(|((a, b), d)| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (d / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// One Dormand–Prince step of size `h` from `(t, y)` with first stage `k1`.
pub fn trial_step<R: Rhs + ?Sized>(
    rhs: &mut R,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Result<TrialStep> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    let mut tmp = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (a, ks) in A[s].iter().zip(&k) {
                acc += a * ks[i];
            }
            tmp[i] = y[i] + h * acc;
        }
        let mut ks = vec![0.0; n];
        rhs.eval(t + C[s] * h, &tmp, &mut ks)?;
        k.push(ks);
    }
    // Stage 7 is evaluated at y1 (FSAL), so tmp now holds y1.
    let y1 = tmp;
    let delta: Vec<f64> = (0..n)
        .map(|i| h * E.iter().zip(&k).map(|(e, ks)| e * ks[i]).sum::<f64>())
        .collect();
    let err = error_norm(y, &y1, &delta, rtol, atol);
    let k7 = k[6].clone();
    Ok(TrialStep {
        y1,
        k7,
        err,
        stages: k,
    })
}

/// Fixed-step integration over `[t0, t1]` in `steps` equal steps.
pub fn integrate_fixed<R: Rhs + ?Sized>(
    rhs: &mut R,
    t0: f64,
    y0: &[f64],
    t1: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; y.len()];
    rhs.eval(t0, &y, &mut k1)?;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let step = trial_step(rhs, t, &y, &k1, h, 1.0, 1.0)?;
        y = step.y1;
        k1 = step.k7;
    }
    Ok(y)
}

/// An accepted adaptive step.
#[derive(Debug, Clone)]
pub struct AcceptedStep {
    pub t0: f64,
    pub t1: f64,
    pub y1: Vec<f64>,
    pub err: f64,
    pub dense: DenseSegment,
}

/// Adaptive step-size driver with FSAL reuse.
#[derive(Debug, Clone)]
pub struct Stepper {
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    rtol: f64,
    atol: f64,
    max_step: f64,
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_REJECTS: usize = 200;

impl Stepper {
    /// Start at `(t, y)`. `h_hint` seeds the step size; `None` uses the usual
    /// two-evaluation starting-step heuristic.
    pub fn new<R: Rhs + ?Sized>(
        rhs: &mut R,
        t: f64,
        y: Vec<f64>,
        h_hint: Option<f64>,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        let mut k1 = vec![0.0; y.len()];
        rhs.eval(t, &y, &mut k1)?;
        let mut s = Self {
            t,
            y,
            k1,
            h: 0.0,
            rtol: cfg.rel_tol,
            atol: cfg.abs_tol,
            max_step: cfg.max_step,
        };
        s.h = match h_hint {
            Some(h) if h > 0.0 => h.min(s.max_step),
            _ => s.initial_step(rhs)?,
        };
        Ok(s)
    }

    fn initial_step<R: Rhs + ?Sized>(&self, rhs: &mut R) -> Result<f64> {
        let scaled = |v: &[f64]| -> f64 {
            let n = v.len() as f64;
            (v.iter()
                .zip(&self.y)
                .map(|(a, y)| (a / (self.atol + self.rtol * y.abs())).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let d0 = scaled(&self.y);
        let d1 = scaled(&self.k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.max_step);
        let y1: Vec<f64> = self.y.iter().zip(&self.k1).map(|(y, k)| y + h0 * k).collect();
        let mut f1 = vec![0.0; y1.len()];
        rhs.eval(self.t + h0, &y1, &mut f1)?;
        let diff: Vec<f64> = f1.iter().zip(&self.k1).map(|(a, b)| a - b).collect();
        let d2 = scaled(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        Ok((100.0 * h0).min(h1).min(self.max_step))
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Suggested size of the next step.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Take one accepted step, never past `t_limit`.
    pub fn advance<R: Rhs + ?Sized>(&mut self, rhs: &mut R, t_limit: f64) -> Result<AcceptedStep> {
        let mut h = self.h.min(self.max_step);
        let mut rejects = 0;
        loop {
            let mut clipped = false;
            if self.t + h >= t_limit {
                h = t_limit - self.t;
                clipped = true;
            }
            if !(h > 1e-14 * self.t.abs().max(1.0)) {
                return Err(Error::Integration(format!(
                    "step size underflow at t = {} (h = {h:e})",
                    self.t
                )));
            }
            let step = match trial_step(rhs, self.t, &self.y, &self.k1, h, self.rtol, self.atol) {
                Ok(s) if s.err.is_finite() && s.y1.iter().all(|v| v.is_finite()) => s,
                Ok(_) | Err(Error::Expr(_)) if rejects < MAX_REJECTS => {
                    // Non-finite stage values: retreat as for a large error.
                    rejects += 1;
                    h *= FAC_MIN;
                    continue;
                }
                Ok(_) => {
                    return Err(Error::Integration(format!(
                        "non-finite state after repeated step reductions at t = {}",
                        self.t
                    )))
                }
                Err(e) => return Err(e),
            };
            let fac = if step.err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * step.err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if step.err <= 1.0 {
                let t0 = self.t;
                let t1 = if clipped { t_limit } else { t0 + h };
                let dense = self.dense(&step, h);
                self.t = t1;
                self.y = step.y1.clone();
                self.k1 = step.k7;
                self.h = (h * fac).min(self.max_step);
                if clipped {
                    // Keep the unclipped proposal for the next phase.
                    self.h = self.h.max(h);
                }
                return Ok(AcceptedStep {
                    t0,
                    t1,
                    y1: step.y1,
                    err: step.err,
                    dense,
                });
            }
            rejects += 1;
            if rejects > MAX_REJECTS {
                return Err(Error::Integration(format!(
                    "too many rejected steps at t = {}",
                    self.t
                )));
            }
            h *= fac.min(1.0);
        }
    }

    fn dense(&self, step: &TrialStep, h: f64) -> DenseSegment {
        let n = self.y.len();
        let y0 = &self.y;
        let y1 = &step.y1;
        let k = &step.stages;
        let r1 = y0.clone();
        let r2: Vec<f64> = (0..n).map(|i| y1[i] - y0[i]).collect();
        let r3: Vec<f64> = (0..n).map(|i| h * k[0][i] - r2[i]).collect();
        let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * step.k7[i] - r3[i]).collect();
        let r5: Vec<f64> = (0..n)
            .map(|i| h * D.iter().zip(k).map(|(d, ks)| d * ks[i]).sum::<f64>())
            .collect();
        DenseSegment {
            t0: self.t,
            h,
            r: [r1, r2, r3, r4, r5],
            y1: y1.clone(),
        }
    }
}

/// One accepted adaptive step from `(t, x)`: returns the new state, time and
/// the scaled local error estimate.
pub fn flow_step<R: Rhs + ?Sized>(
    rhs: &mut R,
    x: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, f64, f64)> {
    let mut s = Stepper::new(rhs, t, x.to_vec(), None, cfg)?;
    let step = s.advance(rhs, f64::INFINITY)?;
    Ok((step.y1, step.t1, step.err))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = -y[0];
        Ok(())
    }

    fn run_to(rhs: &mut impl Rhs, y0: Vec<f64>, t1: f64, cfg: &IntegratorConfig) -> Vec<f64> {
        let mut s = Stepper::new(rhs, 0.0, y0, None, cfg).unwrap();
        while s.t() < t1 {
            s.advance(rhs, t1).unwrap();
        }
        s.y().to_vec()
    }

    #[test]
    fn tableau_is_consistent() {
        for (s, row) in A.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            assert!((sum - C[s]).abs() < 1e-15, "row {s}");
        }
        assert!(E.iter().sum::<f64>().abs() < 1e-16);
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig::default();
        let y = run_to(&mut decay, vec![1.0], 1.0, &cfg);
        assert!((y[0] - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_field_is_exact() {
        let cfg = IntegratorConfig::default();
        let mut zero = |_t: f64, _y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy.iter_mut().for_each(|v| *v = 0.0);
            Ok(())
        };
        let (x, t, _) = flow_step(&mut zero, &[0.3, -7.25], 0.0, &cfg).unwrap();
        assert_eq!(x, vec![0.3, -7.25]);
        assert!(t > 0.0);
    }

    #[test]
    fn fixed_step_order_is_five() {
        let exact = (-1f64).exp();
        let errs: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&n| (integrate_fixed(&mut decay, 0.0, &[1.0], 1.0, n).unwrap()[0] - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((4.5..=5.5).contains(&order), "order {order}");
        }
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let cfg = IntegratorConfig {
            max_step: 0.5,
            ..Default::default()
        };
        let mut s = Stepper::new(&mut decay, 0.0, vec![1.0], None, &cfg).unwrap();
        let step = s.advance(&mut decay, 10.0).unwrap();
        for i in 0..=10 {
            let t = step.t0 + (step.t1 - step.t0) * i as f64 / 10.0;
            let y = step.dense.eval(t)[0];
            assert!((y - (-t).exp()).abs() < 1e-7, "t = {t}");
        }
        assert_eq!(step.dense.eval(step.t1), step.y1);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let cfg = IntegratorConfig::default();
        let mut osc = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let t1 = 2.0 * std::f64::consts::PI;
        let y = run_to(&mut osc, vec![1.0, 0.0], t1, &cfg);
        assert!((y[0] - 1.0).abs() < 1e-7 && y[1].abs() < 1e-7);
    }

    #[test]
    fn reports_underflow_for_blowup() {
        // ẏ = y², y(0) = 1 escapes at t = 1.
        let cfg = IntegratorConfig::default();
        let mut blow = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        let mut s = Stepper::new(&mut blow, 0.0, vec![1.0], None, &cfg).unwrap();
        let mut failed = false;
        for _ in 0..100_000 {
            match s.advance(&mut blow, 2.0) {
                Ok(_) => {}
                Err(Error::Integration(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(failed);
        assert!(s.t() < 1.0 + 1e-6);
    }
}
