use std::sync::Arc;

use rayon::prelude::*;

use super::arc::{HybridArc, JumpRecord, Phase, Sample, Termination};
use super::event::first_crossing;
use super::integrator::{IntegratorConfig, Stepper};
use crate::error::{Error, Result};
use crate::feedback::Feedback;
use crate::hysteresis::{HysteresisController, Mode};
use crate::plant::PlantModel;
use crate::sampling::norm;

/// Dense-output points checked for a guard crossing in every accepted step.
const EVENT_SCAN: usize = 8;

/// What the executor needs from a hybrid feedback law.
pub trait HybridController: Send + Sync {
    /// `≥ 0` exactly on the jump set `D_q`.
    fn guard(&self, q: Mode, x: &[f64]) -> Result<f64>;
    /// Mode after a jump from `q`.
    fn next_mode(&self, q: Mode) -> Mode;
    /// Mode-`q` feedback, evaluated without checking the flow set.
    fn control(&self, q: Mode, x: &[f64]) -> Result<f64>;
}

impl HybridController for HysteresisController {
    fn guard(&self, q: Mode, x: &[f64]) -> Result<f64> {
        HysteresisController::guard(self, q, x)
    }

    fn next_mode(&self, q: Mode) -> Mode {
        q.toggled()
    }

    fn control(&self, q: Mode, x: &[f64]) -> Result<f64> {
        self.feedback_unchecked(q, x)
    }
}

/// A single static feedback seen as a hybrid law that never jumps.
#[derive(Clone)]
pub struct ConstantMode {
    feedback: Arc<dyn Feedback>,
}

impl ConstantMode {
    pub fn new(feedback: Arc<dyn Feedback>) -> Self {
        Self { feedback }
    }
}

impl HybridController for ConstantMode {
    fn guard(&self, _q: Mode, _x: &[f64]) -> Result<f64> {
        Ok(f64::NEG_INFINITY)
    }

    fn next_mode(&self, q: Mode) -> Mode {
        q
    }

    fn control(&self, _q: Mode, x: &[f64]) -> Result<f64> {
        self.feedback.control(x)
    }
}

struct Recorder<'a> {
    ctrl: &'a dyn HybridController,
    cfg: &'a IntegratorConfig,
    phases: Vec<Phase>,
    jumps: Vec<JumpRecord>,
    next_k: u64,
}

impl Recorder<'_> {
    fn sample(&self, q: Mode, t: f64, x: Vec<f64>) -> Sample {
        let inside = self
            .ctrl
            .guard(q, &x)
            .is_ok_and(|g| g <= self.cfg.event_tol);
        let u = if inside {
            self.ctrl.control(q, &x).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        Sample { t, x, u }
    }

    fn open(&mut self, q: Mode, t: f64, x: &[f64]) {
        let s = self.sample(q, t, x.to_vec());
        self.phases.push(Phase {
            j: self.phases.len(),
            q,
            t_start: t,
            t_end: t,
            samples: vec![s],
        });
        self.next_k = self.stride_index_after(t);
    }

    fn stride_index_after(&self, t: f64) -> u64 {
        let stride = self.cfg.sample_stride;
        if stride <= 0.0 {
            return 0;
        }
        let mut k = (t / stride).floor() as u64;
        while k as f64 * stride <= t {
            k += 1;
        }
        k
    }

    fn push(&mut self, t: f64, x: Vec<f64>) {
        let phase = self.phases.last().expect("open phase");
        let q = phase.q;
        if phase.samples.last().is_some_and(|s| s.t >= t) {
            return;
        }
        let s = self.sample(q, t, x);
        let phase = self.phases.last_mut().expect("open phase");
        phase.samples.push(s);
        phase.t_end = t;
    }

    /// Stride samples in `(last, upto]` taken from `eval`.
    fn push_strided(&mut self, upto: f64, eval: impl Fn(f64) -> Vec<f64>) {
        let stride = self.cfg.sample_stride;
        if stride <= 0.0 {
            return;
        }
        loop {
            let ts = self.next_k as f64 * stride;
            if ts > upto {
                break;
            }
            self.push(ts, eval(ts));
            self.next_k += 1;
        }
    }

    fn close(&mut self, t: f64, x: &[f64]) {
        self.push(t, x.to_vec());
        self.phases.last_mut().expect("open phase").t_end = t;
    }
}

/// Simulate `ẋ = f(x, φ_q(x))` on `C_q` with jumps `q → next_mode(q)` as soon
/// as the state is in `D_q` (within `event_tol`).
///
/// Fails only on invalid inputs; runtime problems end the arc with
/// [`Termination::Error`] at the last valid state.
pub fn simulate(
    plant: &PlantModel,
    ctrl: &dyn HybridController,
    x0: &[f64],
    q0: Mode,
    cfg: &IntegratorConfig,
) -> Result<HybridArc> {
    cfg.validate()?;
    if x0.len() != plant.dim() {
        return Err(Error::InvalidParameter(format!(
            "initial state has {} components, plant has n = {}",
            x0.len(),
            plant.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("initial state {x0:?} is not finite")));
    }
    let mut rec = Recorder {
        ctrl,
        cfg,
        phases: Vec::new(),
        jumps: Vec::new(),
        next_k: 0,
    };
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut q = q0;
    let mut h_hint = None;
    let mut steps = 0usize;
    let mut located = false;
    rec.open(q, t, &x);

    let termination = 'outer: loop {
        let g = match ctrl.guard(q, &x) {
            Ok(g) => g,
            Err(e) => break Termination::Error(e.to_string()),
        };
        if g >= -cfg.event_tol {
            if rec.jumps.len() >= cfg.j_max {
                break Termination::JMax;
            }
            let q_to = ctrl.next_mode(q);
            rec.close(t, &x);
            rec.jumps.push(JumpRecord {
                t,
                j: rec.jumps.len(),
                q_from: q,
                q_to,
                x: x.clone(),
                guard: g,
                located,
            });
            q = q_to;
            rec.open(q, t, &x);
            located = false;
            continue;
        }
        located = false;
        let r = norm(&x);
        if r <= cfg.converge_radius {
            break Termination::Converged;
        }
        if !(r < cfg.escape_radius) {
            break Termination::Escape;
        }
        if t >= cfg.t_max {
            break Termination::TMax;
        }

        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let u = ctrl.control(q, y)?;
            plant.eval_dynamics_into(y, u, dy)
        };
        let mut stepper = match Stepper::new(&mut rhs, t, x.clone(), h_hint, cfg) {
            Ok(s) => s,
            Err(e) => break Termination::Error(e.to_string()),
        };
        let guard = |y: &[f64]| ctrl.guard(q, y);
        // Flow until an event, convergence, escape or t_max.
        loop {
            if steps >= cfg.max_steps {
                rec.close(t, &x);
                break 'outer Termination::Error(format!("step limit {} reached", cfg.max_steps));
            }
            steps += 1;
            let step = match stepper.advance(&mut rhs, cfg.t_max) {
                Ok(s) => s,
                Err(e) => {
                    rec.close(t, &x);
                    break 'outer Termination::Error(e.to_string());
                }
            };
            h_hint = Some(stepper.h());
            let event = match first_crossing(&guard, &step.dense, EVENT_SCAN, cfg.event_tol) {
                Ok(ev) => ev,
                Err(e) => {
                    rec.close(t, &x);
                    break 'outer Termination::Error(e.to_string());
                }
            };
            if let Some(ev) = event {
                rec.push_strided(ev.t, |s| step.dense.eval(s));
                t = ev.t;
                x = ev.x;
                rec.close(t, &x);
                located = true;
                continue 'outer;
            }
            rec.push_strided(step.t1, |s| step.dense.eval(s));
            t = step.t1;
            x = step.y1;
            if cfg.sample_stride <= 0.0 {
                rec.push(t, x.clone());
            }
            let r = norm(&x);
            if r <= cfg.converge_radius || !(r < cfg.escape_radius) || t >= cfg.t_max {
                rec.close(t, &x);
                continue 'outer;
            }
        }
    };
    rec.close(t, &x);
    Ok(HybridArc {
        phases: rec.phases,
        jumps: rec.jumps,
        termination,
    })
}

/// Independent simulations for many initial conditions, in parallel. The
/// output order matches the input order.
pub fn simulate_batch(
    plant: &PlantModel,
    ctrl: &dyn HybridController,
    initial: &[(Vec<f64>, Mode)],
    cfg: &IntegratorConfig,
) -> Vec<Result<HybridArc>> {
    initial
        .par_iter()
        .map(|(x0, q0)| simulate(plant, ctrl, x0, *q0, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::ExprFeedback;
    use crate::plant::PlantDefinition;
    use std::collections::BTreeMap;

    fn double_integrator() -> PlantModel {
        PlantModel::new(PlantDefinition {
            n: 2,
            params: BTreeMap::new(),
            f1: vec!["x2".into()],
            f2: "1".into(),
            h1: vec!["0".into()],
            h2: "0".into(),
        })
        .unwrap()
    }

    fn pd() -> ConstantMode {
        ConstantMode::new(Arc::new(
            ExprFeedback::parse("-x1 - 2*x2", 2, &BTreeMap::new()).unwrap(),
        ))
    }

    #[test]
    fn matches_double_pole_solution() {
        // ẍ + 2ẋ + x = 0, x(0) = 1, ẋ(0) = 0: x(t) = (1 + t)e^{-t}.
        let cfg = IntegratorConfig {
            t_max: 1.0,
            ..Default::default()
        };
        let arc = simulate(&double_integrator(), &pd(), &[1.0, 0.0], Mode::Local, &cfg).unwrap();
        assert_eq!(arc.termination, Termination::TMax);
        arc.validate().unwrap();
        let x = arc.final_state().unwrap();
        let e = (-1f64).exp();
        assert!((x[0] - 2.0 * e).abs() < 1e-6);
        assert!((x[1] + e).abs() < 1e-6);
        assert_eq!(arc.t_final(), 1.0);
    }

    #[test]
    fn origin_converges_immediately() {
        let cfg = IntegratorConfig::default();
        let arc = simulate(&double_integrator(), &pd(), &[0.0, 0.0], Mode::Local, &cfg).unwrap();
        assert_eq!(arc.termination, Termination::Converged);
        assert!(arc.jumps.is_empty());
        assert_eq!(arc.phases.len(), 1);
        assert_eq!(arc.t_final(), 0.0);
    }

    #[test]
    fn strided_samples() {
        let cfg = IntegratorConfig {
            t_max: 0.5,
            sample_stride: 0.1,
            ..Default::default()
        };
        let arc = simulate(&double_integrator(), &pd(), &[1.0, 0.0], Mode::Local, &cfg).unwrap();
        let ts: Vec<f64> = arc.phases[0].samples.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 6);
        for (i, t) in ts.iter().enumerate() {
            assert!((t - 0.1 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_loop_escapes() {
        let cfg = IntegratorConfig::default();
        let blow = ConstantMode::new(Arc::new(
            ExprFeedback::parse("x2^2", 2, &BTreeMap::new()).unwrap(),
        ));
        let arc = simulate(&double_integrator(), &blow, &[1.0, 1.0], Mode::Local, &cfg).unwrap();
        assert!(matches!(arc.termination, Termination::Escape | Termination::Error(_)));
        arc.validate().unwrap();
    }

    #[test]
    fn rejects_bad_initial_state() {
        let cfg = IntegratorConfig::default();
        let p = double_integrator();
        assert!(simulate(&p, &pd(), &[1.0], Mode::Local, &cfg).is_err());
        assert!(simulate(&p, &pd(), &[f64::NAN, 0.0], Mode::Local, &cfg).is_err());
    }

    #[test]
    fn batch_preserves_order() {
        let cfg = IntegratorConfig {
            t_max: 0.3,
            ..Default::default()
        };
        let p = double_integrator();
        let ics: Vec<(Vec<f64>, Mode)> = (0..6).map(|i| (vec![i as f64, 0.0], Mode::Local)).collect();
        let arcs = simulate_batch(&p, &pd(), &ics, &cfg);
        for (ic, arc) in ics.iter().zip(arcs) {
            let arc = arc.unwrap();
            assert_eq!(arc.phases[0].samples[0].x, ic.0);
        }
    }
}
