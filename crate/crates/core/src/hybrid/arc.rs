//! Recorded hybrid solutions and their structural validator.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::hysteresis::Mode;

/// A point `(t, j)` of a hybrid time domain, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridTime {
    pub t: f64,
    pub j: usize,
}

impl PartialOrd for HybridTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.t.partial_cmp(&other.t)? {
            Ordering::Equal => Some(self.j.cmp(&other.j)),
            o => Some(o),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    /// Applied input; NaN where the state lies outside the flow set.
    pub u: f64,
}

/// Continuous evolution at fixed `(j, q)` over `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub j: usize,
    pub q: Mode,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    /// Jump counter before the jump.
    pub j: usize,
    pub q_from: Mode,
    pub q_to: Mode,
    pub x: Vec<f64>,
    /// Guard value of `q_from` at the jump state.
    pub guard: f64,
    /// Whether the jump ended a flow at a located guard crossing (as opposed
    /// to firing at the start of a phase).
    pub located: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    TMax,
    JMax,
    Escape,
    Error(String),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::TMax => "t_max",
            Termination::JMax => "j_max",
            Termination::Escape => "escape",
            Termination::Error(_) => "error",
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, Termination::Converged | Termination::TMax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridArc {
    pub phases: Vec<Phase>,
    pub jumps: Vec<JumpRecord>,
    pub termination: Termination,
}

impl HybridArc {
    pub fn t_final(&self) -> f64 {
        self.phases.last().map_or(0.0, |p| p.t_end)
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.phases
            .last()
            .and_then(|p| p.samples.last())
            .map(|s| s.x.as_slice())
    }

    pub fn final_mode(&self) -> Option<Mode> {
        self.phases.last().map(|p| p.q)
    }

    /// Every recorded sample with its hybrid time and mode, in order.
    pub fn iter_samples(&self) -> impl Iterator<Item = (HybridTime, Mode, &Sample)> {
        self.phases.iter().flat_map(|p| {
            p.samples
                .iter()
                .map(move |s| (HybridTime { t: s.t, j: p.j }, p.q, s))
        })
    }

    /// Checks the structural properties every solution record must have.
    pub fn validate(&self) -> Result<(), String> {
        if self.phases.is_empty() {
            return Err("arc has no phases".into());
        }
        if self.jumps.len() + 1 != self.phases.len() {
            return Err(format!(
                "{} jumps for {} phases",
                self.jumps.len(),
                self.phases.len()
            ));
        }
        for (k, p) in self.phases.iter().enumerate() {
            if p.j != k {
                return Err(format!("phase {k} has j = {}", p.j));
            }
            if !(p.t_end >= p.t_start) {
                return Err(format!("phase {k} ends before it starts"));
            }
            let Some(first) = p.samples.first() else {
                return Err(format!("phase {k} has no samples"));
            };
            if first.t != p.t_start {
                return Err(format!("phase {k} first sample is not at t_start"));
            }
            for w in p.samples.windows(2) {
                if !(w[1].t > w[0].t) {
                    return Err(format!("phase {k}: t not strictly increasing at t = {}", w[1].t));
                }
            }
            let last = p.samples.last().expect("non-empty");
            if last.t > p.t_end {
                return Err(format!("phase {k} has samples after t_end"));
            }
            if k > 0 && p.t_start != self.phases[k - 1].t_end {
                return Err(format!("phase {k} does not start where phase {} ends", k - 1));
            }
        }
        for (k, jump) in self.jumps.iter().enumerate() {
            let before = &self.phases[k];
            let after = &self.phases[k + 1];
            if jump.j != k {
                return Err(format!("jump {k} records j = {}", jump.j));
            }
            if jump.t != before.t_end || jump.t != after.t_start {
                return Err(format!("jump {k} time does not match the phase boundary"));
            }
            if jump.q_from != before.q || jump.q_to != after.q {
                return Err(format!("jump {k} modes do not match the phases"));
            }
            let end = &before.samples.last().expect("non-empty").x;
            let start = &after.samples[0].x;
            if !bitwise_eq(end, &jump.x) || !bitwise_eq(start, &jump.x) {
                return Err(format!("state changes across jump {k}"));
            }
            if before.samples.last().expect("non-empty").t != before.t_end {
                return Err(format!("phase {k} does not record its end state"));
            }
        }
        Ok(())
    }
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
