//! Two-mode hysteresis supervisor switching between a local and a global
//! feedback on sublevel sets of the local Lyapunov function `V_ℓ`.
//!
//! ```text
//! C₁ = {V_ℓ ≤ v_ℓ}    D₁ = {V_ℓ ≥ v_ℓ}    flow with φ_ℓ
//! C₂ = {V_ℓ ≥ ṽ_ℓ}    D₂ = {V_ℓ ≤ ṽ_ℓ}    flow with φ_g
//! ```
//!
//! Jumps toggle the mode. Since `ṽ_ℓ < v_ℓ`, `C₁ ∪ C₂` is the whole space
//! and `D₁ ∩ D₂` is empty.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backstepping::Attractor;
use crate::error::{Error, Result};
use crate::expr::{parse_with_params, Expr};
use crate::feedback::Feedback;
use crate::plant::state_var_names;

/// Controller mode: `1` runs the local feedback, `2` the global one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Mode {
    Local = 1,
    Global = 2,
}

impl Mode {
    pub fn toggled(self) -> Self {
        match self {
            Mode::Local => Mode::Global,
            Mode::Global => Mode::Local,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Mode {
    type Error = Error;

    fn try_from(q: u8) -> Result<Self> {
        match q {
            1 => Ok(Mode::Local),
            2 => Ok(Mode::Global),
            _ => Err(Error::InvalidParameter(format!("mode must be 1 or 2, got {q}"))),
        }
    }
}

impl From<Mode> for u8 {
    fn from(q: Mode) -> u8 {
        q.as_u8()
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Textual local certificate plus the lower switching threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDefinition {
    #[serde(rename = "V_ell")]
    pub v_ell: String,
    pub phi_ell: String,
    #[serde(rename = "v_ell")]
    pub v_ell_level: f64,
    pub v_ell_tilde: f64,
}

/// `(V_ℓ, φ_ℓ, v_ℓ)`: a local Lyapunov function, the feedback it certifies and
/// the level of the certified basin.
#[derive(Debug, Clone)]
pub struct LocalCertificate {
    pub v_ell: Expr,
    pub grad_v_ell: Vec<Expr>,
    pub phi_ell: Expr,
    pub level: f64,
}

impl LocalCertificate {
    pub fn new(n: usize, def: &LocalDefinition, params: &BTreeMap<String, f64>) -> Result<Self> {
        let vars = state_var_names(n);
        let v_ell = parse_with_params(&def.v_ell, &vars, params)?;
        let phi_ell = parse_with_params(&def.phi_ell, &vars, params)?;
        Self::from_exprs(n, v_ell, phi_ell, def.v_ell_level)
    }

    pub fn from_exprs(n: usize, v_ell: Expr, phi_ell: Expr, level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::InvalidParameter(format!("v_ell must be positive, got {level}")));
        }
        let zero = vec![0.0; n];
        let v0 = v_ell.eval_at(&zero)?;
        if v0.abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("V_ell(0) must vanish, got {v0}")));
        }
        let p0 = phi_ell.eval_at(&zero)?;
        if p0.abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("phi_ell(0) must vanish, got {p0}")));
        }
        let grad_v_ell = v_ell.gradient(&state_var_names(n));
        Ok(Self {
            v_ell,
            grad_v_ell,
            phi_ell,
            level,
        })
    }

    pub fn dim(&self) -> usize {
        self.grad_v_ell.len()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.v_ell.eval_at(x)?)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.grad_v_ell
            .iter()
            .map(|g| g.eval_at(x).map_err(Error::from))
            .collect()
    }

    pub fn local_control(&self, x: &[f64]) -> Result<f64> {
        Ok(self.phi_ell.eval_at(x)?)
    }

    /// Same certificate with the basin level replaced.
    pub fn with_level(&self, level: f64) -> Result<Self> {
        Self::from_exprs(self.dim(), self.v_ell.clone(), self.phi_ell.clone(), level)
    }
}

/// The hybrid feedback: flow/jump sets, jump map and per-mode feedbacks.
#[derive(Clone)]
pub struct HysteresisController {
    local: Arc<LocalCertificate>,
    global: Arc<dyn Feedback>,
    v_ell_tilde: f64,
}

impl fmt::Debug for HysteresisController {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HysteresisController")
            .field("v_ell", &self.local.level)
            .field("v_ell_tilde", &self.v_ell_tilde)
            .finish_non_exhaustive()
    }
}

impl HysteresisController {
    pub fn new(
        local: Arc<LocalCertificate>,
        global: Arc<dyn Feedback>,
        v_ell_tilde: f64,
    ) -> Result<Self> {
        if !(v_ell_tilde > 0.0 && v_ell_tilde < local.level) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < v_ell_tilde < v_ell, got v_ell_tilde = {v_ell_tilde}, v_ell = {}",
                local.level
            )));
        }
        Ok(Self {
            local,
            global,
            v_ell_tilde,
        })
    }

    pub fn local(&self) -> &Arc<LocalCertificate> {
        &self.local
    }

    pub fn global(&self) -> &Arc<dyn Feedback> {
        &self.global
    }

    pub fn v_ell(&self) -> f64 {
        self.local.level
    }

    pub fn v_ell_tilde(&self) -> f64 {
        self.v_ell_tilde
    }

    pub fn in_c(&self, q: Mode, x: &[f64]) -> Result<bool> {
        let v = self.local.value(x)?;
        Ok(match q {
            Mode::Local => v <= self.local.level,
            Mode::Global => v >= self.v_ell_tilde,
        })
    }

    pub fn in_d(&self, q: Mode, x: &[f64]) -> Result<bool> {
        let v = self.local.value(x)?;
        Ok(match q {
            Mode::Local => v >= self.local.level,
            Mode::Global => v <= self.v_ell_tilde,
        })
    }

    /// Signed distance-like guard: `≥ 0` exactly on `D_q`.
    pub fn guard(&self, q: Mode, x: &[f64]) -> Result<f64> {
        let v = self.local.value(x)?;
        Ok(match q {
            Mode::Local => v - self.local.level,
            Mode::Global => self.v_ell_tilde - v,
        })
    }

    pub fn jump(&self, q: Mode, x: &[f64]) -> Result<Mode> {
        if !self.in_d(q, x)? {
            return Err(Error::Contract(format!("jump requested outside D_{q} at {x:?}")));
        }
        Ok(q.toggled())
    }

    /// `φ_q(x)`, refused outside `C_q`.
    pub fn feedback(&self, q: Mode, x: &[f64]) -> Result<f64> {
        if !self.in_c(q, x)? {
            return Err(Error::Contract(format!("flow requested outside C_{q} at {x:?}")));
        }
        self.feedback_unchecked(q, x)
    }

    /// `φ_q(x)` without the flow-set check, for integrator stage evaluations
    /// that may overshoot the guard slightly.
    pub fn feedback_unchecked(&self, q: Mode, x: &[f64]) -> Result<f64> {
        match q {
            Mode::Local => self.local.local_control(x),
            Mode::Global => self.global.control(x),
        }
    }
}

/// Sampled maximum of `V_ℓ` over `A + a𝐁` with the maximizing point.
pub fn tube_max(
    local: &LocalCertificate,
    attractor: &Attractor,
    a: f64,
    per_point: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let points = if a > 0.0 {
        attractor.tube_samples(a, per_point, seed)
    } else {
        attractor.points().to_vec()
    };
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for p in points {
        let v = local.value(&p)?;
        if v > best.0 {
            best = (v, p);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ASearch {
    /// Directions per attractor sample when probing `A + a𝐁`.
    pub directions: usize,
    pub bisection_steps: usize,
    /// Largest radius tried.
    pub a_max: f64,
    pub seed: u64,
}

impl Default for ASearch {
    fn default() -> Self {
        Self {
            directions: 64,
            bisection_steps: 50,
            a_max: 1e6,
            seed: 0xa5,
        }
    }
}

/// Outcome of [`choose_a_for_theorem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AChoice {
    Feasible { a: f64, max_v_ell: f64 },
    /// Even `a → 0⁺` fails: `max_A V_ℓ ≥ ṽ_ℓ`.
    Infeasible { max_v_ell: f64, witness: Vec<f64> },
}

/// Largest `a` (to bisection accuracy) with sampled `max_{A+a𝐁} V_ℓ < ṽ_ℓ`.
pub fn choose_a_for_theorem(
    local: &LocalCertificate,
    attractor: &Attractor,
    v_ell_tilde: f64,
    search: &ASearch,
) -> Result<AChoice> {
    let probe = |a: f64| tube_max(local, attractor, a, search.directions, search.seed);
    let (base, witness) = probe(0.0)?;
    if base >= v_ell_tilde {
        return Ok(AChoice::Infeasible {
            max_v_ell: base,
            witness,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        if probe(hi)?.0 >= v_ell_tilde {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > search.a_max {
            let max_v_ell = probe(lo)?.0;
            return Ok(AChoice::Feasible { a: lo, max_v_ell });
        }
    }
    for _ in 0..search.bisection_steps {
        let mid = 0.5 * (lo + hi);
        if probe(mid)?.0 < v_ell_tilde {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        // Feasible at a = 0 but at no tested positive radius: report the
        // smallest bisection point, which is positive.
        lo = hi * 0.5f64.powi(search.bisection_steps as i32);
    }
    Ok(AChoice::Feasible {
        a: lo,
        max_v_ell: probe(lo)?.0,
    })
}
