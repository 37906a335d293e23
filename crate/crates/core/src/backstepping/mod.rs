//! Global practical stabilization by a modified backstepping design.
//!
//! Given a certificate `(V₁, φ₁, α, Ψ, ε, M)` for the `x₁`-subsystem and a
//! practical radius `a > 0`, [`synthesize_phi_g`] builds a continuous
//! feedback `φ_g` under which the composite function
//!
//! ```text
//! V(x) = V₁(x₁) + (k/2)·(x₂ − φ₁(x₁))²,   k = 2(M + a)/a²
//! ```
//!
//! satisfies `V̇ ≤ ε[α(M) − α(V₁)] + 1/c − c(x₂ − φ₁)²` along the closed loop,
//! which makes `{V ≤ M + ã}` (contained in `A + a𝐁`) globally attractive.

mod attractor;
mod classical;
mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_with_params, Expr};
use crate::plant::{state_var_names, x1_var_names};
use crate::sampling::linspace;

pub use attractor::Attractor;
pub use classical::{classical_backstepping, ClassicalBackstepping};
pub use synth::{
    compute_a_prime, compute_c_g, compute_k, compute_k_alpha, compute_zeta, eval_delta,
    eval_tilde_u, eval_upsilon, synthesize_phi_g, APrimeSearch, CChoice, GlobalController,
    GlobalControllerParams, SynthesisOptions, Variant,
};

const ORIGIN_TOL: f64 = 1e-12;

/// Textual form of a backstepping certificate as it appears in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDefinition {
    #[serde(rename = "V1")]
    pub v1: String,
    pub phi1: String,
    /// Class-K∞ decay rate, written in the variable `s`.
    pub alpha: String,
    #[serde(rename = "Psi")]
    pub psi: String,
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Debug, Clone)]
pub struct BacksteppingCertificate {
    n: usize,
    definition: CertificateDefinition,
    v1: Expr,
    phi1: Expr,
    alpha: Expr,
    psi: Expr,
    grad_v1: Vec<Expr>,
    grad_phi1: Vec<Expr>,
    alpha_prime: Expr,
}

impl BacksteppingCertificate {
    pub fn new(
        n: usize,
        definition: CertificateDefinition,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidModel(format!("dimension n must be >= 2, got {n}")));
        }
        let eps = definition.epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
        }
        if !(definition.m > 0.0 && definition.m.is_finite()) {
            return Err(Error::InvalidParameter(format!("M must be positive, got {}", definition.m)));
        }
        let x1 = x1_var_names(n);
        let state = state_var_names(n);
        let v1 = parse_with_params(&definition.v1, &x1, params)?;
        let phi1 = parse_with_params(&definition.phi1, &x1, params)?;
        let alpha = parse_with_params(&definition.alpha, &["s".to_string()], params)?;
        let psi = parse_with_params(&definition.psi, &state, params)?;

        let zero = vec![0.0; n - 1];
        let phi0 = phi1.eval_at(&zero)?;
        if phi0.abs() > ORIGIN_TOL {
            return Err(Error::InvalidModel(format!("phi1(0) must vanish, got {phi0}")));
        }
        let v0 = v1.eval_at(&zero)?;
        if v0.abs() > ORIGIN_TOL {
            return Err(Error::InvalidModel(format!("V1(0) must vanish, got {v0}")));
        }
        let a0 = alpha.eval_at(&[0.0])?;
        if a0.abs() > ORIGIN_TOL {
            return Err(Error::InvalidModel(format!("alpha(0) must vanish, got {a0}")));
        }
        let grid = linspace(0.0, (1e3f64).max(10.0 * definition.m), 2001);
        let mut prev = f64::NEG_INFINITY;
        for s in grid {
            let v = alpha.eval_at(&[s])?;
            if v <= prev {
                return Err(Error::InvalidModel(format!(
                    "alpha is not strictly increasing near s = {s}"
                )));
            }
            prev = v;
        }

        let grad_v1 = v1.gradient(&x1);
        let grad_phi1 = phi1.gradient(&x1);
        let alpha_prime = alpha.differentiate("s");
        Ok(Self {
            n,
            definition,
            v1,
            phi1,
            alpha,
            psi,
            grad_v1,
            grad_phi1,
            alpha_prime,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn definition(&self) -> &CertificateDefinition {
        &self.definition
    }

    pub fn epsilon(&self) -> f64 {
        self.definition.epsilon
    }

    pub fn m(&self) -> f64 {
        self.definition.m
    }

    pub fn v1_expr(&self) -> &Expr {
        &self.v1
    }

    pub fn phi1_expr(&self) -> &Expr {
        &self.phi1
    }

    pub fn alpha_expr(&self) -> &Expr {
        &self.alpha
    }

    pub fn alpha_prime_expr(&self) -> &Expr {
        &self.alpha_prime
    }

    pub fn psi_expr(&self) -> &Expr {
        &self.psi
    }

    pub fn grad_v1_exprs(&self) -> &[Expr] {
        &self.grad_v1
    }

    pub fn grad_phi1_exprs(&self) -> &[Expr] {
        &self.grad_phi1
    }

    pub fn v1(&self, x1: &[f64]) -> Result<f64> {
        Ok(self.v1.eval_at(x1)?)
    }

    pub fn phi1(&self, x1: &[f64]) -> Result<f64> {
        Ok(self.phi1.eval_at(x1)?)
    }

    pub fn grad_v1(&self, x1: &[f64]) -> Result<Vec<f64>> {
        eval_vec(&self.grad_v1, x1)
    }

    pub fn grad_phi1(&self, x1: &[f64]) -> Result<Vec<f64>> {
        eval_vec(&self.grad_phi1, x1)
    }

    pub fn alpha(&self, s: f64) -> Result<f64> {
        Ok(self.alpha.eval_at(&[s])?)
    }

    pub fn alpha_prime(&self, s: f64) -> Result<f64> {
        Ok(self.alpha_prime.eval_at(&[s])?)
    }

    /// `Ψ(x₁, x₂)` for a full state `x`.
    pub fn psi(&self, x: &[f64]) -> Result<f64> {
        Ok(self.psi.eval_at(x)?)
    }

    /// `V(x) = V₁(x₁) + (k/2)(x₂ − φ₁(x₁))²`.
    pub fn composite_v(&self, k: f64, x: &[f64]) -> Result<f64> {
        let (x1, x2) = split(x);
        let z = x2 - self.phi1(x1)?;
        Ok(self.v1(x1)? + 0.5 * k * z * z)
    }

    /// Gradient of the composite `V` with respect to the full state.
    pub fn composite_v_gradient(&self, k: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (x1, x2) = split(x);
        let z = x2 - self.phi1(x1)?;
        let gv = self.grad_v1(x1)?;
        let gp = self.grad_phi1(x1)?;
        let mut g: Vec<f64> = gv.iter().zip(&gp).map(|(v, p)| v - k * z * p).collect();
        g.push(k * z);
        Ok(g)
    }
}

pub fn split(x: &[f64]) -> (&[f64], f64) {
    let (x1, x2) = x.split_at(x.len() - 1);
    (x1, x2[0])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn eval_vec(exprs: &[Expr], values: &[f64]) -> Result<Vec<f64>> {
    exprs
        .iter()
        .map(|e| e.eval_at(values).map_err(Error::from))
        .collect()
}
