//! The worked two-dimensional example: plant, certificates and constants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backstepping::{BacksteppingCertificate, CertificateDefinition};
use crate::error::Result;
use crate::hysteresis::{LocalCertificate, LocalDefinition};

/// Published constants of the example, derived from `θ` and `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperConstants {
    pub theta: f64,
    pub rho: f64,
    /// `c₁ = (2 + ρ)θ/2 + 1`.
    pub c1: f64,
    /// `ε = 1 − θ(2 + ρ)/(2c₁)`.
    pub epsilon: f64,
    /// `M = θ / (2ρ(2c₁ − θ(2 + ρ)))`.
    pub m: f64,
    pub k1: f64,
    pub k2: f64,
    pub v_ell: f64,
    pub v_ell_tilde: f64,
    pub a: f64,
    pub c: f64,
    pub x0: [f64; 2],
    pub q0: u8,
}

pub const PUBLISHED_THETA: f64 = 1e-3;
pub const PUBLISHED_RHO: f64 = 2.0;
pub const PUBLISHED_V_ELL: f64 = 0.1042;
/// Time of the switch back to the local controller in the published run.
pub const PUBLISHED_SWITCH_TIME: f64 = 0.5314;

impl PaperConstants {
    pub fn published() -> Self {
        let mut pc = Self::from_theta_rho(PUBLISHED_THETA, PUBLISHED_RHO);
        pc.v_ell = PUBLISHED_V_ELL;
        pc
    }

    /// Constants for another `(θ, ρ)`; `v_ℓ` then comes from
    /// [`v_ell_from_polynomial`].
    pub fn from_theta_rho(theta: f64, rho: f64) -> Self {
        let c1 = (2.0 + rho) * theta / 2.0 + 1.0;
        let epsilon = 1.0 - theta * (2.0 + rho) / (2.0 * c1);
        let m = theta / (2.0 * rho * (2.0 * c1 - theta * (2.0 + rho)));
        Self {
            theta,
            rho,
            c1,
            epsilon,
            m,
            k1: -5.0 - theta,
            k2: -3.0 + 3.0 * theta + theta * theta,
            v_ell: v_ell_from_polynomial(theta),
            v_ell_tilde: 0.05,
            a: 10.0,
            c: 10.0,
            x0: [0.5, 0.1],
            q0: 1,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        [
            ("theta", self.theta),
            ("rho", self.rho),
            ("c1", self.c1),
            ("k1", self.k1),
            ("k2", self.k2),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Polynomial bounding the nonlinear remainder of the linearized loop.
pub fn p_theta(theta: f64) -> f64 {
    let r = 10f64.sqrt();
    let coeffs = [
        1020.0 * r + 2940.0,
        5114.0 * r + 14380.0,
        8602.0 * r + 23880.0,
        5948.0 * r + 16280.0,
        1940.0 * r + 5340.0,
        210.0 * r + 600.0,
    ];
    coeffs.iter().rev().fold(0.0, |acc, c| acc * theta + c)
}

/// `v_ℓ = (2 / (θ p(θ)))²`.
pub fn v_ell_from_polynomial(theta: f64) -> f64 {
    (2.0 / (theta * p_theta(theta))).powi(2)
}

pub const V1: &str = "x1^2/2";
pub const PHI1: &str = "-(1 + c1)*x1 - theta*x1^2";
pub const ALPHA: &str = "2*c1*s";
pub const PSI: &str = "theta*(1 + abs(x1))";
pub const V_ELL: &str = "(x1 - theta*x2)^2/2 + (2*x1 + (1 - 2*theta)*x2)^2/2";
pub const PHI_ELL: &str = "k1*x1 + k2*x2";

pub fn paper_certificate_definition(pc: &PaperConstants) -> CertificateDefinition {
    CertificateDefinition {
        v1: V1.into(),
        phi1: PHI1.into(),
        alpha: ALPHA.into(),
        psi: PSI.into(),
        epsilon: pc.epsilon,
        m: pc.m,
    }
}

pub fn paper_certificate(pc: &PaperConstants) -> Result<BacksteppingCertificate> {
    BacksteppingCertificate::new(2, paper_certificate_definition(pc), &pc.params())
}

pub fn paper_local_definition(pc: &PaperConstants) -> LocalDefinition {
    LocalDefinition {
        v_ell: V_ELL.into(),
        phi_ell: PHI_ELL.into(),
        v_ell_level: pc.v_ell,
        v_ell_tilde: pc.v_ell_tilde,
    }
}

pub fn paper_local_certificate(pc: &PaperConstants) -> Result<LocalCertificate> {
    LocalCertificate::new(2, &paper_local_definition(pc), &pc.params())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_constants() {
        let pc = PaperConstants::published();
        assert!((pc.c1 - 1.002).abs() < 1e-15);
        assert!((pc.epsilon - 0.998).abs() < 5e-4);
        assert!((pc.m - 1.25e-4).abs() < 1e-9);
        assert_eq!(pc.k1, -5.001);
        assert!((pc.k2 - (-2.996999)).abs() < 1e-15);
    }

    #[test]
    fn polynomial_reproduces_printed_v_ell() {
        let v = v_ell_from_polynomial(1e-3);
        assert!((v - 0.1042).abs() < 5e-5, "{v}");
    }
}
