use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{parse_with_params, Expr};
use crate::feedback::ExprFeedback;
use crate::plant::{preliminary_example, state_var_names, PlantModel};

/// Textbook backstepping design for `ẋ₁ = x₁ + θx₁² + x₂, ẋ₂ = u`.
#[derive(Debug, Clone)]
pub struct ClassicalBackstepping {
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Virtual control `φ₁(x₁) = −(1 + c₁)x₁ − θx₁²`.
    pub phi1: Expr,
    pub v1: Expr,
    /// `φ_b`.
    pub feedback: ExprFeedback,
    /// `V_b = V₁ + ½(x₂ − φ₁(x₁))²`.
    pub v_b: Expr,
}

pub const PHI_B: &str =
    "-(1 + c1 + 2*theta*x1)*(x1 + theta*x1^2 + x2) - x1 - c2*(x2 + (1 + c1)*x1 + theta*x1^2)";
pub const V_B: &str = "x1^2/2 + (x2 + (1 + c1)*x1 + theta*x1^2)^2/2";

/// Build `φ_b` and `V_b` for `plant`, which must be the unperturbed example
/// (checked by comparing vector fields against the built-in at a few points).
pub fn classical_backstepping(
    plant: &PlantModel,
    theta: f64,
    c1: f64,
    c2: f64,
) -> Result<ClassicalBackstepping> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c1 and c2 must be positive, got {c1}, {c2}"
        )));
    }
    let reference = preliminary_example(theta)?;
    if plant.dim() != 2 {
        return Err(Error::InvalidModel("classical backstepping needs n = 2".into()));
    }
    for (x, u) in [([0.3, -1.1], 0.7), ([-2.0, 0.5], -3.0), ([4.0, 2.0], 10.0)] {
        let a = plant.eval_dynamics(&x, u)?;
        let b = reference.eval_dynamics(&x, u)?;
        if a.iter().zip(&b).any(|(p, q)| (p - q).abs() > 1e-12 * (1.0 + q.abs())) {
            return Err(Error::InvalidModel(
                "classical backstepping applies only to the unperturbed example plant".into(),
            ));
        }
    }
    let params: BTreeMap<String, f64> = [("theta", theta), ("c1", c1), ("c2", c2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let vars = state_var_names(2);
    let x1 = vec!["x1".to_string()];
    Ok(ClassicalBackstepping {
        theta,
        c1,
        c2,
        phi1: parse_with_params("-(1 + c1)*x1 - theta*x1^2", &x1, &params)?,
        v1: parse_with_params("x1^2/2", &x1, &params)?,
        feedback: ExprFeedback::new(parse_with_params(PHI_B, &vars, &params)?),
        v_b: parse_with_params(V_B, &vars, &params)?,
    })
}
