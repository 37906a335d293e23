//! Plants of the form
//!
//! ```text
//! ẋ₁ = f₁(x₁, x₂) + h₁(x₁, x₂, u)
//! ẋ₂ = f₂(x₁, x₂)·u + h₂(x₁, x₂, u)
//! ```
//!
//! with `x₁ ∈ ℝⁿ⁻¹`, `x₂ ∈ ℝ` and scalar input `u ∈ ℝ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_with_params, Expr};

/// Tolerance for the vanishing-at-origin checks done at construction.
const ORIGIN_TOL: f64 = 1e-12;

/// Names of the state variables for dimension `n`: `x1, x2` when `n = 2`,
/// otherwise `x1_1, …, x1_{n-1}, x2`.
pub fn state_var_names(n: usize) -> Vec<String> {
    let mut names: Vec<String> = if n == 2 {
        vec!["x1".into()]
    } else {
        (1..n).map(|i| format!("x1_{i}")).collect()
    };
    names.push("x2".into());
    names
}

/// Names of the `x₁` block only.
pub fn x1_var_names(n: usize) -> Vec<String> {
    let mut names = state_var_names(n);
    names.pop();
    names
}

/// State variables followed by `u`.
pub fn input_var_names(n: usize) -> Vec<String> {
    let mut names = state_var_names(n);
    names.push("u".into());
    names
}

/// A point `(x₁, x₂)` of the state space, stored contiguously as
/// `[x₁…, x₂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vec<f64>);

impl State {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "state needs n >= 2 components, got {}",
                components.len()
            )));
        }
        if let Some(bad) = components.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite state component {bad}")));
        }
        Ok(Self(components))
    }

    pub fn from_parts(x1: &[f64], x2: f64) -> Result<Self> {
        let mut v = x1.to_vec();
        v.push(x2);
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn x1(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn x2(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Textual description of a plant, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantDefinition {
    pub n: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub f1: Vec<String>,
    pub f2: String,
    pub h1: Vec<String>,
    pub h2: String,
}

#[derive(Debug, Clone)]
pub struct PlantModel {
    definition: PlantDefinition,
    f1: Vec<Expr>,
    f2: Expr,
    h1: Vec<Expr>,
    h2: Expr,
    df1_dx2: Vec<Expr>,
    dh1_dx2: Vec<Expr>,
}

impl PlantModel {
    pub fn new(definition: PlantDefinition) -> Result<Self> {
        let n = definition.n;
        if n < 2 {
            return Err(Error::InvalidModel(format!("dimension n must be >= 2, got {n}")));
        }
        if definition.f1.len() != n - 1 || definition.h1.len() != n - 1 {
            return Err(Error::InvalidModel(format!(
                "f1 and h1 need n-1 = {} components, got {} and {}",
                n - 1,
                definition.f1.len(),
                definition.h1.len()
            )));
        }
        let state = state_var_names(n);
        let input = input_var_names(n);
        let p = &definition.params;
        let f1 = definition
            .f1
            .iter()
            .map(|t| parse_with_params(t, &state, p))
            .collect::<Result<Vec<_>, _>>()?;
        let h1 = definition
            .h1
            .iter()
            .map(|t| parse_with_params(t, &input, p))
            .collect::<Result<Vec<_>, _>>()?;
        let f2 = parse_with_params(&definition.f2, &state, p)?;
        let h2 = parse_with_params(&definition.h2, &input, p)?;

        let zero = vec![0.0; n + 1];
        for (i, e) in f1.iter().enumerate() {
            check_zero(&format!("f1[{i}](0,0)"), e.eval_at(&zero)?)?;
        }
        for (i, e) in h1.iter().enumerate() {
            check_zero(&format!("h1[{i}](0,0,0)"), e.eval_at(&zero)?)?;
        }
        check_zero("h2(0,0,0)", h2.eval_at(&zero)?)?;

        let df1_dx2 = f1.iter().map(|e| e.differentiate("x2")).collect();
        let dh1_dx2 = h1.iter().map(|e| e.differentiate("x2")).collect();
        Ok(Self {
            definition,
            f1,
            f2,
            h1,
            h2,
            df1_dx2,
            dh1_dx2,
        })
    }

    pub fn definition(&self) -> &PlantDefinition {
        &self.definition
    }

    pub fn dim(&self) -> usize {
        self.definition.n
    }

    pub fn f1(&self) -> &[Expr] {
        &self.f1
    }

    pub fn f2(&self) -> &Expr {
        &self.f2
    }

    pub fn h1(&self) -> &[Expr] {
        &self.h1
    }

    pub fn h2(&self) -> &Expr {
        &self.h2
    }

    pub fn f2_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.f2.eval_at(x)?)
    }

    pub fn f1_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.f1, x)
    }

    pub fn h1_values(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        eval_all(&self.h1, &with_input(x, u))
    }

    pub fn h2_value(&self, x: &[f64], u: f64) -> Result<f64> {
        Ok(self.h2.eval_at(&with_input(x, u))?)
    }

    /// `∂f₁/∂x₂` at `x`.
    pub fn df1_dx2(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.df1_dx2, x)
    }

    /// `∂h₁/∂x₂` at `(x, u)`.
    pub fn dh1_dx2(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        eval_all(&self.dh1_dx2, &with_input(x, u))
    }

    /// `(f₁ + h₁, f₂·u + h₂)` at `(x, u)`.
    pub fn eval_dynamics(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_dynamics_into(x, u, &mut out)?;
        Ok(out)
    }

    pub fn eval_dynamics_into(&self, x: &[f64], u: f64, out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n || out.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected state of dimension {n}, got {}",
                x.len()
            )));
        }
        let xu = with_input(x, u);
        for i in 0..n - 1 {
            out[i] = self.f1[i].eval_at(x)? + self.h1[i].eval_at(&xu)?;
        }
        out[n - 1] = self.f2.eval_at(x)? * u + self.h2.eval_at(&xu)?;
        Ok(())
    }
}

fn check_zero(what: &str, value: f64) -> Result<()> {
    if value.abs() > ORIGIN_TOL {
        return Err(Error::InvalidModel(format!("{what} must vanish, got {value}")));
    }
    Ok(())
}

fn eval_all(exprs: &[Expr], values: &[f64]) -> Result<Vec<f64>> {
    exprs
        .iter()
        .map(|e| e.eval_at(values).map_err(Error::from))
        .collect()
}

fn with_input(x: &[f64], u: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.extend_from_slice(x);
    v.push(u);
    v
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
    }
    Ok(())
}

/// `ẋ₁ = x₁ + x₂ + θ[x₁² + (1 + x₁) sin u]`, `ẋ₂ = u`, split as
/// `f₁ = x₁ + x₂ + θx₁²`, `h₁ = θ(1 + x₁) sin u`, `f₂ = 1`, `h₂ = 0`.
pub fn paper_example_definition(theta: f64) -> PlantDefinition {
    PlantDefinition {
        n: 2,
        params: [("theta".to_string(), theta)].into_iter().collect(),
        f1: vec!["x1 + x2 + theta*x1^2".into()],
        f2: "1".into(),
        h1: vec!["theta*(1 + x1)*sin(u)".into()],
        h2: "0".into(),
    }
}

pub fn paper_example(theta: f64) -> Result<PlantModel> {
    check_theta(theta)?;
    PlantModel::new(paper_example_definition(theta))
}

/// The unperturbed system `ẋ₁ = x₁ + θx₁² + x₂`, `ẋ₂ = u`.
pub fn preliminary_example_definition(theta: f64) -> PlantDefinition {
    PlantDefinition {
        n: 2,
        params: [("theta".to_string(), theta)].into_iter().collect(),
        f1: vec!["x1 + theta*x1^2 + x2".into()],
        f2: "1".into(),
        h1: vec!["0".into()],
        h2: "0".into(),
    }
}

pub fn preliminary_example(theta: f64) -> Result<PlantModel> {
    check_theta(theta)?;
    PlantModel::new(preliminary_example_definition(theta))
}
