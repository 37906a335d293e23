//! Static state feedbacks `u = φ(x)`.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::expr::{parse_with_params, Expr};
use crate::plant::state_var_names;

pub trait Feedback: Send + Sync {
    fn control(&self, x: &[f64]) -> Result<f64>;
}

impl<F: Feedback + ?Sized> Feedback for std::sync::Arc<F> {
    fn control(&self, x: &[f64]) -> Result<f64> {
        (**self).control(x)
    }
}

/// Feedback given by a formula over the state variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprFeedback {
    expr: Expr,
}

impl ExprFeedback {
    pub fn new(expr: Expr) -> Self {
        Self { expr }
    }

    pub fn parse(text: &str, n: usize, params: &BTreeMap<String, f64>) -> Result<Self> {
        Ok(Self::new(parse_with_params(text, &state_var_names(n), params)?))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl Feedback for ExprFeedback {
    fn control(&self, x: &[f64]) -> Result<f64> {
        Ok(self.expr.eval_at(x)?)
    }
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFeedback;

impl Feedback for ZeroFeedback {
    fn control(&self, _x: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
}
