//! Gauss–Legendre rules mapped onto `[0, 1]`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// A fixed-order Gauss–Legendre rule on the unit interval. An order-`m` rule
/// integrates polynomials of degree `2m - 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitGaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitGaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order must be >= 2, got {order}"
            )));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order >= 2"));
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫₀¹ f(s) ds` for a fallible integrand.
    pub fn integrate<E>(&self, mut f: impl FnMut(f64) -> Result<f64, E>) -> Result<f64, E> {
        let mut acc = 0.0;
        for (s, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(*s)?;
        }
        Ok(acc)
    }
}
