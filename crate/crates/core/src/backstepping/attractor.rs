use super::BacksteppingCertificate;
use crate::error::Result;
use crate::sampling::{directions, distance, sample_sublevel, Halton};

use super::synth::covering_radius;

/// Sampled form of `A = {(x₁, φ₁(x₁)) : V₁(x₁) ≤ M}`.
#[derive(Debug, Clone)]
pub struct Attractor {
    points: Vec<Vec<f64>>,
    grid_tol: f64,
    m: f64,
}

impl Attractor {
    pub fn new(cert: &BacksteppingCertificate, samples: usize, seed: u64) -> Result<Self> {
        Self::with_level(cert, cert.m(), samples, seed)
    }

    /// Same construction with `M` replaced by `level`.
    pub fn with_level(
        cert: &BacksteppingCertificate,
        level: f64,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let v1 = |x1: &[f64]| cert.v1(x1);
        let (x1s, _) = sample_sublevel(&v1, level, cert.dim() - 1, samples, seed)?;
        let mut points = Vec::with_capacity(x1s.len());
        for mut x1 in x1s {
            let x2 = cert.phi1(&x1)?;
            x1.push(x2);
            points.push(x1);
        }
        let grid_tol = covering_radius(&points);
        Ok(Self {
            points,
            grid_tol,
            m: level,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Largest gap between a sample and its nearest neighbour.
    pub fn grid_tol(&self) -> f64 {
        self.grid_tol
    }

    pub fn level(&self) -> f64 {
        self.m
    }

    /// Distance from `x` to the nearest sample of `A`. Overestimates the true
    /// distance by at most [`Self::grid_tol`].
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| distance(p, x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) <= self.grid_tol
    }

    /// Points of the tube `A + a𝐁`: every sample of `A` offset by `a` along
    /// `per_point` directions (the tube boundary, where convex functions peak)
    /// plus interior offsets at quasi-random radii.
    pub fn tube_samples(&self, a: f64, per_point: usize, seed: u64) -> Vec<Vec<f64>> {
        let dims = self.points.first().map_or(0, Vec::len);
        let dirs = directions(dims, per_point.max(2), seed);
        let mut radii = Halton::new(1, seed ^ 0x7b);
        let mut out = Vec::with_capacity(self.points.len() * (2 * dirs.len() + 1));
        for p in &self.points {
            out.push(p.clone());
            for d in &dirs {
                let r = radii.next_point()[0] * a;
                for scale in [a, r] {
                    out.push(p.iter().zip(d).map(|(pi, di)| pi + scale * di).collect());
                }
            }
        }
        out
    }
}
