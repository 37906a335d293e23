//! Deterministic quasi-random sampling of boxes, spheres and sublevel sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Knobs shared by every sampling-based routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    /// Target number of points per sampled domain.
    pub samples: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0x5eed,
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton sequence with a seeded Cranley–Patterson rotation.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "Halton supports up to {} dims", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            shift: (0..dims).map(|_| rng.random::<f64>()).collect(),
            index: 1,
        }
    }

    pub fn dims(&self) -> usize {
        self.shift.len()
    }

    /// Next point in `[0, 1)^d`.
    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| {
                let v = radical_inverse(i, p as u64) + s;
                v - v.floor()
            })
            .collect()
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("box bounds must share a nonzero dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidParameter(format!("degenerate box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(dims: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; dims],
            hi: vec![half_width; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    fn map_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(u, (l, h))| l + u * (h - l))
            .collect()
    }

    /// `count` points: the center, the corners (for up to 8 dims), then Halton
    /// points.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let d = self.dims();
        let mut pts = Vec::with_capacity(count.max(1));
        pts.push(self.center());
        if d <= 8 {
            for mask in 0u32..(1 << d) {
                if pts.len() >= count {
                    break;
                }
                pts.push(
                    (0..d)
                        .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                        .collect(),
                );
            }
        }
        let mut h = Halton::new(d, seed);
        while pts.len() < count {
            pts.push(self.map_unit(&h.next_point()));
        }
        pts
    }
}

/// Unit directions in `ℝᵈ`: `±1` when `d = 1`, otherwise evenly spread
/// angles in 2-D and normalised Halton points beyond.
pub fn directions(dims: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dims {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count.max(4) as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut h = Halton::new(dims, seed);
            let mut out = Vec::with_capacity(count);
            for i in 0..dims {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; dims];
                    e[i] = s;
                    out.push(e);
                }
            }
            while out.len() < count {
                let p: Vec<f64> = h.next_point().iter().map(|v| 2.0 * v - 1.0).collect();
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-3 && norm <= 1.0 {
                    out.push(p.iter().map(|v| v / norm).collect());
                }
            }
            out
        }
    }
}

/// Evenly spaced points `a, …, b` (inclusive).
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

const MAX_BRACKET: f64 = 1e8;
const MIN_BRACKET: f64 = 1e-12;

/// Half-width `R` of a centered box such that every sampled point on the
/// box surface has `f > level` while the box at `R/2` does not. Requires
/// `f(0) <= level` and `f` proper.
pub fn bracket_sublevel<F>(f: &F, level: f64, dims: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let dirs = directions(dims, 64, seed);
    let outside = |r: f64| -> Result<bool> {
        for d in &dirs {
            // Project the direction onto the sup-norm sphere of radius r.
            let m = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let p: Vec<f64> = d.iter().map(|v| v * r / m).collect();
            if f(&p)? <= level {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut r = 1.0;
    if outside(r)? {
        while r > MIN_BRACKET && outside(r * 0.5)? {
            r *= 0.5;
        }
        return Ok(r);
    }
    while !outside(r)? {
        r *= 2.0;
        if r > MAX_BRACKET {
            return Err(Error::Sampling(format!(
                "sublevel set {{f <= {level}}} not bracketed within radius {MAX_BRACKET}"
            )));
        }
    }
    Ok(r)
}

/// Point on the ray `t·dir` where `f` reaches `level`, by bisection on
/// `t ∈ [0, t_max]` given `f(0) <= level < f(t_max·dir)`.
pub fn ray_level_point<F>(f: &F, level: f64, dir: &[f64], t_max: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let at = |t: f64| dir.iter().map(|d| d * t).collect::<Vec<f64>>();
    let (mut lo, mut hi) = (0.0, t_max);
    if f(&at(hi))? <= level {
        return Ok(at(hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(&at(mid))? <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(lo))
}

/// Points of `{x : f(x) <= level}` in `ℝᵈ`: boundary points found along rays
/// plus interior Halton points from the bracketing box. Returns the points
/// and the bracketing half-width.
pub fn sample_sublevel<F>(
    f: &F,
    level: f64,
    dims: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let origin = vec![0.0; dims];
    if f(&origin)? > level {
        return Err(Error::Sampling(format!("origin is not inside {{f <= {level}}}")));
    }
    let r = bracket_sublevel(f, level, dims, seed)?;
    let mut pts = vec![origin];
    let ray_count = (count / 8).max(8);
    let t_max = r * (dims as f64).sqrt();
    for d in directions(dims, ray_count, seed ^ 0x9e37) {
        pts.push(ray_level_point(f, level, &d, t_max)?);
    }
    let bx = BoxDomain::symmetric(dims, r);
    let mut halton = Halton::new(dims, seed);
    let budget = count.saturating_mul(64).max(1024);
    let mut tried = 0;
    while pts.len() < count && tried < budget {
        tried += 1;
        let p = bx.map_unit(&halton.next_point());
        if f(&p)? <= level {
            pts.push(p);
        }
    }
    Ok((pts, r))
}

/// Up to `count` quasi-random points of `domain` where `f > level`.
pub fn sample_superlevel<F>(
    f: &F,
    level: f64,
    domain: &BoxDomain,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut halton = Halton::new(domain.dims(), seed);
    let budget = count.saturating_mul(64).max(1024);
    let mut pts = Vec::with_capacity(count);
    let mut tried = 0;
    while pts.len() < count && tried < budget {
        tried += 1;
        let p = domain.map_unit(&halton.next_point());
        if f(&p)? > level {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Seeded generator for the few places that need plain pseudo-random draws.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
