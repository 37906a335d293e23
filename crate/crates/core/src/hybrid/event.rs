//! Guard-crossing localization on dense output.

use super::integrator::DenseSegment;
use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 200;

/// A located crossing: the time, the state there and the guard value
/// (within `[0, event_tol]` unless the guard is discontinuous).
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: Vec<f64>,
    pub guard: f64,
}

/// Bisection for the guard crossing on `[t_lo, t_hi]` of `seg`, given
/// `guard(x(t_lo)) < 0 ≤ guard(x(t_hi))`. Returns the earliest point found
/// on the non-negative side with `guard ≤ event_tol`.
pub fn locate_event<G>(
    guard: &G,
    seg: &DenseSegment,
    t_lo: f64,
    t_hi: f64,
    event_tol: f64,
) -> Result<Event>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let (mut lo, mut hi) = (t_lo, t_hi);
    let g_lo = guard(&seg.eval(lo))?;
    let mut x_hi = seg.eval(hi);
    let mut g_hi = guard(&x_hi)?;
    if g_lo >= 0.0 || g_hi < 0.0 {
        return Err(Error::NoCrossing);
    }
    for _ in 0..MAX_BISECTIONS {
        if g_hi <= event_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let x_mid = seg.eval(mid);
        let g_mid = guard(&x_mid)?;
        if g_mid >= 0.0 {
            hi = mid;
            x_hi = x_mid;
            g_hi = g_mid;
        } else {
            lo = mid;
        }
    }
    Ok(Event {
        t: hi,
        x: x_hi,
        guard: g_hi,
    })
}

/// First crossing of `guard` into `[0, ∞)` within the step, scanning
/// `subdivisions` equally spaced points of the dense output. Grazing
/// contacts that never reach `guard ≥ 0` at a scanned point are missed by
/// design and reported as `None`.
pub fn first_crossing<G>(
    guard: &G,
    seg: &DenseSegment,
    subdivisions: usize,
    event_tol: f64,
) -> Result<Option<Event>>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let n = subdivisions.max(1);
    let mut prev = seg.t0;
    for i in 1..=n {
        let t = if i == n {
            seg.t1()
        } else {
            seg.t0 + seg.h * i as f64 / n as f64
        };
        let x = seg.eval(t);
        if guard(&x)? >= 0.0 {
            return locate_event(guard, seg, prev, t, event_tol).map(Some);
        }
        prev = t;
    }
    Ok(None)
}
