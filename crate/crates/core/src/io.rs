//! Trajectory CSV, run summary JSON and plot-data files.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::backstepping::{split, BacksteppingCertificate};
use crate::error::Result;
use crate::hybrid::HybridArc;
use crate::hysteresis::{LocalCertificate, Mode};

/// Lyapunov functions evaluated along a trajectory; missing ones are
/// written as NaN.
#[derive(Default, Clone, Copy)]
pub struct Diagnostics<'a> {
    pub certificate: Option<&'a BacksteppingCertificate>,
    /// `k` of the composite `V = V₁ + (k/2)(x₂ − φ₁)²`.
    pub k: Option<f64>,
    pub local: Option<&'a LocalCertificate>,
}

impl Diagnostics<'_> {
    fn values(&self, x: &[f64]) -> [f64; 3] {
        let (x1, _) = split(x);
        let v1 = self
            .certificate
            .map_or(f64::NAN, |c| c.v1(x1).unwrap_or(f64::NAN));
        let v = match (self.certificate, self.k) {
            (Some(c), Some(k)) => c.composite_v(k, x).unwrap_or(f64::NAN),
            _ => f64::NAN,
        };
        let v_ell = self.local.map_or(f64::NAN, |l| l.value(x).unwrap_or(f64::NAN));
        [v1, v, v_ell]
    }
}

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string(), "j".into(), "q".into()];
    cols.extend((1..n).map(|i| format!("x1_{i}")));
    cols.extend(["x2", "u", "V1", "V", "V_ell"].map(String::from));
    cols.join(",")
}

/// Floats carry 17 significant digits, enough to round-trip every `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// One row per recorded sample. A jump appears as two rows at the same `t`,
/// the second with the incremented `j` and the new mode.
pub fn write_trajectory_csv<W: Write>(
    w: &mut W,
    arc: &HybridArc,
    n: usize,
    diag: &Diagnostics,
) -> Result<()> {
    writeln!(w, "{}", csv_header(n))?;
    for (time, q, s) in arc.iter_samples() {
        let mut row = vec![format_float(time.t), time.j.to_string(), q.as_u8().to_string()];
        row.extend(s.x.iter().map(|v| format_float(*v)));
        row.push(format_float(s.u));
        row.extend(diag.values(&s.x).map(format_float));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSummary {
    pub t: f64,
    pub j: usize,
    pub q_from: Mode,
    pub q_to: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub termination: String,
    pub jumps: Vec<JumpSummary>,
    pub t_final: f64,
}

impl RunSummary {
    pub fn from_arc(arc: &HybridArc) -> Self {
        Self {
            termination: arc.termination.label().into(),
            jumps: arc
                .jumps
                .iter()
                .map(|j| JumpSummary {
                    t: j.t,
                    j: j.j,
                    q_from: j.q_from,
                    q_to: j.q_to,
                })
                .collect(),
            t_final: arc.t_final(),
        }
    }
}

/// Three blocks separated by blank lines, `t x1`, `t x2` and `t q`, each
/// headed by a comment naming the series. Jumps repeat `t`, which draws the
/// vertical segment of `q`. The first state component stands for `x₁`.
pub fn write_plot_data<W: Write>(w: &mut W, arc: &HybridArc) -> Result<()> {
    let n = arc.final_state().map_or(2, <[f64]>::len);
    let series: [(&str, Box<dyn Fn(Mode, &[f64]) -> f64>); 3] = [
        ("x1", Box::new(|_, x| x[0])),
        ("x2", Box::new(move |_, x| x[n - 1])),
        ("q", Box::new(|q, _| f64::from(q.as_u8()))),
    ];
    for (k, (name, f)) in series.iter().enumerate() {
        if k > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# {name}(t)")?;
        writeln!(w, "# t {name}")?;
        for (time, q, s) in arc.iter_samples() {
            writeln!(w, "{} {}", format_float(time.t), format_float(f(q, &s.x)))?;
        }
    }
    Ok(())
}
