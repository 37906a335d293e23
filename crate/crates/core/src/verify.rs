//! Sampling-based checks of the standing assumptions and of the conditions
//! used by the stability argument.
//!
//! Every check reports the worst signed margin (positive means satisfied)
//! and the sample where it occurred. Nothing here is a proof: a pass means
//! "no violation found on the samples".

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backstepping::{dot, split, Attractor, BacksteppingCertificate, GlobalController};
use crate::config::Scenario;
use crate::error::Result;
use crate::hybrid::{simulate_batch, HybridArc, IntegratorConfig};
use crate::hysteresis::{tube_max, HysteresisController, LocalCertificate, Mode};
use crate::plant::PlantModel;
use crate::sampling::{norm, sample_sublevel, sample_superlevel, BoxDomain, SampleConfig};

/// Slack allowed on non-strict (`≤`) inequalities for rounding.
pub const NON_STRICT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// Passes when the margin is positive.
    Strict,
    /// Passes when the margin is at least `-NON_STRICT_TOL`.
    NonStrict,
}

/// JSON has no infinities; they are written as the strings `"inf"`,
/// `"-inf"` and `"nan"`.
mod extended_float {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(D::Error::custom(format!("expected a number, got {t:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub domain: String,
    pub samples: usize,
    #[serde(with = "extended_float")]
    pub worst_margin: f64,
    pub witness: Option<Vec<f64>>,
    pub inequality: Inequality,
    pub pass: bool,
    /// No sample fell in the domain; passes without evidence.
    pub vacuous: bool,
    /// Reported but not counted toward the overall verdict.
    pub advisory: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReportEntry {
    pub fn new(
        name: impl Into<String>,
        domain: impl Into<String>,
        samples: usize,
        worst_margin: f64,
        witness: Option<Vec<f64>>,
        inequality: Inequality,
    ) -> Self {
        // -0.0 reads as a violation in the table; it is not one.
        let worst_margin = worst_margin + 0.0;
        let pass = match inequality {
            Inequality::Strict => worst_margin > 0.0,
            Inequality::NonStrict => worst_margin >= -NON_STRICT_TOL,
        };
        Self {
            name: name.into(),
            domain: domain.into(),
            samples,
            worst_margin,
            witness,
            inequality,
            pass,
            vacuous: false,
            advisory: false,
            note: None,
        }
    }

    pub fn vacuous(name: impl Into<String>, domain: impl Into<String>) -> Self {
        Self {
            vacuous: true,
            pass: true,
            ..Self::new(name, domain, 0, f64::INFINITY, None, Inequality::Strict)
        }
    }

    pub fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
}

impl VerificationReport {
    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = ReportEntry>) {
        self.entries.extend(entries);
    }

    /// True when every non-advisory entry passes.
    pub fn all_pass(&self) -> bool {
        self.entries.iter().filter(|e| !e.advisory).all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:<8} {:>9} {:>14}  {:<28} domain",
            "check", "result", "samples", "worst margin", "witness"
        );
        for e in &self.entries {
            let result = match (e.pass, e.vacuous, e.advisory) {
                (_, true, _) => "VACUOUS",
                (true, _, false) => "pass",
                (false, _, false) => "FAIL",
                (true, _, true) => "ok*",
                (false, _, true) => "warn*",
            };
            let witness = e.witness.as_ref().map_or_else(
                || "-".to_string(),
                |w| {
                    let parts: Vec<String> = w.iter().map(|v| format!("{v:.6e}")).collect();
                    format!("({})", parts.join(", "))
                },
            );
            let _ = writeln!(
                out,
                "{:<24} {:<8} {:>9} {:>14.6e}  {:<28} {}",
                e.name, result, e.samples, e.worst_margin, witness, e.domain
            );
            if let Some(note) = &e.note {
                let _ = writeln!(out, "    note: {note}");
            }
        }
        if self.entries.iter().any(|e| e.advisory) {
            let _ = writeln!(out, "* advisory: reported, not part of the verdict");
        }
        out
    }
}

/// Maximum of `value` over `points` with its argmax; evaluated in parallel,
/// reduced sequentially so ties resolve identically on every run.
fn worst<T, F>(points: &[T], value: F) -> Result<Option<(f64, usize)>>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let values: Vec<f64> = points.par_iter().map(&value).collect::<Result<_>>()?;
    let mut best: Option<(f64, usize)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, i));
        }
    }
    Ok(best)
}

/// Input values used where a condition quantifies over all `u`.
pub fn input_samples(plant: &PlantModel, u_range: (f64, f64), count: usize) -> Vec<f64> {
    let trig = plant
        .h1()
        .iter()
        .chain(std::iter::once(plant.h2()))
        .all(|e| e.var_only_in_trig("u"));
    let count = count.max(2);
    if trig {
        // u enters through (cos u, sin u) only: one period covers ℝ.
        let tau = std::f64::consts::TAU;
        let mut us: Vec<f64> = (0..count).map(|i| tau * i as f64 / count as f64).collect();
        us.extend([0.5, 1.0, 1.5].map(|f| f * std::f64::consts::PI));
        us
    } else {
        let (lo, hi) = u_range;
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()
    }
}

fn ring_points(local: &LocalCertificate, cfg: &SampleConfig) -> Result<Vec<Vec<f64>>> {
    let level = local.level;
    let delta = 1e-6 * level;
    let n = local.dim();
    let v = |x: &[f64]| local.value(x);
    let mut pts = Vec::new();
    // Outer shell plus interior, then thinner shells toward the inner edge.
    let (outer, _) = sample_sublevel(&v, level, n, cfg.samples, cfg.seed)?;
    pts.extend(outer);
    for k in 1..=6 {
        let lvl = level * 10f64.powi(-k);
        if lvl < delta {
            break;
        }
        let (shell, _) = sample_sublevel(&v, lvl, n, cfg.samples / 16, cfg.seed ^ k as u64)?;
        pts.extend(shell);
    }
    pts.retain(|x| v(x).is_ok_and(|val| val > 0.0 && val >= delta && val <= level));
    Ok(pts)
}

/// `∂V_ℓ·f_h(x, φ_ℓ(x)) < 0` on `{10⁻⁶v_ℓ ≤ V_ℓ ≤ v_ℓ}`.
pub fn check_assumption1(
    plant: &PlantModel,
    local: &LocalCertificate,
    cfg: &SampleConfig,
) -> Result<ReportEntry> {
    let name = "assumption1.decrease";
    let domain = format!("1e-6*v_ell <= V_ell <= v_ell = {}", local.level);
    let pts = ring_points(local, cfg)?;
    let lie = |x: &Vec<f64>| -> Result<f64> { local_lie_derivative(plant, local, x) };
    match worst(&pts, lie)? {
        None => Ok(ReportEntry::vacuous(name, domain)),
        Some((m, i)) => Ok(ReportEntry::new(
            name,
            domain,
            pts.len(),
            -m,
            Some(pts[i].clone()),
            Inequality::Strict,
        )),
    }
}

/// `∂V_ℓ(x)·f_h(x, φ_ℓ(x))`.
pub fn local_lie_derivative(
    plant: &PlantModel,
    local: &LocalCertificate,
    x: &[f64],
) -> Result<f64> {
    let u = local.local_control(x)?;
    let f = plant.eval_dynamics(x, u)?;
    Ok(dot(&local.gradient(x)?, &f))
}

/// Where and how densely Assumption 2 is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Assumption2Domain {
    /// Half-width of the symmetric state box.
    pub half_width: f64,
    /// Range for `u` when it does not enter only through `sin`/`cos`.
    pub u_range: (f64, f64),
    /// Number of `u` values per state sample.
    pub u_samples: usize,
}

impl Default for Assumption2Domain {
    fn default() -> Self {
        Self {
            half_width: 20.0,
            u_range: (-1e3, 1e3),
            u_samples: 32,
        }
    }
}

fn with_x2(x1: &[f64], x2: f64) -> Vec<f64> {
    let mut v = x1.to_vec();
    v.push(x2);
    v
}

/// Items 1–4 of the bounded-perturbation assumption, in that order
/// (item 2 as two entries: the `∂V₁·h₁` bound and `|h₁| ≤ Ψ`).
pub fn check_assumption2(
    plant: &PlantModel,
    cert: &BacksteppingCertificate,
    domain: &Assumption2Domain,
    cfg: &SampleConfig,
) -> Result<Vec<ReportEntry>> {
    let n = cert.dim();
    let eps = cert.epsilon();
    let alpha_m = cert.alpha(cert.m())?;
    let us = input_samples(plant, domain.u_range, domain.u_samples);
    let x1_box = BoxDomain::symmetric(n - 1, domain.half_width);
    let x_box = BoxDomain::symmetric(n, domain.half_width);
    let x1s = x1_box.sample(cfg.samples, cfg.seed);
    let xs = x_box.sample(cfg.samples, cfg.seed ^ 0x2);
    let box_text = |d: usize| format!("[-{w}, {w}]^{d}", w = domain.half_width);
    let u_text = if plant.h1().iter().chain([plant.h2()]).all(|e| e.var_only_in_trig("u")) {
        "u over one period".to_string()
    } else {
        format!("u in [{}, {}]", domain.u_range.0, domain.u_range.1)
    };

    let mut entries = Vec::new();

    let item1 = |x1: &Vec<f64>| -> Result<f64> {
        let x = with_x2(x1, cert.phi1(x1)?);
        let f1 = plant.f1_values(&x)?;
        Ok(dot(&cert.grad_v1(x1)?, &f1) + cert.alpha(cert.v1(x1)?)?)
    };
    let (m, i) = worst(&x1s, item1)?.expect("non-empty sample");
    entries.push(ReportEntry::new(
        "assumption2.item1",
        format!("x1 in {}", box_text(n - 1)),
        x1s.len(),
        -m,
        Some(x1s[i].clone()),
        Inequality::NonStrict,
    ));

    // Item 2a pairs each x1 sample with every u value.
    let item2a = |x1: &Vec<f64>| -> Result<(f64, f64)> {
        let x = with_x2(x1, cert.phi1(x1)?);
        let g = cert.grad_v1(x1)?;
        let rhs = (1.0 - eps) * cert.alpha(cert.v1(x1)?)? + eps * alpha_m;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &u in &us {
            let v = dot(&g, &plant.h1_values(&x, u)?) - rhs;
            if v > best.0 {
                best = (v, u);
            }
        }
        Ok(best)
    };
    let per_x: Vec<(f64, f64)> = x1s.par_iter().map(item2a).collect::<Result<_>>()?;
    let (i, (m, u)) = per_x
        .iter()
        .enumerate()
        .fold((0, (f64::NEG_INFINITY, 0.0)), |acc, (i, v)| {
            if v.0 > acc.1 .0 {
                (i, *v)
            } else {
                acc
            }
        });
    let mut witness = with_x2(&x1s[i], cert.phi1(&x1s[i])?);
    witness.push(u);
    entries.push(ReportEntry::new(
        "assumption2.item2_lie",
        format!("x1 in {}, x2 = phi1(x1), {u_text}", box_text(n - 1)),
        x1s.len() * us.len(),
        -m,
        Some(witness),
        Inequality::NonStrict,
    ));

    let over_xu = |f: &(dyn Fn(&[f64], f64) -> Result<f64> + Sync)| -> Result<(f64, Vec<f64>)> {
        let per_x: Vec<(f64, f64)> = xs
            .par_iter()
            .map(|x| -> Result<(f64, f64)> {
                let mut best = (f64::NEG_INFINITY, 0.0);
                for &u in &us {
                    let v = f(x, u)?;
                    if v > best.0 {
                        best = (v, u);
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
        for (i, (v, u)) in per_x.into_iter().enumerate() {
            if v > best.0 {
                best = (v, i, u);
            }
        }
        let mut w = xs[best.1].clone();
        w.push(best.2);
        Ok((best.0, w))
    };
    let xu_domain = format!("x in {}, {u_text}", box_text(n));

    let (m, w) = over_xu(&|x, u| Ok(norm(&plant.h1_values(x, u)?) - cert.psi(x)?))?;
    entries.push(ReportEntry::new(
        "assumption2.item2_h1",
        xu_domain.clone(),
        xs.len() * us.len(),
        -m,
        Some(w),
        Inequality::NonStrict,
    ));
    let (m, w) = over_xu(&|x, u| Ok(norm(&plant.dh1_dx2(x, u)?) - cert.psi(x)?))?;
    entries.push(ReportEntry::new(
        "assumption2.item3",
        xu_domain.clone(),
        xs.len() * us.len(),
        -m,
        Some(w),
        Inequality::NonStrict,
    ));
    let (m, w) = over_xu(&|x, u| Ok(plant.h2_value(x, u)?.abs() - cert.psi(x)?))?;
    entries.push(ReportEntry::new(
        "assumption2.item4",
        xu_domain,
        xs.len() * us.len(),
        -m,
        Some(w),
        Inequality::NonStrict,
    ));
    Ok(entries)
}

/// `max_A V_ℓ < v_ℓ`.
pub fn check_assumption3(
    cert: &BacksteppingCertificate,
    local: &LocalCertificate,
    cfg: &SampleConfig,
) -> Result<ReportEntry> {
    let attractor = Attractor::new(cert, cfg.samples, cfg.seed)?;
    check_assumption3_on(&attractor, local)
}

pub fn check_assumption3_on(attractor: &Attractor, local: &LocalCertificate) -> Result<ReportEntry> {
    let pts = attractor.points();
    let (m, i) = worst(pts, |x| local.value(x))?.expect("attractor sample is non-empty");
    Ok(ReportEntry::new(
        "assumption3.covering",
        format!("A = {{V1 <= {}, x2 = phi1(x1)}}", attractor.level()),
        pts.len(),
        local.level - m,
        Some(pts[i].clone()),
        Inequality::Strict,
    )
    .with_note(format!("max of V_ell over A = {m:.6e}")))
}

/// `f₂ ≠ 0` on a box. When samples of both signs occur, the zero between
/// them is located by bisection and reported as the witness.
pub fn check_f2_nonvanishing(
    plant: &PlantModel,
    domain: &BoxDomain,
    cfg: &SampleConfig,
) -> Result<ReportEntry> {
    let pts = domain.sample(cfg.samples, cfg.seed);
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|x| plant.f2_value(x))
        .collect::<Result<_>>()?;
    let text = format!("x in box {:?}..{:?}", domain.lo, domain.hi);
    let pos = vals.iter().position(|v| *v > 0.0);
    let neg = vals.iter().position(|v| *v < 0.0);
    if let (Some(p), Some(q)) = (pos, neg) {
        let (mut a, mut b) = (pts[p].clone(), pts[q].clone());
        let mut mid = a.clone();
        for _ in 0..200 {
            mid = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let v = plant.f2_value(&mid)?;
            if v == 0.0 {
                break;
            }
            if v > 0.0 {
                a = mid.clone();
            } else {
                b = mid.clone();
            }
        }
        let v = plant.f2_value(&mid)?;
        return Ok(ReportEntry::new(
            "f2.nonvanishing",
            text,
            pts.len(),
            -v.abs(),
            Some(mid),
            Inequality::Strict,
        )
        .with_note("f2 changes sign; witness is the located zero"));
    }
    let mut best = (f64::INFINITY, 0usize);
    for (i, v) in vals.iter().enumerate() {
        if v.abs() < best.0 {
            best = (v.abs(), i);
        }
    }
    Ok(ReportEntry::new(
        "f2.nonvanishing",
        text,
        pts.len(),
        best.0,
        Some(pts[best.1].clone()),
        Inequality::Strict,
    ))
}

/// `max_{A+a𝐁} V_ℓ < ṽ_ℓ` and, empirically, that every simulated solution
/// from `initial` reaches mode 1 inside `C₁`.
pub fn check_theorem_conditions(
    plant: &PlantModel,
    ctrl: &HysteresisController,
    attractor: &Attractor,
    a: f64,
    initial: &[(Vec<f64>, Mode)],
    integrator: &IntegratorConfig,
) -> Result<Vec<ReportEntry>> {
    let (max_v, witness) = tube_max(ctrl.local(), attractor, a, 64, 0x7b)?;
    let tube = ReportEntry::new(
        "theorem.tube_below_v_ell_tilde",
        format!("A + {a}B"),
        attractor.points().len() * 129,
        ctrl.v_ell_tilde() - max_v,
        Some(witness),
        Inequality::Strict,
    );

    let arcs = simulate_batch(plant, ctrl, initial, integrator);
    let mut failing = Vec::new();
    for ((x0, _), arc) in initial.iter().zip(&arcs) {
        let reached = match arc {
            Ok(arc) => reaches_local_mode(ctrl, arc)?,
            Err(_) => false,
        };
        if !reached {
            failing.push(x0.clone());
        }
    }
    let reach = if initial.is_empty() {
        ReportEntry::vacuous("theorem.reaches_local_mode", "no initial conditions")
    } else {
        ReportEntry::new(
            "theorem.reaches_local_mode",
            format!("{} simulated initial conditions", initial.len()),
            initial.len(),
            if failing.is_empty() { 1.0 } else { -(failing.len() as f64) },
            failing.first().cloned(),
            Inequality::Strict,
        )
        .with_note("margin 1 when all reach q = 1 inside C1, else minus the failure count")
    };
    Ok(vec![tube, reach])
}

/// Whether some recorded sample has `q = 1` and `x ∈ C₁`.
pub fn reaches_local_mode(ctrl: &HysteresisController, arc: &HybridArc) -> Result<bool> {
    for (_, q, s) in arc.iter_samples() {
        if q == Mode::Local && ctrl.in_c(Mode::Local, &s.x)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Closed-loop derivative of the composite `V` under `φ_g`.
pub fn composite_v_dot(plant: &PlantModel, g: &GlobalController, x: &[f64]) -> Result<f64> {
    let k = g.params().k;
    let u = g.eval(x)?;
    let f = plant.eval_dynamics(x, u)?;
    Ok(dot(&g.certificate().composite_v_gradient(k, x)?, &f))
}

/// `ε[α(M) − α(V₁)] + 1/c − c(x₂ − φ₁)²`, the bound `V̇` must respect.
pub fn composite_v_dot_bound(g: &GlobalController, x: &[f64]) -> Result<f64> {
    let cert = g.certificate();
    let c = g.params().c;
    let (x1, x2) = split(x);
    let z = x2 - cert.phi1(x1)?;
    Ok(cert.epsilon() * (cert.alpha(cert.m())? - cert.alpha(cert.v1(x1)?)?) + 1.0 / c - c * z * z)
}

/// The decrease inequality for `V` under `φ_g` at the given states.
pub fn check_lyapunov_contract(
    plant: &PlantModel,
    g: &GlobalController,
    points: &[Vec<f64>],
    domain: &str,
) -> Result<ReportEntry> {
    let excess = |x: &Vec<f64>| -> Result<f64> {
        Ok(composite_v_dot(plant, g, x)? - composite_v_dot_bound(g, x)?)
    };
    match worst(points, excess)? {
        None => Ok(ReportEntry::vacuous("backstepping.v_dot_bound", domain)),
        Some((m, i)) => Ok(ReportEntry::new(
            "backstepping.v_dot_bound",
            domain,
            points.len(),
            -m,
            Some(points[i].clone()),
            Inequality::NonStrict,
        )),
    }
}

/// `{V ≤ M + ã} ⊂ A + a𝐁` on samples of the sublevel set.
pub fn check_inclusion(
    g: &GlobalController,
    attractor: &Attractor,
    cfg: &SampleConfig,
) -> Result<ReportEntry> {
    let p = g.params();
    let cert = g.certificate();
    let level = cert.m() + p.a_tilde;
    let v = |x: &[f64]| cert.composite_v(p.k, x);
    let (pts, _) = sample_sublevel(&v, level, cert.dim(), cfg.samples, cfg.seed)?;
    let (d, i) = worst(&pts, |x| Ok(attractor.distance(x)))?.expect("non-empty sample");
    Ok(ReportEntry::new(
        "backstepping.inclusion",
        format!("V <= M + a~ = {level}"),
        pts.len(),
        p.a + attractor.grid_tol() - d,
        Some(pts[i].clone()),
        Inequality::NonStrict,
    )
    .with_note(format!("largest distance to A = {d:.6e}, a = {}", p.a)))
}

/// Every check the scenario has the ingredients for, in a fixed order.
/// Conditions that only feed the stability argument's sufficient bounds are
/// marked advisory.
pub fn verify_scenario(s: &Scenario) -> Result<VerificationReport> {
    let vc = &s.config.verify;
    let cfg = SampleConfig {
        samples: vc.samples,
        seed: vc.seed,
    };
    let n = s.plant.dim();
    let state_box = BoxDomain::symmetric(n, vc.domain.half_width);
    let mut report = VerificationReport::default();

    let f2 = check_f2_nonvanishing(&s.plant, &state_box, &cfg)?;
    let f2_ok = f2.pass;
    report.push(f2);
    if let Some(local) = &s.local {
        report.push(check_assumption1(&s.plant, local, &cfg)?);
    }
    let Some(cert) = &s.certificate else {
        return Ok(report);
    };
    report.extend(check_assumption2(&s.plant, cert, &vc.domain, &cfg)?);
    let attractor = Attractor::new(cert, cfg.samples, cfg.seed)?;
    if let Some(local) = &s.local {
        report.push(check_assumption3_on(&attractor, local)?);
    }

    let skipped = |name: &str| {
        ReportEntry::vacuous(name, "-")
            .advisory()
            .with_note("skipped: the global feedback divides by f2, which vanishes")
    };
    if !f2_ok {
        report.push(skipped("backstepping.v_dot_bound"));
        return Ok(report);
    }
    let g = match s.global_controller() {
        Ok(g) => Arc::new(g),
        Err(e) => {
            let mut entry = ReportEntry::new(
                "backstepping.synthesis",
                "-",
                0,
                f64::NEG_INFINITY,
                None,
                Inequality::Strict,
            );
            entry.note = Some(e.to_string());
            report.push(entry);
            return Ok(report);
        }
    };
    let p = *g.params();
    let level = cert.m() + p.a_tilde;
    let v = |x: &[f64]| cert.composite_v(p.k, x);
    let pts = sample_superlevel(&v, level, &state_box, cfg.samples, cfg.seed ^ 0x24)?;
    report.push(check_lyapunov_contract(
        &s.plant,
        &g,
        &pts,
        &format!("V > M + a~ = {level:.6e} in [-{w}, {w}]^{n}", w = vc.domain.half_width),
    )?);
    // The advisory checks compare against every attractor sample; a
    // coarser attractor keeps them linear in the sample count.
    let coarse = Attractor::new(cert, (cfg.samples / 10).max(100), cfg.seed)?;
    report.push(check_inclusion(&g, &coarse, &cfg)?.advisory());

    if s.local.is_some() {
        let ctrl = s.hysteresis_controller(g.clone())?;
        let grid = BoxDomain::symmetric(n, vc.grid_half_width).sample(vc.grid * vc.grid, cfg.seed);
        let initial: Vec<(Vec<f64>, Mode)> = grid
            .into_iter()
            .flat_map(|x| [(x.clone(), Mode::Local), (x, Mode::Global)])
            .collect();
        let mut entries = check_theorem_conditions(
            &s.plant,
            &ctrl,
            &coarse,
            p.a,
            &initial,
            &s.config.integrator,
        )?;
        entries[0].advisory = true;
        report.extend(entries);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::ZeroFeedback;
    use crate::plant::{paper_example, paper_example_definition, PlantDefinition};
    use crate::presets::{paper_certificate, paper_local_certificate, PaperConstants};
    use std::sync::Arc;

    fn small() -> SampleConfig {
        SampleConfig {
            samples: 2000,
            seed: 11,
        }
    }

    #[test]
    fn assumption1_holds_for_the_example() {
        let pc = PaperConstants::published();
        let plant = paper_example(pc.theta).unwrap();
        let local = paper_local_certificate(&pc).unwrap();
        let e = check_assumption1(&plant, &local, &small()).unwrap();
        assert!(e.pass && !e.vacuous, "{e:?}");
        assert!(e.samples >= 1900);
    }

    #[test]
    fn assumption1_fails_without_feedback() {
        let pc = PaperConstants::published();
        let plant = paper_example(pc.theta).unwrap();
        let mut local = paper_local_certificate(&pc).unwrap();
        local.phi_ell = crate::expr::Expr::constant(0.0);
        let e = check_assumption1(&plant, &local, &small()).unwrap();
        assert!(!e.pass);
        let w = e.witness.unwrap();
        assert!(local_lie_derivative(&plant, &local, &w).unwrap() >= 0.0);
        // A point on the x1 axis is already a violation.
        let x = [0.1, 0.0];
        assert!(local_lie_derivative(&plant, &local, &x).unwrap() > 0.0);
    }

    #[test]
    fn assumption1_vacuous_for_tiny_level() {
        let pc = PaperConstants::published();
        let plant = paper_example(pc.theta).unwrap();
        let local = paper_local_certificate(&pc).unwrap().with_level(1e-300).unwrap();
        let e = check_assumption1(&plant, &local, &small()).unwrap();
        assert!(e.vacuous && e.pass);
    }

    #[test]
    fn assumption2_holds_for_the_example() {
        let pc = PaperConstants::published();
        let plant = paper_example(pc.theta).unwrap();
        let cert = paper_certificate(&pc).unwrap();
        let entries = check_assumption2(&plant, &cert, &Assumption2Domain::default(), &small()).unwrap();
        assert_eq!(entries.len(), 5);
        for e in &entries {
            assert!(e.pass, "{e:?}");
        }
        assert!(entries[0].worst_margin.abs() < 1e-12 * 400.0);
        // h2 = 0: margin is min Ψ = θ at x1 = 0 (the box center).
        assert!((entries[4].worst_margin - pc.theta).abs() < 1e-15);
    }

    #[test]
    fn assumption3_for_the_example() {
        let pc = PaperConstants::published();
        let cert = paper_certificate(&pc).unwrap();
        let local = paper_local_certificate(&pc).unwrap();
        let e = check_assumption3(&cert, &local, &small()).unwrap();
        assert!(e.pass);
        let max = pc.v_ell - e.worst_margin;
        // Oracle: V_ℓ at the two ends of A, x1 = ±sqrt(2M).
        let r = (2.0 * pc.m).sqrt();
        let ends = [r, -r].map(|x1| {
            let x2 = -(1.0 + pc.c1) * x1 - pc.theta * x1 * x1;
            local.value(&[x1, x2]).unwrap()
        });
        let oracle = ends[0].max(ends[1]);
        assert!((max - oracle).abs() < 1e-9 * oracle, "{max} vs {oracle}");

        let inflated = LocalCertificate::from_exprs(
            2,
            crate::expr::mul(crate::expr::Expr::constant(1e4), local.v_ell.clone()),
            local.phi_ell.clone(),
            pc.v_ell,
        )
        .unwrap();
        let e = check_assumption3(&cert, &inflated, &small()).unwrap();
        assert!(!e.pass);
        let w = e.witness.unwrap();
        assert!(inflated.value(&w).unwrap() >= pc.v_ell);
        assert!((w[0].abs() - r).abs() < 1e-12);
    }

    #[test]
    fn f2_checks() {
        let domain = BoxDomain::symmetric(2, 20.0);
        let pc = PaperConstants::published();
        let e = check_f2_nonvanishing(&paper_example(pc.theta).unwrap(), &domain, &small()).unwrap();
        assert!(e.pass && e.worst_margin == 1.0);

        let mut def = paper_example_definition(pc.theta);
        def.f2 = "x1".into();
        let p = PlantModel::new(def.clone()).unwrap();
        let e = check_f2_nonvanishing(&p, &domain, &small()).unwrap();
        assert!(!e.pass);
        let w = e.witness.unwrap();
        assert!(p.f2_value(&w).unwrap().abs() < 1e-12);

        def.f2 = "1 + x1^2".into();
        let e = check_f2_nonvanishing(&PlantModel::new(def).unwrap(), &domain, &small()).unwrap();
        assert!(e.pass && e.worst_margin == 1.0);

        let shifted = PlantModel::new(PlantDefinition {
            f2: "x1 - 0.3".into(),
            ..paper_example_definition(pc.theta)
        })
        .unwrap();
        let e = check_f2_nonvanishing(&shifted, &domain, &small()).unwrap();
        assert!(!e.pass);
        assert!((e.witness.unwrap()[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn scenario_report_for_the_example() {
        let mut cfg = crate::config::RunConfig::default();
        cfg.verify.samples = 2000;
        let report = verify_scenario(&cfg.build().unwrap()).unwrap();
        assert!(report.all_pass(), "{}", report.to_table());
        assert!(!report.get("theorem.tube_below_v_ell_tilde").unwrap().pass);
        assert!(report.get("backstepping.v_dot_bound").unwrap().samples >= 2000);
    }

    #[test]
    fn report_verdict_ignores_advisory() {
        let mut r = VerificationReport::default();
        r.push(ReportEntry::new("a", "d", 1, 1.0, None, Inequality::Strict));
        r.push(ReportEntry::new("b", "d", 1, -1.0, None, Inequality::Strict).advisory());
        assert!(r.all_pass());
        r.push(ReportEntry::new("c", "d", 1, 0.0, None, Inequality::Strict));
        r.push(ReportEntry::vacuous("e", "d"));
        assert!(!r.all_pass());
        assert!(r.to_table().contains("FAIL"));
        let json = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries.len(), 4);
        assert_eq!(back.entries[3].worst_margin, f64::INFINITY);
    }

    #[test]
    fn non_strict_margins() {
        assert!(ReportEntry::new("x", "d", 1, 0.0, None, Inequality::NonStrict).pass);
        assert!(ReportEntry::new("x", "d", 1, -1e-12, None, Inequality::NonStrict).pass);
        assert!(!ReportEntry::new("x", "d", 1, -1e-6, None, Inequality::NonStrict).pass);
        assert!(!ReportEntry::new("x", "d", 1, 0.0, None, Inequality::Strict).pass);
    }

    #[test]
    fn theorem_entries_for_origin() {
        let pc = PaperConstants::published();
        let plant = paper_example(pc.theta).unwrap();
        let cert = paper_certificate(&pc).unwrap();
        let local = Arc::new(paper_local_certificate(&pc).unwrap());
        let ctrl = HysteresisController::new(local, Arc::new(ZeroFeedback), pc.v_ell_tilde).unwrap();
        let attractor = Attractor::new(&cert, 200, 1).unwrap();
        let entries = check_theorem_conditions(
            &plant,
            &ctrl,
            &attractor,
            10.0,
            &[(vec![0.0, 0.0], Mode::Local)],
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(!entries[0].pass);
        assert!(entries[1].pass);
    }
}
