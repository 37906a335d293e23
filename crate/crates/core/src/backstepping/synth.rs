use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{dot, split, BacksteppingCertificate};
use crate::error::{Error, Result};
use crate::feedback::Feedback;
use crate::plant::PlantModel;
use crate::quadrature::UnitGaussLegendre;
use crate::sampling::{distance, linspace, norm, sample_sublevel, SampleConfig};

/// Safety inflation applied to sampled maxima (`ζ`, nonlinear `K_α`).
const SAMPLED_MAX_MARGIN: f64 = 1.05;

/// `k = 2(M + a)/a²`.
pub fn compute_k(m: f64, a: f64) -> Result<f64> {
    if !(m > 0.0) || !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "compute_k needs M > 0 and a > 0, got M = {m}, a = {a}"
        )));
    }
    Ok(2.0 * (m + a) / (a * a))
}

/// Search settings for [`compute_a_prime`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct APrimeSearch {
    /// Candidates are `a·2^{-j}` for `j = 0, …, levels - 1`.
    pub levels: usize,
    /// Points per sampled sublevel set.
    pub samples: usize,
    pub seed: u64,
}

impl Default for APrimeSearch {
    fn default() -> Self {
        Self {
            levels: 60,
            samples: 2000,
            seed: 0xa9,
        }
    }
}

/// Largest `a′ ∈ {a, a/2, a/4, …}` for which the sampled set
/// `{V₁ ≤ M + a′}` lies within distance `a` of the sampled `{V₁ ≤ M}`.
///
/// The result is capped at `a`, so `ã = min(a, a′)` is simply the returned
/// value.
pub fn compute_a_prime(
    cert: &BacksteppingCertificate,
    m: f64,
    a: f64,
    search: &APrimeSearch,
) -> Result<f64> {
    if !(a > 0.0) || m < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "compute_a_prime needs a > 0 and M >= 0, got a = {a}, M = {m}"
        )));
    }
    let dims = cert.dim() - 1;
    let v1 = |x1: &[f64]| cert.v1(x1);
    let (inner, _) = sample_sublevel(&v1, m, dims, search.samples, search.seed)?;
    let resolution = covering_radius(&inner);
    let tol = resolution + 1e-9 * (1.0 + a);

    let mut candidate = a;
    for _ in 0..search.levels {
        let (outer, _) = sample_sublevel(&v1, m + candidate, dims, search.samples, search.seed)?;
        let worst = outer
            .iter()
            .map(|p| inner.iter().map(|q| distance(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        if worst <= a + tol {
            return Ok(candidate);
        }
        candidate *= 0.5;
    }
    Err(Error::Synthesis(format!(
        "no a' in (0, {a}] keeps {{V1 <= M + a'}} within {a} of {{V1 <= M}}"
    )))
}

/// Largest nearest-neighbour distance in a point cloud (an estimate of how
/// finely the cloud covers the set it was drawn from).
pub(crate) fn covering_radius(points: &[Vec<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    if points[0].len() == 1 {
        let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        return xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    }
    // Sweep in order of the first coordinate; a neighbour search stops once
    // that coordinate alone is farther than the best distance so far.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let x0 = |k: usize| points[order[k]][0];
    (0..order.len())
        .map(|k| {
            let p = &points[order[k]];
            let mut best = f64::INFINITY;
            for j in (k + 1)..order.len() {
                if x0(j) - p[0] >= best {
                    break;
                }
                best = best.min(distance(p, &points[order[j]]));
            }
            for j in (0..k).rev() {
                if p[0] - x0(j) >= best {
                    break;
                }
                best = best.min(distance(p, &points[order[j]]));
            }
            best
        })
        .fold(0.0, f64::max)
}

/// `η(s) = s·x₂ + (1 − s)·φ₁(x₁)`.
fn eta(s: f64, x2: f64, phi1: f64) -> f64 {
    s * x2 + (1.0 - s) * phi1
}

fn with_x2(x1: &[f64], x2: f64) -> Vec<f64> {
    let mut v = x1.to_vec();
    v.push(x2);
    v
}

/// Upper bound `Δ(x)` on the uncertain cross term:
///
/// `|∂V₁(x₁)|·∫₀¹Ψ(x₁, η(s))ds + Ψ(x₁, x₂)·k·(1 + |∂φ₁(x₁)|)`.
pub fn eval_delta(
    cert: &BacksteppingCertificate,
    k: f64,
    x: &[f64],
    quad: &UnitGaussLegendre,
) -> Result<f64> {
    let (x1, x2) = split(x);
    let phi1 = cert.phi1(x1)?;
    let grad_v1 = norm(&cert.grad_v1(x1)?);
    let integral = if grad_v1 == 0.0 {
        0.0
    } else {
        quad.integrate(|s| cert.psi(&with_x2(x1, eta(s, x2, phi1))))?
    };
    let grad_phi1 = norm(&cert.grad_phi1(x1)?);
    Ok(grad_v1 * integral + cert.psi(x)? * k * (1.0 + grad_phi1))
}

/// `ũ = (x₂ − φ₁(x₁))·[−c − (c/4)Δ²]`.
pub fn eval_tilde_u(cert: &BacksteppingCertificate, x: &[f64], c: f64, delta: f64) -> Result<f64> {
    let (x1, x2) = split(x);
    let z = x2 - cert.phi1(x1)?;
    Ok(z * (-c - 0.25 * c * delta * delta))
}

/// The uncertain cross term
/// `Υ = ∂V₁·∫₀¹∂ₓ₂h₁(x₁, η(s), u)ds + k·h₂ − k·∂φ₁·h₁`.
pub fn eval_upsilon(
    plant: &PlantModel,
    cert: &BacksteppingCertificate,
    k: f64,
    x: &[f64],
    u: f64,
    quad: &UnitGaussLegendre,
) -> Result<f64> {
    let (x1, x2) = split(x);
    let phi1 = cert.phi1(x1)?;
    let grad_v1 = cert.grad_v1(x1)?;
    let mut integral = vec![0.0; x1.len()];
    for (s, w) in quad.nodes().iter().zip(quad.weights()) {
        let d = plant.dh1_dx2(&with_x2(x1, eta(*s, x2, phi1)), u)?;
        for (acc, v) in integral.iter_mut().zip(d) {
            *acc += w * v;
        }
    }
    let h1 = plant.h1_values(x, u)?;
    let h2 = plant.h2_value(x, u)?;
    let grad_phi1 = cert.grad_phi1(x1)?;
    Ok(dot(&grad_v1, &integral) + k * h2 - k * dot(&grad_phi1, &h1))
}

/// Sampled `ζ = max{V(x) : x ∈ A₁}` inflated by 5 %, with
/// `A₁ = {εα(V₁(x₁)) + (x₂ − φ₁(x₁))² ≤ εα(M) + 1}`.
///
/// For fixed `x₁` the maximum over `x₂` sits on the boundary of the `x₂`
/// slice, so only `x₁` is sampled.
pub fn compute_zeta(cert: &BacksteppingCertificate, k: f64, cfg: &SampleConfig) -> Result<f64> {
    let eps = cert.epsilon();
    let level = eps * cert.alpha(cert.m())? + 1.0;
    let g = |x1: &[f64]| -> Result<f64> { Ok(eps * cert.alpha(cert.v1(x1)?)?) };
    let (points, _) = sample_sublevel(&g, level, cert.dim() - 1, cfg.samples, cfg.seed)?;
    let mut best = 0.0f64;
    for p in &points {
        let slack = (level - g(p)?).max(0.0);
        best = best.max(cert.v1(p)? + 0.5 * k * slack);
    }
    Ok(SAMPLED_MAX_MARGIN * best)
}

const K_ALPHA_GRID: usize = 4001;

/// Lipschitz constant of `α` on `[0, ζ]`: the sampled max of `|α′|`, inflated
/// by 5 % unless `α′` is constant on the grid (then exact). Secant slopes between grid points
/// are included so kinks where `α′` is undefined are still bounded.
pub fn compute_k_alpha(cert: &BacksteppingCertificate, zeta: f64) -> Result<f64> {
    if !(zeta >= 0.0) {
        return Err(Error::InvalidParameter(format!("zeta must be >= 0, got {zeta}")));
    }
    let grid = linspace(0.0, zeta.max(f64::MIN_POSITIVE), K_ALPHA_GRID);
    let mut best = 0.0f64;
    let mut slopes = Vec::with_capacity(grid.len());
    for s in &grid {
        match cert.alpha_prime(*s) {
            Ok(d) if d.is_finite() => {
                best = best.max(d.abs());
                slopes.push(d);
            }
            _ => {}
        }
    }
    let affine = slopes.len() == grid.len() && slopes.windows(2).all(|w| w[0] == w[1]);
    if affine {
        return Ok(best);
    }
    for w in grid.windows(2) {
        let slope = (cert.alpha(w[1])? - cert.alpha(w[0])?) / (w[1] - w[0]);
        best = best.max(slope.abs());
    }
    Ok(SAMPLED_MAX_MARGIN * best)
}

/// `c_g = max{1/(ε[α(M + ã) − α(M)]), εkK_α/2, 1}`.
pub fn compute_c_g(
    epsilon: f64,
    alpha: impl Fn(f64) -> Result<f64>,
    m: f64,
    a_tilde: f64,
    k: f64,
    k_alpha: f64,
) -> Result<f64> {
    let gap = alpha(m + a_tilde)? - alpha(m)?;
    if !(gap > 0.0) {
        return Err(Error::Synthesis(format!(
            "alpha(M + a~) - alpha(M) = {gap} is not positive"
        )));
    }
    let t1 = 1.0 / (epsilon * gap);
    let t2 = epsilon * k * k_alpha / 2.0;
    Ok(t1.max(t2).max(1.0))
}

/// Which closed form of `φ_g` to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Cancels the `(x₂ − φ₁)` cross terms so that `V̇` reduces to
    /// `ε[α(M) − α(V₁)] + (x₂ − φ₁)(ũ + Υ)`.
    #[default]
    Derived,
    /// The worked example's printed law: `ũ` built from `x₁ − φ₁(x₁)` and a
    /// `+(1/2k)·∂V₁·∫∂ₓ₂f₁` term. Only defined for `n = 2`; kept for
    /// trajectory comparison.
    PaperLiteral,
}

/// How the gain `c` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CChoice {
    Fixed(f64),
    #[serde(with = "auto_tag")]
    Auto,
}

mod auto_tag {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(D::Error::custom(format!("expected a number or \"auto\", got {s:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub a: f64,
    pub c: CChoice,
    /// Use a numeric `c` as given even when it does not exceed `c_g`.
    pub force_c: bool,
    pub quad_order: usize,
    pub variant: Variant,
    pub a_prime: APrimeSearch,
    pub zeta: SampleConfig,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            a: 10.0,
            c: CChoice::Fixed(10.0),
            force_c: false,
            quad_order: 8,
            variant: Variant::Derived,
            a_prime: APrimeSearch::default(),
            zeta: SampleConfig {
                samples: 4000,
                seed: 0x7e7a,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalControllerParams {
    pub a: f64,
    pub a_prime: f64,
    pub a_tilde: f64,
    pub k: f64,
    pub c: f64,
    pub c_g: f64,
    #[serde(rename = "K_alpha")]
    pub k_alpha: f64,
    pub zeta: f64,
}

/// The synthesized global feedback `φ_g`.
#[derive(Debug, Clone)]
pub struct GlobalController {
    plant: Arc<PlantModel>,
    cert: Arc<BacksteppingCertificate>,
    params: GlobalControllerParams,
    quad: UnitGaussLegendre,
    variant: Variant,
    warnings: Vec<String>,
}

/// Build `φ_g` for the practical radius `opts.a`, computing `k`, `a′`, `ã`,
/// `ζ`, `K_α` and `c_g` along the way.
pub fn synthesize_phi_g(
    plant: Arc<PlantModel>,
    cert: Arc<BacksteppingCertificate>,
    opts: &SynthesisOptions,
) -> Result<GlobalController> {
    if plant.dim() != cert.dim() {
        return Err(Error::InvalidModel(format!(
            "plant has n = {} but certificate has n = {}",
            plant.dim(),
            cert.dim()
        )));
    }
    if opts.variant == Variant::PaperLiteral && plant.dim() != 2 {
        return Err(Error::InvalidParameter(
            "the paper-literal variant is only defined for n = 2".into(),
        ));
    }
    let m = cert.m();
    let a = opts.a;
    let k = compute_k(m, a)?;
    let a_prime = compute_a_prime(&cert, m, a, &opts.a_prime)?;
    let a_tilde = a.min(a_prime);
    let zeta = compute_zeta(&cert, k, &opts.zeta)?;
    let k_alpha = compute_k_alpha(&cert, zeta)?;
    let c_g = compute_c_g(cert.epsilon(), |s| cert.alpha(s), m, a_tilde, k, k_alpha)?;

    let mut warnings = Vec::new();
    let c = match opts.c {
        CChoice::Auto => 1.01 * c_g,
        CChoice::Fixed(c) if !(c > 0.0) => {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")))
        }
        CChoice::Fixed(c) if c > c_g => c,
        CChoice::Fixed(c) if opts.force_c => {
            warnings.push(format!("c = {c} does not exceed c_g = {c_g}; decrease of V is not guaranteed"));
            c
        }
        CChoice::Fixed(c) => {
            warnings.push(format!("c = {c} does not exceed c_g = {c_g}; raised to {}", 1.01 * c_g));
            1.01 * c_g
        }
    };
    let quad = UnitGaussLegendre::new(opts.quad_order)?;
    Ok(GlobalController {
        plant,
        cert,
        params: GlobalControllerParams {
            a,
            a_prime,
            a_tilde,
            k,
            c,
            c_g,
            k_alpha,
            zeta,
        },
        quad,
        variant: opts.variant,
        warnings,
    })
}

impl GlobalController {
    pub fn params(&self) -> &GlobalControllerParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn plant(&self) -> &Arc<PlantModel> {
        &self.plant
    }

    pub fn certificate(&self) -> &Arc<BacksteppingCertificate> {
        &self.cert
    }

    pub fn quadrature(&self) -> &UnitGaussLegendre {
        &self.quad
    }

    pub fn delta(&self, x: &[f64]) -> Result<f64> {
        eval_delta(&self.cert, self.params.k, x, &self.quad)
    }

    pub fn composite_v(&self, x: &[f64]) -> Result<f64> {
        self.cert.composite_v(self.params.k, x)
    }

    /// `φ_g(x)`. Fails with a contract violation where `f₂(x) = 0`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let GlobalControllerParams { k, c, .. } = self.params;
        let cert = &*self.cert;
        let (x1, x2) = split(x);
        let f2 = self.plant.f2_value(x)?;
        if f2 == 0.0 {
            return Err(Error::Contract(format!("f2 vanishes at {x:?}")));
        }
        let phi1 = cert.phi1(x1)?;
        let delta = self.delta(x)?;
        let grad_v1 = cert.grad_v1(x1)?;
        let grad_phi1 = cert.grad_phi1(x1)?;
        let f1 = self.plant.f1_values(x)?;

        let mut df1 = vec![0.0; x1.len()];
        for (s, w) in self.quad.nodes().iter().zip(self.quad.weights()) {
            let d = self.plant.df1_dx2(&with_x2(x1, eta(*s, x2, phi1)))?;
            for (acc, v) in df1.iter_mut().zip(d) {
                *acc += w * v;
            }
        }
        let cross = dot(&grad_v1, &df1);
        let gain = -c - 0.25 * c * delta * delta;
        let u = match self.variant {
            Variant::Derived => {
                let tilde_u = (x2 - phi1) * gain;
                tilde_u / k + dot(&grad_phi1, &f1) - cross / k
            }
            Variant::PaperLiteral => {
                let tilde_u = (x1[0] - phi1) * gain;
                tilde_u / k + dot(&grad_phi1, &f1) + cross / (2.0 * k)
            }
        };
        Ok(u / f2)
    }

    /// `φ_g` as a single formula over the state variables, available when
    /// `Ψ` and `∂f₁/∂x₂` do not depend on `x₂` (the `∫₀¹` terms then reduce to
    /// plain evaluation) and `n = 2`.
    pub fn closed_form(&self) -> Option<String> {
        let cert = &*self.cert;
        if self.plant.dim() != 2
            || cert.psi_expr().depends_on("x2")
            || self.plant.f1()[0].differentiate("x2").depends_on("x2")
        {
            return None;
        }
        let GlobalControllerParams { k, c, .. } = self.params;
        let dv1 = &cert.grad_v1_exprs()[0];
        let dphi1 = &cert.grad_phi1_exprs()[0];
        let phi1 = cert.phi1_expr();
        let psi = cert.psi_expr();
        let f1 = &self.plant.f1()[0];
        let df1 = f1.differentiate("x2");
        let f2 = self.plant.f2();
        let delta = format!("(abs({dv1})*({psi}) + ({psi})*{k:?}*(1 + abs({dphi1})))");
        let gain = format!("(-{c:?} - {:?}*{delta}^2)", 0.25 * c);
        let text = match self.variant {
            Variant::Derived => format!(
                "((x2 - ({phi1}))*{gain}/{k:?} + ({dphi1})*({f1}) - ({dv1})*({df1})/{k:?})/({f2})"
            ),
            Variant::PaperLiteral => format!(
                "((x1 - ({phi1}))*{gain}/{k:?} + ({dphi1})*({f1}) + ({dv1})*({df1})/{:?})/({f2})",
                2.0 * k
            ),
        };
        Some(text)
    }
}

impl Feedback for GlobalController {
    fn control(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backstepping::CertificateDefinition;
    use crate::expr::parse;
    use crate::plant::{paper_example, state_var_names};
    use crate::presets::{paper_certificate, PaperConstants};
    use std::collections::BTreeMap;

    #[test]
    fn covering_radius_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for dims in [2, 3] {
            let pts: Vec<Vec<f64>> = (0..300)
                .map(|_| (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let brute = (0..pts.len())
                .map(|i| {
                    (0..pts.len())
                        .filter(|&j| j != i)
                        .map(|j| distance(&pts[i], &pts[j]))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            assert_eq!(covering_radius(&pts), brute);
        }
    }

    fn quadratic_cert(phi1: &str, m: f64) -> BacksteppingCertificate {
        BacksteppingCertificate::new(
            2,
            CertificateDefinition {
                v1: "x1^2/2".into(),
                phi1: phi1.into(),
                alpha: "2*s".into(),
                psi: "0".into(),
                epsilon: 0.5,
                m,
            },
            &BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn k_examples() {
        let k = compute_k(1.25e-4, 10.0).unwrap();
        assert!((k - 0.2000025).abs() < 1e-15);
        assert_eq!(compute_k(1.0, 1.0).unwrap(), 4.0);
        for a in [0.5, 2.0, 7.0] {
            assert!((compute_k(a, a).unwrap() - 4.0 / a).abs() < 1e-15);
        }
        assert!(compute_k(0.0, 1.0).is_err());
        assert!(compute_k(1.0, -1.0).is_err());
    }

    #[test]
    fn a_prime_caps_at_a_for_wide_margin() {
        // {x²/2 <= M + a'} = |x| <= sqrt(2(M + a')); it stays within a = 10 of
        // |x| <= sqrt(2M) for a' up to ~50, so the capped answer is a itself.
        let cert = quadratic_cert("-x1", 1.25e-4);
        let ap = compute_a_prime(&cert, 1.25e-4, 10.0, &APrimeSearch::default()).unwrap();
        assert_eq!(ap, 10.0);
    }

    #[test]
    fn a_prime_interval_oracle() {
        // M = 0, a = 1: sqrt(2a') <= 1 holds exactly up to a' = 1/2.
        let cert = quadratic_cert("-x1", 1.0);
        let ap = compute_a_prime(&cert, 0.0, 1.0, &APrimeSearch::default()).unwrap();
        assert_eq!(ap, 0.5);
        // a = 0.3: interval oracle gives a' <= 0.045, grid answer is 0.3/8.
        let ap = compute_a_prime(&cert, 0.0, 0.3, &APrimeSearch::default()).unwrap();
        assert!((ap - 0.0375).abs() < 1e-15);
        assert!((2.0 * ap).sqrt() <= 0.3);
    }

    #[test]
    fn tilde_u_vanishes_on_manifold_and_dissipates() {
        let cert = paper_certificate(&PaperConstants::published()).unwrap();
        let x1 = 0.8;
        let on = [x1, cert.phi1(&[x1]).unwrap()];
        assert_eq!(eval_tilde_u(&cert, &on, 10.0, 3.0).unwrap(), 0.0);
        for x in [[0.5, 0.1], [-2.0, 4.0], [3.0, -9.0]] {
            let z = x[1] - cert.phi1(&x[..1]).unwrap();
            let tu = eval_tilde_u(&cert, &x, 10.0, 0.7).unwrap();
            assert!(tu * z <= 0.0);
            assert!((tu * z + 10.0 * z * z * (1.0 + 0.49 / 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_at_origin() {
        let pc = PaperConstants::published();
        let cert = paper_certificate(&pc).unwrap();
        let q = UnitGaussLegendre::new(8).unwrap();
        let d = eval_delta(&cert, 0.2, &[0.0, 0.0], &q).unwrap();
        // θ·k·(2 + c₁)
        assert!((d - 1e-3 * 0.2 * 3.002).abs() < 1e-15);
        assert!((d - 6.004e-4).abs() < 1e-12);
    }

    #[test]
    fn delta_vanishes_without_perturbation() {
        let cert = quadratic_cert("-x1 - x1^2", 1.0);
        let q = UnitGaussLegendre::new(4).unwrap();
        for x in [[0.0, 0.0], [1.0, -3.0], [-7.0, 2.0]] {
            assert_eq!(eval_delta(&cert, 0.4, &x, &q).unwrap(), 0.0);
        }
    }

    #[test]
    fn delta_quadrature_is_exact_for_polynomial_psi() {
        // Ψ = 1 + x2² + x2⁴ + x2⁵: degree 5 is exact for order 3.
        // With φ₁ = 0, η(s) = s·x2 and ∫₀¹Ψ = 1 + x2²/3 + x2⁴/5 + x2⁵/6.
        let cert = BacksteppingCertificate::new(
            2,
            CertificateDefinition {
                v1: "x1^2/2".into(),
                phi1: "0*x1".into(),
                alpha: "s".into(),
                psi: "1 + x2^2 + x2^4 + x2^5".into(),
                epsilon: 0.5,
                m: 1.0,
            },
            &BTreeMap::new(),
        )
        .unwrap();
        let q = UnitGaussLegendre::new(3).unwrap();
        let (x1, x2, k): (f64, f64, f64) = (1.5, -1.3, 0.7);
        let integral = 1.0 + x2.powi(2) / 3.0 + x2.powi(4) / 5.0 + x2.powi(5) / 6.0;
        let psi = 1.0 + x2.powi(2) + x2.powi(4) + x2.powi(5);
        let want = x1.abs() * integral + psi * k * 1.0;
        let got = eval_delta(&cert, k, &[x1, x2], &q).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn upsilon_closed_form_for_paper_example() {
        let pc = PaperConstants::published();
        let plant = paper_example(pc.theta).unwrap();
        let cert = paper_certificate(&pc).unwrap();
        let q = UnitGaussLegendre::new(8).unwrap();
        let k = 0.2;
        for (x, u) in [([0.5, 0.1], 1.0f64), ([-3.0, 2.0], -0.3), ([10.0, -1.0], 2.5)] {
            let x1: f64 = x[0];
            let dphi1 = -(1.0 + pc.c1) - 2.0 * pc.theta * x1;
            let want = -k * dphi1 * pc.theta * (1.0 + x1) * u.sin();
            let got = eval_upsilon(&plant, &cert, k, &x, u, &q).unwrap();
            assert!((got - want).abs() < 1e-15 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn k_alpha_examples() {
        let pc = PaperConstants::published();
        let cert = paper_certificate(&pc).unwrap();
        assert_eq!(compute_k_alpha(&cert, 0.5).unwrap(), 2.0 * pc.c1);
        assert_eq!(compute_k_alpha(&cert, 50.0).unwrap(), 2.0 * pc.c1);

        let sq = BacksteppingCertificate::new(
            2,
            CertificateDefinition {
                v1: "x1^2/2".into(),
                phi1: "-x1".into(),
                alpha: "s^2 + s".into(),
                psi: "0".into(),
                epsilon: 0.5,
                m: 1.0,
            },
            &BTreeMap::new(),
        )
        .unwrap();
        // α = s² + s, α′(2) = 5
        assert!((compute_k_alpha(&sq, 2.0).unwrap() - 5.0 * 1.05).abs() < 1e-12);
    }

    #[test]
    fn k_alpha_handles_kinks() {
        let cert = BacksteppingCertificate::new(
            2,
            CertificateDefinition {
                v1: "x1^2/2".into(),
                phi1: "-x1".into(),
                alpha: "s + (abs(s - 1) - 1)/2".into(),
                psi: "0".into(),
                epsilon: 0.5,
                m: 1.0,
            },
            &BTreeMap::new(),
        )
        .unwrap();
        assert!((compute_k_alpha(&cert, 2.0).unwrap() - 1.5 * 1.05).abs() < 1e-9);
    }

    #[test]
    fn c_g_examples() {
        let pc = PaperConstants::published();
        let alpha = |s: f64| Ok(2.0 * pc.c1 * s);
        let k = compute_k(pc.m, 10.0).unwrap();
        let cg = compute_c_g(pc.epsilon, alpha, pc.m, 10.0, k, 2.0 * pc.c1).unwrap();
        assert_eq!(cg, 1.0);
        let t1 = 1.0 / (pc.epsilon * 2.0 * pc.c1 * 10.0);
        assert!((t1 - 0.05).abs() < 1e-5);
        let big = compute_c_g(pc.epsilon, alpha, pc.m, 10.0, k, 1e6).unwrap();
        assert_eq!(big, pc.epsilon * k * 1e6 / 2.0);
        assert!(compute_c_g(0.5, |_| Ok(1.0), 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zeta_grid_oracle() {
        let pc = PaperConstants::published();
        let cert = paper_certificate(&pc).unwrap();
        let k = compute_k(pc.m, 10.0).unwrap();
        let zeta = compute_zeta(&cert, k, &SampleConfig::default()).unwrap();
        // 2-D grid over (x1, x2) covering A1, straight from its definition.
        let level = pc.epsilon * 2.0 * pc.c1 * pc.m + 1.0;
        let mut best = 0.0f64;
        let n = 1201;
        for i in 0..n {
            let x1 = -1.2 + 2.4 * i as f64 / (n - 1) as f64;
            let phi = -(1.0 + pc.c1) * x1 - pc.theta * x1 * x1;
            for j in 0..n {
                let x2 = phi - 1.2 + 2.4 * j as f64 / (n - 1) as f64;
                let z = x2 - phi;
                if pc.epsilon * 2.0 * pc.c1 * 0.5 * x1 * x1 + z * z <= level {
                    best = best.max(0.5 * x1 * x1 + 0.5 * k * z * z);
                }
            }
        }
        assert!(best > 0.49 && best < 0.51, "{best}");
        assert!((zeta / 1.05 - best).abs() < 2e-3 * best, "{zeta} vs {best}");
        assert!(zeta / 1.05 >= best);
    }

    #[test]
    fn zeta_small_m_limit() {
        // α linear, M → 0: A1 → {εα(V1) + z² <= 1}
        let cert = quadratic_cert("-x1", 1e-8);
        let k = 0.5;
        let zeta = compute_zeta(&cert, k, &SampleConfig::default()).unwrap();
        // V1 + (k/2)(1 - εα(V1)) with εα(V1) = V1 = x²/2 <= 1: max over t∈[0,1]
        // of t + (k/2)(1 - t) = 1 at t = 1.
        assert!((zeta / 1.05 - 1.0).abs() < 1e-6);
        assert!(zeta >= 0.0);
    }

    fn paper_controller(variant: Variant) -> GlobalController {
        let pc = PaperConstants::published();
        let plant = Arc::new(paper_example(pc.theta).unwrap());
        let cert = Arc::new(paper_certificate(&pc).unwrap());
        synthesize_phi_g(
            plant,
            cert,
            &SynthesisOptions {
                variant,
                ..SynthesisOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn paper_synthesis_constants() {
        let pc = PaperConstants::published();
        let g = paper_controller(Variant::Derived);
        let p = g.params();
        assert!((p.k - 0.2000025).abs() < 1e-15);
        assert_eq!(p.a_tilde, 10.0);
        assert_eq!(p.k_alpha, 2.0 * pc.c1);
        assert_eq!(p.c_g, 1.0);
        assert_eq!(p.c, 10.0);
        assert!(g.warnings().is_empty());
    }

    #[test]
    fn phi_g_vanishes_at_origin() {
        assert_eq!(paper_controller(Variant::Derived).eval(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_matches_evaluation() {
        for variant in [Variant::Derived, Variant::PaperLiteral] {
            let g = paper_controller(variant);
            let text = g.closed_form().unwrap();
            let e = parse(&text, &state_var_names(2)).unwrap();
            for x in [[0.5, 0.1], [-3.0, 2.0], [1.7, -4.4]] {
                let a = g.eval(&x).unwrap();
                let b = e.eval_at(&x).unwrap();
                assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{variant:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn auto_and_forced_c() {
        let pc = PaperConstants::published();
        let plant = Arc::new(paper_example(pc.theta).unwrap());
        let cert = Arc::new(paper_certificate(&pc).unwrap());
        let auto = synthesize_phi_g(
            plant.clone(),
            cert.clone(),
            &SynthesisOptions {
                c: CChoice::Auto,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(auto.params().c, 1.01);
        let raised = synthesize_phi_g(
            plant.clone(),
            cert.clone(),
            &SynthesisOptions {
                c: CChoice::Fixed(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(raised.params().c, 1.01);
        assert_eq!(raised.warnings().len(), 1);
        let forced = synthesize_phi_g(
            plant,
            cert,
            &SynthesisOptions {
                c: CChoice::Fixed(0.5),
                force_c: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(forced.params().c, 0.5);
        assert_eq!(forced.warnings().len(), 1);
    }

    #[test]
    fn vanishing_f2_is_a_contract_violation() {
        let pc = PaperConstants::published();
        let mut def = crate::plant::paper_example_definition(pc.theta);
        def.f2 = "x1".into();
        let plant = Arc::new(PlantModel::new(def).unwrap());
        let cert = Arc::new(paper_certificate(&pc).unwrap());
        let g = synthesize_phi_g(plant, cert, &SynthesisOptions::default()).unwrap();
        assert!(matches!(g.eval(&[0.0, 1.0]), Err(Error::Contract(_))));
        assert!(g.eval(&[0.5, 1.0]).is_ok());
    }

    #[test]
    fn c_choice_serde() {
        let auto: CChoice = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, CChoice::Auto);
        let fixed: CChoice = serde_json::from_str("10").unwrap();
        assert_eq!(fixed, CChoice::Fixed(10.0));
        assert_eq!(serde_json::to_string(&CChoice::Auto).unwrap(), "\"auto\"");
        assert!(serde_json::from_str::<CChoice>("\"often\"").is_err());
    }
}
