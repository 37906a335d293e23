//! Run configuration: the JSON document consumed by the command-line tool,
//! `key=value` overrides, and assembly of the objects it describes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backstepping::{
    classical_backstepping, synthesize_phi_g, BacksteppingCertificate, CertificateDefinition,
    GlobalController, SynthesisOptions,
};
use crate::error::{Error, Result};
use crate::feedback::{ExprFeedback, Feedback};
use crate::hybrid::{ConstantMode, HybridController, IntegratorConfig};
use crate::hysteresis::{HysteresisController, LocalCertificate, LocalDefinition, Mode};
use crate::plant::{
    paper_example_definition, preliminary_example_definition, PlantDefinition, PlantModel,
};
use crate::presets::{
    paper_certificate_definition, paper_local_definition, PaperConstants, PUBLISHED_RHO,
    PUBLISHED_THETA,
};
use crate::verify::Assumption2Domain;

/// A built-in plant name or an explicit definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    Preset(String),
    Definition(PlantDefinition),
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec::Preset("paper_example".into())
    }
}

impl PlantSpec {
    pub fn resolve(&self, theta: f64) -> Result<PlantDefinition> {
        match self {
            PlantSpec::Definition(d) => Ok(d.clone()),
            PlantSpec::Preset(name) => preset_definition(name, theta),
        }
    }

    pub fn is_preset(&self) -> bool {
        matches!(self, PlantSpec::Preset(_))
    }
}

fn preset_definition(name: &str, theta: f64) -> Result<PlantDefinition> {
    match name {
        "paper_example" => Ok(paper_example_definition(theta)),
        "preliminary_example" => Ok(preliminary_example_definition(theta)),
        other => Err(Error::InvalidModel(format!(
            "unknown plant preset {other:?} (expected \"paper_example\" or \"preliminary_example\")"
        ))),
    }
}

/// Which feedback drives the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Two-mode switching between `φ_ℓ` and `φ_g`.
    #[default]
    Hysteresis,
    /// `φ_g` alone.
    Global,
    /// `φ_ℓ` alone.
    Local,
    /// Textbook backstepping for the unperturbed example.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalGains {
    pub c1: f64,
    pub c2: f64,
}

impl Default for ClassicalGains {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub x: Vec<f64>,
    pub q: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub domain: Assumption2Domain,
    /// Initial conditions per axis for the empirical reachability check.
    pub grid: usize,
    /// Half-width of the box that grid spans.
    pub grid_half_width: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0x5eed,
            domain: Assumption2Domain::default(),
            grid: 5,
            grid_half_width: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            prefix: "run".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantSpec,
    /// Perturbation size for the built-in plants.
    pub theta: f64,
    /// Constant in the example's certificate (`c₁`, `ε`, `M` follow from it).
    pub rho: f64,
    /// Extra named constants available to every expression.
    pub params: BTreeMap<String, f64>,
    pub certificate: Option<CertificateDefinition>,
    pub local: Option<LocalDefinition>,
    pub synthesis: SynthesisOptions,
    pub controller: ControllerKind,
    pub classical: ClassicalGains,
    pub integrator: IntegratorConfig,
    pub initial_conditions: Vec<InitialCondition>,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pc = PaperConstants::published();
        Self {
            plant: PlantSpec::default(),
            theta: PUBLISHED_THETA,
            rho: PUBLISHED_RHO,
            params: BTreeMap::new(),
            certificate: None,
            local: None,
            synthesis: SynthesisOptions::default(),
            controller: ControllerKind::default(),
            classical: ClassicalGains::default(),
            integrator: IntegratorConfig::default(),
            initial_conditions: vec![InitialCondition {
                x: pc.x0.to_vec(),
                q: Mode::Local,
            }],
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides::<&str>(Some(path), &[])
    }

    /// Reads `path` (or the defaults when `None`) and applies `key=value`
    /// overrides before deserializing.
    pub fn load_with_overrides<S: AsRef<str>>(path: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let mut value = match path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => serde_json::to_value(RunConfig::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o.as_ref())?;
        }
        Self::from_value(value)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if let Some(l) = &self.local {
            if !(0.0 < l.v_ell_tilde && l.v_ell_tilde < l.v_ell_level) {
                return Err(Error::InvalidParameter(format!(
                    "need 0 < v_ell_tilde < v_ell, got {} and {}",
                    l.v_ell_tilde, l.v_ell_level
                )));
            }
        }
        if self.verify.samples == 0 {
            return Err(Error::InvalidParameter("verify.samples must be positive".into()));
        }
        Ok(())
    }

    pub fn paper_constants(&self) -> PaperConstants {
        let mut pc = PaperConstants::from_theta_rho(self.theta, self.rho);
        if self.theta == PUBLISHED_THETA && self.rho == PUBLISHED_RHO {
            pc.v_ell = PaperConstants::published().v_ell;
        }
        pc
    }

    pub fn initial_states(&self) -> Vec<(Vec<f64>, Mode)> {
        self.initial_conditions.iter().map(|ic| (ic.x.clone(), ic.q)).collect()
    }

    /// Parses every expression and assembles the objects the run needs.
    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        let pc = self.paper_constants();
        let mut plant_def = self.plant.resolve(self.theta)?;
        let mut params = pc.params();
        params.extend(plant_def.params.clone());
        params.extend(self.params.clone());
        plant_def.params = params.clone();
        let plant = Arc::new(PlantModel::new(plant_def)?);
        let n = plant.dim();

        let cert_def = match (&self.certificate, self.plant.is_preset()) {
            (Some(d), _) => Some(d.clone()),
            (None, true) => Some(paper_certificate_definition(&pc)),
            (None, false) => None,
        };
        let certificate = cert_def
            .map(|d| BacksteppingCertificate::new(n, d, &params).map(Arc::new))
            .transpose()?;
        let local_def = match (&self.local, self.plant.is_preset()) {
            (Some(d), _) => Some(d.clone()),
            (None, true) => Some(paper_local_definition(&pc)),
            (None, false) => None,
        };
        let local = local_def
            .as_ref()
            .map(|d| LocalCertificate::new(n, d, &params).map(Arc::new))
            .transpose()?;
        Ok(Scenario {
            config: self.clone(),
            params,
            plant,
            certificate,
            local,
            v_ell_tilde: local_def.map(|d| d.v_ell_tilde),
        })
    }
}

/// Sets `path=value` in a JSON document. `path` is dot-separated; `value`
/// is read as JSON when it parses, otherwise as a string. A built-in plant
/// name is expanded into its definition before one of its fields is set.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::InvalidParameter(format!("bad override key {path:?}")));
    }
    if !doc.is_object() {
        return Err(Error::InvalidParameter("configuration is not a JSON object".into()));
    }
    let theta = doc.get("theta").and_then(Value::as_f64).unwrap_or(PUBLISHED_THETA);
    let rho = doc.get("rho").and_then(Value::as_f64).unwrap_or(PUBLISHED_RHO);
    let mut pc = PaperConstants::from_theta_rho(theta, rho);
    if theta == PUBLISHED_THETA && rho == PUBLISHED_RHO {
        pc = PaperConstants::published();
    }
    let plant_is_preset = !matches!(doc.get("plant"), Some(Value::Object(_)));
    let expand = keys.len() > 1 && ["plant", "local", "certificate"].contains(&keys[0]);
    if expand && plant_is_preset {
        // Write out the preset so a single field can be replaced; the
        // certificates it implies become explicit at the same time.
        let name = doc.get("plant").and_then(Value::as_str).unwrap_or("paper_example").to_string();
        doc["plant"] = serde_json::to_value(preset_definition(&name, theta)?)?;
        if doc.get("certificate").is_none_or(Value::is_null) {
            doc["certificate"] = serde_json::to_value(paper_certificate_definition(&pc))?;
        }
        if doc.get("local").is_none_or(Value::is_null) {
            doc["local"] = serde_json::to_value(paper_local_definition(&pc))?;
        }
    }
    let mut cur = doc;
    for key in &keys[..keys.len() - 1] {
        if !cur.is_object() {
            return Err(Error::InvalidParameter(format!("override path {path:?} is not an object")));
        }
        cur = cur
            .as_object_mut()
            .expect("checked")
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let last = keys[keys.len() - 1];
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| Error::InvalidParameter(format!("override path {path:?} is not an object")))?;
    let raw = raw.trim();
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.into()));
    // Expression fields stay strings even when the text looks numeric.
    let value = match (obj.get(last), &parsed) {
        (Some(Value::String(_)), v) if !v.is_string() => Value::String(raw.into()),
        _ => parsed,
    };
    obj.insert(last.to_string(), value);
    Ok(())
}

/// Everything a configuration describes, parsed and ready to run.
#[derive(Clone)]
pub struct Scenario {
    pub config: RunConfig,
    pub params: BTreeMap<String, f64>,
    pub plant: Arc<PlantModel>,
    pub certificate: Option<Arc<BacksteppingCertificate>>,
    pub local: Option<Arc<LocalCertificate>>,
    pub v_ell_tilde: Option<f64>,
}

impl Scenario {
    pub fn require_certificate(&self) -> Result<&Arc<BacksteppingCertificate>> {
        self.certificate
            .as_ref()
            .ok_or_else(|| Error::InvalidModel("configuration has no \"certificate\"".into()))
    }

    pub fn require_local(&self) -> Result<&Arc<LocalCertificate>> {
        self.local
            .as_ref()
            .ok_or_else(|| Error::InvalidModel("configuration has no \"local\" certificate".into()))
    }

    pub fn global_controller(&self) -> Result<GlobalController> {
        synthesize_phi_g(
            self.plant.clone(),
            self.require_certificate()?.clone(),
            &self.config.synthesis,
        )
    }

    pub fn hysteresis_controller(&self, global: Arc<dyn Feedback>) -> Result<HysteresisController> {
        let tilde = self
            .v_ell_tilde
            .ok_or_else(|| Error::InvalidModel("configuration has no \"local\" certificate".into()))?;
        HysteresisController::new(self.require_local()?.clone(), global, tilde)
    }

    /// The feedback law selected by `controller`, plus the synthesized `φ_g`
    /// when one was built.
    pub fn controller(&self) -> Result<(Box<dyn HybridController>, Option<Arc<GlobalController>>)> {
        match self.config.controller {
            ControllerKind::Hysteresis => {
                let g = Arc::new(self.global_controller()?);
                let ctrl = self.hysteresis_controller(g.clone())?;
                Ok((Box::new(ctrl), Some(g)))
            }
            ControllerKind::Global => {
                let g = Arc::new(self.global_controller()?);
                Ok((Box::new(ConstantMode::new(g.clone())), Some(g)))
            }
            ControllerKind::Local => {
                let local = self.require_local()?;
                let fb = ExprFeedback::new(local.phi_ell.clone());
                Ok((Box::new(ConstantMode::new(Arc::new(fb))), None))
            }
            ControllerKind::Classical => {
                let c = &self.config.classical;
                let cb = classical_backstepping(&self.plant, self.config.theta, c.c1, c.c2)?;
                Ok((Box::new(ConstantMode::new(Arc::new(cb.feedback))), None))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(RunConfig::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn custom_round_trip() {
        let text = r#"{
            "plant": {"n": 2, "params": {"g": 0.5}, "f1": ["x1 + x2"], "f2": "2",
                      "h1": ["g*sin(u)*1e-3"], "h2": "0"},
            "certificate": {"V1": "x1^2/2", "phi1": "-2*x1", "alpha": "2*s",
                            "Psi": "1e-3", "epsilon": 0.5, "M": 0.01},
            "local": {"V_ell": "x1^2 + x2^2", "phi_ell": "-x1 - x2", "v_ell": 1, "v_ell_tilde": 0.5},
            "synthesis": {"a": 1, "c": "auto", "quad_order": 6},
            "initial_conditions": [{"x": [1, 2], "q": 2}],
            "output": {"dir": "elsewhere"}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
        let s = cfg.build().unwrap();
        assert_eq!(s.params["g"], 0.5);
        assert_eq!(cfg.initial_conditions[0].q, Mode::Global);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json(r#"{"plnt": "paper_example"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"plant": "nope"}"#).unwrap().build().is_err());
        let inverted = r#"{"local": {"V_ell": "x1^2", "phi_ell": "0", "v_ell": 0.1, "v_ell_tilde": 0.2}}"#;
        assert!(RunConfig::from_json(inverted).is_err());
        assert!(RunConfig::from_json(r#"{"initial_conditions": [{"x": [0, 0], "q": 3}]}"#).is_err());
    }

    #[test]
    fn overrides() {
        let cfg = RunConfig::load_with_overrides(
            None,
            &["plant.f2=x1", "local.phi_ell=0", "local.v_ell=1e-5", "local.v_ell_tilde=5e-6", "synthesis.c=auto"],
        )
        .unwrap();
        match &cfg.plant {
            PlantSpec::Definition(d) => {
                assert_eq!(d.f2, "x1");
                assert_eq!(d.f1, paper_example_definition(1e-3).f1);
            }
            _ => panic!("plant not expanded"),
        }
        let l = cfg.local.as_ref().unwrap();
        assert_eq!(l.phi_ell, "0");
        assert!(cfg.certificate.is_some());
        assert_eq!(l.v_ell_level, 1e-5);
        assert_eq!(cfg.synthesis.c, crate::backstepping::CChoice::Auto);
        assert!(RunConfig::load_with_overrides(None, &["theta"]).is_err());
    }

    #[test]
    fn builds_paper_scenario() {
        let s = RunConfig::default().build().unwrap();
        assert_eq!(s.plant.dim(), 2);
        assert!(s.certificate.is_some() && s.local.is_some());
        assert_eq!(s.local.as_ref().unwrap().level, 0.1042);
        let (ctrl, g) = s.controller().unwrap();
        assert!(g.is_some());
        assert!(ctrl.guard(Mode::Local, &[0.5, 0.1]).unwrap() > 0.0);
    }
}
