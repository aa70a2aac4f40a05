//! Sectioned TOML run configuration.
//!
//! Every section is optional and every key has a default, so the smallest
//! useful file names only what differs. Unknown keys are rejected with
//! their name, and numeric ranges are checked after defaults are filled.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Layer,
    Ode,
    Pde,
    Scenario,
    Analyze,
    Verify,
}

/// Interaction constant: a number, or the string `"from-layer"` to use the
/// layer's `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Value(f64),
    Tag(String),
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Tag("from-layer".into())
    }
}

impl GammaSpec {
    pub fn is_from_layer(&self) -> bool {
        matches!(self, GammaSpec::Tag(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub amplitude: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            amplitude: 1.0 / (4.0 * std::f64::consts::PI),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FracopSection {
    pub r0_cells: usize,
    /// Far-field radius; absent means `max(100, 10·half-width)` of the grid.
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub outer_radius: Option<f64>,
    pub tol: f64,
}

impl Default for FracopSection {
    fn default() -> Self {
        FracopSection {
            r0_cells: 2,
            outer_radius: None,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerSection {
    pub half_width: f64,
    pub dx: f64,
    pub tol: f64,
    pub corrector: bool,
}

impl Default for LayerSection {
    fn default() -> Self {
        LayerSection {
            half_width: 20.0,
            dx: 0.05,
            tol: 1e-10,
            corrector: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeSection {
    /// Optional consistency check on the number of particles.
    pub n: Option<usize>,
    pub positions: Vec<f64>,
    pub orientations: Vec<i8>,
    pub gamma: GammaSpec,
    pub sigma: f64,
    pub delta: f64,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Time window of the separation-law fit; empty skips the fit.
    pub fit_window: Vec<f64>,
}

impl Default for OdeSection {
    fn default() -> Self {
        OdeSection {
            n: None,
            positions: vec![-0.5, 0.5],
            orientations: vec![1, -1],
            gamma: GammaSpec::default(),
            sigma: 0.0,
            delta: 0.0,
            t_end: 1.0,
            rtol: 1e-10,
            atol: 1e-12,
            fit_window: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSection {
    pub epsilon: f64,
    pub centers: Vec<f64>,
    pub orientations: Vec<i8>,
    pub sigma: f64,
    pub t_end: f64,
    pub dx_rel: f64,
    pub margin: f64,
    pub dt_safety: f64,
    pub snapshot_times: Vec<f64>,
    pub track_every: usize,
}

impl Default for PdeSection {
    fn default() -> Self {
        PdeSection {
            epsilon: 0.1,
            centers: vec![-0.5, 0.5],
            orientations: vec![1, -1],
            sigma: 0.0,
            t_end: 0.1,
            dx_rel: 0.1,
            margin: 20.0,
            dt_safety: 0.9,
            snapshot_times: Vec::new(),
            track_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub kind: String,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            kind: "balanced".into(),
            n: 2,
            k: 1,
            epsilon: 0.1,
            sigma: 0.0,
            horizon: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Command,
    pub output: PathBuf,
    pub seed: u64,
    /// Order of the fractional operator, shared by every section.
    pub s: f64,
    pub potential: PotentialSection,
    pub fracop: FracopSection,
    pub layer: LayerSection,
    pub ode: OdeSection,
    pub pde: PdeSection,
    pub scenario: ScenarioSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Layer,
            output: PathBuf::from("dislocade-out"),
            seed: 7,
            s: 0.5,
            potential: PotentialSection::default(),
            fracop: FracopSection::default(),
            layer: LayerSection::default(),
            ode: OdeSection::default(),
            pde: PdeSection::default(),
            scenario: ScenarioSection::default(),
        }
    }
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg.into()))
    }
}

fn check_orientations(section: &str, z: &[i8], x: &[f64]) -> Result<(), ConfigError> {
    check(!x.is_empty(), format!("{section}: at least one position is required"))?;
    check(
        z.len() == x.len(),
        format!("{section}: {} orientations for {} positions", z.len(), x.len()),
    )?;
    check(
        z.iter().all(|v| *v == 1 || *v == -1),
        format!("{section}.orientations must be +1 or -1"),
    )?;
    check(
        x.windows(2).all(|w| w[0] < w[1]),
        format!("{section}: positions must be strictly increasing"),
    )
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.s > 0.0 && self.s < 1.0, format!("s must lie in (0,1), got {}", self.s))?;
        check(
            self.potential.amplitude > 0.0,
            format!("potential.amplitude must be positive, got {}", self.potential.amplitude),
        )?;
        check(self.fracop.r0_cells >= 1, "fracop.r0_cells must be at least 1")?;
        check(self.fracop.outer_radius.map_or(true, |r| r > 0.0), "fracop.R must be positive")?;
        check(self.fracop.tol > 0.0, "fracop.tol must be positive")?;
        let l = &self.layer;
        check(l.half_width >= 20.0, format!("layer.half_width must be at least 20, got {}", l.half_width))?;
        check(l.dx > 0.0 && l.dx <= 0.05, format!("layer.dx must lie in (0, 0.05], got {}", l.dx))?;
        check(l.tol >= 1e-10, format!("layer.tol must be at least 1e-10, got {}", l.tol))?;
        let o = &self.ode;
        check_orientations("ode", &o.orientations, &o.positions)?;
        if let Some(n) = o.n {
            check(n == o.positions.len(), format!("ode.n = {n} but {} positions given", o.positions.len()))?;
        }
        match &o.gamma {
            GammaSpec::Value(g) => check(*g > 0.0, format!("ode.gamma must be positive, got {g}"))?,
            GammaSpec::Tag(t) => check(t == "from-layer", format!("ode.gamma must be a number or \"from-layer\", got {t:?}"))?,
        }
        check(o.delta >= 0.0, "ode.delta must be nonnegative")?;
        check(o.t_end > 0.0, "ode.t_end must be positive")?;
        check(o.rtol > 0.0 && o.atol > 0.0, "ode tolerances must be positive")?;
        check(
            o.fit_window.is_empty() || (o.fit_window.len() == 2 && 0.0 <= o.fit_window[0] && o.fit_window[0] < o.fit_window[1]),
            "ode.fit_window must be empty or [t0, t1] with 0 ≤ t0 < t1",
        )?;
        let p = &self.pde;
        check(
            p.epsilon >= 0.02 && p.epsilon < 1.0,
            format!("pde.epsilon must lie in [0.02, 1), got {}", p.epsilon),
        )?;
        check_orientations("pde", &p.orientations, &p.centers)?;
        check(p.t_end > 0.0, "pde.t_end must be positive")?;
        check(p.dx_rel > 0.0 && p.dx_rel <= 0.125, format!("pde.dx_rel must lie in (0, 1/8], got {}", p.dx_rel))?;
        check(p.margin > 0.0, "pde.margin must be positive")?;
        check(p.dt_safety > 0.0 && p.dt_safety <= 1.0, "pde.dt_safety must lie in (0, 1]")?;
        let sc = &self.scenario;
        check(
            matches!(sc.kind.as_str(), "segregate" | "balanced" | "unbalanced"),
            format!("scenario.kind must be segregate, balanced or unbalanced, got {:?}", sc.kind),
        )?;
        check(sc.n >= 1 && sc.n <= 8, format!("scenario.n must lie in [1, 8], got {}", sc.n))?;
        check(sc.k <= sc.n, format!("scenario.k = {} exceeds n = {}", sc.k, sc.n))?;
        check(
            sc.epsilon >= 0.02 && sc.epsilon < 1.0,
            format!("scenario.epsilon must lie in [0.02, 1), got {}", sc.epsilon),
        )?;
        check(sc.horizon > 0.0, "scenario.horizon must be positive")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }
}

/// Deep merge of `top` over `base`: tables merge key by key, anything else is replaced.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn describe(e: toml::de::Error) -> ConfigError {
    let msg = e.message().to_string();
    ConfigError(msg.lines().next().unwrap_or("malformed configuration").to_string())
}

/// Parses configuration text over `base`, then validates.
pub fn parse_config_str(text: &str, base: &RunConfig) -> Result<RunConfig, ConfigError> {
    let top: toml::Value = toml::from_str(text).map_err(describe)?;
    let mut merged = toml::Value::try_from(base).map_err(|e| ConfigError(e.to_string()))?;
    merge(&mut merged, top);
    let cfg: RunConfig = merged.try_into().map_err(describe)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a configuration file over `base` (typically the defaults with
/// command-line flags applied); keys in the file take precedence.
pub fn parse_config(path: Option<&Path>, base: &RunConfig) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            parse_config_str(&text, base)
        }
        None => {
            base.validate()?;
            Ok(base.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ode_config_gets_defaults() {
        let base = RunConfig {
            command: Command::Ode,
            ..RunConfig::default()
        };
        let cfg = parse_config_str("[ode]\nn = 2\npositions = [0.0, 2.0]\norientations = [1, 1]\n", &base).unwrap();
        assert_eq!(cfg.s, 0.5);
        assert!(cfg.ode.gamma.is_from_layer());
        assert_eq!(cfg.ode.positions, vec![0.0, 2.0]);
        assert_eq!(cfg.command, Command::Ode);
    }

    #[test]
    fn out_of_range_order_is_reported() {
        let e = parse_config_str("s = 1.5\n", &RunConfig::default()).unwrap_err();
        assert!(e.0.contains("s must lie in (0,1)"), "{e}");
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse_config_str("[pde]\nepsilonn = 0.1\n", &RunConfig::default()).unwrap_err();
        assert!(e.0.contains("epsilonn"), "{e}");
        let e = parse_config_str("bogus = 1\n", &RunConfig::default()).unwrap_err();
        assert!(e.0.contains("bogus"), "{e}");
    }

    #[test]
    fn gamma_accepts_number_or_tag() {
        let cfg = parse_config_str("[ode]\ngamma = 6.0\n", &RunConfig::default()).unwrap();
        assert_eq!(cfg.ode.gamma, GammaSpec::Value(6.0));
        assert!(parse_config_str("[ode]\ngamma = \"guess\"\n", &RunConfig::default()).is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let d = RunConfig::default();
        assert_eq!(parse_config_str(&d.to_toml(), &RunConfig::default()).unwrap(), d);
        let mut other = RunConfig::default();
        other.s = 0.25;
        other.ode.gamma = GammaSpec::Value(3.5);
        other.pde.snapshot_times = vec![0.01, 0.02];
        assert_eq!(parse_config_str(&other.to_toml(), &RunConfig::default()).unwrap(), other);
    }

    #[test]
    fn file_keys_override_the_base() {
        let mut base = RunConfig::default();
        base.pde.epsilon = 0.05;
        base.pde.t_end = 0.3;
        let cfg = parse_config_str("[pde]\nepsilon = 0.2\n", &base).unwrap();
        assert_eq!(cfg.pde.epsilon, 0.2);
        assert_eq!(cfg.pde.t_end, 0.3);
    }
}
