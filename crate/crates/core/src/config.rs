//! Run configuration: a versioned TOML document, dotted-path overrides and a
//! canonical form whose SHA-256 identifies the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{Lattice3, ThetaSpec};
use crate::sde::{Model, RunOptions, Scheme, StepOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    /// Spherical truncation `|l| <= M`.
    pub max_mode: u32,
    /// Noise strength; the limit viscosity is `1 + 3 nu / 5`.
    pub nu: f64,
    /// Cut-off radius `R` of the `H^{-delta}` norm.
    pub cutoff_radius: f64,
    /// Radius `R_0` of the initial-data ball.
    pub r0: f64,
    pub delta: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Horizon `T > 1` of the long-horizon experiment.
    pub long_horizon: f64,
    /// Continuation horizon of the long-horizon experiment.
    pub extra_horizon: f64,
    pub output_every: usize,
    pub seed: u64,
    pub samples: usize,
    /// Shell parameters `N` of the scaling experiments.
    pub ladder: Vec<u32>,
    /// Sobolev embedding constant of the decay estimates.
    pub c0: f64,
    pub nonlinear: bool,
    pub scheme: Scheme,
    pub taylor_tol: f64,
    pub guard: f64,
    /// Worker threads for Monte-Carlo samples; 0 picks the default. Never
    /// changes results.
    pub threads: usize,
    pub theta: ThetaSpec,
    pub initial: InitialConfig,
    pub decay: DecayConfig,
    pub corrector: CorrectorConfig,
    pub output: OutputConfig,
}

/// Seeded family of band-limited initial fields on the sphere of radius
/// `norm_fraction * r0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub family: usize,
    pub band: u32,
    pub norm_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub nu1: f64,
    /// Initial norm as a fraction of the small-data radius.
    pub norm_fraction: f64,
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectorConfig {
    pub ladder: Vec<u32>,
    pub gamma: f64,
    pub ball: bool,
    pub l: Lattice3,
    pub beta: usize,
    /// Field truncation and sample count of the operator identities.
    pub max_mode: u32,
    pub fields: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            max_mode: 6,
            nu: 5.0,
            cutoff_radius: 100.0,
            r0: 5.0,
            delta: 0.25,
            dt: 1e-3,
            horizon: 0.5,
            long_horizon: 1.2,
            extra_horizon: 0.5,
            output_every: 5,
            seed: 20_240_607,
            samples: 20,
            ladder: vec![4, 16],
            c0: 1.0,
            nonlinear: true,
            scheme: Scheme::SplitExponential,
            taylor_tol: 1e-13,
            guard: 1e12,
            threads: 0,
            theta: ThetaSpec::Shell { n: 4, gamma: 1.0 },
            initial: InitialConfig::default(),
            decay: DecayConfig::default(),
            corrector: CorrectorConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            family: 4,
            band: 2,
            norm_fraction: 1.0,
            seed: 7,
        }
    }
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            nu1: 1.0,
            norm_fraction: 0.5,
            horizon: 0.2,
        }
    }
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        Self {
            ladder: vec![4, 8, 16, 32],
            gamma: 1.0,
            ball: false,
            l: [1, 0, 0],
            beta: 1,
            max_mode: 4,
            fields: 20,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
        }
    }
}

fn check(ok: bool, field: &str, msg: impl std::fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{field}: {msg}")))
    }
}

impl SimConfig {
    /// Parses a TOML document, applies `key=value` overrides and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let file: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        let mut value = toml::Value::try_from(SimConfig::default()).expect("defaults serialize");
        merge(&mut value, toml::Value::Table(file));
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: SimConfig = value
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (or the defaults when `None`) with overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            format!(
                "unsupported version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            ),
        )?;
        check(self.max_mode >= 1, "max_mode", "must be >= 1")?;
        check(
            self.nu >= 0.0 && self.nu.is_finite(),
            "nu",
            "must be finite and >= 0",
        )?;
        check(self.cutoff_radius > 0.0, "cutoff_radius", "must be > 0")?;
        check(self.r0 > 0.0 && self.r0.is_finite(), "r0", "must be > 0")?;
        check(
            self.delta > 0.0 && self.delta < 0.5,
            "delta",
            "must lie in (0, 1/2)",
        )?;
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be > 0")?;
        check(
            self.horizon > 0.0 && self.horizon.is_finite(),
            "horizon",
            "must be > 0",
        )?;
        check(
            self.long_horizon > 1.0 && self.long_horizon.is_finite(),
            "long_horizon",
            "must exceed 1",
        )?;
        check(self.extra_horizon >= 0.0, "extra_horizon", "must be >= 0")?;
        check(self.output_every >= 1, "output_every", "must be >= 1")?;
        check(
            self.seed <= i64::MAX as u64,
            "seed",
            "must fit in a signed 64-bit integer",
        )?;
        check(self.samples >= 1, "samples", "must be >= 1")?;
        check(
            !self.ladder.is_empty() && self.ladder.iter().all(|&n| n >= 1),
            "ladder",
            "needs entries >= 1",
        )?;
        check(self.c0 > 0.0, "c0", "must be > 0")?;
        check(
            self.taylor_tol > 0.0 && self.taylor_tol < 1.0,
            "taylor_tol",
            "must lie in (0, 1)",
        )?;
        check(self.guard > 0.0, "guard", "must be > 0")?;
        self.theta
            .build()
            .map_err(|e| Error::Config(format!("theta: {e}")))?;
        check(self.initial.family >= 1, "initial.family", "must be >= 1")?;
        check(
            self.initial.band >= 1 && self.initial.band <= self.max_mode,
            "initial.band",
            "must lie in [1, max_mode]",
        )?;
        check(
            self.initial.norm_fraction > 0.0,
            "initial.norm_fraction",
            "must be > 0",
        )?;
        check(
            self.initial.seed <= i64::MAX as u64,
            "initial.seed",
            "must fit in a signed 64-bit integer",
        )?;
        check(self.decay.nu1 > 0.0, "decay.nu1", "must be > 0")?;
        check(
            self.decay.norm_fraction > 0.0,
            "decay.norm_fraction",
            "must be > 0",
        )?;
        check(self.decay.horizon > 0.0, "decay.horizon", "must be > 0")?;
        let c = &self.corrector;
        check(
            !c.ladder.is_empty() && c.ladder.iter().all(|&n| n >= 1),
            "corrector.ladder",
            "needs entries >= 1",
        )?;
        check(c.gamma >= 0.0, "corrector.gamma", "must be >= 0")?;
        check(
            !c.ball || c.gamma <= 1.5,
            "corrector.gamma",
            "ball weights need gamma <= 3/2",
        )?;
        check(c.l != [0, 0, 0], "corrector.l", "must be nonzero")?;
        check(
            c.beta == 1 || c.beta == 2,
            "corrector.beta",
            "must be 1 or 2",
        )?;
        check(c.max_mode >= 1, "corrector.max_mode", "must be >= 1")?;
        check(c.fields >= 1, "corrector.fields", "must be >= 1")?;
        Ok(())
    }

    /// Canonical TOML: fixed key order, every field present.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical form with the output location reset,
    /// so that one experiment hashes alike under any output root.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        hex::encode(Sha256::digest(c.canonical().as_bytes()))
    }

    pub fn nu1(&self) -> f64 {
        1.0 + 0.6 * self.nu
    }

    pub fn theta_for(&self, n: u32) -> ThetaSpec {
        self.theta.with_n(n)
    }

    pub fn corrector_theta(&self, n: u32) -> ThetaSpec {
        let gamma = self.corrector.gamma;
        if self.corrector.ball {
            ThetaSpec::Ball { n, gamma }
        } else {
            ThetaSpec::Shell { n, gamma }
        }
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            dt: self.dt,
            scheme: self.scheme,
            taylor_tol: self.taylor_tol,
            guard: self.guard,
        }
    }

    pub fn run_options(&self, horizon: f64, stream: u64) -> RunOptions {
        RunOptions {
            step: self.step_options(),
            horizon,
            output_every: self.output_every,
            seed: self.seed,
            stream,
            track_brackets: false,
            keep_fields: true,
        }
    }

    /// The stochastic cut-off system with weights `theta`.
    pub fn stochastic_model(&self, theta: &ThetaSpec) -> Result<Model> {
        Ok(Model {
            viscosity: 1.0,
            nu: self.nu,
            theta: Some(theta.build()?),
            cutoff_radius: Some(self.cutoff_radius),
            delta: self.delta,
            nonlinear: self.nonlinear,
        })
    }

    /// The deterministic limit with viscosity `nu_1`.
    pub fn limit_model(&self) -> Model {
        Model {
            delta: self.delta,
            nonlinear: self.nonlinear,
            ..Model::deterministic(self.nu1())
        }
    }
}

/// Layers `top` over `base`: tables merge key by key, anything else replaces.
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

/// Applies `a.b.c=value`; the value is read as a TOML literal, falling back
/// to a bare string.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: `{part}` is not a table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("{key}: parent is not a table")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = SimConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, SimConfig::default());
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = SimConfig::from_toml_str(
            "nu = 2.5\n[theta]\nkind = \"ball\"\nn = 3\ngamma = 0.5\n",
            &["corrector.l=[1,2,2]".into(), "output.dir=out/x".into()],
        )
        .unwrap();
        let text = cfg.canonical();
        let back = SimConfig::from_toml_str(&text, &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical(), text);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.corrector.l, [1, 2, 2]);
        assert_eq!(cfg.output.dir, PathBuf::from("out/x"));
        assert_ne!(cfg.hash(), SimConfig::default().hash());
        let mut moved = cfg.clone();
        moved.output.dir = PathBuf::from("elsewhere");
        assert_eq!(moved.hash(), cfg.hash());
    }

    #[test]
    fn overrides_replace_values() {
        let cfg =
            SimConfig::from_toml_str("samples = 3", &["samples=5".into(), "theta.n=8".into()])
                .unwrap();
        assert_eq!(cfg.samples, 5);
        assert_eq!(cfg.theta.n(), 8);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let err = SimConfig::from_toml_str("delta = 0.5", &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("delta"), "{err}");
        let err = SimConfig::from_toml_str("", &["dt=-1".into()])
            .unwrap_err()
            .to_string();
        assert!(err.contains("dt"), "{err}");
        let err = SimConfig::from_toml_str("bogus = 1", &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{err}");
        assert!(SimConfig::from_toml_str("", &["noequals".into()]).is_err());
        let err =
            SimConfig::from_toml_str("[theta]\nkind=\"ball\"\nn=2\ngamma=2.0", &[]).unwrap_err();
        assert!(err.to_string().contains("theta"));
    }
}
