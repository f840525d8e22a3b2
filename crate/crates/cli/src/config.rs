//! Scenario files.

use std::path::{Path, PathBuf};

use mmt::dynamics::{SpacecraftParams, SystemParams};
use mmt::mission::{free_domain, Domain, ModeSelection, SolveOptions, TransferProblem, DEFAULT_MIN_ALTITUDES};
use mmt::orbits::{lookup, orbits_from_json, OrbitRecord, PeriodicOrbit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// A preset name or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Preset<T> {
    Name(String),
    Explicit(T),
}

pub fn system_preset(name: &str) -> Option<SystemParams> {
    (name == "earth-moon").then(SystemParams::earth_moon)
}

pub fn spacecraft_preset(name: &str) -> Option<SpacecraftParams> {
    match name {
        "case1" => Some(SpacecraftParams::case1()),
        "case2" => Some(SpacecraftParams::case2()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitsBlock {
    /// Catalog label (or a label defined in `file`).
    pub initial: String,
    pub terminal: String,
    /// JSON list of orbit records; its labels take precedence over the
    /// catalog. Relative paths are resolved against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for OrbitsBlock {
    fn default() -> Self {
        Self { initial: "l2-southern-halo".into(), terminal: "nrho".into(), file: None }
    }
}

/// How the transfer phase is split into domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Structure {
    /// `"free"`: one free domain, switches found by the solver.
    Named(String),
    Domains(Vec<Domain>),
}

impl Default for Structure {
    fn default() -> Self {
        Structure::Named("free".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBlock {
    pub mode: ModeSelection,
    /// Mode-1 propellant bound [kg]; absent for the unconstrained baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propellant_bound_kg: Option<f64>,
    /// Bounds [kg] for `sweep`, strictly decreasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_kg: Option<Vec<f64>>,
    /// Step [kg] of the continuation from the baseline to a single bound.
    #[serde(default = "default_step")]
    pub continuation_step_kg: f64,
    #[serde(default)]
    pub structure: Structure,
    #[serde(default = "default_altitudes")]
    pub min_altitudes_km: [f64; 2],
    /// Report whose solution replaces the baseline solve as warm start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<PathBuf>,
    #[serde(default)]
    pub options: SolveOptions,
}

fn default_step() -> f64 {
    1.0
}

fn default_altitudes() -> [f64; 2] {
    DEFAULT_MIN_ALTITUDES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: None, formats: default_formats() }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_system")]
    pub system: Preset<SystemParams>,
    #[serde(default = "default_spacecraft")]
    pub spacecraft: Preset<SpacecraftParams>,
    #[serde(default)]
    pub orbits: OrbitsBlock,
    pub solve: SolveBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_system() -> Preset<SystemParams> {
    Preset::Name("earth-moon".into())
}

fn default_spacecraft() -> Preset<SpacecraftParams> {
    Preset::Name("case1".into())
}

/// Everything a report needs to rebuild the problem without the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemEcho {
    pub system: SystemParams,
    pub spacecraft: SpacecraftParams,
    pub initial_orbit: OrbitRecord,
    pub terminal_orbit: OrbitRecord,
    pub min_altitudes_km: [f64; 2],
}

impl ProblemEcho {
    pub fn problem(&self, mode: ModeSelection, domains: Vec<Domain>, bound_kg: Option<f64>) -> Result<TransferProblem, ConfigError> {
        let orbit = |r: &OrbitRecord| PeriodicOrbit::from_record(r.clone()).map_err(|e| ConfigError::Invalid(e.to_string()));
        let mut p = TransferProblem::unconstrained(
            self.system,
            self.spacecraft,
            orbit(&self.initial_orbit)?,
            orbit(&self.terminal_orbit)?,
            mode,
        )
        .with_bound_kg(bound_kg);
        p.domains = domains;
        p.min_altitudes = self.min_altitudes_km;
        p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(p)
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    /// Parses and checks everything that does not touch the filesystem.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(f) = self.orbits.file.as_mut() {
            fix(f);
        }
        if let Some(f) = self.solve.warm_start.as_mut() {
            fix(f);
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        self.system()?;
        self.spacecraft()?;
        let s = &self.solve;
        if let Some(b) = s.propellant_bound_kg {
            if !(b.is_finite() && b >= 0.0) {
                return invalid(format!("propellant_bound_kg must be nonnegative, got {b}"));
            }
        }
        if let Some(list) = &s.sweep_kg {
            if list.is_empty() {
                return invalid("sweep_kg is empty");
            }
            if list.iter().any(|b| !(b.is_finite() && *b >= 0.0)) || list.windows(2).any(|w| !(w[1] < w[0])) {
                return invalid("sweep_kg must be nonnegative and strictly decreasing");
            }
        }
        if !(s.continuation_step_kg > 0.0) {
            return invalid("continuation_step_kg must be positive");
        }
        if s.mode == ModeSelection::MultiMode && s.propellant_bound_kg.is_none() && s.sweep_kg.is_none() {
            return invalid("multi-mode needs a propellant bound or a sweep");
        }
        if s.mode == ModeSelection::OnlyMode2 && (s.propellant_bound_kg.is_some() || s.sweep_kg.is_some()) {
            return invalid("the propellant bound applies to mode 1; only-mode-2 takes none");
        }
        if let Structure::Named(n) = &s.structure {
            if n != "free" {
                return invalid(format!("unknown structure {n:?} (expected \"free\" or a domain list)"));
            }
        }
        s.options.refinement.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        s.options.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        s.options.warm_solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.output.formats.is_empty() {
            return invalid("output.formats is empty");
        }
        Ok(())
    }

    pub fn system(&self) -> Result<SystemParams, ConfigError> {
        let sys = match &self.system {
            Preset::Name(n) => match system_preset(n) {
                Some(s) => s,
                None => return invalid(format!("unknown system preset {n:?}")),
            },
            Preset::Explicit(s) => *s,
        };
        sys.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(sys)
    }

    pub fn spacecraft(&self) -> Result<SpacecraftParams, ConfigError> {
        let sc = match &self.spacecraft {
            Preset::Name(n) => match spacecraft_preset(n) {
                Some(s) => s,
                None => return invalid(format!("unknown spacecraft preset {n:?}")),
            },
            Preset::Explicit(s) => *s,
        };
        sc.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(sc)
    }

    /// Orbits named by the config, from its file first and then the catalog.
    pub fn orbits(&self) -> Result<(PeriodicOrbit, PeriodicOrbit), ConfigError> {
        let from_file = match &self.orbits.file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.clone(), source })?;
                orbits_from_json(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
            None => Vec::new(),
        };
        let find = |label: &str| match from_file.iter().find(|o| o.label == label) {
            Some(o) => Ok(o.clone()),
            None => lookup(label).map_err(|e| ConfigError::Invalid(e.to_string())),
        };
        Ok((find(&self.orbits.initial)?, find(&self.orbits.terminal)?))
    }

    /// Orbits the `orbits-verify` command checks: the file's orbits when a
    /// file is given, else the catalog.
    pub fn orbits_to_verify(&self) -> Result<Vec<PeriodicOrbit>, ConfigError> {
        match &self.orbits.file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.clone(), source })?;
                orbits_from_json(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))
            }
            None => Ok(mmt::orbits::catalog()),
        }
    }

    pub fn echo(&self) -> Result<ProblemEcho, ConfigError> {
        let (a, b) = self.orbits()?;
        Ok(ProblemEcho {
            system: self.system()?,
            spacecraft: self.spacecraft()?,
            initial_orbit: a.record().clone(),
            terminal_orbit: b.record().clone(),
            min_altitudes_km: self.solve.min_altitudes_km,
        })
    }

    pub fn domains(&self) -> Vec<Domain> {
        match &self.solve.structure {
            Structure::Named(_) => vec![free_domain(self.solve.mode)],
            Structure::Domains(d) => d.clone(),
        }
    }

    /// The problem at `bound_kg` with the configured structure.
    pub fn problem(&self, bound_kg: Option<f64>) -> Result<TransferProblem, ConfigError> {
        self.echo()?.problem(self.solve.mode, self.domains(), bound_kg)
    }
}
