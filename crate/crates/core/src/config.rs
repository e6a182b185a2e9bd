//! TOML configuration. Every section and key is optional and falls back to
//! the documented default; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::{Bounds, EllipseObstacle, TrustRegionConfig};
use crate::controller::{ControllerConfig, ControllerKind, Preset, SqpSettings};
use crate::error::{Error, Result};
use crate::qp::SolverSettings;
use crate::sim::{Scenario, StudyConfig, TrackConfig};
use crate::vehicle::{VehicleParams, VehicleState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    /// Source of `q`, `r`, `p` when they are not given.
    pub preset: Preset,
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<[f64; 6]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<[f64; 2]>,
    /// Terminal weight; defaults to `q`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<[f64; 6]>,
    pub obstacle_margin: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::LpvTrust,
            preset: Preset::Scenario1,
            horizon: 8,
            q: None,
            r: None,
            p: None,
            obstacle_margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub name: String,
    /// Closed-loop steps.
    pub duration: usize,
    /// Relative plant error on `(c_alpha_f, c_alpha_r, m)`.
    pub perturbation: [f64; 3],
    pub substeps: usize,
    pub seed: u64,
    /// Defaults to the first reference state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<VehicleState>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            duration: 400,
            perturbation: [0.0; 3],
            substeps: 10,
            seed: 0,
            initial_state: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub vehicle: VehicleParams,
    pub track: TrackConfig,
    pub controller: ControllerSection,
    pub bounds: Bounds,
    pub trust: TrustRegionConfig,
    pub solver: SolverSettings,
    pub sqp: SqpSettings,
    pub sim: SimSection,
    pub study: StudyConfig,
    pub obstacles: Vec<EllipseObstacle>,
}

impl ConfigFile {
    /// Parses and validates; errors carry the key path and, when known, the line.
    pub fn parse(src: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(src).map_err(|e| toml_error(src, "", &e))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            toml_error(src, if path == "." { "" } else { &path }, e.inner())
        })?;
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { key, reason } => Error::Config {
                line: locate_key(src, &key),
                message: format!("`{key}`: {reason}"),
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Semantic checks; keys are full paths such as `obstacles[0].rx`.
    pub fn validate(&self) -> Result<()> {
        within("vehicle", self.vehicle.validate())?;
        within("track", self.track.validate())?;
        let c = &self.controller;
        if c.q.is_none() != c.r.is_none() {
            return Err(Error::InvalidParameter {
                key: if c.q.is_none() { "controller.q" } else { "controller.r" }.into(),
                reason: "q and r must be given together".into(),
            });
        }
        if self.bounds.a_min >= self.bounds.a_max || self.bounds.delta_max <= 0.0 {
            return Err(Error::InvalidParameter {
                key: "bounds".into(),
                reason: "empty input box".into(),
            });
        }
        self.scenario().validate()?;
        self.study.validate()
    }

    pub fn controller_config(&self) -> ControllerConfig {
        let c = &self.controller;
        let mut cfg = ControllerConfig::preset(c.kind, c.preset, c.horizon);
        if let (Some(q), Some(r)) = (c.q, c.r) {
            cfg.q = q;
            cfg.r = r;
            cfg.p = q;
        }
        if let Some(p) = c.p {
            cfg.p = p;
        }
        cfg.trust = TrustRegionConfig {
            enabled: c.kind == ControllerKind::LpvTrust,
            ..self.trust
        };
        cfg.solver = self.solver;
        cfg.sqp = self.sqp;
        cfg.bounds = self.bounds;
        cfg.vehicle = self.vehicle;
        cfg.obstacle_margin = c.obstacle_margin;
        cfg
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            name: self.sim.name.clone(),
            track: self.track,
            obstacles: self.obstacles.clone(),
            initial_state: self.sim.initial_state,
            controller: self.controller_config(),
            duration: self.sim.duration,
            perturbation: self.sim.perturbation,
            substeps: self.sim.substeps,
            seed: self.sim.seed,
        }
    }
}

fn within<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { key, reason } if !key.starts_with(section) => Error::InvalidParameter {
            key: format!("{section}.{key}"),
            reason,
        },
        other => other,
    })
}

fn toml_error(src: &str, path: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1);
    let msg = e.message().trim().to_string();
    Error::Config {
        message: if path.is_empty() {
            msg
        } else {
            format!("`{path}`: {msg}")
        },
        line,
    }
}

/// Best-effort line of `key` (e.g. `controller.horizon`, `obstacles[1].rx`)
/// in a TOML document written with standard table headers.
pub fn locate_key(src: &str, key: &str) -> Option<usize> {
    let mut parts = key.split('.');
    let head = parts.next()?;
    let leaf = parts.next_back();
    let (table, index) = match head.split_once('[') {
        Some((t, rest)) => (t, rest.trim_end_matches(']').parse::<usize>().ok()),
        None => (head, None),
    };
    let header = if index.is_some() {
        format!("[[{table}]]")
    } else {
        format!("[{table}]")
    };
    let starts_key = |line: &str, k: &str| {
        line.strip_prefix(k)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    };

    let lines: Vec<&str> = src.lines().map(str::trim).collect();
    let mut seen = 0usize;
    let mut start = None;
    for (i, l) in lines.iter().enumerate() {
        if *l == header {
            if index.is_none_or(|k| k == seen) {
                start = Some(i);
                break;
            }
            seen += 1;
        }
    }
    let Some(start) = start else {
        // inline or dotted forms
        return lines
            .iter()
            .position(|l| starts_key(l, table) || l.starts_with(&format!("{table}.")))
            .map(|i| i + 1);
    };
    if let Some(leaf) = leaf {
        for (i, l) in lines.iter().enumerate().skip(start + 1) {
            if l.starts_with('[') {
                break;
            }
            if starts_key(l, leaf) {
                return Some(i + 1);
            }
        }
    }
    Some(start + 1)
}
