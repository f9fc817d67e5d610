//! Run configuration: a flat JSON object with documented defaults, strict
//! unknown-key rejection, and full precondition validation before any
//! compute starts.

use crate::SCHEMA_VERSION;
use rodlat::lattice::{site, BoundaryCondition, BoxSpec, Containment, Orientation};
use rodlat::observables::EventSpec;
use rodlat::sampler::{InitMode, MoveMix, SamplerParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config JSON: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

/// An event window request: center site, target orientation, emptiness
/// convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub x: i32,
    pub y: i32,
    pub target: Orientation,
    #[serde(default = "default_min_centers")]
    pub min_centers: u32,
}

fn default_min_centers() -> u32 {
    1
}

impl WindowSpec {
    pub fn to_event(self) -> EventSpec {
        EventSpec {
            center: site(self.x, self.y),
            target: self.target,
            min_centers: self.min_centers,
        }
    }
}

/// Raw JSON shape: required keys are bare, everything else optional with
/// documented defaults. Unknown keys are hard errors.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    #[serde(rename = "L")]
    l: i32,
    k: i32,
    z: f64,
    sweeps: u64,
    seed: u64,
    bc: Option<BoundaryCondition>,
    containment: Option<Containment>,
    thermalization: Option<u64>,
    measurement_interval: Option<u64>,
    move_mix: Option<MoveMix>,
    init: Option<InitMode>,
    chains: Option<u32>,
    windows: Option<Vec<WindowSpec>>,
    separations: Option<Vec<i32>>,
    output_dir: Option<PathBuf>,
    trace: Option<bool>,
    epsilon0: Option<f64>,
    k0: Option<i32>,
}

/// Fully resolved configuration; serializing and re-parsing it is the
/// identity, and it is embedded verbatim in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(rename = "L")]
    pub l: i32,
    pub k: i32,
    pub z: f64,
    pub sweeps: u64,
    pub seed: u64,
    pub bc: BoundaryCondition,
    pub containment: Containment,
    pub thermalization: u64,
    pub measurement_interval: u64,
    pub move_mix: MoveMix,
    pub init: InitMode,
    pub chains: u32,
    pub windows: Vec<WindowSpec>,
    pub separations: Vec<i32>,
    pub output_dir: PathBuf,
    pub trace: bool,
    /// Regime-flag thresholds (knobs, not claimed constants).
    pub epsilon0: f64,
    pub k0: i32,
}

impl RunConfig {
    pub fn box_spec(&self) -> BoxSpec {
        BoxSpec::square(self.l, self.k, self.containment, self.bc).expect("validated config")
    }

    pub fn sampler_params(&self) -> SamplerParams {
        SamplerParams {
            z: self.z,
            sweeps: self.sweeps,
            thermalization: self.thermalization,
            seed: self.seed,
            move_mix: self.move_mix,
            measurement_interval: self.measurement_interval,
            init: self.init,
        }
    }

    pub fn events(&self) -> Vec<EventSpec> {
        self.windows.iter().map(|w| w.to_event()).collect()
    }

    pub fn frames(&self) -> u64 {
        self.sweeps / self.measurement_interval
    }
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Accepts either a bare run config or a run manifest (whose `config` field
/// is the resolved config of the run that produced it), so re-running from
/// a manifest reproduces the run.
pub fn parse_config_str(text: &str) -> Result<RunConfig, Error> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let config_value = match value.get("config") {
        Some(inner) if value.get("coefficients").is_none() => inner.clone(),
        _ => value,
    };
    let deserializer = config_value.clone();
    let raw: RawConfig = serde_path_to_error::deserialize(&deserializer).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().to_string();
        if path == "." {
            Error::Parse(msg)
        } else {
            Error::Parse(format!("at `{path}`: {msg}"))
        }
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<RunConfig, Error> {
    let bc = raw.bc.unwrap_or(BoundaryCondition::Open);
    let containment = raw.containment.unwrap_or(Containment::CenterInBox);
    let config = RunConfig {
        schema_version: raw.schema_version.unwrap_or(SCHEMA_VERSION),
        l: raw.l,
        k: raw.k,
        z: raw.z,
        sweeps: raw.sweeps,
        seed: raw.seed,
        bc,
        containment,
        thermalization: raw.thermalization.unwrap_or(raw.sweeps / 10),
        measurement_interval: raw.measurement_interval.unwrap_or(1),
        move_mix: raw.move_mix.unwrap_or_default(),
        init: raw.init.unwrap_or_default(),
        chains: raw.chains.unwrap_or(1),
        windows: raw.windows.unwrap_or_default(),
        separations: raw
            .separations
            .unwrap_or_else(|| default_separations(raw.l, raw.k, containment, bc)),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("run")),
        trace: raw.trace.unwrap_or(false),
        epsilon0: raw.epsilon0.unwrap_or(0.5),
        k0: raw.k0.unwrap_or(7),
    };
    validate(&config)?;
    Ok(config)
}

/// Axis-aligned multiples of floor(k/2) up to 4k, clipped to what fits in
/// the measurement region (the bulk under plus/minus bc).
fn default_separations(
    l: i32,
    k: i32,
    containment: Containment,
    bc: BoundaryCondition,
) -> Vec<i32> {
    let ell = (k / 2).max(1);
    let extent = match BoxSpec::square(l, k, containment, bc) {
        Ok(spec) => {
            let region = rodlat::observables::measure_region(&spec);
            region.width().max(region.height())
        }
        Err(_) => 0, // validation reports the real problem
    };
    (1..=8).map(|m| m * ell).filter(|s| *s < extent).collect()
}

fn invalid(field: &'static str, message: impl Into<String>) -> Error {
    Error::Invalid {
        field,
        message: message.into(),
    }
}

pub fn validate(config: &RunConfig) -> Result<(), Error> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, got {}", config.schema_version),
        ));
    }
    let spec = BoxSpec::square(config.l, config.k, config.containment, config.bc)
        .map_err(|e| invalid("L/k", e.to_string()))?;
    config
        .sampler_params()
        .validate()
        .map_err(|e| invalid("sampler", e.to_string()))?;
    if config.chains == 0 {
        return Err(invalid("chains", "must be at least 1"));
    }
    for w in &config.windows {
        w.to_event()
            .validate(&spec)
            .map_err(|e| invalid("windows", e.to_string()))?;
    }
    let region = rodlat::observables::measure_region(&spec);
    for &s in &config.separations {
        if s <= 0 || (s >= region.width() && s >= region.height()) {
            return Err(invalid(
                "separations",
                format!("separation {s} does not fit in the measurement region"),
            ));
        }
    }
    if !config.epsilon0.is_finite() || config.epsilon0 <= 0.0 {
        return Err(invalid("epsilon0", "must be positive"));
    }
    if config.k0 < 2 {
        return Err(invalid("k0", "must be at least 2"));
    }
    if config.bc != BoundaryCondition::Open && !spec.has_bulk() {
        eprintln!(
            "warning: L = {} leaves no bulk outside the 2k = {} peel; \
             plus/minus boundary conditions constrain every rod",
            config.l,
            2 * config.k
        );
    }
    Ok(())
}
