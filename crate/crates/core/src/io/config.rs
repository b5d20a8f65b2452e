//! Run configuration: a TOML file with one table per concern.
//!
//! ```toml
//! [system]
//! g = 1.0
//! delta = 0.1
//!
//! [drive]
//! f = 15.0                      # constant drive, or
//! # steps = [[0, 5], [11, 15]]  # (tau, f) pairs, or
//! # protocol_file = "p.txt"     # relative to the config file
//!
//! [run]
//! initial = "ground"
//! t_end = 1000.0
//! ```
//!
//! Unknown tables and keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::{
    analysis::{PacketOptions, Window},
    error::{Error, Result},
    model::{DriveProtocol, DriveStep, InitialKind, SystemParams, DEFAULT_TAIL_THRESHOLD},
    protocol::{
        default_search_span, SearchOptions, Strategy, SynthesisOptions, SynthesisTarget, TreeOptions,
        ValidationMode, DEFAULT_GUARD_RADIUS, DEFAULT_PRUNE_THRESHOLD,
    },
    solver::{DEFAULT_LDS_FLOOR, DEFAULT_SAMPLE_STRIDE},
    variational::Branch,
};

use super::protocol_file::parse_protocol;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "one")]
    pub g: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub f: Option<f64>,
    pub steps: Option<Vec<[f64; 2]>>,
    pub protocol_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub initial: String,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub sample_stride: f64,
    pub n_max: Option<usize>,
    pub tail_threshold: f64,
    pub norm_tolerance: f64,
    pub distribution: bool,
    pub lds_measure: bool,
    pub lds_floor: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            initial: "ground".into(),
            t_end: 0.0,
            dt: None,
            sample_stride: DEFAULT_SAMPLE_STRIDE,
            n_max: None,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            norm_tolerance: 1e-6,
            distribution: true,
            lds_measure: false,
            lds_floor: DEFAULT_LDS_FLOOR,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub wigner_times: Vec<f64>,
    pub wigner_points: usize,
    pub wigner_half_width: Option<f64>,
    pub spectrum: bool,
    pub window: String,
    /// Frequencies to look for in the spectrum; defaults to `Ω₁, Ω₂` in
    /// class D.
    pub expected: Option<Vec<f64>>,
    pub packet_times: Vec<f64>,
    pub packet_width: usize,
    pub packet_prominence: f64,
    pub packet_separation: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let p = PacketOptions::default();
        Self {
            wigner_times: Vec::new(),
            wigner_points: 81,
            wigner_half_width: None,
            spectrum: false,
            window: "rect".into(),
            expected: None,
            packet_times: Vec::new(),
            packet_width: p.width,
            packet_prominence: p.min_prominence,
            packet_separation: p.min_separation,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReducedSection {
    /// `"1"`, `"2"` or `"both"`.
    pub branch: String,
    /// Driving strength; defaults to the constant `[drive] f`.
    pub f: Option<f64>,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub z0: [f64; 2],
    /// Keep every `stride`-th integration step.
    pub stride: usize,
}

impl Default for ReducedSection {
    fn default() -> Self {
        Self { branch: "both".into(), f: None, t_end: 100.0, dt: None, z0: [0.0, 0.0], stride: 10 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub strategy: String,
    pub n_packets: usize,
    #[serde(default)]
    pub weights: Vec<f64>,
    pub f_levels: Vec<f64>,
    #[serde(default = "default_guard")]
    pub guard_radius: f64,
    pub search_span: Option<f64>,
    #[serde(default = "default_prune")]
    pub prune_threshold: f64,
}

fn default_guard() -> f64 {
    DEFAULT_GUARD_RADIUS
}

fn default_prune() -> f64 {
    DEFAULT_PRUNE_THRESHOLD
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub mode: String,
    pub t_end: Option<f64>,
    pub report_times: Vec<f64>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { mode: "reduced".into(), t_end: None, report_times: Vec::new() }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub drive: Option<DriveSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub reduced: Option<ReducedSection>,
    pub synth: Option<SynthSection>,
    pub validate: Option<ValidateSection>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Per-invocation overrides from the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub n_max: Option<usize>,
    pub seed_state: Option<InitialKind>,
}

impl RunConfig {
    /// Parses configuration text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.params()?;
        cfg.initial()?;
        if !(cfg.run.t_end.is_finite() && cfg.run.t_end >= 0.0) {
            return Err(Error::Config(format!("run.t_end must be >= 0, got {}", cfg.run.t_end)));
        }
        if let Some(dt) = cfg.run.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Config(format!("run.dt must be > 0, got {dt}")));
            }
        }
        if !(cfg.run.sample_stride.is_finite() && cfg.run.sample_stride > 0.0) {
            return Err(Error::Config(format!("run.sample_stride must be > 0, got {}", cfg.run.sample_stride)));
        }
        cfg.window()?;
        if let Some(r) = &cfg.reduced {
            cfg.reduced_branches(r)?;
        }
        if let Some(s) = &cfg.synth {
            s.strategy.parse::<Strategy>().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(v) = &cfg.validate {
            v.mode.parse::<ValidationMode>().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.system.g, self.system.delta).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn initial(&self) -> Result<InitialKind> {
        self.run.initial.parse().map_err(|e: Error| Error::Config(e.to_string()))
    }

    pub fn window(&self) -> Result<Window> {
        self.analysis.window.parse().map_err(|e: Error| Error::Config(e.to_string()))
    }

    pub fn packet_options(&self) -> PacketOptions {
        PacketOptions {
            width: self.analysis.packet_width,
            min_prominence: self.analysis.packet_prominence,
            min_separation: self.analysis.packet_separation,
        }
    }

    /// The `[drive]` table as a protocol, if present.
    pub fn protocol(&self) -> Result<Option<DriveProtocol>> {
        let Some(d) = &self.drive else { return Ok(None) };
        let given = d.f.is_some() as u8 + d.steps.is_some() as u8 + d.protocol_file.is_some() as u8;
        if given != 1 {
            return Err(Error::Config("[drive] needs exactly one of f, steps, protocol_file".into()));
        }
        let proto = if let Some(f) = d.f {
            DriveProtocol::constant(f)
        } else if let Some(steps) = &d.steps {
            DriveProtocol::new(steps.iter().map(|&[tau, f]| DriveStep { tau, f }).collect())
        } else {
            let path = self.base_dir.join(d.protocol_file.as_ref().unwrap());
            let text =
                std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            parse_protocol(&text)
        };
        proto.map(Some).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn reduced_branches(&self, r: &ReducedSection) -> Result<Vec<Branch>> {
        match r.branch.trim() {
            "both" => Ok(Branch::BOTH.to_vec()),
            "1" => Ok(vec![Branch::One]),
            "2" => Ok(vec![Branch::Two]),
            other => Err(Error::Config(format!("reduced.branch must be 1, 2 or both, got {other:?}"))),
        }
    }

    pub fn synthesis(&self) -> Result<Option<(SynthesisTarget, SynthesisOptions)>> {
        let Some(s) = &self.synth else { return Ok(None) };
        let params = self.params()?;
        let target = SynthesisTarget {
            strategy: s.strategy.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            n_packets: s.n_packets,
            weights: s.weights.clone(),
            f_levels: s.f_levels.clone(),
        };
        let opts = SynthesisOptions {
            search: SearchOptions { guard_radius: s.guard_radius, ..Default::default() },
            search_span: s.search_span,
            tree: TreeOptions { prune_threshold: s.prune_threshold, ..Default::default() },
        };
        if let Some(f) = s.f_levels.first() {
            if *f > 0.0 && s.search_span.is_none() {
                log::debug!("default search span {}", default_search_span(*f, &params));
            }
        }
        Ok(Some((target, opts)))
    }
}
