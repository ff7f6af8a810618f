//! Scenario configuration. A single JSON document; every section is optional and every
//! numeric knob has a default, so the parsed value is already fully resolved.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Command {
    Params,
    Roots,
    Simulate,
    Shoot,
    EnergyAudit,
    KelvinCheck,
    Profile,
    Sweep,
    CriticalCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Params => "params",
            Command::Roots => "roots",
            Command::Simulate => "simulate",
            Command::Shoot => "shoot",
            Command::EnergyAudit => "energy_audit",
            Command::KelvinCheck => "kelvin_check",
            Command::Profile => "profile",
            Command::Sweep => "sweep",
            Command::CriticalCheck => "critical_check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub n: u32,
    pub p: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Horizon for shooting runs.
    pub t_end: f64,
    pub epsilon: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    pub cap: f64,
    pub detect_convergence: bool,
    pub converge_threshold: f64,
    pub converge_window: f64,
    pub event_tol: f64,
    /// Largest relative drop of a component per step near the cone boundary (q < 1); 0 disables.
    pub boundary_fraction: f64,
    pub match_radius: f64,
    pub root_grid: usize,
    pub root_max_iter: usize,
    pub root_dedup_radius: f64,
    pub root_floor: f64,
    pub root_accept_residual: f64,
    pub root_warn_residual: f64,
    pub root_ray_span: f64,
    pub root_ray_step: f64,
    pub classify_tol: f64,
    pub limit_window: f64,
    pub profile_points: usize,
    pub profile_decades: f64,
    /// Smallest ratio of nonlinear forcing to the linear term accepted inside the profile window.
    pub profile_forcing_floor: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        let integ = eflab_core::IntegrateOptions::default();
        let roots = eflab_core::roots::RootSolverOptions::default();
        let shoot = eflab_core::fowler::ShootOptions::default();
        let audit = eflab_core::energy::AuditOptions::default();
        Numerics {
            abs_tol: integ.tol.abs,
            rel_tol: integ.tol.rel,
            t_end: shoot.t_end,
            epsilon: shoot.epsilon,
            h_init: integ.h_init,
            h_max: integ.h_max,
            h_min: integ.h_min,
            max_steps: integ.max_steps,
            cap: integ.cap,
            detect_convergence: integ.detect_convergence,
            converge_threshold: integ.converge_threshold,
            converge_window: integ.converge_window,
            event_tol: integ.event_tol,
            boundary_fraction: integ.boundary_fraction,
            match_radius: shoot.match_radius,
            root_grid: roots.grid,
            root_max_iter: roots.max_iter,
            root_dedup_radius: roots.dedup_radius,
            root_floor: roots.floor,
            root_accept_residual: roots.accept_residual,
            root_warn_residual: roots.warn_residual,
            root_ray_span: roots.ray_span,
            root_ray_step: roots.ray_step,
            classify_tol: audit.classify_tol,
            limit_window: audit.limit_window,
            profile_points: 400,
            profile_decades: 6.0,
            profile_forcing_floor: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootSection {
    /// Launch directions `(a1, a2)` in the origin's unstable eigenspace.
    pub directions: Vec<[f64; 2]>,
}

impl Default for ShootSection {
    fn default() -> Self {
        ShootSection { directions: vec![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Explicit initial states `(w1, dw1, w2, dw2)` at `t = 0`.
    pub initial: Vec<[f64; 4]>,
    /// Number of additional seeded random initial states.
    pub random: usize,
    pub t_end: f64,
    /// Random amplitudes are drawn from `C₀·[0.05, amplitude]`, velocities from `C₀·[-0.5, 0.5]`.
    pub amplitude: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { initial: Vec::new(), random: 20, t_end: 20.0, amplitude: 1.5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n: Option<Vec<u32>>,
    pub p: Option<Vec<f64>>,
    /// Exponent as a fraction `s ∈ (0, 1]` of the admitted range: `p = n/(n-2) + 2s/(n-2)`.
    pub p_relative: Option<Vec<f64>>,
    pub mu1: Option<Vec<f64>>,
    pub mu2: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    /// Shoot along `shoot.directions` in every cell.
    pub shoot: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub problem: Option<Problem>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub shoot: ShootSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

pub const MAX_SWEEP_CELLS: usize = 1_000_000;

impl ScenarioConfig {
    /// Parses a config document, or the `resolved_config` of a run manifest.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        if let Some(inner) = value.get("resolved_config") {
            let inner = serde_json::to_string(inner).map_err(|e| RunError::Internal(e.to_string()))?;
            return serde_json::from_str(&inner).map_err(|e| RunError::Config(format!("manifest resolved_config: {e}")));
        }
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            RunError::Config(msg) => RunError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Merges command-line overrides and fills the remaining defaults.
    pub fn resolve(mut self, command: Command, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, RunError> {
        match self.command {
            Some(c) if c != command => {
                return Err(RunError::Config(format!(
                    "command: config asks for `{}` but `{}` was given on the command line",
                    c.name(),
                    command.name()
                )))
            }
            _ => self.command = Some(command),
        }
        if let Some(out) = out {
            self.output_dir = Some(out);
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(PathBuf::from("."));
        }
        if let Some(seed) = seed {
            self.seed = seed;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn command(&self) -> Command {
        self.command.expect("resolved config has a command")
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().expect("resolved config has an output directory")
    }

    pub fn problem(&self) -> Result<Problem, RunError> {
        self.problem.ok_or_else(|| RunError::Config(format!("problem: required for `{}`", self.command().name())))
    }

    fn validate(&self) -> Result<(), RunError> {
        let m = &self.numerics;
        let positive = [
            ("numerics.abs_tol", m.abs_tol),
            ("numerics.rel_tol", m.rel_tol),
            ("numerics.t_end", m.t_end),
            ("numerics.epsilon", m.epsilon),
            ("numerics.h_init", m.h_init),
            ("numerics.h_max", m.h_max),
            ("numerics.h_min", m.h_min),
            ("numerics.cap", m.cap),
            ("numerics.converge_threshold", m.converge_threshold),
            ("numerics.converge_window", m.converge_window),
            ("numerics.event_tol", m.event_tol),
            ("numerics.match_radius", m.match_radius),
            ("numerics.root_dedup_radius", m.root_dedup_radius),
            ("numerics.root_floor", m.root_floor),
            ("numerics.root_accept_residual", m.root_accept_residual),
            ("numerics.root_warn_residual", m.root_warn_residual),
            ("numerics.root_ray_span", m.root_ray_span),
            ("numerics.root_ray_step", m.root_ray_step),
            ("numerics.classify_tol", m.classify_tol),
            ("numerics.limit_window", m.limit_window),
            ("numerics.profile_decades", m.profile_decades),
            ("numerics.profile_forcing_floor", m.profile_forcing_floor),
            ("simulate.t_end", self.simulate.t_end),
            ("simulate.amplitude", self.simulate.amplitude),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(RunError::Config(format!("{name}: must be a positive finite number, got {value}")));
            }
        }
        if m.epsilon > 1e-2 {
            return Err(RunError::Config(format!("numerics.epsilon: must not exceed 1e-2, got {}", m.epsilon)));
        }
        if !(0.0..1.0).contains(&m.boundary_fraction) {
            return Err(RunError::Config(format!("numerics.boundary_fraction: must lie in [0, 1), got {}", m.boundary_fraction)));
        }
        if m.h_min > m.h_max {
            return Err(RunError::Config("numerics.h_min: exceeds numerics.h_max".into()));
        }
        if self.simulate.amplitude <= 0.05 {
            return Err(RunError::Config("simulate.amplitude: must exceed 0.05".into()));
        }
        for (name, value) in [("numerics.root_grid", m.root_grid), ("numerics.root_max_iter", m.root_max_iter), ("numerics.max_steps", m.max_steps)] {
            if value == 0 {
                return Err(RunError::Config(format!("{name}: must be at least 1")));
            }
        }
        if m.profile_points < 5 {
            return Err(RunError::Config("numerics.profile_points: must be at least 5".into()));
        }
        for (i, d) in self.shoot.directions.iter().enumerate() {
            if !(d[0] >= 0.0 && d[1] >= 0.0 && d[0] + d[1] > 0.0 && d[0].is_finite() && d[1].is_finite()) {
                return Err(RunError::Config(format!(
                    "shoot.directions[{i}]: components must be nonnegative, finite and not both zero"
                )));
            }
        }
        for (i, s) in self.simulate.initial.iter().enumerate() {
            if !s.iter().all(|x| x.is_finite()) || s[0] < 0.0 || s[2] < 0.0 {
                return Err(RunError::Config(format!(
                    "simulate.initial[{i}]: amplitudes must be nonnegative and all entries finite"
                )));
            }
        }
        if self.sweep.p.is_some() && self.sweep.p_relative.is_some() {
            return Err(RunError::Config("sweep: give either `p` or `p_relative`, not both".into()));
        }
        if let Some(rel) = &self.sweep.p_relative {
            if let Some((i, s)) = rel.iter().enumerate().find(|(_, s)| !(**s > 0.0 && **s <= 1.0)) {
                return Err(RunError::Config(format!("sweep.p_relative[{i}]: must lie in (0, 1], got {s}")));
            }
        }
        Ok(())
    }
}
