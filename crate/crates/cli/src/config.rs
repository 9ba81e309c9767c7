//! Experiment configuration: one TOML document per run.
//!
//! Every scenario owns a complete default configuration (see
//! [`crate::scenarios::default_config`]). A user file only lists the keys it
//! changes; it is merged over the scenario defaults before parsing, so the
//! resolved configuration written into each report always shows every value
//! that was used.
//!
//! ```toml
//! scenario = "fig3"
//! seed = 7
//!
//! [nonlinearity]
//! f0 = 0.2
//!
//! [grid]          # h, left, right, boundary = "neumann" | "periodic", frame = "lab" | "comoving", freeze
//! [time]          # dt, t_end, observe_every
//! [initial]       # kink_positions, antikink_positions, mollifier_halfwidths, style = "step" | "front-superposition"
//! [ghca]          # e, r, gaps, margin, steps
//! [ode]           # runs, max_n, init_lo, init_hi, epsilon, amplitude, t_end, samples
//! [blowup]        # max_n, dims, points, t_end
//! [pbvp]          # ell, j, tol, ells
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use kinks::pde::InitialDataSpec;
use kinks::Nonlinearity;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("unknown scenario {id:?}; available scenarios: {}", .available.join(", "))]
    UnknownScenario { id: String, available: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Neumann,
    /// Periodic with a jump of `2π` per net kink on `[left, right)`.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    Lab,
    /// Moves with the single-kink speed.
    Comoving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub f0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub left: f64,
    pub right: f64,
    pub boundary: BoundaryKind,
    pub frame: FrameKind,
    /// Re-center the window on the mean kink position at observer frames.
    pub freeze: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub observe_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhcaConfig {
    pub e: u8,
    pub r: u8,
    /// Rest cells between pulses, innermost pair first.
    pub gaps: Vec<usize>,
    pub margin: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    pub runs: usize,
    pub max_n: usize,
    pub init_lo: f64,
    pub init_hi: f64,
    pub epsilon: f64,
    pub amplitude: f64,
    pub t_end: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupConfig {
    pub max_n: usize,
    pub dims: Vec<usize>,
    pub points: usize,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PbvpConfig {
    pub ell: f64,
    pub j: u32,
    pub tol: f64,
    pub ells: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    /// Empty means `$KINKS_OUT/<scenario>`.
    pub out_dir: String,
    pub nonlinearity: NonlinearityConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialDataSpec,
    pub ghca: GhcaConfig,
    pub ode: OdeConfig,
    pub blowup: BlowupConfig,
    pub pbvp: PbvpConfig,
}

impl ExperimentConfig {
    /// Shared baseline; scenarios override what they need.
    pub fn baseline(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed: 0,
            out_dir: String::new(),
            nonlinearity: NonlinearityConfig { f0: 0.2 },
            grid: GridConfig { h: 0.04, left: -25.0, right: 25.0, boundary: BoundaryKind::Neumann, frame: FrameKind::Lab, freeze: false },
            time: TimeConfig { dt: 0.1, t_end: 100.0, observe_every: 10 },
            initial: InitialDataSpec::default(),
            ghca: GhcaConfig { e: 2, r: 4, gaps: vec![12, 8, 8, 8], margin: 10, steps: 200 },
            ode: OdeConfig { runs: 100, max_n: 6, init_lo: 1.0, init_hi: 5.0, epsilon: 0.5, amplitude: 1.0, t_end: 1e4, samples: 400 },
            blowup: BlowupConfig { max_n: 10, dims: vec![2, 3, 4, 6], points: 100_000, t_end: 200.0 },
            pbvp: PbvpConfig { ell: 4.0, j: 1, tol: 1e-12, ells: vec![0.5, 1.0, 2.0, 4.0, 8.0] },
        }
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        Nonlinearity::new(self.nonlinearity.f0).expect("validated configuration")
    }

    /// Merges `user` TOML over `defaults` and parses the result. Unknown keys
    /// and semantic problems are collected and reported together.
    pub fn from_toml_over(defaults: &ExperimentConfig, user: &str) -> Result<Self, ConfigError> {
        let user: toml::Table = user.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut base = toml::Table::try_from(defaults).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut unknown = Vec::new();
        merge(&mut base, user, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(ConfigError::Invalid(unknown.into_iter().map(|k| format!("unknown key `{k}`")).collect()));
        }
        let cfg: ExperimentConfig = toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configuration serializes to JSON")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        if let Err(e) = Nonlinearity::new(self.nonlinearity.f0) {
            v.push(format!("nonlinearity.f0: {e}"));
        }
        let g = &self.grid;
        if !(g.h > 0.0) {
            v.push(format!("grid.h must be positive, got {}", g.h));
        }
        if !(g.right > g.left) {
            v.push(format!("grid.right ({}) must exceed grid.left ({})", g.right, g.left));
        } else if g.h > 0.0 && (g.right - g.left) / g.h < 3.0 {
            v.push("grid must contain at least 3 nodes".to_string());
        }
        if g.boundary == BoundaryKind::Periodic && (g.left + g.right).abs() > 1e-12 {
            v.push("periodic grids must be symmetric: grid.left = -grid.right".to_string());
        }
        let t = &self.time;
        if !(t.dt > 0.0) {
            v.push(format!("time.dt must be positive, got {}", t.dt));
        }
        if !(t.t_end >= 0.0) {
            v.push(format!("time.t_end must be non-negative, got {}", t.t_end));
        }
        if t.observe_every == 0 {
            v.push("time.observe_every must be at least 1".to_string());
        }
        if let Err(e) = self.initial.validate() {
            v.push(format!("initial: {e}"));
        }
        let ca = &self.ghca;
        if let Err(e) = kinks::ghca::CARule::new(ca.e, ca.r) {
            v.push(format!("ghca: {e}"));
        }
        if ca.gaps.is_empty() {
            v.push("ghca.gaps must list at least one gap".to_string());
        }
        let o = &self.ode;
        if o.runs == 0 {
            v.push("ode.runs must be at least 1".to_string());
        }
        if !(1..=12).contains(&o.max_n) {
            v.push(format!("ode.max_n must lie in 1..=12, got {}", o.max_n));
        }
        if !(o.init_lo < o.init_hi) {
            v.push(format!("ode.init_lo ({}) must be below ode.init_hi ({})", o.init_lo, o.init_hi));
        }
        if !(o.epsilon > 0.0) {
            v.push(format!("ode.epsilon must be positive, got {}", o.epsilon));
        }
        if !(o.amplitude >= 0.0) {
            v.push(format!("ode.amplitude must be non-negative, got {}", o.amplitude));
        }
        if !(o.t_end > 0.0) {
            v.push(format!("ode.t_end must be positive, got {}", o.t_end));
        }
        if o.samples < 2 {
            v.push("ode.samples must be at least 2".to_string());
        }
        let b = &self.blowup;
        if !(1..=12).contains(&b.max_n) {
            v.push(format!("blowup.max_n must lie in 1..=12, got {}", b.max_n));
        }
        if b.dims.iter().any(|&n| !(2..=12).contains(&n)) {
            v.push("blowup.dims entries must lie in 2..=12".to_string());
        }
        if b.points == 0 {
            v.push("blowup.points must be at least 1".to_string());
        }
        let p = &self.pbvp;
        if !(p.ell > 0.0) {
            v.push(format!("pbvp.ell must be positive, got {}", p.ell));
        }
        if p.j == 0 {
            v.push("pbvp.j must be at least 1".to_string());
        }
        if !(p.tol > 0.0) {
            v.push(format!("pbvp.tol must be positive, got {}", p.tol));
        }
        if p.ells.iter().any(|&l| !(l > 0.0)) {
            v.push("pbvp.ells entries must be positive".to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }
}

fn merge(base: &mut toml::Table, user: toml::Table, prefix: &str, unknown: &mut Vec<String>) {
    for (key, value) in user {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u, &path, unknown),
            (Some(slot), v) => *slot = v,
            (None, _) => unknown.push(path),
        }
    }
}
