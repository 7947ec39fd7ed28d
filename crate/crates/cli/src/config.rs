//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! Lines starting with `#` and blank lines are ignored. Every key has a
//! default, so an empty file describes the 1-D quadratic on `[-4, 4]` with
//! `h = 0.01`. [`RunConfig::to_text`] writes every key back out and parsing
//! that text reproduces the configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ergodic_hjb::bounds::BoundsConfig;
use ergodic_hjb::discount::{dyadic_schedule, Backend, DiscountConfig};
use ergodic_hjb::penalty::{halving_schedule, PenaltyConfig};
use ergodic_hjb::simulate::SimConfig;
use ergodic_hjb::{CostFamily, CostFunction, Grid, SolverTolerances};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn bad(key: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Eigen,
    Radial,
    Bounds,
    Simulate,
    Sweep,
    Crosscheck,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Eigen,
        Subcommand::Radial,
        Subcommand::Bounds,
        Subcommand::Simulate,
        Subcommand::Sweep,
        Subcommand::Crosscheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Eigen => "eigen",
            Subcommand::Radial => "radial",
            Subcommand::Bounds => "bounds",
            Subcommand::Simulate => "simulate",
            Subcommand::Sweep => "sweep",
            Subcommand::Crosscheck => "crosscheck",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyName {
    Quadratic,
    Power,
    Anisotropic,
    RadialTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub family: FamilyName,
    pub dim: usize,
    pub coefficient: f64,
    pub exponent: f64,
    /// Row-major `n×n` matrix for the anisotropic family.
    pub matrix: Vec<f64>,
    pub table_radii: Vec<f64>,
    pub table_values: Vec<f64>,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub damping: f64,
    pub tolerances: SolverTolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    /// `None` reflects at the radial oracle's `r₀`.
    pub radius: Option<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub burn_in: f64,
    pub radii: Vec<f64>,
}

/// Tolerances of the `crosscheck` ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckSpec {
    pub lambda_tol: f64,
    pub backend_tol: f64,
    pub gap_tol: f64,
    pub mc_allowance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub cost: CostSpec,
    pub half_width: f64,
    pub nodes: usize,
    pub k_max: u32,
    pub backend: String,
    pub lambda_rel_tol: f64,
    pub edge_slack: f64,
    pub solver: SolverTolerances,
    pub penalty: PenaltySpec,
    /// Mollification radii in units of the grid spacing.
    pub bounds_radii: Vec<f64>,
    pub bounds_gradient_slack: f64,
    pub bounds_edge_slack: f64,
    pub bounds_far_field_slack: f64,
    pub sim: SimSpec,
    pub seed: u64,
    pub crosscheck: CrosscheckSpec,
    /// Where files go; not part of the echo.
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: Subcommand::Eigen,
            cost: CostSpec {
                family: FamilyName::Quadratic,
                dim: 1,
                coefficient: 1.0,
                exponent: 2.0,
                matrix: vec![1.0],
                table_radii: vec![],
                table_values: vec![],
                shift: 0.0,
            },
            half_width: 4.0,
            nodes: 801,
            k_max: 24,
            backend: "direct".into(),
            lambda_rel_tol: 1e-4,
            edge_slack: 1e-6,
            solver: SolverTolerances::default(),
            penalty: PenaltySpec {
                epsilon_start: 1e-1,
                epsilon_end: 1e-5,
                damping: 1.0,
                tolerances: SolverTolerances {
                    gradient_slack: 8e-4,
                    ..SolverTolerances::default()
                },
            },
            bounds_radii: vec![4.0, 8.0],
            bounds_gradient_slack: 1e-2,
            bounds_edge_slack: 1e-6,
            bounds_far_field_slack: 1e-2,
            sim: SimSpec {
                radius: None,
                dt: 1e-4,
                horizon: 200.0,
                paths: 32,
                burn_in: 0.05,
                radii: vec![0.8, 1.0, 1.145, 1.3, 1.6],
            },
            seed: 0,
            crosscheck: CrosscheckSpec {
                lambda_tol: 1e-2,
                backend_tol: 1e-3,
                gap_tol: 5e-2,
                mc_allowance: 0.05,
            },
            output_dir: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| bad(key, e))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.is_empty() {
        return Ok(vec![]);
    }
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn show_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Splits configuration text into ordered key/value pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (k, v) in parse_pairs(text)? {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, sets: &[S]) -> Result<(), ConfigError> {
        for s in sets {
            let s = s.as_ref();
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| bad(s, "override must look like key=value"))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "subcommand" => self.subcommand = v.parse().map_err(|e: String| bad(key, e))?,
            "cost.family" => {
                self.cost.family = match v {
                    "quadratic" => FamilyName::Quadratic,
                    "power" => FamilyName::Power,
                    "anisotropic" => FamilyName::Anisotropic,
                    "radial_table" => FamilyName::RadialTable,
                    _ => return Err(bad(key, format!("unknown family `{v}`"))),
                }
            }
            "cost.dim" => self.cost.dim = num(key, v)?,
            "cost.coefficient" => self.cost.coefficient = num(key, v)?,
            "cost.exponent" => self.cost.exponent = num(key, v)?,
            "cost.matrix" => self.cost.matrix = list(key, v)?,
            "cost.table_radii" => self.cost.table_radii = list(key, v)?,
            "cost.table_values" => self.cost.table_values = list(key, v)?,
            "cost.shift" => self.cost.shift = num(key, v)?,
            "grid.half_width" => self.half_width = num(key, v)?,
            "grid.nodes" => self.nodes = num(key, v)?,
            "discount.k_max" => self.k_max = num(key, v)?,
            "discount.backend" => {
                if v != "direct" && v != "penalty" {
                    return Err(bad(key, "must be `direct` or `penalty`"));
                }
                self.backend = v.to_string();
            }
            "discount.lambda_rel_tol" => self.lambda_rel_tol = num(key, v)?,
            "discount.edge_slack" => self.edge_slack = num(key, v)?,
            "solver.newton_tol" => self.solver.newton_tol = num(key, v)?,
            "solver.max_iters" => self.solver.max_iters = num(key, v)?,
            "solver.gradient_slack" => self.solver.gradient_slack = num(key, v)?,
            "solver.convexity_slack" => self.solver.convexity_slack = num(key, v)?,
            "penalty.epsilon_start" => self.penalty.epsilon_start = num(key, v)?,
            "penalty.epsilon_end" => self.penalty.epsilon_end = num(key, v)?,
            "penalty.damping" => self.penalty.damping = num(key, v)?,
            "penalty.newton_tol" => self.penalty.tolerances.newton_tol = num(key, v)?,
            "penalty.max_iters" => self.penalty.tolerances.max_iters = num(key, v)?,
            "penalty.gradient_slack" => self.penalty.tolerances.gradient_slack = num(key, v)?,
            "bounds.radii" => self.bounds_radii = list(key, v)?,
            "bounds.gradient_slack" => self.bounds_gradient_slack = num(key, v)?,
            "bounds.edge_slack" => self.bounds_edge_slack = num(key, v)?,
            "bounds.far_field_slack" => self.bounds_far_field_slack = num(key, v)?,
            "sim.radius" => {
                self.sim.radius = if v == "oracle" {
                    None
                } else {
                    Some(num(key, v)?)
                }
            }
            "sim.dt" => self.sim.dt = num(key, v)?,
            "sim.horizon" => self.sim.horizon = num(key, v)?,
            "sim.paths" => self.sim.paths = num(key, v)?,
            "sim.burn_in" => self.sim.burn_in = num(key, v)?,
            "sim.radii" => self.sim.radii = list(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "crosscheck.lambda_tol" => self.crosscheck.lambda_tol = num(key, v)?,
            "crosscheck.backend_tol" => self.crosscheck.backend_tol = num(key, v)?,
            "crosscheck.gap_tol" => self.crosscheck.gap_tol = num(key, v)?,
            "crosscheck.mc_allowance" => self.crosscheck.mc_allowance = num(key, v)?,
            "output.dir" => self.output_dir = Some(v.to_string()),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Every key except `output.dir`, sorted.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let family = match self.cost.family {
            FamilyName::Quadratic => "quadratic",
            FamilyName::Power => "power",
            FamilyName::Anisotropic => "anisotropic",
            FamilyName::RadialTable => "radial_table",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("subcommand", self.subcommand.to_string()),
            ("cost.family", family.into()),
            ("cost.dim", self.cost.dim.to_string()),
            ("cost.coefficient", self.cost.coefficient.to_string()),
            ("cost.exponent", self.cost.exponent.to_string()),
            ("cost.matrix", show_list(&self.cost.matrix)),
            ("cost.table_radii", show_list(&self.cost.table_radii)),
            ("cost.table_values", show_list(&self.cost.table_values)),
            ("cost.shift", self.cost.shift.to_string()),
            ("grid.half_width", self.half_width.to_string()),
            ("grid.nodes", self.nodes.to_string()),
            ("discount.k_max", self.k_max.to_string()),
            ("discount.backend", self.backend.clone()),
            ("discount.lambda_rel_tol", self.lambda_rel_tol.to_string()),
            ("discount.edge_slack", self.edge_slack.to_string()),
            ("solver.newton_tol", self.solver.newton_tol.to_string()),
            ("solver.max_iters", self.solver.max_iters.to_string()),
            (
                "solver.gradient_slack",
                self.solver.gradient_slack.to_string(),
            ),
            (
                "solver.convexity_slack",
                self.solver.convexity_slack.to_string(),
            ),
            (
                "penalty.epsilon_start",
                self.penalty.epsilon_start.to_string(),
            ),
            ("penalty.epsilon_end", self.penalty.epsilon_end.to_string()),
            ("penalty.damping", self.penalty.damping.to_string()),
            (
                "penalty.newton_tol",
                self.penalty.tolerances.newton_tol.to_string(),
            ),
            (
                "penalty.max_iters",
                self.penalty.tolerances.max_iters.to_string(),
            ),
            (
                "penalty.gradient_slack",
                self.penalty.tolerances.gradient_slack.to_string(),
            ),
            ("bounds.radii", show_list(&self.bounds_radii)),
            (
                "bounds.gradient_slack",
                self.bounds_gradient_slack.to_string(),
            ),
            ("bounds.edge_slack", self.bounds_edge_slack.to_string()),
            (
                "bounds.far_field_slack",
                self.bounds_far_field_slack.to_string(),
            ),
            (
                "sim.radius",
                self.sim.radius.map_or("oracle".into(), |r| r.to_string()),
            ),
            ("sim.dt", self.sim.dt.to_string()),
            ("sim.horizon", self.sim.horizon.to_string()),
            ("sim.paths", self.sim.paths.to_string()),
            ("sim.burn_in", self.sim.burn_in.to_string()),
            ("sim.radii", show_list(&self.sim.radii)),
            ("seed", self.seed.to_string()),
            (
                "crosscheck.lambda_tol",
                self.crosscheck.lambda_tol.to_string(),
            ),
            (
                "crosscheck.backend_tol",
                self.crosscheck.backend_tol.to_string(),
            ),
            ("crosscheck.gap_tol", self.crosscheck.gap_tol.to_string()),
            (
                "crosscheck.mc_allowance",
                self.crosscheck.mc_allowance.to_string(),
            ),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn cost_function(&self) -> Result<CostFunction, ConfigError> {
        let c = &self.cost;
        let base = match c.family {
            FamilyName::Quadratic => CostFamily::Quadratic,
            FamilyName::Power => CostFamily::Power {
                coefficient: c.coefficient,
                exponent: c.exponent,
            },
            FamilyName::Anisotropic => CostFamily::Anisotropic {
                matrix: c.matrix.clone(),
            },
            FamilyName::RadialTable => CostFamily::RadialTable {
                radii: c.table_radii.clone(),
                values: c.table_values.clone(),
            },
        };
        let family = if c.shift != 0.0 {
            CostFamily::Shifted {
                base: Box::new(base),
                shift: c.shift,
            }
        } else {
            base
        };
        CostFunction::new(family, c.dim).map_err(|e| bad("cost", e))
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.cost.dim, self.half_width, self.nodes).map_err(|e| bad("grid", e))
    }

    pub fn penalty_config(&self) -> Result<PenaltyConfig, ConfigError> {
        let p = &self.penalty;
        let c = PenaltyConfig {
            epsilon_schedule: halving_schedule(p.epsilon_start, p.epsilon_end),
            damping: p.damping,
            tolerances: p.tolerances,
        };
        c.validate().map_err(|e| bad("penalty", e))?;
        Ok(c)
    }

    /// The discount configuration with the given backend label.
    pub fn discount_config(&self, backend: &str) -> Result<DiscountConfig, ConfigError> {
        let backend = match backend {
            "penalty" => Backend::Penalty(self.penalty_config()?),
            _ => Backend::Direct,
        };
        let c = DiscountConfig {
            schedule: dyadic_schedule(self.k_max),
            backend,
            tolerances: self.solver,
            lambda_rel_tol: self.lambda_rel_tol,
            edge_slack: self.edge_slack,
        };
        c.validate().map_err(|e| bad("discount", e))?;
        Ok(c)
    }

    pub fn bounds_config(&self, grid: &Grid) -> Result<BoundsConfig, ConfigError> {
        let c = BoundsConfig {
            mollification_radii: self
                .bounds_radii
                .iter()
                .map(|r| r * grid.spacing())
                .collect(),
            gradient_slack: self.bounds_gradient_slack,
            edge_slack: self.bounds_edge_slack,
            far_field_slack: self.bounds_far_field_slack,
        };
        c.validate().map_err(|e| bad("bounds", e))?;
        Ok(c)
    }

    /// The simulation configuration reflecting at `radius`.
    pub fn sim_config(&self, radius: f64) -> Result<SimConfig, ConfigError> {
        let c = SimConfig {
            dim: self.cost.dim,
            radius,
            dt: self.sim.dt,
            horizon: self.sim.horizon,
            paths: self.sim.paths,
            seed: self.seed,
            burn_in: self.sim.burn_in,
        };
        c.validate().map_err(|e| bad("sim", e))?;
        Ok(c)
    }

    /// Checks everything the subcommand will need before any work is done.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = self.cost_function()?;
        let needs_grid = matches!(
            self.subcommand,
            Subcommand::Eigen | Subcommand::Bounds | Subcommand::Crosscheck
        );
        if needs_grid {
            let grid = self.grid()?;
            self.bounds_config(&grid)?;
            self.discount_config(&self.backend)?;
            self.penalty_config()?;
            if self.crosscheck.lambda_tol <= 0.0 || self.crosscheck.backend_tol <= 0.0 {
                return Err(bad("crosscheck", "tolerances must be positive"));
            }
        }
        let needs_oracle = match self.subcommand {
            Subcommand::Radial | Subcommand::Crosscheck => true,
            Subcommand::Simulate => self.sim.radius.is_none(),
            _ => false,
        };
        if needs_oracle && !f.is_radial() {
            return Err(bad("cost.family", "this subcommand needs a radial cost"));
        }
        if matches!(
            self.subcommand,
            Subcommand::Simulate | Subcommand::Sweep | Subcommand::Crosscheck
        ) {
            self.sim_config(self.sim.radius.unwrap_or(1.0))?;
            if let Some(r) = self.sim.radii.iter().find(|r| r.is_nan() || **r <= 0.0) {
                return Err(bad("sim.radii", format!("{r} is not positive")));
            }
        }
        Ok(())
    }
}
