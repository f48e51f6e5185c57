//! Scenario files: JSON descriptions of a market, optionally swept over the
//! switching cost and the number of firms.
//!
//! ```json
//! {
//!   "id": "sweep_s",
//!   "firms": 2,
//!   "mu": "symmetric",
//!   "costs": 0.0,
//!   "s": { "from": 0.05, "to": 0.9, "steps": 18 },
//!   "distributions": { "family": "uniform" },
//!   "pricing_mode": "uniform",
//!   "exit_allowed": true,
//!   "solver": { "damping": 0.5 }
//! }
//! ```
//!
//! `firms` may be a list to sweep over `n`; `mu`, `costs` and
//! `distributions` then have to be broadcast forms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::ValuationDistribution;
use crate::error::{Error, Result};
use crate::market::{MarketConfig, PricingMode};
use crate::solver::SolverSettings;

pub const DEFAULT_START: f64 = 0.5;
pub const DEFAULT_MC_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Firms {
    One(usize),
    Sweep(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetricTag {
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Shares {
    Symmetric(SymmetricTag),
    Explicit(Vec<f64>),
}

impl Default for Shares {
    fn default() -> Self {
        Shares::Symmetric(SymmetricTag::Symmetric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Costs {
    Scalar(f64),
    Explicit(Vec<f64>),
}

impl Default for Costs {
    fn default() -> Self {
        Costs::Scalar(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SwitchingCost {
    Value(f64),
    Sweep { from: f64, to: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

impl DistSpec {
    pub fn build(&self) -> Result<ValuationDistribution> {
        ValuationDistribution::from_params(&self.family, &self.params)
    }

    pub fn of(d: &ValuationDistribution) -> Self {
        let (family, params) = d.to_params();
        Self {
            family: family.into(),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distributions {
    Broadcast(DistSpec),
    PerFirm(Vec<DistSpec>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

impl SolverOverrides {
    pub fn apply(&self, base: SolverSettings) -> SolverSettings {
        SolverSettings {
            damping: self.damping.unwrap_or(base.damping),
            tol: self.tol.unwrap_or(base.tol),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            delta_s: self.delta_s.unwrap_or(base.delta_s),
            grid_points: self.grid_points.unwrap_or(base.grid_points),
        }
    }
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub firms: Firms,
    #[serde(default)]
    pub mu: Shares,
    #[serde(default)]
    pub costs: Costs,
    pub s: SwitchingCost,
    pub distributions: Distributions,
    #[serde(default)]
    pub pricing_mode: PricingMode,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub exit_allowed: bool,
    #[serde(default, skip_serializing_if = "is_default_overrides")]
    pub solver: SolverOverrides,
    /// Uniform starting price of the best-response iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    /// Fixed duopoly prices for region grids; equilibrium prices otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<u64>,
    /// Also compute extremal equilibria at every point.
    #[serde(default, skip_serializing_if = "is_false")]
    pub extremal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

fn is_default_overrides(o: &SolverOverrides) -> bool {
    *o == SolverOverrides::default()
}

/// One market of a scenario.
#[derive(Debug, Clone)]
pub struct Point {
    pub n: usize,
    pub s: f64,
    pub config: MarketConfig,
}

/// Sweep values rounded to 12 decimals so that `0.05 + k * 0.05` prints as
/// written.
fn sweep_values(from: f64, to: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|k| {
            let x = from + (to - from) * k as f64 / (steps - 1) as f64;
            (x * 1e12).round() / 1e12
        })
        .collect()
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Scenario(format!("parse error at line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Single-market scenario describing `config` exactly.
    pub fn from_config(config: &MarketConfig) -> Self {
        Self {
            id: None,
            firms: Firms::One(config.n),
            mu: Shares::Explicit(config.mu.clone()),
            costs: Costs::Explicit(config.costs.clone()),
            s: SwitchingCost::Value(config.s),
            distributions: Distributions::PerFirm(config.dists.iter().map(DistSpec::of).collect()),
            pricing_mode: config.pricing_mode,
            exit_allowed: config.exit_allowed,
            solver: SolverOverrides::default(),
            start: None,
            prices: None,
            mc_samples: None,
            extremal: false,
            resolution: None,
        }
    }

    pub fn firm_counts(&self) -> Vec<usize> {
        match &self.firms {
            Firms::One(n) => vec![*n],
            Firms::Sweep(ns) => ns.clone(),
        }
    }

    pub fn s_values(&self) -> Vec<f64> {
        match self.s {
            SwitchingCost::Value(s) => vec![s],
            SwitchingCost::Sweep { from, to, steps } => sweep_values(from, to, steps.max(2)),
        }
    }

    pub fn settings(&self) -> SolverSettings {
        self.solver.apply(SolverSettings::default())
    }

    fn sweep_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let SwitchingCost::Sweep { from, to, steps } = self.s {
            if !(from < to) {
                out.push(format!("s sweep needs from < to, got {from} and {to}"));
            }
            if steps < 2 {
                out.push(format!("s sweep needs at least 2 steps, got {steps}"));
            }
        }
        if let Firms::Sweep(ns) = &self.firms {
            if ns.is_empty() {
                out.push("firm sweep is empty".into());
            }
            if matches!(self.mu, Shares::Explicit(_)) || matches!(self.costs, Costs::Explicit(_)) {
                out.push("a firm sweep needs symmetric shares and a scalar cost".into());
            }
            if matches!(self.distributions, Distributions::PerFirm(_)) {
                out.push("a firm sweep needs a single broadcast distribution".into());
            }
        }
        if let Some(p) = &self.prices {
            if p.len() != 2 {
                out.push(format!("region prices need 2 entries, got {}", p.len()));
            }
        }
        out
    }

    fn config(&self, n: usize, s: f64) -> Result<MarketConfig> {
        let dists = match &self.distributions {
            Distributions::Broadcast(d) => vec![d.build()?; n],
            Distributions::PerFirm(ds) => ds.iter().map(DistSpec::build).collect::<Result<_>>()?,
        };
        let config = MarketConfig {
            n,
            mu: match &self.mu {
                Shares::Symmetric(_) => vec![1.0 / n.max(1) as f64; n],
                Shares::Explicit(m) => m.clone(),
            },
            costs: match &self.costs {
                Costs::Scalar(c) => vec![*c; n],
                Costs::Explicit(c) => c.clone(),
            },
            s,
            dists,
            pricing_mode: self.pricing_mode,
            exit_allowed: self.exit_allowed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Every market of the sweep, `n` outer and `s` inner, each validated.
    pub fn points(&self) -> Result<Vec<Point>> {
        let problems = self.sweep_problems();
        if !problems.is_empty() {
            return Err(Error::Scenario(problems.join("; ")));
        }
        let mut out = Vec::new();
        for n in self.firm_counts() {
            for s in self.s_values() {
                out.push(Point {
                    n,
                    s,
                    config: self.config(n, s)?,
                });
            }
        }
        Ok(out)
    }
}
