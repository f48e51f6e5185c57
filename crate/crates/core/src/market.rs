//! Market configuration and price profiles.

use serde::{Deserialize, Serialize};

use crate::distributions::ValuationDistribution;
use crate::error::{ConfigViolation, Error, Result};

const SHARE_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMode {
    /// One price per firm, charged to every buyer.
    #[default]
    Uniform,
    /// Separate prices for a firm's initial consumers and for switchers.
    Discriminatory,
}

/// Which of a firm's prices a consumer faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriceKind {
    /// Price paid by consumers who arrived at the firm initially.
    Own,
    /// Price paid by consumers switching in from a rival.
    Switch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub n: usize,
    /// Share of consumers initially arriving at each firm.
    pub mu: Vec<f64>,
    /// Marginal costs.
    pub costs: Vec<f64>,
    /// Switching cost.
    pub s: f64,
    pub dists: Vec<ValuationDistribution>,
    pub pricing_mode: PricingMode,
    /// When false consumers must buy from someone.
    pub exit_allowed: bool,
}

impl MarketConfig {
    /// `n` identical firms with equal shares.
    pub fn symmetric(n: usize, dist: ValuationDistribution, cost: f64, s: f64) -> Self {
        Self {
            n,
            mu: vec![1.0 / n as f64; n],
            costs: vec![cost; n],
            s,
            dists: vec![dist; n],
            pricing_mode: PricingMode::Uniform,
            exit_allowed: true,
        }
    }

    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..self.clone() }
    }

    pub fn with_mode(mut self, mode: PricingMode) -> Self {
        self.pricing_mode = mode;
        self
    }

    pub fn with_exit(mut self, exit_allowed: bool) -> Self {
        self.exit_allowed = exit_allowed;
        self
    }

    /// Every violated invariant; empty when the configuration is valid.
    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        if self.n < 2 {
            out.push(ConfigViolation::TooFewFirms(self.n));
        }
        for (field, len) in [
            ("mu", self.mu.len()),
            ("costs", self.costs.len()),
            ("distributions", self.dists.len()),
        ] {
            if len != self.n {
                out.push(ConfigViolation::LengthMismatch {
                    field,
                    expected: self.n,
                    found: len,
                });
            }
        }
        for (firm, &value) in self.mu.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                out.push(ConfigViolation::ShareOutOfRange { firm, value });
            }
        }
        let sum: f64 = self.mu.iter().sum();
        if !((sum - 1.0).abs() <= SHARE_SUM_TOL) {
            out.push(ConfigViolation::SharesSum((sum * 1e12).round() / 1e12));
        }
        if !(self.s > 0.0) {
            out.push(ConfigViolation::NonPositiveSwitchingCost(self.s));
        }
        for (firm, &value) in self.costs.iter().enumerate() {
            if !(0.0..1.0).contains(&value) {
                out.push(ConfigViolation::CostOutOfRange { firm, value });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Firms share shares, costs and distributions exactly.
    pub fn is_symmetric(&self) -> bool {
        self.mu.windows(2).all(|w| w[0] == w[1])
            && self.costs.windows(2).all(|w| w[0] == w[1])
            && self.dists.windows(2).all(|w| w[0] == w[1])
    }

    pub fn has_kinks(&self) -> bool {
        self.dists.iter().any(ValuationDistribution::has_kinks)
    }

    /// Number of price variables: `n` in uniform mode, `2n` otherwise.
    pub fn n_slots(&self) -> usize {
        match self.pricing_mode {
            PricingMode::Uniform => self.n,
            PricingMode::Discriminatory => 2 * self.n,
        }
    }

    pub fn slot(&self, firm: usize, kind: PriceKind) -> usize {
        match (self.pricing_mode, kind) {
            (PricingMode::Uniform, _) => firm,
            (PricingMode::Discriminatory, PriceKind::Own) => 2 * firm,
            (PricingMode::Discriminatory, PriceKind::Switch) => 2 * firm + 1,
        }
    }

    /// Which price a slot holds; every slot is a firm's own price in
    /// uniform mode.
    pub fn slot_kind(&self, slot: usize) -> PriceKind {
        match self.pricing_mode {
            PricingMode::Discriminatory if slot % 2 == 1 => PriceKind::Switch,
            _ => PriceKind::Own,
        }
    }

    /// Firm owning a price slot.
    pub fn slot_firm(&self, slot: usize) -> usize {
        match self.pricing_mode {
            PricingMode::Uniform => slot,
            PricingMode::Discriminatory => slot / 2,
        }
    }
}

/// Own/switch price pair of one firm under discrimination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePair {
    pub own: f64,
    pub switch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriceProfile {
    Uniform(Vec<f64>),
    Discriminatory(Vec<PricePair>),
}

impl PriceProfile {
    /// Same price everywhere, in the shape `config` expects.
    pub fn constant(config: &MarketConfig, p: f64) -> Self {
        match config.pricing_mode {
            PricingMode::Uniform => PriceProfile::Uniform(vec![p; config.n]),
            PricingMode::Discriminatory => {
                PriceProfile::Discriminatory(vec![PricePair { own: p, switch: p }; config.n])
            }
        }
    }

    /// Rebuilds a profile from flat slot values (see [`MarketConfig::slot`]).
    pub fn from_slots(mode: PricingMode, slots: &[f64]) -> Self {
        match mode {
            PricingMode::Uniform => PriceProfile::Uniform(slots.to_vec()),
            PricingMode::Discriminatory => PriceProfile::Discriminatory(
                slots
                    .chunks(2)
                    .map(|c| PricePair {
                        own: c[0],
                        switch: c[1],
                    })
                    .collect(),
            ),
        }
    }

    pub fn slots(&self) -> Vec<f64> {
        match self {
            PriceProfile::Uniform(p) => p.clone(),
            PriceProfile::Discriminatory(p) => p.iter().flat_map(|q| [q.own, q.switch]).collect(),
        }
    }

    pub fn mode(&self) -> PricingMode {
        match self {
            PriceProfile::Uniform(_) => PricingMode::Uniform,
            PriceProfile::Discriminatory(_) => PricingMode::Discriminatory,
        }
    }

    pub fn n_firms(&self) -> usize {
        match self {
            PriceProfile::Uniform(p) => p.len(),
            PriceProfile::Discriminatory(p) => p.len(),
        }
    }

    #[inline]
    pub fn price(&self, firm: usize, kind: PriceKind) -> f64 {
        match (self, kind) {
            (PriceProfile::Uniform(p), _) => p[firm],
            (PriceProfile::Discriminatory(p), PriceKind::Own) => p[firm].own,
            (PriceProfile::Discriminatory(p), PriceKind::Switch) => p[firm].switch,
        }
    }

    pub fn own(&self, firm: usize) -> f64 {
        self.price(firm, PriceKind::Own)
    }

    pub fn switch(&self, firm: usize) -> f64 {
        self.price(firm, PriceKind::Switch)
    }

    /// Checks shape against `config` and that every price lies in `[0,1]`.
    pub fn check(&self, config: &MarketConfig) -> Result<()> {
        if self.mode() != config.pricing_mode {
            return Err(Error::Prices(format!(
                "profile is {:?} but market prices {:?}",
                self.mode(),
                config.pricing_mode
            )));
        }
        if self.n_firms() != config.n {
            return Err(Error::Prices(format!(
                "{} prices for {} firms",
                self.n_firms(),
                config.n
            )));
        }
        if let Some(p) = self.slots().into_iter().find(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Prices(format!("price {p} outside [0,1]")));
        }
        Ok(())
    }
}
