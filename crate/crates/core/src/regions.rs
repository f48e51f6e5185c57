//! Consumer decision regions of a duopoly over the valuation square, one
//! panel per initial firm, and the marginal-consumer lines separating them.
//!
//! Firm 0 plays `X` and firm 1 plays `Y`; panel `k` holds the consumers who
//! arrived at firm `k`. Valuation `v_X` runs along the first axis.

use crate::demand::FirmEval;
use crate::error::{Error, Result};
use crate::market::{MarketConfig, PriceProfile};
use crate::oracle::{consumer_choice, Decision};

pub const DEFAULT_RESOLUTION: usize = 400;

const BISECT_STEPS: usize = 60;

/// What a consumer in a panel does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Stay,
    Switch,
    Exit,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Stay => "stay",
            Label::Switch => "switch",
            Label::Exit => "exit",
        }
    }

    fn of(decision: Decision, initial: usize) -> Self {
        match decision {
            Decision::Exit => Label::Exit,
            Decision::Buy(j) if j == initial => Label::Stay,
            Decision::Buy(_) => Label::Switch,
        }
    }
}

/// Boundary of the set of consumers in `panel` who buy from `firm`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub panel: usize,
    pub firm: usize,
    /// `(v_X, v_Y)` vertices.
    pub points: Vec<(f64, f64)>,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub resolution: usize,
    pub prices: [f64; 2],
    pub s: f64,
    /// Row-major labels, row index along `v_Y`, one vector per panel.
    pub labels: [Vec<Label>; 2],
    /// Marginal lines of each firm in each panel.
    pub polylines: Vec<Polyline>,
}

impl RegionGrid {
    /// Centre `(v_X, v_Y)` of cell `(col, row)`.
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        let h = 1.0 / self.resolution as f64;
        ((col as f64 + 0.5) * h, (row as f64 + 0.5) * h)
    }

    pub fn label(&self, panel: usize, col: usize, row: usize) -> Label {
        self.labels[panel][row * self.resolution + col]
    }

    pub fn polyline(&self, panel: usize, firm: usize) -> Option<&Polyline> {
        self.polylines.iter().find(|p| p.panel == panel && p.firm == firm)
    }
}

fn require_duopoly(config: &MarketConfig) -> Result<()> {
    if config.n != 2 {
        return Err(Error::Prices(format!(
            "decision regions need a duopoly, got {} firms",
            config.n
        )));
    }
    Ok(())
}

fn buys(prices: &PriceProfile, config: &MarketConfig, panel: usize, firm: usize, v: [f64; 2]) -> bool {
    consumer_choice(&v, prices, config.s, panel, config.exit_allowed) == Decision::Buy(firm)
}

/// Smallest `v_firm` in `[0,1]` at which a consumer of `panel` buys from
/// `firm`, with the other valuation fixed at `other`. `None` if never.
fn threshold(config: &MarketConfig, prices: &PriceProfile, panel: usize, firm: usize, other: f64) -> Option<f64> {
    let at = |t: f64| {
        let mut v = [0.0; 2];
        v[firm] = t;
        v[1 - firm] = other;
        buys(prices, config, panel, firm, v)
    };
    if !at(1.0) {
        return None;
    }
    if at(0.0) {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECT_STEPS {
        let mid = 0.5 * (lo + hi);
        if at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Traces the lower boundary of the region where `panel` buys from `firm`
/// by bisecting along every grid line of the other valuation, then closes
/// it where it meets the top edge.
fn trace(config: &MarketConfig, prices: &PriceProfile, panel: usize, firm: usize, resolution: usize) -> Polyline {
    let to_xy = |other: f64, t: f64| if firm == 1 { (other, t) } else { (t, other) };
    let mut points = Vec::new();
    let mut last_inside: Option<f64> = None;
    let mut first_outside: Option<f64> = None;
    for k in 0..=resolution {
        let other = k as f64 / resolution as f64;
        match threshold(config, prices, panel, firm, other) {
            Some(t) if t < 1.0 => {
                points.push(to_xy(other, t));
                last_inside = Some(other);
            }
            _ => {
                if last_inside.is_some() {
                    first_outside = Some(other);
                    break;
                }
            }
        }
    }
    // the boundary leaves through the top edge between the last two lines
    if let (Some(a), Some(b)) = (last_inside, first_outside) {
        let buys_at_top = |other: f64| {
            let mut v = [0.0; 2];
            v[firm] = 1.0;
            v[1 - firm] = other;
            buys(prices, config, panel, firm, v)
        };
        let (mut lo, mut hi) = (a, b);
        for _ in 0..BISECT_STEPS {
            let mid = 0.5 * (lo + hi);
            if buys_at_top(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        points.push(to_xy(lo, 1.0));
    }
    Polyline { panel, firm, points }
}

/// Decision labels at cell centres and marginal lines for both panels.
pub fn region_grid(config: &MarketConfig, prices: &PriceProfile, resolution: usize) -> Result<RegionGrid> {
    require_duopoly(config)?;
    prices.check(config)?;
    let res = resolution.max(1);
    let h = 1.0 / res as f64;
    let labels = [0, 1].map(|panel| {
        let mut out = Vec::with_capacity(res * res);
        for row in 0..res {
            for col in 0..res {
                let v = [(col as f64 + 0.5) * h, (row as f64 + 0.5) * h];
                out.push(Label::of(
                    consumer_choice(&v, prices, config.s, panel, config.exit_allowed),
                    panel,
                ));
            }
        }
        out
    });
    let polylines = [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .map(|&(panel, firm)| trace(config, prices, panel, firm, res))
        .collect();
    Ok(RegionGrid {
        resolution: res,
        prices: [prices.own(0), prices.own(1)],
        s: config.s,
        labels,
        polylines,
    })
}

/// Masses of consumers in one panel, as fractions of the panel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PanelMasses {
    pub stay: f64,
    pub switch: f64,
    pub exit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasses {
    /// Density-weighted cell counts.
    pub grid: [PanelMasses; 2],
    /// Same masses read off the quadrature demand.
    pub analytic: [PanelMasses; 2],
}

pub fn region_masses(config: &MarketConfig, prices: &PriceProfile, grid: &RegionGrid) -> Result<RegionMasses> {
    require_duopoly(config)?;
    let res = grid.resolution;
    let area = 1.0 / (res * res) as f64;
    let mut from_grid = [PanelMasses::default(); 2];
    for (panel, masses) in from_grid.iter_mut().enumerate() {
        for row in 0..res {
            for col in 0..res {
                let (x, y) = grid.cell_center(col, row);
                let w = config.dists[0].density(x) * config.dists[1].density(y) * area;
                match grid.label(panel, col, row) {
                    Label::Stay => masses.stay += w,
                    Label::Switch => masses.switch += w,
                    Label::Exit => masses.exit += w,
                }
            }
        }
    }
    let d = [
        FirmEval::new(config, prices, 0)?.demand(),
        FirmEval::new(config, prices, 1)?.demand(),
    ];
    let analytic = [0, 1].map(|panel| {
        let mu = config.mu[panel];
        let stay = d[panel].initial / mu;
        let switch = d[1 - panel].switch_in / mu;
        PanelMasses {
            stay,
            switch,
            exit: (1.0 - stay - switch).max(0.0),
        }
    });
    Ok(RegionMasses {
        grid: from_grid,
        analytic,
    })
}

/// Rate at which firm `Y`'s marginal line shortens as `s` rises, in the
/// panel of consumers starting at `X` and in the panel starting at `Y`,
/// from traced polylines at `s` and `s + ds`.
pub fn marginal_line_factors(
    config: &MarketConfig,
    prices: &PriceProfile,
    ds: f64,
    resolution: usize,
) -> Result<(f64, f64)> {
    let before = region_grid(config, prices, resolution)?;
    let after = region_grid(&config.with_s(config.s + ds), prices, resolution)?;
    let drop = |panel: usize| -> Result<f64> {
        let a = before
            .polyline(panel, 1)
            .ok_or_else(|| Error::Prices("missing marginal line".into()))?;
        let b = after
            .polyline(panel, 1)
            .ok_or_else(|| Error::Prices("missing marginal line".into()))?;
        Ok((a.length() - b.length()) / ds)
    };
    Ok((drop(0)?, drop(1)?))
}
