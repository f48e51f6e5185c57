//! Grid checks of the sufficient conditions on the valuation density.
//!
//! Each verdict means "holds at every grid point", not a proof.

use super::ValuationDistribution;

pub const DEFAULT_GRID: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `(P - c) f'(x) >= -2 f(x)`: pure, unique best responses.
    PureBestResponse,
    /// `f(x) + (P - c) f'(x) >= 0`: strategic complementarity.
    StrategicComplements,
    /// `f(x) + (P - c) f'(x) >= 0` and `f'(x) + (P - c) f''(x) >= 0` for
    /// `x` in `[P, 1)`, or `f', f'' >= 0`: prices fall in the switching cost.
    PriceFallsInSwitchingCost,
    /// `1 - F` concave, i.e. `f' >= 0`.
    ConcaveCcdf,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::PureBestResponse,
        Condition::StrategicComplements,
        Condition::PriceFallsInSwitchingCost,
        Condition::ConcaveCcdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::PureBestResponse => "pure_best_response",
            Condition::StrategicComplements => "strategic_complements",
            Condition::PriceFallsInSwitchingCost => "price_falls_in_s",
            Condition::ConcaveCcdf => "concave_ccdf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub condition: Condition,
    pub holds: bool,
    /// Grid point `(P, x)` with the smallest margin (`P` is unused for
    /// [`Condition::ConcaveCcdf`] and reported as `NaN`).
    pub worst: (f64, f64),
    /// Smallest value of `lhs - rhs` over the grid.
    pub margin: f64,
    /// Some grid point sat on a density kink.
    pub kink: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn get(&self, condition: Condition) -> &ConditionEntry {
        self.entries
            .iter()
            .find(|e| e.condition == condition)
            .expect("every condition is reported")
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }
}

struct Worst {
    margin: f64,
    at: (f64, f64),
    kink: bool,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            at: (f64::NAN, f64::NAN),
            kink: false,
        }
    }

    fn see(&mut self, margin: f64, at: (f64, f64), kink: bool) {
        self.kink |= kink;
        if margin < self.margin {
            self.margin = margin;
            self.at = at;
        }
    }

    fn entry(self, condition: Condition, holds: bool) -> ConditionEntry {
        ConditionEntry {
            condition,
            holds,
            worst: self.at,
            margin: self.margin,
            kink: self.kink,
        }
    }
}

/// Evaluates every [`Condition`] on `grid_n` evenly spaced interior points of
/// `(c, 1)` for the price and `grid_n` points for the valuation argument.
pub fn check_conditions(d: &ValuationDistribution, c: f64, grid_n: usize) -> ConditionReport {
    let grid_n = grid_n.max(2);
    let interior = |lo: f64, k: usize| lo + (1.0 - lo) * (k as f64 + 1.0) / (grid_n as f64 + 1.0);
    // On the grid every point is inside [0,1], so these never fail.
    let f = |x: f64| d.pdf(x).unwrap_or(0.0);
    let df = |x: f64| d.dpdf(x).map(|r| (r.value, r.kink)).unwrap_or((0.0, false));
    let d2f = |x: f64| d.d2pdf(x).map(|r| r.value).unwrap_or(0.0);

    let mut pure = Worst::new();
    let mut compl = Worst::new();
    let mut falls = Worst::new();
    let mut slope_curv = Worst::new();
    let mut ccdf = Worst::new();

    for a in 0..grid_n {
        let p = interior(c, a);
        let m = p - c;
        for b in 0..grid_n {
            let x = interior(c, b);
            let (fx, (dfx, kink)) = (f(x), df(x));
            pure.see(m * dfx + 2.0 * fx, (p, x), kink);
            compl.see(fx + m * dfx, (p, x), kink);

            // x in [P, 1)
            let y = p + (1.0 - p) * b as f64 / grid_n as f64;
            let (fy, (dfy, kink_y)) = (f(y), df(y));
            let first = fy + m * dfy;
            let second = dfy + m * d2f(y);
            falls.see(first.min(second), (p, y), kink_y);
        }
    }
    for b in 0..grid_n {
        let x = interior(0.0, b);
        let (dfx, kink) = df(x);
        ccdf.see(dfx, (f64::NAN, x), kink);
        slope_curv.see(dfx.min(d2f(x)), (f64::NAN, x), kink);
    }

    let falls_holds = falls.margin >= 0.0 || slope_curv.margin >= 0.0;
    ConditionReport {
        entries: vec![
            {
                let h = pure.margin >= 0.0;
                pure.entry(Condition::PureBestResponse, h)
            },
            {
                let h = compl.margin >= 0.0;
                compl.entry(Condition::StrategicComplements, h)
            },
            falls.entry(Condition::PriceFallsInSwitchingCost, falls_holds),
            {
                let h = ccdf.margin >= 0.0;
                ccdf.entry(Condition::ConcaveCcdf, h)
            },
        ],
    }
}
