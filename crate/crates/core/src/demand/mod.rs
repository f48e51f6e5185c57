//! Expected demand, profit and the derivative objects of a firm's profit.
//!
//! # Reduction to the strongest rival
//!
//! Fix firm `i`. A consumer who starts at `i` stays iff
//! `v_i >= P_i + max{0, max_j (v_j - P_j - s)}`, and one who starts at `k`
//! switches to `i` iff `v_i >= P_i + s + max{0, v_k - P_k, max_j (v_j - P_j - s)}`
//! (the switch cutoff). Both thresholds have the form `base + max{e, Z}` where
//! `Z = max_j (v_j - shift_j)` is a maximum of independent shifted rival
//! valuations and `e` is the exit floor (`0`, or `-inf` without exit). Since
//! rivals are independent, `Z` has the cdf `G(z) = prod_j F_j(z + shift_j)`
//! and the density splits by which rival attains the maximum,
//! `g_j(z) = f_j(z + shift_j) prod_{l != j} F_l(z + shift_l)`.
//!
//! So every expectation over `v_{-i}` is a one-dimensional integral over `z`
//! for any number of firms. Per demand segment this module computes
//!
//! * `a = E[1 - F_i(base + Y)]` (segment demand per unit of arrivals),
//! * `b = E[f_i(base + Y)]` and `c = E[f_i'(base + Y)]`,
//! * the same `b_j`, `c_j` restricted to the event "rival `j` is the
//!   strongest and beats the floor",
//!
//! with `Y = max{e, Z}`. The density is extended by zero outside `[0,1]`, so
//! its derivative carries point masses at the support edges; those enter `c`
//! as `jump * g_j(edge - base)`. Everything else follows from the chain rule:
//! moving `base` by `d` changes `a` by `-b d` and `b` by `c d`; moving
//! `shift_j` by `d` changes `a` by `b_j d` and `b` by `-c_j d`.

mod direct;

pub use direct::{demand_direct, switch_cutoff, DirectEval, DirectRoute};

use nalgebra::{DMatrix, DVector};

use crate::distributions::ValuationDistribution;
use crate::error::{Error, Result};
use crate::market::{MarketConfig, PriceKind, PriceProfile, PricingMode};
use crate::oracle::{DemandBreakdown, FirmDemand};
use crate::quadrature::Quadrature;

/// A rival's term `v_j - shift_j` inside a threshold.
#[derive(Debug, Clone, Copy)]
struct RivalTerm {
    firm: usize,
    kind: PriceKind,
    with_s: bool,
}

/// Consumers starting at `source` who end up buying from the evaluated firm.
#[derive(Debug, Clone)]
struct Segment {
    source: usize,
    weight: f64,
    /// Price the evaluated firm charges this segment.
    kind: PriceKind,
    with_s: bool,
    rivals: Vec<RivalTerm>,
}

#[derive(Debug, Clone, Default)]
struct Moments {
    a: f64,
    b: f64,
    c: f64,
    b_r: Vec<f64>,
    c_r: Vec<f64>,
}

/// Variable a derivative is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    /// A price slot (see [`MarketConfig::slot`]).
    Slot(usize),
    SwitchingCost,
}

fn segments(config: &MarketConfig, i: usize) -> Vec<Segment> {
    let n = config.n;
    let mut out = Vec::with_capacity(n);
    out.push(Segment {
        source: i,
        weight: config.mu[i],
        kind: PriceKind::Own,
        with_s: false,
        rivals: (0..n)
            .filter(|&j| j != i)
            .map(|j| RivalTerm {
                firm: j,
                kind: PriceKind::Switch,
                with_s: true,
            })
            .collect(),
    });
    for k in (0..n).filter(|&k| k != i) {
        let rivals = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                if j == k {
                    RivalTerm {
                        firm: j,
                        kind: PriceKind::Own,
                        with_s: false,
                    }
                } else {
                    RivalTerm {
                        firm: j,
                        kind: PriceKind::Switch,
                        with_s: true,
                    }
                }
            })
            .collect();
        out.push(Segment {
            source: k,
            weight: config.mu[k],
            kind: PriceKind::Switch,
            with_s: true,
            rivals,
        });
    }
    out
}

fn shift_of(prices: &PriceProfile, s: f64, firm: usize, kind: PriceKind, with_s: bool) -> f64 {
    prices.price(firm, kind) + if with_s { s } else { 0.0 }
}

/// Rival cdf products at `z`: fills `g` with `g_j(z)` and returns `G(z)`.
fn rival_law(dists: &[&ValuationDistribution], shifts: &[f64], z: f64, cdf: &mut [f64], g: &mut [f64]) -> f64 {
    let r = shifts.len();
    for j in 0..r {
        cdf[j] = dists[j].cumulative(z + shifts[j]);
    }
    // prefix products left to right, then multiply in suffix products
    let mut prefix = 1.0;
    for j in 0..r {
        g[j] = prefix;
        prefix *= cdf[j];
    }
    let mut suffix = 1.0;
    for j in (0..r).rev() {
        g[j] *= suffix * dists[j].density(z + shifts[j]);
        suffix *= cdf[j];
    }
    prefix
}

fn segment_moments(
    config: &MarketConfig,
    prices: &PriceProfile,
    i: usize,
    seg: &Segment,
    quad: &Quadrature,
) -> Result<Moments> {
    let s = config.s;
    let own = &config.dists[i];
    let base = shift_of(prices, s, i, seg.kind, seg.with_s);
    let shifts: Vec<f64> = seg
        .rivals
        .iter()
        .map(|t| shift_of(prices, s, t.firm, t.kind, t.with_s))
        .collect();
    let dists: Vec<&ValuationDistribution> = seg.rivals.iter().map(|t| &config.dists[t.firm]).collect();
    let r = shifts.len();

    let floor = if config.exit_allowed { 0.0 } else { f64::NEG_INFINITY };
    let zmin = shifts.iter().fold(f64::NEG_INFINITY, |m, &h| m.max(-h));
    let zmax = shifts.iter().fold(f64::NEG_INFINITY, |m, &h| m.max(1.0 - h));
    let lower = floor.max(zmin);
    let upper = zmax.min(1.0 - base);

    let mut breaks = Vec::with_capacity(3 * r + 4);
    if config.exit_allowed {
        breaks.push(0.0);
    }
    for (d, &h) in dists.iter().zip(&shifts) {
        breaks.push(-h);
        breaks.push(1.0 - h);
        breaks.extend(d.kinks().into_iter().map(|k| k - h));
    }
    breaks.push(-base);
    breaks.extend(own.kinks().into_iter().map(|k| k - base));

    let mut cdf = vec![0.0; r];
    let mut g = vec![0.0; r];
    let raw = quad.integrate_vec(1 + 2 * r, lower, upper, &breaks, |z, out| {
        rival_law(&dists, &shifts, z, &mut cdf, &mut g);
        let x = base + z;
        let (tail, f, df) = (1.0 - own.cumulative(x), own.density(x), own.density_slope(x));
        let mut total = 0.0;
        for j in 0..r {
            total += g[j];
            out[1 + j] = f * g[j];
            out[1 + r + j] = df * g[j];
        }
        out[0] = tail * total;
    })?;

    let mut m = Moments {
        a: raw[0],
        b_r: raw[1..1 + r].to_vec(),
        c_r: raw[1 + r..].to_vec(),
        ..Default::default()
    };

    for (edge, jump) in own.jumps() {
        let t = edge - base;
        if t > floor {
            rival_law(&dists, &shifts, t, &mut cdf, &mut g);
            for (c, gj) in m.c_r.iter_mut().zip(&g) {
                *c += jump * gj;
            }
        }
    }
    m.b = m.b_r.iter().sum();
    m.c = m.c_r.iter().sum();

    if config.exit_allowed {
        // consumers whose best rival option is worse than exiting
        let atom = rival_law(&dists, &shifts, 0.0, &mut cdf, &mut g);
        if atom > 0.0 {
            m.a += (1.0 - own.cumulative(base)) * atom;
            m.b += own.density(base) * atom;
            m.c += own.density_slope(base) * atom;
        }
    }
    Ok(m)
}

/// All demand segments of one firm, evaluated once; every demand and
/// derivative object of that firm is read off from here.
#[derive(Debug, Clone)]
pub struct FirmEval<'a> {
    config: &'a MarketConfig,
    prices: &'a PriceProfile,
    firm: usize,
    parts: Vec<(Segment, Moments)>,
}

impl<'a> FirmEval<'a> {
    pub fn new(config: &'a MarketConfig, prices: &'a PriceProfile, firm: usize) -> Result<Self> {
        Self::with_quadrature(config, prices, firm, &Quadrature::default())
    }

    pub fn with_quadrature(
        config: &'a MarketConfig,
        prices: &'a PriceProfile,
        firm: usize,
        quad: &Quadrature,
    ) -> Result<Self> {
        Self::build(config, prices, firm, None, quad)
    }

    /// Only the segments priced through `slot`; [`Self::profit`] is then the
    /// profit earned on that price.
    pub fn for_slot(config: &'a MarketConfig, prices: &'a PriceProfile, slot: usize) -> Result<Self> {
        let firm = config.slot_firm(slot);
        let kind = match config.pricing_mode {
            PricingMode::Uniform => None,
            PricingMode::Discriminatory => Some(config.slot_kind(slot)),
        };
        Self::build(config, prices, firm, kind, &Quadrature::default())
    }

    fn build(
        config: &'a MarketConfig,
        prices: &'a PriceProfile,
        firm: usize,
        kind: Option<PriceKind>,
        quad: &Quadrature,
    ) -> Result<Self> {
        prices.check(config)?;
        if firm >= config.n {
            return Err(Error::Prices(format!("no firm {firm} among {}", config.n)));
        }
        let parts = segments(config, firm)
            .into_iter()
            .filter(|seg| kind.is_none_or(|k| seg.kind == k))
            .map(|seg| segment_moments(config, prices, firm, &seg, quad).map(|m| (seg, m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            prices,
            firm,
            parts,
        })
    }

    fn margin(&self, kind: PriceKind) -> f64 {
        self.prices.price(self.firm, kind) - self.config.costs[self.firm]
    }

    pub fn demand(&self) -> FirmDemand {
        let mut d = FirmDemand::default();
        for (seg, m) in &self.parts {
            let mass = seg.weight * m.a;
            if seg.source == self.firm {
                d.initial += mass;
            } else {
                d.switch_in += mass;
            }
        }
        d.total = d.initial + d.switch_in;
        d
    }

    pub fn profit(&self) -> f64 {
        self.parts
            .iter()
            .map(|(seg, m)| self.margin(seg.kind) * seg.weight * m.a)
            .sum()
    }

    fn slot_of(&self, kind: PriceKind) -> usize {
        self.config.slot(self.firm, kind)
    }

    /// Segments priced through `slot`.
    fn priced_by(&self, slot: usize) -> impl Iterator<Item = &(Segment, Moments)> {
        self.parts.iter().filter(move |(seg, _)| self.slot_of(seg.kind) == slot)
    }

    fn kind_of_slot(&self, slot: usize) -> PriceKind {
        if self.slot_of(PriceKind::Own) == slot {
            PriceKind::Own
        } else {
            PriceKind::Switch
        }
    }

    /// Derivative of profit with respect to one of this firm's price slots.
    pub fn foc(&self, slot: usize) -> f64 {
        let m = self.margin(self.kind_of_slot(slot));
        self.priced_by(slot)
            .map(|(seg, mo)| seg.weight * (mo.a - m * mo.b))
            .sum()
    }

    /// Derivative of [`Self::foc`] for `slot` with respect to `param`.
    pub fn dfoc(&self, slot: usize, param: Param) -> f64 {
        let cfg = self.config;
        let m = self.margin(self.kind_of_slot(slot));
        let moves = |firm: usize, kind: PriceKind, with_s: bool| -> f64 {
            match param {
                Param::Slot(q) => (cfg.slot(firm, kind) == q) as u8 as f64,
                Param::SwitchingCost => with_s as u8 as f64,
            }
        };
        let mut out = 0.0;
        for (seg, mo) in self.priced_by(slot) {
            let db = moves(self.firm, seg.kind, seg.with_s);
            let mut da = -mo.b * db;
            let mut dbb = mo.c * db;
            for (j, t) in seg.rivals.iter().enumerate() {
                let dh = moves(t.firm, t.kind, t.with_s);
                if dh != 0.0 {
                    da += mo.b_r[j] * dh;
                    dbb -= mo.c_r[j] * dh;
                }
            }
            out += seg.weight * (da - m * dbb);
            if param == Param::Slot(slot) {
                out -= seg.weight * mo.b;
            }
        }
        out
    }
}

/// First and second derivatives of one firm's profit in uniform pricing.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub foc: f64,
    pub soc: f64,
    /// `(k, d2 pi_i / dP_i dP_k)` for every rival `k`.
    pub cross: Vec<(usize, f64)>,
    pub dfoc_ds: f64,
}

fn require_uniform(config: &MarketConfig) -> Result<()> {
    match config.pricing_mode {
        PricingMode::Uniform => Ok(()),
        PricingMode::Discriminatory => Err(Error::Prices(
            "operation needs uniform pricing; use demand_discriminatory".into(),
        )),
    }
}

pub fn demand(config: &MarketConfig, prices: &PriceProfile, i: usize) -> Result<FirmDemand> {
    Ok(FirmEval::new(config, prices, i)?.demand())
}

/// Demand of every firm plus the exit mass.
pub fn demand_all(config: &MarketConfig, prices: &PriceProfile) -> Result<DemandBreakdown> {
    let firms = (0..config.n)
        .map(|i| demand(config, prices, i))
        .collect::<Result<Vec<_>>>()?;
    let bought: f64 = firms.iter().map(|f| f.total).sum();
    let exit = if config.exit_allowed {
        (1.0 - bought).max(0.0)
    } else {
        0.0
    };
    Ok(DemandBreakdown {
        firms,
        exit,
        std_err: None,
    })
}

pub fn profit(config: &MarketConfig, prices: &PriceProfile, i: usize) -> Result<f64> {
    Ok(FirmEval::new(config, prices, i)?.profit())
}

pub fn foc(config: &MarketConfig, prices: &PriceProfile, i: usize) -> Result<f64> {
    require_uniform(config)?;
    Ok(FirmEval::new(config, prices, i)?.foc(i))
}

pub fn soc(config: &MarketConfig, prices: &PriceProfile, i: usize) -> Result<f64> {
    require_uniform(config)?;
    Ok(FirmEval::new(config, prices, i)?.dfoc(i, Param::Slot(i)))
}

pub fn cross_partial(config: &MarketConfig, prices: &PriceProfile, i: usize, k: usize) -> Result<f64> {
    require_uniform(config)?;
    Ok(FirmEval::new(config, prices, i)?.dfoc(i, Param::Slot(k)))
}

/// Analytic derivative of firm `i`'s FOC in the switching cost.
pub fn dfoc_ds(config: &MarketConfig, prices: &PriceProfile, i: usize) -> Result<f64> {
    require_uniform(config)?;
    Ok(FirmEval::new(config, prices, i)?.dfoc(i, Param::SwitchingCost))
}

/// Central finite difference of the FOC in `s`, the cross-check for
/// [`dfoc_ds`].
pub fn dfoc_ds_fd(config: &MarketConfig, prices: &PriceProfile, i: usize, step: f64) -> Result<f64> {
    let up = foc(&config.with_s(config.s + step), prices, i)?;
    let down = foc(&config.with_s(config.s - step), prices, i)?;
    Ok((up - down) / (2.0 * step))
}

pub fn derivative_bundle(config: &MarketConfig, prices: &PriceProfile, i: usize) -> Result<DerivativeBundle> {
    require_uniform(config)?;
    let e = FirmEval::new(config, prices, i)?;
    Ok(DerivativeBundle {
        foc: e.foc(i),
        soc: e.dfoc(i, Param::Slot(i)),
        cross: (0..config.n)
            .filter(|&k| k != i)
            .map(|k| (k, e.dfoc(i, Param::Slot(k))))
            .collect(),
        dfoc_ds: e.dfoc(i, Param::SwitchingCost),
    })
}

/// FOC of every price slot.
pub fn foc_vector(config: &MarketConfig, prices: &PriceProfile) -> Result<Vec<f64>> {
    let mut out = vec![0.0; config.n_slots()];
    for i in 0..config.n {
        let e = FirmEval::new(config, prices, i)?;
        for kind in [PriceKind::Own, PriceKind::Switch] {
            let slot = config.slot(i, kind);
            out[slot] = e.foc(slot);
        }
    }
    Ok(out)
}

/// Jacobian `[dFOC_q / dP_r]` over price slots and the vector `dFOC_q / ds`.
pub fn foc_jacobian(config: &MarketConfig, prices: &PriceProfile) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let slots = config.n_slots();
    let mut jac = DMatrix::zeros(slots, slots);
    let mut ds = DVector::zeros(slots);
    for i in 0..config.n {
        let e = FirmEval::new(config, prices, i)?;
        for kind in [PriceKind::Own, PriceKind::Switch] {
            let q = config.slot(i, kind);
            if kind == PriceKind::Switch && config.pricing_mode == PricingMode::Uniform {
                continue;
            }
            for r in 0..slots {
                jac[(q, r)] = e.dfoc(q, Param::Slot(r));
            }
            ds[q] = e.dfoc(q, Param::SwitchingCost);
        }
    }
    Ok((jac, ds))
}

/// Jacobian and `dFOC/ds` by central differences of [`foc_vector`].
pub fn foc_jacobian_fd(
    config: &MarketConfig,
    prices: &PriceProfile,
    step: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let slots = config.n_slots();
    let base = prices.slots();
    let mut jac = DMatrix::zeros(slots, slots);
    for r in 0..slots {
        let bump = |h: f64| {
            let mut p = base.clone();
            p[r] = (p[r] + h).clamp(0.0, 1.0);
            (PriceProfile::from_slots(config.pricing_mode, &p), p[r])
        };
        let (up, xu) = bump(step);
        let (down, xd) = bump(-step);
        let fu = foc_vector(config, &up)?;
        let fd = foc_vector(config, &down)?;
        for q in 0..slots {
            jac[(q, r)] = (fu[q] - fd[q]) / (xu - xd);
        }
    }
    let fu = foc_vector(&config.with_s(config.s + step), prices)?;
    let fd = foc_vector(&config.with_s(config.s - step), prices)?;
    let ds = DVector::from_iterator(slots, fu.iter().zip(&fd).map(|(u, d)| (u - d) / (2.0 * step)));
    Ok((jac, ds))
}

/// Segment demands and FOCs of one firm under price discrimination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatoryDemand {
    /// Initial consumers who stay, priced at the own price.
    pub own_segment: f64,
    /// Switchers from all rivals, priced at the switch price.
    pub switch_segment: f64,
    pub foc_own: f64,
    pub foc_switch: f64,
}

pub fn demand_discriminatory(config: &MarketConfig, prices: &PriceProfile, i: usize) -> Result<DiscriminatoryDemand> {
    if config.pricing_mode != PricingMode::Discriminatory {
        return Err(Error::Prices("market does not price discriminate".into()));
    }
    let e = FirmEval::new(config, prices, i)?;
    let d = e.demand();
    Ok(DiscriminatoryDemand {
        own_segment: d.initial,
        switch_segment: d.switch_in,
        foc_own: e.foc(config.slot(i, PriceKind::Own)),
        foc_switch: e.foc(config.slot(i, PriceKind::Switch)),
    })
}
