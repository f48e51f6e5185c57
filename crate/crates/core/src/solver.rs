//! Best responses, equilibrium search, stability and comparative statics.
//!
//! Prices live in a flat slot vector (see [`MarketConfig::slot`]): one slot
//! per firm under uniform pricing, an own and a switch slot per firm under
//! discrimination. Segment demands are separable across a firm's slots, so
//! every best response is a set of one-dimensional maximisations.

use nalgebra::{DMatrix, DVector, Schur};
use rayon::prelude::*;

use crate::demand::{cross_partial, foc_jacobian, foc_jacobian_fd, foc_vector, FirmEval, Param};
use crate::distributions::{check_conditions, ConditionReport, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::market::{MarketConfig, PriceKind, PricePair, PriceProfile, PricingMode};

/// FOC residual required of a converged equilibrium.
pub const FOC_TOL: f64 = 1e-7;

/// Step of the finite-difference Jacobian used when densities have kinks.
pub const KINK_FD_STEP: f64 = 1e-4;

const GOLDEN_WIDTH: f64 = 1e-9;
const POLISH_RADIUS: f64 = 1e-4;
const SYM_EIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Coarse grid used by the best-response scan.
    pub grid_points: usize,
    /// Half-width of the re-solve in comparative statics.
    pub delta_s: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-7,
            max_iter: 500,
            grid_points: 201,
            delta_s: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BestResponse {
    Uniform(f64),
    Discriminatory(PricePair),
}

/// Profit earned through `slot` when that slot is set to `x`.
fn slot_profit(config: &MarketConfig, slots: &mut [f64], slot: usize, x: f64) -> Result<f64> {
    slots[slot] = x;
    let p = PriceProfile::from_slots(config.pricing_mode, slots);
    Ok(FirmEval::for_slot(config, &p, slot)?.profit())
}

/// `(foc, soc)` of `slot` at `x`.
fn slot_derivatives(config: &MarketConfig, slots: &mut [f64], slot: usize, x: f64) -> Result<(f64, f64)> {
    slots[slot] = x;
    let p = PriceProfile::from_slots(config.pricing_mode, slots);
    let e = FirmEval::for_slot(config, &p, slot)?;
    Ok((e.foc(slot), e.dfoc(slot, Param::Slot(slot))))
}

fn golden_section(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > GOLDEN_WIDTH {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Drives the FOC to zero inside `[lo, hi]` by Newton steps, falling back to
/// bisection whenever a step leaves the bracket. Needs a sign change.
fn polish_root(
    config: &MarketConfig,
    slots: &mut [f64],
    slot: usize,
    start: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<Option<f64>> {
    let (g_lo, _) = slot_derivatives(config, slots, slot, lo)?;
    let (g_hi, _) = slot_derivatives(config, slots, slot, hi)?;
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Ok(None);
    }
    let mut x = start;
    for _ in 0..100 {
        let (g, dg) = slot_derivatives(config, slots, slot, x)?;
        if g.abs() < 1e-14 {
            break;
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let newton = x - g / dg;
        x = if dg < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(Some(x))
}

/// Profit-maximising value of one slot given all other slots.
fn optimise_slot(config: &MarketConfig, slots: &[f64], slot: usize, grid_points: usize) -> Result<f64> {
    let mut work = slots.to_vec();
    let n = grid_points.max(3);
    let grid: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &x) in grid.iter().enumerate() {
        let v = slot_profit(config, &mut work, slot, x)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let lo = grid[best.0.saturating_sub(1)];
    let hi = grid[(best.0 + 1).min(n - 1)];
    let (mut x, mut value) = golden_section(lo, hi, |x| slot_profit(config, &mut work, slot, x))?;
    for edge in [lo, hi] {
        let v = slot_profit(config, &mut work, slot, edge)?;
        if v > value {
            (x, value) = (edge, v);
        }
    }
    // profit carries quadrature noise near 1e-10, which limits golden
    // section to a few 1e-6; the FOC sign change pins the maximum exactly
    if x > 0.0 && x < 1.0 {
        let a = (x - POLISH_RADIUS).max(lo);
        let b = (x + POLISH_RADIUS).min(hi);
        if let Some(root) = polish_root(config, &mut work, slot, x, a, b)? {
            x = root;
        }
    }
    Ok(x)
}

/// Best response of firm `i` to the rival prices in `prices` (its own
/// entries are ignored). Under discrimination both prices are optimised
/// separately.
pub fn best_response(
    config: &MarketConfig,
    prices: &PriceProfile,
    i: usize,
    settings: &SolverSettings,
) -> Result<BestResponse> {
    config.validate()?;
    prices.check(config)?;
    if i >= config.n {
        return Err(Error::Prices(format!("no firm {i} among {}", config.n)));
    }
    let slots = prices.slots();
    let own = optimise_slot(config, &slots, config.slot(i, PriceKind::Own), settings.grid_points)?;
    Ok(match config.pricing_mode {
        PricingMode::Uniform => BestResponse::Uniform(own),
        PricingMode::Discriminatory => {
            let switch = optimise_slot(config, &slots, config.slot(i, PriceKind::Switch), settings.grid_points)?;
            BestResponse::Discriminatory(PricePair { own, switch })
        }
    })
}

/// Best-response slot vector.
fn br_slots(config: &MarketConfig, slots: &[f64], settings: &SolverSettings, symmetric: bool) -> Result<Vec<f64>> {
    let per_firm = config.n_slots() / config.n;
    if symmetric {
        let first: Vec<f64> = (0..per_firm)
            .map(|q| optimise_slot(config, slots, q, settings.grid_points))
            .collect::<Result<_>>()?;
        return Ok(first.iter().copied().cycle().take(config.n_slots()).collect());
    }
    (0..config.n_slots())
        .into_par_iter()
        .map(|q| optimise_slot(config, slots, q, settings.grid_points))
        .collect()
}

fn is_symmetric_profile(config: &MarketConfig, slots: &[f64]) -> bool {
    let per_firm = config.n_slots() / config.n;
    config.is_symmetric() && slots.chunks(per_firm).all(|c| c == &slots[..per_firm])
}

/// Sup-norm of the FOC vector, ignoring slots at a bound where the FOC
/// points out of `[0,1]`.
pub fn foc_residual(config: &MarketConfig, prices: &PriceProfile) -> Result<f64> {
    let slots = prices.slots();
    let focs = foc_vector(config, prices)?;
    Ok(slots
        .iter()
        .zip(&focs)
        .map(|(&x, &g)| {
            if (x <= 0.0 && g <= 0.0) || (x >= 1.0 && g >= 0.0) {
                0.0
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// `[dFOC_q / dP_r]` over price slots.
    pub jacobian: DMatrix<f64>,
    /// Eigenvalues of `(J + J^T) / 2`, ascending.
    pub symmetric_eigenvalues: Vec<f64>,
    /// `J` (equivalently `J^-1`) is negative semidefinite.
    pub negative_semidefinite: bool,
    /// Spectral radius of the best-response Jacobian `-J_qr / J_qq`.
    pub br_spectral_radius: f64,
    pub stable: bool,
    /// Both criteria reached the same verdict.
    pub criteria_agree: bool,
}

/// Largest eigenvalue modulus. The Schur iteration can stall on matrices
/// with many repeated eigenvalues; Gelfand's formula `||B^(2^k)||^(1/2^k)`
/// by repeated squaring takes over then.
fn spectral_radius(b: DMatrix<f64>) -> f64 {
    if let Some(schur) = Schur::try_new(b.clone(), f64::EPSILON, 10_000) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    gelfand_radius(b)
}

fn gelfand_radius(b: DMatrix<f64>) -> f64 {
    let norm = b.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let mut u = b / norm;
    let mut log_norm = norm.ln();
    let mut power = 1.0;
    for _ in 0..40 {
        let sq = &u * &u;
        let n = sq.norm();
        if n == 0.0 {
            return 0.0;
        }
        log_norm = 2.0 * log_norm + n.ln();
        power *= 2.0;
        u = sq / n;
    }
    (log_norm / power).exp()
}

/// Stability verdict for a given FOC Jacobian.
pub fn stability_from_jacobian(jacobian: &DMatrix<f64>) -> Result<StabilityReport> {
    let m = jacobian.nrows();
    let svd = jacobian.clone().svd(false, false);
    let scale = svd.singular_values.max().max(f64::MIN_POSITIVE);
    if svd.singular_values.min() <= 1e-12 * scale {
        return Err(Error::Degenerate);
    }
    let sym = (jacobian + jacobian.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let nsd = eig.iter().all(|&e| e <= SYM_EIG_TOL);

    let diagonal_negative = (0..m).all(|q| jacobian[(q, q)] < 0.0);
    let radius = if diagonal_negative {
        let br = DMatrix::from_fn(m, m, |q, r| {
            if q == r {
                0.0
            } else {
                -jacobian[(q, r)] / jacobian[(q, q)]
            }
        });
        spectral_radius(br)
    } else {
        f64::INFINITY
    };
    let contraction = radius < 1.0;
    Ok(StabilityReport {
        jacobian: jacobian.clone(),
        symmetric_eigenvalues: eig,
        negative_semidefinite: nsd,
        br_spectral_radius: radius,
        stable: nsd && contraction,
        criteria_agree: nsd == contraction,
    })
}

/// FOC Jacobian and `dFOC/ds`: analytic, or central differences when a
/// density has interior kinks.
pub fn jacobian_at(config: &MarketConfig, prices: &PriceProfile) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if config.has_kinks() {
        foc_jacobian_fd(config, prices, KINK_FD_STEP)
    } else {
        foc_jacobian(config, prices)
    }
}

pub fn check_stability(config: &MarketConfig, prices: &PriceProfile) -> Result<StabilityReport> {
    let (j, _) = jacobian_at(config, prices)?;
    stability_from_jacobian(&j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowCheck {
    pub slot: usize,
    /// `sum_r dFOC_q / dP_r`.
    pub row_sum: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub rows: Vec<RowCheck>,
}

impl UniquenessReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Dominant-diagonal check: every row of the FOC Jacobian sums to a
/// negative number, so best responses have slopes below one.
pub fn uniqueness_diagnostic(config: &MarketConfig, prices: &PriceProfile) -> Result<UniquenessReport> {
    let (j, _) = jacobian_at(config, prices)?;
    let rows = (0..j.nrows())
        .map(|q| {
            let row_sum = j.row(q).sum();
            RowCheck {
                slot: q,
                row_sum,
                holds: row_sum < 0.0,
            }
        })
        .collect();
    Ok(UniquenessReport { rows })
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub prices: PriceProfile,
    pub iterations: usize,
    pub converged: bool,
    /// Projected sup-norm of the FOC vector, see [`foc_residual`].
    pub residual: f64,
    pub stable: bool,
    /// Present for converged, non-degenerate equilibria.
    pub stability: Option<StabilityReport>,
    /// Distance between the extremal equilibria, when both were computed.
    pub extremal_gap: Option<f64>,
    /// Density conditions of each firm.
    pub diagnostics: Vec<ConditionReport>,
}

fn diagnostics(config: &MarketConfig) -> Vec<ConditionReport> {
    if config.is_symmetric() {
        let one = check_conditions(&config.dists[0], config.costs[0], DEFAULT_GRID);
        return vec![one; config.n];
    }
    config
        .dists
        .iter()
        .zip(&config.costs)
        .map(|(d, &c)| check_conditions(d, c, DEFAULT_GRID))
        .collect()
}

/// Damped simultaneous best-response iteration `P <- (1 - l) P + l BR(P)`.
/// Converged once a step is at most `tol` and the FOC residual at most
/// [`FOC_TOL`].
pub fn solve_equilibrium(
    config: &MarketConfig,
    start: &PriceProfile,
    settings: &SolverSettings,
) -> Result<EquilibriumResult> {
    config.validate()?;
    start.check(config)?;
    if !(settings.damping > 0.0 && settings.damping <= 1.0) {
        return Err(Error::Prices(format!(
            "damping must lie in (0,1], got {}",
            settings.damping
        )));
    }
    let lambda = settings.damping;
    let symmetric = is_symmetric_profile(config, &start.slots());
    let mut slots = start.slots();
    let mut iterations = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    while iterations < settings.max_iter {
        iterations += 1;
        let br = br_slots(config, &slots, settings, symmetric)?;
        let mut step: f64 = 0.0;
        for (x, b) in slots.iter_mut().zip(&br) {
            let next = ((1.0 - lambda) * *x + lambda * b).clamp(0.0, 1.0);
            step = step.max((next - *x).abs());
            *x = next;
        }
        if step <= settings.tol {
            residual = foc_residual(config, &PriceProfile::from_slots(config.pricing_mode, &slots))?;
            if residual <= FOC_TOL {
                converged = true;
                break;
            }
        }
    }
    let prices = PriceProfile::from_slots(config.pricing_mode, &slots);
    if !converged {
        residual = foc_residual(config, &prices)?;
    }
    let stability = if converged {
        check_stability(config, &prices).ok()
    } else {
        None
    };
    Ok(EquilibriumResult {
        stable: stability.as_ref().is_some_and(|s| s.stable),
        prices,
        iterations,
        converged,
        residual,
        stability,
        extremal_gap: None,
        diagnostics: diagnostics(config),
    })
}

/// Outcome of the grid check behind [`extremal_equilibria`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementsCheck {
    /// Smallest cross-partial found on the grid.
    pub min_cross_partial: f64,
    /// Every best response rose weakly along the rival-price grid.
    pub br_monotone: bool,
}

impl ComplementsCheck {
    pub fn cross_partials_hold(&self) -> bool {
        self.min_cross_partial >= -1e-12
    }

    /// Neither cross-partials nor best responses certified monotonicity.
    pub fn heuristic(&self) -> bool {
        !(self.cross_partials_hold() || self.br_monotone)
    }
}

#[derive(Debug, Clone)]
pub struct ExtremalEquilibria {
    pub low: EquilibriumResult,
    pub high: EquilibriumResult,
    pub gap: f64,
    pub complements: ComplementsCheck,
}

impl ExtremalEquilibria {
    pub fn heuristic(&self) -> bool {
        self.complements.heuristic()
    }
}

/// Grid check of strategic complementarity over the box spanned by the
/// extremal equilibria: cross-partials of every firm pair on a
/// `points x points` grid (other rivals at the box midpoint), and monotonicity
/// of the best response along each rival's price. Uniform pricing only;
/// under discrimination the box diagonal is scanned.
pub fn check_complements(
    config: &MarketConfig,
    low: &[f64],
    high: &[f64],
    points: usize,
    settings: &SolverSettings,
) -> Result<ComplementsCheck> {
    let points = points.max(2);
    let at = |q: usize, t: f64| low[q] + (high[q] - low[q]) * t;
    let ts: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
    let mid: Vec<f64> = (0..low.len()).map(|q| at(q, 0.5)).collect();
    let pairs: Vec<(usize, usize)> = if config.is_symmetric() && config.n > 1 {
        vec![(0, 1)]
    } else {
        (0..config.n)
            .flat_map(|i| (0..config.n).filter(move |&k| k != i).map(move |k| (i, k)))
            .collect()
    };

    let mut min_cross = f64::INFINITY;
    let mut br_monotone = true;
    match config.pricing_mode {
        PricingMode::Uniform => {
            for &(i, k) in &pairs {
                let mut last_br = f64::NEG_INFINITY;
                for &tk in &ts {
                    let mut p = mid.clone();
                    p[k] = at(k, tk);
                    for &ti in &ts {
                        p[i] = at(i, ti);
                        let x = cross_partial(config, &PriceProfile::Uniform(p.clone()), i, k)?;
                        min_cross = min_cross.min(x);
                    }
                    let br = optimise_slot(config, &p, i, settings.grid_points)?;
                    br_monotone &= br >= last_br - 1e-9;
                    last_br = br;
                }
            }
        }
        PricingMode::Discriminatory => {
            let (j, _) = jacobian_at(config, &PriceProfile::from_slots(config.pricing_mode, &mid))?;
            for q in 0..j.nrows() {
                for r in 0..j.ncols() {
                    if config.slot_firm(q) != config.slot_firm(r) {
                        min_cross = min_cross.min(j[(q, r)]);
                    }
                }
            }
            br_monotone = false;
        }
    }
    Ok(ComplementsCheck {
        min_cross_partial: min_cross,
        br_monotone,
    })
}

/// Best-response iteration from all prices at zero (lowest equilibrium) and
/// at one (highest).
pub fn extremal_equilibria(config: &MarketConfig, settings: &SolverSettings) -> Result<ExtremalEquilibria> {
    let zeros = PriceProfile::from_slots(config.pricing_mode, &vec![0.0; config.n_slots()]);
    let ones = PriceProfile::from_slots(config.pricing_mode, &vec![1.0; config.n_slots()]);
    let mut low = solve_equilibrium(config, &zeros, settings)?;
    let mut high = solve_equilibrium(config, &ones, settings)?;
    let (a, b) = (low.prices.slots(), high.prices.slots());
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    low.extremal_gap = Some(gap);
    high.extremal_gap = Some(gap);
    let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
    let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
    // widen a degenerate box so the grid probes a neighbourhood
    let lo: Vec<f64> = lo.iter().map(|x| (x - 0.05).max(0.0)).collect();
    let hi: Vec<f64> = hi.iter().map(|x| (x + 0.05).min(1.0)).collect();
    let complements = check_complements(config, &lo, &hi, 11, settings)?;
    Ok(ExtremalEquilibria {
        low,
        high,
        gap,
        complements,
    })
}

#[derive(Debug, Clone)]
pub struct ComparativeStaticsResult {
    pub equilibrium: EquilibriumResult,
    /// Central difference of re-solved equilibria, per slot.
    pub dpds_fd: Vec<f64>,
    /// `-J^-1 dFOC/ds`, per slot.
    pub dpds_ift: Vec<f64>,
    /// Sup-norm distance between the two.
    pub agreement: f64,
}

fn solve_at(config: &MarketConfig, start: &PriceProfile, settings: &SolverSettings) -> Result<EquilibriumResult> {
    let eq = solve_equilibrium(config, start, settings)?;
    if !eq.converged {
        return Err(Error::Resolve {
            s: config.s,
            reason: format!("no convergence, residual {:e}", eq.residual),
        });
    }
    Ok(eq)
}

/// Price response to the switching cost at the equilibrium reached from
/// `start`, by re-solving at `s +- delta_s` and by the implicit function
/// theorem.
pub fn comparative_statics(
    config: &MarketConfig,
    start: &PriceProfile,
    settings: &SolverSettings,
) -> Result<ComparativeStaticsResult> {
    let ds = settings.delta_s;
    if config.s - ds <= 0.0 {
        return Err(Error::Resolve {
            s: config.s - ds,
            reason: "switching cost must stay positive".into(),
        });
    }
    let eq = solve_at(config, start, settings)?;
    let up = solve_at(&config.with_s(config.s + ds), &eq.prices, settings)?;
    let down = solve_at(&config.with_s(config.s - ds), &eq.prices, settings)?;
    let dpds_fd: Vec<f64> = up
        .prices
        .slots()
        .iter()
        .zip(down.prices.slots())
        .map(|(u, d)| (u - d) / (2.0 * ds))
        .collect();

    let (j, dfoc_ds) = jacobian_at(config, &eq.prices)?;
    let lu = j.lu();
    let sol = lu.solve(&(-dfoc_ds)).ok_or(Error::Degenerate)?;
    let dpds_ift: Vec<f64> = sol.iter().copied().collect();
    let agreement = dpds_fd
        .iter()
        .zip(&dpds_ift)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ComparativeStaticsResult {
        equilibrium: eq,
        dpds_fd,
        dpds_ift,
        agreement,
    })
}

#[cfg(test)]
mod tests;
