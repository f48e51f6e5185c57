//! Demand and FOC evaluated straight from the switch cutoffs, integrating
//! over the rival valuation vector itself. Independent of the
//! strongest-rival reduction in the parent module and used to cross-check it.

use crate::error::{Error, Result};
use crate::market::{MarketConfig, PriceProfile};
use crate::oracle::FirmDemand;
use crate::qmc;
use crate::quadrature::Quadrature;

/// How the integral over rival valuations is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectRoute {
    /// Adaptive quadrature over the single rival valuation (duopoly only).
    Quadrature,
    /// Halton points mapped through the rivals' inverse cdfs.
    Qmc { points: usize },
    /// Quadrature for duopolies, QMC with the default budget otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectEval {
    pub demand: FirmDemand,
    /// Part of the profit derivative coming from initial consumers.
    pub foc_own: f64,
    /// Part coming from switchers.
    pub foc_switch: f64,
}

impl DirectEval {
    /// Profit derivative under uniform pricing.
    pub fn foc(&self) -> f64 {
        self.foc_own + self.foc_switch
    }
}

/// Valuation above which consumers at `k` switch to `i`, clamped to at most
/// one: `P_i + max{s, v_k - P_k + s, max_{j != i,k} (v_j - P_j)}`. Entries
/// `v[i]` is ignored.
pub fn switch_cutoff(k: usize, i: usize, v: &[f64], prices: &[f64], s: f64) -> f64 {
    let mut best = s.max(v[k] - prices[k] + s);
    for (j, (&vj, &pj)) in v.iter().zip(prices).enumerate() {
        if j != i && j != k {
            best = best.max(vj - pj);
        }
    }
    (prices[i] + best).min(1.0)
}

struct Thresholds<'a> {
    config: &'a MarketConfig,
    prices: &'a PriceProfile,
    i: usize,
    floor: f64,
}

impl Thresholds<'_> {
    fn stay(&self, v: &[f64]) -> f64 {
        let (p, s) = (self.prices, self.config.s);
        let mut best = self.floor;
        for (j, &vj) in v.iter().enumerate() {
            if j != self.i {
                best = best.max(vj - p.switch(j) - s);
            }
        }
        p.own(self.i) + best
    }

    fn switch_from(&self, k: usize, v: &[f64]) -> f64 {
        let (p, s) = (self.prices, self.config.s);
        let mut best = self.floor.max(v[k] - p.own(k));
        for (j, &vj) in v.iter().enumerate() {
            if j != self.i && j != k {
                best = best.max(vj - p.switch(j) - s);
            }
        }
        p.switch(self.i) + s + best
    }

    /// `[initial, switch_in, foc_own, foc_switch]` at one rival valuation vector.
    fn integrand(&self, v: &[f64], out: &mut [f64; 4]) {
        let cfg = self.config;
        let d = &cfg.dists[self.i];
        let c = cfg.costs[self.i];
        let (m_own, m_switch) = (self.prices.own(self.i) - c, self.prices.switch(self.i) - c);
        let t = self.stay(v);
        let tail = 1.0 - d.cumulative(t);
        out[0] = cfg.mu[self.i] * tail;
        out[2] = cfg.mu[self.i] * (tail - m_own * d.density(t));
        out[1] = 0.0;
        out[3] = 0.0;
        for k in (0..cfg.n).filter(|&k| k != self.i) {
            let t = self.switch_from(k, v);
            let tail = 1.0 - d.cumulative(t);
            out[1] += cfg.mu[k] * tail;
            out[3] += cfg.mu[k] * (tail - m_switch * d.density(t));
        }
    }
}

fn finish(acc: [f64; 4]) -> DirectEval {
    DirectEval {
        demand: FirmDemand {
            initial: acc[0],
            switch_in: acc[1],
            total: acc[0] + acc[1],
        },
        foc_own: acc[2],
        foc_switch: acc[3],
    }
}

/// Demand of firm `i` from the cutoff formulas, integrated over `v_{-i}`.
pub fn demand_direct(config: &MarketConfig, prices: &PriceProfile, i: usize, route: DirectRoute) -> Result<DirectEval> {
    prices.check(config)?;
    let th = Thresholds {
        config,
        prices,
        i,
        floor: if config.exit_allowed { 0.0 } else { f64::NEG_INFINITY },
    };
    let route = match route {
        DirectRoute::Auto if config.n == 2 => DirectRoute::Quadrature,
        DirectRoute::Auto => DirectRoute::Qmc {
            points: qmc::DEFAULT_POINTS,
        },
        r => r,
    };
    match route {
        DirectRoute::Quadrature => {
            if config.n != 2 {
                return Err(Error::Prices("direct quadrature route handles duopolies only".into()));
            }
            let j = 1 - i;
            let (s, p) = (config.s, prices);
            let fj = &config.dists[j];
            let mut breaks = vec![p.switch(j) + s, p.own(j)];
            let mut own_marks = vec![0.0, 1.0];
            own_marks.extend(config.dists[i].kinks());
            for x in own_marks {
                breaks.push(x - p.own(i) + p.switch(j) + s);
                breaks.push(x - p.switch(i) - s + p.own(j));
            }
            breaks.extend(fj.kinks());
            let mut v = [0.0; 2];
            let mut buf = [0.0; 4];
            let raw = Quadrature::default().integrate_vec(4, 0.0, 1.0, &breaks, |x, out| {
                v[j] = x;
                th.integrand(&v, &mut buf);
                let w = fj.density(x);
                for (o, b) in out.iter_mut().zip(&buf) {
                    *o = w * b;
                }
            })?;
            Ok(finish([raw[0], raw[1], raw[2], raw[3]]))
        }
        DirectRoute::Qmc { points } => {
            let rivals: Vec<usize> = (0..config.n).filter(|&j| j != i).collect();
            if rivals.len() > qmc::MAX_DIM {
                return Err(Error::Prices(format!(
                    "QMC route supports at most {} rivals",
                    qmc::MAX_DIM
                )));
            }
            let mut u = vec![0.0; rivals.len()];
            let mut v = vec![0.0; config.n];
            let mut buf = [0.0; 4];
            let mut acc = [0.0; 4];
            for idx in 0..points as u64 {
                qmc::halton_point(idx, &mut u);
                for (&j, &uj) in rivals.iter().zip(&u) {
                    v[j] = config.dists[j].sample(uj)?;
                }
                th.integrand(&v, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            let n = points.max(1) as f64;
            Ok(finish(acc.map(|a| a / n)))
        }
        DirectRoute::Auto => unreachable!("resolved above"),
    }
}
