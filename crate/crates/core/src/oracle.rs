//! Monte Carlo ground truth: individual consumers making the discrete choice.
//!
//! Consumer `k` draws from its own ChaCha stream (stream id `k` under the
//! run seed), so the outcome does not depend on how consumers are sharded
//! across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::market::{MarketConfig, PriceProfile};

/// Outcome of a consumer's decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Exit,
    Buy(usize),
}

/// Demand of one firm split by where its buyers started.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FirmDemand {
    /// Buyers who arrived at the firm and stayed.
    pub initial: f64,
    /// Buyers who switched in from rivals.
    pub switch_in: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StdErrors {
    pub firms: Vec<FirmDemand>,
    pub exit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandBreakdown {
    pub firms: Vec<FirmDemand>,
    pub exit: f64,
    /// Binomial standard errors, present for sampled estimates.
    pub std_err: Option<StdErrors>,
}

impl DemandBreakdown {
    /// `sum(total) + exit`, which is one up to rounding.
    pub fn accounted_mass(&self) -> f64 {
        self.firms.iter().map(|f| f.total).sum::<f64>() + self.exit
    }
}

/// Chooses the utility-maximising option for a consumer with valuations `v`
/// who arrived at `initial`. Buying beats exiting, the initial firm beats
/// rivals and lower indices beat higher ones on ties.
pub fn consumer_choice(v: &[f64], prices: &PriceProfile, s: f64, initial: usize, exit_allowed: bool) -> Decision {
    let mut best = initial;
    let mut best_u = v[initial] - prices.own(initial);
    for (j, &vj) in v.iter().enumerate() {
        if j == initial {
            continue;
        }
        let u = vj - prices.switch(j) - s;
        if u > best_u {
            best = j;
            best_u = u;
        }
    }
    if exit_allowed && best_u < 0.0 {
        Decision::Exit
    } else {
        Decision::Buy(best)
    }
}

#[inline]
fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone)]
struct Tally {
    initial: Vec<u64>,
    switch_in: Vec<u64>,
    exit: u64,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            initial: vec![0; n],
            switch_in: vec![0; n],
            exit: 0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.initial.iter_mut().zip(other.initial) {
            *a += b;
        }
        for (a, b) in self.switch_in.iter_mut().zip(other.switch_in) {
            *a += b;
        }
        self.exit += other.exit;
        self
    }
}

const CHUNK: u64 = 1 << 14;

/// Draws consumer `index` under `seed`: its initial firm and valuations.
pub fn draw_consumer(config: &MarketConfig, seed: u64, index: u64, v: &mut [f64]) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let u = unit_open(&mut rng);
    let mut acc = 0.0;
    let mut initial = config.n - 1;
    for (j, &m) in config.mu.iter().enumerate() {
        acc += m;
        if u < acc {
            initial = j;
            break;
        }
    }
    for (x, d) in v.iter_mut().zip(&config.dists) {
        *x = d.sample(unit_open(&mut rng)).expect("uniform draw lies in (0,1)");
    }
    initial
}

/// Empirical demand over `samples` simulated consumers.
pub fn mc_demand(config: &MarketConfig, prices: &PriceProfile, samples: u64, seed: u64) -> DemandBreakdown {
    let n = config.n;
    let chunks = samples.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally::new(n);
            let mut v = vec![0.0; n];
            for index in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let initial = draw_consumer(config, seed, index, &mut v);
                match consumer_choice(&v, prices, config.s, initial, config.exit_allowed) {
                    Decision::Exit => t.exit += 1,
                    Decision::Buy(j) if j == initial => t.initial[j] += 1,
                    Decision::Buy(j) => t.switch_in[j] += 1,
                }
            }
            t
        })
        .reduce(|| Tally::new(n), Tally::merge);

    let total = samples.max(1) as f64;
    let p = |count: u64| count as f64 / total;
    let se = |count: u64| {
        let q = p(count);
        (q * (1.0 - q) / total).sqrt()
    };
    let cell = |f: &dyn Fn(u64) -> f64, j: usize| FirmDemand {
        initial: f(tally.initial[j]),
        switch_in: f(tally.switch_in[j]),
        total: f(tally.initial[j] + tally.switch_in[j]),
    };
    DemandBreakdown {
        firms: (0..n).map(|j| cell(&p, j)).collect(),
        exit: p(tally.exit),
        std_err: Some(StdErrors {
            firms: (0..n).map(|j| cell(&se, j)).collect(),
            exit: se(tally.exit),
        }),
    }
}
