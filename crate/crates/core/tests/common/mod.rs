#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use switchcost::distributions::{Family, ValuationDistribution};
use switchcost::market::{MarketConfig, PricePair, PriceProfile, PricingMode};

pub fn random_family(rng: &mut ChaCha8Rng) -> ValuationDistribution {
    let family = match rng.gen_range(0..7) {
        0 => Family::Uniform,
        1 => Family::TriangularIncreasing,
        2 => Family::Trapezoidal {
            k: rng.gen_range(2.5..6.0),
        },
        3 => {
            let r: f64 = rng.gen_range(0.5..3.0);
            Family::TruncatedExponential {
                rate: if rng.gen_bool(0.5) { r } else { -r },
            }
        }
        4 => Family::TruncatedNormal {
            mean: rng.gen_range(0.2..0.8),
            sd: rng.gen_range(0.15..0.5),
        },
        5 => Family::TruncatedPareto {
            location: rng.gen_range(-0.5..0.0),
            scale: rng.gen_range(0.3..1.0),
            shape: rng.gen_range(1.0..3.0),
        },
        _ => Family::PiecewiseLinear {
            knots: vec![
                (0.0, rng.gen_range(0.2..2.0)),
                (rng.gen_range(0.3..0.7), rng.gen_range(0.2..2.0)),
                (1.0, rng.gen_range(0.2..2.0)),
            ],
        },
    };
    ValuationDistribution::new(family).expect("valid random family")
}

/// Asymmetric market with `n` firms, random shares, costs, densities and
/// switching cost.
pub fn random_config(rng: &mut ChaCha8Rng, n: usize, mode: PricingMode) -> MarketConfig {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut mu: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let rest: f64 = mu[1..].iter().sum();
    mu[0] = 1.0 - rest;
    MarketConfig {
        n,
        mu,
        costs: (0..n).map(|_| rng.gen_range(0.0..0.3)).collect(),
        s: rng.gen_range(0.02..0.6),
        dists: (0..n).map(|_| random_family(rng)).collect(),
        pricing_mode: mode,
        exit_allowed: rng.gen_bool(0.75),
    }
}

pub fn random_prices(rng: &mut ChaCha8Rng, config: &MarketConfig) -> PriceProfile {
    match config.pricing_mode {
        PricingMode::Uniform => PriceProfile::Uniform((0..config.n).map(|_| rng.gen_range(0.05..0.95)).collect()),
        PricingMode::Discriminatory => PriceProfile::Discriminatory(
            (0..config.n)
                .map(|_| PricePair {
                    own: rng.gen_range(0.05..0.95),
                    switch: rng.gen_range(0.05..0.95),
                })
                .collect(),
        ),
    }
}
