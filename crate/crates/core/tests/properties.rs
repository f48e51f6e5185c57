mod common;

use proptest::prelude::*;
use switchcost::demand::{cross_partial, demand_all, soc};
use switchcost::distributions::{check_conditions, Family, ValuationDistribution};
use switchcost::market::{MarketConfig, PriceProfile, PricingMode};
use switchcost::oracle::{consumer_choice, mc_demand};
use switchcost::quadrature::Quadrature;
use switchcost::regions::region_grid;
use switchcost::scenario::Scenario;
use switchcost::solver::{best_response, solve_equilibrium, BestResponse, SolverSettings, FOC_TOL};

fn family() -> impl Strategy<Value = ValuationDistribution> {
    prop_oneof![
        Just(Family::Uniform),
        Just(Family::TriangularIncreasing),
        (2.2..8.0f64).prop_map(|k| Family::Trapezoidal { k }),
        (0.3..4.0f64, any::<bool>()).prop_map(|(r, neg)| Family::TruncatedExponential {
            rate: if neg { -r } else { r }
        }),
        (0.1..0.9f64, 0.1..0.6f64).prop_map(|(mean, sd)| Family::TruncatedNormal { mean, sd }),
        (-0.8..0.0f64, 0.2..1.5f64, 0.5..4.0f64).prop_map(|(location, scale, shape)| Family::TruncatedPareto {
            location,
            scale,
            shape
        }),
        (0.2..3.0f64, 0.2..0.8f64, 0.2..3.0f64, 0.2..3.0f64).prop_map(|(a, x, b, c)| Family::PiecewiseLinear {
            knots: vec![(0.0, a), (x, b), (1.0, c)]
        }),
    ]
    .prop_map(|f| ValuationDistribution::new(f).unwrap())
}

fn near_kink(d: &ValuationDistribution, x: f64, h: f64) -> bool {
    d.kinks().iter().any(|k| (k - x).abs() < 10.0 * h)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn density_integrates_to_one(d in family()) {
        let mass = Quadrature::default().integrate(0.0, 1.0, &d.kinks(), |x| d.density(x)).unwrap();
        prop_assert!((mass - 1.0).abs() <= 1e-9, "{mass}");
    }

    #[test]
    fn derivatives_match_differences(d in family(), x in 0.01..0.99f64) {
        let h = 1e-6;
        prop_assume!(!near_kink(&d, x, h));
        let fd = |f: &dyn Fn(f64) -> f64| (f(x + h) - f(x - h)) / (2.0 * h);
        let pdf = d.pdf(x).unwrap();
        prop_assert!(close(pdf, fd(&|v| d.cdf(v).unwrap()), 1e-6));
        let slope = d.dpdf(x).unwrap().value;
        prop_assert!(close(slope, fd(&|v| d.pdf(v).unwrap()), 1e-6));
        let curv = d.d2pdf(x).unwrap().value;
        prop_assert!(close(curv, fd(&|v| d.dpdf(v).unwrap().value), 1e-6));
    }

    #[test]
    fn sample_inverts_cdf(d in family(), u in 0.0..1.0f64) {
        let v = d.sample(u).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((d.cdf(v).unwrap() - u).abs() <= 1e-9);
    }

    #[test]
    fn uniform_meets_every_condition(grid in 2usize..400, c in 0.0..0.9f64) {
        prop_assert!(check_conditions(&ValuationDistribution::uniform(), c, grid).all_hold());
    }
}

fn market(n: usize) -> impl Strategy<Value = MarketConfig> {
    (
        prop::collection::vec(0.2..1.0f64, n),
        prop::collection::vec(0.0..0.5f64, n),
        0.01..1.2f64,
        prop::collection::vec(family(), n),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(move |(raw, costs, s, dists, exit_allowed, disc)| {
            let total: f64 = raw.iter().sum();
            MarketConfig {
                n,
                mu: raw.iter().map(|x| x / total).collect(),
                costs,
                s,
                dists,
                pricing_mode: if disc {
                    PricingMode::Discriminatory
                } else {
                    PricingMode::Uniform
                },
                exit_allowed,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validation_is_idempotent_and_survives_round_trip(c in (2usize..5).prop_flat_map(market), bump in -0.2..0.2f64) {
        let mut c = c;
        c.mu[0] += bump;
        c.s -= 0.3;
        let first = c.violations();
        prop_assert_eq!(&first, &c.violations());
        let json = Scenario::from_config(&c).to_json().unwrap();
        let back = Scenario::parse(&json).unwrap().points();
        match back {
            Ok(points) => {
                prop_assert!(first.is_empty());
                prop_assert_eq!(&points[0].config, &c);
            }
            Err(e) => {
                prop_assert!(!first.is_empty());
                prop_assert_eq!(e.to_string(), c.validate().unwrap_err().to_string());
            }
        }
    }

    #[test]
    fn sampled_demand_accounts_for_everyone(c in (2usize..5).prop_flat_map(market), seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let p = common::random_prices(&mut rng, &c);
        let d = mc_demand(&c, &p, 4_000, seed);
        prop_assert!((d.accounted_mass() - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn sampled_demand_monotone(
        c in (2usize..5).prop_flat_map(market),
        seed in any::<u64>(),
        bump in 0.0..0.3f64,
        ds in 0.0..0.3f64,
    ) {
        let mut c = c;
        c.pricing_mode = PricingMode::Uniform;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let p = common::random_prices(&mut rng, &c);
        let base = mc_demand(&c, &p, 4_000, seed);

        let mut raised = p.slots();
        raised[0] = (raised[0] + bump).min(1.0);
        let up = mc_demand(&c, &PriceProfile::Uniform(raised), 4_000, seed);
        prop_assert!(up.firms[0].total <= base.firms[0].total);
        for k in 1..c.n {
            prop_assert!(up.firms[k].total >= base.firms[k].total);
        }
        prop_assert!(up.exit >= base.exit);

        let costly = mc_demand(&c.with_s(c.s + ds), &p, 4_000, seed);
        for k in 0..c.n {
            prop_assert!(costly.firms[k].switch_in <= base.firms[k].switch_in);
            prop_assert!(costly.firms[k].initial >= base.firms[k].initial);
        }
        prop_assert!(costly.exit >= base.exit);
    }

    #[test]
    fn symmetric_firms_share_equally(n in 2usize..5, d in family(), s in 0.01..1.0f64, p in 0.05..0.95f64) {
        let c = MarketConfig::symmetric(n, d, 0.1, s);
        let q = demand_all(&c, &PriceProfile::constant(&c, p)).unwrap();
        for f in &q.firms {
            prop_assert!((f.total - q.firms[0].total).abs() <= 1e-9);
        }
    }

    #[test]
    fn quadrature_demand_monotone_in_prices(c in (2usize..4).prop_flat_map(market), bump in 1e-3..0.2f64, seed in any::<u64>()) {
        let mut c = c;
        c.pricing_mode = PricingMode::Uniform;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let p = common::random_prices(&mut rng, &c);
        let base = demand_all(&c, &p).unwrap();
        let mut raised = p.slots();
        raised[0] = (raised[0] + bump).min(1.0);
        let up = demand_all(&c, &PriceProfile::Uniform(raised)).unwrap();
        prop_assert!(up.firms[0].total <= base.firms[0].total + 1e-12);
        for k in 1..c.n {
            prop_assert!(up.firms[k].total >= base.firms[k].total - 1e-12);
        }
    }

    #[test]
    fn region_labels_follow_consumer_choice(px in 0.0..1.0f64, py in 0.0..1.0f64, s in 0.01..1.0f64, exit in any::<bool>()) {
        let c = MarketConfig::symmetric(2, ValuationDistribution::uniform(), 0.0, s).with_exit(exit);
        let p = PriceProfile::Uniform(vec![px, py]);
        let g = region_grid(&c, &p, 100).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(px.to_bits());
        for _ in 0..10_000 {
            let (col, row) = (rand::Rng::gen_range(&mut rng, 0..100), rand::Rng::gen_range(&mut rng, 0..100));
            let (x, y) = g.cell_center(col, row);
            for panel in 0..2 {
                let want = consumer_choice(&[x, y], &p, s, panel, exit);
                let got = g.label(panel, col, row);
                let expected = match want {
                    switchcost::oracle::Decision::Exit => "exit",
                    switchcost::oracle::Decision::Buy(j) if j == panel => "stay",
                    _ => "switch",
                };
                prop_assert_eq!(got.as_str(), expected);
            }
        }
    }
}

fn smooth_family() -> impl Strategy<Value = ValuationDistribution> {
    prop_oneof![
        Just(ValuationDistribution::uniform()),
        Just(ValuationDistribution::triangular_increasing()),
        (0.3..0.7f64, 0.2..0.5f64).prop_map(|(mean, sd)| ValuationDistribution::new(Family::TruncatedNormal {
            mean,
            sd
        })
        .unwrap()),
        (0.5..2.0f64)
            .prop_map(|rate| ValuationDistribution::new(Family::TruncatedExponential { rate: -rate }).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn converged_equilibria_are_interior_maxima(
        n in 2usize..4,
        d in smooth_family(),
        cost in 0.0..0.2f64,
        s in 0.05..0.45f64,
    ) {
        let c = MarketConfig::symmetric(n, d, cost, s);
        let eq = solve_equilibrium(&c, &PriceProfile::constant(&c, 0.5), &SolverSettings::default()).unwrap();
        prop_assume!(eq.converged);
        prop_assert!(eq.residual <= FOC_TOL);
        for i in 0..n {
            let x = eq.prices.own(i);
            if x > 0.0 && x < 1.0 {
                prop_assert!(soc(&c, &eq.prices, i).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn best_response_monotone_under_complements(
        d in smooth_family(),
        s in 0.05..0.5f64,
        lo in 0.2..0.5f64,
        width in 0.05..0.3f64,
    ) {
        let c = MarketConfig::symmetric(2, d, 0.0, s);
        let rivals: Vec<f64> = (0..20).map(|k| lo + width * k as f64 / 19.0).collect();
        let settings = SolverSettings::default();
        let brs: Vec<f64> = rivals
            .iter()
            .map(|&r| match best_response(&c, &PriceProfile::Uniform(vec![0.5, r]), 0, &settings).unwrap() {
                BestResponse::Uniform(x) => x,
                BestResponse::Discriminatory(_) => unreachable!(),
            })
            .collect();
        // complementarity verified on the box the responses live in
        let own_lo = brs.iter().copied().fold(f64::INFINITY, f64::min);
        let own_hi = brs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let verified = rivals.iter().all(|&r| {
            (0..=10).all(|k| {
                let x = own_lo + (own_hi - own_lo) * k as f64 / 10.0;
                cross_partial(&c, &PriceProfile::Uniform(vec![x, r]), 0, 1).unwrap() >= 0.0
            })
        });
        prop_assume!(verified);
        for w in brs.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{brs:?}");
        }
    }
}
