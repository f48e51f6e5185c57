use super::*;
use crate::demand::profit;
use crate::distributions::ValuationDistribution;

fn uniform(n: usize, s: f64) -> MarketConfig {
    MarketConfig::symmetric(n, ValuationDistribution::uniform(), 0.0, s)
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn uniform_br(c: &MarketConfig, p: &PriceProfile, i: usize) -> f64 {
    match best_response(c, p, i, &settings()).unwrap() {
        BestResponse::Uniform(x) => x,
        BestResponse::Discriminatory(_) => unreachable!(),
    }
}

#[test]
fn monopoly_best_response_when_nobody_switches() {
    for rival in [0.2, 0.6, 0.9] {
        let x = uniform_br(&uniform(2, 1.0), &PriceProfile::Uniform(vec![0.5, rival]), 0);
        assert!((x - 0.5).abs() < 1e-8, "{x}");
    }
}

#[test]
fn best_response_beats_exhaustive_grid() {
    let c = uniform(2, 0.1);
    let p = PriceProfile::Uniform(vec![0.5, 0.6]);
    let x = uniform_br(&c, &p, 0);
    let at = |y: f64| profit(&c, &PriceProfile::Uniform(vec![y, 0.6]), 0).unwrap();
    let (grid_best, _) = (0..=10_000)
        .map(|k| k as f64 / 10_000.0)
        .map(|y| (y, at(y)))
        .fold((0.0, f64::NEG_INFINITY), |b, (y, v)| if v > b.1 { (y, v) } else { b });
    assert!((x - grid_best).abs() < 1e-4);
    let best = at(x);
    for k in 0..=1000 {
        assert!(best >= at(k as f64 / 1000.0) - 1e-15);
    }
}

#[test]
fn best_response_satisfies_foc() {
    let c = MarketConfig::symmetric(3, ValuationDistribution::triangular_increasing(), 0.05, 0.2);
    let p = PriceProfile::Uniform(vec![0.5, 0.45, 0.62]);
    let x = uniform_br(&c, &p, 1);
    let g = crate::demand::foc(&c, &PriceProfile::Uniform(vec![0.5, x, 0.62]), 1).unwrap();
    assert!(g.abs() < 1e-10, "{g}");
}

#[test]
fn discriminatory_best_response_prices_separately() {
    let c = uniform(2, 1.0).with_mode(PricingMode::Discriminatory);
    let p = PriceProfile::Discriminatory(vec![PricePair { own: 0.3, switch: 0.3 }; 2]);
    let BestResponse::Discriminatory(pair) = best_response(&c, &p, 0, &settings()).unwrap() else {
        panic!("expected a price pair");
    };
    assert!((pair.own - 0.5).abs() < 1e-8);

    let c = uniform(2, 0.2).with_mode(PricingMode::Discriminatory);
    let BestResponse::Discriminatory(pair) = best_response(&c, &p, 0, &settings()).unwrap() else {
        panic!("expected a price pair");
    };
    let profile = PriceProfile::Discriminatory(vec![pair, PricePair { own: 0.3, switch: 0.3 }]);
    let d = crate::demand::demand_discriminatory(&c, &profile, 0).unwrap();
    assert!(d.foc_own.abs() < 1e-10 && d.foc_switch.abs() < 1e-10);
}

#[test]
fn monopoly_limit_equilibrium() {
    let c = uniform(2, 1.0);
    let eq = solve_equilibrium(&c, &PriceProfile::constant(&c, 0.2), &settings()).unwrap();
    assert!(eq.converged);
    for x in eq.prices.slots() {
        assert!((x - 0.5).abs() < 1e-3);
    }
}

// Symmetric FOC of the uniform duopoly reduces to 1 - 2P - P^2 = 0 for
// s below 1 - P.
#[test]
fn uniform_duopoly_anchor() {
    for s in [0.1, 0.3] {
        let c = uniform(2, s);
        let eq = solve_equilibrium(&c, &PriceProfile::constant(&c, 0.5), &settings()).unwrap();
        assert!(eq.converged && eq.residual <= FOC_TOL);
        assert!(eq.stable);
        for x in eq.prices.slots() {
            assert!((x - (2f64.sqrt() - 1.0)).abs() < 1e-6, "{x}");
        }
    }
}

#[test]
fn asymmetric_start_reaches_symmetric_equilibrium() {
    let c = uniform(2, 0.1);
    let eq = solve_equilibrium(&c, &PriceProfile::Uniform(vec![0.1, 0.9]), &settings()).unwrap();
    let p = eq.prices.slots();
    assert!(eq.converged);
    assert!((p[0] - p[1]).abs() < 1e-5);
    let sym = solve_equilibrium(&c, &PriceProfile::constant(&c, 0.5), &settings()).unwrap();
    assert!((p[0] - sym.prices.slots()[0]).abs() < 1e-5);
}

#[test]
fn missing_equilibrium_is_reported() {
    let c = uniform(2, 0.55);
    let s = SolverSettings {
        max_iter: 60,
        ..settings()
    };
    let eq = solve_equilibrium(&c, &PriceProfile::constant(&c, 0.5), &s).unwrap();
    assert!(!eq.converged);
    assert_eq!(eq.iterations, 60);
    assert!(eq.residual > FOC_TOL);
    assert!(eq.stability.is_none());
}

#[test]
fn rejects_bad_damping() {
    let c = uniform(2, 0.1);
    let s = SolverSettings {
        damping: 0.0,
        ..settings()
    };
    assert!(solve_equilibrium(&c, &PriceProfile::constant(&c, 0.5), &s).is_err());
}

#[test]
fn extremal_equilibria_coincide() {
    let cases = [
        uniform(2, 0.1),
        MarketConfig::symmetric(2, ValuationDistribution::triangular_increasing(), 0.0, 0.2),
    ];
    for c in cases {
        let ex = extremal_equilibria(&c, &settings()).unwrap();
        assert!(ex.low.converged && ex.high.converged);
        assert!(ex.gap <= 1e-6, "{}", ex.gap);
        assert_eq!(ex.low.extremal_gap, Some(ex.gap));
        assert!(!ex.heuristic());
    }
}

#[test]
fn synthetic_stability() {
    let stable = stability_from_jacobian(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0])).unwrap();
    assert!(stable.stable && stable.criteria_agree);
    assert_eq!(stable.br_spectral_radius, 0.0);
    let unstable = stability_from_jacobian(&DMatrix::identity(2, 2)).unwrap();
    assert!(!unstable.stable);
    assert!(!unstable.negative_semidefinite);
    let singular = stability_from_jacobian(&DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    assert!(matches!(singular, Err(Error::Degenerate)));
}

#[test]
fn criteria_can_disagree() {
    // negative definite but best responses steeper than one
    let j = DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, -3.0, -1.0]);
    let r = stability_from_jacobian(&j).unwrap();
    assert!(r.negative_semidefinite);
    assert!(r.br_spectral_radius > 1.0);
    assert!(!r.stable && !r.criteria_agree);
}

#[test]
fn dominant_diagonal_at_uniform_equilibria() {
    for n in [2, 4] {
        let c = uniform(n, 0.1);
        let eq = solve_equilibrium(&c, &PriceProfile::constant(&c, 0.5), &settings()).unwrap();
        let u = uniqueness_diagnostic(&c, &eq.prices).unwrap();
        assert_eq!(u.rows.len(), n);
        assert!(u.all_hold(), "{u:?}");
    }
}

#[test]
fn best_response_rises_with_rival_price() {
    let c = uniform(2, 0.1);
    let mut last = f64::NEG_INFINITY;
    for k in 0..20 {
        let rival = 0.3 + 0.2 * k as f64 / 19.0;
        let x = uniform_br(&c, &PriceProfile::Uniform(vec![0.5, rival]), 0);
        assert!(x >= last - 1e-9, "{rival} {x}");
        last = x;
    }
}

#[test]
fn switching_cost_irrelevant_without_switching() {
    let c = uniform(2, 1.5);
    let r = comparative_statics(&c, &PriceProfile::constant(&c, 0.5), &settings()).unwrap();
    for (a, b) in r.dpds_fd.iter().zip(&r.dpds_ift) {
        assert!(a.abs() < 1e-6 && b.abs() < 1e-6);
    }
}

#[test]
fn no_exit_prices_rise_in_switching_cost() {
    let c = uniform(2, 0.2).with_exit(false);
    let r = comparative_statics(&c, &PriceProfile::constant(&c, 0.5), &settings()).unwrap();
    assert!(r.dpds_fd.iter().all(|&x| x > 0.0));
    assert!(r.agreement <= 1e-3);
}

#[test]
fn both_derivative_paths_agree() {
    let c = MarketConfig::symmetric(2, ValuationDistribution::triangular_increasing(), 0.0, 0.2);
    let r = comparative_statics(&c, &PriceProfile::constant(&c, 0.5), &settings()).unwrap();
    assert!(r.agreement <= 1e-3, "{r:?}");
}

#[test]
fn comparative_statics_needs_room_below_s() {
    let c = uniform(2, 5e-4);
    let err = comparative_statics(&c, &PriceProfile::constant(&c, 0.5), &settings()).unwrap_err();
    assert!(matches!(err, Error::Resolve { .. }));
}

#[test]
fn spectral_radius_with_repeated_eigenvalues() {
    // eigenvalues 11a (once) and -a (eleven times)
    let a = 0.04;
    let b = DMatrix::from_fn(12, 12, |q, r| if q == r { 0.0 } else { a });
    assert!((spectral_radius(b.clone()) - 11.0 * a).abs() < 1e-9);
    assert!((gelfand_radius(b) - 11.0 * a).abs() < 1e-9);
    let rot = DMatrix::from_row_slice(2, 2, &[0.0, -0.7, 0.7, 0.0]);
    assert!((gelfand_radius(rot) - 0.7).abs() < 1e-9);
    assert_eq!(
        gelfand_radius(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])),
        0.0
    );
}

#[test]
fn twelve_firm_equilibrium_is_checked() {
    let c = uniform(12, 0.1);
    let eq = solve_equilibrium(&c, &PriceProfile::constant(&c, 0.09174321939921785), &settings()).unwrap();
    assert!(eq.converged);
    let st = eq.stability.unwrap();
    assert!(st.stable && st.br_spectral_radius < 1.0);
}
