use explore_core::{
    abstract_pseudo_count, concentration_cap, corrected_pseudo_count, count_sandwich_bounds, estimate_ratio_constants,
    exact_abstraction_identity, pseudo_count, pseudo_count_total, theorem2_check, under_exploration_confidence,
    Aggregation, CountForm, DensityModel, DensityProbe, EmpiricalDensity, MixtureDensity, UniformAggregationDensity,
};
use proptest::prelude::*;

/// Classes {0, 1} and {2}; four visits to the first class among ten.
fn room_density_model() -> (UniformAggregationDensity, Aggregation) {
    let agg = Aggregation::new(vec![0, 0, 1], 2).unwrap();
    let mut model = UniformAggregationDensity::new(agg.clone(), 1);
    for s in [0, 0, 0, 1, 2, 2, 2, 2, 2, 2] {
        model.update(s, 0);
    }
    (model, agg)
}

#[test]
fn uniform_aggregation_frozen_values() {
    let (model, agg) = room_density_model();
    assert_eq!(abstract_pseudo_count(&model, &agg, 0, 0).unwrap().value, 4.0);
    let probe = model.probe(1, 0).unwrap();
    assert_eq!((probe.rho, probe.rho_prime, probe.rho_second), (0.2, 5.0 / 22.0, 0.25));
    assert!((pseudo_count(&probe).unwrap().value - 17.0 / 3.0).abs() < 1e-12);
    assert!((exact_abstraction_identity(2, 4.0, 10.0).unwrap() - 17.0 / 3.0).abs() < 1e-12);
    assert_eq!(corrected_pseudo_count(&probe).unwrap().value, 4.0);
    assert_eq!(exact_abstraction_identity(1, 4.0, 10.0).unwrap(), 4.0);
}

/// Solves `rho = N / n`, `rho' = (N + 1) / (n + G)`, `rho'' = (N + 2) / (n + 2G)`
/// for `N` by bisection, eliminating `n` and `G` with the first two.
fn corrected_count_by_bisection(rho: f64, rho_prime: f64, rho_second: f64) -> f64 {
    let residual = |n_tilde: f64| {
        let total = n_tilde / rho;
        let g = (n_tilde + 1.0) / rho_prime - total;
        (n_tilde + 2.0) / (total + 2.0 * g) - rho_second
    };
    let (mut lo, mut hi) = (1e-9, 1e6);
    assert!(residual(lo).signum() != residual(hi).signum());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid).signum() == residual(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn corrected_count_matches_equation_system() {
    let real = DensityProbe::new(0.2, 5.0 / 22.0, 0.25);
    let oracle = corrected_count_by_bisection(0.2, 5.0 / 22.0, 0.25);
    assert!((oracle - 4.0).abs() < 1e-9);
    assert!((corrected_pseudo_count(&real).unwrap().value - oracle).abs() < 1e-9);
    for (k, g, n) in [(1, 3, 7), (5, 2, 40), (12, 4, 13), (30, 7, 200)] {
        let p = DensityProbe::from_counts(CountForm {
            hits: k,
            class_size: g,
            total: n,
        });
        let oracle = corrected_count_by_bisection(p.rho, p.rho_prime, p.rho_second);
        let real = corrected_pseudo_count(&DensityProbe::new(p.rho, p.rho_prime, p.rho_second)).unwrap();
        assert!((oracle - k as f64).abs() < 1e-6 * k as f64, "({k}, {g}, {n}): {oracle}");
        assert!((real.value - oracle).abs() < 1e-6 * oracle);
    }
}

#[test]
fn closed_form_bound_examples() {
    let k = 5.0;
    let n_hat = exact_abstraction_identity(2, 20.0, 100.0).unwrap();
    assert!((n_hat - 22.625).abs() < 1e-12);
    assert!(n_hat <= 20.0 * concentration_cap(k).unwrap());
    assert_eq!(concentration_cap(k).unwrap(), 1.5);

    let exact = 17.0 / 3.0;
    let coarse = count_sandwich_bounds(0.1, 2, 4.0, 10.0).unwrap();
    assert!(coarse.low < exact && coarse.diverged && coarse.high == f64::INFINITY);
    let fine = count_sandwich_bounds(0.01, 2, 4.0, 10.0).unwrap();
    assert!(fine.low < exact && exact < fine.high && !fine.diverged);
    assert!(count_sandwich_bounds(0.1, 2, 10.0, 10.0).is_err());

    let c = under_exploration_confidence(0.5, 0.1, 2, 2, 1).unwrap();
    assert!((c - (1.0 - 0.05 - 4.0 * (0.1f64 / 8.0).sqrt())).abs() < 1e-12);
    assert!((c - 0.5028).abs() < 1e-4);
}

#[test]
fn mixture_ratio_constants_by_enumeration() {
    let history = [(0, 0), (0, 0), (1, 0), (0, 0)];
    let agg = Aggregation::identity(2);
    let rc = estimate_ratio_constants(&history, MixtureDensity::new(2, 1, 0.5).unwrap(), &agg).unwrap();
    // rho = N / (2n) + 1/4 for two states and one action.
    let rho = |hits: f64, n: f64| 0.5 * hits / n + 0.25;
    let (mut a, mut b, mut c, mut d) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut counts = [0.0f64; 2];
    for (t, &(s, _)) in history.iter().enumerate() {
        counts[s] += 1.0;
        let n = (t + 1) as f64;
        for &k in counts.iter().filter(|&&k| k > 0.0) {
            let (mu, mu1) = (k / n, (k + 1.0) / (n + 1.0));
            let (r, r1) = (rho(k, n), rho(k + 1.0, n + 1.0));
            for ratio in [r / mu, (1.0 - r1) / (1.0 - mu1)]
                .into_iter()
                .take(if mu1 < 1.0 { 2 } else { 1 })
            {
                a = a.min(ratio);
                b = b.max(ratio);
            }
            let inc = (mu1 - mu) / (r1 - r);
            c = c.min(inc);
            d = d.max(inc);
        }
    }
    assert!(a < 1.0 && 1.0 < b);
    for (got, want) in [(rc.a, a), (rc.b, b), (rc.c().unwrap(), c), (rc.d().unwrap(), d)] {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

fn history_strategy(ns: usize, na: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..ns, 0..na), 1..80)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn empirical_pseudo_count_is_the_count(history in history_strategy(5, 2)) {
        let mut model = EmpiricalDensity::new(5, 2);
        let mut counts = [0u64; 10];
        for &(s, a) in &history {
            model.update(s, a);
            counts[s * 2 + a] += 1;
        }
        for s in 0..5 {
            for a in 0..2 {
                let probe = model.probe(s, a).unwrap();
                prop_assert_eq!(pseudo_count(&probe).unwrap().value, counts[s * 2 + a] as f64);
                prop_assert_eq!(corrected_pseudo_count(&probe).unwrap().value, counts[s * 2 + a] as f64);
                prop_assert_eq!(pseudo_count_total(&probe).unwrap().value, history.len() as f64);
            }
        }
    }

    #[test]
    fn count_and_real_routes_agree(k in 0u64..500, extra in 1u64..500, g in 1u64..8) {
        let counts = CountForm { hits: k, class_size: g, total: k + extra };
        let exact = DensityProbe::from_counts(counts);
        let real = DensityProbe::new(exact.rho, exact.rho_prime, exact.rho_second);
        for f in [pseudo_count, pseudo_count_total, corrected_pseudo_count] {
            let (x, y) = (f(&exact).unwrap().value, f(&real).unwrap().value);
            prop_assert!((x - y).abs() <= 1e-6 * x.max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn co_aggregated_states_share_probabilities(history in history_strategy(6, 2)) {
        let agg = Aggregation::new(vec![0, 1, 0, 2, 1, 0], 3).unwrap();
        let mut model = UniformAggregationDensity::new(agg.clone(), 2);
        for &(s, a) in &history {
            model.update(s, a);
        }
        for a in 0..2 {
            for k in 0..3 {
                let class = agg.class(k);
                let first = model.probe(class[0], a).unwrap();
                for &s in class {
                    let p = model.probe(s, a).unwrap();
                    prop_assert_eq!((p.rho, p.rho_prime, p.rho_second), (first.rho, first.rho_prime, first.rho_second));
                }
            }
        }
    }

    #[test]
    fn densities_are_normalised_and_learning_positive(history in history_strategy(4, 3), w in 0.05f64..=1.0) {
        let agg = Aggregation::new(vec![0, 0, 1, 1], 2).unwrap();
        let mut models: (EmpiricalDensity, UniformAggregationDensity, MixtureDensity) = (
            EmpiricalDensity::new(4, 3),
            UniformAggregationDensity::new(agg, 3),
            MixtureDensity::new(4, 3, w).unwrap(),
        );
        for &(s, a) in &history {
            models.0.update(s, a);
            models.1.update(s, a);
            models.2.update(s, a);
        }
        fn check<M: DensityModel>(m: &M) -> Result<(), TestCaseError> {
            let mut total = 0.0;
            for s in 0..4 {
                for a in 0..3 {
                    total += m.rho(s, a).unwrap();
                    prop_assert!(m.probe(s, a).unwrap().is_learning_positive());
                }
            }
            prop_assert!((total - 1.0).abs() < 1e-12);
            Ok(())
        }
        check(&models.0)?;
        check(&models.1)?;
        check(&models.2)?;
    }

    #[test]
    fn corrected_count_never_exceeds_plain_count_on_mixtures(history in history_strategy(4, 2), w in 0.05f64..=1.0) {
        let mut model = MixtureDensity::new(4, 2, w).unwrap();
        for &(s, a) in &history {
            model.update(s, a);
        }
        for s in 0..4 {
            for a in 0..2 {
                let probe = model.probe(s, a).unwrap();
                let (hat, tilde) = (pseudo_count(&probe).unwrap(), corrected_pseudo_count(&probe).unwrap());
                if !hat.saturated && !tilde.saturated {
                    prop_assert!(tilde.value <= hat.value * (1.0 + 1e-9) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn own_aggregation_gives_unit_constants(history in history_strategy(6, 2)) {
        let agg = Aggregation::new(vec![0, 1, 1, 2, 2, 2], 3).unwrap();
        let rc = estimate_ratio_constants(&history, UniformAggregationDensity::new(agg.clone(), 2), &agg).unwrap();
        prop_assert!((rc.a - 1.0).abs() < 1e-9 && (rc.b - 1.0).abs() < 1e-9);
        if let Some((c, d)) = rc.increment {
            prop_assert!((c - 1.0).abs() < 1e-9 && (d - 1.0).abs() < 1e-9);
            let mut model = UniformAggregationDensity::new(agg.clone(), 2);
            for &(s, a) in &history {
                model.update(s, a);
            }
            let n = history.len() as u64;
            for k in 0..3 {
                for a in 0..2 {
                    let hits = history.iter().filter(|&&(s, b)| agg.phi(s) == k && b == a).count() as u64;
                    if hits > 0 && hits < n {
                        let n_hat = abstract_pseudo_count(&model, &agg, k, a).unwrap().value;
                        prop_assert!(theorem2_check(rc.a, rc.b, c, d, n_hat, hits));
                        prop_assert!((n_hat - hits as f64).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
