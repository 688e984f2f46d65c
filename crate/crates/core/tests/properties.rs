mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use tlevel_core::distributions::ValuationDistribution;
use tlevel_core::feasibility::{self, Environment};
use tlevel_core::learner::{self, LearnerConfig, SampleSet, SearchStrategy};
use tlevel_core::levels;
use tlevel_core::montecarlo;
use tlevel_core::{ProductPrior, TLevelAuction};

fn family(k: u8) -> EnvFamily {
    match k % 3 {
        0 => EnvFamily::SingleItem,
        1 => EnvFamily::Matroid,
        _ => EnvFamily::Explicit,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn outcomes_are_well_formed(seed in any::<u64>(), fam in 0u8..3) {
        let mut r = rng(seed);
        let a = random_auction(&mut r, family(fam));
        for _ in 0..4 {
            let v = random_profile(&mut r, a.n());
            let o = a.run(&v);
            prop_assert_eq!(check_outcome(&a, &v, &o), Ok(()));
            prop_assert_eq!(check_critical_bids(&a, &v, &o), Ok(()));
        }
    }

    #[test]
    fn uniform_one_matches_single_item(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_auction(&mut r, EnvFamily::SingleItem);
        let b = as_uniform_one(&a);
        for _ in 0..8 {
            let v = random_profile(&mut r, a.n());
            let (x, y) = (a.run(&v), b.run(&v));
            prop_assert_eq!(x.winners, y.winners);
            prop_assert_eq!(x.payments, y.payments);
        }
    }

    #[test]
    fn outcome_depends_only_on_levels(seed in any::<u64>(), fam in 0u8..3) {
        let mut r = rng(seed);
        let a = random_auction(&mut r, family(fam));
        let v = random_profile(&mut r, a.n());
        // Move every value to a random point of its cell.
        let w: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let row = a.row(i);
                let l = a.level_of(i, x);
                let lo = if l < 0 { 0.0 } else { row[l as usize] };
                let hi = row.get((l + 1) as usize).copied().unwrap_or(lo + 5.0);
                if hi > lo { r.gen_range(lo..hi) } else { lo }
            })
            .collect();
        for i in 0..a.n() {
            prop_assert_eq!(a.level_of(i, v[i]), a.level_of(i, w[i]));
        }
        let (x, y) = (a.run(&v), a.run(&w));
        prop_assert_eq!(x.winners, y.winners);
        prop_assert_eq!(x.payments, y.payments);
    }

    #[test]
    fn relabeling_bidders_relabels_outcome(seed in any::<u64>(), fam in 0u8..2) {
        let mut r = rng(seed);
        let a = random_auction(&mut r, family(fam));
        let n = a.n();
        let perm = random_permutation(&mut r, n);
        // Bidder i of `a` becomes bidder perm[i] of `b`.
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            rows[perm[i]] = a.row(i).to_vec();
        }
        let order: Vec<usize> = a.tie_order().iter().map(|&i| perm[i]).collect();
        let env = match a.env() {
            Environment::SingleItem { .. } => Environment::single_item(n).unwrap(),
            _ => Environment::uniform_matroid(n, r.gen_range(1..=n)).unwrap(),
        };
        let a = TLevelAuction::new(a.thresholds(), a.tie_order().to_vec(), env.clone(), None).unwrap();
        let b = TLevelAuction::new(rows, order, env, None).unwrap();
        let v = random_profile(&mut r, n);
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[perm[i]] = v[i];
        }
        let (x, y) = (a.run(&v), b.run(&w));
        for i in 0..n {
            prop_assert_eq!(x.winners.contains(i), y.winners.contains(perm[i]));
            prop_assert_eq!(x.payments[i], y.payments[perm[i]]);
        }
    }

    #[test]
    fn greedy_is_optimal_on_matroids(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=7);
        let env = random_matroid(&mut r, n);
        let Environment::Matroid(m) = &env else { unreachable!() };
        prop_assert!(feasibility::satisfies_matroid_axioms(m));
        let weights: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..3.0)).collect();
        let greedy = env.max_weight_feasible(&weights);
        let best = feasibility::exhaustive_max_weight(m, &weights);
        prop_assert!(env.is_feasible(greedy));
        let (g, b) = (feasibility::set_weight(greedy, &weights), feasibility::set_weight(best, &weights));
        prop_assert!((g - b).abs() < 1e-9, "greedy {} vs exhaustive {}", g, b);
    }

    #[test]
    fn single_bidder_erm_is_lossless(values in prop::collection::vec(0.0f64..10.0, 1..40)) {
        let samples = SampleSet::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let env = Environment::single_item(1).unwrap();
        let learned = learner::erm(&samples, &env, &LearnerConfig::exhaustive(1, 0)).unwrap();
        // No reserve on a fine grid does better than the best sample value.
        for k in 0..=400 {
            let reserve = k as f64 * 0.025;
            let a = TLevelAuction::single_item(vec![vec![reserve]]).unwrap();
            let value = learner::empirical_revenue(&a, &samples).unwrap();
            prop_assert!(value <= learned.empirical_value + 1e-12);
        }
    }

    #[test]
    fn anchor_scales_with_bids(values in prop::collection::vec(0.01f64..10.0, 20..200), c in 0.1f64..10.0) {
        let ep = 0.1;
        let a = levels::estimate_anchor(&values, ep, 0.05).unwrap();
        let scaled: Vec<f64> = values.iter().map(|x| x * c).collect();
        let b = levels::estimate_anchor(&scaled, ep, 0.05).unwrap();
        prop_assert!((b.beta_hat - c * a.beta_hat).abs() <= 1e-9 * b.beta_hat.max(1.0));
        prop_assert!(a.empirical_tail >= levels::anchor_tail_requirement(ep));
        // Raising any sample never lowers the anchor.
        let mut raised = values.clone();
        raised[0] += 1.0;
        prop_assert!(levels::estimate_anchor(&raised, ep, 0.05).unwrap().beta_hat >= a.beta_hat);
    }

    #[test]
    fn confidence_intervals_bracket_the_mean(seed in any::<u64>(), lo in 0.0f64..2.0, w in 0.1f64..3.0) {
        let prior = ProductPrior::iid(ValuationDistribution::uniform(lo, lo + w).unwrap(), 2).unwrap();
        let e = montecarlo::estimate(&prior, 500, seed, |v| v[0] + v[1]);
        prop_assert!(e.lower() <= e.mean && e.mean <= e.upper());
        prop_assert!(e.half_width > 0.0);
        prop_assert!(e.mean >= 2.0 * lo && e.mean <= 2.0 * (lo + w));
    }
}

#[test]
fn coordinate_ascent_tracks_exhaustive_search() {
    let mut worst = f64::INFINITY;
    for fixture in 0..50u64 {
        let mut r = rng(1000 + fixture);
        let (n, m, t) = (2, 20, 2);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.gen_range(0.0..4.0)).collect()).collect();
        let samples = SampleSet::from_rows(&rows).unwrap();
        let env = Environment::single_item(n).unwrap();
        let best = learner::erm(&samples, &env, &LearnerConfig::exhaustive(t, fixture)).unwrap();
        let config = LearnerConfig { strategy: SearchStrategy::ascent(), ..LearnerConfig::exhaustive(t, fixture) };
        let ascent = learner::erm(&samples, &env, &config).unwrap();
        assert!(ascent.empirical_value <= best.empirical_value + 1e-12);
        if best.empirical_value > 0.0 {
            worst = worst.min(ascent.empirical_value / best.empirical_value);
        }
    }
    assert!(worst >= 0.99, "worst ascent/exhaustive ratio {worst}");
}

#[test]
fn half_width_shrinks_with_sample_count() {
    let prior = ProductPrior::iid(ValuationDistribution::uniform(0.0, 1.0).unwrap(), 2).unwrap();
    let a = TLevelAuction::single_item(vec![vec![0.5, 0.75]; 2]).unwrap();
    let small = montecarlo::estimate(&prior, 2_000, 9, |v| a.revenue(v));
    let large = montecarlo::estimate(&prior, 20_000, 9, |v| a.revenue(v));
    let ratio = small.half_width / large.half_width;
    let expected = 10f64.sqrt();
    assert!(ratio > expected / 2.0 && ratio < expected * 2.0, "ratio {ratio}");
}
