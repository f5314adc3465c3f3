use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fairsel::data::{generate_synthetic, inject_label_bias, BiasSpec, GenSpec};
use fairsel::metrics::{delta_deo, delta_dp, p_percent_rule};
use fairsel::model::softmax;
use fairsel::resample::{largest_remainder, rebalance_indices};
use fairsel::selection::{fair_score, select_top, ScoredCandidate};

fn cand(id: u64, score: f64) -> ScoredCandidate {
    ScoredCandidate {
        id,
        train_loss: 0.0,
        proxy_loss: None,
        peer_term: None,
        score,
        sampling_weight: None,
    }
}

fn dist(raw: &[f64]) -> Vec<f64> {
    let t: f64 = raw.iter().sum();
    raw.iter().map(|v| v / t).collect()
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0f64..500.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn top_selection_ignores_input_order(
        scores in prop::collection::vec(0u8..6, 1..40),
        n_frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let scored: Vec<_> = scores.iter().enumerate().map(|(i, &s)| cand(i as u64, f64::from(s))).collect();
        let n = (n_frac * scored.len() as f64) as usize;
        let pick = |c: &[ScoredCandidate]| {
            let mut ids: Vec<u64> = select_top(c, n).unwrap().into_iter().map(|i| c[i].id).collect();
            ids.sort_unstable();
            ids
        };
        let mut shuffled = scored.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(pick(&scored), pick(&shuffled));
    }

    #[test]
    fn largest_remainder_sums_to_total(raw in prop::collection::vec(0.01f64..1.0, 1..8), total in 0usize..200) {
        let p = dist(&raw);
        let quotas: Vec<f64> = p.iter().map(|v| v * total as f64).collect();
        let out = largest_remainder(&quotas, total);
        prop_assert_eq!(out.iter().sum::<usize>(), total);
        for (o, q) in out.iter().zip(&quotas) {
            prop_assert!((*o as f64 - q).abs() < 1.0);
        }
    }

    #[test]
    fn rebalance_keeps_size_and_is_seeded(
        keys in prop::collection::vec((0usize..2, 0usize..2), 1..64),
        g in 0.05f64..0.95,
        l in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let (gp, lp) = ([1.0 - g, g], [1.0 - l, l]);
        let run = || rebalance_indices(&keys, &gp, &lp, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().0;
        let a = run();
        prop_assert_eq!(a.len(), keys.len());
        prop_assert!(a.iter().all(|&i| i < keys.len()));
        prop_assert_eq!(a, run());
    }

    #[test]
    fn fair_score_moves_with_each_loss(
        train in 0.0f64..10.0,
        proxy in 0.0f64..10.0,
        peer in 0.0f64..10.0,
        alpha in 0.0f64..1.0,
        gamma in 0.01f64..1.0,
        bump in 0.01f64..1.0,
    ) {
        let base = fair_score(train, proxy, peer, alpha, gamma);
        prop_assert!(fair_score(train + bump, proxy, peer, alpha, gamma) > base);
        prop_assert!(fair_score(train, proxy + bump, peer, alpha, gamma) >= base);
        prop_assert!(fair_score(train, proxy, peer + bump, alpha, gamma) < base);
    }

    #[test]
    fn fairness_gaps_ignore_group_naming(
        rows in prop::collection::vec((0usize..2, 0usize..2, 0usize..2), 1..60),
    ) {
        let preds: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let groups: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let swapped: Vec<usize> = groups.iter().map(|g| 1 - g).collect();
        prop_assert_eq!(delta_dp(&preds, &groups), delta_dp(&preds, &swapped));
        prop_assert_eq!(delta_deo(&preds, &labels, &groups), delta_deo(&preds, &labels, &swapped));
        prop_assert_eq!(p_percent_rule(&preds, &groups), p_percent_rule(&preds, &swapped));
        if let Some(p) = p_percent_rule(&preds, &groups) {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flip_rates_track_bias_spec(rho in 0.05f64..0.45, seed in any::<u64>()) {
        let clean = generate_synthetic(&GenSpec::two_gaussians(20_000, 2, 2.0, 0.5), seed).unwrap();
        let biased = inject_label_bias(&clean, &BiasSpec::symmetric(rho, 2, &[0]).unwrap(), seed).unwrap();
        let mut counts = [(0usize, 0usize); 2];
        for ex in biased.iter() {
            let c = &mut counts[ex.s];
            c.0 += 1;
            c.1 += usize::from(ex.is_flipped().unwrap());
        }
        let rate = counts[0].1 as f64 / counts[0].0 as f64;
        let sigma = (rho * (1.0 - rho) / counts[0].0 as f64).sqrt();
        // generous band so the property holds for every draw
        prop_assert!((rate - rho).abs() < 5.0 * sigma, "rate {} rho {}", rate, rho);
        prop_assert_eq!(counts[1].1, 0);
    }
}

#[test]
fn clean_label_is_independent_of_group() {
    let t = generate_synthetic(&GenSpec::two_gaussians(40_000, 2, 2.0, 0.3), 17).unwrap();
    let mut table = [[0.0f64; 2]; 2];
    for ex in t.iter() {
        table[ex.s][ex.z.unwrap()] += 1.0;
    }
    let n = t.len() as f64;
    let mut chi2 = 0.0;
    for s in 0..2 {
        for z in 0..2 {
            let expect = (table[s][0] + table[s][1]) * (table[0][z] + table[1][z]) / n;
            chi2 += (table[s][z] - expect).powi(2) / expect;
        }
    }
    // 99.9% quantile of chi-square with one degree of freedom
    assert!(chi2 < 10.83, "chi2 = {chi2}");
}
