use proptest::prelude::*;
use vnnarena::adjudicate::Classification;
use vnnarena::score::{
    award_bonuses, instance_scores, normalize, score_benchmark, scoring_time, BenchmarkRow, Outcome,
};

fn classification() -> impl Strategy<Value = Classification> {
    prop_oneof![
        Just(Classification::CorrectHold),
        Just(Classification::CorrectViolated),
        Just(Classification::Incorrect),
        Just(Classification::Unsolved),
    ]
}

fn outcomes() -> impl Strategy<Value = Vec<Outcome>> {
    (1usize..5, 1usize..8).prop_flat_map(|(tools, instances)| {
        prop::collection::vec((classification(), 0.0f64..4.0), tools * instances).prop_map(
            move |cells| {
                cells
                    .into_iter()
                    .enumerate()
                    .map(|(k, (classification, corrected))| Outcome {
                        tool: format!("t{}", k % tools),
                        instance: format!("i{}", k / tools),
                        classification,
                        corrected,
                    })
                    .collect()
            },
        )
    })
}

fn rows_with_scores(scores: &[i64]) -> Vec<BenchmarkRow> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &s)| BenchmarkRow {
            score: s,
            ..BenchmarkRow::from_counts(format!("t{i}"), 0, 0, 0, 0, 0)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn percent_scale_invariant(scores in prop::collection::vec(-2000i64..2000, 1..6), c in 1i64..50) {
        let mut a = rows_with_scores(&scores);
        let scaled: Vec<i64> = scores.iter().map(|s| s * c).collect();
        let mut b = rows_with_scores(&scaled);
        normalize(&mut a);
        normalize(&mut b);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.tool, &y.tool);
            prop_assert!((x.percent - y.percent).abs() < 1e-9);
        }
    }

    #[test]
    fn percent_range(scores in prop::collection::vec(-2000i64..2000, 1..6)) {
        let mut rows = rows_with_scores(&scores);
        normalize(&mut rows);
        for r in &rows {
            prop_assert!((0.0..=100.0).contains(&r.percent));
        }
        let best = *scores.iter().max().unwrap();
        if best > 0 {
            prop_assert_eq!(rows[0].score, best);
            prop_assert_eq!(rows[0].percent, 100.0);
        } else {
            prop_assert!(rows.iter().all(|r| r.percent == 0.0));
        }
    }

    #[test]
    fn bonus_clusters(raw in prop::collection::vec(0.0f64..5.0, 0..8)) {
        let times: Vec<f64> = raw.iter().map(|&t| scoring_time(t)).collect();
        let bonus = award_bonuses(&times);
        if times.is_empty() {
            prop_assert!(bonus.is_empty());
            return Ok(());
        }
        let min = times.iter().copied().fold(f64::INFINITY, f64::min);
        for (t, b) in times.iter().zip(&bonus) {
            prop_assert_eq!(*b == 2, *t <= min + 0.2 + 1e-9);
        }
        prop_assert!(bonus.contains(&2));
        let rest_min = times.iter().zip(&bonus).filter(|(_, b)| **b != 2).map(|(t, _)| *t).fold(f64::INFINITY, f64::min);
        for (t, b) in times.iter().zip(&bonus) {
            if *b != 2 {
                prop_assert_eq!(*b == 1, *t <= rest_min + 0.2 + 1e-9);
            }
        }
    }

    #[test]
    fn row_identity_matches_instance_sums(outcomes in outcomes()) {
        let rows = score_benchmark(&outcomes);
        let scores = instance_scores(&outcomes);
        for row in &rows {
            let sum: i64 = scores.iter().filter(|s| s.tool == row.tool).map(|s| s.base + s.bonus).sum();
            prop_assert_eq!(sum, row.score);
            prop_assert_eq!(
                row.score,
                10 * i64::from(row.verified + row.falsified) + 2 * i64::from(row.fastest)
                    + i64::from(row.second_fastest) - 100 * i64::from(row.penalty)
            );
        }
        for s in &scores {
            prop_assert!([10, 0, -100].contains(&s.base));
            prop_assert!([0, 1, 2].contains(&s.bonus));
            prop_assert!(s.bonus == 0 || s.base == 10);
        }
    }
}
