use proptest::prelude::*;
use rand::Rng;

use lpx_core::eval::{
    agreement_report, mean_and_population_std, multi_seed_report, roc_auc, FeedbackRecord,
    ScoredLabel, Verdict,
};
use lpx_core::explain::Technique;
use lpx_core::rng::stage_rng;

fn pair_count(items: &[ScoredLabel]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for p in items.iter().filter(|i| i.label) {
        for n in items.iter().filter(|i| !i.label) {
            pairs += 1.0;
            wins += if p.score > n.score {
                1.0
            } else if p.score == n.score {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn labelled() -> impl Strategy<Value = Vec<ScoredLabel>> {
    prop::collection::vec((0i32..30, any::<bool>()), 2..120)
        .prop_map(|v| {
            v.into_iter()
                .map(|(s, l)| ScoredLabel::new(f64::from(s) / 3.0, l))
                .collect::<Vec<_>>()
        })
        .prop_filter("both classes", |v| v.iter().any(|i| i.label) && v.iter().any(|i| !i.label))
}

proptest! {
    #[test]
    fn equals_pair_counting(items in labelled()) {
        prop_assert!((roc_auc(&items).unwrap() - pair_count(&items)).abs() <= 1e-12);
    }

    #[test]
    fn invariant_under_increasing_transforms(items in labelled()) {
        let base = roc_auc(&items).unwrap();
        for f in [|x: f64| x.exp(), |x: f64| 3.0 * x - 7.0, |x: f64| x.powi(3) + x] {
            let moved: Vec<ScoredLabel> =
                items.iter().map(|i| ScoredLabel::new(f(i.score), i.label)).collect();
            prop_assert!((roc_auc(&moved).unwrap() - base).abs() <= 1e-12);
        }
    }

    #[test]
    fn flipping_labels_complements(items in labelled()) {
        let flipped: Vec<ScoredLabel> =
            items.iter().map(|i| ScoredLabel::new(i.score, !i.label)).collect();
        let sum = roc_auc(&items).unwrap() + roc_auc(&flipped).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn agreement_counts_ignore_log_order(
        verdicts in prop::collection::vec((0usize..40, 0usize..3, 0usize..3, any::<bool>()), 0..300),
        rotate in 0usize..300,
    ) {
        let mut log: Vec<FeedbackRecord> = Vec::new();
        let mut keys = std::collections::HashSet::new();
        for (link, t, who, agree) in verdicts {
            if keys.insert((link, t, who)) {
                log.push(FeedbackRecord {
                    link_id: format!("L{link}"),
                    technique: Technique::ALL[t],
                    annotator: format!("a{who}"),
                    verdict: if agree { Verdict::Agree } else { Verdict::Disagree },
                    timestamp: "2024-01-01T00:00:00Z".into(),
                });
            }
        }
        let report = agreement_report(&log).unwrap();
        // Recount by hand.
        for t in Technique::ALL {
            let rows: Vec<&FeedbackRecord> = log.iter().filter(|r| r.technique == t).collect();
            let agreed = rows.iter().filter(|r| r.verdict == Verdict::Agree).count();
            prop_assert_eq!(report.get(t).agreements, agreed);
            prop_assert_eq!(report.get(t).total, rows.len());
        }
        if !log.is_empty() {
            let k = rotate % log.len();
            log.rotate_left(k);
        }
        prop_assert_eq!(agreement_report(&log).unwrap(), report);
    }
}

#[test]
fn five_seed_report_matches_recomputation() {
    let items_for = |seed: u64| -> Vec<ScoredLabel> {
        let mut rng = stage_rng(seed, "auc-report");
        (0..60)
            .map(|i| ScoredLabel::new(rng.random_range(0.0..1.0), i % 2 == 0 || rng.random_bool(0.2)))
            .collect()
    };
    let seeds = [0, 1, 2, 3, 4];
    let report = multi_seed_report("toy", "m", &seeds, items_for).unwrap();
    let aucs: Vec<f64> = seeds.iter().map(|&s| pair_count(&items_for(s))).collect();
    let mean = aucs.iter().sum::<f64>() / 5.0;
    let std = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
    for (run, want) in report.runs.iter().zip(&aucs) {
        assert!((run.auc - want).abs() < 1e-12);
    }
    assert!((report.mean - mean).abs() < 1e-12);
    assert!((report.std - std).abs() < 1e-12);
    assert!((mean_and_population_std(&[0.6, 0.7]).0 - 0.65).abs() < 1e-12);
    assert!((mean_and_population_std(&[0.6, 0.7]).1 - 0.05).abs() < 1e-12);
}
