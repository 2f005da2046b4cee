//! Property tests for the module invariants: metric bounds and ordering,
//! gradient projection safety, shuffle permutation, and the shared-sample
//! count identity.

use std::collections::HashSet;

use proptest::collection::vec;
use proptest::prelude::*;

use cilbench::data::{generate_synthetic, SynthSpec};
use cilbench::hierarchy::{ClassId, Hierarchy};
use cilbench::learners::agem_project;
use cilbench::metrics::{self, PredictionRecord};
use cilbench::rng::Xorshift64Star;
use cilbench::stream::{build_labeled_store, AssignmentRule, StoreMode};
use cilbench::Sample;

proptest! {
    #[test]
    fn metric_bounds_and_ordering(
        cases in vec((vec(0usize..8, 1..5), vec(0usize..8, 0..5)), 1..40)
    ) {
        let records: Vec<PredictionRecord> = cases
            .iter()
            .enumerate()
            .map(|(i, (truth, pred))| {
                PredictionRecord::new(
                    i as u64,
                    truth.iter().map(|&c| ClassId(c)),
                    pred.iter().map(|&c| ClassId(c)),
                )
            })
            .collect();
        let js = metrics::jaccard(&records).unwrap();
        let pw = metrics::pw_js(&records).unwrap();
        let mr = metrics::exact_match(&records).unwrap();
        prop_assert!((0.0..=1.0).contains(&js));
        prop_assert!((0.0..=1.0).contains(&pw));
        prop_assert!((0.0..=1.0).contains(&mr));
        prop_assert!(mr <= pw + 1e-12);
        prop_assert!(pw <= js + 1e-12);
    }

    #[test]
    fn agem_projection_never_conflicts(
        pairs in vec((-100.0f64..100.0, -100.0f64..100.0), 1..32),
    ) {
        let (g, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(r.iter().any(|v| v.abs() > 1e-6));
        let applied = agem_project(&g, &r);
        let dot: f64 = applied.iter().zip(&r).map(|(a, b)| a * b).sum();
        prop_assert!(dot >= -1e-6 * dot.abs().max(1.0));
    }

    #[test]
    fn shuffle_is_a_permutation(seed in any::<u64>(), len in 0usize..200) {
        let mut items: Vec<usize> = (0..len).collect();
        Xorshift64Star::new(seed).shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..len).collect::<Vec<_>>());
    }

    // with-duplicate count = without-duplicate count plus the per-class
    // keep/take overlap, exactly
    #[test]
    fn shared_sample_count_identity(
        children in 1usize..12,
        per_class in 2usize..60,
        seed in any::<u64>(),
    ) {
        let tsv: String = (0..children)
            .map(|i| format!("c{i}\top\n"))
            .chain(["lone\n".to_string()])
            .collect();
        let h = Hierarchy::parse_tsv(&tsv).unwrap();
        let spec = SynthSpec {
            dim: 2,
            samples_per_subclass: per_class,
            sup_scale: 10.0,
            sub_scale: 3.0,
            noise_scale: 1.0,
            seed,
        };
        let raw: Vec<Sample> = generate_synthetic(&h, &spec).unwrap();
        let rule = AssignmentRule::default();
        let store = build_labeled_store(&raw, &h, &rule, seed, StoreMode::Incomplete).unwrap();
        let keep = (rule.subclass_keep * per_class as f64).floor() as usize;
        let take = (rule.effective_take(children) * per_class as f64).floor() as usize;
        let overlap = children * (keep + take).saturating_sub(per_class);
        prop_assert_eq!(
            store.count_with_duplicates(),
            store.count_without_duplicates() + overlap
        );
    }

    // every complete-information item carries the full label set and
    // appears exactly once
    #[test]
    fn complete_store_lists_each_sample_once(
        children in 1usize..6,
        per_class in 1usize..20,
        seed in any::<u64>(),
    ) {
        let tsv: String = (0..children).map(|i| format!("c{i}\top\n")).collect();
        let h = Hierarchy::parse_tsv(&tsv).unwrap();
        let spec = SynthSpec {
            dim: 2,
            samples_per_subclass: per_class,
            sup_scale: 10.0,
            sub_scale: 3.0,
            noise_scale: 1.0,
            seed,
        };
        let raw: Vec<Sample> = generate_synthetic(&h, &spec).unwrap();
        let store =
            build_labeled_store(&raw, &h, &AssignmentRule::default(), seed, StoreMode::Complete)
                .unwrap();
        let op = h.lookup("op").unwrap();
        let in_super: HashSet<usize> = store.class_list(op).iter().copied().collect();
        prop_assert_eq!(in_super.len(), raw.len());
    }
}
