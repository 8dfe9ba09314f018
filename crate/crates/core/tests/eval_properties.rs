use std::collections::HashSet;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use mgembed::eval::{auc, f1_score, mrr_at_n, rank_items, recall_at_n, RankedList};

type Users = Vec<(Vec<f64>, Vec<usize>)>;

fn instance() -> impl Strategy<Value = (Array2<f64>, Users)> {
    (2usize..25, 1usize..4).prop_flat_map(|(n_items, dim)| {
        let items = prop::collection::vec(-2i32..3, n_items * dim)
            .prop_map(move |v| Array2::from_shape_vec((n_items, dim), v.into_iter().map(f64::from).collect()).unwrap());
        let users = prop::collection::vec(
            (
                prop::collection::vec(0.1f64..2.0, dim),
                prop::collection::vec(0..n_items, 0..4),
            ),
            1..12,
        );
        (items, users)
    })
}

fn rankings(items: &Array2<f64>, users: &Users, n: usize) -> Vec<(RankedList, Vec<usize>)> {
    users
        .iter()
        .map(|(u, truth)| {
            let mut t = truth.clone();
            t.sort_unstable();
            t.dedup();
            let r = rank_items(Array1::from(u.clone()).view(), items.view(), n, &HashSet::new()).unwrap();
            (r, t)
        })
        .collect()
}

proptest! {
    #[test]
    fn recall_and_mrr_are_bounded_and_monotone((items, users) in instance()) {
        let full = rankings(&items, &users, items.nrows());
        let has_truth = full.iter().any(|(_, t)| !t.is_empty());
        let mut last = (0.0, 0.0);
        for n in 1..=items.nrows() {
            let m = mrr_at_n(&full, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
            prop_assert!(m >= last.1);
            if has_truth {
                let r = recall_at_n(&full, n).unwrap();
                prop_assert!((0.0..=1.0).contains(&r));
                prop_assert!(r >= last.0);
                last.0 = r;
            }
            last.1 = m;
        }
        if has_truth {
            prop_assert_eq!(recall_at_n(&full, items.nrows()).unwrap(), 1.0);
        }
    }

    #[test]
    fn truncated_rankings_are_prefixes((items, users) in instance(), n in 1usize..10) {
        let full = rankings(&items, &users, items.nrows());
        let short = rankings(&items, &users, n);
        for ((a, _), (b, _)) in full.iter().zip(&short) {
            prop_assert_eq!(&a.items[..b.items.len()], &b.items[..]);
        }
    }

    #[test]
    fn ranking_ignores_user_scale((items, users) in instance(), scale in 0.01f64..100.0) {
        for (u, _) in &users {
            let u = Array1::from(u.clone());
            let a = rank_items(u.view(), items.view(), items.nrows(), &HashSet::new()).unwrap();
            let b = rank_items((&u * scale).view(), items.view(), items.nrows(), &HashSet::new()).unwrap();
            prop_assert_eq!(a.items[0], b.items[0]);
        }
    }

    #[test]
    fn auc_and_f1_bounded(scored in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..40)) {
        let (scores, labels): (Vec<f64>, Vec<bool>) = scored.into_iter().unzip();
        let f = f1_score(&scores, &labels, 0.5);
        prop_assert!((0.0..=1.0).contains(&f));
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            let a = auc(&scores, &labels).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
        }
    }
}
