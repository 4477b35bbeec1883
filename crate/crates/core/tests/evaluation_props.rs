use mph_core::evaluation::{kfold_split, mae, select_best};
use mph_core::Family;
use proptest::prelude::*;

/// One parsed row of a score-table fixture.
struct Row {
    scores: Vec<(Family, f64)>,
    best: Family,
    range: f64,
    min: f64,
}

fn parse_fixture(text: &str) -> Vec<Row> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (best, range, min) = (col("Best"), col("Range"), col("Min MAE"));
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            Row {
                scores: Family::ALL
                    .iter()
                    .map(|f| (*f, cells[col(f.label())].parse().unwrap()))
                    .collect(),
                best: cells[best].parse().unwrap(),
                range: cells[range].parse().unwrap(),
                min: cells[min].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn score_table_fixtures_reproduce_selection_columns() {
    for (name, text, n_rows) in [
        ("phase1_children", include_str!("fixtures/phase1_children.csv"), 10),
        ("phase1_parent", include_str!("fixtures/phase1_parent.csv"), 1),
        ("phase2", include_str!("fixtures/phase2.csv"), 1),
    ] {
        let rows = parse_fixture(text);
        assert_eq!(rows.len(), n_rows, "{name}");
        for (i, row) in rows.iter().enumerate() {
            let s = select_best(&row.scores).unwrap();
            assert_eq!((s.family, s.range, s.min_mae), (row.best, row.range, row.min), "{name} row {}", i + 1);
        }
    }
}

#[test]
fn three_way_tie_goes_to_mlp_in_any_input_order() {
    let row = &parse_fixture(include_str!("fixtures/phase1_children.csv"))[8];
    let mut scores = row.scores.clone();
    for _ in 0..4 {
        scores.rotate_left(1);
        assert_eq!(select_best(&scores).unwrap().family, Family::Mlp);
    }
}

fn family_scores() -> impl Strategy<Value = Vec<(Family, f64)>> {
    proptest::sample::subsequence(Family::ALL.to_vec(), 1..=4).prop_flat_map(|fams| {
        let n = fams.len();
        proptest::collection::vec(prop_oneof![1u32..20u32, 1u32..3u32].prop_map(f64::from), n)
            .prop_map(move |m| fams.iter().copied().zip(m).collect::<Vec<_>>())
    })
}

proptest! {
    #[test]
    fn folds_partition_rows(n in 2usize..400, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let plan = kfold_split(n, k, seed).unwrap();
        let mut seen = vec![0usize; n];
        for f in 0..k {
            for r in plan.test_rows(f) {
                seen[r] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(plan, kfold_split(n, k, seed).unwrap());
    }

    #[test]
    fn mae_is_a_symmetric_nonnegative_distance(
        a in proptest::collection::vec(-1e3f64..1e3, 1..50),
        shift in proptest::collection::vec(-1e3f64..1e3, 1..50),
    ) {
        let n = a.len().min(shift.len());
        let a = &a[..n];
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let mirrored: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x - s).collect();
        let d = mae(a, &b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(mae(a, a).unwrap(), 0.0);
        prop_assert_eq!(d == 0.0, a == b.as_slice());
        prop_assert!((d - mae(a, &mirrored).unwrap()).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn winner_is_invariant_to_positive_rescaling(scores in family_scores(), scale in 1e-3f64..1e3) {
        let scaled: Vec<(Family, f64)> = scores.iter().map(|&(f, m)| (f, m * scale)).collect();
        prop_assert_eq!(select_best(&scores).unwrap().family, select_best(&scaled).unwrap().family);
    }
}
