use chrono::{Days, NaiveDate};
use mph_core::dataset::{self, aggregate_children, read_csv, write_csv, ColumnSchema, HierarchyBundle};
use mph_core::synth::{self, default_benchmark_config};
use proptest::prelude::*;

fn bundle_strategy() -> impl Strategy<Value = HierarchyBundle> {
    (1usize..40, 1usize..5, 0u64..5000, any::<bool>()).prop_flat_map(|(n, m, offset, integers)| {
        let value = if integers {
            (0u32..10_000).prop_map(f64::from).boxed()
        } else {
            (0.0f64..1e6).boxed()
        };
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(proptest::collection::vec(value.clone(), n), m),
            proptest::collection::vec(value, n),
        )
            .prop_map(move |(promo, hol, children, parent)| {
                let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + Days::new(offset);
                let dates = (0..n as u64).map(|t| start + Days::new(t)).collect();
                HierarchyBundle::from_columns(dates, promo, hol, parent, children).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(bundle in bundle_strategy()) {
        let mut buf = Vec::new();
        write_csv(&bundle, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &ColumnSchema::default()).unwrap();
        prop_assert_eq!(&back.dates, &bundle.dates);
        prop_assert_eq!(&back.parent.features, &bundle.parent.features);
        prop_assert_eq!(&back.parent.target, &bundle.parent.target);
        prop_assert_eq!(back.children.len(), bundle.children.len());
        for (a, b) in back.children.iter().zip(&bundle.children) {
            prop_assert_eq!(&a.target, &b.target);
            prop_assert_eq!(&a.features, &b.features);
        }
        prop_assert_eq!(back.coherent, bundle.coherent);
    }

    #[test]
    fn exactly_one_weekday_dummy_is_set(bundle in bundle_strategy()) {
        let x = &bundle.parent.features;
        let cols: Vec<usize> = x
            .column_names()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with("dow_"))
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(cols.len(), 7);
        for (r, date) in bundle.dates.iter().enumerate() {
            let row: Vec<f64> = cols.iter().map(|&c| x.get(r, c)).collect();
            prop_assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
            prop_assert_eq!(row[dataset::weekday_index(*date)], 1.0);
        }
    }

    #[test]
    fn aggregation_ignores_child_order(
        children in proptest::collection::vec(proptest::collection::vec(0u32..1000, 12), 1..6),
        rotation in 0usize..6,
    ) {
        let children: Vec<Vec<f64>> = children.into_iter().map(|c| c.into_iter().map(f64::from).collect()).collect();
        let mut permuted = children.clone();
        permuted.rotate_left(rotation % children.len());
        permuted.reverse();
        prop_assert_eq!(aggregate_children(&children).unwrap(), aggregate_children(&permuted).unwrap());
    }

    #[test]
    fn noiseless_parent_synth_is_coherent(seed in 0u64..1000, n_children in 1usize..6) {
        let mut c = default_benchmark_config(seed);
        c.n_days = 60;
        c.n_children = n_children;
        c.base_levels.truncate(n_children);
        c.promo_effects.truncate(n_children);
        c.holiday_effects.truncate(n_children);
        c.dow_profiles.truncate(n_children);
        let b = synth::generate(&c).unwrap();
        prop_assert!(b.coherent);
    }
}

#[test]
fn calendar_features_for_a_known_week() {
    let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
    let dates: Vec<NaiveDate> = (0..7).map(|t| start + Days::new(t)).collect();
    let x = dataset::derive_calendar_features(&dates, &[true; 7], &[false; 7]).unwrap();
    let promo = x.column_index("promotion").unwrap();
    let monday = x.column_index("dow_mon").unwrap();
    assert!((0..7).all(|r| x.get(r, promo) == 1.0));
    assert_eq!(x.get(0, monday), 1.0);
    assert_eq!(x.get(1, monday), 0.0);
}

#[test]
fn benchmark_csv_reloads_with_ten_children() {
    let b = synth::generate(&default_benchmark_config(11)).unwrap();
    let mut buf = Vec::new();
    write_csv(&b, &mut buf).unwrap();
    let back = read_csv(buf.as_slice(), &ColumnSchema::default()).unwrap();
    assert_eq!((back.n_rows(), back.n_children()), (935, 10));
    assert!(back.coherent);
}
