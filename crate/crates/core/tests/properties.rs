//! Property tests for the data-layer invariants: lag alignment, split
//! partitioning, differencing round trips, and serialization identity.

use proptest::prelude::*;

use lagcast::data::{
    align_panel, build_design, read_cases_csv, read_climate_csv, split_design, write_cases_csv,
    write_climate_csv, AlignedPanel, CaseSeries, ClimateTable, ClimateVar, FeatureSet, LagSpec,
    MonthIndex,
};
use lagcast::sarimax::{difference, integrate};

fn arbitrary_panel() -> impl Strategy<Value = AlignedPanel> {
    (20usize..70, 0u64..1_000_000).prop_map(|(n, seed)| {
        // Column values derived from the seed, inside each valid range.
        let value = |k: u64, i: usize, lo: f64, hi: f64| -> f64 {
            let u = ((i as u64)
                .wrapping_mul(6364136223846793005)
                .wrapping_add(seed ^ k.wrapping_mul(0x9e3779b97f4a7c15))
                >> 33) as f64
                / (1u64 << 31) as f64;
            lo + u * (hi - lo)
        };
        let start: MonthIndex = "2021-06".parse().unwrap();
        let months: Vec<MonthIndex> = (0..n).map(|k| start.add_months(k as i64)).collect();
        let cases = CaseSeries {
            division: "prop".into(),
            months: months.clone(),
            counts: (0..n).map(|i| value(9, i, 0.0, 4000.0) as u32).collect(),
        };
        let climate = ClimateTable {
            months,
            columns: [
                (0..n).map(|i| value(1, i, 12.0, 38.0)).collect(),
                (0..n).map(|i| value(2, i, 0.0, 28.0)).collect(),
                (0..n).map(|i| value(3, i, 0.0, 700.0)).collect(),
                (0..n).map(|i| value(4, i, 0.0, 360.0)).collect(),
                (0..n).map(|i| value(5, i, 0.0, 28.0)).collect(),
                (0..n).map(|i| value(6, i, 20.0, 100.0)).collect(),
            ],
        };
        align_panel(&cases, &climate).unwrap()
    })
}

fn arbitrary_lags() -> impl Strategy<Value = LagSpec> {
    (prop::collection::vec(0u32..=12, 6), any::<bool>()).prop_map(|(lags, case_lag)| {
        let mut spec = LagSpec::zero().with_case_lag(case_lag);
        for (var, lag) in ClimateVar::ALL.into_iter().zip(lags) {
            spec = spec.with_lag(var, lag).unwrap();
        }
        spec
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every design cell equals the panel value of its variable at t - lag,
    /// and the row count is always panel length minus the max lag used.
    #[test]
    fn design_cells_are_lag_shifted_panel_values(
        panel in arbitrary_panel(),
        lags in arbitrary_lags(),
        set_idx in 0usize..4,
    ) {
        let set = FeatureSet::ALL[set_idx];
        let max_lag = lags.max_lag(&set.variables());
        prop_assume!(panel.len() >= max_lag as usize + 2);

        let design = build_design(&panel, set, &lags).unwrap();
        prop_assert_eq!(design.nrows(), panel.len() - max_lag as usize);

        let cases = panel.cases_f64();
        for (i, month) in design.months().iter().enumerate() {
            let t = panel.months().iter().position(|m| m == month).unwrap();
            let row = design.row(i);
            for (j, var) in set.variables().iter().enumerate() {
                let lag = lags.lag(*var) as usize;
                prop_assert_eq!(row[j], panel.climate(*var)[t - lag]);
            }
            if let Some(c) = design.case_lag_col() {
                prop_assert_eq!(row[c], cases[t - 1]);
            }
            prop_assert_eq!(design.y()[i], cases[t]);
        }
    }

    /// split_design partitions rows exactly and preserves chronology.
    #[test]
    fn split_partitions_exactly(
        panel in arbitrary_panel(),
        test_months in 1usize..20,
    ) {
        let design = build_design(&panel, FeatureSet::Set1, &LagSpec::standard()).unwrap();
        prop_assume!(test_months <= design.nrows().saturating_sub(12));

        let (train, test) = split_design(&design, test_months).unwrap();
        prop_assert_eq!(train.nrows() + test.nrows(), design.nrows());
        prop_assert_eq!(test.nrows(), test_months);
        let mut months = train.months().to_vec();
        months.extend_from_slice(test.months());
        prop_assert_eq!(months.as_slice(), design.months());
        for w in design.months().windows(2) {
            prop_assert_eq!(w[1], w[0].succ());
        }
    }

    /// Writing a panel to the two input CSVs and re-aligning reproduces it.
    #[test]
    fn panel_serialization_round_trips(panel in arbitrary_panel()) {
        let mut cases_bytes = Vec::new();
        let mut climate_bytes = Vec::new();
        write_cases_csv(&panel, &mut cases_bytes).unwrap();
        write_climate_csv(&panel, &mut climate_bytes).unwrap();
        let reread = align_panel(
            &read_cases_csv(&cases_bytes[..], panel.division()).unwrap(),
            &read_climate_csv(&climate_bytes[..]).unwrap(),
        ).unwrap();
        prop_assert_eq!(reread, panel);
    }

    /// integrate() inverts difference() on the overlapping support.
    #[test]
    fn difference_integrate_round_trip(
        seed in 0u64..100_000,
        n in 30usize..90,
        d in 0usize..=2,
        seasonal_d in 0usize..=1,
    ) {
        prop_assume!(d + seasonal_d <= 2 && d + seasonal_d >= 1);
        let depth = d + seasonal_d * 12;
        prop_assume!(n > depth + 5);

        let y: Vec<f64> = (0..n)
            .map(|i| {
                let u = ((i as u64).wrapping_mul(2862933555777941757).wrapping_add(seed) >> 33)
                    as f64 / (1u64 << 31) as f64;
                100.0 * u + (i as f64) * 0.5
            })
            .collect();
        let w = difference(&y, d, seasonal_d, 12).unwrap();
        let split = depth + 3;
        let rebuilt = integrate(&w[split - depth..], &y[..split], d, seasonal_d, 12).unwrap();
        for (a, b) in rebuilt.iter().zip(&y[split..]) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}
