use proptest::prelude::*;
use rvmb_core::harness::{fmt_sig9, parse_csv, render, round_sig9, CellError, MetricsReport, ModelKind, ReportFormat};

fn metric() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-6f64..1.0, 1.0f64..1e9].prop_map(round_sig9)
}

fn cell_error() -> impl Strategy<Value = CellError> {
    prop_oneof![
        "[ -~]{0,40}".prop_map(|message| CellError::CompileFailure { message }),
        (proptest::option::of(any::<u64>()), "[ -~]{0,40}").prop_map(|(pc, message)| CellError::SimError { pc, message }),
        any::<u64>().prop_map(|limit| CellError::LimitExceeded { limit }),
    ]
}

fn report() -> impl Strategy<Value = MetricsReport> {
    let model = prop_oneof![Just(ModelKind::Atomic), Just(ModelKind::Minor), Just(ModelKind::O3)];
    let ok = (
        "[a-z][a-z0-9_]{0,15}",
        model.clone(),
        any::<u32>(),
        any::<u32>(),
        proptest::array::uniform13(metric()),
        (metric(), metric(), metric(), proptest::option::of(metric()), metric(), metric()),
        "[0-9a-f]{64}",
    )
        .prop_map(|(name, model, cycles, instrs, mix, (cpi, l1, l2, acc, wall, kips), digest)| {
            let mut r = MetricsReport::failed(&name, model, CellError::LimitExceeded { limit: 0 });
            r.error = None;
            r.cycles = cycles as u64;
            r.instructions = instrs as u64;
            r.mix = mix;
            r.cpi = cpi;
            r.l1d_mpki = l1;
            r.l2_mpki = l2;
            r.branch_acc = acc;
            r.wall_s = wall;
            r.kips = kips;
            r.digest = digest;
            r
        });
    let failed = ("[a-z][a-z0-9_]{0,15}", model, cell_error()).prop_map(|(n, m, e)| MetricsReport::failed(&n, m, e));
    prop_oneof![3 => ok, 1 => failed]
}

proptest! {
    #[test]
    fn csv_round_trips(reports in proptest::collection::vec(report(), 1..12)) {
        let text = render(&reports, ReportFormat::Csv).unwrap();
        prop_assert_eq!(parse_csv(&text).unwrap(), reports);
    }

    #[test]
    fn json_round_trips(reports in proptest::collection::vec(report(), 1..12)) {
        let text = render(&reports, ReportFormat::Json).unwrap();
        let back: Vec<MetricsReport> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, reports);
    }

    #[test]
    fn sig9_keeps_nine_significant_digits(x in 1e-6f64..1e12) {
        let s = fmt_sig9(x);
        let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
        prop_assert!(digits.trim_start_matches('0').len() >= 9, "{} -> {}", x, s);
        let r: f64 = s.parse().unwrap();
        prop_assert!(((r - x) / x).abs() <= 5e-9);
        prop_assert_eq!(round_sig9(r), r);
    }
}
