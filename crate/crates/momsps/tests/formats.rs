use momsps::libsvm::{from_problem, parse_libsvm_str, to_libsvm_string, LibsvmData, SparseRow};
use momsps::problem_file::{parse_problem, write_problem};
use momsps::records::{from_tables, to_tables};
use momsps::report::{parse_report, write_report};
use momsps_core::bounds::{check_bound, BoundSpec};
use momsps_core::optimizers::{run, RunConfig, RunRecord};
use momsps_core::problems::{generate_least_squares, generate_logistic};
use momsps_core::stepsizes::{Bound, Rule, StepSizeState};
use proptest::prelude::*;

fn records(rule: Rule, beta: f64, iterations: u64, seed: u64, gamma_b: f64) -> Vec<RunRecord> {
    let p = generate_least_squares(30, 4, 20.0, false, seed).unwrap();
    let policy = StepSizeState::new(rule)
        .with_beta(beta)
        .with_gamma_b(Bound::Finite(gamma_b / p.l_max()))
        .with_constant(0.4 / p.l_max());
    let batch = if rule.is_deterministic() { 30 } else { 3 };
    (0..3)
        .map(|k| run(&p, &RunConfig::new(policy, beta, iterations, batch, seed + k).with_run_id(k)).unwrap())
        .collect()
}

fn sparse_data() -> impl Strategy<Value = LibsvmData> {
    let value = prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), (-100i32..100).prop_map(f64::from)];
    let row = prop::collection::btree_map(1usize..200, value, 0..12);
    let label = prop_oneof![Just(1.0), Just(-1.0), (-5i32..5).prop_map(f64::from), -1e3f64..1e3];
    prop::collection::vec((label, row), 0..40).prop_map(|rows| {
        let mut data = LibsvmData::default();
        for (label, entries) in rows {
            let entries: Vec<(usize, f64)> = entries.into_iter().collect();
            data.dim = data.dim.max(entries.last().map_or(0, |e| e.0));
            data.labels.push(label);
            data.rows.push(SparseRow { entries });
        }
        data
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn run_records_survive_csv(
        rule in prop::sample::select(Rule::ALL.to_vec()),
        beta in 0.0f64..0.95,
        iterations in 1u64..300,
        seed in 0u64..500,
        gamma_b in 0.1f64..50.0,
    ) {
        let recs = records(rule, beta, iterations, seed, gamma_b);
        let tables = to_tables(&recs);
        let back = from_tables(&tables).unwrap();
        prop_assert_eq!(format!("{recs:?}"), format!("{back:?}"));
        prop_assert_eq!(to_tables(&back), tables);
    }

    #[test]
    fn libsvm_text_round_trips(data in sparse_data()) {
        let text = to_libsvm_string(&data);
        let parsed = parse_libsvm_str(&text).unwrap();
        prop_assert_eq!(to_libsvm_string(&parsed), text);
        prop_assert_eq!(parsed.rows, data.rows);
        prop_assert_eq!(
            parsed.labels.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            data.labels.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn problem_files_round_trip(n in 2usize..30, d in 1usize..8, seed in 0u64..500, logistic in any::<bool>()) {
        let p = if logistic {
            generate_logistic(n, d, false, seed).unwrap()
        } else {
            generate_least_squares(n.max(d), d, 10.0, seed % 2 == 0, seed).unwrap()
        };
        let text = write_problem(&p);
        let back = parse_problem(&text).unwrap();
        prop_assert_eq!(write_problem(&back), text);
        prop_assert_eq!(format!("{:?}", back.metadata()), format!("{:?}", p.metadata()));
        if logistic {
            let data = from_problem(&p).unwrap();
            prop_assert_eq!(data.len(), p.n());
        }
    }

    #[test]
    fn reports_are_pure_functions_of_stored_records(beta in 0.0f64..0.3, seed in 0u64..500) {
        let recs = records(Rule::MomSpsMax, beta, 128, seed, 1.0);
        let l = generate_least_squares(30, 4, 20.0, false, seed).unwrap().l_max();
        let spec = BoundSpec::Thm31 { beta, gamma_b: 1.0 / l, l_max: l, sigma2: 0.25 };
        let direct = check_bound(&recs, &spec).unwrap();
        let stored = check_bound(&from_tables(&to_tables(&recs)).unwrap(), &spec).unwrap();
        prop_assert_eq!(write_report(&direct), write_report(&stored));
        let text = write_report(&direct);
        prop_assert_eq!(write_report(&parse_report(&text).unwrap()), text);
    }
}
