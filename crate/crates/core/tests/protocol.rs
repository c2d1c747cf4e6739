use mdrobust::eval::protocol::assert_disjoint;
use mdrobust::eval::table::{read_rows_csv, write_rows_csv};
use mdrobust::eval::{
    ablation_subsets, cross_validate, holdout_confusion, make_split, pooled_importance, ClassifierKind, Experiment,
    EvalReport, ExperimentConfig, FeatureRow, FeatureTable, SplitPlan, Trained,
};
use mdrobust::features::FeatureFlags;
use mdrobust::ingest::{synth_dataset, DatasetShape};
use mdrobust::ml::scaler::fit_scaler;
use mdrobust::noise::{noise_schedule, NoiseSpec, Severity};
use mdrobust::{seed, Class, Error, Feature, FeatureVector, IQMeasurement, RadarParams};
use ndarray::Axis;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn labels(counts: [usize; 3]) -> Vec<(String, Class)> {
    let mut v = Vec::new();
    for (class, n) in Class::ALL.iter().zip(counts) {
        v.extend((0..n).map(|i| (format!("{class}-{i:04}"), *class)));
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn split_invariants_hold(d in 7usize..80, b in 7usize..80, r in 7usize..40, s in any::<u64>()) {
        let l = labels([b, d, r]);
        let plan = make_split(&l, s).unwrap();
        prop_assert!(plan.check(&l).is_ok());
        prop_assert_eq!(plan.holdout.len() + plan.folds.iter().map(Vec::len).sum::<usize>(), l.len());
        for f in 0..plan.n_folds() {
            prop_assert!(assert_disjoint(&plan.train_ids(f), &plan.folds[f], &plan.holdout).is_ok());
        }
    }
}

/// Rows whose `informative` feature carries the class and whose other
/// features are noise.
fn constructed_table(per_class: usize, informative: Feature, s: u64) -> FeatureTable {
    let mut rng = seed::rng(s);
    let mut rows = Vec::new();
    for class in Class::ALL {
        for i in 0..per_class {
            let mut values = [0.0; 10];
            for v in values.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            values[informative.index()] = 3.0 * class.id() as f64 + 0.2 * z;
            rows.push(FeatureRow {
                measurement_id: format!("{class}-{i:04}"),
                label: class,
                noise: NoiseSpec::raw(),
                features: FeatureVector::from_array(values, FeatureFlags::default()),
            });
        }
    }
    FeatureTable::new(rows).unwrap()
}

fn rf_config(features: Vec<Feature>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(features, ClassifierKind::RandomForest, vec![NoiseSpec::raw()]);
    c.n_estimators = 60;
    c
}

#[test]
fn single_separating_feature_has_max_importance() {
    let table = constructed_table(20, Feature::SpectralEntropy, 1);
    let config = rf_config(Feature::ALL.to_vec());
    let plan = make_split(&table.labels(), 42).unwrap();
    let outcomes = cross_validate(&config, &table, &Feature::ALL, &plan).unwrap();
    let imp = pooled_importance(&outcomes, 10, 7).unwrap();
    let best = (0..10).max_by(|&a, &b| imp[a].mean_drop.total_cmp(&imp[b].mean_drop)).unwrap();
    assert_eq!(Feature::ALL[best], Feature::SpectralEntropy);
}

#[test]
fn null_feature_importance_is_within_two_sigma() {
    // kurtosis column is pure noise in every table
    for s in 0..4 {
        let table = constructed_table(20, Feature::Sler, 100 + s);
        let features = vec![Feature::Sler, Feature::Kurtosis];
        let config = rf_config(features.clone());
        let plan = make_split(&table.labels(), 42).unwrap();
        let outcomes = cross_validate(&config, &table, &features, &plan).unwrap();
        let imp = pooled_importance(&outcomes, 10, s).unwrap();
        assert!(imp[1].mean_drop.abs() <= 2.0 * imp[1].std_drop + 1e-12, "table {s}: {:?}", imp[1]);
    }
}

#[test]
fn separated_toy_feature_is_perfect_with_linear_svm() {
    let table = constructed_table(15, Feature::DopplerSpread, 2);
    let config = ExperimentConfig::new(
        vec![Feature::DopplerSpread],
        ClassifierKind::SvmLinearSingle,
        vec![NoiseSpec::raw()],
    );
    let plan = make_split(&table.labels(), 42).unwrap();
    for o in cross_validate(&config, &table, &config.feature_set, &plan).unwrap() {
        assert_eq!(o.record.metrics.accuracy, 1.0);
    }
}

#[test]
fn constant_feature_falls_back_to_one_class() {
    let mut rows = constructed_table(10, Feature::Sler, 3).rows;
    let extra: Vec<FeatureRow> = rows
        .iter()
        .filter(|r| r.label == Class::Bird)
        .map(|r| FeatureRow {
            measurement_id: format!("{}-b", r.measurement_id),
            ..r.clone()
        })
        .collect();
    rows.extend(extra);
    for r in rows.iter_mut() {
        r.features.kurtosis = 1.5;
    }
    let table = FeatureTable::new(rows).unwrap();
    let config = ExperimentConfig::new(vec![Feature::Kurtosis], ClassifierKind::SvmLinearSingle, vec![NoiseSpec::raw()]);
    let plan = make_split(&table.labels(), 42).unwrap();
    for o in cross_validate(&config, &table, &config.feature_set, &plan).unwrap() {
        let m = &o.record.metrics;
        let per_class = m.confusion.sum_axis(Axis(0));
        // every validation row receives the same prediction
        assert_eq!(per_class.iter().filter(|&&c| c > 0).count(), 1);
        let majority = m.confusion.sum_axis(Axis(1)).iter().copied().max().unwrap() as f64 / o.record.n_test as f64;
        assert!(m.accuracy <= majority + 1e-12);
    }
}

#[test]
fn perfect_separation_gives_diagonal_holdout_confusion() {
    let mut rows = constructed_table(20, Feature::Sler, 4).rows;
    for r in rows.iter_mut() {
        r.features.sler = r.label.id() as f64;
    }
    let table = FeatureTable::new(rows).unwrap();
    let config = rf_config(vec![Feature::Sler]);
    let plan = make_split(&table.labels(), 42).unwrap();
    let cm = holdout_confusion(&config, &table, &plan).unwrap();
    for class in Class::ALL {
        let n = plan.holdout.iter().filter(|id| id.starts_with(class.as_str())).count() as u64;
        assert_eq!(cm.row(class.id()).sum(), n);
        assert_eq!(cm[[class.id(), class.id()]], n);
    }
}

#[test]
fn single_class_training_is_a_degenerate_fold() {
    let table = constructed_table(6, Feature::Sler, 5);
    let ids = |c: Class| {
        table
            .rows
            .iter()
            .filter(|r| r.label == c)
            .map(|r| r.measurement_id.clone())
            .collect::<Vec<_>>()
    };
    let plan = SplitPlan {
        holdout: ids(Class::Reflector),
        folds: vec![ids(Class::Bird), ids(Class::Drone)],
        seed: 0,
    };
    let config = rf_config(vec![Feature::Sler]);
    let err = cross_validate(&config, &table, &config.feature_set, &plan).err().unwrap();
    assert!(matches!(err, Error::DegenerateFold { .. }), "{err}");
}

#[test]
fn leaked_holdout_id_is_fatal() {
    let table = constructed_table(10, Feature::Sler, 6);
    let mut plan = make_split(&table.labels(), 42).unwrap();
    let leaked = plan.holdout[0].clone();
    plan.folds[0].push(leaked);
    let config = rf_config(vec![Feature::Sler]);
    let err = cross_validate(&config, &table, &config.feature_set, &plan).err().unwrap();
    assert!(matches!(err, Error::Leakage(_)), "{err}");
    let clean = make_split(&table.labels(), 42).unwrap();
    let eval = vec![clean.holdout[0].clone()];
    assert!(matches!(
        assert_disjoint(&clean.train_ids(0), &eval, &clean.holdout),
        Err(Error::Leakage(_))
    ));
}

#[test]
fn scaler_sees_training_rows_only() {
    let table = constructed_table(10, Feature::Sler, 7);
    let plan = make_split(&table.labels(), 42).unwrap();
    let config = ExperimentConfig::new(Feature::SELECTED.to_vec(), ClassifierKind::SvmRbfMulti, vec![NoiseSpec::raw()]);
    let train_ids = plan.train_ids(0);
    let (x, y) = table.matrix(&config.feature_set, &train_ids).unwrap();
    match Trained::fit(&config, x.view(), &y).unwrap() {
        Trained::Svm { scaler, .. } => assert_eq!(scaler, fit_scaler(x.view()).unwrap()),
        Trained::Forest(_) => unreachable!(),
    }
    let test: Vec<&String> = plan.folds[0].iter().chain(&plan.holdout).collect();
    assert!(test.iter().all(|id| !train_ids.contains(id)));
}

#[test]
fn feature_table_csv_round_trip() {
    let table = constructed_table(3, Feature::Sler, 8);
    let text = write_rows_csv(&table.rows);
    assert!(text.starts_with("measurement_id,label,noise_mode,noise_param,sler,"));
    assert_eq!(read_rows_csv(&text, 42).unwrap(), table.rows);
}

fn balanced(per_class: usize, s: u64) -> Vec<IQMeasurement> {
    synth_dataset(DatasetShape::Balanced { per_class }, s, &RadarParams::default()).unwrap()
}

#[test]
fn raw_rbf_folds_are_accurate() {
    let ds = balanced(15, 42);
    let exp = Experiment::new(&ds);
    let plan = make_split(&exp.labels(), 42).unwrap();
    let config = ExperimentConfig::new(Feature::SELECTED.to_vec(), ClassifierKind::SvmRbfMulti, vec![NoiseSpec::raw()]);
    for f in exp.run_condition(&config, &NoiseSpec::raw(), &plan).unwrap() {
        assert!(f.metrics.accuracy >= 0.8, "fold {}: {}", f.fold, f.metrics.accuracy);
    }
}

#[test]
fn sweep_composes_conditions_and_is_thread_count_independent() {
    let ds = balanced(10, 5);
    let specs: Vec<NoiseSpec> = ["raw", "awgn:-5", "phase:7", "combined:-1:3"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let mut config = rf_config(Feature::SELECTED.to_vec());
    config.noise_specs = specs;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let exp = Experiment::new(&ds);
            let plan = make_split(&exp.labels(), config.seed).unwrap();
            let report = exp.run_noise_sweep(&config, &plan).unwrap();
            let raw = exp.run_condition(&config, &NoiseSpec::raw(), &plan).unwrap();
            (report, raw)
        })
    };
    let (a, raw) = run(1);
    let (b, _) = run(4);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.folds_csv(), b.folds_csv());
    assert_eq!(a.conditions.len(), 4);
    assert_eq!(a.conditions[0].folds, raw);
    assert!(a.aggregate_discrepancy() <= 1e-12);
    assert!(a.conditions.iter().all(|c| c.importance.as_ref().is_some_and(|v| v.len() == 5)));
    let cm = a.holdout_confusion.as_ref().unwrap();
    assert_eq!(cm.sum() as usize, make_split(&Experiment::new(&ds).labels(), 42).unwrap().holdout.len());
    assert_eq!(a.condition("combined:-1:3").unwrap().noise.severity, Severity::Moderate);
    assert_eq!(EvalReport::from_json(&a.to_json().unwrap()).unwrap(), a);
}

#[test]
fn single_feature_census_and_importance_map_shape() {
    let ds = balanced(8, 9);
    let exp = Experiment::new(&ds);
    let plan = make_split(&exp.labels(), 42).unwrap();
    let schedule = noise_schedule();
    let base = rf_config(Feature::ALL.to_vec());
    let mut results = 0;
    for f in Feature::ALL {
        results += exp.single_feature_sweep(&base, f, &plan, &schedule).unwrap().conditions.len();
    }
    assert_eq!(results, 330);
    let specs = &schedule[..3];
    let mut small = base.clone();
    small.n_estimators = 20;
    small.importance_repeats = 3;
    let map = exp.importance_map(&small, &plan, specs).unwrap();
    assert_eq!(map.values.len(), 10);
    assert!(map.values.iter().all(|row| row.len() == 3));
    assert_eq!(map.to_csv().lines().count(), 1 + 30);
}

#[test]
fn ablation_rows_and_duplicate_rejection() {
    let ds = balanced(8, 10);
    let exp = Experiment::new(&ds);
    let plan = make_split(&exp.labels(), 42).unwrap();
    let mut config = rf_config(Feature::SELECTED.to_vec());
    config.n_estimators = 30;
    let rows = exp.ablation(&config, &plan, &ablation_subsets(), &NoiseSpec::raw()).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[1].features.len(), 10);
    assert!(rows.iter().all(|r| r.folds.len() == 5));
    let dup = vec![("dup".to_string(), vec![Feature::Sler, Feature::Sler])];
    assert!(exp.ablation(&config, &plan, &dup, &NoiseSpec::raw()).is_err());
}

#[test]
fn mild_noise_is_no_worse_than_severe_over_seeds() {
    let mild: Vec<NoiseSpec> = ["awgn:5", "awgn:7", "awgn:10"].iter().map(|s| s.parse().unwrap()).collect();
    let severe: Vec<NoiseSpec> = ["awgn:-10", "awgn:-7"].iter().map(|s| s.parse().unwrap()).collect();
    let mut gaps = Vec::new();
    for s in [1u64, 2, 3, 4, 5] {
        let ds = balanced(10, s);
        let exp = Experiment::new(&ds);
        let plan = make_split(&exp.labels(), s).unwrap();
        let mut config = ExperimentConfig::new(Feature::SELECTED.to_vec(), ClassifierKind::SvmRbfMulti, mild.clone());
        config.noise_specs.extend(severe.iter().copied());
        config.seed = s;
        let report = exp.run_noise_sweep(&config, &plan).unwrap();
        let mean_f1 = |tier: Severity| {
            let v: Vec<f64> = report
                .conditions
                .iter()
                .filter(|c| c.noise.severity == tier)
                .map(|c| c.aggregate.mean_f1)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let gap = mean_f1(Severity::Mild) - mean_f1(Severity::Severe);
        if gap < 0.0 {
            eprintln!("seed {s}: severe beat mild by {:.3}", -gap);
        }
        gaps.push(gap);
    }
    gaps.sort_by(f64::total_cmp);
    assert!(gaps[gaps.len() / 2] >= 0.0, "{gaps:?}");
}
