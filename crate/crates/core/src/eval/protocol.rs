//! Cross-validated runs over noise conditions.

use std::collections::HashSet;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::config::{validate_feature_set, ClassifierKind, ExperimentConfig};
use crate::eval::report::{
    AblationRow, Aggregate, ConditionReport, EvalReport, FoldRecord, ImportanceEntry, ImportanceMap, SCHEMA_VERSION,
};
use crate::eval::split::SplitPlan;
use crate::eval::table::{compute_table, FeatureCache, FeatureTable};
use crate::features::Feature;
use crate::ingest::{Class, IQMeasurement};
use crate::ml::importance::{permutation_importance_with, seeded_permutation};
use crate::ml::metrics::compute_metrics;
use crate::ml::scaler::{apply_scaler, fit_scaler, ScalerParams};
use crate::ml::{rf_predict, rf_train, svm_predict, svm_train, FeatureImportance, ForestModel, SvmModel};
use crate::noise::NoiseSpec;
use crate::seed;

/// A fitted classifier, including the scaler for SVM paths.
#[derive(Debug, Clone)]
pub enum Trained {
    Svm { scaler: ScalerParams, model: SvmModel },
    Forest(ForestModel),
}

impl Trained {
    pub fn fit(config: &ExperimentConfig, x: ArrayView2<f64>, y: &[usize]) -> Result<Trained> {
        match config.classifier {
            ClassifierKind::RandomForest => Ok(Trained::Forest(rf_train(x, y, &config.forest_params())?)),
            kind => {
                let params = if kind == ClassifierKind::SvmLinearSingle {
                    config.svm_linear
                } else {
                    config.svm_rbf
                };
                let scaler = fit_scaler(x)?;
                let xs = apply_scaler(&scaler, x)?;
                let model = svm_train(xs.view(), y, &params)?;
                Ok(Trained::Svm { scaler, model })
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        match self {
            Trained::Forest(m) => rf_predict(m, x),
            Trained::Svm { scaler, model } => svm_predict(model, apply_scaler(scaler, x)?.view()),
        }
    }
}

/// Fails if any evaluation id was seen in training or any holdout id was
/// used at all.
pub fn assert_disjoint(train: &[String], eval: &[String], holdout: &[String]) -> Result<()> {
    let train_set: HashSet<&str> = train.iter().map(String::as_str).collect();
    if let Some(id) = eval.iter().find(|id| train_set.contains(id.as_str())) {
        return Err(Error::Leakage(format!("{id} is in both training and evaluation rows")));
    }
    if let Some(id) = holdout.iter().find(|id| train_set.contains(id.as_str())) {
        return Err(Error::Leakage(format!("holdout id {id} reached training rows")));
    }
    let holdout_set: HashSet<&str> = holdout.iter().map(String::as_str).collect();
    if let Some(id) = eval.iter().find(|id| holdout_set.contains(id.as_str())) {
        return Err(Error::Leakage(format!("holdout id {id} reached evaluation rows")));
    }
    Ok(())
}

/// One trained fold, kept for importance computations.
pub struct FoldOutcome {
    pub record: FoldRecord,
    pub model: Trained,
    pub x_test: Array2<f64>,
    pub y_test: Vec<usize>,
}

fn distinct(y: &[usize]) -> usize {
    y.iter().collect::<HashSet<_>>().len()
}

/// Trains on four folds and scores the fifth, for every fold.
pub fn cross_validate(
    config: &ExperimentConfig,
    table: &FeatureTable,
    features: &[Feature],
    plan: &SplitPlan,
) -> Result<Vec<FoldOutcome>> {
    validate_feature_set(features)?;
    (0..plan.n_folds())
        .into_par_iter()
        .map(|fold| {
            let train_ids = plan.train_ids(fold);
            let test_ids = &plan.folds[fold];
            assert_disjoint(&train_ids, test_ids, &plan.holdout)?;
            if let Some(id) = plan.holdout.iter().find(|id| test_ids.contains(id)) {
                return Err(Error::Leakage(format!("holdout id {id} in validation fold {fold}")));
            }
            let (x_train, y_train) = table.matrix(features, &train_ids)?;
            let (x_test, y_test) = table.matrix(features, test_ids)?;
            if distinct(&y_train) < 2 {
                return Err(Error::DegenerateFold {
                    fold,
                    reason: "training rows hold a single class".into(),
                });
            }
            if y_test.is_empty() {
                return Err(Error::DegenerateFold {
                    fold,
                    reason: "no validation rows".into(),
                });
            }
            let model = Trained::fit(config, x_train.view(), &y_train)?;
            let pred = model.predict(x_test.view())?;
            let metrics = compute_metrics(&y_test, &pred, Class::COUNT)?;
            Ok(FoldOutcome {
                record: FoldRecord {
                    fold,
                    n_train: train_ids.len(),
                    n_test: test_ids.len(),
                    metrics,
                },
                model,
                x_test,
                y_test,
            })
        })
        .collect()
}

/// Importance over the pooled validation folds: each fold's rows are scored
/// by that fold's model and shuffled only among themselves.
pub fn pooled_importance(outcomes: &[FoldOutcome], n_repeats: usize, seed_v: u64) -> Result<Vec<FeatureImportance>> {
    let views: Vec<ArrayView2<f64>> = outcomes.iter().map(|o| o.x_test.view()).collect();
    let x = concatenate(Axis(0), &views).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let y: Vec<usize> = outcomes.iter().flat_map(|o| o.y_test.iter().copied()).collect();
    let mut offsets = vec![0];
    for o in outcomes {
        offsets.push(offsets.last().unwrap() + o.y_test.len());
    }
    let predict = |x: ArrayView2<f64>| -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(x.nrows());
        for (f, o) in outcomes.iter().enumerate() {
            out.extend(o.model.predict(x.slice(s![offsets[f]..offsets[f + 1], ..]))?);
        }
        Ok(out)
    };
    let permutation = |j: usize, r: usize| {
        let mut perm = Vec::with_capacity(y.len());
        for f in 0..outcomes.len() {
            let lo = offsets[f];
            let n = offsets[f + 1] - lo;
            perm.extend(seeded_permutation(n, seed::derive(seed_v, f as u64), j, r).into_iter().map(|i| i + lo));
        }
        perm
    };
    permutation_importance_with(predict, x.view(), &y, Class::COUNT, n_repeats, permutation)
}

fn importance_seed(config: &ExperimentConfig) -> u64 {
    seed::derive_tag(config.seed, "importance")
}

/// Runs the protocol over a loaded dataset. Features are computed lazily
/// per noise condition and cached by measurement content hash.
pub struct Experiment<'a> {
    measurements: &'a [IQMeasurement],
    hashes: Vec<[u8; 32]>,
    cache: FeatureCache,
}

impl<'a> Experiment<'a> {
    pub fn new(measurements: &'a [IQMeasurement]) -> Self {
        Self::with_cache(measurements, FeatureCache::in_memory())
    }

    pub fn with_cache(measurements: &'a [IQMeasurement], cache: FeatureCache) -> Self {
        let hashes = measurements.par_iter().map(|m| m.content_hash()).collect();
        Experiment {
            measurements,
            hashes,
            cache,
        }
    }

    pub fn measurements(&self) -> &[IQMeasurement] {
        self.measurements
    }

    pub fn cache(&self) -> &FeatureCache {
        &self.cache
    }

    pub fn labels(&self) -> Vec<(String, Class)> {
        self.measurements.iter().map(|m| (m.id.clone(), m.label)).collect()
    }

    /// Features of every measurement under `spec` (noise seed taken from
    /// the config).
    pub fn table(&self, config: &ExperimentConfig, spec: &NoiseSpec) -> Result<FeatureTable> {
        let spec = spec.with_seed(config.seed);
        compute_table(self.measurements, &self.hashes, &spec, config.window, &config.features, &self.cache)
    }

    pub fn run_condition(&self, config: &ExperimentConfig, spec: &NoiseSpec, plan: &SplitPlan) -> Result<Vec<FoldRecord>> {
        config.validate()?;
        let table = self.table(config, spec)?;
        Ok(cross_validate(config, &table, &config.feature_set, plan)?
            .into_iter()
            .map(|o| o.record)
            .collect())
    }

    fn condition_report(&self, config: &ExperimentConfig, spec: &NoiseSpec, plan: &SplitPlan) -> Result<ConditionReport> {
        let table = self.table(config, spec)?;
        let outcomes = cross_validate(config, &table, &config.feature_set, plan)?;
        let importance = if config.classifier == ClassifierKind::RandomForest {
            let imp = pooled_importance(&outcomes, config.importance_repeats, importance_seed(config))?;
            Some(
                config
                    .feature_set
                    .iter()
                    .zip(imp)
                    .map(|(&feature, v)| ImportanceEntry {
                        feature,
                        mean_drop: v.mean_drop,
                        std_drop: v.std_drop,
                    })
                    .collect(),
            )
        } else {
            None
        };
        let folds: Vec<FoldRecord> = outcomes.into_iter().map(|o| o.record).collect();
        Ok(ConditionReport {
            noise: spec.with_seed(config.seed),
            aggregate: Aggregate::from_folds(&folds),
            folds,
            importance,
        })
    }

    /// Every condition of `config.noise_specs`, in the given order, plus the
    /// raw-data holdout confusion matrix.
    pub fn run_noise_sweep(&self, config: &ExperimentConfig, plan: &SplitPlan) -> Result<EvalReport> {
        config.validate()?;
        plan.check(&self.labels())?;
        let conditions = config
            .noise_specs
            .par_iter()
            .map(|spec| self.condition_report(config, spec, plan))
            .collect::<Result<Vec<_>>>()?;
        let confusion = self.holdout_confusion(config, plan)?;
        Ok(EvalReport {
            schema_version: SCHEMA_VERSION,
            classifier: config.classifier,
            feature_set: config.feature_set.clone(),
            seed: config.seed,
            conditions,
            holdout_confusion: Some(confusion),
        })
    }

    /// Linear SVM on one feature for each condition.
    pub fn single_feature_sweep(
        &self,
        base: &ExperimentConfig,
        feature: Feature,
        plan: &SplitPlan,
        specs: &[NoiseSpec],
    ) -> Result<EvalReport> {
        let mut config = base.clone();
        config.classifier = ClassifierKind::SvmLinearSingle;
        config.feature_set = vec![feature];
        config.noise_specs = specs.to_vec();
        self.run_noise_sweep(&config, plan)
    }

    /// Random-forest permutation importance for every feature of
    /// `base.feature_set` under each condition.
    pub fn importance_map(&self, base: &ExperimentConfig, plan: &SplitPlan, specs: &[NoiseSpec]) -> Result<ImportanceMap> {
        let mut config = base.clone();
        config.classifier = ClassifierKind::RandomForest;
        config.noise_specs = specs.to_vec();
        config.validate()?;
        let per_spec = specs
            .par_iter()
            .map(|spec| {
                let table = self.table(&config, spec)?;
                let outcomes = cross_validate(&config, &table, &config.feature_set, plan)?;
                pooled_importance(&outcomes, config.importance_repeats, importance_seed(&config))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = (0..config.feature_set.len())
            .map(|j| per_spec.iter().map(|v| v[j]).collect())
            .collect();
        Ok(ImportanceMap {
            features: config.feature_set.clone(),
            specs: specs.iter().map(|s| s.with_seed(config.seed)).collect(),
            values,
        })
    }

    /// Random-forest cross-validation of each named subset under `spec`.
    pub fn ablation(
        &self,
        base: &ExperimentConfig,
        plan: &SplitPlan,
        subsets: &[(String, Vec<Feature>)],
        spec: &NoiseSpec,
    ) -> Result<Vec<AblationRow>> {
        for (name, features) in subsets {
            validate_feature_set(features).map_err(|e| Error::InvalidParam(format!("subset {name}: {e}")))?;
        }
        let mut config = base.clone();
        config.classifier = ClassifierKind::RandomForest;
        let table = self.table(&config, spec)?;
        subsets
            .par_iter()
            .map(|(name, features)| {
                let folds: Vec<FoldRecord> = cross_validate(&config, &table, features, plan)?
                    .into_iter()
                    .map(|o| o.record)
                    .collect();
                Ok(AblationRow {
                    name: name.clone(),
                    features: features.clone(),
                    noise: spec.with_seed(config.seed),
                    aggregate: Aggregate::from_folds(&folds),
                    folds,
                })
            })
            .collect()
    }

    /// Trains on every fold of raw data and scores the untouched holdout.
    pub fn holdout_confusion(&self, config: &ExperimentConfig, plan: &SplitPlan) -> Result<Array2<u64>> {
        let table = self.table(config, &NoiseSpec::raw())?;
        holdout_confusion(config, &table, plan)
    }
}

/// Trains on all fold rows of `table` and scores the holdout rows.
pub fn holdout_confusion(config: &ExperimentConfig, table: &FeatureTable, plan: &SplitPlan) -> Result<Array2<u64>> {
    let train_ids = plan.pool_ids();
    assert_disjoint(&train_ids, &plan.holdout, &[])?;
    if plan.holdout.is_empty() {
        return Ok(Array2::zeros((Class::COUNT, Class::COUNT)));
    }
    let (x_train, y_train) = table.matrix(&config.feature_set, &train_ids)?;
    let (x_test, y_test) = table.matrix(&config.feature_set, &plan.holdout)?;
    let model = Trained::fit(config, x_train.view(), &y_train)?;
    let pred = model.predict(x_test.view())?;
    Ok(compute_metrics(&y_test, &pred, Class::COUNT)?.confusion)
}
