//! The three subcommands.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mdrobust::eval::{
    ablation_subsets, make_split, parse_feature_set, table::compute_table, table::write_rows_csv, ClassifierKind,
    EvalReport, Experiment, ExperimentConfig, FeatureCache,
};
use mdrobust::eval::report::ablation_csv;
use mdrobust::ingest::{load_dataset, synth_dataset, write_measurement, DatasetShape, MANIFEST_FILE};
use mdrobust::noise::noise_schedule;
use mdrobust::spectro::{build_spectrogram, write_spectrogram_dump, DEFAULT_WINDOW};
use mdrobust::{Feature, FeatureConfig, IQMeasurement, NoiseSpec, RadarParams};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{check, required, FileConfig, Shared};
use crate::error::{parse_noise, CliError, CliResult, NOISE_USAGE};
use crate::manifest::{dataset_hash, prepare_out, unix_now, OutputSet, RunManifest};
use crate::{EvaluateArgs, ExtractArgs, SynthArgs};

/// Directory holding the persistent feature cache, if set.
pub const CACHE_ENV: &str = "MDROBUST_CACHE_DIR";

const DEFAULT_TOTAL: usize = 119;

fn log(msg: impl AsRef<str>) {
    eprintln!("mdrobust: {}", msg.as_ref());
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

fn summary(shared: &Shared, v: Value) -> Option<Value> {
    shared.json.then_some(v)
}

/// `synth:paper-ratio:<total>[:<seed>]` or `synth:per-class:<n>[:<seed>]`.
fn parse_synth_ref(s: &str, default_seed: u64) -> CliResult<(DatasetShape, u64)> {
    let bad = || CliError::DatasetRef(s.to_string());
    let parts: Vec<&str> = s.split(':').collect();
    let (kind, n, seed) = match parts.as_slice() {
        ["synth", kind, n] => (*kind, *n, None),
        ["synth", kind, n, seed] => (*kind, *n, Some(*seed)),
        _ => return Err(bad()),
    };
    let n: usize = n.parse().map_err(|_| bad())?;
    let seed = match seed {
        Some(v) => v.parse().map_err(|_| bad())?,
        None => default_seed,
    };
    let shape = match kind {
        "paper-ratio" => DatasetShape::PaperRatio { total: n },
        "per-class" => DatasetShape::Balanced { per_class: n },
        _ => return Err(bad()),
    };
    Ok((shape, seed))
}

fn resolve_dataset(reference: &str, default_seed: u64) -> CliResult<Vec<IQMeasurement>> {
    if reference.starts_with("synth:") {
        let (shape, seed) = parse_synth_ref(reference, default_seed)?;
        log(format!("synthesizing {reference}"));
        return Ok(synth_dataset(shape, seed, &RadarParams::default())?);
    }
    let root = Path::new(reference);
    if !root.is_dir() {
        return Err(CliError::MissingDataset(root.to_path_buf()));
    }
    let ms = load_dataset(root)?;
    if ms.is_empty() {
        return Err(CliError::EmptyDataset(root.to_path_buf()));
    }
    log(format!("loaded {} measurements from {}", ms.len(), root.display()));
    Ok(ms)
}

fn feature_cache() -> CliResult<FeatureCache> {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => {
            log(format!("feature cache at {}", PathBuf::from(&dir).display()));
            Ok(FeatureCache::on_disk(PathBuf::from(dir))?)
        }
        _ => Ok(FeatureCache::in_memory()),
    }
}

fn class_counts(ms: &[IQMeasurement]) -> Value {
    let mut counts = serde_json::Map::new();
    for c in mdrobust::Class::ALL {
        counts.insert(c.to_string(), json!(ms.iter().filter(|m| m.label == c).count()));
    }
    Value::Object(counts)
}

pub fn synth(args: SynthArgs) -> CliResult<Option<Value>> {
    let started = unix_now();
    let file = FileConfig::for_args(&args.common)?;
    let mut problems = Vec::new();
    let shared = Shared::resolve(&args.common, &file, &mut problems);
    let out = required(args.out, file.out, "out", &mut problems);
    let per_class = args.per_class.or(file.per_class);
    let paper_ratio = args.paper_ratio || file.paper_ratio.unwrap_or(false);
    let total = args.total.or(file.total);
    let shape = match (per_class, paper_ratio || total.is_some()) {
        (Some(_), true) => {
            problems.push("per_class conflicts with paper_ratio/total".into());
            None
        }
        (Some(n), false) => Some(DatasetShape::Balanced { per_class: n }),
        (None, true) => Some(DatasetShape::PaperRatio {
            total: total.unwrap_or(DEFAULT_TOTAL),
        }),
        (None, false) => {
            problems.push("one of per_class or paper_ratio is required".into());
            None
        }
    };
    let defaults = RadarParams::default();
    let params = RadarParams {
        n_range_bins: args.range_bins.or(file.range_bins).unwrap_or(defaults.n_range_bins),
        segment_len: args.segment_len.or(file.segment_len).unwrap_or(defaults.segment_len),
        ..defaults
    };
    if let Err(e) = params.validate() {
        problems.push(e.to_string());
    }
    if let Some(s) = shape {
        if s.class_counts().contains(&0) {
            problems.push(format!("every class needs at least one measurement, got {:?}", s.class_counts()));
        }
    }
    check(problems)?;
    let (out, shape) = (out.unwrap(), shape.unwrap());

    prepare_out(&out, shared.force)?;
    let ms = pool(shared.jobs)?.install(|| -> CliResult<_> {
        log(format!("generating {:?} with seed {}", shape, shared.seed));
        let ms = synth_dataset(shape, shared.seed, &params)?;
        ms.par_iter().try_for_each(|m| write_measurement(m, &out.join(&m.id)))?;
        Ok(ms)
    })?;
    remove_stale_containers(&out, &ms)?;

    let mut outputs = OutputSet::new(&out);
    let mut csv = String::from("id,label,n_range_bins,n_slow_time,n_segments,sha256\n");
    for m in &ms {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            m.id,
            m.label,
            m.params.n_range_bins,
            m.n_slow_time(),
            m.n_segments(),
            hex::encode(m.content_hash())
        );
    }
    outputs.write("summary.csv", csv)?;

    let config = json!({ "shape": shape, "params": params });
    let mut manifest = RunManifest::new("synth", config, shared.seed, shared.jobs, started);
    manifest.dataset_hash = dataset_hash(&ms);
    manifest.n_measurements = ms.len();
    manifest.extra = json!({ "class_counts": class_counts(&ms) });
    let manifest = outputs.finish(manifest)?;
    log(format!("wrote {} containers to {}", ms.len(), out.display()));
    Ok(summary(
        &shared,
        json!({
            "command": "synth",
            "out": out,
            "n_measurements": ms.len(),
            "class_counts": class_counts(&ms),
            "dataset_hash": manifest.dataset_hash,
        }),
    ))
}

/// After `--force`, drops containers of an earlier, larger dataset.
fn remove_stale_containers(out: &Path, ms: &[IQMeasurement]) -> CliResult<()> {
    let keep: BTreeSet<&str> = ms.iter().map(|m| m.id.as_str()).collect();
    for entry in fs::read_dir(out).map_err(|e| CliError::io(out, e))? {
        let path = entry.map_err(|e| CliError::io(out, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if path.join(MANIFEST_FILE).is_file() && !keep.contains(name) {
            fs::remove_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

pub fn extract(args: ExtractArgs) -> CliResult<Option<Value>> {
    let started = unix_now();
    let file = FileConfig::for_args(&args.common)?;
    let mut problems = Vec::new();
    let shared = Shared::resolve(&args.common, &file, &mut problems);
    let dataset = required(args.dataset, file.dataset, "dataset", &mut problems);
    let out = required(args.out, file.out, "out", &mut problems);
    let window = args.window.or(file.window).unwrap_or(DEFAULT_WINDOW);
    if window == 0 {
        problems.push("window must be >= 1".into());
    }
    let spectrograms = args.spectrograms || file.spectrograms.unwrap_or(false);
    let noise_text = match (args.noise, file.noise.map(|n| n.into_vec())) {
        (Some(s), _) => s,
        (None, Some(v)) if v.len() == 1 => v[0].clone(),
        (None, Some(v)) => {
            problems.push(format!("extract takes one noise condition, got {}", v.len()));
            String::new()
        }
        (None, None) => "raw".into(),
    };
    check(problems)?;
    let spec = parse_noise(&noise_text)?.with_seed(shared.seed);
    let (dataset, out) = (dataset.unwrap(), out.unwrap());

    prepare_out(&out, shared.force)?;
    let features = FeatureConfig::default();
    let cache = feature_cache()?;
    let mut outputs = OutputSet::new(&out);
    let ms = pool(shared.jobs)?.install(|| -> CliResult<_> {
        let ms = resolve_dataset(&dataset, shared.seed)?;
        log(format!("extracting features under {spec}"));
        let hashes: Vec<[u8; 32]> = ms.par_iter().map(|m| m.content_hash()).collect();
        let table = compute_table(&ms, &hashes, &spec, window, &features, &cache)?;
        outputs.write("features.csv", write_rows_csv(&table.rows))?;
        if spectrograms {
            let dir = out.join("spectrograms");
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let written = ms
                .par_iter()
                .map(|m| {
                    let s = build_spectrogram(&spec.apply(m)?, window)?;
                    let name = format!("spectrograms/{}.spec", m.id);
                    let path = out.join(&name);
                    write_spectrogram_dump(&s, &path)?;
                    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
                    Ok((name, bytes))
                })
                .collect::<CliResult<Vec<_>>>()?;
            for (name, bytes) in written {
                outputs.record(&name, &bytes);
            }
        }
        Ok(ms)
    })?;

    let condition = json!({
        "noise": spec.to_string(),
        "mode": spec.mode,
        "snr_db": spec.snr_db,
        "phase_deg": spec.phase_deg,
        "severity": spec.severity,
        "seed": spec.seed,
    });
    let header = mdrobust::eval::table::csv_header();
    let columns: Vec<&str> = header.split(',').collect();
    let meta = json!({
        "condition": condition,
        "window": window,
        "n_rows": ms.len(),
        "columns": columns,
        "feature_names": Feature::ALL.iter().map(|f| f.name()).collect::<Vec<_>>(),
    });
    outputs.write("features.meta.json", serde_json::to_string_pretty(&meta).map_err(mdrobust::Error::from)? + "\n")?;
    if !spectrograms {
        let dir = out.join("spectrograms");
        if dir.is_dir() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
    }

    let config = json!({ "noise": spec.to_string(), "window": window, "features": features });
    let mut manifest = RunManifest::new("extract", config, shared.seed, shared.jobs, started);
    manifest.dataset_hash = dataset_hash(&ms);
    manifest.n_measurements = ms.len();
    manifest.extra = json!({ "dataset": dataset, "condition": condition });
    let manifest = outputs.finish(manifest)?;
    log(format!("wrote {} feature rows to {}", ms.len(), out.display()));
    Ok(summary(
        &shared,
        json!({
            "command": "extract",
            "out": out,
            "n_rows": ms.len(),
            "condition": condition,
            "results_hash": manifest.results_hash,
        }),
    ))
}

fn schedule_specs(name: &str) -> Option<Vec<NoiseSpec>> {
    match name {
        "table3" | "full" => Some(noise_schedule()),
        "awgn" => Some(noise_schedule().into_iter().filter(|s| s.mode.as_str() == "awgn").collect()),
        "phase" => Some(noise_schedule().into_iter().filter(|s| s.mode.as_str() == "phase").collect()),
        "combined" => Some(noise_schedule().into_iter().filter(|s| s.mode.as_str() == "combined").collect()),
        "raw" => Some(vec![NoiseSpec::raw()]),
        _ => None,
    }
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<Option<Value>> {
    let started = unix_now();
    let file = FileConfig::for_args(&args.common)?;
    let mut problems = Vec::new();
    let shared = Shared::resolve(&args.common, &file, &mut problems);
    let dataset = required(args.dataset, file.dataset, "dataset", &mut problems);
    let out = required(args.out, file.out, "out", &mut problems);

    let classifier = args.classifier.or(file.classifier).unwrap_or_else(|| "rf".into());
    let classifier = classifier.parse::<ClassifierKind>().unwrap_or_else(|e| {
        problems.push(e.to_string());
        ClassifierKind::RandomForest
    });
    let feature_set = parse_feature_set(&args.features.or(file.features).unwrap_or_else(|| "selected5".into()))
        .unwrap_or_else(|e| {
            problems.push(e.to_string());
            Feature::SELECTED.to_vec()
        });
    let noise = if args.noise.is_empty() {
        file.noise.map(|n| n.into_vec()).unwrap_or_default()
    } else {
        args.noise
    };
    let schedule = args.schedule.or(file.schedule);
    let mut specs = Vec::new();
    match (&schedule, noise.is_empty()) {
        (Some(_), false) => problems.push("schedule and noise are mutually exclusive".into()),
        (Some(name), true) => match schedule_specs(name) {
            Some(v) => specs = v,
            None => problems.push(format!(
                "unknown schedule {name:?}; expected table3 | awgn | phase | combined | raw"
            )),
        },
        (None, true) => specs.push(NoiseSpec::raw()),
        (None, false) => {
            for n in &noise {
                match n.parse::<NoiseSpec>() {
                    Ok(s) => specs.push(s),
                    Err(e) => problems.push(format!("{e}; usage: --noise {NOISE_USAGE}")),
                }
            }
        }
    }

    let mut config = ExperimentConfig::new(feature_set, classifier, specs).with_seed(shared.seed);
    config.window = args.window.or(file.window).unwrap_or(DEFAULT_WINDOW);
    if let Some(r) = args.importance_repeats.or(file.importance_repeats) {
        config.importance_repeats = r;
    }
    problems.extend(config.problems());
    let skip_ablation = args.skip_ablation || file.skip_ablation.unwrap_or(false);
    let single_feature = args.single_feature || file.single_feature.unwrap_or(false);
    check(problems)?;
    let (dataset, out) = (dataset.unwrap(), out.unwrap());

    prepare_out(&out, shared.force)?;
    let cache = feature_cache()?;
    let mut outputs = OutputSet::new(&out);
    let (ms, report) = pool(shared.jobs)?.install(|| -> CliResult<_> {
        let ms = resolve_dataset(&dataset, shared.seed)?;
        let exp = Experiment::with_cache(&ms, cache);
        let plan = make_split(&exp.labels(), config.seed)?;
        log(format!(
            "{} on {} conditions, {} folds, holdout {}",
            config.classifier,
            config.noise_specs.len(),
            plan.n_folds(),
            plan.holdout.len()
        ));
        let report = exp.run_noise_sweep(&config, &plan)?;
        outputs.write("split.json", serde_json::to_string_pretty(&plan).map_err(mdrobust::Error::from)? + "\n")?;
        write_report(&mut outputs, &report)?;

        if skip_ablation {
            outputs.remove_stale("ablation.csv")?;
        } else {
            log("ablation over feature subsets on raw data");
            let rows = exp.ablation(&config, &plan, &ablation_subsets(), &NoiseSpec::raw())?;
            outputs.write("ablation.csv", ablation_csv(&rows))?;
        }
        if single_feature {
            log(format!("single-feature sweep: {} features", Feature::ALL.len()));
            let mut csv = String::new();
            for f in Feature::ALL {
                let r = exp.single_feature_sweep(&config, f, &plan, &config.noise_specs)?;
                for (i, line) in r.aggregate_csv().lines().enumerate() {
                    match (i, csv.is_empty()) {
                        (0, true) => csv.push_str(&format!("feature,{line}\n")),
                        (0, false) => {}
                        _ => csv.push_str(&format!("{f},{line}\n")),
                    }
                }
            }
            outputs.write("single_feature.csv", csv)?;
        } else {
            outputs.remove_stale("single_feature.csv")?;
        }
        Ok((ms, report))
    })?;

    let config_json = serde_json::to_value(&config).map_err(mdrobust::Error::from)?;
    let mut manifest = RunManifest::new("evaluate", config_json, shared.seed, shared.jobs, started);
    manifest.dataset_hash = dataset_hash(&ms);
    manifest.n_measurements = ms.len();
    manifest.extra = json!({
        "dataset": dataset,
        "class_counts": class_counts(&ms),
        "n_conditions": report.conditions.len(),
        "ablation": !skip_ablation,
        "single_feature": single_feature,
    });
    let manifest = outputs.finish(manifest)?;
    log(format!("report written to {}", out.display()));

    let raw = report.condition("raw").map(|c| &c.aggregate);
    Ok(summary(
        &shared,
        json!({
            "command": "evaluate",
            "out": out,
            "classifier": config.classifier,
            "n_conditions": report.conditions.len(),
            "raw_mean_accuracy": raw.map(|a| a.mean_accuracy),
            "raw_mean_f1": raw.map(|a| a.mean_f1),
            "results_hash": manifest.results_hash,
        }),
    ))
}

fn write_report(outputs: &mut OutputSet, report: &EvalReport) -> CliResult<()> {
    outputs.write("report.json", report.to_json()? + "\n")?;
    outputs.write("folds.csv", report.folds_csv())?;
    outputs.write("aggregate.csv", report.aggregate_csv())?;
    outputs.write("importance.csv", report.importance_csv())?;
    match report.confusion_csv() {
        Some(c) => outputs.write("confusion.csv", c),
        None => outputs.remove_stale("confusion.csv"),
    }
}
