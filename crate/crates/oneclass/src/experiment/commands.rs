//! The experiment commands behind the command-line verbs. Each command
//! takes a resolved [`Experiment`] plus an output directory, writes its
//! artifacts there, and returns a summary for the caller to print.
//!
//! Determinism contract: given the same config (seed included) and a
//! fixed thread count, every command reproduces its output files
//! byte-identically. Runs execute sequentially for that reason.

use crate::classifier::{load_model, save_model, train, ClassifierConfig, TrainedModel};
use crate::dataio::{
    decode_image_file, load_dataset, load_manifest, make_splits, preprocess, sample_texture,
    synthesize_and_load, write_png, LoadedDataset, SampleBatch, LABEL_MAJORITY,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_runs, pr_curve, roc_curve, run_metrics, EvalReport, LabeledScores, PositiveClass,
    RunMetrics,
};
use crate::experiment::config::{DatasetSection, Experiment, TrainSize, TransformSection};
use crate::experiment::outputs::{
    create_dir, curve_csv, loss_csv, scores_csv, summary_csv, write_atomic, write_provenance,
};
use crate::image::Dims;
use crate::scoring::score_batch;
use crate::transforms::{expand, load_transform_set, preset, TransformSet};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// A dataset pinned to the manifest file that describes it.
pub struct ResolvedDataset {
    pub dataset: LoadedDataset,
    pub manifest_path: PathBuf,
    pub warnings: Vec<String>,
}

/// Materializes (for synthetic recipes) and loads the config's dataset.
pub fn resolve_dataset(exp: &Experiment, out_dir: &Path) -> Result<ResolvedDataset> {
    let section = &exp.config.dataset;
    if let Some(path) = &section.manifest {
        let manifest_path = exp.resolve_path(path);
        let manifest = load_manifest(&manifest_path)?;
        return Ok(ResolvedDataset {
            dataset: load_dataset(&manifest)?,
            manifest_path,
            warnings: Vec::new(),
        });
    }
    let recipe = section.synthetic.as_ref().expect("validated section");
    let dir = match &section.dir {
        Some(d) => exp.resolve_path(d),
        None => out_dir.join("dataset"),
    };
    let (report, manifest) = synthesize_and_load(recipe, &dir)?;
    Ok(ResolvedDataset {
        dataset: load_dataset(&manifest)?,
        manifest_path: report.manifest_path,
        warnings: report.warnings,
    })
}

/// Builds the config's transform set. Presets that need a geometry scale
/// (shift offsets) take it from the shorter image side.
pub fn resolve_transforms(exp: &Experiment, dims: Dims) -> Result<TransformSet> {
    match (&exp.config.transforms.preset, &exp.config.transforms.file) {
        (Some(name), None) => preset(name, dims.height.min(dims.width)),
        (None, Some(path)) => load_transform_set(&exp.resolve_path(path)),
        _ => unreachable!("validated section"),
    }
}

/// The test split, with ground-truth majority flags as labels.
fn test_split(exp: &Experiment, dataset: &LoadedDataset) -> Result<SampleBatch> {
    let pool = dataset.train_pool_size();
    let (_, test_batch) = make_splits(dataset, pool, exp.config.seed)?;
    Ok(test_batch)
}

fn majority_flags(test_batch: &SampleBatch, sample_ids: &[&str]) -> Vec<bool> {
    let truth: HashMap<&str, bool> = test_batch
        .ids()
        .iter()
        .zip(test_batch.labels())
        .map(|(id, label)| (id.as_str(), *label == LABEL_MAJORITY))
        .collect();
    sample_ids.iter().map(|id| truth[id]).collect()
}

pub struct SynthOutcome {
    pub manifest_path: PathBuf,
    pub images_written: usize,
    pub dataset_hash: String,
    pub warnings: Vec<String>,
}

/// Materializes the synthetic dataset and records its identity.
pub fn cmd_synth(exp: &Experiment, out_dir: &Path) -> Result<SynthOutcome> {
    if exp.config.dataset.synthetic.is_none() {
        return Err(Error::InvalidConfig(
            "synth needs a [dataset.synthetic] recipe; this config reads a manifest".into(),
        ));
    }
    create_dir(out_dir)?;
    let resolved = resolve_dataset(exp, out_dir)?;
    let hash = resolved.dataset.manifest_hash().to_string();
    write_provenance(out_dir, &exp.config, &hash, &[])?;
    Ok(SynthOutcome {
        manifest_path: resolved.manifest_path,
        images_written: resolved.dataset.samples().len(),
        dataset_hash: hash,
        warnings: resolved.warnings,
    })
}

pub struct PreviewOutcome {
    /// label,family,description rows for the terminal.
    pub table: String,
    pub files: Vec<PathBuf>,
}

/// Writes every transform of a probe image as an image file so the set
/// can be inspected by eye.
pub fn cmd_preview_transforms(
    exp: &Experiment,
    image: Option<&Path>,
    out_dir: &Path,
) -> Result<PreviewOutcome> {
    let dims = match (&exp.config.dataset.manifest, &exp.config.dataset.synthetic) {
        (Some(path), _) => load_manifest(&exp.resolve_path(path))?.dims(),
        (None, Some(recipe)) => recipe.dims,
        _ => unreachable!("validated section"),
    };
    let base = match image {
        Some(path) => preprocess(decode_image_file(path)?, dims)?,
        None => sample_texture(exp.config.seed, dims),
    };
    let set = resolve_transforms(exp, dims)?;
    let preview_dir = out_dir.join("preview");
    create_dir(&preview_dir)?;

    let mut table = String::from("label,family,description\n");
    let mut files = Vec::new();
    for (spec, (variant, label)) in set.specs().iter().zip(expand(&base, &set)?) {
        table.push_str(&format!("{label},{},{spec}\n", spec.family()));
        let slug: String = spec
            .to_string()
            .chars()
            .map(|c| {
                if c.is_alphanumeric() || c == '.' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let path = preview_dir.join(format!("{label:02}_{slug}.png"));
        write_png(&path, &variant)?;
        files.push(path);
    }
    Ok(PreviewOutcome { table, files })
}

pub struct TrainRunArtifact {
    pub run_index: usize,
    pub seed: u64,
    pub model_path: PathBuf,
    pub final_loss: f64,
    pub pair_count: usize,
}

pub struct TrainOutcome {
    pub runs: Vec<TrainRunArtifact>,
    pub dataset_hash: String,
    pub warnings: Vec<String>,
}

fn train_one_run(
    exp: &Experiment,
    dataset: &LoadedDataset,
    set: &TransformSet,
    run_index: usize,
    out_dir: &Path,
) -> Result<(TrainRunArtifact, TrainedModel)> {
    let seed = exp.config.seed.wrapping_add(run_index as u64);
    let train_size = exp.config.train_size.resolve(dataset.train_pool_size());
    let (train_batch, _) = make_splits(dataset, train_size, seed)?;
    let cc = ClassifierConfig {
        n_classes: set.len(),
        input_dims: dataset.dims(),
        architecture: exp.config.classifier,
        seed,
    };
    let mut model = train(&train_batch, set, &cc, &exp.config.train)?;
    model.record_dataset_hash(dataset.manifest_hash());

    let model_path = out_dir.join(format!("model_{run_index}.bin"));
    save_model(&model, &model_path)?;
    let curve = &model.record().loss_curve;
    write_atomic(
        &out_dir.join(format!("loss_{run_index}.csv")),
        loss_csv(curve).as_bytes(),
    )?;
    let artifact = TrainRunArtifact {
        run_index,
        seed,
        model_path,
        final_loss: *curve.last().expect("at least one epoch"),
        pair_count: model.record().pair_count,
    };
    Ok((artifact, model))
}

/// Trains `runs` models with seeds `seed + run_index`, writing
/// `model_<r>.bin` and `loss_<r>.csv` per run.
pub fn cmd_train(exp: &Experiment, out_dir: &Path) -> Result<TrainOutcome> {
    create_dir(out_dir)?;
    let resolved = resolve_dataset(exp, out_dir)?;
    let set = resolve_transforms(exp, resolved.dataset.dims())?;
    let mut runs = Vec::new();
    for r in 0..exp.config.runs {
        let (artifact, _) = train_one_run(exp, &resolved.dataset, &set, r, out_dir)?;
        runs.push(artifact);
    }
    let model_paths: Vec<PathBuf> = runs.iter().map(|r| r.model_path.clone()).collect();
    write_provenance(
        out_dir,
        &exp.config,
        resolved.dataset.manifest_hash(),
        &model_paths,
    )?;
    Ok(TrainOutcome {
        runs,
        dataset_hash: resolved.dataset.manifest_hash().to_string(),
        warnings: resolved.warnings,
    })
}

/// Checks a model against the dataset and transform set before any
/// scoring happens. Hard mismatches error; soft ones become warnings.
fn check_model(
    model: &TrainedModel,
    dataset: &LoadedDataset,
    set: &TransformSet,
) -> Result<Vec<String>> {
    if model.config().n_classes != set.len() {
        return Err(Error::DimensionMismatch {
            expected: format!(
                "a {}-class model for transform set `{}`",
                set.len(),
                set.name()
            ),
            actual: format!("{}-class model", model.config().n_classes),
        });
    }
    if model.config().input_dims != dataset.dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("model input {}", model.config().input_dims),
            actual: format!("dataset images {}", dataset.dims()),
        });
    }
    let mut warnings = Vec::new();
    if model.record().transform_set != set.name() {
        warnings.push(format!(
            "model was trained against `{}` but is being scored with `{}`",
            model.record().transform_set,
            set.name()
        ));
    }
    if model.record().dataset_hash != "unrecorded"
        && model.record().dataset_hash != dataset.manifest_hash()
    {
        warnings.push("model was trained on a different dataset than it is scoring".into());
    }
    Ok(warnings)
}

pub struct ScoreOutcome {
    pub scores_path: PathBuf,
    pub scored: usize,
    /// (sample id, error text) for samples that failed to score.
    pub failures: Vec<(String, String)>,
}

/// Scores the test split with one trained model file. Metrics are left
/// to `evaluate`; this just writes the per-sample score table.
pub fn cmd_score(exp: &Experiment, model_path: &Path, out_dir: &Path) -> Result<ScoreOutcome> {
    create_dir(out_dir)?;
    let resolved = resolve_dataset(exp, out_dir)?;
    let set = resolve_transforms(exp, resolved.dataset.dims())?;
    let model = load_model(model_path)?;
    check_model(&model, &resolved.dataset, &set)?;

    let test_batch = test_split(exp, &resolved.dataset)?;
    let model_id = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let outcome = score_batch(&model, &test_batch, &set, &model_id)?;
    let ids: Vec<&str> = outcome
        .reports
        .iter()
        .map(|r| r.sample_id.as_str())
        .collect();
    let flags = majority_flags(&test_batch, &ids);
    let scores_path = out_dir.join("scores.csv");
    write_atomic(
        &scores_path,
        scores_csv(&outcome.reports, &flags).as_bytes(),
    )?;
    write_provenance(
        out_dir,
        &exp.config,
        resolved.dataset.manifest_hash(),
        &[model_path.to_path_buf()],
    )?;
    Ok(ScoreOutcome {
        scores_path,
        scored: outcome.reports.len(),
        failures: outcome
            .failures
            .into_iter()
            .map(|(id, e)| (id, e.to_string()))
            .collect(),
    })
}

pub struct EvaluateOutcome {
    pub report: EvalReport,
    pub metrics_path: PathBuf,
    pub warnings: Vec<String>,
    /// (sample id, error text) across all runs.
    pub failures: Vec<(String, String)>,
}

fn evaluate_models(
    exp: &Experiment,
    models: &[(String, TrainedModel)],
    dataset: &LoadedDataset,
    set: &TransformSet,
    out_dir: &Path,
) -> Result<EvaluateOutcome> {
    let mut warnings = Vec::new();
    for (_, model) in models {
        warnings.extend(check_model(model, dataset, set)?);
    }

    let test_batch = test_split(exp, dataset)?;
    let mut per_run: Vec<RunMetrics> = Vec::new();
    let mut failures = Vec::new();
    for (r, (model_id, model)) in models.iter().enumerate() {
        let outcome = score_batch(model, &test_batch, set, model_id)?;
        failures.extend(
            outcome
                .failures
                .into_iter()
                .map(|(id, e)| (id, e.to_string())),
        );
        let ids: Vec<&str> = outcome
            .reports
            .iter()
            .map(|x| x.sample_id.as_str())
            .collect();
        let flags = majority_flags(&test_batch, &ids);
        write_atomic(
            &out_dir.join(format!("scores_{r}.csv")),
            scores_csv(&outcome.reports, &flags).as_bytes(),
        )?;

        let labeled = LabeledScores::new(outcome.reports.iter().map(|x| x.score).collect(), flags)?;
        write_atomic(
            &out_dir.join(format!("roc_{r}.csv")),
            curve_csv(("fpr", "tpr"), &roc_curve(&labeled)).as_bytes(),
        )?;
        write_atomic(
            &out_dir.join(format!("pr_maj_{r}.csv")),
            curve_csv(
                ("recall", "precision"),
                &pr_curve(&labeled, PositiveClass::Majority),
            )
            .as_bytes(),
        )?;
        write_atomic(
            &out_dir.join(format!("pr_min_{r}.csv")),
            curve_csv(
                ("recall", "precision"),
                &pr_curve(&labeled, PositiveClass::Minority),
            )
            .as_bytes(),
        )?;
        per_run.push(run_metrics(&labeled));
    }

    let report = aggregate_runs(&per_run)?;
    let metrics_path = out_dir.join("metrics.txt");
    write_atomic(&metrics_path, report.render().as_bytes())?;
    Ok(EvaluateOutcome {
        report,
        metrics_path,
        warnings,
        failures,
    })
}

/// Scores the test split with each model file and aggregates the runs
/// into mean +/- std metrics.
pub fn cmd_evaluate(
    exp: &Experiment,
    model_paths: &[PathBuf],
    out_dir: &Path,
) -> Result<EvaluateOutcome> {
    if model_paths.is_empty() {
        return Err(Error::InvalidConfig(
            "evaluate needs at least one model file".into(),
        ));
    }
    create_dir(out_dir)?;
    let resolved = resolve_dataset(exp, out_dir)?;
    let set = resolve_transforms(exp, resolved.dataset.dims())?;
    let mut models = Vec::new();
    for path in model_paths {
        let model_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        models.push((model_id, load_model(path)?));
    }
    let outcome = evaluate_models(exp, &models, &resolved.dataset, &set, out_dir)?;
    write_provenance(
        out_dir,
        &exp.config,
        resolved.dataset.manifest_hash(),
        model_paths,
    )?;
    Ok(outcome)
}

/// Trains and evaluates in one pass, reusing the freshly trained models
/// without a disk round trip.
pub fn run_full(
    exp: &Experiment,
    dataset: &LoadedDataset,
    out_dir: &Path,
) -> Result<(EvaluateOutcome, Vec<PathBuf>)> {
    create_dir(out_dir)?;
    let set = resolve_transforms(exp, dataset.dims())?;
    let mut models = Vec::new();
    let mut model_paths = Vec::new();
    for r in 0..exp.config.runs {
        let (artifact, model) = train_one_run(exp, dataset, &set, r, out_dir)?;
        models.push((format!("model_{r}"), model));
        model_paths.push(artifact.model_path);
    }
    let outcome = evaluate_models(exp, &models, dataset, &set, out_dir)?;
    write_provenance(out_dir, &exp.config, dataset.manifest_hash(), &model_paths)?;
    Ok((outcome, model_paths))
}

fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    while s.ends_with('_') {
        s.pop();
    }
    s
}

/// Rewrites the dataset section to point at an already-materialized
/// manifest so sub-experiments share one dataset.
fn pin_dataset(manifest_path: &Path) -> DatasetSection {
    DatasetSection {
        manifest: Some(manifest_path.to_path_buf()),
        synthetic: None,
        dir: None,
    }
}

pub struct ComparisonOutcome {
    pub table_path: PathBuf,
    /// (preset, report) sorted by mean AUC, best first.
    pub rows: Vec<(String, EvalReport)>,
}

/// Runs the full experiment once per preset and tabulates the results,
/// best mean AUC first.
pub fn cmd_compare_transforms(
    exp: &Experiment,
    presets: &[String],
    out_dir: &Path,
) -> Result<ComparisonOutcome> {
    if presets.is_empty() {
        return Err(Error::InvalidConfig(
            "compare needs at least one preset name".into(),
        ));
    }
    // reject bad names before spending minutes training
    for name in presets {
        preset(name, 32)?;
    }
    create_dir(out_dir)?;
    let resolved = resolve_dataset(exp, out_dir)?;
    let pinned = pin_dataset(&resolved.manifest_path);

    let mut rows = Vec::new();
    for name in presets {
        let mut sub_config = exp.config.clone();
        sub_config.dataset = pinned.clone();
        sub_config.transforms = TransformSection {
            preset: Some(name.clone()),
            file: None,
        };
        sub_config.output_dir = None;
        let sub = Experiment::from_config(sub_config, exp.base_dir(), &slug(name))?;
        let (outcome, _) = run_full(&sub, &resolved.dataset, &out_dir.join(slug(name)))?;
        rows.push((name.clone(), outcome.report));
    }
    rows.sort_by(|a, b| {
        b.1.auc
            .mean
            .partial_cmp(&a.1.auc.mean)
            .expect("metric means are finite")
    });

    let table_rows: Vec<(String, Option<EvalReport>, Option<String>)> = rows
        .iter()
        .map(|(name, report)| (name.clone(), Some(report.clone()), None))
        .collect();
    let table_path = out_dir.join("compare.csv");
    write_atomic(
        &table_path,
        summary_csv("transform_set", &table_rows).as_bytes(),
    )?;
    write_provenance(out_dir, &exp.config, resolved.dataset.manifest_hash(), &[])?;
    Ok(ComparisonOutcome { table_path, rows })
}

pub struct SweepOutcome {
    pub table_path: PathBuf,
    /// One row per requested size, in request order; failed sizes carry
    /// the error text instead of a report.
    pub rows: Vec<(usize, std::result::Result<EvalReport, String>)>,
}

/// Runs the full experiment once per training-set size. A size that
/// fails (say, larger than the pool) is recorded and the sweep moves on.
pub fn cmd_size_sweep(exp: &Experiment, sizes: &[usize], out_dir: &Path) -> Result<SweepOutcome> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig(
            "size sweep needs at least one size".into(),
        ));
    }
    create_dir(out_dir)?;
    let resolved = resolve_dataset(exp, out_dir)?;
    let pinned = pin_dataset(&resolved.manifest_path);

    let mut rows = Vec::new();
    for &size in sizes {
        let mut sub_config = exp.config.clone();
        sub_config.dataset = pinned.clone();
        sub_config.train_size = TrainSize::Count(size);
        sub_config.output_dir = None;
        let name = format!("size_{size}");
        let result = Experiment::from_config(sub_config, exp.base_dir(), &name)
            .and_then(|sub| run_full(&sub, &resolved.dataset, &out_dir.join(&name)))
            .map(|(outcome, _)| outcome.report);
        rows.push((size, result.map_err(|e| e.to_string())));
    }
    if rows.iter().all(|(_, r)| r.is_err()) {
        return Err(Error::InvalidConfig(format!(
            "every requested size failed; first error: {}",
            rows[0].1.as_ref().unwrap_err()
        )));
    }

    let table_rows: Vec<(String, Option<EvalReport>, Option<String>)> = rows
        .iter()
        .map(|(size, result)| match result {
            Ok(report) => (size.to_string(), Some(report.clone()), None),
            Err(msg) => (size.to_string(), None, Some(msg.clone())),
        })
        .collect();
    let table_path = out_dir.join("size_sweep.csv");
    write_atomic(
        &table_path,
        summary_csv("train_size", &table_rows).as_bytes(),
    )?;
    write_provenance(out_dir, &exp.config, resolved.dataset.manifest_hash(), &[])?;
    Ok(SweepOutcome { table_path, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::SyntheticConfig;
    use crate::experiment::config::ExperimentConfig;

    /// Small synthetic experiment that trains in roughly a second.
    fn tiny_config(runs: usize, epochs: usize) -> ExperimentConfig {
        ExperimentConfig {
            seed: 0,
            runs,
            train_size: TrainSize::All,
            output_dir: None,
            dataset: DatasetSection {
                manifest: None,
                synthetic: Some(SyntheticConfig {
                    train_majority: 24,
                    test_majority: 10,
                    test_minority: 10,
                    dims: Dims::new(16, 16, 1),
                    brightness_shift: 0.25,
                    contrast_shift: 1.0,
                    texture_seed: 11,
                }),
                dir: None,
            },
            transforms: TransformSection {
                preset: Some("LM(3,0)".into()),
                file: None,
            },
            classifier: crate::classifier::Architecture::SmallConv,
            train: crate::classifier::TrainConfig {
                epochs,
                batch_size: 32,
                ..Default::default()
            },
        }
    }

    fn experiment(config: ExperimentConfig, dir: &Path) -> Experiment {
        Experiment::from_config(config, dir, "tiny").unwrap()
    }

    #[test]
    fn synth_writes_manifest_and_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(tiny_config(1, 1), dir.path());
        let out = exp
            .output_dir(Some(dir.path().join("out").as_path()))
            .unwrap();
        let outcome = cmd_synth(&exp, &out).unwrap();
        assert_eq!(outcome.images_written, 44);
        assert!(outcome.manifest_path.is_file());
        assert!(out.join("provenance.txt").exists());
        let prov = std::fs::read_to_string(out.join("provenance.txt")).unwrap();
        assert!(prov.contains(&outcome.dataset_hash));
        assert!(prov.contains("train_majority = 24"));
    }

    #[test]
    fn synth_requires_synthetic_recipe() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(1, 1);
        config.dataset = DatasetSection {
            manifest: Some("m.csv".into()),
            synthetic: None,
            dir: None,
        };
        let exp = experiment(config, dir.path());
        assert!(cmd_synth(&exp, &dir.path().join("out")).is_err());
    }

    #[test]
    fn preview_writes_one_file_per_transform() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(tiny_config(1, 1), dir.path());
        let out = dir.path().join("out");
        let outcome = cmd_preview_transforms(&exp, None, &out).unwrap();
        assert_eq!(outcome.files.len(), 3);
        assert!(outcome.files.iter().all(|f| f.is_file()));
        let lines: Vec<&str> = outcome.table.lines().collect();
        assert_eq!(lines[0], "label,family,description");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,intensity,"));
    }

    #[test]
    fn train_then_evaluate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(tiny_config(2, 4), dir.path());
        let out = dir.path().join("out");
        let trained = cmd_train(&exp, &out).unwrap();
        assert_eq!(trained.runs.len(), 2);
        assert_eq!(trained.runs[0].seed, 0);
        assert_eq!(trained.runs[1].seed, 1);
        assert_eq!(trained.runs[0].pair_count, 24 * 3);
        assert!(out.join("model_0.bin").is_file());
        assert!(out.join("loss_1.csv").is_file());

        let models = vec![out.join("model_0.bin"), out.join("model_1.bin")];
        let eval = cmd_evaluate(&exp, &models, &out).unwrap();
        assert!(eval.warnings.is_empty(), "{:?}", eval.warnings);
        assert!(eval.failures.is_empty());
        assert_eq!(eval.report.runs, 2);
        for name in [
            "scores_0.csv",
            "scores_1.csv",
            "roc_0.csv",
            "pr_maj_0.csv",
            "pr_min_1.csv",
            "metrics.txt",
            "provenance.txt",
        ] {
            assert!(out.join(name).is_file(), "missing {name}");
        }
        let metrics = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
        assert!(metrics.contains("AUC"));
        assert!(metrics.contains("+/-"));
        let prov = std::fs::read_to_string(out.join("provenance.txt")).unwrap();
        assert!(prov.contains("model_0"));
        assert!(prov.contains("model_1"));
    }

    #[test]
    fn evaluate_rejects_mismatched_models_before_scoring() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(tiny_config(1, 2), dir.path());
        let out = dir.path().join("out");
        cmd_train(&exp, &out).unwrap();

        // same model, five-transform set: class count mismatch
        let mut config = tiny_config(1, 2);
        config.transforms = TransformSection {
            preset: Some("LM(5,0)".into()),
            file: None,
        };
        let exp5 = experiment(config, dir.path());
        let err = cmd_evaluate(&exp5, &[out.join("model_0.bin")], &dir.path().join("out5"));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        // nothing was scored for the mismatched run
        assert!(!dir.path().join("out5/scores_0.csv").exists());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(tiny_config(1, 3), dir.path());
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let (eval_a, _) = run_full(
            &exp,
            &resolve_dataset(&exp, &out_a).unwrap().dataset,
            &out_a,
        )
        .unwrap();
        let (eval_b, _) = run_full(
            &exp,
            &resolve_dataset(&exp, &out_b).unwrap().dataset,
            &out_b,
        )
        .unwrap();
        assert_eq!(eval_a.report, eval_b.report);
        for name in [
            "model_0.bin",
            "scores_0.csv",
            "metrics.txt",
            "loss_0.csv",
            "roc_0.csv",
        ] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn compare_orders_by_auc_and_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        // brightness-shifted minority: intensity transforms should beat
        // rotations, which carry no signal for this dataset
        let exp = experiment(tiny_config(1, 6), dir.path());
        let out = dir.path().join("out");
        let presets = vec!["R(4,0)".to_string(), "LM(3,0)".to_string()];
        let outcome = cmd_compare_transforms(&exp, &presets, &out).unwrap();
        assert_eq!(outcome.rows.len(), 2);
        assert!(outcome.rows[0].1.auc.mean >= outcome.rows[1].1.auc.mean);
        let table = std::fs::read_to_string(&outcome.table_path).unwrap();
        assert!(table.starts_with("transform_set,runs,auc_mean"));
        assert_eq!(table.lines().count(), 3);
        assert!(out.join("LM_3_0/model_0.bin").is_file());
        assert!(out.join("R_4_0/metrics.txt").is_file());

        let unknown = cmd_compare_transforms(&exp, &["LM(9,9)".into()], &out);
        assert!(matches!(unknown, Err(Error::UnknownPreset { .. })));
    }

    #[test]
    fn size_sweep_survives_oversized_request() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(tiny_config(1, 3), dir.path());
        let out = dir.path().join("out");
        let outcome = cmd_size_sweep(&exp, &[12, 500, 24], &out).unwrap();
        assert_eq!(outcome.rows.len(), 3);
        assert!(outcome.rows[0].1.is_ok());
        assert!(outcome.rows[1].1.is_err());
        assert!(outcome.rows[2].1.is_ok());
        let table = std::fs::read_to_string(&outcome.table_path).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("12,1,"));
        assert!(lines[2].starts_with("500,0,"));
        assert!(lines[2].contains("pool"));

        // all-failing sweep is an error
        assert!(cmd_size_sweep(&exp, &[999], &dir.path().join("out2")).is_err());
    }

    #[test]
    fn sweep_full_pool_matches_train_size_all() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(tiny_config(1, 3), dir.path());
        let out = dir.path().join("all");
        let resolved = resolve_dataset(&exp, &out).unwrap();
        let (eval_all, _) = run_full(&exp, &resolved.dataset, &out).unwrap();

        let sweep = cmd_size_sweep(&exp, &[24], &dir.path().join("sweep")).unwrap();
        let report = sweep.rows[0].1.as_ref().unwrap();
        assert_eq!(report.auc.mean, eval_all.report.auc.mean);
        assert_eq!(
            report.aupr_minority.mean,
            eval_all.report.aupr_minority.mean
        );
    }
}
