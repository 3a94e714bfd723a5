//! Experiment configuration files.
//!
//! One TOML file describes a whole experiment: where the data comes from
//! (a manifest or a synthetic recipe), which transform set to train
//! against, the classifier architecture, the optimizer settings, and how
//! many repeated runs to aggregate. Relative paths inside the file
//! resolve against the file's own directory, so configs can be checked
//! in next to their data.

use crate::classifier::{Architecture, TrainConfig};
use crate::dataio::SyntheticConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// How many training samples to draw from the majority pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainSize {
    /// The whole train split.
    #[default]
    All,
    /// A seeded subsample of this many images.
    Count(usize),
}

impl Serialize for TrainSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TrainSize::All => s.serialize_str("all"),
            TrainSize::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TrainSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(usize),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(n) => Ok(TrainSize::Count(n)),
            Repr::Word(w) if w == "all" => Ok(TrainSize::All),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "train_size must be a count or \"all\", got \"{w}\""
            ))),
        }
    }
}

impl TrainSize {
    pub fn resolve(&self, pool: usize) -> usize {
        match self {
            TrainSize::All => pool,
            TrainSize::Count(n) => *n,
        }
    }
}

/// Exactly one of `manifest` or `synthetic`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Path to a dataset manifest, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Recipe for generating the dataset on the fly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    /// Where to materialize a synthetic dataset. Defaults to
    /// `<output_dir>/dataset`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Exactly one of `preset` or `file`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Path to a custom transform-set file, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

fn default_runs() -> usize {
    3
}

fn default_architecture() -> Architecture {
    Architecture::SmallConv
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; run r uses seed + r for subsampling and training.
    #[serde(default)]
    pub seed: u64,
    /// Repeated runs aggregated into mean +/- std.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub train_size: TrainSize,
    /// Where outputs land; overridable on the command line and
    /// defaulted from ONECLASS_OUTPUT_ROOT when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub transforms: TransformSection,
    #[serde(default = "default_architecture")]
    pub classifier: Architecture,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::InvalidConfig(reason.into()));
        if self.runs < 1 {
            return fail("runs must be at least 1");
        }
        if let TrainSize::Count(0) = self.train_size {
            return fail("train_size count must be at least 1");
        }
        match (&self.dataset.manifest, &self.dataset.synthetic) {
            (Some(_), Some(_)) => {
                return fail("dataset takes either `manifest` or `synthetic`, not both")
            }
            (None, None) => return fail("dataset needs a `manifest` path or a `synthetic` recipe"),
            (Some(_), None) if self.dataset.dir.is_some() => {
                return fail("dataset `dir` only applies to synthetic datasets")
            }
            _ => {}
        }
        if let Some(sc) = &self.dataset.synthetic {
            sc.validate()?;
        }
        match (&self.transforms.preset, &self.transforms.file) {
            (Some(_), Some(_)) => {
                return fail("transforms takes either `preset` or `file`, not both")
            }
            (None, None) => return fail("transforms needs a `preset` name or a `file` path"),
            _ => {}
        }
        self.classifier.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

/// A config plus where it came from, so relative paths and the default
/// output location stay anchored to the file.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    base_dir: PathBuf,
    name: String,
}

/// Environment variable giving the fallback root for output directories.
pub const OUTPUT_ROOT_VAR: &str = "ONECLASS_OUTPUT_ROOT";

/// Parses and validates an experiment config from TOML text.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile {
                    path: path.to_path_buf(),
                }
            } else {
                Error::io(path, e)
            }
        })?;
        let config = parse_experiment_config(&text).map_err(|e| match e {
            Error::InvalidConfig(reason) => Error::ConfigParse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".into());
        Ok(Experiment {
            config,
            base_dir,
            name,
        })
    }

    /// For configs built in code rather than read from a file.
    pub fn from_config(config: ExperimentConfig, base_dir: &Path, name: &str) -> Result<Self> {
        config.validate()?;
        Ok(Experiment {
            config,
            base_dir: base_dir.to_path_buf(),
            name: name.to_string(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Anchors a config-file path to the config's directory.
    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Command-line flag, then the config's own `output_dir`, then
    /// `$ONECLASS_OUTPUT_ROOT/<config name>`.
    pub fn output_dir(&self, cli_override: Option<&Path>) -> Result<PathBuf> {
        if let Some(dir) = cli_override {
            return Ok(dir.to_path_buf());
        }
        if let Some(dir) = &self.config.output_dir {
            return Ok(self.resolve_path(dir));
        }
        if let Ok(root) = std::env::var(OUTPUT_ROOT_VAR) {
            if !root.is_empty() {
                return Ok(PathBuf::from(root).join(&self.name));
            }
        }
        Err(Error::InvalidConfig(format!(
            "no output directory: set output_dir in the config, pass --out, \
             or export {OUTPUT_ROOT_VAR}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
            [dataset]
            manifest = "data/manifest.csv"

            [transforms]
            preset = "LM(5,0)"
        "#
    }

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_experiment_config(text)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(minimal_toml()).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.runs, 3);
        assert_eq!(c.train_size, TrainSize::All);
        assert_eq!(c.classifier, Architecture::SmallConv);
        assert_eq!(c.train.epochs, 50);
        assert_eq!(c.train.learning_rate, 2e-4);
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
            seed = 7
            runs = 2
            train_size = 500
            output_dir = "runs/full"

            [dataset.synthetic]
            train_majority = 1000
            test_majority = 200
            test_minority = 200
            dims = [32, 32, 1]
            brightness_shift = 0.2
            contrast_shift = 1.2
            texture_seed = 3

            [transforms]
            preset = "LM(5,2)"

            [classifier]
            kind = "wide_residual"
            depth = 16
            width_factor = 4

            [train]
            learning_rate = 1e-3
            batch_size = 64
            epochs = 10
        "#;
        let c = parse(text).unwrap();
        assert_eq!(c.train_size, TrainSize::Count(500));
        assert_eq!(
            c.classifier,
            Architecture::WideResidual {
                depth: 16,
                width_factor: 4
            }
        );
        assert_eq!(c.dataset.synthetic.as_ref().unwrap().texture_seed, 3);

        let echoed = toml::to_string(&c).unwrap();
        let back = parse(&echoed).unwrap();
        assert_eq!(back.train_size, c.train_size);
        assert_eq!(back.classifier, c.classifier);
        assert_eq!(back.dataset.synthetic, c.dataset.synthetic);
        assert_eq!(back.train, c.train);
    }

    #[test]
    fn train_size_accepts_all_and_counts_only() {
        assert!(parse(&format!("train_size = \"all\"\n{}", minimal_toml())).is_ok());
        assert!(parse(&format!("train_size = 250\n{}", minimal_toml())).is_ok());
        assert!(parse(&format!("train_size = \"half\"\n{}", minimal_toml())).is_err());
        assert!(parse(&format!("train_size = 0\n{}", minimal_toml())).is_err());
        assert_eq!(TrainSize::All.resolve(17), 17);
        assert_eq!(TrainSize::Count(5).resolve(17), 5);
    }

    #[test]
    fn exactly_one_dataset_and_transform_source() {
        let both = r#"
            [dataset]
            manifest = "m.csv"
            [dataset.synthetic]
            [transforms]
            preset = "LM(5,0)"
        "#;
        assert!(parse(both).is_err());

        let neither = "[dataset]\n[transforms]\npreset = \"LM(5,0)\"";
        assert!(parse(neither).is_err());

        let no_transform = "[dataset]\nmanifest = \"m.csv\"\n[transforms]";
        assert!(parse(no_transform).is_err());

        let dir_without_synthetic = r#"
            [dataset]
            manifest = "m.csv"
            dir = "somewhere"
            [transforms]
            preset = "LM(5,0)"
        "#;
        assert!(parse(dir_without_synthetic).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(&format!("epochs = 3\n{}", minimal_toml())).is_err());
        let typo = r#"
            [dataset]
            manifst = "m.csv"
            [transforms]
            preset = "LM(5,0)"
        "#;
        assert!(parse(typo).is_err());
    }

    #[test]
    fn nested_validation_runs() {
        let bad_depth = format!(
            "{}\n[classifier]\nkind = \"wide_residual\"\ndepth = 15\nwidth_factor = 2",
            minimal_toml()
        );
        assert!(parse(&bad_depth).is_err());
        let bad_train = format!("{}\n[train]\nepochs = 0", minimal_toml());
        assert!(parse(&bad_train).is_err());
        let bad_runs = format!("runs = 0\n{}", minimal_toml());
        assert!(parse(&bad_runs).is_err());
    }

    #[test]
    fn load_resolves_paths_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, format!("output_dir = \"out\"\n{}", minimal_toml())).unwrap();
        let exp = Experiment::load(&path).unwrap();
        assert_eq!(exp.name(), "exp");
        assert_eq!(exp.output_dir(None).unwrap(), dir.path().join("out"));
        assert_eq!(
            exp.resolve_path(Path::new("data/manifest.csv")),
            dir.path().join("data/manifest.csv")
        );
        let flag = PathBuf::from("/tmp/elsewhere");
        assert_eq!(exp.output_dir(Some(&flag)).unwrap(), flag);
    }

    #[test]
    fn load_reports_missing_and_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Experiment::load(&dir.path().join("nope.toml")),
            Err(Error::MissingFile { .. })
        ));
        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "not toml [").unwrap();
        assert!(matches!(
            Experiment::load(&bad),
            Err(Error::ConfigParse { .. })
        ));
    }
}
