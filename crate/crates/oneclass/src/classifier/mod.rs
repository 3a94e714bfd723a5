//! The n-way transform classifier: configuration, training on expanded
//! image-transform pairs, probability prediction, and model files.
//!
//! Training expands lazily: the (image index, transform index) pair list
//! is shuffled per epoch and each batch materializes its transformed
//! images on the fly, so memory stays proportional to the raw training
//! set plus one batch.

mod adam;
mod layers;
mod network;
mod serialize;

pub use layers::Param;
pub use network::{Architecture, Network};
pub use serialize::{load_model, load_model_bytes, save_model};

use crate::dataio::{SampleBatch, LABEL_MAJORITY};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::transforms::TransformSet;
use adam::Adam;
use layers::{softmax, softmax_cross_entropy};
use ndarray::Array4;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Network shape and seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Class count; must equal the transform set's size.
    pub n_classes: usize,
    pub input_dims: Dims,
    pub architecture: Architecture,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidClassifierConfig(format!(
                "n_classes must be at least 2, got {}",
                self.n_classes
            )));
        }
        self.input_dims.validate()?;
        self.architecture.validate()
    }
}

/// Optimization hyperparameters. Defaults: learning rate 2e-4, batch
/// size 128, 50 epochs, moment decay (0.9, 0.999).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            batch_size: 128,
            epochs: 50,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidTrainConfig(reason));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return fail(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        Ok(())
    }
}

/// Metadata of one training run, carried inside the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Mean cross-entropy per epoch over all expanded pairs.
    pub loss_curve: Vec<f64>,
    pub seed: u64,
    /// Content hash of the dataset manifest, when the caller recorded one.
    pub dataset_hash: String,
    /// Expanded training size: |images| * n.
    pub pair_count: usize,
    pub transform_set: String,
}

/// Anything that maps images to per-class probability vectors. The
/// scoring stage works against this contract, which keeps it testable
/// with closed-form stand-ins.
pub trait ProbabilityModel {
    fn n_classes(&self) -> usize;
    fn input_dims(&self) -> Dims;
    /// One probability vector (length `n_classes`, summing to 1) per image.
    fn predict_proba(&self, images: &[Image]) -> Result<Vec<Vec<f64>>>;
}

/// A trained classifier: frozen parameters plus the config and record
/// that produced them.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    config: ClassifierConfig,
    record: TrainRecord,
    network: Network,
}

impl TrainedModel {
    pub(crate) fn from_parts(
        config: ClassifierConfig,
        record: TrainRecord,
        network: Network,
    ) -> Self {
        TrainedModel {
            config,
            record,
            network,
        }
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn record(&self) -> &TrainRecord {
        &self.record
    }

    pub(crate) fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    /// Stamps dataset provenance onto the run record (the experiment
    /// driver knows the manifest hash; training itself does not).
    pub fn record_dataset_hash(&mut self, hash: impl Into<String>) {
        self.record.dataset_hash = hash.into();
    }
}

impl ProbabilityModel for TrainedModel {
    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn input_dims(&self) -> Dims {
        self.config.input_dims
    }

    fn predict_proba(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 256;
        let dims = self.config.input_dims;
        for im in images {
            if im.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims.to_string(),
                    actual: im.dims().to_string(),
                });
            }
        }
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(CHUNK) {
            let x = to_input(chunk, dims);
            let probs = softmax(&self.network.infer(&x));
            for row in probs.rows() {
                out.push(row.to_vec());
            }
        }
        Ok(out)
    }
}

/// Stacks images into an NCHW f64 batch.
fn to_input(images: &[Image], dims: Dims) -> Array4<f64> {
    let mut x = Array4::<f64>::zeros((images.len(), dims.channels, dims.height, dims.width));
    for (ni, im) in images.iter().enumerate() {
        let data = im.data();
        for ci in 0..dims.channels {
            for i in 0..dims.height {
                for j in 0..dims.width {
                    x[[ni, ci, i, j]] = f64::from(data[[i, j, ci]]);
                }
            }
        }
    }
    x
}

/// Trains an n-way classifier on the expanded pair set (every training
/// image under every transform of `set`, labels by transform position).
///
/// The batch must be majority-only (that is the method's premise), its
/// dims must match the config, and `cc.n_classes` must equal `set.len()`.
/// Deterministic given the config seed.
pub fn train(
    train_images: &SampleBatch,
    set: &TransformSet,
    cc: &ClassifierConfig,
    tc: &TrainConfig,
) -> Result<TrainedModel> {
    cc.validate()?;
    tc.validate()?;
    if train_images.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if train_images.labels().iter().any(|&l| l != LABEL_MAJORITY) {
        return Err(Error::MixedTrainingBatch);
    }
    let dims = train_images.dims().expect("non-empty batch");
    if dims != cc.input_dims {
        return Err(Error::DimensionMismatch {
            expected: cc.input_dims.to_string(),
            actual: dims.to_string(),
        });
    }
    if cc.n_classes != set.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("n_classes = {} (transform set size)", set.len()),
            actual: format!("n_classes = {}", cc.n_classes),
        });
    }
    // surface untransformable inputs (non-square rotation, oversized
    // shift) before spending epochs
    for (i, spec) in set.specs().iter().enumerate() {
        spec.apply(&train_images.images()[0])
            .map_err(|e| Error::TransformFailed {
                set: set.name().to_string(),
                index: i,
                source: Box::new(e),
            })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cc.seed);
    let mut network = Network::build(cc.architecture, cc.input_dims, cc.n_classes, &mut rng)?;
    let mut optimizer = Adam::new(tc.learning_rate, tc.beta1, tc.beta2);

    let n = set.len();
    let m = train_images.len();
    let mut pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|ii| (0..n).map(move |ti| (ii, ti)))
        .collect();
    let pair_count = pairs.len();

    let mut loss_curve = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        pairs.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (bi, batch) in pairs.chunks(tc.batch_size).enumerate() {
            let mut images = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &(ii, ti) in batch {
                let transformed =
                    set.specs()[ti]
                        .apply(&train_images.images()[ii])
                        .map_err(|e| Error::TransformFailed {
                            set: set.name().to_string(),
                            index: ti,
                            source: Box::new(e),
                        })?;
                images.push(transformed);
                labels.push(ti);
            }
            let x = to_input(&images, dims);
            let logits = network.forward_train(&x);
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            network.zero_grads();
            network.backward(&dlogits);
            optimizer.step(&mut network.params_mut());
            epoch_loss += loss * batch.len() as f64;
        }
        loss_curve.push(epoch_loss / pair_count as f64);
    }

    Ok(TrainedModel {
        config: cc.clone(),
        record: TrainRecord {
            loss_curve,
            seed: cc.seed,
            dataset_hash: "unrecorded".into(),
            pair_count,
            transform_set: set.name().to_string(),
        },
        network,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{preset, LinearMagnification, TransformSet, TransformSpec};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn lm(c: f64, b: f64) -> TransformSpec {
        TransformSpec::Linear(LinearMagnification::new(c, b).unwrap())
    }

    fn textures(count: usize, dims: Dims, seed: u64) -> SampleBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images: Vec<Image> = (0..count)
            .map(|_| {
                let arr = ndarray::Array3::from_shape_fn(
                    (dims.height, dims.width, dims.channels),
                    |_| rng.gen_range(0.2..0.7),
                );
                Image::from_array(arr).unwrap()
            })
            .collect();
        let ids = (0..count).map(|i| format!("img_{i}")).collect();
        SampleBatch::new(images, vec![LABEL_MAJORITY; count], ids).unwrap()
    }

    fn quick_config(n_classes: usize, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            n_classes,
            input_dims: Dims::new(8, 8, 1),
            architecture: Architecture::SmallConv,
            seed,
        }
    }

    #[test]
    fn rejects_contract_violations() {
        let set = preset("LM(3,0)", 8).unwrap();
        let cc = quick_config(3, 0);
        let tc = TrainConfig::default();

        let empty = SampleBatch::new(vec![], vec![], vec![]).unwrap();
        assert!(matches!(
            train(&empty, &set, &cc, &tc),
            Err(Error::EmptyTrainingSet)
        ));

        let mut batch = textures(2, Dims::new(8, 8, 1), 0);
        batch = SampleBatch::new(
            batch.images().to_vec(),
            vec![LABEL_MAJORITY, 0],
            batch.ids().to_vec(),
        )
        .unwrap();
        assert!(matches!(
            train(&batch, &set, &cc, &tc),
            Err(Error::MixedTrainingBatch)
        ));

        let wrong_dims = textures(2, Dims::new(16, 16, 1), 0);
        assert!(matches!(
            train(&wrong_dims, &set, &cc, &tc),
            Err(Error::DimensionMismatch { .. })
        ));

        let batch = textures(2, Dims::new(8, 8, 1), 0);
        let cc4 = quick_config(4, 0);
        assert!(matches!(
            train(&batch, &set, &cc4, &tc),
            Err(Error::DimensionMismatch { .. })
        ));

        let bad_tc = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&batch, &set, &cc, &bad_tc).is_err());
    }

    #[test]
    fn expansion_size_is_images_times_transforms() {
        // 6 images x 5 transforms = 30 pairs; the 1500 x LM(5,0) = 7500
        // case is this same arithmetic at dataset scale
        let batch = textures(6, Dims::new(8, 8, 1), 1);
        let set = preset("LM(5,0)", 8).unwrap();
        let cc = quick_config(5, 3);
        let tc = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let model = train(&batch, &set, &cc, &tc).unwrap();
        assert_eq!(model.record().pair_count, 30);
        assert_eq!(model.record().loss_curve.len(), 1);
        assert_eq!(model.record().transform_set, "LM(5,0)");
    }

    #[test]
    fn memorizes_one_image_two_transforms() {
        // capacity sanity: a single image under a 2-spec set must be
        // classifiable perfectly after enough steps
        let batch = textures(1, Dims::new(8, 8, 1), 2);
        let set = TransformSet::new("pair", vec![lm(1.0, 0.0), lm(1.6, 0.1)]).unwrap();
        let cc = quick_config(2, 5);
        let tc = TrainConfig {
            learning_rate: 0.01,
            epochs: 150,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let model = train(&batch, &set, &cc, &tc).unwrap();
        assert_eq!(model.record().pair_count, 2);

        let expanded = crate::transforms::expand(&batch.images()[0], &set).unwrap();
        let images: Vec<Image> = expanded.iter().map(|(im, _)| im.clone()).collect();
        let probs = model.predict_proba(&images).unwrap();
        for (i, p) in probs.iter().enumerate() {
            let argmax = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, i, "pair {i} misclassified: {p:?}");
        }
        let final_loss = *model.record().loss_curve.last().unwrap();
        assert!(
            final_loss < 0.1,
            "memorization should drive loss low, got {final_loss}"
        );
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let batch = textures(4, Dims::new(8, 8, 1), 3);
        let set = preset("LM(3,0)", 8).unwrap();
        let cc = quick_config(3, 11);
        let tc = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train(&batch, &set, &cc, &tc).unwrap();
        let b = train(&batch, &set, &cc, &tc).unwrap();
        assert_eq!(a.record().loss_curve, b.record().loss_curve);
        let probe = textures(2, Dims::new(8, 8, 1), 4);
        assert_eq!(
            a.predict_proba(probe.images()).unwrap(),
            b.predict_proba(probe.images()).unwrap()
        );
        let cc2 = quick_config(3, 12);
        let c = train(&batch, &set, &cc2, &tc).unwrap();
        assert_ne!(a.record().loss_curve, c.record().loss_curve);
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let batch = textures(8, Dims::new(8, 8, 1), 6);
        let set = TransformSet::new("wide pair", vec![lm(1.0, 0.0), lm(0.4, 0.0)]).unwrap();
        let cc = quick_config(2, 1);
        let tc = TrainConfig {
            learning_rate: 0.005,
            epochs: 10,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let model = train(&batch, &set, &cc, &tc).unwrap();
        let curve = model.record().loss_curve.clone();
        assert!(curve.iter().all(|l| l.is_finite()));
        assert!(
            curve.last().unwrap() < curve.first().unwrap(),
            "loss should fall: {curve:?}"
        );
    }

    #[test]
    fn probabilities_are_distributions_even_off_distribution() {
        let batch = textures(2, Dims::new(8, 8, 1), 7);
        let set = preset("LM(3,0)", 8).unwrap();
        let tc = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let model = train(&batch, &set, &quick_config(3, 2), &tc).unwrap();
        // far off the training distribution: constant extremes
        let probes = vec![
            Image::constant(Dims::new(8, 8, 1), 0.0).unwrap(),
            Image::constant(Dims::new(8, 8, 1), 1.0).unwrap(),
        ];
        for p in model.predict_proba(&probes).unwrap() {
            assert_eq!(p.len(), 3);
            assert!(p.iter().all(|v| *v >= 0.0));
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn batched_prediction_equals_per_image_and_is_equivariant() {
        let batch = textures(2, Dims::new(8, 8, 1), 8);
        let set = preset("LM(3,0)", 8).unwrap();
        let tc = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let model = train(&batch, &set, &quick_config(3, 9), &tc).unwrap();

        let probes: Vec<Image> = textures(5, Dims::new(8, 8, 1), 10).images().to_vec();
        let batched = model.predict_proba(&probes).unwrap();
        for (i, im) in probes.iter().enumerate() {
            let single = model.predict_proba(std::slice::from_ref(im)).unwrap();
            assert_eq!(single[0], batched[i], "batching must not change outputs");
        }
        let reversed: Vec<Image> = probes.iter().rev().cloned().collect();
        let rev_out = model.predict_proba(&reversed).unwrap();
        for i in 0..probes.len() {
            assert_eq!(rev_out[i], batched[probes.len() - 1 - i]);
        }
    }

    #[test]
    fn prediction_rejects_wrong_dims() {
        let batch = textures(2, Dims::new(8, 8, 1), 12);
        let set = preset("LM(3,0)", 8).unwrap();
        let tc = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let model = train(&batch, &set, &quick_config(3, 2), &tc).unwrap();
        let wrong = vec![Image::constant(Dims::new(9, 9, 1), 0.5).unwrap()];
        assert!(matches!(
            model.predict_proba(&wrong),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn untransformable_input_fails_before_training() {
        // rotation set on a non-square image: caught by the pre-flight
        // probe, not at some batch mid-run
        let batch = textures(2, Dims::new(8, 16, 1), 13);
        let set = preset("R(4,0)", 8).unwrap();
        let cc = ClassifierConfig {
            n_classes: 4,
            input_dims: Dims::new(8, 16, 1),
            architecture: Architecture::SmallConv,
            seed: 0,
        };
        let tc = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&batch, &set, &cc, &tc),
            Err(Error::TransformFailed { .. })
        ));
    }

    #[test]
    fn learns_transform_recognition_on_textures() {
        // the predict-your-transform task itself: with enough samples the
        // argmax must recover the applied transform on >= 90% of pairs
        let dims = Dims::new(8, 8, 1);
        let batch = textures(30, dims, 14);
        let set = preset("LM(3,0)", 8).unwrap();
        let cc = quick_config(3, 21);
        let tc = TrainConfig {
            learning_rate: 0.003,
            epochs: 40,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let model = train(&batch, &set, &cc, &tc).unwrap();

        let mut correct = 0;
        let mut total = 0;
        for im in batch.images() {
            let expanded = crate::transforms::expand(im, &set).unwrap();
            let images: Vec<Image> = expanded.iter().map(|(i, _)| i.clone()).collect();
            for (ti, p) in model.predict_proba(&images).unwrap().iter().enumerate() {
                let argmax = p
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                if argmax == ti {
                    correct += 1;
                }
                total += 1;
            }
        }
        let accuracy = correct as f64 / total as f64;
        assert!(
            accuracy >= 0.9,
            "transform recognition accuracy {accuracy:.3} below 0.9"
        );
    }
}
