//! Loaded datasets and train/test split construction.
//!
//! Training is majority-only: the train batch is drawn (without
//! replacement, seeded) from the manifest's train entries, while the test
//! batch always carries every test entry with ground-truth class flags.
//! Train/test disjointness comes from the manifest's split column, not
//! from sampling.

use crate::dataio::manifest::{manifest_hash, manifest_to_string, DatasetManifest, Split};
use crate::dataio::preprocess::{decode_image_file, preprocess};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Ground-truth flag values used in test batches.
pub const LABEL_MAJORITY: u32 = 1;
pub const LABEL_MINORITY: u32 = 0;

/// One manifest entry with its image decoded and preprocessed.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub id: String,
    pub class_id: String,
    pub split: Split,
    pub image: Image,
}

/// A manifest's images, decoded and preprocessed to the target dims.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    dims: Dims,
    majority_class: String,
    samples: Vec<LoadedSample>,
    manifest_hash: String,
}

impl LoadedDataset {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn majority_class(&self) -> &str {
        &self.majority_class
    }

    pub fn samples(&self) -> &[LoadedSample] {
        &self.samples
    }

    /// SHA-256 of the manifest's canonical text form; recorded in model
    /// files and provenance output.
    pub fn manifest_hash(&self) -> &str {
        &self.manifest_hash
    }

    pub fn train_pool_size(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.split == Split::Train)
            .count()
    }
}

/// Decodes and preprocesses every manifest entry, in manifest order.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<LoadedDataset> {
    let samples = manifest
        .entries()
        .iter()
        .map(|entry| {
            let raw = decode_image_file(&manifest.resolve(entry))?;
            let image = preprocess(raw, manifest.dims())?;
            Ok(LoadedSample {
                id: entry.path.display().to_string(),
                class_id: entry.class_id.clone(),
                split: entry.split,
                image,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset {
        dims: manifest.dims(),
        majority_class: manifest.majority_class().to_string(),
        samples,
        manifest_hash: manifest_hash(&manifest_to_string(manifest)),
    })
}

/// Images with parallel labels and sample identifiers. The label meaning
/// depends on the pipeline stage: transform-class labels (1..n) during
/// training, ground-truth majority/minority flags in test batches.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    images: Vec<Image>,
    labels: Vec<u32>,
    ids: Vec<String>,
}

impl SampleBatch {
    /// Builds a batch; the three lists must share one length and all
    /// images one dimension triple.
    pub fn new(images: Vec<Image>, labels: Vec<u32>, ids: Vec<String>) -> Result<Self> {
        if images.len() != labels.len() || images.len() != ids.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} images, labels, and ids", images.len()),
                actual: format!("{} labels, {} ids", labels.len(), ids.len()),
            });
        }
        if let Some(first) = images.first() {
            let dims = first.dims();
            if let Some(bad) = images.iter().find(|im| im.dims() != dims) {
                return Err(Error::DimensionMismatch {
                    expected: dims.to_string(),
                    actual: bad.dims().to_string(),
                });
            }
        }
        Ok(SampleBatch {
            images,
            labels,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dims(&self) -> Option<Dims> {
        self.images.first().map(|im| im.dims())
    }
}

/// Draws a majority-only training batch of `train_size` samples (without
/// replacement, seeded) and pairs it with the full test split.
///
/// Train labels are ground-truth flags (all majority); test labels flag
/// each sample as majority (1) or minority (0). Requesting the whole pool
/// yields manifest order regardless of seed.
pub fn make_splits(
    dataset: &LoadedDataset,
    train_size: usize,
    seed: u64,
) -> Result<(SampleBatch, SampleBatch)> {
    let pool: Vec<&LoadedSample> = dataset
        .samples()
        .iter()
        .filter(|s| s.split == Split::Train)
        .collect();
    if train_size > pool.len() {
        return Err(Error::TrainSizeExceedsPool {
            requested: train_size,
            available: pool.len(),
        });
    }

    let chosen: Vec<&LoadedSample> = if train_size == pool.len() {
        pool
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = rand::seq::index::sample(&mut rng, pool.len(), train_size).into_vec();
        // manifest order within the subset keeps downstream iteration stable
        picks.sort_unstable();
        picks.into_iter().map(|i| pool[i]).collect()
    };

    let train = SampleBatch::new(
        chosen.iter().map(|s| s.image.clone()).collect(),
        vec![LABEL_MAJORITY; chosen.len()],
        chosen.iter().map(|s| s.id.clone()).collect(),
    )?;

    let test_samples: Vec<&LoadedSample> = dataset
        .samples()
        .iter()
        .filter(|s| s.split == Split::Test)
        .collect();
    let test = SampleBatch::new(
        test_samples.iter().map(|s| s.image.clone()).collect(),
        test_samples
            .iter()
            .map(|s| {
                if s.class_id == dataset.majority_class() {
                    LABEL_MAJORITY
                } else {
                    LABEL_MINORITY
                }
            })
            .collect(),
        test_samples.iter().map(|s| s.id.clone()).collect(),
    )?;

    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn toy_dataset(train: usize, test_maj: usize, test_min: usize) -> LoadedDataset {
        let dims = Dims::new(2, 2, 1);
        let mut samples = Vec::new();
        for i in 0..train {
            samples.push(LoadedSample {
                id: format!("train_{i}"),
                class_id: "B".into(),
                split: Split::Train,
                image: Image::constant(dims, (i % 10) as f32 / 10.0).unwrap(),
            });
        }
        for i in 0..test_maj {
            samples.push(LoadedSample {
                id: format!("test_maj_{i}"),
                class_id: "B".into(),
                split: Split::Test,
                image: Image::constant(dims, 0.5).unwrap(),
            });
        }
        for i in 0..test_min {
            samples.push(LoadedSample {
                id: format!("test_min_{i}"),
                class_id: "other".into(),
                split: Split::Test,
                image: Image::constant(dims, 0.9).unwrap(),
            });
        }
        LoadedDataset {
            dims,
            majority_class: "B".into(),
            samples,
            manifest_hash: "test".into(),
        }
    }

    #[test]
    fn batch_rejects_mismatched_lengths_and_dims() {
        let im = Image::constant(Dims::new(2, 2, 1), 0.5).unwrap();
        assert!(SampleBatch::new(vec![im.clone()], vec![1, 2], vec!["a".into()]).is_err());
        let other = Image::constant(Dims::new(3, 3, 1), 0.5).unwrap();
        assert!(
            SampleBatch::new(vec![im, other], vec![1, 1], vec!["a".into(), "b".into()]).is_err()
        );
    }

    #[test]
    fn full_pool_is_manifest_order_regardless_of_seed() {
        let ds = toy_dataset(5, 2, 2);
        let (a, _) = make_splits(&ds, 5, 1).unwrap();
        let (b, _) = make_splits(&ds, 5, 999).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ids()[0], "train_0");
        assert_eq!(a.ids()[4], "train_4");
    }

    #[test]
    fn same_seed_same_subset_different_seed_usually_differs() {
        let ds = toy_dataset(50, 1, 1);
        let (a, _) = make_splits(&ds, 10, 7).unwrap();
        let (b, _) = make_splits(&ds, 10, 7).unwrap();
        assert_eq!(a, b);
        let (c, _) = make_splits(&ds, 10, 8).unwrap();
        assert_ne!(a.ids(), c.ids());
    }

    #[test]
    fn test_batch_carries_ground_truth_flags() {
        let ds = toy_dataset(3, 2, 3);
        let (_, test) = make_splits(&ds, 3, 0).unwrap();
        assert_eq!(test.len(), 5);
        assert_eq!(test.labels(), &[1, 1, 0, 0, 0]);
    }

    #[test]
    fn oversized_request_is_rejected() {
        let ds = toy_dataset(3, 1, 1);
        match make_splits(&ds, 4, 0) {
            Err(Error::TrainSizeExceedsPool {
                requested,
                available,
            }) => {
                assert_eq!((requested, available), (4, 3));
            }
            other => panic!("expected pool error, got {other:?}"),
        }
    }

    #[test]
    fn split_partition_covers_manifest_exactly() {
        let ds = toy_dataset(20, 4, 4);
        let (train, test) = make_splits(&ds, 20, 3).unwrap();
        let train_ids: HashSet<_> = train.ids().iter().collect();
        let test_ids: HashSet<_> = test.ids().iter().collect();
        assert!(train_ids.is_disjoint(&test_ids));
        let all: HashSet<_> = ds.samples().iter().map(|s| &s.id).collect();
        let combined: HashSet<_> = train_ids.union(&test_ids).copied().collect();
        assert_eq!(combined, all);
    }

    #[test]
    fn subset_stays_within_pool_and_without_replacement() {
        let ds = toy_dataset(30, 2, 2);
        let (train, _) = make_splits(&ds, 12, 42).unwrap();
        assert_eq!(train.len(), 12);
        let unique: HashSet<_> = train.ids().iter().collect();
        assert_eq!(unique.len(), 12, "sampling must be without replacement");
        assert!(train.ids().iter().all(|id| id.starts_with("train_")));
    }
}
