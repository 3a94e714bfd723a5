//! One-class image classification by transform prediction.
//!
//! The toolkit trains an n-way classifier to recognize which member of a
//! fixed transformation set produced a given image, using only majority
//! class training data. At test time each image is expanded through the
//! same set, the classifier produces an n x n probability matrix, and the
//! sum of its diagonal scores how "majority-like" the image is: a model
//! that learned the majority class's appearance recovers the applied
//! transform reliably for majority samples and poorly for minority ones.
//!
//! Pipeline stages, in crate module order:
//! - [`transforms`]: intensity and geometric transformation sets
//! - [`dataio`]: manifests, image decoding, splits, synthetic data
//! - [`classifier`]: the n-way convolutional classifier
//! - [`scoring`]: probability matrices and diagonal-sum scores
//! - [`evaluation`]: ranking metrics (AUC, AUPR) over repeated runs
//! - [`experiment`]: end-to-end experiment configs and drivers

pub mod classifier;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod image;
pub mod scoring;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{Dims, Image};
