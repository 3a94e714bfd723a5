//! Dataset ingestion: manifest files, image decoding and preprocessing,
//! train/test split construction, and synthetic dataset generation.

mod manifest;
mod preprocess;
mod splits;
mod synthetic;

pub use manifest::{
    load_manifest, manifest_hash, manifest_to_string, parse_manifest_str, DatasetManifest,
    ManifestEntry, Split,
};
pub use preprocess::{decode_image_bytes, decode_image_file, dynamic_to_array, preprocess};
pub use splits::{
    load_dataset, make_splits, LoadedDataset, LoadedSample, SampleBatch, LABEL_MAJORITY,
    LABEL_MINORITY,
};
pub(crate) use synthetic::write_png;
pub use synthetic::{
    sample_texture, synthesize, synthesize_and_load, SynthesisReport, SyntheticConfig,
};
