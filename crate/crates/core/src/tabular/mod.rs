//! Categorical crash data: schema, CSV I/O, one-hot encoding, splits, class
//! weights and the synthetic generator.

mod dataset;
mod encode;
mod schema;
mod split;
mod synth;
mod weights;

pub use dataset::{
    class_counts, load_dataset, read_csv_header, read_dataset_csv, save_dataset, write_dataset_csv, Dataset, Row,
};
pub use encode::{
    column_map, encode_onehot, is_encoded_header, read_encoded_csv, write_encoded_csv, EncodedMatrix,
};
pub use schema::{Field, Schema, FALLBACK_LEVEL, LABEL_COLUMN, LABEL_LEVELS, NUM_CLASSES};
pub use split::{split_indices, stratified_split, SplitIndices, SplitSpec};
pub use synth::{synth_generate, GeneratorProfile, PROFILE_VERSION, MOTORCYCLIST_PROFILE_JSON};
pub use weights::class_weights;
